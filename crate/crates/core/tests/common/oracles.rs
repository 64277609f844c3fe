use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teleport_sim::analysis::{report, BoundInputs};
use teleport_sim::config::ExperimentConfig;
use teleport_sim::devices::{signal_qubit, AnalyzerSetting, InputQubitSpec, NamedState, Window};
use teleport_sim::fock::{Bin, Complex, FockBasisState, ModeLabel, PureState};
use teleport_sim::protocol::{
    apply_feed_forward, bell_decomposition, classify_bsm, teleported_state, AttemptModel,
    BellOutcome, BellState, BsmSetup, Click, Detector, MemorySlot,
};
use teleport_sim::scenario::{measure, RunOptions};

pub type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn random_qubits(n: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    (0..n)
        .map(|_| {
            let theta: f64 = rng.gen_range(0.0..PI / 2.0);
            (theta.cos(), theta.sin(), rng.gen_range(-PI..PI))
        })
        .collect()
}

/// Signal state of each Bell branch, written out by hand.
fn expected_signal(bell: BellState, a: f64, b: f64, phi: f64) -> PureState {
    let e = Complex::from_polar(b, phi);
    let ca = Complex::new(a, 0.0);
    match bell {
        BellState::PhiPlus => signal_qubit(ca, e),
        BellState::PhiMinus => signal_qubit(ca, -e),
        BellState::PsiPlus => signal_qubit(e, ca),
        BellState::PsiMinus => signal_qubit(e, -ca),
    }
}

/// Every Bell branch of 20 random inputs against the hand expansion.
pub fn bell_decomposition_matches_expansion() -> Outcome {
    for (a, b, phi) in random_qubits(20) {
        let branches = bell_decomposition(a, b, phi).map_err(|e| e.to_string())?;
        ensure!(branches.len() == 4, "{} branches", branches.len());
        for br in &branches {
            ensure!(
                (br.probability - 0.25).abs() < 1e-12,
                "probability {}",
                br.probability
            );
            let f = br
                .signal
                .fidelity_to_pure(&expected_signal(br.bell, a, b, phi))
                .map_err(|e| e.to_string())?;
            ensure!(f >= 1.0 - 1e-12, "{:?} at ({a}, {b}, {phi}): {f}", br.bell);
        }
    }
    Ok(())
}

pub fn ideal() -> ExperimentConfig {
    ExperimentConfig::short_distance().with_ideal_devices()
}

pub fn single_photon_input(a: f64, b: f64, phi: f64) -> InputQubitSpec {
    InputQubitSpec {
        alpha: a,
        beta: b,
        phi,
        mean_photon_number: 1.0,
        overlap: 1.0,
        single_photon: true,
    }
}

/// With ideal devices both heralds leave the memory in the input state
/// after the correction.
pub fn feed_forward_makes_both_heralds_equal() -> Outcome {
    let c = ideal();
    let mut qubits = random_qubits(10);
    qubits.extend(NamedState::ALL.map(|s| s.amplitudes()));
    for (a, b, phi) in qubits {
        let m = AttemptModel::new(
            &c,
            &single_photon_input(a, b, phi),
            &AnalyzerSetting::pole(),
        )
        .map_err(|e| e.to_string())?;
        let target = teleported_state(a, b, phi);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for p in 0..16 {
            let (Some(state), outcome) = (&m.conditional[p], m.outcomes[p]) else {
                continue;
            };
            if !outcome.is_herald() {
                continue;
            }
            let slot = MemorySlot {
                attempt_id: 0,
                absorb_time_ps: 0,
                emission_time_ps: 10,
                feed_forward_pending: outcome == BellOutcome::PsiMinus,
                phase_corrected: false,
                conditional_state: state.clone(),
            };
            let (done, _) = apply_feed_forward(&slot, outcome, 5).map_err(|e| e.to_string())?;
            let f = done
                .conditional_state
                .fidelity_to_pure(&target)
                .map_err(|e| e.to_string())?;
            if outcome == BellOutcome::PsiPlus {
                plus.push(f);
            } else {
                minus.push(f);
            }
        }
        ensure!(
            !plus.is_empty() && !minus.is_empty(),
            "a herald type never occurs"
        );
        for f in plus.iter().chain(&minus) {
            ensure!(
                (f - plus[0]).abs() < 1e-9,
                "heralds differ: {f} vs {}",
                plus[0]
            );
            ensure!((f - 1.0).abs() < 1e-9, "fidelity {f}");
        }
    }
    Ok(())
}

/// An early input is stored, and analyzed, as a late photon.
pub fn early_input_reaches_the_analyzer_late() -> Outcome {
    let (a, b, phi) = NamedState::Early.amplitudes();
    let m = AttemptModel::new(
        &ideal(),
        &single_photon_input(a, b, phi),
        &AnalyzerSetting::pole(),
    )
    .map_err(|e| e.to_string())?;
    let late = signal_qubit(Complex::new(0.0, 0.0), Complex::new(1.0, 0.0));
    for p in 0..16 {
        let outcome = m.outcomes[p];
        if !outcome.is_herald() || m.pattern_probs[p] == 0.0 {
            continue;
        }
        let state = m.conditional[p]
            .as_ref()
            .ok_or("missing conditional state")?;
        let f = state.fidelity_to_pure(&late).map_err(|e| e.to_string())?;
        ensure!((f - 1.0).abs() < 1e-12, "pattern {p}: fidelity to late {f}");
        let w = m.analyzer_given(p, outcome == BellOutcome::PsiMinus);
        ensure!(
            w.marginal(Window::Early) == 0.0,
            "pattern {p}: early analyzer click"
        );
        ensure!(
            w.marginal(Window::Late) > 0.0,
            "pattern {p}: no late analyzer click"
        );
    }
    Ok(())
}

/// Classification written out case by case.
fn oracle_outcome(clicks: &[(Detector, Bin)]) -> BellOutcome {
    let mut unique: Vec<(Detector, Bin)> = Vec::new();
    for c in clicks {
        if !unique.contains(c) {
            unique.push(*c);
        }
    }
    if unique.len() != 2 {
        return BellOutcome::NoHerald;
    }
    let ((d1, b1), (d2, b2)) = (unique[0], unique[1]);
    if b1 == b2 {
        BellOutcome::NoHerald
    } else if d1 == d2 {
        BellOutcome::PsiPlus
    } else {
        BellOutcome::PsiMinus
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| v[j] > v[i]).unwrap();
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Every subset of the four click types, in every order.
pub fn classification_truth_table() -> Outcome {
    let all: Vec<(Detector, Bin)> = Click::ALL.iter().map(|c| (c.detector, c.bin)).collect();
    for mask in 0..16u32 {
        let chosen: Vec<(Detector, Bin)> = (0..4)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| all[i])
            .collect();
        let want = oracle_outcome(&chosen);
        let mut order: Vec<usize> = (0..chosen.len()).collect();
        loop {
            let clicks: Vec<Click> = order
                .iter()
                .map(|&i| Click::new(chosen[i].0, chosen[i].1))
                .collect();
            for dead in [0.0, 50.0] {
                let got = classify_bsm(&clicks, dead, 420.0);
                ensure!(got == want, "{clicks:?} dead {dead}: {got:?} vs {want:?}");
            }
            if !next_permutation(&mut order) {
                break;
            }
        }
    }
    Ok(())
}

/// Pattern probabilities by enumerating every basis state of the light at
/// the detectors, including the distinguishable background.
pub fn brute_force_patterns(setup: &BsmSetup) -> [f64; 16] {
    let main_reg = setup.main.register();
    let main_diag: Vec<(FockBasisState, f64)> = setup.main.diagonal().collect();
    let bg: Vec<(FockBasisState, f64)> = match &setup.background {
        Some(b) => b.diagonal().collect(),
        None => vec![(FockBasisState::VACUUM, 1.0)],
    };
    let photons = |d: usize, m: FockBasisState, b: FockBasisState| -> i32 {
        setup.detectors[d]
            .modes
            .iter()
            .map(|&label: &ModeLabel| {
                if let Some(p) = main_reg.position(label) {
                    m.get(p) as i32
                } else {
                    let bg_reg = setup.background.as_ref().unwrap().register();
                    b.get(bg_reg.position(label).unwrap()) as i32
                }
            })
            .sum()
    };
    let mut probs = [0.0; 16];
    for &(m, pm) in &main_diag {
        for &(b, pb) in &bg {
            for (pattern, slot) in probs.iter_mut().enumerate() {
                let mut p = pm * pb;
                for d in 0..4 {
                    let params = setup.detectors[d].params;
                    let silent = (1.0 - params.dark_click_probability)
                        * (1.0 - params.efficiency).powi(photons(d, m, b));
                    p *= if pattern >> d & 1 == 1 {
                        1.0 - silent
                    } else {
                        silent
                    };
                }
                *slot += p;
            }
        }
    }
    let total: f64 = probs.iter().sum();
    probs.map(|p| p / total)
}

/// Analytic pattern probabilities against enumeration at cutoff 2.
pub fn branch_probabilities_match_enumeration() -> Outcome {
    let base = ExperimentConfig::short_distance();
    let mut bright = base;
    bright.spdc.pair_amplitude = 0.1;
    bright.input_qubit.mean_photon_number = 0.05;
    bright.detectors.d1.dark_click_probability = 0.01;
    let mut joint = bright;
    joint.input_qubit.overlap = 1.0;
    for config in [base, bright, joint] {
        ensure!(
            config.simulation.cutoff == 2,
            "cutoff {}",
            config.simulation.cutoff
        );
        for state in NamedState::ALL {
            let input = config.input_qubit.spec_for(state);
            let setup = BsmSetup::new(&config, &input).map_err(|e| e.to_string())?;
            let model = AttemptModel::new(&config, &input, &AnalyzerSetting::pole())
                .map_err(|e| e.to_string())?;
            let oracle = brute_force_patterns(&setup);
            for (p, (got, want)) in model.pattern_probs.iter().zip(oracle).enumerate() {
                ensure!(
                    (got - want).abs() < 1e-12,
                    "{state:?} pattern {p}: {got} vs {want}"
                );
            }
        }
    }
    Ok(())
}

/// Visibilities from expected counts against 1 − w on the poles and
/// c(1 − w) on the equator.
pub fn estimators_reproduce_closed_form_visibilities() -> Outcome {
    let options = RunOptions {
        n_attempts: 0,
        master_seed: 0,
        strict: false,
    };
    for (w, c) in [(0.0, 1.0), (0.1, 1.0), (0.37, 1.0), (0.2, 0.8), (0.0, 0.5)] {
        let mut config = ideal();
        config.spdc.werner_white_noise = w;
        config.spdc.phase_coherence = c;
        for state in NamedState::ALL {
            let counts = measure(&config, &[state], &options, 0, &mut |_, _| {})
                .map_err(|e| e.to_string())?
                .expected;
            let r = report(&counts, &[state], BoundInputs::REFERENCE, None)
                .map_err(|e| e.to_string())?;
            let v = r.states[0].visibility.value;
            let want = if state.is_pole() {
                1.0 - w
            } else {
                c * (1.0 - w)
            };
            ensure!(
                (v - want).abs() < 1e-9,
                "{state:?} w={w} c={c}: {v} vs {want}"
            );
        }
    }
    Ok(())
}
