use std::collections::HashSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRng, TestRunner};
use teleport_sim::fock::{
    click_branches, Complex, DensityOperator, DetectorSpec, ModeLabel, PureState, Register,
    ThresholdDetectorParams,
};

pub const A: ModeLabel = ModeLabel::Ancilla(0);
pub const B: ModeLabel = ModeLabel::Ancilla(1);
pub const C: ModeLabel = ModeLabel::Ancilla(2);
pub const CUTOFF: u8 = 2;

type Check = Result<(), TestCaseError>;

/// Occupations of three modes with at most two photons in total.
fn basis() -> Vec<[u8; 3]> {
    let mut v = Vec::new();
    for a in 0..=2u8 {
        for b in 0..=2 - a {
            for c in 0..=2 - a - b {
                v.push([a, b, c]);
            }
        }
    }
    v
}

fn register() -> Register {
    Register::new(vec![A, B, C]).unwrap()
}

fn pure(amps: &[(f64, f64)]) -> DensityOperator {
    let occ = basis();
    let terms: Vec<(&[u8], Complex)> = occ
        .iter()
        .zip(amps)
        .map(|(o, &(re, im))| (&o[..], Complex::new(re, im)))
        .collect();
    let p = PureState::new(register(), &terms)
        .unwrap()
        .normalized()
        .unwrap();
    DensityOperator::from_pure(&p, CUTOFF).unwrap()
}

fn amplitudes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), basis().len())
        .prop_filter("non-zero", |v| {
            v.iter().any(|(r, i)| r.abs() + i.abs() > 1e-3)
        })
}

/// A random mixture of two random pure states.
pub fn mixed_state() -> impl Strategy<Value = DensityOperator> {
    (amplitudes(), amplitudes(), 0.0..1.0f64)
        .prop_map(|(a, b, w)| pure(&a).mix(&pure(&b), w).unwrap())
}

fn max_difference(x: &DensityOperator, y: &DensityOperator) -> f64 {
    let keys: HashSet<_> = x
        .entries()
        .chain(y.entries())
        .map(|(k, b, _)| (k, b))
        .collect();
    keys.into_iter()
        .map(|(k, b)| (x.entry(k, b) - y.entry(k, b)).norm())
        .fold(0.0, f64::max)
}

fn detector(eff: f64, dark: f64) -> ThresholdDetectorParams {
    ThresholdDetectorParams {
        efficiency: eff,
        dark_click_probability: dark,
        dead_time_ns: 0.0,
    }
}

pub fn fraction() -> std::ops::RangeInclusive<f64> {
    0.0..=1.0
}

pub fn phase() -> std::ops::Range<f64> {
    -3.2..3.2
}

pub fn passive_optics_preserves_trace(
    rho: DensityOperator,
    t: f64,
    phase: f64,
    survival: f64,
) -> Check {
    let out = rho
        .beam_splitter(A, B, t, phase)
        .unwrap()
        .phase_shift(C, phase)
        .unwrap()
        .loss_channel(B, survival)
        .unwrap();
    prop_assert!((out.trace() - 1.0).abs() < 1e-12);
    Ok(())
}

pub fn states_stay_hermitian_and_positive(
    rho: DensityOperator,
    t: f64,
    phase: f64,
    survival: f64,
    coherence: f64,
) -> Check {
    let out = rho
        .beam_splitter(B, C, t, phase)
        .unwrap()
        .loss_channel(A, survival)
        .unwrap()
        .dephase(C, coherence)
        .unwrap();
    prop_assert!(out.hermiticity_error() < 1e-12);
    prop_assert!(out.min_eigenvalue().unwrap() > -1e-10);
    let reduced = out.partial_trace(&[A, C]).unwrap();
    prop_assert!((reduced.trace() - 1.0).abs() < 1e-12);
    prop_assert!(reduced.min_eigenvalue().unwrap() > -1e-10);
    Ok(())
}

pub fn detection_povm_is_complete(rho: DensityOperator, e1: f64, e2: f64, dark: f64) -> Check {
    let dets = [
        DetectorSpec::new(vec![A], detector(e1, dark)),
        DetectorSpec::new(vec![B], detector(e2, dark)),
    ];
    let branches = click_branches(&rho, None, &dets, &[C]).unwrap();
    let total: f64 = branches.iter().map(|b| b.trace()).sum();
    prop_assert!((total - 1.0).abs() < 1e-12);
    for b in &branches {
        prop_assert!(b.trace() > -1e-15);
    }
    let p = rho.click_probability(&[A], &detector(e1, dark)).unwrap();
    let marginal = branches[1].trace() + branches[3].trace();
    prop_assert!((p - marginal).abs() < 1e-12);
    Ok(())
}

pub fn beam_splitter_is_unitary(rho: DensityOperator, t: f64, phase: f64) -> Check {
    let back = rho
        .beam_splitter(A, B, t, phase)
        .unwrap()
        .beam_splitter(B, A, t, -phase)
        .unwrap();
    prop_assert!(max_difference(&back, &rho) < 1e-12);
    let out = rho.beam_splitter(A, B, t, phase).unwrap();
    prop_assert!((out.purity() - rho.purity()).abs() < 1e-12);
    Ok(())
}

pub fn hong_ou_mandel_coincidences(overlap: f64) -> Check {
    // photon 1 in A; photon 2 split between B (same mode shape) and C (orthogonal)
    let d = ModeLabel::Ancilla(3);
    let reg = Register::new(vec![A, B, C, d]).unwrap();
    let s = overlap.sqrt();
    let r = (1.0 - overlap).sqrt();
    let psi = PureState::new(
        reg,
        &[
            (&[1, 1, 0, 0], Complex::new(s, 0.0)),
            (&[1, 0, 1, 0], Complex::new(r, 0.0)),
        ],
    )
    .unwrap();
    // A and B interfere; C meets an empty mode D on its own splitter
    let out = DensityOperator::from_pure(&psi, CUTOFF)
        .unwrap()
        .beam_splitter(A, B, 0.5, 0.0)
        .unwrap()
        .beam_splitter(C, d, 0.5, 0.0)
        .unwrap();
    let perfect = detector(1.0, 0.0);
    let dets = [
        DetectorSpec::new(vec![A, d], perfect),
        DetectorSpec::new(vec![B, C], perfect),
    ];
    let keep = ModeLabel::Ancilla(9);
    let out = out.append_vacuum(keep).unwrap();
    let branches = click_branches(&out, None, &dets, &[keep]).unwrap();
    let coincidence = branches[3].trace();
    prop_assert!((coincidence - (1.0 - overlap) / 2.0).abs() < 1e-12);
    Ok(())
}

pub fn uniform_loss_commutes_with_beam_splitter(
    rho: DensityOperator,
    t: f64,
    phase: f64,
    eta: f64,
) -> Check {
    let loss_first = rho
        .loss_channel(A, eta)
        .unwrap()
        .loss_channel(B, eta)
        .unwrap()
        .beam_splitter(A, B, t, phase)
        .unwrap();
    let loss_last = rho
        .beam_splitter(A, B, t, phase)
        .unwrap()
        .loss_channel(A, eta)
        .unwrap()
        .loss_channel(B, eta)
        .unwrap();
    prop_assert!(max_difference(&loss_first, &loss_last) < 1e-12);
    Ok(())
}

pub fn losses_compose(rho: DensityOperator, e1: f64, e2: f64) -> Check {
    let twice = rho
        .loss_channel(C, e1)
        .unwrap()
        .loss_channel(C, e2)
        .unwrap();
    let once = rho.loss_channel(C, e1 * e2).unwrap();
    prop_assert!(max_difference(&twice, &once) < 1e-12);
    Ok(())
}

fn msg<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        failure_persistence: None,
        ..Config::with_cases(cases)
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

/// Runs every property for `cases` deterministic cases; returns the names
/// of the failing ones with their messages.
pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        (
            "trace",
            msg(runner(cases).run(
                &(mixed_state(), fraction(), phase(), fraction()),
                |(r, t, p, s)| passive_optics_preserves_trace(r, t, p, s),
            )),
        ),
        (
            "positivity",
            msg(runner(cases).run(
                &(mixed_state(), fraction(), phase(), fraction(), fraction()),
                |(r, t, p, s, c)| states_stay_hermitian_and_positive(r, t, p, s, c),
            )),
        ),
        (
            "povm",
            msg(runner(cases).run(
                &(mixed_state(), fraction(), fraction(), 0.0..0.1f64),
                |(r, a, b, d)| detection_povm_is_complete(r, a, b, d),
            )),
        ),
        (
            "unitarity",
            msg(
                runner(cases).run(&(mixed_state(), fraction(), phase()), |(r, t, p)| {
                    beam_splitter_is_unitary(r, t, p)
                }),
            ),
        ),
        (
            "hom",
            msg(runner(cases).run(&fraction(), hong_ou_mandel_coincidences)),
        ),
        (
            "loss-commutes",
            msg(runner(cases).run(
                &(mixed_state(), fraction(), phase(), fraction()),
                |(r, t, p, e)| uniform_loss_commutes_with_beam_splitter(r, t, p, e),
            )),
        ),
        (
            "loss-composes",
            msg(
                runner(cases).run(&(mixed_state(), fraction(), fraction()), |(r, a, b)| {
                    losses_compose(r, a, b)
                }),
            ),
        ),
    ]
}
