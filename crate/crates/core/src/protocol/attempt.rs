use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::devices::{
    afc_efficiency, analyzer_patterns, apply_fiber, apply_memory, build_entangled_state,
    build_input_qubit, AnalyzerSetting, InputQubitSpec, InputQubitState, WindowPatterns,
    IDLER_MODES, SIGNAL_MODES,
};
use crate::fock::{click_branches, Bin, Channel, DensityOperator, DetectorSpec, ModeLabel};

use super::bsm::{classify_bsm, pattern_clicks, BellOutcome, Click, Detector};
use super::ProtocolError;

/// Vacuum ports that split the distinguishable input light between the detectors.
const AUX_SPLIT: [ModeLabel; 2] = [ModeLabel::Ancilla(100), ModeLabel::Ancilla(101)];

/// A stored teleportation attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorySlot {
    pub attempt_id: u64,
    pub absorb_time_ps: u64,
    pub emission_time_ps: u64,
    pub feed_forward_pending: bool,
    /// Whether the π correction has been applied to the retrieved photon.
    pub phase_corrected: bool,
    /// Normalized state of the signal modes given the BSM pattern.
    pub conditional_state: Arc<DensityOperator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedForwardStatus {
    NotNeeded,
    Applied,
    DeadlineMissed,
}

/// Feed-forward on a heralded slot: `Ψ⁻` gets a π phase on the late bin.
pub fn apply_feed_forward(
    slot: &MemorySlot,
    outcome: BellOutcome,
    now_ps: u64,
) -> Result<(MemorySlot, FeedForwardStatus), ProtocolError> {
    let mut out = slot.clone();
    out.feed_forward_pending = false;
    if outcome != BellOutcome::PsiMinus {
        return Ok((out, FeedForwardStatus::NotNeeded));
    }
    if now_ps >= slot.emission_time_ps {
        return Ok((out, FeedForwardStatus::DeadlineMissed));
    }
    out.conditional_state = Arc::new(
        slot.conditional_state
            .phase_shift(ModeLabel::SIGNAL_LATE, PI)?,
    );
    out.phase_corrected = true;
    Ok((out, FeedForwardStatus::Applied))
}

/// Everything that is random in one attempt, with its probabilities.
///
/// Attempts are independent and identically distributed, so the BSM click
/// pattern distribution, the conditional memory state of each pattern and
/// the analyzer response are computed once per configuration. Pattern bits
/// follow [`Click::bit`].
#[derive(Debug, Clone)]
pub struct AttemptModel {
    pub pattern_probs: [f64; 16],
    /// Classification of each pattern inside a single attempt.
    pub outcomes: [BellOutcome; 16],
    /// Normalized signal state per pattern; `None` for impossible patterns.
    pub conditional: Vec<Option<Arc<DensityOperator>>>,
    /// Analyzer click distribution per pattern, without and with the π correction.
    pub analyzer: Vec<[WindowPatterns; 2]>,
    pub setting: AnalyzerSetting,
    pub memory_efficiency: f64,
    pub dead_time_ns: [f64; 2],
    pub bin_separation_ns: f64,
}

fn detector_params(config: &ExperimentConfig, d: Detector) -> crate::fock::ThresholdDetectorParams {
    match d {
        Detector::D1 => config.detectors.d1,
        Detector::D2 => config.detectors.d2,
    }
}

/// Light arriving at the BSM detectors, before detection.
#[derive(Debug, Clone)]
pub struct BsmSetup {
    /// Signal, idler and indistinguishable input modes after the beam splitters.
    pub main: DensityOperator,
    /// Distinguishable input light, in a product state with `main`.
    pub background: Option<DensityOperator>,
    /// The four BSM detectors in [`Click::ALL`] order.
    pub detectors: Vec<DetectorSpec>,
}

impl BsmSetup {
    pub fn new(config: &ExperimentConfig, input: &InputQubitSpec) -> Result<Self, ProtocolError> {
        let cutoff = config.simulation.cutoff;
        let tol = config.simulation.truncation_tolerance;
        let source = build_entangled_state(&config.spdc, cutoff)?.with_truncation_tolerance(tol);
        let (source, _) = apply_fiber(&source, &IDLER_MODES, &config.fiber)?;
        let (main, background) = match build_input_qubit(input, cutoff)? {
            InputQubitState::Product { matched, aux } => {
                let mut bg = aux;
                for (b, anc) in Bin::BOTH.into_iter().zip(AUX_SPLIT) {
                    bg = bg.append_vacuum(anc)?.beam_splitter(
                        ModeLabel::bin(Channel::Aux, b),
                        anc,
                        0.5,
                        0.0,
                    )?;
                }
                (source.tensor(&matched)?, Some(bg))
            }
            InputQubitState::Joint(joint) => {
                let mut s = source.tensor(&joint)?;
                for (b, anc) in Bin::BOTH.into_iter().zip(AUX_SPLIT) {
                    s = s.append_vacuum(anc)?.beam_splitter(
                        ModeLabel::bin(Channel::Aux, b),
                        anc,
                        0.5,
                        0.0,
                    )?;
                }
                (s, None)
            }
        };
        let mut main = main;
        for b in Bin::BOTH {
            main = main.beam_splitter(
                ModeLabel::bin(Channel::Idler, b),
                ModeLabel::bin(Channel::Input, b),
                0.5,
                0.0,
            )?;
        }
        // idler port → D1, input port → D2; distinguishable light split evenly
        let detectors: Vec<DetectorSpec> = Click::ALL
            .iter()
            .map(|c| {
                let (port, aux) = match c.detector {
                    Detector::D1 => (
                        ModeLabel::bin(Channel::Idler, c.bin),
                        ModeLabel::bin(Channel::Aux, c.bin),
                    ),
                    Detector::D2 => (
                        ModeLabel::bin(Channel::Input, c.bin),
                        AUX_SPLIT[c.bin as usize],
                    ),
                };
                DetectorSpec::new(vec![port, aux], detector_params(config, c.detector))
            })
            .collect();
        Ok(BsmSetup {
            main,
            background,
            detectors,
        })
    }
}

impl AttemptModel {
    pub fn new(
        config: &ExperimentConfig,
        input: &InputQubitSpec,
        setting: &AnalyzerSetting,
    ) -> Result<Self, ProtocolError> {
        let setup = BsmSetup::new(config, input)?;
        let branches = click_branches(
            &setup.main,
            setup.background.as_ref(),
            &setup.detectors,
            &SIGNAL_MODES,
        )?;
        Self::from_branches(config, setting, branches)
    }

    fn from_branches(
        config: &ExperimentConfig,
        setting: &AnalyzerSetting,
        branches: Vec<DensityOperator>,
    ) -> Result<Self, ProtocolError> {
        let total: f64 = branches.iter().map(|b| b.trace()).sum();
        let dead = [
            config.detectors.d1.dead_time_ns,
            config.detectors.d2.dead_time_ns,
        ];
        let bin_sep = config.timing.bin_separation_ns;
        let mut pattern_probs = [0.0; 16];
        let mut outcomes = [BellOutcome::NoHerald; 16];
        let mut conditional = Vec::with_capacity(16);
        let mut analyzer = Vec::with_capacity(16);
        for (p, branch) in branches.iter().enumerate() {
            pattern_probs[p] = (branch.trace() / total).max(0.0);
            outcomes[p] = classify_pattern(p, dead, bin_sep);
            if branch.trace() <= 1e-300 {
                conditional.push(None);
                let mut idle = WindowPatterns { probs: [0.0; 8] };
                idle.probs[0] = 1.0;
                analyzer.push([idle.clone(), idle]);
                continue;
            }
            let state = branch.normalized()?;
            let stored = apply_memory(&state, &config.memory)?;
            let corrected = stored.phase_shift(ModeLabel::SIGNAL_LATE, PI)?;
            analyzer.push([
                analyzer_patterns(&stored, setting, &config.detectors.analyzer)?,
                analyzer_patterns(&corrected, setting, &config.detectors.analyzer)?,
            ]);
            conditional.push(Some(Arc::new(state)));
        }
        Ok(AttemptModel {
            pattern_probs,
            outcomes,
            conditional,
            analyzer,
            setting: *setting,
            memory_efficiency: afc_efficiency(config.memory.storage_time_us, &config.memory),
            dead_time_ns: dead,
            bin_separation_ns: bin_sep,
        })
    }

    pub fn outcome_probability(&self, outcome: BellOutcome) -> f64 {
        (0..16)
            .filter(|&p| self.outcomes[p] == outcome)
            .map(|p| self.pattern_probs[p])
            .sum()
    }

    /// Probability that an attempt produces no click anywhere.
    pub fn idle_probability(&self) -> f64 {
        self.pattern_probs[0] * self.analyzer[0][0].probs[0]
    }

    /// Analyzer distribution for pattern `p` given the feed-forward decision.
    pub fn analyzer_given(&self, pattern: usize, corrected: bool) -> &WindowPatterns {
        &self.analyzer[pattern][corrected as usize]
    }
}

fn classify_pattern(pattern: usize, dead: [f64; 2], bin_sep: f64) -> BellOutcome {
    let clicks = pattern_clicks(pattern);
    // dead time differs per detector: filter each detector with its own
    let kept: Vec<Click> = Detector::BOTH
        .iter()
        .flat_map(|d| {
            let own: Vec<Click> = clicks
                .iter()
                .copied()
                .filter(|c| c.detector == *d)
                .collect();
            super::bsm::filter_dead_time(&own, dead[d.index()], bin_sep)
        })
        .collect();
    classify_bsm(&kept, 0.0, bin_sep)
}

/// Outcome of a single sampled attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptSample {
    pub outcome: BellOutcome,
    pub clicks: Vec<Click>,
    pub slot: Option<MemorySlot>,
}

/// Samples one attempt in isolation (no dead time carried over from earlier
/// attempts). A slot is returned for heralded attempts.
pub fn run_attempt<R: Rng + ?Sized>(
    model: &AttemptModel,
    config: &ExperimentConfig,
    attempt_id: u64,
    rng: &mut R,
) -> AttemptSample {
    let u: f64 = rng.gen();
    let pattern = sample_index(&model.pattern_probs, u);
    let clicks = pattern_clicks(pattern);
    let outcome = model.outcomes[pattern];
    let slot = match (&model.conditional[pattern], outcome.is_herald()) {
        (Some(state), true) => {
            let absorb =
                super::timing::us_to_ps(attempt_id as f64 * config.timing.attempt_period_us);
            Some(MemorySlot {
                attempt_id,
                absorb_time_ps: absorb,
                emission_time_ps: absorb + super::timing::us_to_ps(config.memory.storage_time_us),
                feed_forward_pending: true,
                phase_corrected: false,
                conditional_state: state.clone(),
            })
        }
        _ => None,
    };
    AttemptSample {
        outcome,
        clicks,
        slot,
    }
}

/// Index `i` with `Σ_{j<i} w_j ≤ u·Σw < Σ_{j≤i} w_j`.
pub(crate) fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = u * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    last
}
