//! Physical components of the link, built from Fock-space primitives.
//!
//! - entangled pair source: one two-mode squeezer per time bin, with cross-bin
//!   dephasing and a white-noise admixture in the one-pair sector;
//! - weak-coherent input qubit, split into a part that interferes with the
//!   idler and a distinguishable part that does not;
//! - AFC memory and fiber as pure-loss channels;
//! - the two analyzers used on the retrieved photon.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::fock::{
    check_unit, click_branches, Bin, Channel, Complex, DensityOperator, DetectorSpec,
    FockBasisState, FockError, ModeLabel, PureState, Register, ThresholdDetectorParams,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeviceError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("{0}")]
    Invalid(String),
}

fn unit(name: &'static str, v: f64) -> Result<(), DeviceError> {
    check_unit(name, v).map_err(DeviceError::from)
}

pub const SIGNAL_MODES: [ModeLabel; 2] = [ModeLabel::SIGNAL_EARLY, ModeLabel::SIGNAL_LATE];
pub const IDLER_MODES: [ModeLabel; 2] = [ModeLabel::IDLER_EARLY, ModeLabel::IDLER_LATE];

/// Cavity-enhanced SPDC source producing energy-time entangled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpdcSourceParams {
    /// Squeezing amplitude λ per time bin; λ² is the pair probability ratio.
    pub pair_amplitude: f64,
    /// Damping of the coherence between early and late pair emission.
    pub phase_coherence: f64,
    /// Weight of the maximally mixed admixture in the one-pair sector.
    pub werner_white_noise: f64,
    pub tau_pump_us: f64,
    pub tau_pair_ns: f64,
    /// Replace the squeezers by exactly one pair in `|Φ⁺⟩` (oracle mode).
    pub ideal_single_pair: bool,
}

/// White-noise weight fitted by `calibrate` against the short-distance
/// equator fidelity of 0.88 with every other default in place.
pub const CALIBRATED_WERNER_NOISE: f64 = 0.073_730_468_75;

impl Default for SpdcSourceParams {
    fn default() -> Self {
        SpdcSourceParams {
            pair_amplitude: 0.03,
            phase_coherence: 1.0,
            werner_white_noise: CALIBRATED_WERNER_NOISE,
            tau_pump_us: 1.0,
            tau_pair_ns: 120.0,
            ideal_single_pair: false,
        }
    }
}

impl SpdcSourceParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        unit("spdc.phase_coherence", self.phase_coherence)?;
        unit("spdc.werner_white_noise", self.werner_white_noise)?;
        if !(self.pair_amplitude >= 0.0 && self.pair_amplitude < 1.0) {
            return Err(DeviceError::Invalid(format!(
                "spdc.pair_amplitude = {} must lie in [0, 1)",
                self.pair_amplitude
            )));
        }
        if !(self.tau_pump_us * 1000.0 > self.tau_pair_ns && self.tau_pair_ns > 0.0) {
            return Err(DeviceError::Invalid(format!(
                "spdc.tau_pump_us ({} μs) must exceed spdc.tau_pair_ns ({} ns) for energy-time entanglement",
                self.tau_pump_us, self.tau_pair_ns
            )));
        }
        Ok(())
    }
}

fn source_register() -> Register {
    Register::new(vec![
        ModeLabel::SIGNAL_EARLY,
        ModeLabel::SIGNAL_LATE,
        ModeLabel::IDLER_EARLY,
        ModeLabel::IDLER_LATE,
    ])
    .expect("static register")
}

/// `(|e_s e_i⟩ + |l_s l_i⟩)/√2` over `[s_e, s_l, i_e, i_l]`.
pub fn phi_plus() -> PureState {
    let h = Complex::new(FRAC_1_SQRT_2, 0.0);
    PureState::new(source_register(), &[(&[1, 0, 1, 0], h), (&[0, 1, 0, 1], h)])
        .expect("static state")
}

/// The signal/idler state selected by gating on the two time bins.
pub fn build_entangled_state(
    params: &SpdcSourceParams,
    cutoff: u8,
) -> Result<DensityOperator, DeviceError> {
    params.validate()?;
    let state = if params.ideal_single_pair {
        DensityOperator::from_pure(&phi_plus(), cutoff)?
    } else {
        DensityOperator::vacuum(source_register(), cutoff)?
            .inject_pair_source(
                ModeLabel::SIGNAL_EARLY,
                ModeLabel::IDLER_EARLY,
                params.pair_amplitude,
            )?
            .inject_pair_source(
                ModeLabel::SIGNAL_LATE,
                ModeLabel::IDLER_LATE,
                params.pair_amplitude,
            )?
    };
    let state = state.dephase(ModeLabel::SIGNAL_LATE, params.phase_coherence)?;
    Ok(werner_mix(&state, params.werner_white_noise)?)
}

/// `(1 − w)ρ + w(QρQ + tr(PρP)·𝟙/4)` with `P` the projector on the one-pair
/// sector `{|x_s y_i⟩ : x, y ∈ {e, l}}` and `Q = 𝟙 − P`.
fn werner_mix(state: &DensityOperator, weight: f64) -> Result<DensityOperator, FockError> {
    if weight == 0.0 {
        return Ok(state.clone());
    }
    let reg = state.register();
    let se = reg.mode(ModeLabel::SIGNAL_EARLY)?.index;
    let sl = reg.mode(ModeLabel::SIGNAL_LATE)?.index;
    let ie = reg.mode(ModeLabel::IDLER_EARLY)?.index;
    let il = reg.mode(ModeLabel::IDLER_LATE)?.index;
    let in_sector = |b: FockBasisState| {
        b.get(se) + b.get(sl) == 1 && b.get(ie) + b.get(il) == 1 && b.total() == 2
    };
    let sector_weight: f64 = state
        .diagonal()
        .filter(|(b, _)| in_sector(*b))
        .map(|(_, p)| p)
        .sum();
    let outside = DensityOperator::from_entries(
        reg.clone(),
        state.cutoff(),
        state
            .entries()
            .filter(|(a, b, _)| !in_sector(*a) && !in_sector(*b)),
    );
    let mut noise = Vec::with_capacity(4);
    for (s, i) in [(se, ie), (se, il), (sl, ie), (sl, il)] {
        let b = FockBasisState::VACUUM.with(s, 1).with(i, 1);
        noise.push((b, b, Complex::new(sector_weight / 4.0, 0.0)));
    }
    let depolarized = outside.add(&DensityOperator::from_entries(
        reg.clone(),
        state.cutoff(),
        noise,
    ))?;
    state.mix(&depolarized, weight)
}

/// Named input qubits used by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NamedState {
    #[serde(rename = "e")]
    Early,
    #[serde(rename = "l")]
    Late,
    #[serde(rename = "plus")]
    Plus,
    #[serde(rename = "R")]
    R,
}

impl NamedState {
    pub const ALL: [NamedState; 4] = [
        NamedState::Early,
        NamedState::Late,
        NamedState::Plus,
        NamedState::R,
    ];

    /// `(α, β, φ)` of `α|e⟩ + e^{iφ}β|l⟩`.
    pub fn amplitudes(self) -> (f64, f64, f64) {
        match self {
            NamedState::Early => (1.0, 0.0, 0.0),
            NamedState::Late => (0.0, 1.0, 0.0),
            NamedState::Plus => (FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0),
            NamedState::R => (FRAC_1_SQRT_2, FRAC_1_SQRT_2, std::f64::consts::FRAC_PI_2),
        }
    }

    pub fn is_pole(self) -> bool {
        matches!(self, NamedState::Early | NamedState::Late)
    }

    pub fn name(self) -> &'static str {
        match self {
            NamedState::Early => "e",
            NamedState::Late => "l",
            NamedState::Plus => "plus",
            NamedState::R => "R",
        }
    }

    pub fn parse(s: &str) -> Option<NamedState> {
        NamedState::ALL.into_iter().find(|n| n.name() == s)
    }
}

/// Time-bin qubit `α|e⟩ + e^{iφ}β|l⟩` carried by a weak coherent pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputQubitSpec {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub mean_photon_number: f64,
    /// Fraction of the pulse that is indistinguishable from the idler.
    pub overlap: f64,
    /// Use an exact single photon instead of a coherent pulse (oracle mode).
    pub single_photon: bool,
}

impl InputQubitSpec {
    pub fn named(state: NamedState, mean_photon_number: f64, overlap: f64) -> Self {
        let (alpha, beta, phi) = state.amplitudes();
        InputQubitSpec {
            alpha,
            beta,
            phi,
            mean_photon_number,
            overlap,
            single_photon: false,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let norm = self.alpha * self.alpha + self.beta * self.beta;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(DeviceError::Invalid(format!(
                "input_qubit: alpha² + beta² = {norm}, expected 1"
            )));
        }
        if !(self.mean_photon_number >= 0.0) {
            return Err(DeviceError::Invalid(format!(
                "input_qubit.mean_photon_number = {} must be non-negative",
                self.mean_photon_number
            )));
        }
        unit("input_qubit.overlap", self.overlap)
    }

    /// Complex amplitude of the qubit in `bin`.
    pub fn bin_amplitude(&self, bin: Bin) -> Complex {
        match bin {
            Bin::Early => Complex::new(self.alpha, 0.0),
            Bin::Late => Complex::from_polar(self.beta, self.phi),
        }
    }
}

/// Input qubit split into the part that interferes with the idler (modes
/// `Input/*`) and the distinguishable part (modes `Aux/*`).
#[derive(Debug, Clone, PartialEq)]
pub enum InputQubitState {
    /// Coherent pulses are product states across modes, so the two parts are
    /// returned as independent factors.
    Product {
        matched: DensityOperator,
        aux: DensityOperator,
    },
    /// A single photon entangles the two parts; one joint state over all
    /// four modes.
    Joint(DensityOperator),
}

impl InputQubitState {
    /// The full state over `[in_e, in_l, aux_e, aux_l]`.
    pub fn joint(&self) -> Result<DensityOperator, FockError> {
        match self {
            InputQubitState::Product { matched, aux } => matched.tensor(aux),
            InputQubitState::Joint(j) => Ok(j.clone()),
        }
    }
}

pub fn build_input_qubit(
    spec: &InputQubitSpec,
    cutoff: u8,
) -> Result<InputQubitState, DeviceError> {
    spec.validate()?;
    let matched_w = spec.overlap.sqrt();
    let aux_w = (1.0 - spec.overlap).sqrt();
    if spec.single_photon {
        let reg = Register::new(vec![
            ModeLabel::INPUT_EARLY,
            ModeLabel::INPUT_LATE,
            ModeLabel::AUX_EARLY,
            ModeLabel::AUX_LATE,
        ])?;
        let terms: Vec<(ModeLabel, Complex)> = [Channel::Input, Channel::Aux]
            .into_iter()
            .flat_map(|ch| {
                let w = if ch == Channel::Input {
                    matched_w
                } else {
                    aux_w
                };
                Bin::BOTH.map(|b| (ModeLabel::bin(ch, b), spec.bin_amplitude(b) * w))
            })
            .collect();
        let psi = PureState::single_photon(reg, &terms)?;
        return Ok(InputQubitState::Joint(DensityOperator::from_pure(
            &psi, cutoff,
        )?));
    }
    let amp = spec.mean_photon_number.sqrt();
    let part = |ch: Channel, w: f64| -> Result<DensityOperator, FockError> {
        let reg = Register::new(vec![
            ModeLabel::bin(ch, Bin::Early),
            ModeLabel::bin(ch, Bin::Late),
        ])?;
        let mut s = DensityOperator::vacuum(reg, cutoff)?;
        for b in Bin::BOTH {
            s = s.inject_coherent(ModeLabel::bin(ch, b), spec.bin_amplitude(b) * amp * w)?;
        }
        Ok(s)
    };
    Ok(InputQubitState::Product {
        matched: part(Channel::Input, matched_w)?,
        aux: part(Channel::Aux, aux_w)?,
    })
}

/// Atomic-frequency-comb memory with a fixed storage time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfcMemoryParams {
    /// Efficiency extrapolated to zero storage time.
    pub eta0: f64,
    /// Decay constant of the efficiency, μs.
    pub tau_afc_us: f64,
    pub storage_time_us: f64,
    pub retrieval_is_fixed_delay: bool,
}

/// Measured `(storage time μs, efficiency)` points the default curve passes through.
pub const AFC_REFERENCE_POINTS: [(f64, f64); 2] = [(10.0, 0.188), (17.5, 0.122)];

impl AfcMemoryParams {
    /// Exponential `η(t) = η₀ e^{−t/τ}` through two points.
    pub fn fit_two_point((t1, e1): (f64, f64), (t2, e2): (f64, f64), storage_time_us: f64) -> Self {
        let tau = (t2 - t1) / (e1 / e2).ln();
        AfcMemoryParams {
            eta0: e1 * (t1 / tau).exp(),
            tau_afc_us: tau,
            storage_time_us,
            retrieval_is_fixed_delay: true,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(DeviceError::Invalid(format!(
                "memory.eta0 = {} must lie in (0, 1]",
                self.eta0
            )));
        }
        if !(self.tau_afc_us > 0.0) {
            return Err(DeviceError::Invalid(format!(
                "memory.tau_afc_us = {} must be positive",
                self.tau_afc_us
            )));
        }
        if !(self.storage_time_us > 0.0) {
            return Err(DeviceError::Invalid(format!(
                "memory.storage_time_us = {} must be positive",
                self.storage_time_us
            )));
        }
        Ok(())
    }
}

impl Default for AfcMemoryParams {
    fn default() -> Self {
        AfcMemoryParams::fit_two_point(AFC_REFERENCE_POINTS[0], AFC_REFERENCE_POINTS[1], 10.0)
    }
}

/// Storage-and-retrieval efficiency after `t_us` μs, clamped to `(0, 1]`.
pub fn afc_efficiency(t_us: f64, params: &AfcMemoryParams) -> f64 {
    (params.eta0 * (-t_us.max(0.0) / params.tau_afc_us).exp()).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Stores and retrieves the signal photon: bin-symmetric loss.
pub fn apply_memory(
    state: &DensityOperator,
    params: &AfcMemoryParams,
) -> Result<DensityOperator, DeviceError> {
    params.validate()?;
    let eta = afc_efficiency(params.storage_time_us, params);
    let mut s = state.clone();
    for m in SIGNAL_MODES {
        s = s.loss_channel(m, eta)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberParams {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub propagation_delay_us_per_km: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        FiberParams {
            length_km: 0.005,
            attenuation_db_per_km: 0.3,
            propagation_delay_us_per_km: 5.0,
        }
    }
}

impl FiberParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        for (name, v) in [
            ("fiber.length_km", self.length_km),
            ("fiber.attenuation_db_per_km", self.attenuation_db_per_km),
            (
                "fiber.propagation_delay_us_per_km",
                self.propagation_delay_us_per_km,
            ),
        ] {
            if !(v >= 0.0) {
                return Err(DeviceError::Invalid(format!(
                    "{name} = {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn survival(&self) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * self.length_km / 10.0)
    }

    /// One-way propagation delay, μs.
    pub fn delay_us(&self) -> f64 {
        self.length_km * self.propagation_delay_us_per_km
    }
}

/// Sends `modes` through the fiber; returns the attenuated state and the delay in μs.
pub fn apply_fiber(
    state: &DensityOperator,
    modes: &[ModeLabel],
    params: &FiberParams,
) -> Result<(DensityOperator, f64), DeviceError> {
    params.validate()?;
    let survival = params.survival();
    let mut s = state.clone();
    for &m in modes {
        s = s.loss_channel(m, survival)?;
    }
    Ok((s, params.delay_us()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyzerKind {
    /// Delay-overlap interferometer; `theta` is the phase on the stored path.
    Equator { theta: f64 },
    /// Full transmission, time-resolved detection.
    Pole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    pub kind: AnalyzerKind,
    pub analysis_afc_storage_ns: f64,
    /// Fraction of each time bin that is stored (and delayed) by the
    /// analysis crystal; 0.5 balances storage and transmission.
    pub analysis_split: f64,
}

impl AnalyzerSetting {
    pub fn equator(theta: f64) -> Self {
        AnalyzerSetting {
            kind: AnalyzerKind::Equator { theta },
            analysis_afc_storage_ns: 420.0,
            analysis_split: 0.5,
        }
    }

    pub fn pole() -> Self {
        AnalyzerSetting {
            kind: AnalyzerKind::Pole,
            analysis_afc_storage_ns: 420.0,
            analysis_split: 0.5,
        }
    }

    pub fn is_balanced(&self) -> bool {
        (self.analysis_split - 0.5).abs() < 1e-12
    }
}

/// Detection windows of the analyzer, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Early,
    Central,
    Late,
}

impl Window {
    pub const ALL: [Window; 3] = [Window::Early, Window::Central, Window::Late];

    pub fn bit(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Early => "early",
            Window::Central => "central",
            Window::Late => "late",
        }
    }
}

/// Joint click distribution over the analyzer windows.
///
/// `probs[p]` is the probability of click pattern `p`, bit `Window::bit()`
/// set when that window clicked.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPatterns {
    pub probs: [f64; 8],
}

impl WindowPatterns {
    pub fn marginal(&self, w: Window) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(p, _)| p >> w.bit() & 1 == 1)
            .map(|(_, x)| x)
            .sum()
    }

    pub fn no_click(&self) -> f64 {
        self.probs[0]
    }
}

const STORED_EARLY: ModeLabel = ModeLabel::Ancilla(200);
const STORED_LATE: ModeLabel = ModeLabel::Ancilla(201);

/// Click-pattern distribution of the analyzer for a (possibly
/// unnormalized) state of the two signal modes, normalized by its trace.
pub fn analyzer_patterns(
    signal: &DensityOperator,
    setting: &AnalyzerSetting,
    detector: &ThresholdDetectorParams,
) -> Result<WindowPatterns, DeviceError> {
    unit("analyzer.analysis_split", setting.analysis_split)?;
    let trace = signal.trace();
    if trace <= 0.0 {
        return Err(FockError::ZeroTrace.into());
    }
    let signal = signal.partial_trace(&SIGNAL_MODES)?;
    let (state, windows): (DensityOperator, Vec<(Window, ModeLabel)>) = match setting.kind {
        AnalyzerKind::Equator { theta } => {
            let stored = setting.analysis_split;
            let s = signal
                .append_vacuum(STORED_EARLY)?
                .append_vacuum(STORED_LATE)?
                .beam_splitter(ModeLabel::SIGNAL_EARLY, STORED_EARLY, 1.0 - stored, 0.0)?
                .beam_splitter(ModeLabel::SIGNAL_LATE, STORED_LATE, 1.0 - stored, 0.0)?
                .phase_shift(STORED_EARLY, theta)?
                .phase_shift(STORED_LATE, theta)?
                // delayed early and prompt late share the central window; the
                // second port of the overlap is lost
                .beam_splitter(STORED_EARLY, ModeLabel::SIGNAL_LATE, 0.5, 0.0)?;
            (
                s,
                vec![
                    (Window::Early, ModeLabel::SIGNAL_EARLY),
                    (Window::Central, ModeLabel::SIGNAL_LATE),
                    (Window::Late, STORED_LATE),
                ],
            )
        }
        AnalyzerKind::Pole => (
            signal.append_vacuum(STORED_EARLY)?,
            vec![
                (Window::Early, ModeLabel::SIGNAL_EARLY),
                (Window::Late, ModeLabel::SIGNAL_LATE),
            ],
        ),
    };
    let detectors: Vec<DetectorSpec> = windows
        .iter()
        .map(|(_, m)| DetectorSpec::new(vec![*m], *detector))
        .collect();
    let branches = click_branches(&state, None, &detectors, &[STORED_EARLY])?;
    let mut probs = [0.0; 8];
    for (pattern, b) in branches.iter().enumerate() {
        let mut bits = 0usize;
        for (d, (w, _)) in windows.iter().enumerate() {
            if pattern >> d & 1 == 1 {
                bits |= 1 << w.bit();
            }
        }
        probs[bits] += b.trace() / trace;
    }
    Ok(WindowPatterns { probs })
}

/// Click probabilities of the early, central and late windows.
pub fn equator_analyzer(
    signal: &DensityOperator,
    setting: &AnalyzerSetting,
    detector: &ThresholdDetectorParams,
) -> Result<[f64; 3], DeviceError> {
    if !matches!(setting.kind, AnalyzerKind::Equator { .. }) {
        return Err(DeviceError::Invalid(
            "equator_analyzer needs an equator setting".into(),
        ));
    }
    let p = analyzer_patterns(signal, setting, detector)?;
    Ok(Window::ALL.map(|w| p.marginal(w)))
}

/// Click probabilities of the early and late windows.
pub fn pole_analyzer(
    signal: &DensityOperator,
    detector: &ThresholdDetectorParams,
) -> Result<[f64; 2], DeviceError> {
    let p = analyzer_patterns(signal, &AnalyzerSetting::pole(), detector)?;
    Ok([p.marginal(Window::Early), p.marginal(Window::Late)])
}

/// Pure time-bin qubit `a_e|e⟩ + a_l|l⟩` on the signal modes.
pub fn signal_qubit(a_early: Complex, a_late: Complex) -> PureState {
    let reg = Register::new(SIGNAL_MODES.to_vec()).expect("static register");
    PureState::single_photon(
        reg,
        &[
            (ModeLabel::SIGNAL_EARLY, a_early),
            (ModeLabel::SIGNAL_LATE, a_late),
        ],
    )
    .expect("static state")
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn c(x: f64) -> Complex {
        Complex::new(x, 0.0)
    }

    fn rho(a_e: Complex, a_l: Complex) -> DensityOperator {
        DensityOperator::from_pure(&signal_qubit(a_e, a_l), 2).unwrap()
    }

    fn ideal_source() -> SpdcSourceParams {
        SpdcSourceParams {
            werner_white_noise: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn entangled_state_one_pair_sector() {
        for lambda in [0.01, 0.05, 0.1] {
            let p = SpdcSourceParams {
                pair_amplitude: lambda,
                ..ideal_source()
            };
            let s = build_entangled_state(&p, 2).unwrap();
            let phi = phi_plus();
            let proj = DensityOperator::from_entries(
                s.register().clone(),
                2,
                s.entries().filter(|(a, b, _)| {
                    a.total() == 2
                        && b.total() == 2
                        && a.get(0) + a.get(1) == 1
                        && b.get(0) + b.get(1) == 1
                }),
            );
            assert!(proj.fidelity_to_pure(&phi).unwrap() >= 0.999);
        }
    }

    #[test]
    fn double_pair_ratio() {
        let lambda = 0.08;
        let s = build_entangled_state(
            &SpdcSourceParams {
                pair_amplitude: lambda,
                ..ideal_source()
            },
            2,
        )
        .unwrap();
        // brute force over the truncated basis: same-bin double pair versus one pair
        let mut two = 0.0;
        let mut one = 0.0;
        for (b, p) in s.diagonal() {
            let occ = b.occupations(4);
            if occ == [2, 0, 2, 0] {
                two += p;
            }
            if occ == [1, 0, 1, 0] {
                one += p;
            }
        }
        assert!((two / one - lambda * lambda).abs() < 1e-12);
    }

    #[test]
    fn dephased_source_is_classical_mixture() {
        let p = SpdcSourceParams {
            ideal_single_pair: true,
            phase_coherence: 0.0,
            ..ideal_source()
        };
        let s = build_entangled_state(&p, 2).unwrap();
        assert_eq!(s.element(&[1, 0, 1, 0], &[0, 1, 0, 1]), Complex::default());
        assert!((s.element(&[1, 0, 1, 0], &[1, 0, 1, 0]).re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn werner_noise_preserves_trace_and_positivity() {
        let p = SpdcSourceParams {
            werner_white_noise: 0.3,
            pair_amplitude: 0.03,
            ..Default::default()
        };
        let s = build_entangled_state(&p, 2).unwrap();
        assert!((s.trace() - 1.0).abs() < 1e-12);
        assert!(s.min_eigenvalue().unwrap() > -1e-9);
        let full = build_entangled_state(
            &SpdcSourceParams {
                werner_white_noise: 1.0,
                ideal_single_pair: true,
                ..p
            },
            2,
        )
        .unwrap();
        assert!((full.purity() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn source_coherence_condition() {
        let p = SpdcSourceParams {
            tau_pump_us: 0.1,
            tau_pair_ns: 120.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn input_qubit_bins() {
        let early = InputQubitSpec::named(NamedState::Early, 0.02, 1.0);
        let InputQubitState::Product { matched, aux } = build_input_qubit(&early, 2).unwrap()
        else {
            panic!()
        };
        assert_eq!(
            matched
                .photon_number_expectation(ModeLabel::INPUT_LATE)
                .unwrap(),
            0.0
        );
        assert_eq!(
            aux.photon_number_expectation(ModeLabel::AUX_EARLY).unwrap(),
            0.0
        );

        let plus = InputQubitSpec::named(NamedState::Plus, 0.02, 1.0);
        let InputQubitState::Product { matched, .. } = build_input_qubit(&plus, 3).unwrap() else {
            panic!()
        };
        for m in [ModeLabel::INPUT_EARLY, ModeLabel::INPUT_LATE] {
            // truncated Poisson mean at |a|² = 0.01
            assert!((matched.photon_number_expectation(m).unwrap() - 0.01).abs() < 1e-7);
        }

        let dist = InputQubitSpec::named(NamedState::Plus, 0.02, 0.0);
        let InputQubitState::Product { matched, aux } = build_input_qubit(&dist, 2).unwrap() else {
            panic!()
        };
        assert_eq!(
            matched
                .photon_number_expectation(ModeLabel::INPUT_EARLY)
                .unwrap(),
            0.0
        );
        assert!(aux.photon_number_expectation(ModeLabel::AUX_EARLY).unwrap() > 0.009);
        let bad = InputQubitSpec { alpha: 0.9, ..plus };
        assert!(build_input_qubit(&bad, 2).is_err());
    }

    #[test]
    fn afc_fit_through_reference_points() {
        let m = AfcMemoryParams::default();
        assert!((afc_efficiency(10.0, &m) - 0.188).abs() < 1e-3);
        assert!((afc_efficiency(17.5, &m) - 0.122).abs() < 1e-3);
        // two-point fit computed independently: tau = 7.5/ln(0.188/0.122)
        assert!((m.tau_afc_us - 17.344_211_822_618).abs() < 1e-9);
        assert!((m.eta0 - 0.334_622_552_266_68).abs() < 1e-9);
        assert!((afc_efficiency(0.0, &m) - m.eta0).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..200 {
            let e = afc_efficiency(i as f64 * 0.5, &m);
            assert!(e < prev && e > 0.0);
            prev = e;
        }
    }

    #[test]
    fn memory_scales_coherences_like_populations() {
        let h = c(FRAC_1_SQRT_2);
        let before = rho(h, h);
        let m = AfcMemoryParams::default();
        let after = apply_memory(&before, &m).unwrap();
        let pop = after.element(&[1, 0], &[1, 0]).re / before.element(&[1, 0], &[1, 0]).re;
        let coh = after.element(&[1, 0], &[0, 1]).re / before.element(&[1, 0], &[0, 1]).re;
        assert!((pop - 0.188).abs() < 1e-3);
        assert!((pop - coh).abs() < 1e-12);
    }

    #[test]
    fn fiber_delay_and_loss() {
        let f = FiberParams {
            length_km: 0.0,
            ..Default::default()
        };
        let s = rho(c(1.0), c(0.0));
        let (out, d) = apply_fiber(&s, &SIGNAL_MODES, &f).unwrap();
        assert_eq!(out, s);
        assert_eq!(d, 0.0);
        let km = FiberParams {
            length_km: 1.0,
            ..f
        };
        assert_eq!(km.delay_us(), 5.0);
        let ten = FiberParams {
            length_km: 10.0,
            ..f
        };
        assert!((ten.survival() - 10f64.powf(-0.3)).abs() < 1e-15);
        assert!((ten.survival() - 0.501).abs() < 1e-3);
        let short = FiberParams {
            length_km: 0.1,
            ..f
        };
        assert!((short.survival().powi(10) - km.survival()).abs() < 1e-12);
    }

    #[test]
    fn equator_analyzer_extremes() {
        let h = c(FRAC_1_SQRT_2);
        let ideal = ThresholdDetectorParams::IDEAL;
        let plus = rho(h, h);
        let max = equator_analyzer(&plus, &AnalyzerSetting::equator(0.0), &ideal).unwrap();
        let min = equator_analyzer(&plus, &AnalyzerSetting::equator(PI), &ideal).unwrap();
        assert!((max[1] - 0.5).abs() < 1e-12);
        assert!(min[1].abs() < 1e-12);
        assert!((max[0] - 0.25).abs() < 1e-12 && (max[2] - 0.25).abs() < 1e-12);

        let r = rho(h, Complex::new(0.0, FRAC_1_SQRT_2));
        let at =
            |theta: f64| equator_analyzer(&r, &AnalyzerSetting::equator(theta), &ideal).unwrap()[1];
        assert!((at(PI / 2.0) - 0.5).abs() < 1e-12);
        assert!(at(3.0 * PI / 2.0).abs() < 1e-12);

        let mixed = rho(c(1.0), c(0.0)).mix(&rho(c(0.0), c(1.0)), 0.5).unwrap();
        let a = equator_analyzer(&mixed, &AnalyzerSetting::equator(0.0), &ideal).unwrap();
        let b = equator_analyzer(&mixed, &AnalyzerSetting::equator(PI), &ideal).unwrap();
        assert!((a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn equator_fringe_is_sinusoid() {
        let h = c(FRAC_1_SQRT_2);
        let plus = rho(h, h);
        let ideal = ThresholdDetectorParams::IDEAL;
        let samples: Vec<f64> = (0..16)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 16.0;
                equator_analyzer(&plus, &AnalyzerSetting::equator(th), &ideal).unwrap()[1]
            })
            .collect();
        // least-squares fit of a + b cos θ + c sin θ on a uniform grid
        let n = samples.len() as f64;
        let a = samples.iter().sum::<f64>() / n;
        let b = samples
            .iter()
            .enumerate()
            .map(|(k, y)| y * (2.0 * PI * k as f64 / 16.0).cos())
            .sum::<f64>()
            * 2.0
            / n;
        let cc = samples
            .iter()
            .enumerate()
            .map(|(k, y)| y * (2.0 * PI * k as f64 / 16.0).sin())
            .sum::<f64>()
            * 2.0
            / n;
        let vis = (b * b + cc * cc).sqrt() / a;
        assert!((vis - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pole_analyzer_windows() {
        let h = c(FRAC_1_SQRT_2);
        let ideal = ThresholdDetectorParams::IDEAL;
        assert_eq!(
            pole_analyzer(&rho(c(1.0), c(0.0)), &ideal).unwrap(),
            [1.0, 0.0]
        );
        assert_eq!(
            pole_analyzer(&rho(c(0.0), c(1.0)), &ideal).unwrap(),
            [0.0, 1.0]
        );
        let p = pole_analyzer(&rho(h, h), &ideal).unwrap();
        assert!((p[0] - p[1]).abs() < 1e-12);
    }

    #[test]
    fn analyzer_probabilities_bounded() {
        let h = c(FRAC_1_SQRT_2);
        let det = ThresholdDetectorParams {
            efficiency: 0.6,
            dark_click_probability: 0.0,
            dead_time_ns: 0.0,
        };
        for theta in [0.0, 1.0, 2.0, 3.0] {
            let p = analyzer_patterns(
                &rho(h, Complex::new(0.3, 0.4) * 1.4),
                &AnalyzerSetting::equator(theta),
                &det,
            );
            let p = p.unwrap();
            assert!(p.probs.iter().all(|x| *x >= -1e-15));
            let s: f64 = Window::ALL.iter().map(|w| p.marginal(*w)).sum();
            assert!(s <= 1.0 + 1e-12);
        }
    }
}
