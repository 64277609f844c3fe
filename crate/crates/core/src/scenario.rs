//! Scenario orchestration: which runs make up an experiment and how their
//! counts become a report.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analysis::{
    self, expected_counts, herald_efficiency, AnalysisError, BoundInputs, CountSource, Estimate,
    ExpectedCounts, FidelityReport, Histogram, SettingLabel,
};
use crate::config::ExperimentConfig;
use crate::devices::NamedState;
use crate::protocol::{
    max_multiplexed_rate, max_single_mode_rate, run_campaign, AttemptModel, CampaignSummary,
    ProtocolError, TimingBudget, TrialRecord,
};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("infeasible timing: {0}")]
    Infeasible(String),
    #[error("target {target} is unreachable: fidelity spans [{low}, {high}] over the noise range")]
    Unreachable { target: f64, low: f64, high: f64 },
    #[error("{0}")]
    Invalid(String),
}

impl From<crate::fock::FockError> for ScenarioError {
    fn from(e: crate::fock::FockError) -> Self {
        ScenarioError::Protocol(e.into())
    }
}

impl From<crate::devices::DeviceError> for ScenarioError {
    fn from(e: crate::devices::DeviceError) -> Self {
        ScenarioError::Protocol(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ShortDistance,
    LongDistance,
    RateSweep,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ShortDistance => "short-distance",
            ScenarioKind::LongDistance => "long-distance",
            ScenarioKind::RateSweep => "rate-sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ScenarioKind::ShortDistance,
            ScenarioKind::LongDistance,
            ScenarioKind::RateSweep,
        ]
        .into_iter()
        .find(|k| k.name() == s || k.name().replace('-', "_") == s)
    }
}

/// Rates of the multiplexing sweep, kHz.
pub const SWEEP_RATES_KHZ: [f64; 4] = [133.0, 178.0, 244.0, 323.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Attempts per analyzer setting; no sampling when zero.
    pub n_attempts: u64,
    pub master_seed: u64,
    pub strict: bool,
}

impl RunOptions {
    pub fn from_config(config: &ExperimentConfig, strict: bool) -> Self {
        RunOptions {
            n_attempts: config.campaign.n_attempts,
            master_seed: config.campaign.master_seed,
            strict,
        }
    }
}

/// Seed of the `index`-th run of a scenario.
pub fn run_seed(master_seed: u64, index: u64) -> u64 {
    master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRun {
    pub setting: String,
    pub seed: u64,
    pub summary: CampaignSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub fiber_length_km: f64,
    pub single_mode_rate_khz: Option<f64>,
    pub qubit_duration_ns: f64,
    pub multiplexed_rate_mhz: f64,
}

pub fn limits(config: &ExperimentConfig) -> Result<Limits, ScenarioError> {
    Ok(Limits {
        fiber_length_km: config.fiber.length_km,
        single_mode_rate_khz: max_single_mode_rate(&config.fiber).ok(),
        qubit_duration_ns: config.timing.qubit_duration_ns,
        multiplexed_rate_mhz: max_multiplexed_rate(config.timing.qubit_duration_ns)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub rate_khz: f64,
    pub attempt_period_us: f64,
    pub fidelity: Option<Estimate>,
    pub expected_fidelity: Option<f64>,
    pub max_in_flight: u32,
    pub steady_in_flight: Option<u32>,
    pub mean_in_flight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSweep {
    pub state: NamedState,
    pub points: Vec<RatePoint>,
    pub weighted_mean: Option<f64>,
    pub chi_square: Option<f64>,
    pub degrees_of_freedom: usize,
    pub p_value: Option<f64>,
    /// Largest minus smallest sampled fidelity.
    pub spread: Option<f64>,
    pub pooled_sigma: Option<f64>,
    pub single_mode_limit_khz: Option<f64>,
    pub max_multiplexed_rate_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub config: ExperimentConfig,
    pub attempts_per_setting: u64,
    pub master_seed: u64,
    /// From sampled counts; absent when nothing was sampled or no
    /// coincidence was recorded.
    pub report: Option<FidelityReport>,
    /// From expected counts: the limit of infinitely many attempts. Absent
    /// when no herald can be counted.
    pub expected_report: Option<FidelityReport>,
    pub timing_budget: TimingBudget,
    pub limits: Limits,
    pub runs: Vec<SettingRun>,
    pub rate_sweep: Option<RateSweep>,
    pub warnings: Vec<String>,
    pub histogram: Histogram,
}

/// Counts of one batch of settings, sampled and expected.
pub struct Measurement {
    pub histogram: Histogram,
    pub expected: ExpectedCounts,
    pub runs: Vec<SettingRun>,
    pub herald_efficiency: f64,
}

fn check_timing(config: &ExperimentConfig, strict: bool) -> Result<TimingBudget, ScenarioError> {
    let budget = config.timing_budget();
    if strict && !budget.is_feasible() {
        return Err(ScenarioError::Infeasible(format!(
            "storage time {} μs is shorter than the herald round trip {} μs (margin {} μs)",
            budget.storage_time_us,
            budget.storage_time_us - budget.remaining_margin_us,
            budget.remaining_margin_us
        )));
    }
    Ok(budget)
}

/// Runs every setting needed for `states` and collects their counts.
pub fn measure(
    config: &ExperimentConfig,
    states: &[NamedState],
    options: &RunOptions,
    first_index: u64,
    sink: &mut dyn FnMut(&SettingLabel, &TrialRecord),
) -> Result<Measurement, ScenarioError> {
    let on_time = config.timing_budget().is_feasible();
    let mut histogram = Histogram::new();
    let mut expected = ExpectedCounts::default();
    let mut runs = Vec::new();
    let mut eff = Vec::new();
    let mut index = first_index;
    for &state in states {
        let input = config.input_qubit.spec_for(state);
        for setting in SettingLabel::runs_for(state) {
            let model = AttemptModel::new(config, &input, &setting.analyzer(&config.analyzer))?;
            expected.merge(&expected_counts(
                &model,
                setting,
                options.n_attempts.max(1) as f64,
                on_time,
            ));
            eff.push(herald_efficiency(&model, on_time));
            if options.n_attempts > 0 {
                let seed = run_seed(options.master_seed, index);
                let summary = run_campaign(config, &model, options.n_attempts, seed, &mut |r| {
                    histogram.accumulate(setting, r);
                    sink(&setting, r);
                })?;
                runs.push(SettingRun {
                    setting: setting.to_string(),
                    seed,
                    summary,
                });
            }
            index += 1;
        }
    }
    let herald_efficiency = eff.iter().sum::<f64>() / eff.len().max(1) as f64;
    Ok(Measurement {
        histogram,
        expected,
        runs,
        herald_efficiency,
    })
}

fn bound_inputs(config: &ExperimentConfig) -> BoundInputs {
    BoundInputs {
        mu: config.input_qubit.mean_photon_number,
        ..BoundInputs::REFERENCE
    }
}

/// The report of `source`, or a warning when it holds no usable counts.
fn try_report(
    label: &str,
    source: &dyn CountSource,
    states: &[NamedState],
    config: &ExperimentConfig,
    eta: f64,
    warnings: &mut Vec<String>,
) -> Result<Option<FidelityReport>, ScenarioError> {
    match analysis::report(source, states, bound_inputs(config), Some(eta)) {
        Ok(r) => Ok(Some(r)),
        Err(e @ AnalysisError::Empty) => {
            warnings.push(format!("no {label} report: {e}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Teleports `{e, l, +, R}` with parallel and orthogonal analysis.
pub fn run_fidelity_scenario(
    name: &str,
    config: &ExperimentConfig,
    options: &RunOptions,
    sink: &mut dyn FnMut(&SettingLabel, &TrialRecord),
) -> Result<ScenarioResult, ScenarioError> {
    config
        .validate()
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let budget = check_timing(config, options.strict)?;
    let mut warnings = Vec::new();
    if !budget.is_feasible() {
        warnings.push(format!(
            "heralds arrive {} μs after retrieval; heralded attempts are excluded",
            -budget.remaining_margin_us
        ));
    }
    if (config.analyzer.analysis_split - 0.5).abs() > 1e-12 {
        warnings.push(format!(
            "analysis_split = {} is unbalanced; the visibility estimators assume a balanced analyzer",
            config.analyzer.analysis_split
        ));
    }
    let m = measure(config, &NamedState::ALL, options, 0, sink)?;
    let expected_report = try_report(
        "expected",
        &m.expected,
        &NamedState::ALL,
        config,
        m.herald_efficiency,
        &mut warnings,
    )?;
    let report = if options.n_attempts > 0 {
        try_report(
            "sampled",
            &m.histogram,
            &NamedState::ALL,
            config,
            m.herald_efficiency,
            &mut warnings,
        )?
    } else {
        None
    };
    Ok(ScenarioResult {
        scenario: name.to_string(),
        config: *config,
        attempts_per_setting: options.n_attempts,
        master_seed: options.master_seed,
        report,
        expected_report,
        timing_budget: budget,
        limits: limits(config)?,
        runs: m.runs,
        rate_sweep: None,
        warnings,
        histogram: m.histogram,
    })
}

pub fn scenario_short_distance(
    config: &ExperimentConfig,
    options: &RunOptions,
    sink: &mut dyn FnMut(&SettingLabel, &TrialRecord),
) -> Result<ScenarioResult, ScenarioError> {
    run_fidelity_scenario(ScenarioKind::ShortDistance.name(), config, options, sink)
}

pub fn scenario_long_distance(
    config: &ExperimentConfig,
    options: &RunOptions,
    sink: &mut dyn FnMut(&SettingLabel, &TrialRecord),
) -> Result<ScenarioResult, ScenarioError> {
    run_fidelity_scenario(ScenarioKind::LongDistance.name(), config, options, sink)
}

/// χ² of `values` against their weighted mean, with its p-value.
pub fn flatness_test(values: &[Estimate]) -> Option<(f64, f64, usize, f64)> {
    if values.len() < 2 || values.iter().any(|v| !(v.sigma > 0.0)) {
        return None;
    }
    let w: Vec<f64> = values.iter().map(|v| 1.0 / (v.sigma * v.sigma)).collect();
    let mean = values.iter().zip(&w).map(|(v, w)| v.value * w).sum::<f64>() / w.iter().sum::<f64>();
    let chi2: f64 = values
        .iter()
        .zip(&w)
        .map(|(v, w)| (v.value - mean).powi(2) * w)
        .sum();
    let dof = values.len() - 1;
    let p = 1.0 - ChiSquared::new(dof as f64).ok()?.cdf(chi2);
    Some((mean, chi2, dof, p))
}

/// Teleports `|R⟩` at each rate and tests the fidelities for a common value.
pub fn scenario_rate_sweep(
    config: &ExperimentConfig,
    rates_khz: &[f64],
    options: &RunOptions,
    sink: &mut dyn FnMut(&SettingLabel, &TrialRecord),
) -> Result<ScenarioResult, ScenarioError> {
    config
        .validate()
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let max_mhz = max_multiplexed_rate(config.timing.qubit_duration_ns)?;
    for &r in rates_khz {
        if !(r > 0.0) || r > max_mhz * 1e3 * (1.0 + 1e-12) {
            return Err(ScenarioError::Infeasible(format!(
                "rate {r} kHz is outside (0, {:.1}] kHz allowed by {} ns qubits",
                max_mhz * 1e3,
                config.timing.qubit_duration_ns
            )));
        }
    }
    if rates_khz.is_empty() {
        return Err(ScenarioError::Invalid(
            "rate sweep needs at least one rate".into(),
        ));
    }
    let budget = check_timing(config, options.strict)?;
    let state = NamedState::R;
    let mut points = Vec::new();
    let mut runs = Vec::new();
    let mut histogram = Histogram::new();
    let mut warnings = Vec::new();
    let mut sampled = Vec::new();
    let mut eta = 0.0;
    let mut last_expected = None;
    for (i, &rate) in rates_khz.iter().enumerate() {
        let mut c = *config;
        c.timing.attempt_period_us = 1e3 / rate;
        let m = measure(&c, &[state], options, 2 * i as u64, sink)?;
        let expected = try_report(
            "expected",
            &m.expected,
            &[state],
            &c,
            m.herald_efficiency,
            &mut warnings,
        )?;
        let fidelity = if options.n_attempts > 0 {
            try_report(
                "sampled",
                &m.histogram,
                &[state],
                &c,
                m.herald_efficiency,
                &mut warnings,
            )?
            .and_then(|r| r.f_eq)
        } else {
            None
        };
        if let Some(f) = fidelity {
            sampled.push(f);
        }
        let occ = crate::protocol::memory_occupancy(
            crate::protocol::us_to_ps(c.timing.attempt_period_us),
            crate::protocol::us_to_ps(c.memory.storage_time_us),
            options.n_attempts.max(1_000),
        );
        points.push(RatePoint {
            rate_khz: rate,
            attempt_period_us: c.timing.attempt_period_us,
            fidelity,
            expected_fidelity: expected.as_ref().and_then(|r| r.f_eq).map(|e| e.value),
            max_in_flight: occ.max,
            steady_in_flight: occ.steady_min,
            mean_in_flight: occ.time_average,
        });
        histogram.merge(&m.histogram);
        runs.extend(m.runs);
        eta = m.herald_efficiency;
        last_expected = expected;
    }
    let flat = if sampled.len() == rates_khz.len() {
        flatness_test(&sampled)
    } else {
        None
    };
    let spread = (sampled.len() == rates_khz.len() && !sampled.is_empty()).then(|| {
        let max = sampled.iter().map(|e| e.value).fold(f64::MIN, f64::max);
        let min = sampled.iter().map(|e| e.value).fold(f64::MAX, f64::min);
        max - min
    });
    let pooled_sigma = (!sampled.is_empty()).then(|| {
        (sampled.iter().map(|e| e.sigma * e.sigma).sum::<f64>() / sampled.len() as f64).sqrt()
    });
    let sweep = RateSweep {
        state,
        points,
        weighted_mean: flat.map(|f| f.0),
        chi_square: flat.map(|f| f.1),
        degrees_of_freedom: rates_khz.len().saturating_sub(1),
        p_value: flat.map(|f| f.3),
        spread,
        pooled_sigma,
        single_mode_limit_khz: max_single_mode_rate(&config.fiber).ok(),
        max_multiplexed_rate_mhz: max_mhz,
    };
    let report = if options.n_attempts > 0 {
        try_report("sampled", &histogram, &[state], config, eta, &mut warnings)?
    } else {
        None
    };
    Ok(ScenarioResult {
        scenario: ScenarioKind::RateSweep.name().to_string(),
        config: *config,
        attempts_per_setting: options.n_attempts,
        master_seed: options.master_seed,
        report,
        expected_report: last_expected,
        timing_budget: budget,
        limits: limits(config)?,
        runs,
        rate_sweep: Some(sweep),
        warnings,
        histogram,
    })
}

/// Expected equator fidelity `F̄_eq` of `config`, without sampling.
pub fn expected_f_eq(config: &ExperimentConfig) -> Result<f64, ScenarioError> {
    let states = [NamedState::Plus, NamedState::R];
    let options = RunOptions {
        n_attempts: 0,
        master_seed: 0,
        strict: false,
    };
    let m = measure(config, &states, &options, 0, &mut |_, _| {})?;
    let r = analysis::report(&m.expected, &states, bound_inputs(config), None)?;
    r.f_eq
        .map(|e| e.value)
        .ok_or(ScenarioError::Analysis(AnalysisError::Empty))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_f_eq: f64,
    pub werner_white_noise: f64,
    pub achieved_f_eq: f64,
    pub iterations: u32,
}

/// Tolerance on the calibrated fidelity.
pub const CALIBRATION_TOLERANCE: f64 = 0.002;

/// Bisection on the white-noise weight until the expected short-distance
/// `F̄_eq` meets `target`.
pub fn scenario_calibrate(
    config: &ExperimentConfig,
    target_f_eq: f64,
) -> Result<Calibration, ScenarioError> {
    config
        .validate()
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let at = |w: f64| -> Result<f64, ScenarioError> {
        let mut c = *config;
        c.spdc.werner_white_noise = w;
        expected_f_eq(&c)
    };
    let high = at(0.0)?;
    let low = at(1.0)?;
    if target_f_eq > high + CALIBRATION_TOLERANCE || target_f_eq < low - CALIBRATION_TOLERANCE {
        return Err(ScenarioError::Unreachable {
            target: target_f_eq,
            low,
            high,
        });
    }
    if target_f_eq >= high {
        return Ok(Calibration {
            target_f_eq,
            werner_white_noise: 0.0,
            achieved_f_eq: high,
            iterations: 0,
        });
    }
    if target_f_eq <= low {
        return Ok(Calibration {
            target_f_eq,
            werner_white_noise: 1.0,
            achieved_f_eq: low,
            iterations: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut iterations = 0;
    let mut mid = 0.5;
    let mut f = at(mid)?;
    while (f - target_f_eq).abs() > CALIBRATION_TOLERANCE / 100.0 && iterations < 60 {
        if f > target_f_eq {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        f = at(mid)?;
        iterations += 1;
    }
    Ok(Calibration {
        target_f_eq,
        werner_white_noise: mid,
        achieved_f_eq: f,
        iterations,
    })
}
