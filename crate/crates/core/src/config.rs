//! Experiment configuration: TOML in, validated structs out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::devices::{
    AfcMemoryParams, AnalyzerKind, AnalyzerSetting, DeviceError, FiberParams, InputQubitSpec,
    NamedState, SpdcSourceParams,
};
use crate::fock::{ThresholdDetectorParams, DEFAULT_TRUNCATION_TOLERANCE};
use crate::protocol::{TimingBudget, TimingParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        path: path.to_string(),
        message: message.into(),
    }
}

fn from_device(path: &str, e: DeviceError) -> ConfigError {
    invalid(path, e.to_string())
}

/// Input qubit as written in the config: a named state or explicit amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputQubitConfig {
    pub state: NamedState,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub phi: Option<f64>,
    pub mean_photon_number: f64,
    pub overlap: f64,
    pub single_photon: bool,
}

impl Default for InputQubitConfig {
    fn default() -> Self {
        InputQubitConfig {
            state: NamedState::Plus,
            alpha: None,
            beta: None,
            phi: None,
            mean_photon_number: 0.02,
            overlap: 0.9,
            single_photon: false,
        }
    }
}

impl InputQubitConfig {
    /// The configured qubit; explicit amplitudes override the named state.
    pub fn spec(&self) -> InputQubitSpec {
        let (a, b, p) = self.state.amplitudes();
        InputQubitSpec {
            alpha: self.alpha.unwrap_or(a),
            beta: self.beta.unwrap_or(b),
            phi: self.phi.unwrap_or(p),
            mean_photon_number: self.mean_photon_number,
            overlap: self.overlap,
            single_photon: self.single_photon,
        }
    }

    /// `named` with this config's source parameters.
    pub fn spec_for(&self, named: NamedState) -> InputQubitSpec {
        InputQubitSpec {
            single_photon: self.single_photon,
            ..InputQubitSpec::named(named, self.mean_photon_number, self.overlap)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorsConfig {
    pub d1: ThresholdDetectorParams,
    pub d2: ThresholdDetectorParams,
    pub analyzer: ThresholdDetectorParams,
}

pub const DEFAULT_BSM_DETECTOR: ThresholdDetectorParams = ThresholdDetectorParams {
    efficiency: 0.8,
    dark_click_probability: 1e-5,
    dead_time_ns: 50.0,
};

pub const DEFAULT_ANALYZER_DETECTOR: ThresholdDetectorParams = ThresholdDetectorParams {
    efficiency: 0.5,
    dark_click_probability: 1e-5,
    dead_time_ns: 50.0,
};

impl Default for DetectorsConfig {
    fn default() -> Self {
        DetectorsConfig {
            d1: DEFAULT_BSM_DETECTOR,
            d2: DEFAULT_BSM_DETECTOR,
            analyzer: DEFAULT_ANALYZER_DETECTOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerConfig {
    pub analysis_afc_storage_ns: f64,
    pub analysis_split: f64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            analysis_afc_storage_ns: 420.0,
            analysis_split: 0.5,
        }
    }
}

impl AnalyzerConfig {
    pub fn setting(&self, kind: AnalyzerKind) -> AnalyzerSetting {
        AnalyzerSetting {
            kind,
            analysis_afc_storage_ns: self.analysis_afc_storage_ns,
            analysis_split: self.analysis_split,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignParams {
    /// Attempts per analyzer setting; zero reports expected counts only.
    pub n_attempts: u64,
    pub master_seed: u64,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams {
            n_attempts: 1_000_000,
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationParams {
    /// Photon-number cutoff per mode for the sources.
    pub cutoff: u8,
    pub truncation_tolerance: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            cutoff: 2,
            truncation_tolerance: DEFAULT_TRUNCATION_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spdc: SpdcSourceParams,
    pub input_qubit: InputQubitConfig,
    pub memory: AfcMemoryParams,
    pub fiber: FiberParams,
    pub detectors: DetectorsConfig,
    pub timing: TimingParams,
    pub analyzer: AnalyzerConfig,
    pub campaign: CampaignParams,
    pub simulation: SimulationParams,
}

impl ExperimentConfig {
    /// Defaults for the short-distance run: a few meters of fiber, 10 μs storage.
    pub fn short_distance() -> Self {
        ExperimentConfig::default()
    }

    /// 1 km of fiber to the BSM, 17.5 μs storage, herald return of 5 μs.
    pub fn long_distance() -> Self {
        let mut c = ExperimentConfig::default();
        c.fiber.length_km = 1.0;
        c.memory.storage_time_us = 17.5;
        c.timing.classical_return_us = Some(5.0);
        c
    }

    /// The same setup with noiseless devices: one photon pair, a single-photon
    /// input qubit, perfect overlap, lossless fiber and perfect detectors.
    pub fn with_ideal_devices(mut self) -> Self {
        self.spdc.ideal_single_pair = true;
        self.spdc.werner_white_noise = 0.0;
        self.spdc.phase_coherence = 1.0;
        self.input_qubit.single_photon = true;
        self.input_qubit.overlap = 1.0;
        self.detectors.d1 = ThresholdDetectorParams::IDEAL;
        self.detectors.d2 = ThresholdDetectorParams::IDEAL;
        self.detectors.analyzer = ThresholdDetectorParams::IDEAL;
        self.fiber.attenuation_db_per_km = 0.0;
        self
    }

    /// The long-distance setup driven at several attempt rates.
    pub fn rate_sweep() -> Self {
        ExperimentConfig::long_distance()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let c: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn timing_budget(&self) -> TimingBudget {
        TimingBudget::new(&self.fiber, &self.timing, &self.memory)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.spdc.validate().map_err(|e| from_device("spdc", e))?;
        self.input_qubit
            .spec()
            .validate()
            .map_err(|e| from_device("input_qubit", e))?;
        self.memory
            .validate()
            .map_err(|e| from_device("memory", e))?;
        self.fiber.validate().map_err(|e| from_device("fiber", e))?;
        for (path, d) in [
            ("detectors.d1", &self.detectors.d1),
            ("detectors.d2", &self.detectors.d2),
            ("detectors.analyzer", &self.detectors.analyzer),
        ] {
            d.validate().map_err(|e| invalid(path, e.to_string()))?;
        }
        let t = &self.timing;
        for (path, v) in [
            ("timing.attempt_period_us", t.attempt_period_us),
            ("timing.bin_separation_ns", t.bin_separation_ns),
            ("timing.qubit_duration_ns", t.qubit_duration_ns),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(path, format!("must be positive, got {v}")));
            }
        }
        if t.attempt_period_us * 1e3 < t.qubit_duration_ns {
            return Err(invalid(
                "timing.attempt_period_us",
                format!(
                    "attempt_period_us ({} μs) is shorter than timing.qubit_duration_ns ({} ns); attempt windows would overlap",
                    t.attempt_period_us, t.qubit_duration_ns
                ),
            ));
        }
        if t.bin_separation_ns > t.qubit_duration_ns / 2.0 {
            return Err(invalid(
                "timing.bin_separation_ns",
                format!(
                    "bin_separation_ns ({}) exceeds half of timing.qubit_duration_ns ({})",
                    t.bin_separation_ns, t.qubit_duration_ns
                ),
            ));
        }
        if let Some(r) = t.classical_return_us {
            if !(r >= 0.0) {
                return Err(invalid(
                    "timing.classical_return_us",
                    format!("must be non-negative, got {r}"),
                ));
            }
        }
        if !(t.processing_latency_us >= 0.0) {
            return Err(invalid(
                "timing.processing_latency_us",
                format!("must be non-negative, got {}", t.processing_latency_us),
            ));
        }
        if !(0.0..=1.0).contains(&self.analyzer.analysis_split) {
            return Err(invalid(
                "analyzer.analysis_split",
                format!("must lie in [0, 1], got {}", self.analyzer.analysis_split),
            ));
        }
        if (self.analyzer.analysis_afc_storage_ns - t.bin_separation_ns).abs() > 1e-9 {
            return Err(invalid(
                "analyzer.analysis_afc_storage_ns",
                format!(
                    "must equal timing.bin_separation_ns ({}) for the delayed early bin to overlap the late bin, got {}",
                    t.bin_separation_ns, self.analyzer.analysis_afc_storage_ns
                ),
            ));
        }
        let s = &self.simulation;
        if s.cutoff == 0 || s.cutoff > 7 {
            return Err(invalid(
                "simulation.cutoff",
                format!("must lie in 1..=7, got {}", s.cutoff),
            ));
        }
        if !(s.truncation_tolerance > 0.0 && s.truncation_tolerance < 1.0) {
            return Err(invalid(
                "simulation.truncation_tolerance",
                format!("must lie in (0, 1), got {}", s.truncation_tolerance),
            ));
        }
        Ok(())
    }
}
