use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use teleport_sim::artifacts::{
    limits_table, load_calibration, save_calibration, write_artifacts, ArtifactError, RecordWriter,
    RECORDS_FILE,
};
use teleport_sim::config::{ConfigError, ExperimentConfig};
use teleport_sim::scenario::{
    self, limits, RunOptions, ScenarioError, ScenarioKind, ScenarioResult, SWEEP_RATES_KHZ,
};

const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_RUNTIME: u8 = 5;

#[derive(Parser)]
#[command(
    name = "teleport-sim",
    version,
    about = "Multiplexed time-bin teleportation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report, histogram and plot data.
    Run {
        /// short-distance, long-distance or rate-sweep
        scenario: String,
        /// TOML config; the scenario's preset when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Attempts per analyzer setting.
        #[arg(long)]
        attempts: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Fail when heralds cannot reach the memory before retrieval.
        #[arg(long)]
        strict: bool,
        /// Calibration file from `calibrate`.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Rates for rate-sweep, kHz.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        /// Also write every trial record as newline-delimited JSON.
        #[arg(long)]
        records: bool,
    },
    /// Fit the white-noise weight to a target short-distance equator fidelity.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.88)]
        target: f64,
        #[arg(long, default_value = "calibration.toml")]
        out: PathBuf,
    },
    /// Parse and validate a config, then print it with defaults filled in.
    ValidateConfig { path: PathBuf },
    /// Print the single-mode and multiplexed rate limits.
    Limits {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Validation { .. } => EXIT_VALIDATION,
            ConfigError::Io { .. } | ConfigError::Parse(_) => EXIT_PARSE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Infeasible(_) => EXIT_INFEASIBLE,
            ScenarioError::Invalid(_) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ArtifactError> for Failure {
    fn from(e: ArtifactError) -> Self {
        let code = match e {
            ArtifactError::Format { .. } => EXIT_PARSE,
            ArtifactError::Io { .. } => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load_or(path: Option<&Path>, preset: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(preset),
    }
}

fn runtime(message: String) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message,
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    scenario_name: &str,
    config_path: Option<&Path>,
    seed: Option<u64>,
    attempts: Option<u64>,
    out: &Path,
    strict: bool,
    calibration: Option<&Path>,
    rates: Option<&[f64]>,
    records: bool,
) -> Result<(), Failure> {
    let kind = ScenarioKind::parse(scenario_name).ok_or_else(|| Failure {
        code: EXIT_PARSE,
        message: format!("unknown scenario {scenario_name:?}; expected short-distance, long-distance or rate-sweep"),
    })?;
    let preset = match kind {
        ScenarioKind::ShortDistance => ExperimentConfig::short_distance(),
        ScenarioKind::LongDistance => ExperimentConfig::long_distance(),
        ScenarioKind::RateSweep => ExperimentConfig::rate_sweep(),
    };
    let mut config = load_or(config_path, preset)?;
    if let Some(path) = calibration {
        config.spdc.werner_white_noise = load_calibration(path)?.werner_white_noise;
    }
    if let Some(s) = seed {
        config.campaign.master_seed = s;
    }
    if let Some(n) = attempts {
        config.campaign.n_attempts = n;
    }
    config.validate()?;
    let options = RunOptions::from_config(&config, strict);

    std::fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    let mut writer = if records {
        let path = out.join(RECORDS_FILE);
        let file = File::create(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        Some(RecordWriter::new(BufWriter::new(file)))
    } else {
        None
    };
    let mut sink = |s: &_, r: &_| {
        if let Some(w) = writer.as_mut() {
            w.write(s, r);
        }
    };
    let result: ScenarioResult = match kind {
        ScenarioKind::ShortDistance => {
            scenario::scenario_short_distance(&config, &options, &mut sink)?
        }
        ScenarioKind::LongDistance => {
            scenario::scenario_long_distance(&config, &options, &mut sink)?
        }
        ScenarioKind::RateSweep => scenario::scenario_rate_sweep(
            &config,
            rates.unwrap_or(&SWEEP_RATES_KHZ),
            &options,
            &mut sink,
        )?,
    };
    if let Some(w) = writer {
        w.finish()
            .map_err(|e| runtime(format!("{RECORDS_FILE}: {e}")))?;
    }
    for path in write_artifacts(&result, out)? {
        println!("wrote {}", path.display());
    }
    print_summary(&result);
    Ok(())
}

fn print_summary(result: &ScenarioResult) {
    let (r, source) = match (&result.report, &result.expected_report) {
        (Some(r), _) => (r, "sampled"),
        (None, Some(r)) => (r, "expected"),
        (None, None) => {
            println!("{}: no heralded counts", result.scenario);
            for w in &result.warnings {
                println!("  warning: {w}");
            }
            return;
        }
    };
    let show = |e: Option<teleport_sim::analysis::Estimate>| {
        e.map(|e| format!("{:.4} ± {:.4}", e.value, e.sigma))
            .unwrap_or_else(|| "n/a".into())
    };
    println!("{} ({source} counts)", result.scenario);
    println!("  F_poles {}", show(r.f_poles));
    println!("  F_eq    {}", show(r.f_eq));
    println!("  F_bar   {}", show(r.f_bar));
    println!(
        "  storage margin {} us",
        result.timing_budget.remaining_margin_us
    );
    for w in &result.warnings {
        println!("  warning: {w}");
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            config,
            seed,
            attempts,
            out,
            strict,
            calibration,
            rates,
            records,
        } => run(
            &scenario,
            config.as_deref(),
            seed,
            attempts,
            &out,
            strict,
            calibration.as_deref(),
            rates.as_deref(),
            records,
        ),
        Command::Calibrate {
            config,
            target,
            out,
        } => {
            let config = load_or(config.as_deref(), ExperimentConfig::short_distance())?;
            let c = scenario::scenario_calibrate(&config, target)?;
            save_calibration(&c, &out)?;
            println!(
                "werner_white_noise = {} (F_eq {:.5}, target {}) -> {}",
                c.werner_white_noise,
                c.achieved_f_eq,
                c.target_f_eq,
                out.display()
            );
            Ok(())
        }
        Command::ValidateConfig { path } => {
            let config = ExperimentConfig::load(&path)?;
            print!("{}", config.to_toml());
            Ok(())
        }
        Command::Limits { config } => {
            let config = load_or(config.as_deref(), ExperimentConfig::long_distance())?;
            print!("{}", limits_table(&limits(&config)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
