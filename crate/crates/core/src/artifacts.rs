//! Files written by a scenario run.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::SettingLabel;
use crate::protocol::TrialRecord;
use crate::scenario::{Calibration, Limits, ScenarioResult};

pub const REPORT_FILE: &str = "report.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const STATE_FIDELITY_FILE: &str = "state_fidelity.tsv";
pub const RATE_FIDELITY_FILE: &str = "rate_fidelity.tsv";
pub const RATE_IN_FLIGHT_FILE: &str = "rate_in_flight.tsv";
pub const RECORDS_FILE: &str = "records.ndjson";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn report_json(result: &ScenarioResult) -> String {
    let mut s = serde_json::to_string_pretty(result).expect("report serializes");
    s.push('\n');
    s
}

/// `state<TAB>fidelity` rows, sampled when available, expected otherwise.
pub fn state_fidelity_tsv(result: &ScenarioResult) -> String {
    let mut s = String::from("state\tfidelity\n");
    let Some(report) = result.report.as_ref().or(result.expected_report.as_ref()) else {
        return s;
    };
    for st in &report.states {
        writeln!(s, "{}\t{}", st.state.name(), st.fidelity.value).expect("string write");
    }
    s
}

/// `rate_khz<TAB>fidelity` and `rate_khz<TAB>max_in_flight` rows of a sweep.
pub fn rate_tsv(result: &ScenarioResult) -> Option<(String, String)> {
    let sweep = result.rate_sweep.as_ref()?;
    let mut f = String::from("rate_khz\tfidelity\n");
    let mut o = String::from("rate_khz\tmax_in_flight\n");
    for p in &sweep.points {
        if let Some(v) = p.fidelity.map(|e| e.value).or(p.expected_fidelity) {
            writeln!(f, "{}\t{}", p.rate_khz, v).expect("string write");
        }
        writeln!(o, "{}\t{}", p.rate_khz, p.max_in_flight).expect("string write");
    }
    Some((f, o))
}

/// Writes the report, histogram and plot data into `dir`.
pub fn write_artifacts(result: &ScenarioResult, dir: &Path) -> Result<Vec<PathBuf>, ArtifactError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = vec![
        (REPORT_FILE, report_json(result)),
        (HISTOGRAM_FILE, result.histogram.to_csv()),
        (STATE_FIDELITY_FILE, state_fidelity_tsv(result)),
    ];
    if let Some((f, o)) = rate_tsv(result) {
        files.push((RATE_FIDELITY_FILE, f));
        files.push((RATE_IN_FLIGHT_FILE, o));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct RecordLine<'a> {
    setting: String,
    #[serde(flatten)]
    record: &'a TrialRecord,
}

/// Newline-delimited JSON of trial records.
pub struct RecordWriter<W: Write> {
    out: W,
    error: Option<io::Error>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W) -> Self {
        RecordWriter { out, error: None }
    }

    pub fn write(&mut self, setting: &SettingLabel, record: &TrialRecord) {
        if self.error.is_some() {
            return;
        }
        let line = RecordLine {
            setting: setting.to_string(),
            record,
        };
        let result = serde_json::to_writer(&mut self.out, &line)
            .map_err(io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        if let Err(e) = result {
            self.error = Some(e);
        }
    }

    /// Flushes and returns the first error met, if any.
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn save_calibration(calibration: &Calibration, path: &Path) -> Result<(), ArtifactError> {
    let body = toml::to_string_pretty(calibration).expect("calibration serializes");
    fs::write(path, body).map_err(io_err(path))
}

pub fn load_calibration(path: &Path) -> Result<Calibration, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| ArtifactError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Shortest decimal form of `x` with at most `decimals` fraction digits.
pub fn trim_number(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// The rate-limit table printed by `limits`.
pub fn limits_table(limits: &Limits) -> String {
    let single = limits
        .single_mode_rate_khz
        .map(|r| format!("{} kHz", trim_number(r, 2)))
        .unwrap_or_else(|| "unbounded".into());
    format!(
        "fiber_length\t{} km\nsingle_mode_rate\t{single}\nqubit_duration\t{} ns\nmultiplexed_rate\t{} MHz\n",
        trim_number(limits.fiber_length_km, 3),
        trim_number(limits.qubit_duration_ns, 1),
        trim_number(limits.multiplexed_rate_mhz, 2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimming() {
        assert_eq!(trim_number(100.0, 2), "100");
        assert_eq!(trim_number(1.190476, 2), "1.19");
        assert_eq!(trim_number(0.5, 3), "0.5");
        assert_eq!(trim_number(99.999999, 2), "100");
    }
}
