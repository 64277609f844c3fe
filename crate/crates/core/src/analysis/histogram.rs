use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::AnalyzerConfig;
use crate::devices::{AnalyzerKind, AnalyzerSetting, NamedState, Window};
use crate::protocol::{BellOutcome, FeedForwardStatus, TrialRecord};

use super::AnalysisError;

/// Which analyzer configuration a run used, relative to the teleported state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerRole {
    /// Equator analyzer phased for maximal central-window counts.
    Parallel,
    /// Equator analyzer shifted by π from `Parallel`.
    Orthogonal,
    /// Time-resolved pole analyzer.
    Pole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SettingLabel {
    pub state: NamedState,
    pub role: AnalyzerRole,
}

impl SettingLabel {
    pub fn new(state: NamedState, role: AnalyzerRole) -> Self {
        SettingLabel { state, role }
    }

    /// Runs needed to measure `state`: one for poles, two for equator states.
    pub fn runs_for(state: NamedState) -> Vec<SettingLabel> {
        if state.is_pole() {
            vec![SettingLabel::new(state, AnalyzerRole::Pole)]
        } else {
            vec![
                SettingLabel::new(state, AnalyzerRole::Parallel),
                SettingLabel::new(state, AnalyzerRole::Orthogonal),
            ]
        }
    }

    /// Analyzer for this run. The memory holds `e^{iφ}β|e⟩ + α|l⟩` after
    /// feed-forward, whose central window peaks at `θ = −φ`.
    pub fn analyzer(&self, config: &AnalyzerConfig) -> AnalyzerSetting {
        let (_, _, phi) = self.state.amplitudes();
        let kind = match self.role {
            AnalyzerRole::Parallel => AnalyzerKind::Equator { theta: -phi },
            AnalyzerRole::Orthogonal => AnalyzerKind::Equator { theta: PI - phi },
            AnalyzerRole::Pole => AnalyzerKind::Pole,
        };
        config.setting(kind)
    }

    pub fn role_name(&self) -> &'static str {
        match self.role {
            AnalyzerRole::Parallel => "parallel",
            AnalyzerRole::Orthogonal => "orthogonal",
            AnalyzerRole::Pole => "pole",
        }
    }
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.state.name(), self.role_name())
    }
}

/// Which analyzer detections a count includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    PsiPlus,
    PsiMinus,
    /// Every analyzer detection, heralded or not.
    Unconditional,
}

impl Conditioning {
    pub const HERALDED: [Conditioning; 2] = [Conditioning::PsiPlus, Conditioning::PsiMinus];

    pub fn name(self) -> &'static str {
        match self {
            Conditioning::PsiPlus => "psi_plus",
            Conditioning::PsiMinus => "psi_minus",
            Conditioning::Unconditional => "unconditional",
        }
    }

    pub fn from_outcome(o: BellOutcome) -> Option<Conditioning> {
        match o {
            BellOutcome::PsiPlus => Some(Conditioning::PsiPlus),
            BellOutcome::PsiMinus => Some(Conditioning::PsiMinus),
            BellOutcome::NoHerald => None,
        }
    }
}

pub type HistogramKey = (SettingLabel, Conditioning, Window);

/// Anything the fidelity estimators can read counts from.
pub trait CountSource {
    fn count(&self, setting: SettingLabel, conditioning: Conditioning, window: Window) -> f64;

    fn heralded(&self, setting: SettingLabel, window: Window) -> f64 {
        Conditioning::HERALDED
            .iter()
            .map(|c| self.count(setting, *c, window))
            .sum()
    }
}

/// One non-empty histogram cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub setting: SettingLabel,
    pub outcome: Conditioning,
    pub window: Window,
    pub count: u64,
}

/// Coincidence counts per (setting, conditioning, window).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<HistogramRow>", from = "Vec<HistogramRow>")]
pub struct Histogram {
    counts: BTreeMap<HistogramKey, u64>,
}

impl Histogram {
    pub fn new() -> Self {
        Histogram::default()
    }

    pub fn add(&mut self, key: HistogramKey, n: u64) {
        if n > 0 {
            *self.counts.entry(key).or_default() += n;
        }
    }

    pub fn get(&self, key: &HistogramKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Adds one record: heralded, on-time attempts count under their
    /// outcome; every analyzer click counts as unconditional.
    pub fn accumulate(&mut self, setting: SettingLabel, record: &TrialRecord) {
        let heralded = record
            .is_valid_herald()
            .then(|| Conditioning::from_outcome(record.outcome))
            .flatten();
        for &w in &record.analyzer_clicks {
            if let Some(c) = heralded {
                self.add((setting, c, w), 1);
            }
            self.add((setting, Conditioning::Unconditional, w), 1);
        }
    }

    pub fn accumulate_all<'a>(
        &mut self,
        setting: SettingLabel,
        records: impl IntoIterator<Item = &'a TrialRecord>,
    ) {
        for r in records {
            self.accumulate(setting, r);
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (k, v) in &other.counts {
            self.add(*k, *v);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HistogramKey, &u64)> {
        self.counts.iter()
    }

    /// CSV with columns `setting,outcome,window,count`, one row per
    /// non-empty cell in key order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("setting,outcome,window,count\n");
        for ((setting, c, w), n) in &self.counts {
            s.push_str(&format!("{setting},{},{},{n}\n", c.name(), w.name()));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, AnalysisError> {
        let mut h = Histogram::new();
        let mut lines = text.lines();
        if lines.next() != Some("setting,outcome,window,count") {
            return Err(AnalysisError::Format("missing CSV header".into()));
        }
        for line in lines.filter(|l| !l.is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || AnalysisError::Format(format!("bad row: {line}"));
            let [setting, outcome, window, count] = cols[..] else {
                return Err(bad());
            };
            let (state, role) = setting.split_once('/').ok_or_else(bad)?;
            let state = NamedState::parse(state).ok_or_else(bad)?;
            let role = match role {
                "parallel" => AnalyzerRole::Parallel,
                "orthogonal" => AnalyzerRole::Orthogonal,
                "pole" => AnalyzerRole::Pole,
                _ => return Err(bad()),
            };
            let c = [
                Conditioning::PsiPlus,
                Conditioning::PsiMinus,
                Conditioning::Unconditional,
            ]
            .into_iter()
            .find(|c| c.name() == outcome)
            .ok_or_else(bad)?;
            let w = Window::ALL
                .into_iter()
                .find(|w| w.name() == window)
                .ok_or_else(bad)?;
            h.add(
                (SettingLabel::new(state, role), c, w),
                count.parse().map_err(|_| bad())?,
            );
        }
        Ok(h)
    }
}

impl From<Histogram> for Vec<HistogramRow> {
    fn from(h: Histogram) -> Self {
        h.counts
            .into_iter()
            .map(|((setting, outcome, window), count)| HistogramRow {
                setting,
                outcome,
                window,
                count,
            })
            .collect()
    }
}

impl From<Vec<HistogramRow>> for Histogram {
    fn from(rows: Vec<HistogramRow>) -> Self {
        let mut h = Histogram::new();
        for r in rows {
            h.add((r.setting, r.outcome, r.window), r.count);
        }
        h
    }
}

impl CountSource for Histogram {
    fn count(&self, setting: SettingLabel, conditioning: Conditioning, window: Window) -> f64 {
        self.get(&(setting, conditioning, window)) as f64
    }
}

/// Expected counts, in the same layout as [`Histogram`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpectedCounts {
    pub counts: BTreeMap<HistogramKey, f64>,
}

impl CountSource for ExpectedCounts {
    fn count(&self, setting: SettingLabel, conditioning: Conditioning, window: Window) -> f64 {
        self.counts
            .get(&(setting, conditioning, window))
            .copied()
            .unwrap_or(0.0)
    }
}

impl ExpectedCounts {
    pub fn merge(&mut self, other: &ExpectedCounts) {
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_default() += v;
        }
    }
}

/// Counts for valid heralds only, recomputed straight from records; the
/// reference the histogram is tested against.
pub fn recount(records: &[TrialRecord], outcome: BellOutcome, window: Window) -> u64 {
    records
        .iter()
        .filter(|r| r.outcome == outcome && r.feed_forward != FeedForwardStatus::DeadlineMissed)
        .filter(|r| r.analyzer_clicked(window))
        .count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Click;

    fn record(outcome: BellOutcome, ff: FeedForwardStatus, clicks: &[Window]) -> TrialRecord {
        TrialRecord {
            attempt_id: 0,
            launch_time_ps: 0,
            bsm_clicks: Vec::<Click>::new(),
            outcome,
            herald: None,
            feed_forward: ff,
            analyzer_clicks: clicks.to_vec(),
        }
    }

    fn sample() -> Vec<TrialRecord> {
        use BellOutcome::*;
        use FeedForwardStatus::*;
        vec![
            record(PsiPlus, NotNeeded, &[Window::Central]),
            record(PsiMinus, Applied, &[Window::Central, Window::Late]),
            record(PsiMinus, DeadlineMissed, &[Window::Central]),
            record(NoHerald, NotNeeded, &[Window::Early]),
            record(PsiPlus, NotNeeded, &[]),
        ]
    }

    #[test]
    fn counts_match_recount() {
        let s = SettingLabel::new(NamedState::Plus, AnalyzerRole::Parallel);
        let records = sample();
        let mut h = Histogram::new();
        h.accumulate_all(s, &records);
        for outcome in [BellOutcome::PsiPlus, BellOutcome::PsiMinus] {
            let c = Conditioning::from_outcome(outcome).unwrap();
            for w in Window::ALL {
                assert_eq!(h.get(&(s, c, w)), recount(&records, outcome, w));
            }
        }
        assert_eq!(h.get(&(s, Conditioning::Unconditional, Window::Central)), 3);
        assert_eq!(h.get(&(s, Conditioning::Unconditional, Window::Early)), 1);
    }

    #[test]
    fn merge_is_additive() {
        let s = SettingLabel::new(NamedState::R, AnalyzerRole::Orthogonal);
        let records = sample();
        let mut whole = Histogram::new();
        whole.accumulate_all(s, &records);
        let (a, b) = records.split_at(2);
        let mut left = Histogram::new();
        left.accumulate_all(s, a);
        let mut right = Histogram::new();
        right.accumulate_all(s, b);
        let mut merged = right.clone();
        merged.merge(&left);
        left.merge(&right);
        assert_eq!(merged, whole);
        assert_eq!(left, whole);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut h = Histogram::new();
        h.accumulate_all(
            SettingLabel::new(NamedState::Early, AnalyzerRole::Pole),
            &sample(),
        );
        h.add(
            (
                SettingLabel::new(NamedState::R, AnalyzerRole::Orthogonal),
                Conditioning::PsiMinus,
                Window::Late,
            ),
            7,
        );
        let csv = h.to_csv();
        assert!(csv.starts_with("setting,outcome,window,count\ne/pole,"));
        assert_eq!(Histogram::from_csv(&csv).unwrap(), h);
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<Histogram>(&json).unwrap(), h);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(Histogram::from_csv("").is_err());
        assert!(
            Histogram::from_csv("setting,outcome,window,count\nx/pole,psi_plus,early,1\n").is_err()
        );
        assert!(
            Histogram::from_csv("setting,outcome,window,count\ne/pole,psi_plus,early\n").is_err()
        );
    }

    #[test]
    fn analyzer_phases() {
        let cfg = AnalyzerConfig::default();
        let par = SettingLabel::new(NamedState::R, AnalyzerRole::Parallel).analyzer(&cfg);
        let orth = SettingLabel::new(NamedState::R, AnalyzerRole::Orthogonal).analyzer(&cfg);
        match (par.kind, orth.kind) {
            (AnalyzerKind::Equator { theta: a }, AnalyzerKind::Equator { theta: b }) => {
                assert!((a + PI / 2.0).abs() < 1e-12);
                assert!((b - a - PI).abs() < 1e-12);
            }
            _ => panic!("equator settings expected"),
        }
    }
}
