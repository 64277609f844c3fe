use serde::{Deserialize, Serialize};

use crate::fock::Bin;

/// The two BSM detectors behind the 50:50 splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    D1,
    D2,
}

impl Detector {
    pub const BOTH: [Detector; 2] = [Detector::D1, Detector::D2];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Click {
    pub detector: Detector,
    pub bin: Bin,
}

impl Click {
    pub const fn new(detector: Detector, bin: Bin) -> Self {
        Click { detector, bin }
    }

    /// Bit of this click in a 4-bit BSM pattern: `D1e, D1l, D2e, D2l`.
    pub fn bit(self) -> usize {
        2 * self.detector.index() + self.bin as usize
    }

    pub const ALL: [Click; 4] = [
        Click::new(Detector::D1, Bin::Early),
        Click::new(Detector::D1, Bin::Late),
        Click::new(Detector::D2, Bin::Early),
        Click::new(Detector::D2, Bin::Late),
    ];
}

/// Clicks of one attempt, in time order, from a 4-bit pattern.
pub fn pattern_clicks(pattern: usize) -> Vec<Click> {
    let mut clicks: Vec<Click> = Click::ALL
        .into_iter()
        .filter(|c| pattern >> c.bit() & 1 == 1)
        .collect();
    clicks.sort_by_key(|c| (c.bin, c.detector));
    clicks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellOutcome {
    PsiPlus,
    PsiMinus,
    NoHerald,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 3] = [
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
        BellOutcome::NoHerald,
    ];

    pub fn is_herald(self) -> bool {
        self != BellOutcome::NoHerald
    }

    pub fn name(self) -> &'static str {
        match self {
            BellOutcome::PsiPlus => "psi_plus",
            BellOutcome::PsiMinus => "psi_minus",
            BellOutcome::NoHerald => "no_herald",
        }
    }
}

/// Removes repeated `(detector, bin)` entries and, per detector, clicks that
/// fall within `dead_time_ns` of the previous kept click.
pub fn filter_dead_time(clicks: &[Click], dead_time_ns: f64, bin_separation_ns: f64) -> Vec<Click> {
    let mut sorted = clicks.to_vec();
    sorted.sort_by_key(|c| (c.bin, c.detector));
    sorted.dedup();
    let mut last: [Option<Bin>; 2] = [None, None];
    sorted
        .into_iter()
        .filter(|c| {
            let slot = &mut last[c.detector.index()];
            let dead = dead_time_ns > 0.0
                && matches!(slot, Some(prev) if (c.bin as u8 - *prev as u8) as f64 * bin_separation_ns <= dead_time_ns);
            if !dead {
                *slot = Some(c.bin);
            }
            !dead
        })
        .collect()
}

/// Classifies the clicks of one attempt.
///
/// Same detector in both bins heralds `Ψ⁺`; different detectors in different
/// bins herald `Ψ⁻`; anything else is no herald.
pub fn classify_bsm(clicks: &[Click], dead_time_ns: f64, bin_separation_ns: f64) -> BellOutcome {
    let kept = filter_dead_time(clicks, dead_time_ns, bin_separation_ns);
    match kept.as_slice() {
        [a, b] if a.bin != b.bin => {
            if a.detector == b.detector {
                BellOutcome::PsiPlus
            } else {
                BellOutcome::PsiMinus
            }
        }
        _ => BellOutcome::NoHerald,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Bin::{Early as E, Late as L};
    use Detector::{D1, D2};

    #[test]
    fn herald_patterns() {
        let c = |d, b| Click::new(d, b);
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D1, L)], 50.0, 420.0),
            BellOutcome::PsiPlus
        );
        assert_eq!(
            classify_bsm(&[c(D2, E), c(D2, L)], 50.0, 420.0),
            BellOutcome::PsiPlus
        );
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D2, L)], 50.0, 420.0),
            BellOutcome::PsiMinus
        );
        assert_eq!(
            classify_bsm(&[c(D2, L), c(D1, E)], 50.0, 420.0),
            BellOutcome::PsiMinus
        );
        assert_eq!(
            classify_bsm(&[c(D1, E)], 50.0, 420.0),
            BellOutcome::NoHerald
        );
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D2, E)], 50.0, 420.0),
            BellOutcome::NoHerald
        );
        assert_eq!(classify_bsm(&[], 50.0, 420.0), BellOutcome::NoHerald);
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D1, L)], 0.0, 0.0),
            BellOutcome::PsiPlus
        );
        // duplicates collapse
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D1, E), c(D1, L)], 50.0, 420.0),
            BellOutcome::PsiPlus
        );
    }

    #[test]
    fn long_dead_time_blocks_psi_plus() {
        let c = |d, b| Click::new(d, b);
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D1, L)], 420.0, 420.0),
            BellOutcome::NoHerald
        );
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D2, L)], 420.0, 420.0),
            BellOutcome::PsiMinus
        );
        // the late D1 click is removed, leaving a valid Ψ⁻ pair
        assert_eq!(
            classify_bsm(&[c(D1, E), c(D1, L), c(D2, L)], 500.0, 420.0),
            BellOutcome::PsiMinus
        );
    }

    #[test]
    fn pattern_bits_roundtrip() {
        for p in 0..16 {
            let back: usize = pattern_clicks(p).iter().map(|c| 1 << c.bit()).sum();
            assert_eq!(back, p);
        }
    }
}
