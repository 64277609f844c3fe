use crate::devices::Window;
use crate::protocol::{AttemptModel, BellOutcome};

use super::histogram::{Conditioning, ExpectedCounts, SettingLabel};

/// Mean counts of `n_attempts` attempts under `model`, without sampling.
///
/// `on_time` says whether heralds reach the memory before retrieval; late
/// heralds are neither corrected nor counted as heralded.
pub fn expected_counts(
    model: &AttemptModel,
    setting: SettingLabel,
    n_attempts: f64,
    on_time: bool,
) -> ExpectedCounts {
    let mut out = ExpectedCounts::default();
    for p in 0..16 {
        let prob = model.pattern_probs[p];
        if prob == 0.0 {
            continue;
        }
        let outcome = model.outcomes[p];
        let corrected = on_time && outcome == BellOutcome::PsiMinus;
        let analyzer = model.analyzer_given(p, corrected);
        for w in Window::ALL {
            let n = n_attempts * prob * analyzer.marginal(w);
            if n == 0.0 {
                continue;
            }
            *out.counts
                .entry((setting, Conditioning::Unconditional, w))
                .or_default() += n;
            if on_time {
                if let Some(c) = Conditioning::from_outcome(outcome) {
                    *out.counts.entry((setting, c, w)).or_default() += n;
                }
            }
        }
    }
    out
}

/// Probability per herald that the analyzer registers at least one click.
pub fn herald_efficiency(model: &AttemptModel, on_time: bool) -> f64 {
    let mut heralds = 0.0;
    let mut detected = 0.0;
    for p in 0..16 {
        let outcome = model.outcomes[p];
        if !outcome.is_herald() {
            continue;
        }
        let corrected = on_time && outcome == BellOutcome::PsiMinus;
        heralds += model.pattern_probs[p];
        detected += model.pattern_probs[p] * (1.0 - model.analyzer_given(p, corrected).no_click());
    }
    if heralds > 0.0 {
        detected / heralds
    } else {
        0.0
    }
}
