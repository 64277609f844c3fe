use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Best fidelity for one copy of an unknown qubit measured and re-prepared.
pub fn classical_bound_single() -> f64 {
    2.0 / 3.0
}

/// Per-photon-number fidelity available to a measure-and-prepare cheater.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WcsStrategy {
    /// Optimal state estimation on `n` copies: `(n + 1)/(n + 2)`.
    StateEstimation,
    /// Perfect re-preparation once `n ≥ n_usd` photons allow unambiguous
    /// discrimination; state estimation below that.
    UnambiguousDiscrimination { n_usd: u32 },
}

impl WcsStrategy {
    pub fn fidelity(self, n: u32) -> f64 {
        let estimate = (n as f64 + 1.0) / (n as f64 + 2.0);
        match self {
            WcsStrategy::StateEstimation => estimate,
            WcsStrategy::UnambiguousDiscrimination { n_usd } if n >= n_usd => 1.0,
            WcsStrategy::UnambiguousDiscrimination { .. } => estimate,
        }
    }
}

/// What the herald efficiency is a fraction of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeraldNormalization {
    /// `Σ p_n q_n = η`: heralds per input pulse.
    #[default]
    PerAttempt,
    /// `Σ p_n q_n = η(1 − p₀)`: heralds per non-empty input pulse.
    PerNonVacuumPulse,
}

pub fn poisson(mu: f64, n: u32) -> f64 {
    let mut p = (-mu).exp();
    for k in 1..=n {
        p *= mu / k as f64;
    }
    p
}

/// Photon numbers worth considering for mean `mu`.
fn photon_range(mu: f64) -> u32 {
    let mut n = 1;
    while n < 400 && (n as f64) < mu + 12.0 * mu.sqrt() + 30.0 {
        n += 1;
    }
    n
}

/// Highest fidelity a cheater reaches while heralding as often as the
/// experiment: greedy acceptance of the most informative photon numbers.
pub fn classical_bound_wcs(
    mu: f64,
    herald_efficiency: f64,
    strategy: WcsStrategy,
    normalization: HeraldNormalization,
) -> Result<f64, AnalysisError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(AnalysisError::OutOfRange("mu", mu));
    }
    if !(herald_efficiency > 0.0 && herald_efficiency <= 1.0) {
        return Err(AnalysisError::OutOfRange(
            "herald_efficiency",
            herald_efficiency,
        ));
    }
    let non_vacuum = -(-mu).exp_m1();
    let budget = match normalization {
        HeraldNormalization::PerAttempt => herald_efficiency,
        HeraldNormalization::PerNonVacuumPulse => herald_efficiency * non_vacuum,
    };
    if budget > non_vacuum * (1.0 + 1e-12) {
        return Err(AnalysisError::Infeasible {
            herald_efficiency,
            non_vacuum,
        });
    }
    let mut order: Vec<(u32, f64, f64)> = (1..=photon_range(mu))
        .map(|n| (n, poisson(mu, n), strategy.fidelity(n)))
        .collect();
    order.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut remaining = budget;
    let mut acc = 0.0;
    for (_, p, f) in order {
        if remaining <= 0.0 {
            break;
        }
        let take = p.min(remaining);
        acc += take * f;
        remaining -= take;
    }
    // only reached when the truncated photon range cannot fill the budget
    if remaining > 1e-12 * budget {
        acc += remaining * classical_bound_single();
    }
    Ok(acc / budget)
}

/// Reference value of the weak-coherent-state classical limit at μ = 0.02, η = 1.4 %.
pub const REFERENCE_WCS_BOUND: f64 = 0.727;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcsBounds {
    pub mu: f64,
    pub herald_efficiency: f64,
    pub normalization: HeraldNormalization,
    pub state_estimation: f64,
    pub unambiguous_discrimination: f64,
    pub n_usd: u32,
    pub reference: f64,
}

impl WcsBounds {
    pub fn compute(
        mu: f64,
        herald_efficiency: f64,
        normalization: HeraldNormalization,
        n_usd: u32,
    ) -> Result<Self, AnalysisError> {
        Ok(WcsBounds {
            mu,
            herald_efficiency,
            normalization,
            state_estimation: classical_bound_wcs(
                mu,
                herald_efficiency,
                WcsStrategy::StateEstimation,
                normalization,
            )?,
            unambiguous_discrimination: classical_bound_wcs(
                mu,
                herald_efficiency,
                WcsStrategy::UnambiguousDiscrimination { n_usd },
                normalization,
            )?,
            n_usd,
            reference: REFERENCE_WCS_BOUND,
        })
    }

    pub fn max(&self) -> f64 {
        self.state_estimation.max(self.unambiguous_discrimination)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_copy_bound() {
        assert_eq!(classical_bound_single(), 2.0 / 3.0);
        assert_eq!(
            WcsStrategy::StateEstimation.fidelity(1),
            classical_bound_single()
        );
    }

    #[test]
    fn small_mu_tends_to_two_thirds() {
        let f = classical_bound_wcs(
            1e-6,
            5e-7,
            WcsStrategy::StateEstimation,
            HeraldNormalization::PerAttempt,
        )
        .unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_budget() {
        let e = classical_bound_wcs(
            0.02,
            0.5,
            WcsStrategy::StateEstimation,
            HeraldNormalization::PerAttempt,
        );
        assert!(matches!(e, Err(AnalysisError::Infeasible { .. })));
    }

    #[test]
    fn all_photon_numbers_accepted() {
        // budget equal to the non-vacuum probability: the average of F_n over p_n
        let mu: f64 = 0.5;
        let nv = 1.0 - (-mu).exp();
        let f = classical_bound_wcs(
            mu,
            nv,
            WcsStrategy::StateEstimation,
            HeraldNormalization::PerAttempt,
        )
        .unwrap();
        let direct: f64 = (1..60)
            .map(|n| poisson(mu, n) * (n as f64 + 1.0) / (n as f64 + 2.0))
            .sum::<f64>()
            / nv;
        assert!((f - direct).abs() < 1e-12);
    }
}
