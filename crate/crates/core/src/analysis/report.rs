use serde::{Deserialize, Serialize};

use crate::devices::{NamedState, Window};

use super::bounds::{classical_bound_single, HeraldNormalization, WcsBounds};
use super::estimators::{
    average, fidelity, mean_fidelity, visibility_equator, visibility_pole, Estimate, Visibility,
};
use super::histogram::{AnalyzerRole, Conditioning, CountSource, SettingLabel};
use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateResult {
    pub state: NamedState,
    pub counts_parallel: f64,
    pub counts_orthogonal: f64,
    pub visibility: Visibility,
    pub fidelity: Estimate,
}

/// Inputs of the classical bounds that are not counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub mu: f64,
    pub herald_efficiency: f64,
    pub normalization: HeraldNormalization,
    pub n_usd: u32,
}

impl BoundInputs {
    /// Reference operating point: μ = 0.02 and a herald efficiency of 1.4 %.
    pub const REFERENCE: BoundInputs = BoundInputs {
        mu: 0.02,
        herald_efficiency: 1.4e-2,
        normalization: HeraldNormalization::PerAttempt,
        n_usd: 2,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub states: Vec<StateResult>,
    pub f_poles: Option<Estimate>,
    pub f_eq: Option<Estimate>,
    pub f_bar: Option<Estimate>,
    pub classical_bound_single: f64,
    /// Bounds at the reference operating point.
    pub classical_bound_wcs: WcsBounds,
    /// Bounds at the simulated herald efficiency, when it is feasible.
    pub classical_bound_wcs_simulated: Option<WcsBounds>,
    /// Equator fidelity from all analyzer detections, ignoring the BSM.
    pub unconditional_f_eq: Option<Estimate>,
    pub warnings: Vec<String>,
}

fn counts_for(
    source: &dyn CountSource,
    state: NamedState,
    conditioning: Option<Conditioning>,
) -> (f64, f64) {
    let read = |role: AnalyzerRole, w: Window| {
        let s = SettingLabel::new(state, role);
        match conditioning {
            Some(c) => source.count(s, c, w),
            None => source.heralded(s, w),
        }
    };
    if state.is_pole() {
        let (own, other) = match state {
            NamedState::Early => (Window::Early, Window::Late),
            _ => (Window::Late, Window::Early),
        };
        (
            read(AnalyzerRole::Pole, own),
            read(AnalyzerRole::Pole, other),
        )
    } else {
        (
            read(AnalyzerRole::Parallel, Window::Central),
            read(AnalyzerRole::Orthogonal, Window::Central),
        )
    }
}

fn state_result(source: &dyn CountSource, state: NamedState) -> Result<StateResult, AnalysisError> {
    let (par, orth) = counts_for(source, state, None);
    let visibility = if state.is_pole() {
        visibility_pole(par, orth)?
    } else {
        visibility_equator(par, orth)?
    };
    Ok(StateResult {
        state,
        counts_parallel: par,
        counts_orthogonal: orth,
        fidelity: fidelity(&visibility)?,
        visibility,
    })
}

/// Builds the report for `states` from heralded coincidence counts.
pub fn report(
    source: &dyn CountSource,
    states: &[NamedState],
    bounds: BoundInputs,
    simulated_herald_efficiency: Option<f64>,
) -> Result<FidelityReport, AnalysisError> {
    if states.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut warnings = Vec::new();
    let mut results = Vec::new();
    for &s in states {
        match state_result(source, s) {
            Ok(r) => {
                if r.visibility.zero_count_bound.is_some() {
                    warnings.push(format!(
                        "state {}: an analyzer cell has zero counts; σ_V = 0 is a lower estimate",
                        s.name()
                    ));
                }
                results.push(r);
            }
            Err(AnalysisError::ZeroCounts) => {
                warnings.push(format!("state {}: no heralded coincidences", s.name()))
            }
            Err(e) => return Err(e),
        }
    }
    if results.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let group = |pole: bool| -> Result<Option<Estimate>, AnalysisError> {
        let f: Vec<Estimate> = results
            .iter()
            .filter(|r| r.state.is_pole() == pole)
            .map(|r| r.fidelity)
            .collect();
        if f.is_empty() {
            Ok(None)
        } else {
            average(&f).map(Some)
        }
    };
    let f_poles = group(true)?;
    let f_eq = group(false)?;
    let f_bar = match (f_poles, f_eq) {
        (Some(p), Some(e)) => Some(mean_fidelity(p, e)?),
        _ => None,
    };
    if let (Some(p), Some(e), Some(b)) = (f_poles, f_eq, f_bar) {
        let parts = p.value / 3.0 + 2.0 * e.value / 3.0;
        if (b.value - parts).abs() > 1e-12 {
            return Err(AnalysisError::Inconsistent(format!(
                "F̄ = {} but its parts give {parts}",
                b.value
            )));
        }
    }

    let mut unconditional = Vec::new();
    for &s in states.iter().filter(|s| !s.is_pole()) {
        let (par, orth) = counts_for(source, s, Some(Conditioning::Unconditional));
        if par + orth > 0.0 {
            unconditional.push(fidelity(&visibility_equator(par, orth)?)?);
        }
    }
    let unconditional_f_eq = if unconditional.is_empty() {
        None
    } else {
        Some(average(&unconditional)?)
    };

    let classical_bound_wcs = WcsBounds::compute(
        bounds.mu,
        bounds.herald_efficiency,
        bounds.normalization,
        bounds.n_usd,
    )?;
    let classical_bound_wcs_simulated = simulated_herald_efficiency
        .filter(|&eta| eta > 0.0)
        .and_then(|eta| {
            WcsBounds::compute(bounds.mu, eta, bounds.normalization, bounds.n_usd).ok()
        });
    Ok(FidelityReport {
        states: results,
        f_poles,
        f_eq,
        f_bar,
        classical_bound_single: classical_bound_single(),
        classical_bound_wcs,
        classical_bound_wcs_simulated,
        unconditional_f_eq,
        warnings,
    })
}
