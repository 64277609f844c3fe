use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// A value with its one-standard-deviation counting error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Estimate { value, sigma }
    }
}

/// Counts behind a visibility, with the caveat when one cell is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    pub sigma: f64,
    /// Set when a cell is zero and the Poisson formula gives σ = 0; holds
    /// the one-sided 68 % bound on |V| from 1.14 counts in the empty cell.
    pub zero_count_bound: Option<f64>,
}

/// Upper 68 % Poisson limit on the mean when zero counts are observed.
pub const ZERO_COUNT_UPPER_68: f64 = 1.14;

fn visibility(major: f64, minor: f64) -> Result<Visibility, AnalysisError> {
    if !(major >= 0.0 && minor >= 0.0) {
        return Err(AnalysisError::NegativeCounts);
    }
    let total = major + minor;
    if total <= 0.0 {
        return Err(AnalysisError::ZeroCounts);
    }
    let value = (major - minor) / total;
    let sigma = 2.0 * (major * major * minor + minor * minor * major).sqrt() / (total * total);
    let zero_count_bound = if major == 0.0 || minor == 0.0 {
        let (hi, lo) = if major == 0.0 {
            (ZERO_COUNT_UPPER_68, minor)
        } else {
            (major, ZERO_COUNT_UPPER_68)
        };
        Some((hi - lo).abs() / (hi + lo))
    } else {
        None
    };
    Ok(Visibility {
        value,
        sigma,
        zero_count_bound,
    })
}

/// `V = (C_∥ − C_⊥)/(C_∥ + C_⊥)` with Poisson error.
pub fn visibility_equator(parallel: f64, orthogonal: f64) -> Result<Visibility, AnalysisError> {
    visibility(parallel, orthogonal)
}

/// `V = (C_⊥ − C_∥)/(C_⊥ + C_∥)`: poles are teleported without bit flip, so
/// the orthogonal window carries the signal.
pub fn visibility_pole(parallel: f64, orthogonal: f64) -> Result<Visibility, AnalysisError> {
    visibility(orthogonal, parallel)
}

pub fn fidelity_from_visibility(v: f64) -> Result<f64, AnalysisError> {
    if !(-1.0..=1.0).contains(&v) {
        return Err(AnalysisError::OutOfRange("visibility", v));
    }
    Ok((1.0 + v) / 2.0)
}

/// Fidelity with error from a visibility.
pub fn fidelity(v: &Visibility) -> Result<Estimate, AnalysisError> {
    Ok(Estimate::new(
        fidelity_from_visibility(v.value)?,
        v.sigma / 2.0,
    ))
}

/// `F̄ = F̄_poles/3 + 2F̄_eq/3`, errors added in quadrature.
pub fn mean_fidelity(poles: Estimate, equator: Estimate) -> Result<Estimate, AnalysisError> {
    for (name, x) in [("F_poles", poles.value), ("F_eq", equator.value)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(AnalysisError::OutOfRange(name, x));
        }
    }
    Ok(Estimate::new(
        poles.value / 3.0 + 2.0 * equator.value / 3.0,
        ((poles.sigma / 3.0).powi(2) + (2.0 * equator.sigma / 3.0).powi(2)).sqrt(),
    ))
}

/// Unweighted mean of several estimates, errors in quadrature.
pub fn average(items: &[Estimate]) -> Result<Estimate, AnalysisError> {
    if items.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = items.len() as f64;
    Ok(Estimate::new(
        items.iter().map(|e| e.value).sum::<f64>() / n,
        items.iter().map(|e| e.sigma * e.sigma).sum::<f64>().sqrt() / n,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visibilities() {
        let v = visibility_equator(90.0, 10.0).unwrap();
        assert!((v.value - 0.8).abs() < 1e-15);
        // 2√(90²·10 + 10²·90)/100² = 2√90000/10⁴
        assert!((v.sigma - 0.06).abs() < 1e-15);
        assert_eq!(visibility_equator(50.0, 50.0).unwrap().value, 0.0);
        let z = visibility_equator(40.0, 0.0).unwrap();
        assert_eq!((z.value, z.sigma), (1.0, 0.0));
        assert!(z.zero_count_bound.unwrap() < 1.0);
        assert!(visibility_equator(0.0, 0.0).is_err());
        assert!((visibility_pole(10.0, 90.0).unwrap().value - 0.8).abs() < 1e-15);
        assert_eq!(visibility_pole(50.0, 50.0).unwrap().value, 0.0);
    }

    #[test]
    fn fidelities() {
        assert_eq!(fidelity_from_visibility(1.0).unwrap(), 1.0);
        assert_eq!(fidelity_from_visibility(0.0).unwrap(), 0.5);
        assert!((fidelity_from_visibility(0.76).unwrap() - 0.88).abs() < 1e-15);
        assert!(fidelity_from_visibility(1.2).is_err());
        let m = mean_fidelity(Estimate::new(0.80, 0.0), Estimate::new(0.88, 0.0)).unwrap();
        assert!((m.value - 0.853_333).abs() < 1e-6);
        let m = mean_fidelity(Estimate::new(0.87, 0.0), Estimate::new(0.86, 0.0)).unwrap();
        assert!((m.value - 0.863_333).abs() < 1e-6);
        assert_eq!(
            mean_fidelity(Estimate::new(1.0, 0.0), Estimate::new(1.0, 0.0))
                .unwrap()
                .value,
            1.0
        );
    }
}
