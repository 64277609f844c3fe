use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_unit, Complex, DensityOperator, FockBasisState, FockError, ModeLabel};

/// Click/no-click detector with finite efficiency and dark clicks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdDetectorParams {
    pub efficiency: f64,
    /// Probability of a dark click per detection gate.
    pub dark_click_probability: f64,
    /// Dead time in ns; enforced by the protocol engine, not by the POVM.
    pub dead_time_ns: f64,
}

impl ThresholdDetectorParams {
    pub const IDEAL: ThresholdDetectorParams = ThresholdDetectorParams {
        efficiency: 1.0,
        dark_click_probability: 0.0,
        dead_time_ns: 0.0,
    };

    pub fn validate(&self) -> Result<(), FockError> {
        check_unit("efficiency", self.efficiency)?;
        check_unit("dark_click_probability", self.dark_click_probability)?;
        if !(self.dead_time_ns >= 0.0) {
            return Err(FockError::OutOfRange {
                name: "dead_time_ns",
                value: self.dead_time_ns,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        Ok(())
    }

    /// No-click POVM element on the `n`-photon state: `(1 − dark)(1 − η)ⁿ`.
    #[inline]
    pub fn no_click_weight(&self, n: u32) -> f64 {
        (1.0 - self.dark_click_probability) * (1.0 - self.efficiency).powi(n as i32)
    }
}

/// A detector watching one or more modes; it clicks on the total photon
/// number it receives.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub modes: Vec<ModeLabel>,
    pub params: ThresholdDetectorParams,
}

impl DetectorSpec {
    pub fn new(modes: Vec<ModeLabel>, params: ThresholdDetectorParams) -> Self {
        DetectorSpec { modes, params }
    }
}

impl DensityOperator {
    /// Probability that a threshold detector on `modes` clicks.
    pub fn click_probability(
        &self,
        modes: &[ModeLabel],
        params: &ThresholdDetectorParams,
    ) -> Result<f64, FockError> {
        params.validate()?;
        let pos: Vec<usize> = modes
            .iter()
            .map(|m| self.register().mode(*m).map(|id| id.index))
            .collect::<Result<_, _>>()?;
        let t = self.trace();
        if t <= 0.0 {
            return Err(FockError::ZeroTrace);
        }
        let no_click: f64 = self
            .diagonal()
            .map(|(b, p)| p * params.no_click_weight(pos.iter().map(|&i| b.get(i) as u32).sum()))
            .sum();
        Ok((1.0 - no_click / t).clamp(0.0, 1.0))
    }

    /// Samples a threshold detection on `mode` with a uniform `draw` in
    /// `[0, 1)` and returns the outcome with the normalized conditional state.
    pub fn measure_threshold(
        &self,
        mode: ModeLabel,
        params: &ThresholdDetectorParams,
        draw: f64,
    ) -> Result<(bool, DensityOperator), FockError> {
        let p_click = self.click_probability(&[mode], params)?;
        let idx = self.register().mode(mode)?.index;
        let click = draw < p_click;
        let weight = |n: u8| {
            let w0 = params.no_click_weight(n as u32);
            if click {
                1.0 - w0
            } else {
                w0
            }
        };
        let post = DensityOperator::from_entries(
            self.register().clone(),
            self.cutoff(),
            self.entries()
                .map(|(a, b, v)| (a, b, v * (weight(a.get(idx)) * weight(b.get(idx))).sqrt())),
        );
        Ok((click, post.normalized()?))
    }
}

/// Joint detection record of several threshold detectors.
///
/// Returns one unnormalized reduced state on `keep` for every click
/// pattern; bit `d` of the pattern index is set when detector `d` clicked.
/// The trace of each branch is the probability of its pattern.
///
/// Detector modes may live in `main` or in an independent `background`
/// state (light that reaches the same detectors but is in a product state
/// with everything else). Only the photon-number distribution of the
/// background enters, so it never has to be tensored with `main`.
pub fn click_branches(
    main: &DensityOperator,
    background: Option<&DensityOperator>,
    detectors: &[DetectorSpec],
    keep: &[ModeLabel],
) -> Result<Vec<DensityOperator>, FockError> {
    let k = detectors.len();
    if k > 8 {
        return Err(FockError::TooManyDetectors(k));
    }
    if keep.is_empty() {
        return Err(FockError::EmptyKeep);
    }
    for d in detectors {
        d.params.validate()?;
    }
    let reg = main.register();
    for &kl in keep {
        reg.mode(kl)?;
    }
    let kept = reg.subset(keep);
    let keep_pos: Vec<usize> = kept
        .labels()
        .iter()
        .map(|l| reg.position(*l).unwrap())
        .collect();
    let traced_pos: Vec<usize> = (0..reg.len()).filter(|p| !keep_pos.contains(p)).collect();

    let mut main_pos: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut bg_pos: Vec<Vec<usize>> = Vec::with_capacity(k);
    for d in detectors {
        let mut mp = Vec::new();
        let mut bp = Vec::new();
        for &m in &d.modes {
            if let Some(p) = reg.position(m) {
                if keep_pos.contains(&p) {
                    return Err(FockError::DetectorModeKept(m));
                }
                mp.push(p);
            } else if let Some(p) = background.and_then(|b| b.register().position(m)) {
                bp.push(p);
            } else {
                return Err(FockError::UnknownMode(m));
            }
        }
        main_pos.push(mp);
        bg_pos.push(bp);
    }

    // photon counts the background delivers to each detector
    let mut bg_dist: Vec<(Vec<u32>, f64)> = match background {
        Some(bg) => {
            let mut m: HashMap<Vec<u32>, f64> = HashMap::new();
            for (b, p) in bg.diagonal() {
                let counts: Vec<u32> = bg_pos
                    .iter()
                    .map(|ps| ps.iter().map(|&i| b.get(i) as u32).sum())
                    .collect();
                *m.entry(counts).or_default() += p;
            }
            m.into_iter().collect()
        }
        None => vec![(vec![0; k], 1.0)],
    };
    bg_dist.sort_by(|a, b| a.0.cmp(&b.0));

    let n_patterns = 1usize << k;
    let mut weight_cache: HashMap<Vec<u32>, Vec<f64>> = HashMap::new();
    let mut maps: Vec<HashMap<(FockBasisState, FockBasisState), Complex>> =
        vec![HashMap::new(); n_patterns];
    for (a, b, v) in main.entries() {
        if a.select(&traced_pos) != b.select(&traced_pos) {
            continue;
        }
        let counts: Vec<u32> = main_pos
            .iter()
            .map(|ps| ps.iter().map(|&i| a.get(i) as u32).sum())
            .collect();
        let weights = weight_cache.entry(counts).or_insert_with_key(|counts| {
            let mut w = vec![0.0; n_patterns];
            for (bc, p) in &bg_dist {
                let no_click: Vec<f64> = detectors
                    .iter()
                    .enumerate()
                    .map(|(d, det)| det.params.no_click_weight(counts[d] + bc[d]))
                    .collect();
                for (pattern, slot) in w.iter_mut().enumerate() {
                    let mut prod = *p;
                    for (d, nc) in no_click.iter().enumerate() {
                        prod *= if pattern >> d & 1 == 1 { 1.0 - nc } else { *nc };
                    }
                    *slot += prod;
                }
            }
            w
        });
        let key = (a.select(&keep_pos), b.select(&keep_pos));
        for (pattern, w) in weights.iter().enumerate() {
            if *w != 0.0 {
                *maps[pattern].entry(key).or_default() += v * *w;
            }
        }
    }
    Ok(maps
        .into_iter()
        .map(|m| {
            let mut entries: Vec<_> = m.into_iter().map(|((a, b), v)| (a, b, v)).collect();
            entries.sort_unstable_by_key(|(a, b, _)| (*a, *b));
            DensityOperator::from_entries(kept.clone(), main.cutoff(), entries)
        })
        .collect())
}
