use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{
    check_unit, Complex, FockBasisState, FockError, ModeLabel, PureState, Register, MAX_OCCUPATION,
};

/// Amplitudes below this magnitude are dropped from the sparse map.
pub const PRUNE_TOLERANCE: f64 = 1e-14;

/// Largest probability mass a source injection may discard through truncation.
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-4;

const DENSE_LIMIT: usize = 4096;

type Key = (FockBasisState, FockBasisState);

/// Sparse Hermitian operator over the occupation basis of a register.
///
/// Values are immutable; every operation returns a new state. Entries are
/// kept sorted by `(ket, bra)`; iteration and floating-point reductions
/// follow that order.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    register: Register,
    cutoff: u8,
    truncation_tolerance: f64,
    entries: Vec<(FockBasisState, FockBasisState, Complex)>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl DensityOperator {
    /// `|0…0⟩⟨0…0|` over `register`.
    pub fn vacuum(register: Register, cutoff: u8) -> Result<Self, FockError> {
        if cutoff < 1 {
            return Err(FockError::InvalidCutoff(cutoff));
        }
        Ok(DensityOperator {
            register,
            cutoff,
            truncation_tolerance: DEFAULT_TRUNCATION_TOLERANCE,
            entries: vec![(
                FockBasisState::VACUUM,
                FockBasisState::VACUUM,
                Complex::new(1.0, 0.0),
            )],
        })
    }

    pub fn from_pure(pure: &PureState, cutoff: u8) -> Result<Self, FockError> {
        if cutoff < 1 {
            return Err(FockError::InvalidCutoff(cutoff));
        }
        let mut map = HashMap::new();
        for (a, ca) in pure.amplitudes() {
            for (b, cb) in pure.amplitudes() {
                *map.entry((*a, *b)).or_default() += *ca * cb.conj();
            }
        }
        Ok(Self::from_map(
            pure.register().clone(),
            cutoff,
            DEFAULT_TRUNCATION_TOLERANCE,
            map,
        ))
    }

    /// Builds a state from raw entries; duplicate keys are summed.
    pub fn from_entries(
        register: Register,
        cutoff: u8,
        entries: impl IntoIterator<Item = (FockBasisState, FockBasisState, Complex)>,
    ) -> Self {
        let mut map: HashMap<Key, Complex> = HashMap::new();
        for (a, b, v) in entries {
            *map.entry((a, b)).or_default() += v;
        }
        Self::from_map(register, cutoff, DEFAULT_TRUNCATION_TOLERANCE, map)
    }

    fn from_map(
        register: Register,
        cutoff: u8,
        truncation_tolerance: f64,
        map: HashMap<Key, Complex>,
    ) -> Self {
        let mut entries: Vec<_> = map
            .into_iter()
            .filter(|(_, v)| v.norm() >= PRUNE_TOLERANCE)
            .map(|((a, b), v)| (a, b, v))
            .collect();
        entries.sort_unstable_by_key(|(a, b, _)| (*a, *b));
        DensityOperator {
            register,
            cutoff,
            truncation_tolerance,
            entries,
        }
    }

    fn derive(&self, register: Register, map: HashMap<Key, Complex>) -> Self {
        Self::from_map(register, self.cutoff, self.truncation_tolerance, map)
    }

    fn map_values(&self, f: impl Fn(FockBasisState, FockBasisState, Complex) -> Complex) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(a, b, v)| (a, b, f(a, b, v)))
            .filter(|(_, _, v)| v.norm() >= PRUNE_TOLERANCE)
            .collect();
        DensityOperator {
            register: self.register.clone(),
            cutoff: self.cutoff,
            truncation_tolerance: self.truncation_tolerance,
            entries,
        }
    }

    /// Sets the probability mass a source injection may discard.
    pub fn with_truncation_tolerance(mut self, tolerance: f64) -> Self {
        self.truncation_tolerance = tolerance;
        self
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn cutoff(&self) -> u8 {
        self.cutoff
    }

    pub fn entries(&self) -> impl Iterator<Item = (FockBasisState, FockBasisState, Complex)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, ket: FockBasisState, bra: FockBasisState) -> Complex {
        self.entries
            .binary_search_by_key(&(ket, bra), |(a, b, _)| (*a, *b))
            .map(|i| self.entries[i].2)
            .unwrap_or_default()
    }

    /// Entry addressed by occupation lists.
    pub fn element(&self, ket: &[u8], bra: &[u8]) -> Complex {
        self.entry(
            FockBasisState::from_occupations(ket),
            FockBasisState::from_occupations(bra),
        )
    }

    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .filter(|(a, b, _)| a == b)
            .map(|(_, _, v)| v.re)
            .sum()
    }

    pub fn purity(&self) -> f64 {
        let t = self.trace();
        self.entries
            .iter()
            .map(|(_, _, v)| v.norm_sqr())
            .sum::<f64>()
            / (t * t)
    }

    /// Diagonal of the operator: `(basis state, probability weight)`.
    pub fn diagonal(&self) -> impl Iterator<Item = (FockBasisState, f64)> + '_ {
        self.entries
            .iter()
            .filter(|(a, b, _)| a == b)
            .map(|(a, _, v)| (*a, v.re))
    }

    pub fn photon_number_expectation(&self, mode: ModeLabel) -> Result<f64, FockError> {
        let idx = self.register.mode(mode)?.index;
        let t = self.trace();
        if t <= 0.0 {
            return Err(FockError::ZeroTrace);
        }
        Ok(self
            .diagonal()
            .map(|(b, p)| b.get(idx) as f64 * p)
            .sum::<f64>()
            / t)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_values(|_, _, v| v * factor)
    }

    pub fn normalized(&self) -> Result<Self, FockError> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(FockError::ZeroTrace);
        }
        Ok(self.scaled(1.0 / t))
    }

    /// `self + other` over the same register.
    pub fn add(&self, other: &DensityOperator) -> Result<Self, FockError> {
        if self.register != other.register {
            return Err(FockError::RegisterMismatch);
        }
        let mut map: HashMap<Key, Complex> = HashMap::with_capacity(self.len() + other.len());
        for (a, b, v) in self.entries().chain(other.entries()) {
            *map.entry((a, b)).or_default() += v;
        }
        Ok(self.derive(self.register.clone(), map))
    }

    /// `(1 − weight)·self + weight·other`.
    pub fn mix(&self, other: &DensityOperator, weight: f64) -> Result<Self, FockError> {
        check_unit("weight", weight)?;
        self.scaled(1.0 - weight).add(&other.scaled(weight))
    }

    /// Largest deviation from Hermiticity over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(a, b, v)| (v - self.entry(b, a).conj()).norm())
            .fold(0.0, f64::max)
    }

    fn max_total_photons(&self) -> u32 {
        self.entries
            .iter()
            .map(|(a, b, _)| a.total().max(b.total()))
            .max()
            .unwrap_or(0)
    }

    fn vacuum_check(&self, idx: usize, label: ModeLabel) -> Result<(), FockError> {
        if self
            .entries
            .iter()
            .any(|(a, b, _)| a.get(idx) != 0 || b.get(idx) != 0)
        {
            return Err(FockError::ModeNotVacuum(label));
        }
        Ok(())
    }

    /// Tensors a pure state on modes that are currently in vacuum.
    ///
    /// `terms` are `(occupations of the listed modes, amplitude)`.
    pub fn inject(
        &self,
        modes: &[ModeLabel],
        terms: &[(Vec<u8>, Complex)],
    ) -> Result<Self, FockError> {
        let mut positions = Vec::with_capacity(modes.len());
        for (i, &m) in modes.iter().enumerate() {
            if modes[..i].contains(&m) {
                return Err(FockError::SameMode(m));
            }
            let idx = self.register.mode(m)?.index;
            self.vacuum_check(idx, m)?;
            positions.push(idx);
        }
        let added = terms
            .iter()
            .map(|(occ, _)| occ.iter().map(|&n| n as u32).sum::<u32>())
            .max()
            .unwrap_or(0);
        if self.max_total_photons() + added > MAX_OCCUPATION as u32 {
            return Err(FockError::Capacity {
                max: MAX_OCCUPATION,
            });
        }
        let local: Vec<(FockBasisState, Complex)> = terms
            .iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(occ, c)| {
                let mut s = FockBasisState::VACUUM;
                for (&p, &n) in positions.iter().zip(occ) {
                    s = s.with(p, n);
                }
                (s, *c)
            })
            .collect();
        let mut map: HashMap<Key, Complex> =
            HashMap::with_capacity(self.len() * local.len() * local.len());
        for &(a, b, v) in &self.entries {
            for &(x, cx) in &local {
                for &(y, cy) in &local {
                    let key = (
                        FockBasisState::from_raw(a.raw() | x.raw()),
                        FockBasisState::from_raw(b.raw() | y.raw()),
                    );
                    *map.entry(key).or_default() += v * cx * cy.conj();
                }
            }
        }
        Ok(self.derive(self.register.clone(), map))
    }

    fn check_truncation(&self, discarded: f64) -> Result<(), FockError> {
        if discarded > self.truncation_tolerance {
            return Err(FockError::TruncationUnsound {
                cutoff: self.cutoff,
                discarded,
                tolerance: self.truncation_tolerance,
            });
        }
        Ok(())
    }

    /// Puts a coherent state of complex `amplitude` into a vacuum mode,
    /// truncated at the cutoff and renormalized.
    pub fn inject_coherent(&self, mode: ModeLabel, amplitude: Complex) -> Result<Self, FockError> {
        let mean = amplitude.norm_sqr();
        if mean == 0.0 {
            self.register.mode(mode)?;
            return Ok(self.clone());
        }
        if mean > self.cutoff as f64 {
            return Err(FockError::TruncationUnsound {
                cutoff: self.cutoff,
                discarded: f64::NAN,
                tolerance: self.truncation_tolerance,
            });
        }
        let amps: Vec<Complex> = (0..=self.cutoff as u32)
            .map(|n| (-mean / 2.0).exp() * amplitude.powu(n) / factorial(n).sqrt())
            .collect();
        let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        self.check_truncation(1.0 - kept)?;
        let norm = kept.sqrt();
        let terms: Vec<(Vec<u8>, Complex)> = amps
            .iter()
            .enumerate()
            .map(|(n, a)| (vec![n as u8], *a / norm))
            .collect();
        self.inject(&[mode], &terms)
    }

    /// Two-mode squeezed vacuum `Σ λⁿ|n,n⟩` on two vacuum modes, truncated at
    /// the cutoff and renormalized.
    pub fn inject_pair_source(
        &self,
        a: ModeLabel,
        b: ModeLabel,
        pair_amplitude: f64,
    ) -> Result<Self, FockError> {
        if a == b {
            return Err(FockError::SameMode(a));
        }
        let l2 = pair_amplitude * pair_amplitude;
        if l2 >= 1.0 {
            return Err(FockError::OutOfRange {
                name: "pair_amplitude",
                value: pair_amplitude,
                min: -1.0,
                max: 1.0,
            });
        }
        if pair_amplitude == 0.0 {
            self.register.mode(a)?;
            self.register.mode(b)?;
            return Ok(self.clone());
        }
        // untruncated norm² is 1/(1 − λ²); the discarded tail is λ^{2(c+1)}
        self.check_truncation(l2.powi(self.cutoff as i32 + 1))?;
        let raw: Vec<f64> = (0..=self.cutoff as i32)
            .map(|n| pair_amplitude.powi(n))
            .collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let terms: Vec<(Vec<u8>, Complex)> = raw
            .iter()
            .enumerate()
            .map(|(n, x)| (vec![n as u8, n as u8], Complex::new(x / norm, 0.0)))
            .collect();
        self.inject(&[a, b], &terms)
    }

    /// Two-mode beam splitter acting on creation operators as
    /// `a₁† → √T a₁† + √(1−T) e^{iφ} a₂†`, `a₂† → −√(1−T) e^{−iφ} a₁† + √T a₂†`.
    ///
    /// The inverse is the same splitter with the modes swapped and `−φ`.
    pub fn beam_splitter(
        &self,
        m1: ModeLabel,
        m2: ModeLabel,
        transmissivity: f64,
        phase: f64,
    ) -> Result<Self, FockError> {
        if m1 == m2 {
            return Err(FockError::SameMode(m1));
        }
        check_unit("transmissivity", transmissivity)?;
        let i1 = self.register.mode(m1)?.index;
        let i2 = self.register.mode(m2)?.index;
        let t = Complex::new(transmissivity.sqrt(), 0.0);
        let r = (1.0 - transmissivity).sqrt();
        let s = Complex::from_polar(r, phase);
        let u = -Complex::from_polar(r, -phase);

        let mut cache: HashMap<(u8, u8), Vec<(u8, Complex)>> = HashMap::new();
        let mut outputs = |n1: u8, n2: u8| -> Vec<(u8, Complex)> {
            cache
                .entry((n1, n2))
                .or_insert_with(|| splitter_column(n1 as u32, n2 as u32, t, s, u))
                .clone()
        };

        let mut map: HashMap<Key, Complex> = HashMap::with_capacity(self.len() * 2);
        for &(a, b, v) in &self.entries {
            let (na1, na2) = (a.get(i1), a.get(i2));
            let (nb1, nb2) = (b.get(i1), b.get(i2));
            let out_a = outputs(na1, na2);
            let out_b = outputs(nb1, nb2);
            let tot_a = na1 + na2;
            let tot_b = nb1 + nb2;
            for &(x, cx) in &out_a {
                let ka = a.with(i1, x).with(i2, tot_a - x);
                for &(y, cy) in &out_b {
                    let kb = b.with(i1, y).with(i2, tot_b - y);
                    *map.entry((ka, kb)).or_default() += v * cx * cy.conj();
                }
            }
        }
        Ok(self.derive(self.register.clone(), map))
    }

    /// A basis state with `n` photons in `mode` picks up `e^{i n θ}`.
    pub fn phase_shift(&self, mode: ModeLabel, theta: f64) -> Result<Self, FockError> {
        let idx = self.register.mode(mode)?.index;
        Ok(self.map_values(|a, b, v| {
            let dn = a.get(idx) as f64 - b.get(idx) as f64;
            v * Complex::from_polar(1.0, theta * dn)
        }))
    }

    /// Pure-loss channel of transmissivity `survival`.
    ///
    /// Equivalent to mixing the mode with a vacuum ancilla on a beam splitter
    /// and tracing the ancilla out; applied here through its Kraus operators.
    pub fn loss_channel(&self, mode: ModeLabel, survival: f64) -> Result<Self, FockError> {
        check_unit("survival", survival)?;
        let idx = self.register.mode(mode)?.index;
        if survival == 1.0 {
            return Ok(self.clone());
        }
        let amp = survival.sqrt();
        let lost = 1.0 - survival;
        let mut map: HashMap<Key, Complex> = HashMap::with_capacity(self.len() * 2);
        for &(a, b, v) in &self.entries {
            let n = a.get(idx) as u32;
            let m = b.get(idx) as u32;
            for j in 0..=n.min(m) {
                let w = (binomial(n, j) * binomial(m, j)).sqrt()
                    * amp.powi((n - j) as i32)
                    * amp.powi((m - j) as i32)
                    * lost.powi(j as i32);
                if w == 0.0 {
                    continue;
                }
                let key = (a.with(idx, (n - j) as u8), b.with(idx, (m - j) as u8));
                *map.entry(key).or_default() += v * w;
            }
        }
        Ok(self.derive(self.register.clone(), map))
    }

    /// Random-phase channel: coherences between photon numbers `n` and `m`
    /// of `mode` are damped by `coherence^{|n−m|}`.
    pub fn dephase(&self, mode: ModeLabel, coherence: f64) -> Result<Self, FockError> {
        check_unit("coherence", coherence)?;
        let idx = self.register.mode(mode)?.index;
        Ok(self.map_values(|a, b, v| {
            let dn = (a.get(idx) as i32 - b.get(idx) as i32).unsigned_abs();
            v * coherence.powi(dn as i32)
        }))
    }

    /// Reduced state on `keep`, in register order.
    pub fn partial_trace(&self, keep: &[ModeLabel]) -> Result<Self, FockError> {
        if keep.is_empty() {
            return Err(FockError::EmptyKeep);
        }
        for &k in keep {
            self.register.mode(k)?;
        }
        let kept = self.register.subset(keep);
        let keep_pos: Vec<usize> = kept
            .labels()
            .iter()
            .map(|l| self.register.position(*l).unwrap())
            .collect();
        let traced_pos: Vec<usize> = (0..self.register.len())
            .filter(|p| !keep_pos.contains(p))
            .collect();
        let mut map: HashMap<Key, Complex> = HashMap::new();
        for &(a, b, v) in &self.entries {
            if a.select(&traced_pos) == b.select(&traced_pos) {
                *map.entry((a.select(&keep_pos), b.select(&keep_pos)))
                    .or_default() += v;
            }
        }
        Ok(self.derive(kept, map))
    }

    /// Unnormalized state of the remaining modes after projecting the modes
    /// of `target` onto it: `⟨ψ|ρ|ψ⟩` taken over `target`'s register only.
    pub fn project_pure(&self, target: &PureState) -> Result<Self, FockError> {
        let tpos: Vec<usize> = target
            .register()
            .labels()
            .iter()
            .map(|l| self.register.mode(*l).map(|m| m.index))
            .collect::<Result<_, _>>()?;
        let rest_labels: Vec<ModeLabel> = self
            .register
            .labels()
            .iter()
            .copied()
            .filter(|l| !target.register().contains(*l))
            .collect();
        if rest_labels.is_empty() {
            return Err(FockError::EmptyKeep);
        }
        let rest = self.register.subset(&rest_labels);
        let rpos: Vec<usize> = rest
            .labels()
            .iter()
            .map(|l| self.register.position(*l).unwrap())
            .collect();
        let amp: HashMap<FockBasisState, Complex> = target.amplitudes().iter().copied().collect();
        let mut map: HashMap<Key, Complex> = HashMap::new();
        for &(a, b, v) in &self.entries {
            let (Some(ca), Some(cb)) = (amp.get(&a.select(&tpos)), amp.get(&b.select(&tpos)))
            else {
                continue;
            };
            *map.entry((a.select(&rpos), b.select(&rpos))).or_default() += ca.conj() * v * cb;
        }
        Ok(self.derive(rest, map))
    }

    /// `⟨ψ|ρ|ψ⟩ / tr ρ`. The target may list its modes in any order.
    pub fn fidelity_to_pure(&self, target: &PureState) -> Result<f64, FockError> {
        let norm = target.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(FockError::NotNormalized(norm));
        }
        if target.register().len() != self.register.len() {
            return Err(FockError::RegisterMismatch);
        }
        let t = self.trace();
        if t <= 0.0 {
            return Err(FockError::ZeroTrace);
        }
        // map target ordering onto ours
        let pos: Vec<usize> = self
            .register
            .labels()
            .iter()
            .map(|l| {
                target
                    .register()
                    .position(*l)
                    .ok_or(FockError::RegisterMismatch)
            })
            .collect::<Result<_, _>>()?;
        let amp: HashMap<FockBasisState, Complex> = target
            .amplitudes()
            .iter()
            .map(|(b, c)| (b.select(&pos), *c))
            .collect();
        let mut acc = Complex::default();
        for &(a, b, v) in &self.entries {
            if let (Some(ca), Some(cb)) = (amp.get(&a), amp.get(&b)) {
                acc += ca.conj() * v * cb;
            }
        }
        Ok((acc.re / t).clamp(0.0, 1.0))
    }

    /// `self ⊗ other` with `other`'s modes appended.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self, FockError> {
        let register = self.register.concat(&other.register)?;
        if self.max_total_photons() + other.max_total_photons() > MAX_OCCUPATION as u32 {
            return Err(FockError::Capacity {
                max: MAX_OCCUPATION,
            });
        }
        let n = self.register.len();
        let mut map: HashMap<Key, Complex> = HashMap::with_capacity(self.len() * other.len());
        for &(a, b, v) in &self.entries {
            for &(x, y, w) in &other.entries {
                *map.entry((a.append(n, x), b.append(n, y))).or_default() += v * w;
            }
        }
        Ok(Self::from_map(
            register,
            self.cutoff.max(other.cutoff),
            self.truncation_tolerance,
            map,
        ))
    }

    /// Adds a vacuum mode at the end of the register.
    pub fn append_vacuum(&self, label: ModeLabel) -> Result<Self, FockError> {
        let register = self.register.push_unchecked(label)?;
        Ok(DensityOperator {
            register,
            cutoff: self.cutoff,
            truncation_tolerance: self.truncation_tolerance,
            entries: self.entries.clone(),
        })
    }

    /// Dense matrix over the basis states that carry weight, with that basis.
    pub fn to_dense(&self) -> Result<(Vec<FockBasisState>, DMatrix<Complex>), FockError> {
        let mut basis: Vec<FockBasisState> =
            self.entries.iter().flat_map(|(a, b, _)| [*a, *b]).collect();
        basis.sort_unstable();
        basis.dedup();
        if basis.len() > DENSE_LIMIT {
            return Err(FockError::TooLargeForDense(basis.len(), DENSE_LIMIT));
        }
        let index: HashMap<FockBasisState, usize> =
            basis.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        let mut m = DMatrix::<Complex>::zeros(basis.len(), basis.len());
        for &(a, b, v) in &self.entries {
            m[(index[&a], index[&b])] = v;
        }
        Ok((basis, m))
    }

    /// Smallest eigenvalue of the Hermitian part, from a dense decomposition.
    pub fn min_eigenvalue(&self) -> Result<f64, FockError> {
        let (_, m) = self.to_dense()?;
        let h = (&m + m.adjoint()) * Complex::new(0.5, 0.0);
        let eig = h.symmetric_eigenvalues();
        Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Output amplitudes `(m₁, c)` of the two-mode splitter acting on `|n₁, n₂⟩`;
/// the second output mode holds `n₁ + n₂ − m₁` photons.
fn splitter_column(n1: u32, n2: u32, t: Complex, s: Complex, u: Complex) -> Vec<(u8, Complex)> {
    let total = n1 + n2;
    let mut out = vec![Complex::default(); total as usize + 1];
    for k1 in 0..=n1 {
        for k2 in 0..=n2 {
            let c = binomial(n1, k1) * binomial(n2, k2);
            let amp = t.powu(k1) * s.powu(n1 - k1) * u.powu(k2) * t.powu(n2 - k2) * c;
            out[(k1 + k2) as usize] += amp;
        }
    }
    let norm_in = (factorial(n1) * factorial(n2)).sqrt();
    out.iter()
        .enumerate()
        .map(|(m1, c)| {
            let m1 = m1 as u32;
            (
                m1 as u8,
                *c * (factorial(m1) * factorial(total - m1)).sqrt() / norm_in,
            )
        })
        .filter(|(_, c)| c.norm() >= PRUNE_TOLERANCE)
        .collect()
}
