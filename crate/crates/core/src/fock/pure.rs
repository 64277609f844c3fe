use super::{Complex, FockBasisState, FockError, ModeLabel, Register};

/// A ket given as sparse amplitudes over the occupation basis of a register.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    register: Register,
    amplitudes: Vec<(FockBasisState, Complex)>,
}

impl PureState {
    pub fn new(register: Register, terms: &[(&[u8], Complex)]) -> Result<Self, FockError> {
        let mut amplitudes: Vec<(FockBasisState, Complex)> = Vec::with_capacity(terms.len());
        for (occ, amp) in terms {
            if occ.len() != register.len() {
                return Err(FockError::RegisterMismatch);
            }
            let b = FockBasisState::from_occupations(occ);
            match amplitudes.iter_mut().find(|(s, _)| *s == b) {
                Some((_, a)) => *a += *amp,
                None => amplitudes.push((b, *amp)),
            }
        }
        amplitudes.sort_by_key(|(b, _)| *b);
        Ok(PureState {
            register,
            amplitudes,
        })
    }

    /// Single photon in superposition over time-bin modes: `Σ c_k |1⟩_{mode_k}`.
    pub fn single_photon(
        register: Register,
        terms: &[(ModeLabel, Complex)],
    ) -> Result<Self, FockError> {
        let n = register.len();
        let mut occs = Vec::with_capacity(terms.len());
        for (label, amp) in terms {
            let idx = register.mode(*label)?.index;
            let mut occ = vec![0u8; n];
            occ[idx] = 1;
            occs.push((occ, *amp));
        }
        let refs: Vec<(&[u8], Complex)> = occs.iter().map(|(o, a)| (o.as_slice(), *a)).collect();
        PureState::new(register, &refs)
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn amplitudes(&self) -> &[(FockBasisState, Complex)] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self, FockError> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(FockError::ZeroTrace);
        }
        Ok(PureState {
            register: self.register.clone(),
            amplitudes: self.amplitudes.iter().map(|(b, a)| (*b, *a / n)).collect(),
        })
    }

    pub fn amplitude(&self, basis: FockBasisState) -> Complex {
        self.amplitudes
            .iter()
            .find(|(b, _)| *b == basis)
            .map(|(_, a)| *a)
            .unwrap_or_default()
    }

    /// `⟨self|other⟩`; registers must match.
    pub fn inner(&self, other: &PureState) -> Result<Complex, FockError> {
        if self.register != other.register {
            return Err(FockError::RegisterMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .map(|(b, a)| a.conj() * other.amplitude(*b))
            .sum())
    }
}
