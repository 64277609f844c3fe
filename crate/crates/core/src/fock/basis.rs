use std::fmt;

/// Photon occupations of every mode in a register, packed four bits per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FockBasisState(u64);

/// Largest occupation a single mode can hold in the packed encoding.
pub const MAX_OCCUPATION: u8 = 15;

impl FockBasisState {
    pub const VACUUM: FockBasisState = FockBasisState(0);

    pub fn from_occupations(occupations: &[u8]) -> Self {
        assert!(
            occupations.len() <= 16,
            "too many modes for packed basis state"
        );
        let mut packed = 0u64;
        for (i, &n) in occupations.iter().enumerate() {
            assert!(
                n <= MAX_OCCUPATION,
                "occupation {n} exceeds {MAX_OCCUPATION}"
            );
            packed |= (n as u64) << (4 * i);
        }
        FockBasisState(packed)
    }

    #[inline]
    pub fn get(self, mode: usize) -> u8 {
        ((self.0 >> (4 * mode)) & 0xF) as u8
    }

    #[inline]
    pub fn with(self, mode: usize, n: u8) -> Self {
        debug_assert!(n <= MAX_OCCUPATION);
        let shift = 4 * mode;
        FockBasisState((self.0 & !(0xF << shift)) | ((n as u64) << shift))
    }

    pub fn total(self) -> u32 {
        let mut rest = self.0;
        let mut sum = 0u32;
        while rest != 0 {
            sum += (rest & 0xF) as u32;
            rest >>= 4;
        }
        sum
    }

    pub fn occupations(self, modes: usize) -> Vec<u8> {
        (0..modes).map(|m| self.get(m)).collect()
    }

    /// Keeps the listed mode positions, repacked in the given order.
    pub(crate) fn select(self, positions: &[usize]) -> Self {
        let mut packed = 0u64;
        for (i, &p) in positions.iter().enumerate() {
            packed |= (self.get(p) as u64) << (4 * i);
        }
        FockBasisState(packed)
    }

    /// Concatenates `other` after the first `len` modes of `self`.
    pub(crate) fn append(self, len: usize, other: FockBasisState) -> Self {
        FockBasisState(self.0 | (other.0 << (4 * len)))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub(crate) fn from_raw(raw: u64) -> Self {
        FockBasisState(raw)
    }
}

impl fmt::Display for FockBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rest = self.0;
        let mut digits = Vec::new();
        loop {
            digits.push((rest & 0xF) as u8);
            rest >>= 4;
            if rest == 0 {
                break;
            }
        }
        write!(f, "|")?;
        for (i, d) in digits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "⟩")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_roundtrip() {
        let s = FockBasisState::from_occupations(&[1, 0, 2, 15, 3]);
        assert_eq!(s.occupations(5), vec![1, 0, 2, 15, 3]);
        assert_eq!(s.total(), 21);
        assert_eq!(s.with(1, 4).get(1), 4);
        assert_eq!(s.select(&[2, 0]).occupations(2), vec![2, 1]);
        let t = FockBasisState::from_occupations(&[7]);
        assert_eq!(s.append(5, t).get(5), 7);
    }
}
