use std::f64::consts::FRAC_1_SQRT_2;

use crate::devices::{phi_plus, signal_qubit, SIGNAL_MODES};
use crate::fock::{Complex, DensityOperator, FockError, ModeLabel, PureState, Register};

/// Bell states of the idler and input-qubit photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];
}

fn idler_input_register() -> Register {
    Register::new(vec![
        ModeLabel::IDLER_EARLY,
        ModeLabel::IDLER_LATE,
        ModeLabel::INPUT_EARLY,
        ModeLabel::INPUT_LATE,
    ])
    .expect("static register")
}

/// `|Φ±⟩ = (|e_i e_q⟩ ± |l_i l_q⟩)/√2`, `|Ψ±⟩ = (|e_i l_q⟩ ± |l_i e_q⟩)/√2`.
pub fn bell_state(which: BellState) -> PureState {
    let h = Complex::new(FRAC_1_SQRT_2, 0.0);
    let (first, second, sign): (&[u8], &[u8], f64) = match which {
        BellState::PhiPlus => (&[1, 0, 1, 0], &[0, 1, 0, 1], 1.0),
        BellState::PhiMinus => (&[1, 0, 1, 0], &[0, 1, 0, 1], -1.0),
        BellState::PsiPlus => (&[1, 0, 0, 1], &[0, 1, 1, 0], 1.0),
        BellState::PsiMinus => (&[1, 0, 0, 1], &[0, 1, 1, 0], -1.0),
    };
    PureState::new(idler_input_register(), &[(first, h), (second, h * sign)]).expect("static state")
}

/// `e^{iφ}β|e⟩ + α|l⟩`: the memory state heralded by `Ψ⁺`.
pub fn teleported_state(alpha: f64, beta: f64, phi: f64) -> PureState {
    signal_qubit(Complex::from_polar(beta, phi), Complex::new(alpha, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellBranch {
    pub bell: BellState,
    pub probability: f64,
    /// Normalized signal state for this branch.
    pub signal: DensityOperator,
}

/// Projects `|Φ⁺⟩_{s,i} ⊗ (α|e⟩ + e^{iφ}β|l⟩)_q` onto each Bell state of `(i, q)`.
pub fn bell_decomposition(alpha: f64, beta: f64, phi: f64) -> Result<Vec<BellBranch>, FockError> {
    let q_reg = Register::new(vec![ModeLabel::INPUT_EARLY, ModeLabel::INPUT_LATE])?;
    let q = PureState::single_photon(
        q_reg,
        &[
            (ModeLabel::INPUT_EARLY, Complex::new(alpha, 0.0)),
            (ModeLabel::INPUT_LATE, Complex::from_polar(beta, phi)),
        ],
    )?;
    let joint =
        DensityOperator::from_pure(&phi_plus(), 1)?.tensor(&DensityOperator::from_pure(&q, 1)?)?;
    BellState::ALL
        .iter()
        .map(|&bell| {
            let branch = joint
                .project_pure(&bell_state(bell))?
                .partial_trace(&SIGNAL_MODES)?;
            Ok(BellBranch {
                bell,
                probability: branch.trace(),
                signal: branch.normalized()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_states_are_orthonormal() {
        for a in BellState::ALL {
            for b in BellState::ALL {
                let ip = bell_state(a).inner(&bell_state(b)).unwrap();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip.re - want).abs() < 1e-12 && ip.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psi_plus_branch_of_plus_state() {
        let h = FRAC_1_SQRT_2;
        let branches = bell_decomposition(h, h, 0.0).unwrap();
        let psi_plus = branches
            .iter()
            .find(|b| b.bell == BellState::PsiPlus)
            .unwrap();
        assert!((psi_plus.probability - 0.25).abs() < 1e-12);
        let f = psi_plus
            .signal
            .fidelity_to_pure(&teleported_state(h, h, 0.0))
            .unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }
}
