//! Exact state engine over a truncated multimode Fock space.
//!
//! States are sparse density operators in the photon-number basis. Sources
//! (coherent states, two-mode squeezed vacuum) are truncated at a per-mode
//! cutoff when they are injected. Passive optics conserves photon number and
//! is applied exactly, so beam splitters, phase shifts and loss never
//! truncate and preserve the trace to rounding error.

mod basis;
mod detector;
mod mode;
mod pure;
mod state;

pub use basis::{FockBasisState, MAX_OCCUPATION};
pub use detector::{click_branches, DetectorSpec, ThresholdDetectorParams};
pub use mode::{Bin, Channel, ModeId, ModeLabel, Register, MAX_MODES};
pub use pure::PureState;
pub use state::{DensityOperator, DEFAULT_TRUNCATION_TOLERANCE, PRUNE_TOLERANCE};

pub type Complex = num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FockError {
    #[error("register is empty")]
    EmptyRegister,
    #[error("register of {0} modes exceeds the supported maximum")]
    RegisterTooLarge(usize),
    #[error("mode {0} appears twice in the register")]
    DuplicateMode(ModeLabel),
    #[error("mode {0} has no early/late partner in the register")]
    UnpairedMode(ModeLabel),
    #[error("mode {0} is not part of the register")]
    UnknownMode(ModeLabel),
    #[error("cutoff must be at least 1, got {0}")]
    InvalidCutoff(u8),
    #[error("mode {0} is not in vacuum")]
    ModeNotVacuum(ModeLabel),
    #[error("truncation at cutoff {cutoff} discards {discarded:.3e} of the probability (tolerance {tolerance:.1e})")]
    TruncationUnsound {
        cutoff: u8,
        discarded: f64,
        tolerance: f64,
    },
    #[error("state could hold more than {max} photons in one mode")]
    Capacity { max: u8 },
    #[error("beam splitter and pair source need two distinct modes, got {0} twice")]
    SameMode(ModeLabel),
    #[error("parameter {name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("state has zero trace")]
    ZeroTrace,
    #[error("list of modes to keep is empty")]
    EmptyKeep,
    #[error("target state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("registers do not match")]
    RegisterMismatch,
    #[error("dense dimension {0} exceeds limit {1}")]
    TooLargeForDense(usize, usize),
    #[error("detector mode {0} must be traced out, not kept")]
    DetectorModeKept(ModeLabel),
    #[error("at most 8 detectors are supported, got {0}")]
    TooManyDetectors(usize),
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<(), FockError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(FockError::OutOfRange {
            name,
            value,
            min: 0.0,
            max: 1.0,
        })
    }
}
