//! Two-station teleportation protocol: BSM, heralding, feed-forward and the
//! multiplexed discrete-event campaign.

mod attempt;
mod bell;
mod bsm;
mod campaign;
mod timing;

pub use attempt::{
    apply_feed_forward, run_attempt, AttemptModel, AttemptSample, BsmSetup, FeedForwardStatus,
    MemorySlot,
};
pub use bell::{bell_decomposition, bell_state, teleported_state, BellBranch, BellState};
pub use bsm::{classify_bsm, filter_dead_time, pattern_clicks, BellOutcome, Click, Detector};
pub use campaign::{
    collect_campaign, run_campaign, CampaignSummary, Event, EventKind, HeraldMessage, TrialRecord,
    BLOCK_ATTEMPTS, WORKERS_ENV,
};
pub use timing::{
    max_multiplexed_rate, max_single_mode_rate, memory_occupancy, ns_to_ps, us_to_ps, Occupancy,
    TimingBudget, TimingParams,
};

use crate::devices::DeviceError;
use crate::fock::FockError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("infeasible timing: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Invalid(String),
}
