use std::fmt;

use serde::{Deserialize, Serialize};

use super::FockError;

/// The optical channel a mode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// Photon stored in the quantum memory.
    Signal,
    /// Telecom photon sent to the Bell-state measurement.
    Idler,
    /// Input qubit, the part that is indistinguishable from the idler.
    Input,
    /// Input qubit, the part that is distinguishable from the idler.
    Aux,
}

/// Time bin of a time-bin qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bin {
    Early,
    Late,
}

impl Bin {
    pub const BOTH: [Bin; 2] = [Bin::Early, Bin::Late];
}

/// Role of a mode inside a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeLabel {
    /// Time-bin mode of one of the optical channels.
    TimeBin(Channel, Bin),
    /// Helper mode: vacuum ports, analyzer and detector outputs.
    Ancilla(u8),
}

impl ModeLabel {
    pub const SIGNAL_EARLY: ModeLabel = ModeLabel::TimeBin(Channel::Signal, Bin::Early);
    pub const SIGNAL_LATE: ModeLabel = ModeLabel::TimeBin(Channel::Signal, Bin::Late);
    pub const IDLER_EARLY: ModeLabel = ModeLabel::TimeBin(Channel::Idler, Bin::Early);
    pub const IDLER_LATE: ModeLabel = ModeLabel::TimeBin(Channel::Idler, Bin::Late);
    pub const INPUT_EARLY: ModeLabel = ModeLabel::TimeBin(Channel::Input, Bin::Early);
    pub const INPUT_LATE: ModeLabel = ModeLabel::TimeBin(Channel::Input, Bin::Late);
    pub const AUX_EARLY: ModeLabel = ModeLabel::TimeBin(Channel::Aux, Bin::Early);
    pub const AUX_LATE: ModeLabel = ModeLabel::TimeBin(Channel::Aux, Bin::Late);

    pub fn bin(channel: Channel, bin: Bin) -> Self {
        ModeLabel::TimeBin(channel, bin)
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::TimeBin(c, b) => write!(f, "{c:?}/{b:?}"),
            ModeLabel::Ancilla(i) => write!(f, "ancilla{i}"),
        }
    }
}

/// A mode together with its position in a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeId {
    pub label: ModeLabel,
    pub index: usize,
}

/// Largest register the packed basis encoding supports.
pub const MAX_MODES: usize = 16;

/// Ordered list of distinct modes.
///
/// Every time-bin channel present in a register carries both its early and
/// its late mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Register {
    labels: Vec<ModeLabel>,
}

impl Register {
    pub fn new(labels: Vec<ModeLabel>) -> Result<Self, FockError> {
        if labels.is_empty() {
            return Err(FockError::EmptyRegister);
        }
        if labels.len() > MAX_MODES {
            return Err(FockError::RegisterTooLarge(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(FockError::DuplicateMode(*l));
            }
        }
        for l in &labels {
            if let ModeLabel::TimeBin(c, b) = *l {
                let partner = match b {
                    Bin::Early => ModeLabel::TimeBin(c, Bin::Late),
                    Bin::Late => ModeLabel::TimeBin(c, Bin::Early),
                };
                if !labels.contains(&partner) {
                    return Err(FockError::UnpairedMode(*l));
                }
            }
        }
        Ok(Register { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn position(&self, label: ModeLabel) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn mode(&self, label: ModeLabel) -> Result<ModeId, FockError> {
        self.position(label)
            .map(|index| ModeId { label, index })
            .ok_or(FockError::UnknownMode(label))
    }

    pub fn contains(&self, label: ModeLabel) -> bool {
        self.position(label).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = ModeId> + '_ {
        self.labels
            .iter()
            .enumerate()
            .map(|(index, &label)| ModeId { label, index })
    }

    pub(crate) fn concat(&self, other: &Register) -> Result<Register, FockError> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Register::new(labels)
    }

    /// Register with `label` appended, without the pairing check.
    pub(crate) fn push_unchecked(&self, label: ModeLabel) -> Result<Register, FockError> {
        if self.contains(label) {
            return Err(FockError::DuplicateMode(label));
        }
        if self.labels.len() >= MAX_MODES {
            return Err(FockError::RegisterTooLarge(self.labels.len() + 1));
        }
        let mut labels = self.labels.clone();
        labels.push(label);
        Ok(Register { labels })
    }

    pub(crate) fn subset(&self, keep: &[ModeLabel]) -> Register {
        Register {
            labels: self
                .labels
                .iter()
                .copied()
                .filter(|l| keep.contains(l))
                .collect(),
        }
    }
}
