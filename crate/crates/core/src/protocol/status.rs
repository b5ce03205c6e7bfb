use std::fmt;

use super::ProtocolError;

/// Execution status of a virtual machine, carried on the wire as a single
/// digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExecStatus {
    Unknown,
    Unstarted,
    Ready,
    StagingIn,
    Running,
    Suspended,
    Stopped,
    Cancelled,
    Failed,
    Aborted,
}

impl ExecStatus {
    pub const ALL: [ExecStatus; 10] = [
        ExecStatus::Unknown,
        ExecStatus::Unstarted,
        ExecStatus::Ready,
        ExecStatus::StagingIn,
        ExecStatus::Running,
        ExecStatus::Suspended,
        ExecStatus::Stopped,
        ExecStatus::Cancelled,
        ExecStatus::Failed,
        ExecStatus::Aborted,
    ];

    pub fn code(self) -> u8 {
        match self {
            ExecStatus::Unknown => 0,
            ExecStatus::Unstarted => 1,
            ExecStatus::Ready => 2,
            ExecStatus::StagingIn => 3,
            ExecStatus::Running => 4,
            ExecStatus::Suspended => 5,
            ExecStatus::Stopped => 6,
            ExecStatus::Cancelled => 7,
            ExecStatus::Failed => 8,
            ExecStatus::Aborted => 9,
        }
    }

    pub fn from_code(code: u64) -> Result<Self, ProtocolError> {
        Ok(match code {
            0 => ExecStatus::Unknown,
            1 => ExecStatus::Unstarted,
            2 => ExecStatus::Ready,
            3 => ExecStatus::StagingIn,
            4 => ExecStatus::Running,
            5 => ExecStatus::Suspended,
            6 => ExecStatus::Stopped,
            7 => ExecStatus::Cancelled,
            8 => ExecStatus::Failed,
            9 => ExecStatus::Aborted,
            other => return Err(ProtocolError::UnknownStatusCode(other)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ExecStatus::Unknown => "UNKNOWN",
            ExecStatus::Unstarted => "UNSTARTED",
            ExecStatus::Ready => "READY",
            ExecStatus::StagingIn => "STAGING_IN",
            ExecStatus::Running => "RUNNING",
            ExecStatus::Suspended => "SUSPENDED",
            ExecStatus::Stopped => "STOPPED",
            ExecStatus::Cancelled => "CANCELLED",
            ExecStatus::Failed => "FAILED",
            ExecStatus::Aborted => "ABORTED",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Final states are absorbing: a VM never leaves them.
    pub fn is_final(self) -> bool {
        matches!(
            self,
            ExecStatus::Stopped | ExecStatus::Cancelled | ExecStatus::Failed | ExecStatus::Aborted
        )
    }
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Wire form of `code`.
pub fn exec_status_of(code: u64) -> Result<ExecStatus, ProtocolError> {
    ExecStatus::from_code(code)
}
