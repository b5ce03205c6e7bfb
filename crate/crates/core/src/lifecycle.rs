//! Execution-state machine of a virtual machine.

use std::fmt;

use crate::protocol::ExecStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VmEvent {
    SelectForExecution,
    StageInComplete,
    Suspend,
    Resume,
    Shutdown,
    Cancel,
    Abort,
    Fail,
}

impl VmEvent {
    pub const ALL: [VmEvent; 8] = [
        VmEvent::SelectForExecution,
        VmEvent::StageInComplete,
        VmEvent::Suspend,
        VmEvent::Resume,
        VmEvent::Shutdown,
        VmEvent::Cancel,
        VmEvent::Abort,
        VmEvent::Fail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VmEvent::SelectForExecution => "select_for_execution",
            VmEvent::StageInComplete => "stage_in_complete",
            VmEvent::Suspend => "suspend",
            VmEvent::Resume => "resume",
            VmEvent::Shutdown => "shutdown",
            VmEvent::Cancel => "cancel",
            VmEvent::Abort => "abort",
            VmEvent::Fail => "fail",
        }
    }
}

impl fmt::Display for VmEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no {event} transition from {from}")]
pub struct InvalidTransition {
    pub from: ExecStatus,
    pub event: VmEvent,
}

/// States a VM passes through before it ends.
pub fn is_temporary(s: ExecStatus) -> bool {
    matches!(
        s,
        ExecStatus::Unstarted | ExecStatus::StagingIn | ExecStatus::Running | ExecStatus::Suspended
    )
}

pub fn is_final(s: ExecStatus) -> bool {
    s.is_final()
}

/// The successor of `current` under `event`, if the pair is in the relation.
pub fn successor(current: ExecStatus, event: VmEvent) -> Option<ExecStatus> {
    use ExecStatus as S;
    use VmEvent as E;
    match (current, event) {
        (S::Unstarted, E::SelectForExecution) => Some(S::StagingIn),
        (S::StagingIn, E::StageInComplete) => Some(S::Running),
        (S::Running, E::Suspend) => Some(S::Suspended),
        (S::Suspended, E::Resume) => Some(S::Running),
        (S::Running, E::Shutdown) => Some(S::Stopped),
        (s, E::Cancel) if is_temporary(s) => Some(S::Cancelled),
        (s, E::Abort) if is_temporary(s) => Some(S::Aborted),
        (s, E::Fail) if is_temporary(s) => Some(S::Failed),
        _ => None,
    }
}

pub fn apply_event(current: ExecStatus, event: VmEvent) -> Result<ExecStatus, InvalidTransition> {
    successor(current, event).ok_or(InvalidTransition {
        from: current,
        event,
    })
}

/// Whether a status update from `from` to `to` is permitted: either no
/// change, or some event leads there.
pub fn is_legal_update(from: ExecStatus, to: ExecStatus) -> bool {
    from == to || VmEvent::ALL.iter().any(|e| successor(from, *e) == Some(to))
}

/// Every `(from, event, to)` triple of the relation.
pub fn relation() -> Vec<(ExecStatus, VmEvent, ExecStatus)> {
    let mut out = Vec::new();
    for s in ExecStatus::ALL {
        for e in VmEvent::ALL {
            if let Some(t) = successor(s, e) {
                out.push((s, e, t));
            }
        }
    }
    out
}
