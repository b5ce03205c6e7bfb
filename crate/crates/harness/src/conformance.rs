//! Order-only checks of recorded workflows against the expected message
//! sequences.

use std::fmt;

use taaroa_core::protocol::RequestKind;

use crate::trace::{messages_of, Exchange, Message, Role};

/// An expected wire message: `from -> to`, request or reply of `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub from: RoleClass,
    pub to: RoleClass,
    pub kind: RequestKind,
    pub reply: bool,
}

/// Roles as the pattern sees them: any Machine Manager matches `Mm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleClass {
    Client,
    Is,
    Sc,
    Rm,
    Mm,
}

impl RoleClass {
    fn matches(self, r: Role) -> bool {
        matches!(
            (self, r),
            (RoleClass::Client, Role::Client)
                | (RoleClass::Is, Role::Is)
                | (RoleClass::Sc, Role::Sc)
                | (RoleClass::Rm, Role::Rm)
                | (RoleClass::Mm, Role::Mm(_))
        )
    }
}

impl fmt::Display for RoleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleClass::Client => "TC",
            RoleClass::Is => "IS",
            RoleClass::Sc => "SC",
            RoleClass::Rm => "RM",
            RoleClass::Mm => "MM",
        })
    }
}

impl Step {
    const fn req(from: RoleClass, to: RoleClass, kind: RequestKind) -> Self {
        Self {
            from,
            to,
            kind,
            reply: false,
        }
    }

    const fn ok(from: RoleClass, to: RoleClass, kind: RequestKind) -> Self {
        Self {
            from,
            to,
            kind,
            reply: true,
        }
    }

    fn matches(&self, m: &Message) -> bool {
        self.from.matches(m.from)
            && self.to.matches(m.to)
            && self.kind == m.kind
            && self.reply == m.is_reply
            && m.ok
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = if self.reply { "OK" } else { self.kind.keyword() };
        write!(f, "{}->{} {what}", self.from, self.to)?;
        if self.reply {
            write!(f, " (reply to {})", self.kind.keyword())?;
        }
        Ok(())
    }
}

use RequestKind as K;
use RoleClass::{Client as TC, Is as IS, Mm as MM, Rm as RM, Sc as SC};

pub const SUBMISSION: [Step; 8] = [
    Step::req(TC, SC, K::ScSubmitServ),
    Step::req(SC, IS, K::ListPhyMachStatus),
    Step::req(SC, RM, K::RmSubmitVm),
    Step::req(RM, IS, K::GetPhyMach),
    Step::req(RM, MM, K::MmStartVm),
    Step::req(MM, IS, K::RegVm),
    Step::req(RM, IS, K::UpdateVmStatus),
    Step::ok(SC, TC, K::ScSubmitServ),
];

pub const STOP: [Step; 7] = [
    Step::req(TC, SC, K::ScStopServ),
    Step::req(SC, RM, K::RmStopVm),
    Step::req(RM, IS, K::GetVmMachMngr),
    Step::req(RM, MM, K::MmStopVm),
    Step::req(MM, IS, K::UnregVm),
    Step::req(RM, IS, K::UpdateVmStatus),
    Step::ok(SC, TC, K::ScStopServ),
];

/// Expected steps against observed messages.
#[derive(Debug, Clone)]
pub struct ConformanceDiff {
    pub workflow: &'static str,
    /// Per expected step, the matched message if any.
    pub steps: Vec<(Step, Option<Message>)>,
    pub observed: Vec<Message>,
}

impl ConformanceDiff {
    pub fn missing(&self) -> Vec<Step> {
        self.steps
            .iter()
            .filter(|(_, m)| m.is_none())
            .map(|(s, _)| *s)
            .collect()
    }
}

impl fmt::Display for ConformanceDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} workflow does not conform", self.workflow)?;
        writeln!(f, "expected:")?;
        for (step, found) in &self.steps {
            match found {
                Some(m) => writeln!(f, "  + {step}  @ {m}")?,
                None => writeln!(f, "  - {step}  MISSING")?,
            }
        }
        writeln!(f, "observed:")?;
        for m in &self.observed {
            writeln!(f, "    {m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConformanceDiff {}

/// Greedy subsequence match of `pattern` over `messages`, in wire order.
pub fn check(
    workflow: &'static str,
    pattern: &[Step],
    messages: &[Message],
) -> Result<(), ConformanceDiff> {
    let mut pos = 0;
    let mut steps = Vec::with_capacity(pattern.len());
    let mut all_found = true;
    for step in pattern {
        match messages[pos..].iter().position(|m| step.matches(m)) {
            Some(i) => {
                steps.push((*step, Some(messages[pos + i].clone())));
                pos += i + 1;
            }
            None => {
                all_found = false;
                steps.push((*step, None));
            }
        }
    }
    if all_found {
        Ok(())
    } else {
        Err(ConformanceDiff {
            workflow,
            steps,
            observed: messages.to_vec(),
        })
    }
}

pub fn assert_submission_conformance(trace: &[Exchange]) -> Result<(), ConformanceDiff> {
    check("submission", &SUBMISSION, &messages_of(trace))
}

pub fn assert_stop_conformance(trace: &[Exchange]) -> Result<(), ConformanceDiff> {
    check("stop", &STOP, &messages_of(trace))
}
