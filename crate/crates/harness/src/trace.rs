//! Recorded inter-component traffic.
//!
//! Dump format, one line per wire message, in wire order:
//!
//! ```text
//! <seq> <from>-><to> <first line of the message>
//! ```
//!
//! `seq` is a cluster-wide counter taken when a proxy accepts a request and
//! again when it relays the reply. Request lines are the canonical header
//! (STARTVM shows its byte count, not the body). Replies show their first
//! line, with the entry count appended to list replies as `[n entries]`.

use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use taaroa_core::protocol::codec::render_request_header;
use taaroa_core::protocol::{
    render_reply, MmRequest, Payload, Reply, Request, RequestKind,
};

/// A traffic endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Client,
    Is,
    Sc,
    Rm,
    /// A Machine Manager, labelled by its physical machine id.
    Mm(u64),
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Client => f.write_str("TC"),
            Role::Is => f.write_str("IS"),
            Role::Sc => f.write_str("SC"),
            Role::Rm => f.write_str("RM"),
            Role::Mm(id) => write!(f, "MM{id}"),
        }
    }
}

/// One request and its reply as seen by a proxy.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub seq: u64,
    pub reply_seq: u64,
    pub from: Role,
    pub to: Role,
    /// The request, with any STARTVM body dropped.
    pub request: Request,
    pub header: String,
    pub reply: Reply,
    /// Reply bytes as produced by the server (or by a fault rule).
    pub raw_reply: Vec<u8>,
    pub at: Duration,
    /// State tag captured just before the request was forwarded.
    pub state_before: Option<String>,
    pub injected: bool,
}

impl Exchange {
    pub fn kind(&self) -> RequestKind {
        self.request.kind()
    }

    /// Whether `reply_seq` nests inside `outer`'s lifetime.
    pub fn within(&self, outer: &Exchange) -> bool {
        self.seq > outer.seq && self.reply_seq < outer.reply_seq
    }

    pub fn reply_id(&self) -> Option<u64> {
        self.reply.as_id()
    }
}

/// A single wire message, derived from an [`Exchange`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub seq: u64,
    pub from: Role,
    pub to: Role,
    pub kind: RequestKind,
    pub is_reply: bool,
    /// Whether this is an `OK` reply (or any request).
    pub ok: bool,
    pub line: String,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}->{} {}", self.seq, self.from, self.to, self.line)
    }
}

fn reply_line(reply: &Reply) -> String {
    let raw = render_reply(reply);
    let first = raw.split(|b| *b == b'\n').next().unwrap_or_default();
    let mut line = String::from_utf8_lossy(first).into_owned();
    if let Reply::List(l) = reply {
        line.push_str(&format!(" [{} entries]", l.len()));
    }
    line
}

impl Exchange {
    pub fn messages(&self) -> [Message; 2] {
        [
            Message {
                seq: self.seq,
                from: self.from,
                to: self.to,
                kind: self.kind(),
                is_reply: false,
                ok: true,
                line: self.header.clone(),
            },
            Message {
                seq: self.reply_seq,
                from: self.to,
                to: self.from,
                kind: self.kind(),
                is_reply: true,
                ok: self.reply.is_ok(),
                line: reply_line(&self.reply),
            },
        ]
    }
}

/// Shared recorder written by every proxy of a cluster.
#[derive(Clone)]
pub struct Trace {
    inner: Arc<Mutex<Recorder>>,
}

struct Recorder {
    start: Instant,
    next_seq: u64,
    done: Vec<Exchange>,
}

/// An exchange in flight.
pub(crate) struct Pending {
    pub seq: u64,
    pub at: Duration,
}

impl Default for Trace {
    fn default() -> Self {
        Self::new()
    }
}

fn strip_body(req: &Request) -> Request {
    match req {
        Request::Mm(MmRequest::StartVm { s_id, .. }) => Request::Mm(MmRequest::StartVm {
            s_id: *s_id,
            image: Vec::new(),
        }),
        other => other.clone(),
    }
}

impl Trace {
    pub fn new() -> Self {
        Self {
            inner: Arc::new(Mutex::new(Recorder {
                start: Instant::now(),
                next_seq: 0,
                done: Vec::new(),
            })),
        }
    }

    pub(crate) fn begin(&self) -> Pending {
        let mut r = self.inner.lock().unwrap();
        let seq = r.next_seq;
        r.next_seq += 1;
        Pending {
            seq,
            at: r.start.elapsed(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn finish(
        &self,
        p: Pending,
        from: Role,
        to: Role,
        request: &Request,
        reply: Reply,
        raw_reply: Vec<u8>,
        state_before: Option<String>,
        injected: bool,
    ) {
        let header = render_request_header(request);
        let request = strip_body(request);
        let mut r = self.inner.lock().unwrap();
        let reply_seq = r.next_seq;
        r.next_seq += 1;
        r.done.push(Exchange {
            seq: p.seq,
            reply_seq,
            from,
            to,
            request,
            header,
            reply,
            raw_reply,
            at: p.at,
            state_before,
            injected,
        });
    }

    /// Completed exchanges, ordered by request arrival.
    pub fn exchanges(&self) -> Vec<Exchange> {
        let mut v = self.inner.lock().unwrap().done.clone();
        v.sort_by_key(|e| e.seq);
        v
    }

    pub fn clear(&self) {
        self.inner.lock().unwrap().done.clear();
    }

    pub fn count(&self, from: Role, to: Role, kind: RequestKind) -> usize {
        self.exchanges()
            .iter()
            .filter(|e| e.from == from && e.to == to && e.kind() == kind)
            .count()
    }

    pub fn messages(&self) -> Vec<Message> {
        messages_of(&self.exchanges())
    }

    pub fn dump(&self) -> String {
        render_dump(&self.messages())
    }

    /// The exchanges belonging to the submission that produced `vm_id`.
    pub fn submission_of(&self, vm_id: u64) -> Option<Vec<Exchange>> {
        let all = self.exchanges();
        let root = all.iter().find(|e| {
            e.from == Role::Client
                && e.kind() == RequestKind::ScSubmitServ
                && e.reply_id() == Some(vm_id)
        })?;
        Some(submission_slice(&all, root, Some(vm_id)))
    }

    /// The exchanges of the first submission (successful or not) whose
    /// request was `SUBMITSERV s_id`, counted from the `nth` such request.
    pub fn submission_attempt(&self, s_id: u64, nth: usize) -> Option<Vec<Exchange>> {
        let all = self.exchanges();
        let root = all
            .iter()
            .filter(|e| {
                e.from == Role::Client && e.request == taaroa_core::protocol::ScRequest::SubmitServ { s_id }.into()
            })
            .nth(nth)?;
        let vm = root.reply_id();
        Some(submission_slice(&all, root, vm))
    }

    /// The exchanges belonging to the stop of `vm_id`.
    pub fn stop_of(&self, vm_id: u64) -> Option<Vec<Exchange>> {
        let all = self.exchanges();
        let root = all.iter().find(|e| {
            e.from == Role::Client
                && e.request == taaroa_core::protocol::ScRequest::StopServ { vm_id }.into()
        })?;
        Some(stop_slice(&all, root, vm_id))
    }
}

pub fn messages_of(exchanges: &[Exchange]) -> Vec<Message> {
    let mut m: Vec<Message> = exchanges.iter().flat_map(|e| e.messages()).collect();
    m.sort_by_key(|m| m.seq);
    m
}

pub fn render_dump(messages: &[Message]) -> String {
    messages.iter().map(|m| format!("{m}\n")).collect()
}

fn mentions_vm(req: &Request, vm_id: u64) -> bool {
    use taaroa_core::protocol::{IsRequest as I, RmRequest as R, ScRequest as S};
    match req {
        Request::Is(
            I::GetVm { vm_id: v }
            | I::GetVmMachMngr { vm_id: v }
            | I::GetVmServ { vm_id: v }
            | I::GetVmStatus { vm_id: v }
            | I::UnregVm { vm_id: v }
            | I::UpdateVmStatus { vm_id: v, .. },
        )
        | Request::Rm(R::StopVm { vm_id: v })
        | Request::Sc(S::StopServ { vm_id: v }) => *v == vm_id,
        _ => false,
    }
}

/// Picks out one submission from interleaved traffic: the SC's queries
/// immediately before its SUBMITVM, and the RM/MM exchanges nested inside
/// that SUBMITVM which belong to the same VM.
fn submission_slice(all: &[Exchange], root: &Exchange, vm_id: Option<u64>) -> Vec<Exchange> {
    let inside: Vec<&Exchange> = all.iter().filter(|e| e.within(root)).collect();
    let submit_vm = inside
        .iter()
        .filter(|e| e.from == Role::Sc && e.kind() == RequestKind::RmSubmitVm)
        .find(|e| vm_id.is_none() || e.reply_id() == vm_id);
    let Some(submit_vm) = submit_vm.copied() else {
        // nothing reached the RM; keep the scheduler's own traffic
        let mut out: Vec<Exchange> = inside
            .into_iter()
            .filter(|e| e.from == Role::Sc)
            .cloned()
            .collect();
        out.insert(0, root.clone());
        return out;
    };
    let mut out = vec![root.clone()];
    for kind in [RequestKind::ListServ, RequestKind::ListPhyMachStatus] {
        if let Some(q) = inside
            .iter()
            .filter(|e| e.from == Role::Sc && e.kind() == kind && e.reply_seq < submit_vm.seq)
            .max_by_key(|e| e.seq)
        {
            out.push((*q).clone());
        }
    }
    out.push(submit_vm.clone());
    let mm_of_submit: Option<Role> = inside
        .iter()
        .filter(|e| e.within(submit_vm) && e.kind() == RequestKind::MmStartVm)
        .find(|e| vm_id.is_none() || e.reply_id() == vm_id)
        .map(|e| e.to);
    for e in inside.iter().filter(|e| e.within(submit_vm)) {
        let keep = match e.kind() {
            RequestKind::GetPhyMach => e.from == Role::Rm,
            RequestKind::MmStartVm => Some(e.to) == mm_of_submit,
            RequestKind::RegVm => Some(e.from) == mm_of_submit,
            RequestKind::UpdateVmStatus => vm_id.is_some_and(|v| mentions_vm(&e.request, v)),
            _ => false,
        };
        if keep {
            out.push((*e).clone());
        }
    }
    out.sort_by_key(|e| e.seq);
    out
}

fn stop_slice(all: &[Exchange], root: &Exchange, vm_id: u64) -> Vec<Exchange> {
    let inside: Vec<&Exchange> = all.iter().filter(|e| e.within(root)).collect();
    let location = inside.iter().find_map(|e| match &e.reply {
        Reply::Ok(Payload::VmLocation(loc))
            if e.from == Role::Rm && mentions_vm(&e.request, vm_id) =>
        {
            Some((Role::Mm(loc.phy_id), loc.vm_local_id.clone()))
        }
        _ => None,
    });
    let mut out = vec![root.clone()];
    for e in inside {
        let keep = mentions_vm(&e.request, vm_id)
            || match (&e.request, &location) {
                (Request::Mm(MmRequest::StopVm { vm_local_id }), Some((mm, local))) => {
                    e.to == *mm && vm_local_id == local
                }
                _ => false,
            };
        if keep {
            out.push(e.clone());
        }
    }
    out.sort_by_key(|e| e.seq);
    out
}
