//! The Scheduler: a FCFS submission queue served by one dispatcher.

use std::sync::mpsc::{self, Receiver, SyncSender};
use std::sync::{Arc, Mutex};
use std::thread;

use tracing::{debug, info};

use crate::net::{call_upstream, join_host_port, Service};
use crate::protocol::{
    Component, ErrorCode, IsRequest, Listing, Payload, PhyMachStatusEntry, Reply, Request,
    RmRequest, ScRequest, PROTOCOL_VERSION,
};

/// A queued SUBMITSERV.
pub struct SubmissionRequest {
    pub seq: u64,
    pub service_id: u64,
    reply: SyncSender<Reply>,
}

struct Queue {
    next_seq: u64,
    tx: mpsc::Sender<SubmissionRequest>,
    journal: Option<Vec<(u64, u64)>>,
}

pub struct Scheduler {
    is_addr: String,
    queue: Mutex<Queue>,
}

/// Machines that qualify, lowest id first: every availability figure must
/// be strictly positive.
pub fn candidates(entries: &[PhyMachStatusEntry]) -> Vec<u64> {
    let mut ids: Vec<u64> = entries
        .iter()
        .filter(|e| e.avail_cpu > 0.0 && e.avail_ram > 0.0 && e.avail_disk > 0.0)
        .map(|e| e.phy_id)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// The first available machine, if any.
pub fn select_machine(entries: &[PhyMachStatusEntry]) -> Option<u64> {
    candidates(entries).first().copied()
}

impl Scheduler {
    pub fn new(is_addr: impl Into<String>) -> Arc<Self> {
        Self::build(is_addr.into(), false)
    }

    /// A scheduler that also records every submission's `(seq, s_id)` in
    /// arrival order.
    pub fn with_journal(is_addr: impl Into<String>) -> Arc<Self> {
        Self::build(is_addr.into(), true)
    }

    fn build(is_addr: String, journal: bool) -> Arc<Self> {
        let (tx, rx) = mpsc::channel();
        let sched = Arc::new(Self {
            is_addr: is_addr.clone(),
            queue: Mutex::new(Queue {
                next_seq: 0,
                tx,
                journal: journal.then(Vec::new),
            }),
        });
        thread::Builder::new()
            .name("SC-dispatch".into())
            .spawn(move || dispatch(&is_addr, rx))
            .expect("spawn dispatcher");
        sched
    }

    pub fn arrivals(&self) -> Vec<(u64, u64)> {
        self.queue
            .lock()
            .unwrap()
            .journal
            .clone()
            .unwrap_or_default()
    }

    fn submit(&self, s_id: u64) -> Reply {
        let (reply_tx, reply_rx) = mpsc::sync_channel(1);
        {
            let mut q = self.queue.lock().unwrap();
            let seq = q.next_seq;
            q.next_seq += 1;
            if let Some(j) = &mut q.journal {
                j.push((seq, s_id));
            }
            let job = SubmissionRequest {
                seq,
                service_id: s_id,
                reply: reply_tx,
            };
            if q.tx.send(job).is_err() {
                return Reply::Err(ErrorCode::INTERNAL_ERROR);
            }
        }
        reply_rx
            .recv()
            .unwrap_or(Reply::Err(ErrorCode::INTERNAL_ERROR))
    }

    fn stop(&self, vm_id: u64) -> Reply {
        let service = match call_upstream(&self.is_addr, IsRequest::GetVmServ { vm_id }) {
            Ok(Reply::Ok(Payload::Service(s))) => s,
            Ok(Reply::Err(code)) => return Reply::Err(code),
            Ok(_) | Err(_) => return Reply::Err(ErrorCode::UPSTREAM_FAILURE),
        };
        let rm = join_host_port(&service.rm_ip, service.rm_port);
        match call_upstream(&rm, RmRequest::StopVm { vm_id }) {
            Ok(reply) => reply,
            Err(code) => Reply::Err(code),
        }
    }
}

fn dispatch(is_addr: &str, rx: Receiver<SubmissionRequest>) {
    for job in rx {
        let reply = serve_submission(is_addr, job.service_id);
        debug!(seq = job.seq, s_id = job.service_id, ok = reply.is_ok(), "submission served");
        let _ = job.reply.send(reply);
    }
    info!("dispatcher stopped");
}

fn serve_submission(is_addr: &str, s_id: u64) -> Reply {
    match try_submission(is_addr, s_id) {
        Ok(r) => r,
        Err(code) => Reply::Err(code),
    }
}

fn try_submission(is_addr: &str, s_id: u64) -> Result<Reply, ErrorCode> {
    let Reply::List(Listing::Serv(services)) = call_upstream(is_addr, IsRequest::ListServ)? else {
        return Err(ErrorCode::UPSTREAM_FAILURE);
    };
    let service = services
        .into_iter()
        .find(|s| s.s_id == s_id)
        .ok_or(ErrorCode::UNKNOWN_SERVICE)?;
    let Reply::List(Listing::PhyMachStatus(machines)) =
        call_upstream(is_addr, IsRequest::ListPhyMachStatus)?
    else {
        return Err(ErrorCode::UPSTREAM_FAILURE);
    };
    let rm = join_host_port(&service.rm_ip, service.rm_port);
    for phy_id in candidates(&machines) {
        match call_upstream(&rm, RmRequest::SubmitVm { s_id, phy_id })? {
            Reply::Err(ErrorCode::NO_CAPACITY) => {
                debug!(phy_id, "machine refused, trying the next one");
                continue;
            }
            reply => return Ok(reply),
        }
    }
    Err(ErrorCode::NO_CAPACITY)
}

impl Service for Scheduler {
    fn component(&self) -> Component {
        Component::Scheduler
    }

    fn handle(&self, req: Request) -> Reply {
        match req {
            Request::Sc(ScRequest::SrvProtoVer) => {
                Reply::Ok(Payload::Version(PROTOCOL_VERSION.to_owned()))
            }
            Request::Sc(ScRequest::SubmitServ { s_id }) => self.submit(s_id),
            Request::Sc(ScRequest::StopServ { vm_id }) => self.stop(vm_id),
            _ => Reply::Err(ErrorCode::INTERNAL_ERROR),
        }
    }
}
