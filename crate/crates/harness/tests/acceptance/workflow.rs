//! End-to-end criteria run against a booted cluster.

use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use taaroa_core::net::{bind, serve, Connection, Service};
use taaroa_core::protocol::{
    render_request, ExecStatus, IsRequest, Payload, Reply, Request, RequestKind, RmRequest,
};
use taaroa_core::registry::InformationService;
use taaroa_harness::{
    assert_stop_conformance, assert_submission_conformance, Cluster, ClusterSpec,
    MachineFixture, Role,
};

use crate::registry::TOLERANCE;

pub const WORKFLOW_BUDGET: Duration = Duration::from_secs(60);

fn boot(spec: ClusterSpec) -> Result<Cluster, String> {
    Cluster::boot(spec).map_err(|e| format!("boot: {e}"))
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("svc{i:02}")).collect()
}

fn spec(machines: Vec<MachineFixture>, services: &[String]) -> ClusterSpec {
    let refs: Vec<&str> = services.iter().map(String::as_str).collect();
    let mut s = ClusterSpec::new(0, &refs);
    s.machines = machines;
    s
}

fn vm_id(r: &Reply) -> Result<u64, String> {
    r.as_id().ok_or_else(|| format!("expected an id, got {r:?}"))
}

/// Submits every `s_id` from its own thread, released together.
fn submit_all(cluster: &Cluster, s_ids: &[u64]) -> Result<Vec<u64>, String> {
    let barrier = Arc::new(Barrier::new(s_ids.len()));
    let addr = cluster.sc_addr();
    let handles: Vec<_> = s_ids
        .iter()
        .map(|&s_id| {
            let barrier = barrier.clone();
            let addr = addr.clone();
            thread::spawn(move || {
                barrier.wait();
                taaroa_core::net::call(&addr, taaroa_core::protocol::ScRequest::SubmitServ { s_id })
            })
        })
        .collect();
    handles
        .into_iter()
        .map(|h| match h.join() {
            Ok(Ok(r)) => vm_id(&r),
            Ok(Err(e)) => Err(format!("submit failed: {e}")),
            Err(_) => Err("submit thread panicked".into()),
        })
        .collect()
}

/// Returns runs completed and submissions per run.
pub fn fcfs(runs: usize, submissions: usize) -> Result<(usize, usize), String> {
    let services = names(submissions);
    for run in 0..runs {
        let cluster = boot(spec(
            vec![MachineFixture {
                n_cpu: 64,
                max_vm: Some(64),
                ..Default::default()
            }],
            &services,
        ))?;
        let s_ids = cluster.service_ids();
        submit_all(&cluster, &s_ids)?;
        let arrived: Vec<u64> = cluster.sc.arrivals().into_iter().map(|(_, s)| s).collect();
        let forwarded: Vec<u64> = cluster
            .trace
            .exchanges()
            .into_iter()
            .filter_map(|x| match (x.from, x.to, &x.request) {
                (Role::Sc, Role::Rm, Request::Rm(RmRequest::SubmitVm { s_id, .. })) => Some(*s_id),
                _ => None,
            })
            .collect();
        if arrived.len() != submissions || forwarded != arrived {
            return Err(format!(
                "run {run}: arrivals {arrived:?}, forwarded {forwarded:?}"
            ));
        }
    }
    Ok((runs, submissions))
}

fn status_of(cluster: &Cluster, vm_id: u64) -> Result<ExecStatus, String> {
    match cluster.query(IsRequest::GetVmStatus { vm_id }) {
        Ok(Reply::Ok(Payload::Status(s))) => Ok(s),
        other => Err(format!("GETVMSTATUS {vm_id}: {other:?}")),
    }
}

/// Returns VMs run and elapsed time.
pub fn workflow(vms: usize) -> Result<(usize, Duration), String> {
    let start = Instant::now();
    let machine = MachineFixture {
        n_cpu: 8,
        max_vm: Some(8),
        ..Default::default()
    };
    let cluster = boot(spec(vec![machine.clone(), machine], &names(3)))?;
    let fresh = cluster.availability();
    let services = cluster.service_ids();
    let s_ids: Vec<u64> = (0..vms).map(|i| services[i % services.len()]).collect();
    let ids = submit_all(&cluster, &s_ids)?;

    let per_machine = cluster.is.with_db(|db| {
        let mut n = [0usize; 2];
        for v in db.vms.values() {
            n[(v.phy_mach_id - 1) as usize] += 1;
        }
        n
    });
    if vms == 10 && per_machine != [8, 2] {
        return Err(format!("placement {per_machine:?}, expected [8, 2]"));
    }
    for &id in &ids {
        if status_of(&cluster, id)? != ExecStatus::Running {
            return Err(format!("VM {id} not running after submission"));
        }
    }

    let handles: Vec<_> = ids
        .iter()
        .map(|&vm_id| {
            let addr = cluster.sc_addr();
            thread::spawn(move || {
                taaroa_core::net::call(&addr, taaroa_core::protocol::ScRequest::StopServ { vm_id })
            })
        })
        .collect();
    for (h, id) in handles.into_iter().zip(&ids) {
        match h.join() {
            Ok(Ok(r)) if r.as_id() == Some(*id) => {}
            other => return Err(format!("stop {id}: {other:?}")),
        }
    }

    for &id in &ids {
        let sub = cluster
            .trace
            .submission_of(id)
            .ok_or_else(|| format!("no submission trace for VM {id}"))?;
        assert_submission_conformance(&sub).map_err(|d| format!("VM {id}:\n{d}"))?;
        let stop = cluster
            .trace
            .stop_of(id)
            .ok_or_else(|| format!("no stop trace for VM {id}"))?;
        assert_stop_conformance(&stop).map_err(|d| format!("VM {id}:\n{d}"))?;
        if status_of(&cluster, id)? != ExecStatus::Stopped {
            return Err(format!("VM {id} not stopped"));
        }
    }
    let after = cluster.availability();
    for ((id, a), (_, b)) in fresh.iter().zip(&after) {
        let d = [(a.cpu - b.cpu), (a.ram - b.ram), (a.disk - b.disk)];
        if d.iter().any(|x| x.abs() > TOLERANCE) {
            return Err(format!("machine {id}: fresh {a:?}, after {b:?}"));
        }
    }
    if cluster.mms.iter().any(|m| !m.vms().is_empty()) {
        return Err("machine managers still hold VMs".into());
    }
    let elapsed = start.elapsed();
    if elapsed > WORKFLOW_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok((ids.len(), elapsed))
}

/// Replays every recorded IS request against a server restored from the
/// state it saw. Returns the number replayed.
pub fn statelessness() -> Result<usize, String> {
    let mut s = spec(vec![MachineFixture::default()], &names(2));
    s.record_is_state = true;
    let cluster = boot(s)?;
    let services = cluster.service_ids();
    for round in 0..3 {
        let id = vm_id(&cluster.submit(services[round % 2]).map_err(|e| e.to_string())?)?;
        for q in [
            IsRequest::GetVm { vm_id: id },
            IsRequest::GetVmStatus { vm_id: id },
            IsRequest::ListPhyMachStatus,
            IsRequest::ListServ,
            IsRequest::ListVm { s_id: services[0] },
            IsRequest::GetVm { vm_id: 999 },
        ] {
            cluster.query(q).map_err(|e| e.to_string())?;
        }
        vm_id(&cluster.stop(id).map_err(|e| e.to_string())?)?;
    }
    cluster.query(IsRequest::ListRepo).map_err(|e| e.to_string())?;
    cluster.query(IsRequest::ListPhyMach).map_err(|e| e.to_string())?;

    let mut replayed = 0;
    for x in cluster.trace.exchanges().into_iter().filter(|x| x.to == Role::Is) {
        let state = x
            .state_before
            .as_deref()
            .ok_or_else(|| format!("exchange {} has no recorded state", x.seq))?;
        let is = InformationService::restore(state).map_err(|e| e.to_string())?;
        if is.component() != taaroa_core::protocol::Component::InformationService {
            return Err("restored server is not an IS".into());
        }
        let mut srv = serve(bind("127.0.0.1:0").map_err(|e| e.to_string())?, is)
            .map_err(|e| e.to_string())?;
        let addr = srv.local_addr().to_string();
        let raw = Connection::open(&addr)
            .and_then(|mut c| c.exchange(&render_request(&x.request), x.kind().is_list()))
            .map_err(|e| format!("replay {}: {e}", x.header))?;
        srv.shutdown();
        if raw != x.raw_reply {
            return Err(format!(
                "{} ({}): recorded {:?}, replayed {:?}",
                x.header,
                x.kind(),
                String::from_utf8_lossy(&x.raw_reply),
                String::from_utf8_lossy(&raw)
            ));
        }
        replayed += 1;
    }
    let kinds: std::collections::BTreeSet<RequestKind> = cluster
        .trace
        .exchanges()
        .iter()
        .filter(|x| x.to == Role::Is)
        .map(|x| x.kind())
        .collect();
    if kinds.len() < 10 {
        return Err(format!("only {} request kinds exercised", kinds.len()));
    }
    Ok(replayed)
}
