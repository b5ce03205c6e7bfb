//! Availability and cascade criteria, driven through the IS request path.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use taaroa_core::net::Service;
use taaroa_core::protocol::{
    parse_reply, render_reply, ExecStatus, IsRequest, Listing, PhyMachRegistration, Quantity,
    Reply, Request, RequestKind, Unit, VmRegistration,
};
use taaroa_core::registry::InformationService;

pub const TOLERANCE: f64 = 1e-9;

fn send(is: &InformationService, req: IsRequest) -> Reply {
    is.handle(Request::Is(req))
}

fn machine(rng: &mut StdRng, port: u16) -> PhyMachRegistration {
    PhyMachRegistration {
        phy_ip: "10.1.0.1".into(),
        cpu_type: "x86".into(),
        n_cpu: rng.random_range(1..=16),
        cpu_clock: Quantity::new(2000, Unit::MHz),
        ram_size: Quantity::new(rng.random_range(512..65536), Unit::MB),
        disk_size: Quantity::new(rng.random_range(100..100_000), Unit::MB),
        net_speed: Quantity::new(rng.random_range(1..10), Unit::Gbps),
        max_vm_number: if rng.random_bool(0.5) {
            None
        } else {
            Some(rng.random_range(1..10))
        },
        mach_username: "u".into(),
        mach_password: "p".into(),
        xm_username: "xu".into(),
        xm_password: "xp".into(),
        mm_port: port,
    }
}

fn final_status(s: ExecStatus) -> bool {
    matches!(
        s,
        ExecStatus::Stopped | ExecStatus::Cancelled | ExecStatus::Failed | ExecStatus::Aborted
    )
}

#[derive(Clone)]
struct ModelVm {
    phy: u64,
    cpu: f64,
    ram: f64,
    disk: f64,
    status: ExecStatus,
    unregistered: bool,
}

fn random_status(rng: &mut StdRng) -> ExecStatus {
    ExecStatus::ALL[rng.random_range(0..ExecStatus::ALL.len())]
}

/// Compares the wire LISTPHYMACHSTATUS against sums over the model.
fn compare(
    is: &InformationService,
    n_cpu: &BTreeMap<u64, u64>,
    vms: &BTreeMap<u64, ModelVm>,
) -> Result<(), String> {
    let reply = send(is, IsRequest::ListPhyMachStatus);
    let wire = parse_reply(&render_reply(&reply), RequestKind::ListPhyMachStatus)
        .map_err(|e| format!("reply does not parse: {e}"))?;
    let Reply::List(Listing::PhyMachStatus(entries)) = wire else {
        return Err(format!("unexpected reply {wire:?}"));
    };
    if entries.iter().map(|e| e.phy_id).collect::<Vec<_>>() != n_cpu.keys().copied().collect::<Vec<_>>() {
        return Err("machine set differs".into());
    }
    for e in &entries {
        let live = vms
            .values()
            .filter(|v| v.phy == e.phy_id && !v.unregistered && !final_status(v.status));
        let (mut c, mut r, mut d) = (0.0, 0.0, 0.0);
        for v in live {
            c += v.cpu;
            r += v.ram;
            d += v.disk;
        }
        let cpus = n_cpu[&e.phy_id] as f64;
        let expect = [cpus - c, 1.0 - r, 1.0 - d];
        let got = [e.avail_cpu, e.avail_ram, e.avail_disk];
        for (i, (x, y)) in expect.iter().zip(got).enumerate() {
            if (x.max(0.0) - y).abs() > TOLERANCE {
                return Err(format!(
                    "machine {} field {i}: expected {x}, listed {y}",
                    e.phy_id
                ));
            }
        }
        if !(0.0..=cpus).contains(&e.avail_cpu)
            || !(0.0..=1.0).contains(&e.avail_ram)
            || !(0.0..=1.0).contains(&e.avail_disk)
        {
            return Err(format!("machine {} out of bounds: {e:?}", e.phy_id));
        }
    }
    Ok(())
}

/// Returns (registries checked, comparisons made).
pub fn availability(registries: usize, seed: u64) -> Result<(usize, usize), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut comparisons = 0;
    for r in 0..registries {
        let is = InformationService::new();
        let mut n_cpu = BTreeMap::new();
        let mut vms: BTreeMap<u64, ModelVm> = BTreeMap::new();
        for port in 1..=rng.random_range(0..=10u16) {
            let m = machine(&mut rng, port);
            let cpus = m.n_cpu;
            let id = send(&is, IsRequest::RegPhyMach(m)).as_id().ok_or("REGPHYMACH failed")?;
            n_cpu.insert(id, cpus);
        }
        let rm = send(
            &is,
            IsRequest::RegRepo {
                ip_addr: "10.2.0.1".into(),
                port: 1,
                user_name: "u".into(),
                passwd: "p".into(),
            },
        )
        .as_id()
        .ok_or("REGREPO failed")?;
        let services: Vec<u64> = (0..rng.random_range(1..=3))
            .map(|i| {
                send(
                    &is,
                    IsRequest::RegServ {
                        rm_id: rm,
                        name: format!("s{i}"),
                        req_disk: Quantity::new(rng.random_range(1..2000), Unit::KB),
                    },
                )
                .as_id()
                .expect("REGSERV")
            })
            .collect();
        let mut local = 0;
        for _ in 0..rng.random_range(0..60) {
            let n_machines = n_cpu.len() as u64;
            match rng.random_range(0..10) {
                0..=5 if vms.len() < 20 && n_machines > 0 => {
                    local += 1;
                    let v = VmRegistration {
                        s_id: services[rng.random_range(0..services.len())],
                        phy_id: rng.random_range(1..=n_machines),
                        vm_local_id: format!("vm-{local}"),
                        virt_ip: "10.0.0.1".into(),
                        allocated_cpu: rng.random_range(0.0..2.0),
                        allocated_ram: rng.random_range(0.0..0.6),
                        allocated_disk: rng.random_range(0.0..0.6),
                    };
                    let model = ModelVm {
                        phy: v.phy_id,
                        cpu: v.allocated_cpu,
                        ram: v.allocated_ram,
                        disk: v.allocated_disk,
                        status: ExecStatus::Running,
                        unregistered: false,
                    };
                    if let Some(id) = send(&is, IsRequest::RegVm(v)).as_id() {
                        vms.insert(id, model);
                    }
                }
                6..=8 if !vms.is_empty() => {
                    let vm_id = rng.random_range(1..=vms.len() as u64 + 1);
                    let status = random_status(&mut rng);
                    if send(&is, IsRequest::UpdateVmStatus { vm_id, status }).is_ok() {
                        vms.get_mut(&vm_id).ok_or("update of unknown VM accepted")?.status =
                            status;
                    }
                }
                _ if !vms.is_empty() => {
                    let vm_id = rng.random_range(1..=vms.len() as u64);
                    if send(&is, IsRequest::UnregVm { vm_id }).is_ok() {
                        vms.get_mut(&vm_id).ok_or("unregistration of unknown VM")?.unregistered =
                            true;
                    }
                }
                _ => {}
            }
            compare(&is, &n_cpu, &vms).map_err(|e| format!("registry {r}: {e}"))?;
            comparisons += 1;
        }
        compare(&is, &n_cpu, &vms).map_err(|e| format!("registry {r}: {e}"))?;
        comparisons += 1;
    }
    Ok((registries, comparisons))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    RegMach,
    RegRepo,
    RegServ,
    RegVm,
    UnregMach,
    UnregRepo,
    UnregServ,
    UnregVm,
    Update,
}

const UNREGS: [Op; 4] = [Op::UnregMach, Op::UnregRepo, Op::UnregServ, Op::UnregVm];

fn random_op(rng: &mut StdRng) -> Op {
    match rng.random_range(0..20) {
        0..=2 => Op::RegMach,
        3 => Op::RegRepo,
        4..=6 => Op::RegServ,
        7..=12 => Op::RegVm,
        13 => Op::UnregMach,
        14 => Op::UnregRepo,
        15 => Op::UnregServ,
        16..=17 => Op::UnregVm,
        _ => Op::Update,
    }
}

/// Runs `sequences` random operation sequences; returns the op count.
pub fn cascade(sequences: usize, seed: u64) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut total = 0;
    for s in 0..sequences {
        let mut ops: Vec<Op> = (0..rng.random_range(10..60)).map(|_| random_op(&mut rng)).collect();
        for u in UNREGS {
            if !ops.contains(&u) {
                let at = rng.random_range(ops.len() / 2..=ops.len());
                ops.insert(at, u);
            }
        }
        let is = InformationService::new();
        let mut port = 0u16;
        let mut local = 0;
        for op in ops {
            total += 1;
            let pick = |rng: &mut StdRng| rng.random_range(1..=6u64);
            match op {
                Op::RegMach => {
                    port += 1;
                    let mut m = machine(&mut rng, port);
                    m.n_cpu = 64;
                    m.max_vm_number = None;
                    send(&is, IsRequest::RegPhyMach(m));
                }
                Op::RegRepo => {
                    port += 1;
                    send(
                        &is,
                        IsRequest::RegRepo {
                            ip_addr: "10.3.0.1".into(),
                            port,
                            user_name: "u".into(),
                            passwd: "p".into(),
                        },
                    );
                }
                Op::RegServ => {
                    let rm_id = pick(&mut rng);
                    send(
                        &is,
                        IsRequest::RegServ {
                            rm_id,
                            name: "svc".into(),
                            req_disk: Quantity::new(1, Unit::KB),
                        },
                    );
                }
                Op::RegVm => {
                    local += 1;
                    let v = VmRegistration {
                        s_id: pick(&mut rng),
                        phy_id: pick(&mut rng),
                        vm_local_id: format!("vm-{local}"),
                        virt_ip: "10.0.0.2".into(),
                        allocated_cpu: 0.5,
                        allocated_ram: 0.01,
                        allocated_disk: 0.01,
                    };
                    send(&is, IsRequest::RegVm(v));
                }
                Op::UnregMach => {
                    let phy_id = pick(&mut rng);
                    if send(&is, IsRequest::UnregPhyMach { phy_id }).is_ok() {
                        is.with_db(|db| {
                            if db.vms.values().any(|v| v.phy_mach_id == phy_id) {
                                return Err(format!("seq {s}: VM survives machine {phy_id}"));
                            }
                            Ok(())
                        })?;
                    }
                }
                Op::UnregRepo => {
                    let rm_id = pick(&mut rng);
                    let owned: Vec<u64> = is.with_db(|db| {
                        db.services
                            .values()
                            .filter(|x| x.repository_id == rm_id)
                            .map(|x| x.id)
                            .collect()
                    });
                    if send(&is, IsRequest::UnregRepo { rm_id }).is_ok() {
                        is.with_db(|db| {
                            if db.services.values().any(|x| x.repository_id == rm_id) {
                                return Err(format!("seq {s}: service survives repository {rm_id}"));
                            }
                            if db.vms.values().any(|v| owned.contains(&v.service_id)) {
                                return Err(format!("seq {s}: VM survives repository {rm_id}"));
                            }
                            Ok(())
                        })?;
                    }
                }
                Op::UnregServ => {
                    let s_id = pick(&mut rng);
                    if send(&is, IsRequest::UnregServ { s_id }).is_ok() {
                        is.with_db(|db| {
                            if db.vms.values().any(|v| v.service_id == s_id) {
                                return Err(format!("seq {s}: VM survives service {s_id}"));
                            }
                            Ok(())
                        })?;
                    }
                }
                Op::UnregVm => {
                    let vm_id = pick(&mut rng);
                    if send(&is, IsRequest::UnregVm { vm_id }).is_ok() {
                        is.with_db(|db| match db.vms.get(&vm_id) {
                            Some(v) if !v.is_live() && final_status(v.status) => Ok(()),
                            other => Err(format!("seq {s}: VM {vm_id} after UNREGVM: {other:?}")),
                        })?;
                    }
                }
                Op::Update => {
                    let vm_id = pick(&mut rng);
                    let status = random_status(&mut rng);
                    send(&is, IsRequest::UpdateVmStatus { vm_id, status });
                }
            }
            is.with_db(|db| db.audit())
                .map_err(|e| format!("seq {s}: audit failed after {op:?}: {e}"))?;
        }
    }
    Ok(total)
}
