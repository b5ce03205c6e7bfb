//! The Information Service database and its request handlers.

mod persist;
mod server;

use std::collections::BTreeMap;

use crate::lifecycle;
use crate::protocol::{
    ErrorCode, ExecStatus, IsRequest, Listing, Payload, PhyMachEntry, PhyMachRegistration,
    PhyMachStatusEntry, Quantity, RepoEntry, Reply, ServiceEntry, VmDetails, VmEntry, VmLocation,
    VmRegistration, PROTOCOL_VERSION,
};

pub use persist::{SnapshotError, Wal, WalRecord};
pub use server::InformationService;

/// Slack allowed when comparing summed allocations against capacity.
pub const CAPACITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalMachineRecord {
    pub id: u64,
    pub address: String,
    pub cpu_type: String,
    pub n_cpu: u64,
    pub cpu_clock: Quantity,
    pub ram_size: Quantity,
    pub disk_size: Quantity,
    pub net_speed: Quantity,
    pub max_vm_number: Option<u64>,
    pub user_name: String,
    pub user_password: String,
    pub vmm_user_name: String,
    pub vmm_user_password: String,
    pub mach_mngr_port: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepositoryRecord {
    pub id: u64,
    pub address: String,
    pub port: u16,
    pub user_name: String,
    pub user_passwd: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRecord {
    pub id: u64,
    pub repository_id: u64,
    pub name: String,
    pub req_disk: Quantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualMachineRecord {
    pub id: u64,
    pub service_id: u64,
    pub phy_mach_id: u64,
    pub vm_local_id: String,
    pub virt_ip: String,
    pub allocated_cpu: f64,
    pub allocated_ram: f64,
    pub allocated_disk: f64,
    pub status: ExecStatus,
    /// Set by UNREGVM: the row stays readable but no longer counts.
    pub unregistered: bool,
}

impl VirtualMachineRecord {
    /// Whether the VM still holds resources on its host.
    pub fn is_live(&self) -> bool {
        !self.unregistered && !self.status.is_final()
    }
}

/// Next id to hand out, per table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextIds {
    pub machine: u64,
    pub repository: u64,
    pub service: u64,
    pub vm: u64,
}

impl Default for NextIds {
    fn default() -> Self {
        Self {
            machine: 1,
            repository: 1,
            service: 1,
            vm: 1,
        }
    }
}

fn take(counter: &mut u64) -> u64 {
    let id = *counter;
    *counter += 1;
    id
}

/// Availability of one machine as reported by LISTPHYMACHSTATUS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Availability {
    pub cpu: f64,
    pub ram: f64,
    pub disk: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IsDatabase {
    pub machines: BTreeMap<u64, PhysicalMachineRecord>,
    pub repositories: BTreeMap<u64, RepositoryRecord>,
    pub services: BTreeMap<u64, ServiceRecord>,
    pub vms: BTreeMap<u64, VirtualMachineRecord>,
    pub next: NextIds,
}

impl IsDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers any IS request, mutating the database when the request is a
    /// registration, unregistration or status update.
    pub fn handle(&mut self, req: &IsRequest) -> Reply {
        if req.kind().is_mutation() {
            self.apply(req)
        } else {
            self.query(req)
        }
    }

    /// Answers a read-only request. Mutations are refused with 500.
    pub fn query(&self, req: &IsRequest) -> Reply {
        match self.try_query(req) {
            Ok(r) | Err(r) => r,
        }
    }

    /// Applies a mutating request.
    pub fn apply(&mut self, req: &IsRequest) -> Reply {
        match self.try_apply(req) {
            Ok(r) | Err(r) => r,
        }
    }

    fn try_query(&self, req: &IsRequest) -> Result<Reply, Reply> {
        use IsRequest as R;
        Ok(match req {
            R::SrvProtoVer => Reply::Ok(Payload::Version(PROTOCOL_VERSION.to_owned())),
            R::GetPhyMach { phy_id } => {
                let m = self.machine(*phy_id)?;
                Reply::Ok(Payload::PhyMachAddr {
                    phy_ip: m.address.clone(),
                    mm_port: m.mach_mngr_port,
                })
            }
            R::GetVm { vm_id } => {
                let v = self.vm(*vm_id)?;
                Reply::Ok(Payload::Vm(VmDetails {
                    s_id: v.service_id,
                    phy_id: v.phy_mach_id,
                    vm_local_id: v.vm_local_id.clone(),
                    virt_ip: v.virt_ip.clone(),
                    status: v.status,
                }))
            }
            R::GetVmMachMngr { vm_id } => {
                let v = self.vm(*vm_id)?;
                let m = self.integrity(self.machines.get(&v.phy_mach_id))?;
                Reply::Ok(Payload::VmLocation(VmLocation {
                    phy_id: m.id,
                    phy_ip: m.address.clone(),
                    mm_port: m.mach_mngr_port,
                    vm_local_id: v.vm_local_id.clone(),
                }))
            }
            R::GetVmServ { vm_id } => {
                let v = self.vm(*vm_id)?;
                let s = self.integrity(self.services.get(&v.service_id))?;
                Reply::Ok(Payload::Service(self.service_entry(s)?))
            }
            R::GetVmStatus { vm_id } => Reply::Ok(Payload::Status(self.vm(*vm_id)?.status)),
            R::ListPhyMach => Reply::List(Listing::PhyMach(
                self.machines
                    .values()
                    .map(|m| PhyMachEntry {
                        phy_id: m.id,
                        phy_ip: m.address.clone(),
                        mm_port: m.mach_mngr_port,
                    })
                    .collect(),
            )),
            R::ListPhyMachStatus => Reply::List(Listing::PhyMachStatus(
                self.machines
                    .values()
                    .map(|m| {
                        let a = self.availability(m.id);
                        PhyMachStatusEntry {
                            phy_id: m.id,
                            avail_cpu: a.cpu,
                            avail_ram: a.ram,
                            avail_disk: a.disk,
                            net_speed: m.net_speed,
                        }
                    })
                    .collect(),
            )),
            R::ListRepo => Reply::List(Listing::Repo(
                self.repositories
                    .values()
                    .map(|r| RepoEntry {
                        repo_id: r.id,
                        ip_addr: r.address.clone(),
                        port: r.port,
                        user_name: r.user_name.clone(),
                        passwd: r.user_passwd.clone(),
                    })
                    .collect(),
            )),
            R::ListServ => Reply::List(Listing::Serv(
                self.services
                    .values()
                    .map(|s| self.service_entry(s))
                    .collect::<Result<_, _>>()?,
            )),
            R::ListVm { s_id } => Reply::List(Listing::Vm(
                self.vms
                    .values()
                    .filter(|v| v.service_id == *s_id && !v.unregistered)
                    .map(|v| VmEntry {
                        vm_id: v.id,
                        phy_id: v.phy_mach_id,
                        vm_local_id: v.vm_local_id.clone(),
                        virt_ip: v.virt_ip.clone(),
                        status: v.status,
                    })
                    .collect(),
            )),
            _ => return Err(Reply::Err(ErrorCode::INTERNAL_ERROR)),
        })
    }

    fn try_apply(&mut self, req: &IsRequest) -> Result<Reply, Reply> {
        use IsRequest as R;
        Ok(match req {
            R::RegPhyMach(m) => Reply::id(self.register_machine(m)?),
            R::RegRepo {
                ip_addr,
                port,
                user_name,
                passwd,
            } => {
                if *port == 0 {
                    return Err(Reply::Err(ErrorCode::MALFORMED_REQUEST));
                }
                if self
                    .repositories
                    .values()
                    .any(|r| r.address == *ip_addr && r.port == *port)
                {
                    return Err(Reply::Err(ErrorCode::DUPLICATE_REGISTRATION));
                }
                let id = take(&mut self.next.repository);
                self.repositories.insert(
                    id,
                    RepositoryRecord {
                        id,
                        address: ip_addr.clone(),
                        port: *port,
                        user_name: user_name.clone(),
                        user_passwd: passwd.clone(),
                    },
                );
                Reply::id(id)
            }
            R::RegServ {
                rm_id,
                name,
                req_disk,
            } => {
                self.repository(*rm_id)?;
                let id = take(&mut self.next.service);
                self.services.insert(
                    id,
                    ServiceRecord {
                        id,
                        repository_id: *rm_id,
                        name: name.clone(),
                        req_disk: *req_disk,
                    },
                );
                Reply::id(id)
            }
            R::RegVm(v) => Reply::id(self.register_vm(v)?),
            R::UnregPhyMach { phy_id } => {
                self.machine(*phy_id)?;
                self.machines.remove(phy_id);
                self.vms.retain(|_, v| v.phy_mach_id != *phy_id);
                Reply::id(*phy_id)
            }
            R::UnregRepo { rm_id } => {
                self.repository(*rm_id)?;
                self.repositories.remove(rm_id);
                let gone: Vec<u64> = self
                    .services
                    .values()
                    .filter(|s| s.repository_id == *rm_id)
                    .map(|s| s.id)
                    .collect();
                for s in &gone {
                    self.remove_service(*s);
                }
                Reply::id(*rm_id)
            }
            R::UnregServ { s_id } => {
                self.service(*s_id)?;
                self.remove_service(*s_id);
                Reply::id(*s_id)
            }
            R::UnregVm { vm_id } => {
                let v = self.vm_mut(*vm_id)?;
                if !v.status.is_final() {
                    v.status = ExecStatus::Stopped;
                }
                v.unregistered = true;
                Reply::id(*vm_id)
            }
            R::UpdateVmStatus { vm_id, status } => {
                let v = self.vm_mut(*vm_id)?;
                if !lifecycle::is_legal_update(v.status, *status) {
                    return Err(Reply::Err(ErrorCode::INVALID_STATE_TRANSITION));
                }
                v.status = *status;
                Reply::Ok(Payload::Status(*status))
            }
            _ => return Err(Reply::Err(ErrorCode::INTERNAL_ERROR)),
        })
    }

    fn register_machine(&mut self, m: &PhyMachRegistration) -> Result<u64, Reply> {
        if m.n_cpu == 0 || m.mm_port == 0 {
            return Err(Reply::Err(ErrorCode::MALFORMED_REQUEST));
        }
        if self
            .machines
            .values()
            .any(|r| r.address == m.phy_ip && r.mach_mngr_port == m.mm_port)
        {
            return Err(Reply::Err(ErrorCode::DUPLICATE_REGISTRATION));
        }
        let id = take(&mut self.next.machine);
        self.machines.insert(
            id,
            PhysicalMachineRecord {
                id,
                address: m.phy_ip.clone(),
                cpu_type: m.cpu_type.clone(),
                n_cpu: m.n_cpu,
                cpu_clock: m.cpu_clock,
                ram_size: m.ram_size,
                disk_size: m.disk_size,
                net_speed: m.net_speed,
                max_vm_number: m.max_vm_number,
                user_name: m.mach_username.clone(),
                user_password: m.mach_password.clone(),
                vmm_user_name: m.xm_username.clone(),
                vmm_user_password: m.xm_password.clone(),
                mach_mngr_port: m.mm_port,
            },
        );
        Ok(id)
    }

    fn register_vm(&mut self, v: &VmRegistration) -> Result<u64, Reply> {
        let service = self.service(v.s_id)?;
        let machine = self.machine(v.phy_id)?;
        let no_capacity = Err(Reply::Err(ErrorCode::NO_CAPACITY));

        let live: Vec<&VirtualMachineRecord> = self.live_vms_on(v.phy_id).collect();
        if live.iter().any(|x| x.vm_local_id == v.vm_local_id) {
            return Err(Reply::Err(ErrorCode::DUPLICATE_REGISTRATION));
        }
        if let Some(max) = machine.max_vm_number {
            if live.len() as u64 >= max {
                return no_capacity;
            }
        }
        let (cpu, ram, disk) = allocation_sums(live.iter().copied());
        let n_cpu = machine.n_cpu as f64;
        if cpu + v.allocated_cpu > n_cpu + CAPACITY_EPSILON
            || ram + v.allocated_ram > 1.0 + CAPACITY_EPSILON
            || disk + v.allocated_disk > 1.0 + CAPACITY_EPSILON
        {
            return no_capacity;
        }
        let free_disk_bytes = (1.0 - disk).max(0.0) * machine.disk_size.base_value_f64();
        if service.req_disk.base_value_f64() > free_disk_bytes * (1.0 + CAPACITY_EPSILON) {
            return no_capacity;
        }

        let id = take(&mut self.next.vm);
        self.vms.insert(
            id,
            VirtualMachineRecord {
                id,
                service_id: v.s_id,
                phy_mach_id: v.phy_id,
                vm_local_id: v.vm_local_id.clone(),
                virt_ip: v.virt_ip.clone(),
                allocated_cpu: v.allocated_cpu,
                allocated_ram: v.allocated_ram,
                allocated_disk: v.allocated_disk,
                status: ExecStatus::Running,
                unregistered: false,
            },
        );
        Ok(id)
    }

    fn remove_service(&mut self, s_id: u64) {
        self.services.remove(&s_id);
        self.vms.retain(|_, v| v.service_id != s_id);
    }

    pub fn live_vms_on(&self, phy_id: u64) -> impl Iterator<Item = &VirtualMachineRecord> {
        self.vms
            .values()
            .filter(move |v| v.phy_mach_id == phy_id && v.is_live())
    }

    /// Free CPU, RAM and disk of a machine; zero for unknown machines.
    pub fn availability(&self, phy_id: u64) -> Availability {
        let Some(m) = self.machines.get(&phy_id) else {
            return Availability {
                cpu: 0.0,
                ram: 0.0,
                disk: 0.0,
            };
        };
        let (cpu, ram, disk) = allocation_sums(self.live_vms_on(phy_id));
        Availability {
            cpu: (m.n_cpu as f64 - cpu).max(0.0),
            ram: (1.0 - ram).max(0.0),
            disk: (1.0 - disk).max(0.0),
        }
    }

    fn service_entry(&self, s: &ServiceRecord) -> Result<ServiceEntry, Reply> {
        let r = self.integrity(self.repositories.get(&s.repository_id))?;
        Ok(ServiceEntry {
            s_id: s.id,
            name: s.name.clone(),
            rm_id: r.id,
            rm_ip: r.address.clone(),
            rm_port: r.port,
        })
    }

    fn integrity<'a, T>(&self, row: Option<&'a T>) -> Result<&'a T, Reply> {
        row.ok_or(Reply::Err(ErrorCode::INTERNAL_ERROR))
    }

    fn machine(&self, id: u64) -> Result<&PhysicalMachineRecord, Reply> {
        self.machines
            .get(&id)
            .ok_or(Reply::Err(ErrorCode::UNKNOWN_PHYSICAL_MACHINE))
    }

    fn repository(&self, id: u64) -> Result<&RepositoryRecord, Reply> {
        self.repositories
            .get(&id)
            .ok_or(Reply::Err(ErrorCode::UNKNOWN_REPOSITORY))
    }

    fn service(&self, id: u64) -> Result<&ServiceRecord, Reply> {
        self.services
            .get(&id)
            .ok_or(Reply::Err(ErrorCode::UNKNOWN_SERVICE))
    }

    fn vm(&self, id: u64) -> Result<&VirtualMachineRecord, Reply> {
        self.vms.get(&id).ok_or(Reply::Err(ErrorCode::UNKNOWN_VM))
    }

    fn vm_mut(&mut self, id: u64) -> Result<&mut VirtualMachineRecord, Reply> {
        self.vms.get_mut(&id).ok_or(Reply::Err(ErrorCode::UNKNOWN_VM))
    }

    /// Full-table consistency check: every reference resolves, ids sit
    /// below their counters, and live allocations fit their hosts.
    pub fn audit(&self) -> Result<(), String> {
        fn ids_below<T>(t: &BTreeMap<u64, T>, next: u64, table: &str) -> Result<(), String> {
            match t.keys().next_back() {
                Some(&max) if max >= next => Err(format!("{table}: id {max} >= next id {next}")),
                _ if t.contains_key(&0) => Err(format!("{table}: id 0 in use")),
                _ => Ok(()),
            }
        }
        ids_below(&self.machines, self.next.machine, "machines")?;
        ids_below(&self.repositories, self.next.repository, "repositories")?;
        ids_below(&self.services, self.next.service, "services")?;
        ids_below(&self.vms, self.next.vm, "vms")?;
        for (id, m) in &self.machines {
            if m.id != *id || m.n_cpu == 0 || m.mach_mngr_port == 0 {
                return Err(format!("machine {id}: bad row"));
            }
        }
        for (id, s) in &self.services {
            if s.id != *id || !self.repositories.contains_key(&s.repository_id) {
                return Err(format!(
                    "service {id}: dangling repository {}",
                    s.repository_id
                ));
            }
        }
        for (id, v) in &self.vms {
            if v.id != *id {
                return Err(format!("vm {id}: key mismatch"));
            }
            if !self.services.contains_key(&v.service_id) {
                return Err(format!("vm {id}: dangling service {}", v.service_id));
            }
            if !self.machines.contains_key(&v.phy_mach_id) {
                return Err(format!("vm {id}: dangling machine {}", v.phy_mach_id));
            }
        }
        for m in self.machines.values() {
            let live: Vec<_> = self.live_vms_on(m.id).collect();
            let (cpu, ram, disk) = allocation_sums(live.iter().copied());
            if cpu > m.n_cpu as f64 + CAPACITY_EPSILON
                || ram > 1.0 + CAPACITY_EPSILON
                || disk > 1.0 + CAPACITY_EPSILON
            {
                return Err(format!("machine {}: oversubscribed", m.id));
            }
            if let Some(max) = m.max_vm_number {
                if live.len() as u64 > max {
                    return Err(format!("machine {}: {} live VMs > {max}", m.id, live.len()));
                }
            }
        }
        Ok(())
    }
}

fn allocation_sums<'a>(vms: impl Iterator<Item = &'a VirtualMachineRecord>) -> (f64, f64, f64) {
    vms.fold((0.0, 0.0, 0.0), |(c, r, d), v| {
        (c + v.allocated_cpu, r + v.allocated_ram, d + v.allocated_disk)
    })
}
