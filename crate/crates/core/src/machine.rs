//! The Machine Manager: hosts VMs on one physical machine through a
//! hypervisor back end, and keeps the Information Service informed.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};
use tracing::{info, warn};

use crate::lifecycle::{apply_event, is_final, VmEvent};
use crate::net::{call_upstream, Service};
use crate::protocol::{
    Component, ErrorCode, ExecStatus, IsRequest, MmRequest, Payload, PhyMachRegistration, Reply,
    Request, VmRegistration, PROTOCOL_VERSION,
};
use crate::registry::CAPACITY_EPSILON;
use crate::repository::ImageBundle;

const VMIDLIST_FILE: &str = "vmidlist";

/// A hypervisor back end.
pub trait Vmm: Send + Sync + 'static {
    /// Creates and boots a VM from `bundle`, returning an image digest.
    fn create(&self, local_id: &str, bundle: &ImageBundle) -> io::Result<String>;
    fn destroy(&self, local_id: &str) -> io::Result<()>;
}

/// Hypervisor stand-in. VMs are directories of unpacked files when a work
/// directory is set, and nothing at all otherwise.
#[derive(Debug, Default, Clone)]
pub struct MockVmm {
    pub work_dir: Option<PathBuf>,
}

impl Vmm for MockVmm {
    fn create(&self, local_id: &str, bundle: &ImageBundle) -> io::Result<String> {
        let mut h = Sha256::new();
        for (name, content) in &bundle.files {
            h.update(name.as_bytes());
            h.update([0]);
            h.update(content);
        }
        if let Some(root) = &self.work_dir {
            let dir = root.join(local_id);
            fs::create_dir_all(&dir)?;
            for (name, content) in &bundle.files {
                fs::write(dir.join(name), content)?;
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    fn destroy(&self, local_id: &str) -> io::Result<()> {
        if let Some(root) = &self.work_dir {
            match fs::remove_dir_all(root.join(local_id)) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MmConfig {
    pub is_addr: String,
    /// Sent as REGPHYMACH. `phy_ip` and `mm_port` are the advertised
    /// address.
    pub machine: PhyMachRegistration,
    pub data_dir: Option<PathBuf>,
}

/// A VM hosted here.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalVm {
    pub vm_id: u64,
    pub s_id: u64,
    pub virt_ip: String,
    pub status: ExecStatus,
    pub allocated_cpu: f64,
    pub allocated_ram: f64,
    pub allocated_disk: f64,
    pub digest: String,
}

#[derive(Default)]
struct Host {
    next_local: u64,
    vms: BTreeMap<String, LocalVm>,
}

impl Host {
    fn sums(&self) -> (f64, f64, f64) {
        self.vms.values().fold((0.0, 0.0, 0.0), |(c, r, d), v| {
            (c + v.allocated_cpu, r + v.allocated_ram, d + v.allocated_disk)
        })
    }
}

pub struct MachineManager {
    cfg: MmConfig,
    phy_id: u64,
    vmm: Box<dyn Vmm>,
    host: Mutex<Host>,
}

#[derive(Debug, thiserror::Error)]
pub enum MmJoinError {
    #[error("information service refused REGPHYMACH: {0}")]
    Refused(ErrorCode),
    #[error("cannot reach the information service")]
    Unreachable,
}

impl MachineManager {
    /// Registers the machine with the IS.
    pub fn join(cfg: MmConfig, vmm: impl Vmm) -> Result<Arc<Self>, MmJoinError> {
        let phy_id = match call_upstream(&cfg.is_addr, IsRequest::RegPhyMach(cfg.machine.clone())) {
            Ok(Reply::Ok(Payload::Id(id))) => id,
            Ok(Reply::Err(code)) => return Err(MmJoinError::Refused(code)),
            Ok(_) => return Err(MmJoinError::Refused(ErrorCode::UPSTREAM_FAILURE)),
            Err(_) => return Err(MmJoinError::Unreachable),
        };
        info!(phy_id, ip = %cfg.machine.phy_ip, "machine registered");
        Ok(Arc::new(Self {
            cfg,
            phy_id,
            vmm: Box::new(vmm),
            host: Mutex::default(),
        }))
    }

    /// Unregisters the machine (and, by cascade, its VMs).
    pub fn leave(&self) -> Result<(), ErrorCode> {
        match call_upstream(&self.cfg.is_addr, IsRequest::UnregPhyMach { phy_id: self.phy_id })? {
            Reply::Err(code) => Err(code),
            _ => Ok(()),
        }
    }

    pub fn phy_id(&self) -> u64 {
        self.phy_id
    }

    pub fn vms(&self) -> BTreeMap<String, LocalVm> {
        self.host.lock().unwrap().vms.clone()
    }

    fn max_vms(&self) -> Option<u64> {
        self.cfg.machine.max_vm_number
    }

    fn start_vm(&self, s_id: u64, image: &[u8]) -> Result<u64, ErrorCode> {
        let bundle = ImageBundle::from_tar(image).map_err(|e| {
            warn!(s_id, "rejecting image: {e}");
            ErrorCode::MALFORMED_REQUEST
        })?;
        let m = &self.cfg.machine;
        let mut host = self.host.lock().unwrap();

        if self.max_vms().is_some_and(|max| host.vms.len() as u64 >= max) {
            return Err(ErrorCode::NO_CAPACITY);
        }
        let disk_bytes = m.disk_size.base_value_f64();
        let cpu = 1.0;
        let ram = 1.0 / self.max_vms().unwrap_or(0).max(4) as f64;
        let disk = if disk_bytes > 0.0 {
            bundle.total_bytes() as f64 / disk_bytes
        } else {
            f64::INFINITY
        };
        let (c, r, d) = host.sums();
        if c + cpu > m.n_cpu as f64 + CAPACITY_EPSILON
            || r + ram > 1.0 + CAPACITY_EPSILON
            || d + disk > 1.0 + CAPACITY_EPSILON
        {
            return Err(ErrorCode::NO_CAPACITY);
        }

        host.next_local += 1;
        let n = host.next_local;
        let local_id = format!("vm-{n}");
        let virt_ip = format!("10.0.{}.{n}", self.phy_id);
        let staging = apply_event(ExecStatus::Unstarted, VmEvent::SelectForExecution)
            .expect("unstarted VMs can be selected");
        let digest = self.vmm.create(&local_id, &bundle).map_err(|e| {
            warn!(%local_id, "hypervisor could not create the VM: {e}");
            ErrorCode::INTERNAL_ERROR
        })?;
        let status = apply_event(staging, VmEvent::StageInComplete).expect("staging completes");

        let reg = VmRegistration {
            s_id,
            phy_id: self.phy_id,
            vm_local_id: local_id.clone(),
            virt_ip: virt_ip.clone(),
            allocated_cpu: cpu,
            allocated_ram: ram,
            allocated_disk: disk,
        };
        let vm_id = match call_upstream(&self.cfg.is_addr, IsRequest::RegVm(reg)) {
            Ok(Reply::Ok(Payload::Id(id))) => id,
            other => {
                warn!(%local_id, ?other, "REGVM failed, destroying the VM");
                let _ = self.vmm.destroy(&local_id);
                return Err(ErrorCode::UPSTREAM_FAILURE);
            }
        };
        info!(vm_id, %local_id, %virt_ip, %digest, "VM running");
        host.vms.insert(
            local_id,
            LocalVm {
                vm_id,
                s_id,
                virt_ip,
                status,
                allocated_cpu: cpu,
                allocated_ram: ram,
                allocated_disk: disk,
                digest,
            },
        );
        self.persist(&host);
        Ok(vm_id)
    }

    fn stop_vm(&self, local_id: &str) -> Result<u64, ErrorCode> {
        let mut host = self.host.lock().unwrap();
        let vm = host.vms.get_mut(local_id).ok_or(ErrorCode::UNKNOWN_VM)?;
        if vm.status == ExecStatus::Suspended {
            vm.status = apply_event(vm.status, VmEvent::Resume).expect("suspended VMs resume");
        }
        vm.status = apply_event(vm.status, VmEvent::Shutdown).map_err(|e| {
            warn!(%local_id, "cannot stop: {e}");
            ErrorCode::INVALID_STATE_TRANSITION
        })?;
        let vm_id = vm.vm_id;
        if let Err(e) = self.vmm.destroy(local_id) {
            warn!(%local_id, "hypervisor could not destroy the VM: {e}");
        }
        // one retry; UNREGVM is idempotent
        let done = (0..2).any(|_| {
            matches!(
                call_upstream(&self.cfg.is_addr, IsRequest::UnregVm { vm_id }),
                Ok(Reply::Ok(_))
            )
        });
        host.vms.remove(local_id);
        self.persist(&host);
        if !done {
            return Err(ErrorCode::UPSTREAM_FAILURE);
        }
        info!(vm_id, %local_id, "VM stopped");
        Ok(0)
    }

    /// Drives a hosted VM through `event`, as a hypervisor-side occurrence,
    /// and reports the new status to the IS. A VM that reaches a final
    /// state is destroyed and unregistered.
    pub fn inject(&self, local_id: &str, event: VmEvent) -> Result<ExecStatus, ErrorCode> {
        let mut host = self.host.lock().unwrap();
        let vm = host.vms.get_mut(local_id).ok_or(ErrorCode::UNKNOWN_VM)?;
        let next =
            apply_event(vm.status, event).map_err(|_| ErrorCode::INVALID_STATE_TRANSITION)?;
        vm.status = next;
        let vm_id = vm.vm_id;
        let update = call_upstream(
            &self.cfg.is_addr,
            IsRequest::UpdateVmStatus {
                vm_id,
                status: next,
            },
        );
        if !matches!(update, Ok(Reply::Ok(_))) {
            warn!(vm_id, %next, ?update, "status report failed");
        }
        if is_final(next) {
            let _ = self.vmm.destroy(local_id);
            let _ = call_upstream(&self.cfg.is_addr, IsRequest::UnregVm { vm_id });
            host.vms.remove(local_id);
        }
        self.persist(&host);
        Ok(next)
    }

    fn persist(&self, host: &Host) {
        let Some(dir) = &self.cfg.data_dir else {
            return;
        };
        let mut text = String::new();
        for (local, v) in &host.vms {
            text.push_str(&format!("{local}\t{}\t{}\t{}\n", v.vm_id, v.s_id, v.status.code()));
        }
        let write = || -> io::Result<()> {
            fs::create_dir_all(dir)?;
            let tmp = dir.join("vmidlist.tmp");
            fs::write(&tmp, text)?;
            fs::rename(tmp, dir.join(VMIDLIST_FILE))
        };
        if let Err(e) = write() {
            warn!("cannot persist VM list: {e}");
        }
    }
}

impl Service for MachineManager {
    fn component(&self) -> Component {
        Component::MachineManager
    }

    fn handle(&self, req: Request) -> Reply {
        let result = match req {
            Request::Mm(MmRequest::SrvProtoVer) => {
                return Reply::Ok(Payload::Version(PROTOCOL_VERSION.to_owned()))
            }
            Request::Mm(MmRequest::StartVm { s_id, image }) => self.start_vm(s_id, &image),
            Request::Mm(MmRequest::StopVm { vm_local_id }) => self.stop_vm(&vm_local_id),
            _ => Err(ErrorCode::INTERNAL_ERROR),
        };
        match result {
            Ok(id) => Reply::id(id),
            Err(code) => Reply::Err(code),
        }
    }
}
