//! A TAAROA cluster on loopback ports, with a recording proxy on every edge.
//!
//! Each component is told the proxy address of its peers, and registers the
//! proxy address of itself, so every inter-component message passes
//! through the shared [`Trace`].

use std::io;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use taaroa_core::machine::{MachineManager, MmConfig, MmJoinError, MockVmm};
use taaroa_core::net::{bind, call, serve, CallError, ServerHandle};
use taaroa_core::protocol::{
    Component, IsRequest, PhyMachRegistration, Quantity, Reply, ScRequest, Unit,
};
use taaroa_core::registry::{Availability, InformationService};
use taaroa_core::repository::{write_service_dir, JoinError, RepositoryManager, RmConfig};
use taaroa_core::scheduler::Scheduler;

use crate::proxy::{FaultRule, Faults, Proxy, StateProbe};
use crate::trace::{Role, Trace};

#[derive(Debug, Clone)]
pub struct MachineFixture {
    pub n_cpu: u64,
    pub ram_mb: u64,
    pub disk_mb: u64,
    pub max_vm: Option<u64>,
}

impl Default for MachineFixture {
    fn default() -> Self {
        Self {
            n_cpu: 4,
            ram_mb: 4096,
            disk_mb: 10_000,
            max_vm: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceFixture {
    pub name: String,
    pub image_bytes: usize,
}

impl ServiceFixture {
    pub fn new(name: &str, image_bytes: usize) -> Self {
        Self {
            name: name.to_owned(),
            image_bytes,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClusterSpec {
    pub machines: Vec<MachineFixture>,
    pub services: Vec<ServiceFixture>,
    /// Store an IS snapshot with every exchange that reaches the IS.
    pub record_is_state: bool,
}

impl ClusterSpec {
    pub fn new(machines: usize, services: &[&str]) -> Self {
        Self {
            machines: vec![MachineFixture::default(); machines],
            services: services
                .iter()
                .map(|n| ServiceFixture::new(n, 4096))
                .collect(),
            record_is_state: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BootError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("repository manager: {0}")]
    Repository(#[from] JoinError),
    #[error("machine manager: {0}")]
    Machine(#[from] MmJoinError),
    #[error("machine {index} registered as {got}")]
    UnexpectedId { index: usize, got: u64 },
}

pub struct Cluster {
    pub trace: Trace,
    faults: Faults,
    pub is: Arc<InformationService>,
    pub sc: Arc<Scheduler>,
    pub rm: Arc<RepositoryManager>,
    pub mms: Vec<Arc<MachineManager>>,
    servers: Vec<ServerHandle>,
    proxies: Vec<Proxy>,
    client_sc: SocketAddr,
    client_is: SocketAddr,
    _scratch: tempfile::TempDir,
}

fn registration(m: &MachineFixture, port: u16) -> PhyMachRegistration {
    PhyMachRegistration {
        phy_ip: "127.0.0.1".into(),
        cpu_type: "mock-x86_64".into(),
        n_cpu: m.n_cpu,
        cpu_clock: Quantity::new(2400, Unit::MHz),
        ram_size: Quantity::new(m.ram_mb, Unit::MB),
        disk_size: Quantity::new(m.disk_mb, Unit::MB),
        net_speed: Quantity::new(1, Unit::Gbps),
        max_vm_number: m.max_vm,
        mach_username: "root".into(),
        mach_password: "mach".into(),
        xm_username: "xm".into(),
        xm_password: "xm".into(),
        mm_port: port,
    }
}

fn write_fixture(root: &Path, s: &ServiceFixture) -> io::Result<()> {
    let image = vec![0xA5u8; s.image_bytes];
    write_service_dir(
        root,
        &s.name,
        &[("disk.img", &image)],
        ("vm.cfg", format!("name = {}\nmemory = 256\n", s.name).as_bytes()),
    )?;
    Ok(())
}

impl Cluster {
    pub fn boot(spec: ClusterSpec) -> Result<Self, BootError> {
        let scratch = tempfile::tempdir()?;
        let trace = Trace::new();
        let faults = Faults::default();
        let mut servers = Vec::new();
        let mut proxies = Vec::new();

        let is = Arc::new(InformationService::new());
        let is_srv = serve(bind("127.0.0.1:0")?, is.clone())?;
        let is_addr = is_srv.local_addr();
        servers.push(is_srv);
        let probe: Option<StateProbe> = spec.record_is_state.then(|| {
            let is = is.clone();
            Arc::new(move || is.snapshot()) as StateProbe
        });
        let mut proxy = |from: Role, to: Role, component: Component, target: SocketAddr| {
            let p = Proxy::start(
                from,
                to,
                component,
                target,
                trace.clone(),
                faults.clone(),
                if to == Role::Is { probe.clone() } else { None },
            )?;
            let addr = p.addr();
            proxies.push(p);
            Ok::<_, io::Error>(addr)
        };

        let mut mms = Vec::new();
        for (index, m) in spec.machines.iter().enumerate() {
            let phy = index as u64 + 1;
            let listener = bind("127.0.0.1:0")?;
            let front = proxy(
                Role::Rm,
                Role::Mm(phy),
                Component::MachineManager,
                listener.local_addr()?,
            )?;
            let to_is = proxy(Role::Mm(phy), Role::Is, Component::InformationService, is_addr)?;
            let work = scratch.path().join(format!("mm{phy}"));
            let mm = MachineManager::join(
                MmConfig {
                    is_addr: to_is.to_string(),
                    machine: registration(m, front.port()),
                    data_dir: Some(work.join("data")),
                },
                MockVmm {
                    work_dir: Some(work.join("vms")),
                },
            )?;
            if mm.phy_id() != phy {
                return Err(BootError::UnexpectedId {
                    index,
                    got: mm.phy_id(),
                });
            }
            servers.push(serve(listener, mm.clone())?);
            mms.push(mm);
        }

        let store = scratch.path().join("store");
        std::fs::create_dir_all(&store)?;
        for s in &spec.services {
            write_fixture(&store, s)?;
        }
        let rm_listener = bind("127.0.0.1:0")?;
        let rm_front = proxy(
            Role::Sc,
            Role::Rm,
            Component::RepositoryManager,
            rm_listener.local_addr()?,
        )?;
        let rm_to_is = proxy(Role::Rm, Role::Is, Component::InformationService, is_addr)?;
        let rm = RepositoryManager::join(RmConfig {
            is_addr: rm_to_is.to_string(),
            advertise_ip: "127.0.0.1".into(),
            advertise_port: rm_front.port(),
            user: "repo".into(),
            passwd: "repo".into(),
            store_dir: store,
            data_dir: Some(scratch.path().join("rm")),
        })?;
        servers.push(serve(rm_listener, rm.clone())?);

        let sc_to_is = proxy(Role::Sc, Role::Is, Component::InformationService, is_addr)?;
        let sc = Scheduler::with_journal(sc_to_is.to_string());
        let sc_srv = serve(bind("127.0.0.1:0")?, sc.clone())?;
        let client_sc = proxy(
            Role::Client,
            Role::Sc,
            Component::Scheduler,
            sc_srv.local_addr(),
        )?;
        servers.push(sc_srv);
        let client_is = proxy(Role::Client, Role::Is, Component::InformationService, is_addr)?;

        Ok(Self {
            trace,
            faults,
            is,
            sc,
            rm,
            mms,
            servers,
            proxies,
            client_sc,
            client_is,
            _scratch: scratch,
        })
    }

    /// Scheduler address for clients.
    pub fn sc_addr(&self) -> String {
        self.client_sc.to_string()
    }

    /// Information Service address for clients.
    pub fn is_addr(&self) -> String {
        self.client_is.to_string()
    }

    /// Every listening address: servers and proxies.
    pub fn listen_addrs(&self) -> Vec<SocketAddr> {
        self.servers
            .iter()
            .map(ServerHandle::local_addr)
            .chain(self.proxies.iter().map(Proxy::addr))
            .collect()
    }

    pub fn add_fault(&self, rule: FaultRule) {
        self.faults.lock().unwrap().push(rule);
    }

    pub fn clear_faults(&self) {
        self.faults.lock().unwrap().clear();
    }

    /// Registered service ids, ascending.
    pub fn service_ids(&self) -> Vec<u64> {
        self.rm.vmlist().keys().copied().collect()
    }

    pub fn submit(&self, s_id: u64) -> Result<Reply, CallError> {
        call(&self.sc_addr(), ScRequest::SubmitServ { s_id })
    }

    pub fn stop(&self, vm_id: u64) -> Result<Reply, CallError> {
        call(&self.sc_addr(), ScRequest::StopServ { vm_id })
    }

    pub fn query(&self, req: IsRequest) -> Result<Reply, CallError> {
        call(&self.is_addr(), req)
    }

    /// Availability of every registered machine, by id.
    pub fn availability(&self) -> Vec<(u64, Availability)> {
        self.is.with_db(|db| {
            db.machines
                .keys()
                .map(|id| (*id, db.availability(*id)))
                .collect()
        })
    }

    /// Stops every listener. Also done on drop.
    pub fn shutdown(&mut self) {
        for p in &mut self.proxies {
            p.shutdown();
        }
        for s in &mut self.servers {
            s.shutdown();
        }
    }
}

impl Drop for Cluster {
    fn drop(&mut self) {
        self.shutdown();
    }
}
