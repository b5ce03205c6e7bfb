//! Typed requests and replies for every message of the protocol.

use std::fmt;

use super::{ErrorCode, ExecStatus, Quantity};

/// The four server roles that accept protocol requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    InformationService,
    RepositoryManager,
    Scheduler,
    MachineManager,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::InformationService,
        Component::RepositoryManager,
        Component::Scheduler,
        Component::MachineManager,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            Component::InformationService => "IS",
            Component::RepositoryManager => "RM",
            Component::Scheduler => "SC",
            Component::MachineManager => "MM",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

/// Field set of a REGPHYMACH request.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyMachRegistration {
    pub phy_ip: String,
    pub cpu_type: String,
    pub n_cpu: u64,
    pub cpu_clock: Quantity,
    pub ram_size: Quantity,
    pub disk_size: Quantity,
    pub net_speed: Quantity,
    /// `None` is the wire value `-1`, "no limit".
    pub max_vm_number: Option<u64>,
    pub mach_username: String,
    pub mach_password: String,
    pub xm_username: String,
    pub xm_password: String,
    pub mm_port: u16,
}

/// Field set of a REGVM request.
#[derive(Debug, Clone, PartialEq)]
pub struct VmRegistration {
    pub s_id: u64,
    pub phy_id: u64,
    pub vm_local_id: String,
    pub virt_ip: String,
    pub allocated_cpu: f64,
    pub allocated_ram: f64,
    pub allocated_disk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IsRequest {
    GetPhyMach { phy_id: u64 },
    GetVm { vm_id: u64 },
    GetVmMachMngr { vm_id: u64 },
    GetVmServ { vm_id: u64 },
    GetVmStatus { vm_id: u64 },
    ListPhyMach,
    ListPhyMachStatus,
    ListRepo,
    ListServ,
    ListVm { s_id: u64 },
    RegPhyMach(PhyMachRegistration),
    RegRepo {
        ip_addr: String,
        port: u16,
        user_name: String,
        passwd: String,
    },
    RegServ {
        rm_id: u64,
        name: String,
        req_disk: Quantity,
    },
    RegVm(VmRegistration),
    SrvProtoVer,
    UnregPhyMach { phy_id: u64 },
    UnregRepo { rm_id: u64 },
    UnregServ { s_id: u64 },
    UnregVm { vm_id: u64 },
    UpdateVmStatus { vm_id: u64, status: ExecStatus },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RmRequest {
    SrvProtoVer,
    StopVm { vm_id: u64 },
    SubmitVm { s_id: u64, phy_id: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScRequest {
    SrvProtoVer,
    StopServ { vm_id: u64 },
    SubmitServ { s_id: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MmRequest {
    SrvProtoVer,
    /// Header `STARTVM S_ID NBYTES` followed by `image`, an uncompressed tar
    /// archive of the VM files.
    StartVm { s_id: u64, image: Vec<u8> },
    StopVm { vm_local_id: String },
}

/// A request addressed to one of the four servers.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Is(IsRequest),
    Rm(RmRequest),
    Sc(ScRequest),
    Mm(MmRequest),
}

/// Every (destination, keyword) pair of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RequestKind {
    GetPhyMach,
    GetVm,
    GetVmMachMngr,
    GetVmServ,
    GetVmStatus,
    ListPhyMach,
    ListPhyMachStatus,
    ListRepo,
    ListServ,
    ListVm,
    RegPhyMach,
    RegRepo,
    RegServ,
    RegVm,
    IsSrvProtoVer,
    UnregPhyMach,
    UnregRepo,
    UnregServ,
    UnregVm,
    UpdateVmStatus,
    RmSrvProtoVer,
    RmStopVm,
    RmSubmitVm,
    ScSrvProtoVer,
    ScStopServ,
    ScSubmitServ,
    MmSrvProtoVer,
    MmStartVm,
    MmStopVm,
}

/// Which list a dot-terminated reply carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ListKind {
    PhyMach,
    PhyMachStatus,
    Repo,
    Serv,
    Vm,
}

/// The payload grammar of a successful reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReplyShape {
    Id,
    Version,
    Status,
    PhyMachAddr,
    VmDetails,
    VmLocation,
    Service,
    List(ListKind),
}

impl RequestKind {
    pub const ALL: [RequestKind; 29] = [
        RequestKind::GetPhyMach,
        RequestKind::GetVm,
        RequestKind::GetVmMachMngr,
        RequestKind::GetVmServ,
        RequestKind::GetVmStatus,
        RequestKind::ListPhyMach,
        RequestKind::ListPhyMachStatus,
        RequestKind::ListRepo,
        RequestKind::ListServ,
        RequestKind::ListVm,
        RequestKind::RegPhyMach,
        RequestKind::RegRepo,
        RequestKind::RegServ,
        RequestKind::RegVm,
        RequestKind::IsSrvProtoVer,
        RequestKind::UnregPhyMach,
        RequestKind::UnregRepo,
        RequestKind::UnregServ,
        RequestKind::UnregVm,
        RequestKind::UpdateVmStatus,
        RequestKind::RmSrvProtoVer,
        RequestKind::RmStopVm,
        RequestKind::RmSubmitVm,
        RequestKind::ScSrvProtoVer,
        RequestKind::ScStopServ,
        RequestKind::ScSubmitServ,
        RequestKind::MmSrvProtoVer,
        RequestKind::MmStartVm,
        RequestKind::MmStopVm,
    ];

    pub fn keyword(self) -> &'static str {
        use RequestKind::*;
        match self {
            GetPhyMach => "GETPHYMACH",
            GetVm => "GETVM",
            GetVmMachMngr => "GETVMMACHMNGR",
            GetVmServ => "GETVMSERV",
            GetVmStatus => "GETVMSTATUS",
            ListPhyMach => "LISTPHYMACH",
            ListPhyMachStatus => "LISTPHYMACHSTATUS",
            ListRepo => "LISTREPO",
            ListServ => "LISTSERV",
            ListVm => "LISTVM",
            RegPhyMach => "REGPHYMACH",
            RegRepo => "REGREPO",
            RegServ => "REGSERV",
            RegVm => "REGVM",
            IsSrvProtoVer | RmSrvProtoVer | ScSrvProtoVer | MmSrvProtoVer => "SRVPROTOVER",
            UnregPhyMach => "UNREGPHYMACH",
            UnregRepo => "UNREGREPO",
            UnregServ => "UNREGSERV",
            UnregVm => "UNREGVM",
            UpdateVmStatus => "UPDATEVMSTATUS",
            RmStopVm | MmStopVm => "STOPVM",
            RmSubmitVm => "SUBMITVM",
            ScStopServ => "STOPSERV",
            ScSubmitServ => "SUBMITSERV",
            MmStartVm => "STARTVM",
        }
    }

    pub fn component(self) -> Component {
        use RequestKind::*;
        match self {
            RmSrvProtoVer | RmStopVm | RmSubmitVm => Component::RepositoryManager,
            ScSrvProtoVer | ScStopServ | ScSubmitServ => Component::Scheduler,
            MmSrvProtoVer | MmStartVm | MmStopVm => Component::MachineManager,
            _ => Component::InformationService,
        }
    }

    pub fn lookup(component: Component, keyword: &str) -> Option<RequestKind> {
        Self::ALL
            .into_iter()
            .find(|k| k.component() == component && k.keyword() == keyword)
    }

    pub fn reply_shape(self) -> ReplyShape {
        use RequestKind::*;
        match self {
            GetPhyMach => ReplyShape::PhyMachAddr,
            GetVm => ReplyShape::VmDetails,
            GetVmMachMngr => ReplyShape::VmLocation,
            GetVmServ => ReplyShape::Service,
            GetVmStatus | UpdateVmStatus => ReplyShape::Status,
            ListPhyMach => ReplyShape::List(ListKind::PhyMach),
            ListPhyMachStatus => ReplyShape::List(ListKind::PhyMachStatus),
            ListRepo => ReplyShape::List(ListKind::Repo),
            ListServ => ReplyShape::List(ListKind::Serv),
            ListVm => ReplyShape::List(ListKind::Vm),
            IsSrvProtoVer | RmSrvProtoVer | ScSrvProtoVer | MmSrvProtoVer => ReplyShape::Version,
            RegPhyMach | RegRepo | RegServ | RegVm | UnregPhyMach | UnregRepo | UnregServ
            | UnregVm | RmStopVm | RmSubmitVm | ScStopServ | ScSubmitServ | MmStartVm
            | MmStopVm => ReplyShape::Id,
        }
    }

    pub fn is_list(self) -> bool {
        matches!(self.reply_shape(), ReplyShape::List(_))
    }

    /// True for IS requests that change the database.
    pub fn is_mutation(self) -> bool {
        use RequestKind::*;
        matches!(
            self,
            RegPhyMach
                | RegRepo
                | RegServ
                | RegVm
                | UnregPhyMach
                | UnregRepo
                | UnregServ
                | UnregVm
                | UpdateVmStatus
        )
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.component() {
            Component::InformationService => f.write_str(self.keyword()),
            c => write!(f, "{}.{}", c.abbrev(), self.keyword()),
        }
    }
}

impl Request {
    pub fn component(&self) -> Component {
        match self {
            Request::Is(_) => Component::InformationService,
            Request::Rm(_) => Component::RepositoryManager,
            Request::Sc(_) => Component::Scheduler,
            Request::Mm(_) => Component::MachineManager,
        }
    }

    pub fn kind(&self) -> RequestKind {
        match self {
            Request::Is(r) => r.kind(),
            Request::Rm(RmRequest::SrvProtoVer) => RequestKind::RmSrvProtoVer,
            Request::Rm(RmRequest::StopVm { .. }) => RequestKind::RmStopVm,
            Request::Rm(RmRequest::SubmitVm { .. }) => RequestKind::RmSubmitVm,
            Request::Sc(ScRequest::SrvProtoVer) => RequestKind::ScSrvProtoVer,
            Request::Sc(ScRequest::StopServ { .. }) => RequestKind::ScStopServ,
            Request::Sc(ScRequest::SubmitServ { .. }) => RequestKind::ScSubmitServ,
            Request::Mm(MmRequest::SrvProtoVer) => RequestKind::MmSrvProtoVer,
            Request::Mm(MmRequest::StartVm { .. }) => RequestKind::MmStartVm,
            Request::Mm(MmRequest::StopVm { .. }) => RequestKind::MmStopVm,
        }
    }

    pub fn srv_proto_ver(component: Component) -> Request {
        match component {
            Component::InformationService => Request::Is(IsRequest::SrvProtoVer),
            Component::RepositoryManager => Request::Rm(RmRequest::SrvProtoVer),
            Component::Scheduler => Request::Sc(ScRequest::SrvProtoVer),
            Component::MachineManager => Request::Mm(MmRequest::SrvProtoVer),
        }
    }
}

impl IsRequest {
    pub fn kind(&self) -> RequestKind {
        use IsRequest::*;
        match self {
            GetPhyMach { .. } => RequestKind::GetPhyMach,
            GetVm { .. } => RequestKind::GetVm,
            GetVmMachMngr { .. } => RequestKind::GetVmMachMngr,
            GetVmServ { .. } => RequestKind::GetVmServ,
            GetVmStatus { .. } => RequestKind::GetVmStatus,
            ListPhyMach => RequestKind::ListPhyMach,
            ListPhyMachStatus => RequestKind::ListPhyMachStatus,
            ListRepo => RequestKind::ListRepo,
            ListServ => RequestKind::ListServ,
            ListVm { .. } => RequestKind::ListVm,
            RegPhyMach(_) => RequestKind::RegPhyMach,
            RegRepo { .. } => RequestKind::RegRepo,
            RegServ { .. } => RequestKind::RegServ,
            RegVm(_) => RequestKind::RegVm,
            SrvProtoVer => RequestKind::IsSrvProtoVer,
            UnregPhyMach { .. } => RequestKind::UnregPhyMach,
            UnregRepo { .. } => RequestKind::UnregRepo,
            UnregServ { .. } => RequestKind::UnregServ,
            UnregVm { .. } => RequestKind::UnregVm,
            UpdateVmStatus { .. } => RequestKind::UpdateVmStatus,
        }
    }
}

impl From<IsRequest> for Request {
    fn from(r: IsRequest) -> Self {
        Request::Is(r)
    }
}

impl From<RmRequest> for Request {
    fn from(r: RmRequest) -> Self {
        Request::Rm(r)
    }
}

impl From<ScRequest> for Request {
    fn from(r: ScRequest) -> Self {
        Request::Sc(r)
    }
}

impl From<MmRequest> for Request {
    fn from(r: MmRequest) -> Self {
        Request::Mm(r)
    }
}

/// GETVM reply.
#[derive(Debug, Clone, PartialEq)]
pub struct VmDetails {
    pub s_id: u64,
    pub phy_id: u64,
    pub vm_local_id: String,
    pub virt_ip: String,
    pub status: ExecStatus,
}

/// GETVMMACHMNGR reply.
#[derive(Debug, Clone, PartialEq)]
pub struct VmLocation {
    pub phy_id: u64,
    pub phy_ip: String,
    pub mm_port: u16,
    pub vm_local_id: String,
}

/// LISTSERV entry, also the GETVMSERV reply.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceEntry {
    pub s_id: u64,
    pub name: String,
    pub rm_id: u64,
    pub rm_ip: String,
    pub rm_port: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyMachEntry {
    pub phy_id: u64,
    pub phy_ip: String,
    pub mm_port: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyMachStatusEntry {
    pub phy_id: u64,
    pub avail_cpu: f64,
    pub avail_ram: f64,
    pub avail_disk: f64,
    pub net_speed: Quantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepoEntry {
    pub repo_id: u64,
    pub ip_addr: String,
    pub port: u16,
    pub user_name: String,
    pub passwd: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmEntry {
    pub vm_id: u64,
    pub phy_id: u64,
    pub vm_local_id: String,
    pub virt_ip: String,
    pub status: ExecStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Id(u64),
    Version(String),
    Status(ExecStatus),
    PhyMachAddr { phy_ip: String, mm_port: u16 },
    Vm(VmDetails),
    VmLocation(VmLocation),
    Service(ServiceEntry),
}

impl Payload {
    pub fn shape(&self) -> ReplyShape {
        match self {
            Payload::Id(_) => ReplyShape::Id,
            Payload::Version(_) => ReplyShape::Version,
            Payload::Status(_) => ReplyShape::Status,
            Payload::PhyMachAddr { .. } => ReplyShape::PhyMachAddr,
            Payload::Vm(_) => ReplyShape::VmDetails,
            Payload::VmLocation(_) => ReplyShape::VmLocation,
            Payload::Service(_) => ReplyShape::Service,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Listing {
    PhyMach(Vec<PhyMachEntry>),
    PhyMachStatus(Vec<PhyMachStatusEntry>),
    Repo(Vec<RepoEntry>),
    Serv(Vec<ServiceEntry>),
    Vm(Vec<VmEntry>),
}

impl Listing {
    pub fn kind(&self) -> ListKind {
        match self {
            Listing::PhyMach(_) => ListKind::PhyMach,
            Listing::PhyMachStatus(_) => ListKind::PhyMachStatus,
            Listing::Repo(_) => ListKind::Repo,
            Listing::Serv(_) => ListKind::Serv,
            Listing::Vm(_) => ListKind::Vm,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Listing::PhyMach(v) => v.len(),
            Listing::PhyMachStatus(v) => v.len(),
            Listing::Repo(v) => v.len(),
            Listing::Serv(v) => v.len(),
            Listing::Vm(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn empty(kind: ListKind) -> Listing {
        match kind {
            ListKind::PhyMach => Listing::PhyMach(Vec::new()),
            ListKind::PhyMachStatus => Listing::PhyMachStatus(Vec::new()),
            ListKind::Repo => Listing::Repo(Vec::new()),
            ListKind::Serv => Listing::Serv(Vec::new()),
            ListKind::Vm => Listing::Vm(Vec::new()),
        }
    }
}

/// Any server reply: `OK <payload>`, a dot-terminated list, or `ERR <code>`.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Ok(Payload),
    List(Listing),
    Err(ErrorCode),
}

impl Reply {
    pub fn id(id: u64) -> Reply {
        Reply::Ok(Payload::Id(id))
    }

    pub fn err(code: ErrorCode) -> Reply {
        Reply::Err(code)
    }

    pub fn is_ok(&self) -> bool {
        !matches!(self, Reply::Err(_))
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        match self {
            Reply::Err(c) => Some(*c),
            _ => None,
        }
    }

    /// The integer payload of an `OK <id>` reply.
    pub fn as_id(&self) -> Option<u64> {
        match self {
            Reply::Ok(Payload::Id(id)) => Some(*id),
            _ => None,
        }
    }
}
