//! The Repository Manager: an on-disk image store, staging of bundles to
//! Machine Managers, and status write-back to the Information Service.
//!
//! Store layout: one directory per service under the store root, named
//! after the service. Each holds the image files, a configuration file, and
//! a `manifest` file with the line `config=<configuration file name>`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use tracing::{info, warn};

use crate::net::{call_upstream, join_host_port, Service};
use crate::protocol::{
    Component, ErrorCode, ExecStatus, IsRequest, MmRequest, Payload, Quantity, Reply, Request,
    RmRequest, Unit, PROTOCOL_VERSION,
};

pub const MANIFEST: &str = "manifest";
const VMLIST_FILE: &str = "vmlist";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bundle has no {MANIFEST} file")]
    NoManifest,
    #[error("manifest lacks a config=<file> line")]
    BadManifest,
    #[error("configuration file {0:?} is missing")]
    NoConfig(String),
    #[error("bundle holds no image file")]
    NoImage,
    #[error("unsafe or non-regular archive entry {0:?}")]
    BadEntry(String),
}

/// Image files, configuration file and manifest of one service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBundle {
    /// `(file name, content)`, sorted by name.
    pub files: Vec<(String, Vec<u8>)>,
}

impl ImageBundle {
    pub fn new(mut files: Vec<(String, Vec<u8>)>) -> Result<Self, BundleError> {
        files.sort_by(|a, b| a.0.cmp(&b.0));
        let bundle = Self { files };
        bundle.validate()?;
        Ok(bundle)
    }

    fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    pub fn config_name(&self) -> Result<String, BundleError> {
        let manifest = self.file(MANIFEST).ok_or(BundleError::NoManifest)?;
        let text = std::str::from_utf8(manifest).map_err(|_| BundleError::BadManifest)?;
        text.lines()
            .filter_map(|l| l.trim().strip_prefix("config="))
            .map(|v| v.trim().to_owned())
            .find(|v| !v.is_empty())
            .ok_or(BundleError::BadManifest)
    }

    fn validate(&self) -> Result<(), BundleError> {
        let config = self.config_name()?;
        if self.file(&config).is_none() {
            return Err(BundleError::NoConfig(config));
        }
        if !self
            .files
            .iter()
            .any(|(n, _)| n != MANIFEST && *n != config)
        {
            return Err(BundleError::NoImage);
        }
        Ok(())
    }

    /// Sum of file sizes.
    pub fn total_bytes(&self) -> u64 {
        self.files.iter().map(|(_, c)| c.len() as u64).sum()
    }

    /// Total size rounded up to whole kilobytes.
    pub fn req_disk(&self) -> Quantity {
        Quantity::new(self.total_bytes().div_ceil(1000), Unit::KB)
    }

    /// Reads the regular files at the top level of `dir`.
    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let mut files = Vec::new();
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_file() {
                continue;
            }
            let Ok(name) = entry.file_name().into_string() else {
                warn!(path = %entry.path().display(), "skipping non-UTF-8 file name");
                continue;
            };
            files.push((name, fs::read(entry.path())?));
        }
        Self::new(files)
    }

    /// Uncompressed tar archive of the bundle.
    pub fn to_tar(&self) -> Vec<u8> {
        let mut builder = tar::Builder::new(Vec::new());
        for (name, content) in &self.files {
            let mut header = tar::Header::new_gnu();
            header.set_size(content.len() as u64);
            header.set_mode(0o644);
            header.set_entry_type(tar::EntryType::Regular);
            header.set_cksum();
            builder
                .append_data(&mut header, name, content.as_slice())
                .expect("writing to memory");
        }
        builder.into_inner().expect("writing to memory")
    }

    /// Parses a tar archive, accepting only plain top-level file names.
    pub fn from_tar(bytes: &[u8]) -> Result<Self, BundleError> {
        let mut archive = tar::Archive::new(bytes);
        let mut files = Vec::new();
        for entry in archive.entries()? {
            let mut entry = entry?;
            let path = entry.path()?.into_owned();
            let shown = path.display().to_string();
            let name = match (path.components().count(), path.to_str()) {
                (1, Some(n)) if !n.is_empty() && n != "." && n != ".." && !n.contains('/') => {
                    n.to_owned()
                }
                _ => return Err(BundleError::BadEntry(shown)),
            };
            if !entry.header().entry_type().is_file() {
                return Err(BundleError::BadEntry(shown));
            }
            let mut content = Vec::with_capacity(entry.size() as usize);
            entry.read_to_end(&mut content)?;
            files.push((name, content));
        }
        Self::new(files)
    }
}

/// A service directory found in the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreEntry {
    pub name: String,
    pub path: PathBuf,
    pub req_disk: Quantity,
}

/// Lists valid service directories under `root`, sorted by name. Invalid
/// ones are logged and skipped.
pub fn scan_store(root: &Path) -> io::Result<Vec<StoreEntry>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let path = entry.path();
        let Ok(name) = entry.file_name().into_string() else {
            warn!(path = %path.display(), "skipping non-UTF-8 service directory");
            continue;
        };
        match ImageBundle::load(&path) {
            Ok(b) => out.push(StoreEntry {
                name,
                path,
                req_disk: b.req_disk(),
            }),
            Err(e) => warn!(path = %path.display(), "skipping invalid bundle: {e}"),
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RmConfig {
    pub is_addr: String,
    /// Address registered with the IS.
    pub advertise_ip: String,
    pub advertise_port: u16,
    pub user: String,
    pub passwd: String,
    pub store_dir: PathBuf,
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum JoinError {
    #[error("cannot scan image store: {0}")]
    Store(#[from] io::Error),
    #[error("information service refused {what}: {code}")]
    Refused { what: &'static str, code: ErrorCode },
    #[error("cannot reach the information service")]
    Unreachable,
}

pub struct RepositoryManager {
    cfg: RmConfig,
    rm_id: u64,
    vmlist: RwLock<BTreeMap<u64, PathBuf>>,
    staging: Mutex<HashMap<u64, Arc<Mutex<()>>>>,
}

fn expect_id(reply: Result<Reply, ErrorCode>, what: &'static str) -> Result<u64, JoinError> {
    match reply {
        Ok(Reply::Ok(Payload::Id(id))) => Ok(id),
        Ok(Reply::Err(code)) => Err(JoinError::Refused { what, code }),
        Ok(_) => Err(JoinError::Refused {
            what,
            code: ErrorCode::UPSTREAM_FAILURE,
        }),
        Err(_) => Err(JoinError::Unreachable),
    }
}

impl RepositoryManager {
    /// Registers the repository and every service in the store.
    pub fn join(cfg: RmConfig) -> Result<Arc<Self>, JoinError> {
        let entries = scan_store(&cfg.store_dir)?;
        let rm_id = expect_id(
            call_upstream(
                &cfg.is_addr,
                IsRequest::RegRepo {
                    ip_addr: cfg.advertise_ip.clone(),
                    port: cfg.advertise_port,
                    user_name: cfg.user.clone(),
                    passwd: cfg.passwd.clone(),
                },
            ),
            "REGREPO",
        )?;
        let mut vmlist = BTreeMap::new();
        for e in entries {
            let s_id = expect_id(
                call_upstream(
                    &cfg.is_addr,
                    IsRequest::RegServ {
                        rm_id,
                        name: e.name.clone(),
                        req_disk: e.req_disk,
                    },
                ),
                "REGSERV",
            )?;
            info!(s_id, name = %e.name, req_disk = %e.req_disk, "service registered");
            vmlist.insert(s_id, e.path);
        }
        let rm = Arc::new(Self {
            cfg,
            rm_id,
            vmlist: RwLock::new(vmlist),
            staging: Mutex::default(),
        });
        rm.persist_vmlist()?;
        info!(rm_id, services = rm.vmlist().len(), "repository registered");
        Ok(rm)
    }

    /// Unregisters the repository (and, by cascade, its services).
    pub fn leave(&self) -> Result<(), ErrorCode> {
        match call_upstream(&self.cfg.is_addr, IsRequest::UnregRepo { rm_id: self.rm_id })? {
            Reply::Err(code) => Err(code),
            _ => Ok(()),
        }
    }

    pub fn rm_id(&self) -> u64 {
        self.rm_id
    }

    pub fn vmlist(&self) -> BTreeMap<u64, PathBuf> {
        self.vmlist.read().unwrap().clone()
    }

    fn persist_vmlist(&self) -> io::Result<()> {
        let Some(dir) = &self.cfg.data_dir else {
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        let mut text = String::new();
        for (sid, path) in self.vmlist.read().unwrap().iter() {
            text.push_str(&format!("{sid}\t{}\n", path.display()));
        }
        let tmp = dir.join("vmlist.tmp");
        fs::write(&tmp, text)?;
        fs::rename(tmp, dir.join(VMLIST_FILE))
    }

    fn staging_lock(&self, s_id: u64) -> Arc<Mutex<()>> {
        self.staging
            .lock()
            .unwrap()
            .entry(s_id)
            .or_default()
            .clone()
    }

    fn submit_vm(&self, s_id: u64, phy_id: u64) -> Result<u64, ErrorCode> {
        let path = self
            .vmlist
            .read()
            .unwrap()
            .get(&s_id)
            .cloned()
            .ok_or(ErrorCode::UNKNOWN_SERVICE)?;
        let mm = match call_upstream(&self.cfg.is_addr, IsRequest::GetPhyMach { phy_id })? {
            Reply::Ok(Payload::PhyMachAddr { phy_ip, mm_port }) => join_host_port(&phy_ip, mm_port),
            Reply::Err(ErrorCode::UNKNOWN_PHYSICAL_MACHINE) => {
                return Err(ErrorCode::UNKNOWN_PHYSICAL_MACHINE)
            }
            _ => return Err(ErrorCode::UPSTREAM_FAILURE),
        };
        let lock = self.staging_lock(s_id);
        let _staging = lock.lock().unwrap();
        let image = ImageBundle::load(&path)
            .map_err(|e| {
                warn!(s_id, path = %path.display(), "cannot read bundle: {e}");
                ErrorCode::INTERNAL_ERROR
            })?
            .to_tar();
        let vm_id = match call_upstream(&mm, MmRequest::StartVm { s_id, image })? {
            Reply::Ok(Payload::Id(id)) => id,
            other => {
                warn!(s_id, phy_id, ?other, "machine manager refused the VM");
                return Err(ErrorCode::UPSTREAM_FAILURE);
            }
        };
        self.write_status(vm_id, ExecStatus::Running)?;
        Ok(vm_id)
    }

    fn stop_vm(&self, vm_id: u64) -> Result<u64, ErrorCode> {
        let loc = match call_upstream(&self.cfg.is_addr, IsRequest::GetVmMachMngr { vm_id })? {
            Reply::Ok(Payload::VmLocation(loc)) => loc,
            Reply::Err(ErrorCode::UNKNOWN_VM) => return Err(ErrorCode::UNKNOWN_VM),
            _ => return Err(ErrorCode::UPSTREAM_FAILURE),
        };
        let mm = join_host_port(&loc.phy_ip, loc.mm_port);
        match call_upstream(
            &mm,
            MmRequest::StopVm {
                vm_local_id: loc.vm_local_id,
            },
        )? {
            Reply::Ok(_) => {}
            Reply::Err(ErrorCode::UNKNOWN_VM) => return Err(ErrorCode::UNKNOWN_VM),
            _ => return Err(ErrorCode::UPSTREAM_FAILURE),
        }
        self.write_status(vm_id, ExecStatus::Stopped)?;
        Ok(vm_id)
    }

    fn write_status(&self, vm_id: u64, status: ExecStatus) -> Result<(), ErrorCode> {
        match call_upstream(
            &self.cfg.is_addr,
            IsRequest::UpdateVmStatus { vm_id, status },
        )? {
            Reply::Ok(_) => Ok(()),
            other => {
                warn!(vm_id, %status, ?other, "status write-back refused");
                Err(ErrorCode::UPSTREAM_FAILURE)
            }
        }
    }
}

impl Service for RepositoryManager {
    fn component(&self) -> Component {
        Component::RepositoryManager
    }

    fn handle(&self, req: Request) -> Reply {
        let result = match req {
            Request::Rm(RmRequest::SrvProtoVer) => {
                return Reply::Ok(Payload::Version(PROTOCOL_VERSION.to_owned()))
            }
            Request::Rm(RmRequest::SubmitVm { s_id, phy_id }) => self.submit_vm(s_id, phy_id),
            Request::Rm(RmRequest::StopVm { vm_id }) => self.stop_vm(vm_id),
            _ => Err(ErrorCode::INTERNAL_ERROR),
        };
        match result {
            Ok(id) => Reply::id(id),
            Err(code) => Reply::Err(code),
        }
    }
}

/// Writes a service directory usable as a store entry.
pub fn write_service_dir(
    root: &Path,
    name: &str,
    images: &[(&str, &[u8])],
    config: (&str, &[u8]),
) -> io::Result<PathBuf> {
    let dir = root.join(name);
    fs::create_dir_all(&dir)?;
    for (file, content) in images {
        fs::write(dir.join(file), content)?;
    }
    fs::write(dir.join(config.0), config.1)?;
    fs::write(dir.join(MANIFEST), format!("config={}\n", config.0))?;
    Ok(dir)
}
