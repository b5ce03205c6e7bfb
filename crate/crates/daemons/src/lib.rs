//! Settings and process plumbing shared by the four daemons.
//!
//! Every daemon reads an optional `KEY=value` file given with `--config`
//! and lets environment variables override it.

use std::path::PathBuf;
use std::sync::mpsc;

use clap::Parser;
use taaroa_core::config::{Config, ConfigError};
use taaroa_core::machine::MmConfig;
use taaroa_core::protocol::{parse_quantity, PhyMachRegistration, Quantity, Unit, UnitFamily};
use taaroa_core::repository::RmConfig;

pub const IS_PORT: u16 = 7070;
pub const RM_PORT: u16 = 7071;
pub const SC_PORT: u16 = 7072;
pub const MM_PORT: u16 = 7073;

#[derive(Debug, Parser)]
pub struct Args {
    /// KEY=value configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
}

/// Parses arguments, installs logging and loads the configuration.
pub fn init() -> Result<Config, ConfigError> {
    let args = Args::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    Config::from_env(args.config.as_deref())
}

/// Blocks until SIGINT or SIGTERM.
pub fn wait_for_signal() {
    let (tx, rx) = mpsc::channel();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })
    .expect("install signal handler");
    let _ = rx.recv();
}

fn is_addr(cfg: &Config) -> String {
    cfg.get_or("IS_ADDR", "127.0.0.1:7070").to_owned()
}

fn bind_addr(cfg: &Config, key: &str, default: u16) -> Result<String, ConfigError> {
    let port: u16 = cfg.parse_or(key, default)?;
    Ok(format!("{}:{port}", cfg.get_or("BIND_HOST", "0.0.0.0")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsSettings {
    pub listen: String,
    pub data_dir: Option<PathBuf>,
}

pub fn is_settings(cfg: &Config) -> Result<IsSettings, ConfigError> {
    Ok(IsSettings {
        listen: bind_addr(cfg, "IS_PORT", IS_PORT)?,
        data_dir: cfg.get("IS_DATA_DIR").map(PathBuf::from),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScSettings {
    pub listen: String,
    pub is_addr: String,
}

pub fn sc_settings(cfg: &Config) -> Result<ScSettings, ConfigError> {
    Ok(ScSettings {
        listen: bind_addr(cfg, "SC_PORT", SC_PORT)?,
        is_addr: is_addr(cfg),
    })
}

#[derive(Debug, Clone)]
pub struct RmSettings {
    pub listen: String,
    pub rm: RmConfig,
}

pub fn rm_settings(cfg: &Config) -> Result<RmSettings, ConfigError> {
    let port = cfg.parse_or("RM_PORT", RM_PORT)?;
    Ok(RmSettings {
        listen: bind_addr(cfg, "RM_PORT", RM_PORT)?,
        rm: RmConfig {
            is_addr: is_addr(cfg),
            advertise_ip: cfg.get_or("RM_IP", "127.0.0.1").to_owned(),
            advertise_port: port,
            user: cfg.get_or("RM_USER", "taaroa").to_owned(),
            passwd: cfg.get_or("RM_PASSWD", "taaroa").to_owned(),
            store_dir: PathBuf::from(cfg.require("RM_STORE_DIR")?),
            data_dir: cfg.get("RM_DATA_DIR").map(PathBuf::from),
        },
    })
}

fn quantity(
    cfg: &Config,
    key: &str,
    family: UnitFamily,
    unit: Unit,
    default: &str,
) -> Result<Quantity, ConfigError> {
    let v = cfg.get_or(key, default);
    parse_quantity(v, family, unit).map_err(|_| ConfigError::Invalid {
        key: key.to_owned(),
        value: v.to_owned(),
    })
}

#[derive(Debug, Clone)]
pub struct MmSettings {
    pub listen: String,
    pub mm: MmConfig,
    pub vm_dir: Option<PathBuf>,
}

pub fn mm_settings(cfg: &Config) -> Result<MmSettings, ConfigError> {
    let port = cfg.parse_or("MM_PORT", MM_PORT)?;
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get() as u64);
    let max_vm: i64 = cfg.parse_or("MM_MAX_VM", -1)?;
    let n_cpu = cfg.parse_or("MM_NCPU", cpus)?;
    if n_cpu == 0 || max_vm < -1 {
        let key = if n_cpu == 0 { "MM_NCPU" } else { "MM_MAX_VM" };
        return Err(ConfigError::Invalid {
            key: key.into(),
            value: cfg.get(key).unwrap_or_default().into(),
        });
    }
    let data_dir = cfg.get("MM_DATA_DIR").map(PathBuf::from);
    Ok(MmSettings {
        listen: bind_addr(cfg, "MM_PORT", MM_PORT)?,
        vm_dir: data_dir.as_ref().map(|d| d.join("vms")),
        mm: MmConfig {
            is_addr: is_addr(cfg),
            data_dir,
            machine: PhyMachRegistration {
                phy_ip: cfg.get_or("MM_IP", "127.0.0.1").to_owned(),
                cpu_type: cfg.get_or("MM_CPU_TYPE", std::env::consts::ARCH).to_owned(),
                n_cpu,
                cpu_clock: quantity(cfg, "MM_CPU_CLOCK", UnitFamily::Frequency, Unit::MHz, "2000")?,
                ram_size: Quantity::new(cfg.parse_or("MM_RAM_MB", 4096)?, Unit::MB),
                disk_size: Quantity::new(cfg.parse_or("MM_DISK_MB", 100_000)?, Unit::MB),
                net_speed: quantity(cfg, "MM_NET_SPEED", UnitFamily::NetSpeed, Unit::Mbps, "1000")?,
                max_vm_number: u64::try_from(max_vm).ok(),
                mach_username: cfg.get_or("MM_USER", "root").to_owned(),
                mach_password: cfg.get_or("MM_PASSWD", "taaroa").to_owned(),
                xm_username: cfg.get_or("MM_XM_USER", "xm").to_owned(),
                xm_password: cfg.get_or("MM_XM_PASSWD", "taaroa").to_owned(),
                mm_port: port,
            },
        },
    })
}
