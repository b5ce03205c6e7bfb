//! The `taaroa` command: one protocol request per invocation.
//!
//! Exit status is 0 when the reply was OK, 1 on an ERR reply and 2 when the
//! server could not be reached or answered garbage.

use std::io::Write;

use clap::{Parser, Subcommand};
use taaroa_core::net::{call, CallError};
use taaroa_core::protocol::codec::render_entry_lines;
use taaroa_core::protocol::{
    render_real, IsRequest, Listing, Payload, Reply, Request, ScRequest,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERR_REPLY: i32 = 1;
pub const EXIT_UNREACHABLE: i32 = 2;

fn host_port(s: &str) -> Result<String, String> {
    match s.rsplit_once(':') {
        Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => Ok(s.to_owned()),
        _ => Err(format!("expected HOST:PORT, got {s:?}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "taaroa", version, about = "Submit and manage services on a TAAROA grid")]
pub struct Cli {
    /// Information Service address.
    #[arg(long, env = "TAAROA_IS", default_value = "127.0.0.1:7070", value_parser = host_port)]
    pub is: String,
    /// Scheduler address.
    #[arg(long, env = "TAAROA_SC", default_value = "127.0.0.1:7072", value_parser = host_port)]
    pub sc: String,
    /// One line per record, in wire field order.
    #[arg(long, global = true)]
    pub porcelain: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List registered services.
    ListServices,
    /// List physical machines with their free resources.
    ListMachines,
    /// Submit a service; prints the new VM id.
    Submit { s_id: u64 },
    /// Print the execution status of a VM.
    Status { vm_id: u64 },
    /// Stop a running VM.
    Stop { vm_id: u64 },
}

impl Command {
    fn request(&self) -> Request {
        match *self {
            Command::ListServices => IsRequest::ListServ.into(),
            Command::ListMachines => IsRequest::ListPhyMachStatus.into(),
            Command::Submit { s_id } => ScRequest::SubmitServ { s_id }.into(),
            Command::Status { vm_id } => IsRequest::GetVmStatus { vm_id }.into(),
            Command::Stop { vm_id } => ScRequest::StopServ { vm_id }.into(),
        }
    }
}

fn table(out: &mut impl Write, rows: &[Vec<String>]) -> std::io::Result<()> {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end())?;
    }
    Ok(())
}

fn human(out: &mut impl Write, cmd: &Command, reply: &Reply) -> std::io::Result<()> {
    match reply {
        Reply::List(Listing::Serv(v)) if v.is_empty() => writeln!(out, "no services"),
        Reply::List(Listing::Serv(v)) => {
            let mut rows = vec![vec!["ID".into(), "NAME".into(), "RM".into(), "RM_ADDR".into()]];
            rows.extend(v.iter().map(|s| {
                vec![
                    s.s_id.to_string(),
                    s.name.clone(),
                    s.rm_id.to_string(),
                    format!("{}:{}", s.rm_ip, s.rm_port),
                ]
            }));
            table(out, &rows)
        }
        Reply::List(Listing::PhyMachStatus(v)) if v.is_empty() => writeln!(out, "no machines"),
        Reply::List(Listing::PhyMachStatus(v)) => {
            let mut rows = vec![vec![
                "ID".into(),
                "AVAIL_CPU".into(),
                "AVAIL_RAM".into(),
                "AVAIL_DISK".into(),
                "NET_SPEED".into(),
            ]];
            rows.extend(v.iter().map(|m| {
                vec![
                    m.phy_id.to_string(),
                    render_real(m.avail_cpu),
                    render_real(m.avail_ram),
                    render_real(m.avail_disk),
                    m.net_speed.to_string(),
                ]
            }));
            table(out, &rows)
        }
        Reply::Ok(Payload::Status(s)) => writeln!(out, "{s}"),
        Reply::Ok(Payload::Id(id)) => match cmd {
            Command::Stop { .. } => writeln!(out, "stopped VM {id}"),
            _ => writeln!(out, "{id}"),
        },
        other => writeln!(out, "{other:?}"),
    }
}

fn porcelain(out: &mut impl Write, reply: &Reply) -> std::io::Result<()> {
    match reply {
        Reply::List(l) => render_entry_lines(l)
            .iter()
            .try_for_each(|line| writeln!(out, "{line}")),
        Reply::Ok(Payload::Status(s)) => writeln!(out, "{s}"),
        Reply::Ok(Payload::Id(id)) => writeln!(out, "{id}"),
        other => writeln!(out, "{other:?}"),
    }
}

/// Runs one command and returns the process exit status.
pub fn run(cli: &Cli, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let req = cli.command.request();
    let addr = match req {
        Request::Sc(_) => &cli.sc,
        _ => &cli.is,
    };
    match call(addr, req) {
        Ok(Reply::Err(code)) => {
            let _ = writeln!(err, "error: {code}");
            EXIT_ERR_REPLY
        }
        Ok(reply) => {
            let written = if cli.porcelain {
                porcelain(out, &reply)
            } else {
                human(out, &cli.command, &reply)
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_UNREACHABLE
                }
            }
        }
        Err(e @ CallError::Connect { .. }) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_UNREACHABLE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {addr}: {e}");
            EXIT_UNREACHABLE
        }
    }
}
