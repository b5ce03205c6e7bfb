//! Write-ahead log and snapshot files.
//!
//! WAL: one line per successful mutation, `LSN<TAB>REPLY<TAB>REQUEST`,
//! where REPLY and REQUEST are the wire lines.
//!
//! Snapshot, one record per line:
//!
//! ```text
//! TAAROA-IS-SNAPSHOT 1
//! LSN <lsn>
//! NEXT <machine> <repository> <service> <vm>
//! M <id> <address> <cpu_type> <n_cpu> <clock> <ram> <disk> <net> <max_vm> <user> <passwd> <vmm_user> <vmm_passwd> <port>
//! R <id> <address> <port> <user> <passwd>
//! S <id> <repository_id> <name> <req_disk>
//! V <id> <service_id> <phy_id> <local_id> <virt_ip> <cpu> <ram> <disk> <status> <unregistered>
//! END
//! ```
//!
//! Text fields are base64, `-` standing for the empty string.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::protocol::codec::{decode_b64, encode_b64, tokenize};
use crate::protocol::number::{parse_max_vm_number, render_max_vm_number};
use crate::protocol::{
    parse_integer, parse_quantity, parse_real, parse_reply, parse_request, render_real,
    Component, ExecStatus, IsRequest, Quantity, Reply, Request, Unit, UnitFamily,
};

use super::{
    IsDatabase, NextIds, PhysicalMachineRecord, RepositoryRecord, ServiceRecord,
    VirtualMachineRecord,
};

const MAGIC: &str = "TAAROA-IS-SNAPSHOT 1";

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

fn corrupt(line: usize, msg: impl Into<String>) -> SnapshotError {
    SnapshotError::Corrupt {
        line,
        msg: msg.into(),
    }
}

fn text_field(s: &str) -> String {
    if s.is_empty() {
        "-".to_owned()
    } else {
        encode_b64(s)
    }
}

fn parse_text_field(t: &str) -> Option<String> {
    if t == "-" {
        Some(String::new())
    } else {
        decode_b64(t).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalRecord {
    pub lsn: u64,
    pub reply: Reply,
    pub request: IsRequest,
}

/// Append-only mutation log.
pub struct Wal {
    path: PathBuf,
    file: File,
    next_lsn: u64,
}

impl Wal {
    /// Opens (creating if needed) the log at `path`; new records are
    /// numbered from `next_lsn`.
    pub fn open(path: &Path, next_lsn: u64) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_owned(),
            file,
            next_lsn,
        })
    }

    pub fn next_lsn(&self) -> u64 {
        self.next_lsn
    }

    pub fn append(&mut self, request: &IsRequest, reply: &Reply) -> io::Result<u64> {
        let lsn = self.next_lsn;
        let req = String::from_utf8(crate::protocol::render_request(&Request::Is(
            request.clone(),
        )))
        .expect("requests render as UTF-8");
        let rep = String::from_utf8(crate::protocol::render_reply(reply))
            .expect("replies render as UTF-8");
        writeln!(self.file, "{lsn}\t{}\t{}", rep.trim_end(), req.trim_end())?;
        self.file.sync_data()?;
        self.next_lsn += 1;
        Ok(lsn)
    }

    /// Empties the log after a snapshot has captured its contents.
    pub fn truncate(&mut self) -> io::Result<()> {
        self.file = File::create(&self.path)?;
        self.file.sync_all()?;
        Ok(())
    }

    /// Reads every record; a torn final line is ignored.
    pub fn read(path: &Path) -> Result<Vec<WalRecord>, SnapshotError> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
        let mut out = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            match parse_wal_line(line) {
                Some(rec) => out.push(rec),
                None if i + 1 == lines.len() => break,
                None => return Err(corrupt(i + 1, "unreadable WAL record")),
            }
        }
        Ok(out)
    }
}

fn parse_wal_line(line: &str) -> Option<WalRecord> {
    let mut parts = line.splitn(3, '\t');
    let lsn = parse_integer(parts.next()?).ok()?;
    let reply_text = parts.next()?;
    let Request::Is(request) =
        parse_request(parts.next()?.as_bytes(), Component::InformationService).ok()?
    else {
        return None;
    };
    let reply = parse_reply(reply_text.as_bytes(), request.kind()).ok()?;
    Some(WalRecord {
        lsn,
        reply,
        request,
    })
}

/// Renders the database as snapshot text tagged with `lsn`.
pub fn write_snapshot(db: &IsDatabase, lsn: u64) -> String {
    let mut out = String::new();
    let n = &db.next;
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "LSN {lsn}").unwrap();
    writeln!(
        out,
        "NEXT {} {} {} {}",
        n.machine, n.repository, n.service, n.vm
    )
    .unwrap();
    for m in db.machines.values() {
        writeln!(
            out,
            "M {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            m.id,
            text_field(&m.address),
            text_field(&m.cpu_type),
            m.n_cpu,
            m.cpu_clock,
            m.ram_size,
            m.disk_size,
            m.net_speed,
            render_max_vm_number(m.max_vm_number),
            text_field(&m.user_name),
            text_field(&m.user_password),
            text_field(&m.vmm_user_name),
            text_field(&m.vmm_user_password),
            m.mach_mngr_port
        )
        .unwrap();
    }
    for r in db.repositories.values() {
        writeln!(
            out,
            "R {} {} {} {} {}",
            r.id,
            text_field(&r.address),
            r.port,
            text_field(&r.user_name),
            text_field(&r.user_passwd)
        )
        .unwrap();
    }
    for s in db.services.values() {
        writeln!(
            out,
            "S {} {} {} {}",
            s.id,
            s.repository_id,
            text_field(&s.name),
            s.req_disk
        )
        .unwrap();
    }
    for v in db.vms.values() {
        writeln!(
            out,
            "V {} {} {} {} {} {} {} {} {} {}",
            v.id,
            v.service_id,
            v.phy_mach_id,
            text_field(&v.vm_local_id),
            text_field(&v.virt_ip),
            render_real(v.allocated_cpu),
            render_real(v.allocated_ram),
            render_real(v.allocated_disk),
            v.status.code(),
            u8::from(v.unregistered)
        )
        .unwrap();
    }
    out.push_str("END\n");
    out
}

struct Row<'a> {
    toks: std::vec::IntoIter<&'a str>,
    line: usize,
}

impl<'a> Row<'a> {
    fn next(&mut self) -> Result<&'a str, SnapshotError> {
        self.toks
            .next()
            .ok_or_else(|| corrupt(self.line, "missing field"))
    }
    fn int(&mut self) -> Result<u64, SnapshotError> {
        let t = self.next()?;
        parse_integer(t).map_err(|e| corrupt(self.line, e.to_string()))
    }
    fn port(&mut self) -> Result<u16, SnapshotError> {
        let v = self.int()?;
        u16::try_from(v).map_err(|_| corrupt(self.line, "port out of range"))
    }
    fn text(&mut self) -> Result<String, SnapshotError> {
        let t = self.next()?;
        parse_text_field(t).ok_or_else(|| corrupt(self.line, "bad text field"))
    }
    fn real(&mut self) -> Result<f64, SnapshotError> {
        let t = self.next()?;
        parse_real(t).map_err(|e| corrupt(self.line, e.to_string()))
    }
    fn quantity(&mut self, fam: UnitFamily, def: Unit) -> Result<Quantity, SnapshotError> {
        let t = self.next()?;
        parse_quantity(t, fam, def).map_err(|e| corrupt(self.line, e.to_string()))
    }
    fn done(mut self) -> Result<(), SnapshotError> {
        match self.toks.next() {
            None => Ok(()),
            Some(_) => Err(corrupt(self.line, "trailing field")),
        }
    }
}

/// Parses snapshot text back into a database and its LSN.
pub fn read_snapshot(text: &str) -> Result<(IsDatabase, u64), SnapshotError> {
    let mut db = IsDatabase::new();
    let mut lsn = None;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(corrupt(1, "not a snapshot")),
    }
    let mut ended = false;
    for (i, line) in lines {
        let line_no = i + 1;
        if ended {
            return Err(corrupt(line_no, "data after END"));
        }
        let toks = tokenize(line);
        let Some((&tag, rest)) = toks.split_first() else {
            return Err(corrupt(line_no, "blank line"));
        };
        let mut row = Row {
            toks: rest.to_vec().into_iter(),
            line: line_no,
        };
        match tag {
            "LSN" => lsn = Some(row.int()?),
            "NEXT" => {
                db.next = NextIds {
                    machine: row.int()?,
                    repository: row.int()?,
                    service: row.int()?,
                    vm: row.int()?,
                }
            }
            "M" => {
                let m = PhysicalMachineRecord {
                    id: row.int()?,
                    address: row.text()?,
                    cpu_type: row.text()?,
                    n_cpu: row.int()?,
                    cpu_clock: row.quantity(UnitFamily::Frequency, Unit::MHz)?,
                    ram_size: row.quantity(UnitFamily::Memory, Unit::MB)?,
                    disk_size: row.quantity(UnitFamily::Memory, Unit::MB)?,
                    net_speed: row.quantity(UnitFamily::NetSpeed, Unit::Mbps)?,
                    max_vm_number: parse_max_vm_number(row.next()?)
                        .map_err(|e| corrupt(line_no, e.to_string()))?,
                    user_name: row.text()?,
                    user_password: row.text()?,
                    vmm_user_name: row.text()?,
                    vmm_user_password: row.text()?,
                    mach_mngr_port: row.port()?,
                };
                db.machines.insert(m.id, m);
            }
            "R" => {
                let r = RepositoryRecord {
                    id: row.int()?,
                    address: row.text()?,
                    port: row.port()?,
                    user_name: row.text()?,
                    user_passwd: row.text()?,
                };
                db.repositories.insert(r.id, r);
            }
            "S" => {
                let s = ServiceRecord {
                    id: row.int()?,
                    repository_id: row.int()?,
                    name: row.text()?,
                    req_disk: row.quantity(UnitFamily::Memory, Unit::KB)?,
                };
                db.services.insert(s.id, s);
            }
            "V" => {
                let v = VirtualMachineRecord {
                    id: row.int()?,
                    service_id: row.int()?,
                    phy_mach_id: row.int()?,
                    vm_local_id: row.text()?,
                    virt_ip: row.text()?,
                    allocated_cpu: row.real()?,
                    allocated_ram: row.real()?,
                    allocated_disk: row.real()?,
                    status: ExecStatus::from_code(row.int()?)
                        .map_err(|e| corrupt(line_no, e.to_string()))?,
                    unregistered: match row.int()? {
                        0 => false,
                        1 => true,
                        _ => return Err(corrupt(line_no, "unregistered flag must be 0 or 1")),
                    },
                };
                db.vms.insert(v.id, v);
            }
            "END" => ended = true,
            other => return Err(corrupt(line_no, format!("unknown record {other:?}"))),
        }
        row.done()?;
    }
    if !ended {
        return Err(corrupt(0, "missing END"));
    }
    let lsn = lsn.ok_or_else(|| corrupt(0, "missing LSN"))?;
    db.audit().map_err(|msg| corrupt(0, msg))?;
    Ok((db, lsn))
}

/// Writes `text` to `path` atomically.
pub fn write_file_atomic(path: &Path, text: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
