//! Text codec: one message per LF-terminated line, fields separated by
//! blanks, list replies closed by a `.` line, and STARTVM carrying a
//! length-prefixed body.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use super::message::*;
use super::number::{
    parse_integer, parse_max_vm_number, parse_real, render_integer, render_max_vm_number,
    render_real,
};
use super::quantity::{parse_quantity, render_quantity, Unit, UnitFamily};
use super::{ErrorCode, ExecStatus, ProtocolError, Quantity};

pub fn encode_b64(s: &str) -> String {
    STANDARD.encode(s.as_bytes())
}

pub fn decode_b64(token: &str) -> Result<String, ProtocolError> {
    let bytes = STANDARD
        .decode(token)
        .map_err(|_| ProtocolError::InvalidBase64(token.to_owned()))?;
    String::from_utf8(bytes).map_err(|_| ProtocolError::InvalidBase64(token.to_owned()))
}

fn is_blank(c: char) -> bool {
    c == ' ' || c == '\t'
}

/// Splits a line on runs of spaces and tabs.
pub fn tokenize(line: &str) -> Vec<&str> {
    line.split(is_blank).filter(|t| !t.is_empty()).collect()
}

fn strip_cr(line: &[u8]) -> &[u8] {
    line.strip_suffix(b"\r").unwrap_or(line)
}

#[derive(Clone, Copy)]
enum Ctx {
    Request,
    Reply,
}

impl Ctx {
    fn error(self, msg: String) -> ProtocolError {
        match self {
            Ctx::Request => ProtocolError::MalformedRequest(msg),
            Ctx::Reply => ProtocolError::MalformedReply(msg),
        }
    }
}

/// Positional field reader over one tokenized line.
struct Fields<'a> {
    toks: std::slice::Iter<'a, &'a str>,
    what: &'a str,
    ctx: Ctx,
}

impl<'a> Fields<'a> {
    fn new(toks: &'a [&'a str], what: &'a str, ctx: Ctx) -> Self {
        Self {
            toks: toks.iter(),
            what,
            ctx,
        }
    }

    fn fail(&self, field: &str, err: impl std::fmt::Display) -> ProtocolError {
        self.ctx.error(format!("{}: field {field}: {err}", self.what))
    }

    fn token(&mut self, field: &str) -> Result<&'a str, ProtocolError> {
        match self.toks.next() {
            Some(t) => Ok(t),
            None => Err(self.fail(field, "missing")),
        }
    }

    /// A bare string token, CR excluded.
    fn string(&mut self, field: &str) -> Result<String, ProtocolError> {
        let t = self.token(field)?;
        if t.contains('\r') {
            return Err(self.fail(field, "carriage return in token"));
        }
        Ok(t.to_owned())
    }

    fn int(&mut self, field: &str) -> Result<u64, ProtocolError> {
        let t = self.token(field)?;
        parse_integer(t).map_err(|e| self.fail(field, e))
    }

    fn port(&mut self, field: &str) -> Result<u16, ProtocolError> {
        let v = self.int(field)?;
        u16::try_from(v).map_err(|_| self.fail(field, format!("port {v} out of range")))
    }

    fn real(&mut self, field: &str) -> Result<f64, ProtocolError> {
        let t = self.token(field)?;
        parse_real(t).map_err(|e| self.fail(field, e))
    }

    fn b64(&mut self, field: &str) -> Result<String, ProtocolError> {
        let t = self.token(field)?;
        decode_b64(t).map_err(|e| self.fail(field, e))
    }

    fn status(&mut self, field: &str) -> Result<ExecStatus, ProtocolError> {
        let v = self.int(field)?;
        ExecStatus::from_code(v).map_err(|e| self.fail(field, e))
    }

    fn quantity(
        &mut self,
        field: &str,
        family: UnitFamily,
        default_unit: Unit,
    ) -> Result<Quantity, ProtocolError> {
        let t = self.token(field)?;
        parse_quantity(t, family, default_unit).map_err(|e| self.fail(field, e))
    }

    fn max_vm(&mut self, field: &str) -> Result<Option<u64>, ProtocolError> {
        let t = self.token(field)?;
        parse_max_vm_number(t).map_err(|e| self.fail(field, e))
    }

    fn finish(mut self) -> Result<(), ProtocolError> {
        match self.toks.next() {
            None => Ok(()),
            Some(extra) => Err(self
                .ctx
                .error(format!("{}: unexpected trailing field {extra:?}", self.what))),
        }
    }
}

/// Splits `bytes` into the first line (without LF or CR) and the rest.
fn first_line(bytes: &[u8]) -> (&[u8], &[u8]) {
    match bytes.iter().position(|b| *b == b'\n') {
        Some(pos) => (strip_cr(&bytes[..pos]), &bytes[pos + 1..]),
        None => (strip_cr(bytes), &[]),
    }
}

fn utf8_line(line: &[u8], ctx: Ctx) -> Result<&str, ProtocolError> {
    std::str::from_utf8(line).map_err(|_| ctx.error("line is not valid UTF-8".to_owned()))
}

/// Body length announced by a `STARTVM S_ID NBYTES` header line, if `line`
/// is one.
pub fn startvm_body_len(line: &[u8]) -> Option<u64> {
    let line = std::str::from_utf8(strip_cr(line)).ok()?;
    let toks = tokenize(line);
    match toks.as_slice() {
        ["STARTVM", s_id, nbytes] => {
            parse_integer(s_id).ok()?;
            parse_integer(nbytes).ok()
        }
        _ => None,
    }
}

/// Parses one framed request addressed to `server`.
///
/// `bytes` holds a single line, optionally LF-terminated; for STARTVM the
/// header line is followed by exactly NBYTES octets of body.
pub fn parse_request(bytes: &[u8], server: Component) -> Result<Request, ProtocolError> {
    let (line, rest) = first_line(bytes);
    let text = utf8_line(line, Ctx::Request)?;
    let toks = tokenize(text);
    let Some((&keyword, args)) = toks.split_first() else {
        return Err(ProtocolError::MalformedRequest("empty request line".into()));
    };
    let kind = RequestKind::lookup(server, keyword)
        .ok_or_else(|| ProtocolError::UnknownCommand(keyword.to_owned()))?;
    let mut f = Fields::new(args, keyword, Ctx::Request);

    if kind == RequestKind::MmStartVm {
        let s_id = f.int("S_ID")?;
        let nbytes = f.int("NBYTES")?;
        f.finish()?;
        if rest.len() as u64 != nbytes {
            return Err(ProtocolError::MalformedRequest(format!(
                "STARTVM: announced {nbytes} body octets, got {}",
                rest.len()
            )));
        }
        return Ok(Request::Mm(MmRequest::StartVm {
            s_id,
            image: rest.to_vec(),
        }));
    }
    if !rest.is_empty() {
        return Err(ProtocolError::MalformedRequest(format!(
            "{keyword}: data after the request line"
        )));
    }

    use RequestKind as K;
    let req = match kind {
        K::GetPhyMach => IsRequest::GetPhyMach {
            phy_id: f.int("PHY_ID")?,
        }
        .into(),
        K::GetVm => IsRequest::GetVm {
            vm_id: f.int("VM_ID")?,
        }
        .into(),
        K::GetVmMachMngr => IsRequest::GetVmMachMngr {
            vm_id: f.int("VM_ID")?,
        }
        .into(),
        K::GetVmServ => IsRequest::GetVmServ {
            vm_id: f.int("VM_ID")?,
        }
        .into(),
        K::GetVmStatus => IsRequest::GetVmStatus {
            vm_id: f.int("VM_ID")?,
        }
        .into(),
        K::ListPhyMach => IsRequest::ListPhyMach.into(),
        K::ListPhyMachStatus => IsRequest::ListPhyMachStatus.into(),
        K::ListRepo => IsRequest::ListRepo.into(),
        K::ListServ => IsRequest::ListServ.into(),
        K::ListVm => IsRequest::ListVm {
            s_id: f.int("S_ID")?,
        }
        .into(),
        K::RegPhyMach => IsRequest::RegPhyMach(PhyMachRegistration {
            phy_ip: f.string("PHY_IP")?,
            cpu_type: f.b64("CPUTYPE")?,
            n_cpu: f.int("NCPU")?,
            cpu_clock: f.quantity("CPUCLOCK", UnitFamily::Frequency, Unit::MHz)?,
            ram_size: f.quantity("RAMSIZE", UnitFamily::Memory, Unit::MB)?,
            disk_size: f.quantity("DISKSIZE", UnitFamily::Memory, Unit::MB)?,
            net_speed: f.quantity("NETSPEED", UnitFamily::NetSpeed, Unit::Mbps)?,
            max_vm_number: f.max_vm("MAX_VM_NUMBER")?,
            mach_username: f.b64("MACH_USERNAME")?,
            mach_password: f.b64("MACH_PASSWORD")?,
            xm_username: f.b64("XM_USERNAME")?,
            xm_password: f.b64("XM_PASSWORD")?,
            mm_port: f.port("MM_PORT")?,
        })
        .into(),
        K::RegRepo => IsRequest::RegRepo {
            ip_addr: f.string("IP_ADDR")?,
            port: f.port("PORT")?,
            user_name: f.b64("USER_NAME")?,
            passwd: f.b64("PASSWD")?,
        }
        .into(),
        K::RegServ => IsRequest::RegServ {
            rm_id: f.int("RM_ID")?,
            name: f.b64("NAME")?,
            req_disk: f.quantity("REQ_DISK", UnitFamily::Memory, Unit::KB)?,
        }
        .into(),
        K::RegVm => IsRequest::RegVm(VmRegistration {
            s_id: f.int("S_ID")?,
            phy_id: f.int("PHY_ID")?,
            vm_local_id: f.string("VM_LOCAL_ID")?,
            virt_ip: f.string("VIRT_IP")?,
            allocated_cpu: f.real("ALLOCATED_CPU")?,
            allocated_ram: f.real("ALLOCATED_RAM")?,
            allocated_disk: f.real("ALLOCATED_DISK")?,
        })
        .into(),
        K::IsSrvProtoVer => IsRequest::SrvProtoVer.into(),
        K::UnregPhyMach => IsRequest::UnregPhyMach {
            phy_id: f.int("PHY_ID")?,
        }
        .into(),
        K::UnregRepo => IsRequest::UnregRepo {
            rm_id: f.int("RM_ID")?,
        }
        .into(),
        K::UnregServ => IsRequest::UnregServ {
            s_id: f.int("S_ID")?,
        }
        .into(),
        K::UnregVm => IsRequest::UnregVm {
            vm_id: f.int("VM_ID")?,
        }
        .into(),
        K::UpdateVmStatus => IsRequest::UpdateVmStatus {
            vm_id: f.int("VM_ID")?,
            status: f.status("STATUS")?,
        }
        .into(),
        K::RmSrvProtoVer => RmRequest::SrvProtoVer.into(),
        K::RmStopVm => RmRequest::StopVm {
            vm_id: f.int("VM_ID")?,
        }
        .into(),
        K::RmSubmitVm => RmRequest::SubmitVm {
            s_id: f.int("S_ID")?,
            phy_id: f.int("PHY_ID")?,
        }
        .into(),
        K::ScSrvProtoVer => ScRequest::SrvProtoVer.into(),
        K::ScStopServ => ScRequest::StopServ {
            vm_id: f.int("VM_ID")?,
        }
        .into(),
        K::ScSubmitServ => ScRequest::SubmitServ {
            s_id: f.int("S_ID")?,
        }
        .into(),
        K::MmSrvProtoVer => MmRequest::SrvProtoVer.into(),
        K::MmStopVm => MmRequest::StopVm {
            vm_local_id: f.string("VM_LOCAL_ID")?,
        }
        .into(),
        K::MmStartVm => unreachable!("handled above"),
    };
    f.finish()?;
    Ok(req)
}

fn line(tokens: &[String]) -> Vec<u8> {
    let mut out = tokens.join(" ").into_bytes();
    out.push(b'\n');
    out
}

fn request_tokens(req: &Request) -> Vec<String> {
    let kw = req.kind().keyword().to_owned();
    let int = render_integer;
    let mut t = vec![kw];
    match req {
        Request::Is(r) => match r {
            IsRequest::GetPhyMach { phy_id } => t.push(int(*phy_id)),
            IsRequest::GetVm { vm_id }
            | IsRequest::GetVmMachMngr { vm_id }
            | IsRequest::GetVmServ { vm_id }
            | IsRequest::GetVmStatus { vm_id }
            | IsRequest::UnregVm { vm_id } => t.push(int(*vm_id)),
            IsRequest::ListPhyMach
            | IsRequest::ListPhyMachStatus
            | IsRequest::ListRepo
            | IsRequest::ListServ
            | IsRequest::SrvProtoVer => {}
            IsRequest::ListVm { s_id } | IsRequest::UnregServ { s_id } => t.push(int(*s_id)),
            IsRequest::RegPhyMach(m) => t.extend([
                m.phy_ip.clone(),
                encode_b64(&m.cpu_type),
                int(m.n_cpu),
                render_quantity(&m.cpu_clock),
                render_quantity(&m.ram_size),
                render_quantity(&m.disk_size),
                render_quantity(&m.net_speed),
                render_max_vm_number(m.max_vm_number),
                encode_b64(&m.mach_username),
                encode_b64(&m.mach_password),
                encode_b64(&m.xm_username),
                encode_b64(&m.xm_password),
                int(m.mm_port.into()),
            ]),
            IsRequest::RegRepo {
                ip_addr,
                port,
                user_name,
                passwd,
            } => t.extend([
                ip_addr.clone(),
                int((*port).into()),
                encode_b64(user_name),
                encode_b64(passwd),
            ]),
            IsRequest::RegServ {
                rm_id,
                name,
                req_disk,
            } => t.extend([int(*rm_id), encode_b64(name), render_quantity(req_disk)]),
            IsRequest::RegVm(v) => t.extend([
                int(v.s_id),
                int(v.phy_id),
                v.vm_local_id.clone(),
                v.virt_ip.clone(),
                render_real(v.allocated_cpu),
                render_real(v.allocated_ram),
                render_real(v.allocated_disk),
            ]),
            IsRequest::UnregPhyMach { phy_id } => t.push(int(*phy_id)),
            IsRequest::UnregRepo { rm_id } => t.push(int(*rm_id)),
            IsRequest::UpdateVmStatus { vm_id, status } => {
                t.extend([int(*vm_id), int(status.code().into())])
            }
        },
        Request::Rm(r) => match r {
            RmRequest::SrvProtoVer => {}
            RmRequest::StopVm { vm_id } => t.push(int(*vm_id)),
            RmRequest::SubmitVm { s_id, phy_id } => t.extend([int(*s_id), int(*phy_id)]),
        },
        Request::Sc(r) => match r {
            ScRequest::SrvProtoVer => {}
            ScRequest::StopServ { vm_id } => t.push(int(*vm_id)),
            ScRequest::SubmitServ { s_id } => t.push(int(*s_id)),
        },
        Request::Mm(r) => match r {
            MmRequest::SrvProtoVer => {}
            MmRequest::StartVm { s_id, image } => {
                t.extend([int(*s_id), int(image.len() as u64)])
            }
            MmRequest::StopVm { vm_local_id } => t.push(vm_local_id.clone()),
        },
    }
    t
}

/// Renders `req` as its framed wire form (LF-terminated; STARTVM followed
/// by its body).
pub fn render_request(req: &Request) -> Vec<u8> {
    let mut out = line(&request_tokens(req));
    if let Request::Mm(MmRequest::StartVm { image, .. }) = req {
        out.extend_from_slice(image);
    }
    out
}

/// Header line only (no body), for logs and traces.
pub fn render_request_header(req: &Request) -> String {
    request_tokens(req).join(" ")
}

fn parse_payload(args: &[&str], shape: ReplyShape) -> Result<Payload, ProtocolError> {
    let mut f = Fields::new(args, "OK", Ctx::Reply);
    let payload = match shape {
        ReplyShape::Id => Payload::Id(f.int("ID")?),
        ReplyShape::Version => Payload::Version(f.string("VERSION")?),
        ReplyShape::Status => Payload::Status(f.status("STATUS")?),
        ReplyShape::PhyMachAddr => Payload::PhyMachAddr {
            phy_ip: f.string("PHY_IP")?,
            mm_port: f.port("MM_PORT")?,
        },
        ReplyShape::VmDetails => Payload::Vm(VmDetails {
            s_id: f.int("S_ID")?,
            phy_id: f.int("PHY_ID")?,
            vm_local_id: f.string("VM_LOCAL_ID")?,
            virt_ip: f.string("VIRT_IP")?,
            status: f.status("STATUS")?,
        }),
        ReplyShape::VmLocation => Payload::VmLocation(VmLocation {
            phy_id: f.int("PHY_ID")?,
            phy_ip: f.string("PHY_IP")?,
            mm_port: f.port("MM_PORT")?,
            vm_local_id: f.string("VM_LOCAL_ID")?,
        }),
        ReplyShape::Service => Payload::Service(parse_service(&mut f)?),
        ReplyShape::List(_) => unreachable!("lists are parsed separately"),
    };
    f.finish()?;
    Ok(payload)
}

fn parse_service(f: &mut Fields<'_>) -> Result<ServiceEntry, ProtocolError> {
    Ok(ServiceEntry {
        s_id: f.int("S_ID")?,
        name: f.b64("NAME")?,
        rm_id: f.int("RM_ID")?,
        rm_ip: f.string("RM_IP")?,
        rm_port: f.port("RM_PORT")?,
    })
}

fn parse_entries(lines: &[&str], kind: ListKind) -> Result<Listing, ProtocolError> {
    fn each<T>(
        lines: &[&str],
        mut one: impl FnMut(&mut Fields<'_>) -> Result<T, ProtocolError>,
    ) -> Result<Vec<T>, ProtocolError> {
        lines
            .iter()
            .map(|l| {
                let toks = tokenize(l);
                let mut f = Fields::new(&toks, "list entry", Ctx::Reply);
                let v = one(&mut f)?;
                f.finish()?;
                Ok(v)
            })
            .collect()
    }
    Ok(match kind {
        ListKind::PhyMach => Listing::PhyMach(each(lines, |f| {
            Ok(PhyMachEntry {
                phy_id: f.int("PHY_ID")?,
                phy_ip: f.string("PHY_IP")?,
                mm_port: f.port("MM_PORT")?,
            })
        })?),
        ListKind::PhyMachStatus => Listing::PhyMachStatus(each(lines, |f| {
            Ok(PhyMachStatusEntry {
                phy_id: f.int("PHY_ID")?,
                avail_cpu: f.real("AVAIL_CPU")?,
                avail_ram: f.real("AVAIL_RAM")?,
                avail_disk: f.real("AVAIL_DISK")?,
                net_speed: f.quantity("NETSPEED", UnitFamily::NetSpeed, Unit::Mbps)?,
            })
        })?),
        ListKind::Repo => Listing::Repo(each(lines, |f| {
            Ok(RepoEntry {
                repo_id: f.int("REPO_ID")?,
                ip_addr: f.string("IP_ADDR")?,
                port: f.port("PORT")?,
                user_name: f.b64("USER_NAME")?,
                passwd: f.b64("PASSWD")?,
            })
        })?),
        ListKind::Serv => Listing::Serv(each(lines, parse_service)?),
        ListKind::Vm => Listing::Vm(each(lines, |f| {
            Ok(VmEntry {
                vm_id: f.int("VM_ID")?,
                phy_id: f.int("PHY_ID")?,
                vm_local_id: f.string("VM_LOCAL_ID")?,
                virt_ip: f.string("VIRT_IP")?,
                status: f.status("STATUS")?,
            })
        })?),
    })
}

fn parse_error_code(args: &[&str]) -> Result<ErrorCode, ProtocolError> {
    let mut f = Fields::new(args, "ERR", Ctx::Reply);
    let code = f.int("CODE")?;
    f.finish()?;
    match u32::try_from(code) {
        Ok(c) if c > 0 => Ok(ErrorCode(c)),
        _ => Err(ProtocolError::MalformedReply(format!(
            "ERR: code {code} is not a positive 32-bit integer"
        ))),
    }
}

/// Parses a complete framed reply to a request of kind `expected`.
pub fn parse_reply(bytes: &[u8], expected: RequestKind) -> Result<Reply, ProtocolError> {
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let raw_lines: Vec<&[u8]> = body.split(|b| *b == b'\n').map(strip_cr).collect();
    let mut lines = Vec::with_capacity(raw_lines.len());
    for l in raw_lines {
        lines.push(utf8_line(l, Ctx::Reply)?);
    }
    let header = tokenize(lines[0]);
    let Some((&keyword, args)) = header.split_first() else {
        return Err(ProtocolError::MalformedReply("empty reply line".into()));
    };
    let single_line = |n: usize| -> Result<(), ProtocolError> {
        if n == 1 {
            Ok(())
        } else {
            Err(ProtocolError::MalformedReply(
                "data after a single-line reply".into(),
            ))
        }
    };
    match keyword {
        "ERR" => {
            single_line(lines.len())?;
            Ok(Reply::Err(parse_error_code(args)?))
        }
        "OK" => match expected.reply_shape() {
            ReplyShape::List(kind) => match args {
                ["."] => {
                    single_line(lines.len())?;
                    Ok(Reply::List(Listing::empty(kind)))
                }
                [] => {
                    let n = lines.len();
                    if n < 3 || tokenize(lines[n - 1]) != ["."] {
                        return Err(ProtocolError::MalformedReply(
                            "list reply must hold at least one entry and end with a dot line"
                                .into(),
                        ));
                    }
                    Ok(Reply::List(parse_entries(&lines[1..n - 1], kind)?))
                }
                _ => Err(ProtocolError::MalformedReply(
                    "list reply header must be `OK` or `OK .`".into(),
                )),
            },
            shape => {
                single_line(lines.len())?;
                Ok(Reply::Ok(parse_payload(args, shape)?))
            }
        },
        other => Err(ProtocolError::MalformedReply(format!(
            "reply keyword {other:?} is neither OK nor ERR"
        ))),
    }
}

fn payload_tokens(p: &Payload) -> Vec<String> {
    let int = render_integer;
    match p {
        Payload::Id(id) => vec![int(*id)],
        Payload::Version(v) => vec![v.clone()],
        Payload::Status(s) => vec![int(s.code().into())],
        Payload::PhyMachAddr { phy_ip, mm_port } => vec![phy_ip.clone(), int((*mm_port).into())],
        Payload::Vm(v) => vec![
            int(v.s_id),
            int(v.phy_id),
            v.vm_local_id.clone(),
            v.virt_ip.clone(),
            int(v.status.code().into()),
        ],
        Payload::VmLocation(l) => vec![
            int(l.phy_id),
            l.phy_ip.clone(),
            int(l.mm_port.into()),
            l.vm_local_id.clone(),
        ],
        Payload::Service(s) => service_tokens(s),
    }
}

fn service_tokens(s: &ServiceEntry) -> Vec<String> {
    vec![
        render_integer(s.s_id),
        encode_b64(&s.name),
        render_integer(s.rm_id),
        s.rm_ip.clone(),
        render_integer(s.rm_port.into()),
    ]
}

/// Wire form of one list entry, without the line terminator.
pub fn render_entry_lines(listing: &Listing) -> Vec<String> {
    let int = render_integer;
    match listing {
        Listing::PhyMach(v) => v
            .iter()
            .map(|e| [int(e.phy_id), e.phy_ip.clone(), int(e.mm_port.into())].join(" "))
            .collect(),
        Listing::PhyMachStatus(v) => v
            .iter()
            .map(|e| {
                [
                    int(e.phy_id),
                    render_real(e.avail_cpu),
                    render_real(e.avail_ram),
                    render_real(e.avail_disk),
                    render_quantity(&e.net_speed),
                ]
                .join(" ")
            })
            .collect(),
        Listing::Repo(v) => v
            .iter()
            .map(|e| {
                [
                    int(e.repo_id),
                    e.ip_addr.clone(),
                    int(e.port.into()),
                    encode_b64(&e.user_name),
                    encode_b64(&e.passwd),
                ]
                .join(" ")
            })
            .collect(),
        Listing::Serv(v) => v.iter().map(|e| service_tokens(e).join(" ")).collect(),
        Listing::Vm(v) => v
            .iter()
            .map(|e| {
                [
                    int(e.vm_id),
                    int(e.phy_id),
                    e.vm_local_id.clone(),
                    e.virt_ip.clone(),
                    int(e.status.code().into()),
                ]
                .join(" ")
            })
            .collect(),
    }
}

pub fn render_reply(reply: &Reply) -> Vec<u8> {
    match reply {
        Reply::Err(code) => line(&["ERR".to_owned(), code.0.to_string()]),
        Reply::Ok(p) => {
            let mut t = vec!["OK".to_owned()];
            t.extend(payload_tokens(p));
            line(&t)
        }
        Reply::List(l) if l.is_empty() => b"OK .\n".to_vec(),
        Reply::List(l) => {
            let mut out = b"OK\n".to_vec();
            for e in render_entry_lines(l) {
                out.extend_from_slice(e.as_bytes());
                out.push(b'\n');
            }
            out.extend_from_slice(b".\n");
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is(line: &str) -> Result<Request, ProtocolError> {
        parse_request(line.as_bytes(), Component::InformationService)
    }

    #[test]
    fn getvmstatus() {
        assert_eq!(
            is("GETVMSTATUS 7").unwrap(),
            Request::Is(IsRequest::GetVmStatus { vm_id: 7 })
        );
        assert!(matches!(
            is("GETVMSTATUS -3"),
            Err(ProtocolError::MalformedRequest(_))
        ));
    }

    #[test]
    fn regserv_decodes_name() {
        // "web" base64-encoded with coreutils `base64`: d2Vi
        let req = is("REGSERV 1 d2Vi 512MB\n").unwrap();
        assert_eq!(
            req,
            Request::Is(IsRequest::RegServ {
                rm_id: 1,
                name: "web".into(),
                req_disk: Quantity::new(512, Unit::MB),
            })
        );
        assert_eq!(encode_b64("web"), "d2Vi");
    }

    #[test]
    fn regserv_req_disk_defaults_to_kilobytes() {
        let Request::Is(IsRequest::RegServ { req_disk, .. }) = is("REGSERV 1 d2Vi 12").unwrap()
        else {
            panic!()
        };
        assert_eq!(req_disk, Quantity::new(12, Unit::KB));
    }

    #[test]
    fn blank_runs_and_tabs_are_separators() {
        assert_eq!(
            is("  SUBMITVM\t\t3   4  ").ok(),
            None,
            "SUBMITVM is not an IS keyword"
        );
        assert_eq!(
            parse_request(b"SUBMITVM\t3   4 \r\n", Component::RepositoryManager).unwrap(),
            Request::Rm(RmRequest::SubmitVm { s_id: 3, phy_id: 4 })
        );
    }

    #[test]
    fn keyword_namespace_depends_on_server() {
        assert!(matches!(
            is("STOPSERV 5"),
            Err(ProtocolError::UnknownCommand(_))
        ));
        assert_eq!(
            parse_request(b"STOPVM vm-3", Component::MachineManager).unwrap(),
            Request::Mm(MmRequest::StopVm {
                vm_local_id: "vm-3".into()
            })
        );
        assert!(parse_request(b"STOPVM vm-3", Component::RepositoryManager).is_err());
    }

    #[test]
    fn arity_and_base64_errors() {
        assert!(is("GETVM").is_err());
        assert!(is("GETVM 1 2").is_err());
        assert!(is("REGSERV 1 !!! 5KB").is_err());
        assert!(is("REGSERV 1 d2V 5KB").is_err(), "missing padding");
        assert!(is("").is_err());
        assert!(is("GETVM 1\nGETVM 2").is_err());
    }

    #[test]
    fn simple_renders() {
        assert_eq!(
            render_request(&Request::Is(IsRequest::SrvProtoVer)),
            b"SRVPROTOVER\n"
        );
        assert_eq!(
            render_request(&Request::Sc(ScRequest::StopServ { vm_id: 5 })),
            b"STOPSERV 5\n"
        );
        assert_eq!(render_reply(&Reply::id(9)), b"OK 9\n");
        assert_eq!(
            render_reply(&Reply::Err(ErrorCode::MALFORMED_REQUEST)),
            b"ERR 100\n"
        );
    }

    #[test]
    fn startvm_body_framing() {
        let req = Request::Mm(MmRequest::StartVm {
            s_id: 2,
            image: b"abc\n\x00def".to_vec(),
        });
        let wire = render_request(&req);
        assert!(wire.starts_with(b"STARTVM 2 8\n"));
        assert_eq!(startvm_body_len(b"STARTVM 2 8"), Some(8));
        assert_eq!(parse_request(&wire, Component::MachineManager).unwrap(), req);
        assert!(parse_request(&wire[..wire.len() - 1], Component::MachineManager).is_err());
    }

    #[test]
    fn empty_list_and_err() {
        assert_eq!(
            parse_reply(b"OK .\n", RequestKind::ListServ).unwrap(),
            Reply::List(Listing::Serv(vec![]))
        );
        assert_eq!(
            parse_reply(b"ERR 203", RequestKind::GetVm).unwrap(),
            Reply::Err(ErrorCode(203))
        );
        assert!(parse_reply(b"ERR 0", RequestKind::GetVm).is_err());
        assert!(parse_reply(b"OK\n.\n", RequestKind::ListServ).is_err());
    }

    #[test]
    fn three_machine_list() {
        let listing = Listing::PhyMach(
            (1..=3)
                .map(|i| PhyMachEntry {
                    phy_id: i,
                    phy_ip: format!("10.0.0.{i}"),
                    mm_port: 7073,
                })
                .collect(),
        );
        let wire = render_reply(&Reply::List(listing.clone()));
        assert_eq!(
            std::str::from_utf8(&wire).unwrap(),
            "OK\n1 10.0.0.1 7073\n2 10.0.0.2 7073\n3 10.0.0.3 7073\n.\n"
        );
        assert_eq!(
            parse_reply(&wire, RequestKind::ListPhyMach).unwrap(),
            Reply::List(listing)
        );
    }

    #[test]
    fn base64_shields_separators() {
        let name = "my service\t#1\nline two";
        let req = Request::Is(IsRequest::RegServ {
            rm_id: 4,
            name: name.into(),
            req_disk: Quantity::new(1, Unit::GB),
        });
        let wire = render_request(&req);
        assert_eq!(wire.iter().filter(|b| **b == b'\n').count(), 1);
        assert_eq!(parse_request(&wire, Component::InformationService).unwrap(), req);
    }

    #[test]
    fn carriage_return_inside_a_token() {
        for k in [RequestKind::IsSrvProtoVer, RequestKind::MmSrvProtoVer] {
            assert!(parse_reply(b"OK 92\r\r\n", k).is_err());
            assert!(parse_reply(b"OK \r \r\n", k).is_err());
            assert!(parse_reply(b"OK 92\r\n", k).is_ok());
        }
        assert!(parse_request(b"STOPVM vm-1\r\r\n", Component::MachineManager).is_err());
        assert!(parse_request(b"STOPVM vm-1\r\n", Component::MachineManager).is_ok());
    }

    #[test]
    fn max_vm_number_minus_one_only_in_its_field() {
        let line = "REGPHYMACH 10.0.0.1 eDg2 4 2GHz 4096 100GB 1000 -1 dQ== cA== eA== eQ== 7073";
        let Request::Is(IsRequest::RegPhyMach(m)) = is(line).unwrap() else {
            panic!()
        };
        assert_eq!(m.max_vm_number, None);
        assert_eq!(m.cpu_type, "x86");
        assert_eq!(m.ram_size, Quantity::new(4096, Unit::MB));
        assert_eq!(m.net_speed, Quantity::new(1000, Unit::Mbps));
        assert!(is(&line.replace(" 4 2GHz", " -1 2GHz")).is_err());
    }
}
