//! Wire grammar written out from the protocol tables, used to judge what
//! the parser accepts. Deliberately shares no code with the codec.

use std::sync::LazyLock;

use regex::Regex;
use taaroa_core::protocol::{Component, RequestKind};

#[derive(Debug, Clone, Copy)]
pub enum F {
    Int,
    Port,
    Real,
    B64,
    Tok,
    Status,
    Freq,
    Mem,
    Net,
    MaxVm,
}

static DIGITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9]+$").unwrap());
static REAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[0-9]+\.[0-9]+(?:[eE][+-][0-9]+)?$").unwrap());
static B64: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:[A-Za-z0-9+/]{4})*(?:[A-Za-z0-9+/]{2}==|[A-Za-z0-9+/]{3}=)?$").unwrap()
});
static FREQ: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([0-9]+)(?:Hz|KHz|MHz|GHz|THz|PHz)?$").unwrap());
static MEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([0-9]+)(?:B|KB|MB|GB|TB|PB)?$").unwrap());
static NET: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([0-9]+)(?:bps|Kbps|Mbps|Gbps|Tbps|Pbps)?$").unwrap());
static BLANKS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[ \t]+").unwrap());

fn fits_u64(t: &str) -> bool {
    DIGITS.is_match(t) && t.parse::<u64>().is_ok()
}

fn quantity(re: &Regex, t: &str) -> bool {
    re.captures(t).is_some_and(|c| fits_u64(&c[1]))
}

pub fn field_ok(f: F, t: &str) -> bool {
    match f {
        F::Int => fits_u64(t),
        F::Port => DIGITS.is_match(t) && t.parse::<u16>().is_ok(),
        F::Real => REAL.is_match(t) && t.parse::<f64>().is_ok_and(f64::is_finite),
        F::B64 => !t.is_empty() && B64.is_match(t),
        F::Tok => !t.is_empty() && !t.contains([' ', '\t', '\n', '\r']),
        F::Status => DIGITS.is_match(t) && t.parse::<u64>().is_ok_and(|v| v <= 9),
        F::Freq => quantity(&FREQ, t),
        F::Mem => quantity(&MEM, t),
        F::Net => quantity(&NET, t),
        F::MaxVm => t == "-1" || fits_u64(t),
    }
}

/// Request fields after the keyword, per server and keyword.
pub fn request_fields(server: Component, keyword: &str) -> Option<&'static [F]> {
    use Component as C;
    use F::*;
    Some(match (server, keyword) {
        (_, "SRVPROTOVER") => &[],
        (C::InformationService, kw) => match kw {
            "GETPHYMACH" | "GETVM" | "GETVMMACHMNGR" | "GETVMSERV" | "GETVMSTATUS" | "LISTVM"
            | "UNREGPHYMACH" | "UNREGREPO" | "UNREGSERV" | "UNREGVM" => &[Int],
            "LISTPHYMACH" | "LISTPHYMACHSTATUS" | "LISTREPO" | "LISTSERV" => &[],
            "REGPHYMACH" => &[
                Tok, B64, Int, Freq, Mem, Mem, Net, MaxVm, B64, B64, B64, B64, Port,
            ],
            "REGREPO" => &[Tok, Port, B64, B64],
            "REGSERV" => &[Int, B64, Mem],
            "REGVM" => &[Int, Int, Tok, Tok, Real, Real, Real],
            "UPDATEVMSTATUS" => &[Int, Status],
            _ => return None,
        },
        (C::RepositoryManager, "STOPVM") => &[Int],
        (C::RepositoryManager, "SUBMITVM") => &[Int, Int],
        (C::Scheduler, "STOPSERV" | "SUBMITSERV") => &[Int],
        (C::MachineManager, "STARTVM") => &[Int, Int],
        (C::MachineManager, "STOPVM") => &[Tok],
        _ => return None,
    })
}

fn split_line(bytes: &[u8]) -> (&[u8], Option<&[u8]>) {
    match bytes.iter().position(|b| *b == b'\n') {
        Some(i) => (&bytes[..i], Some(&bytes[i + 1..])),
        None => (bytes, None),
    }
}

fn fields(line: &[u8]) -> Option<Vec<&str>> {
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    let text = std::str::from_utf8(line).ok()?;
    Some(BLANKS.split(text).filter(|t| !t.is_empty()).collect())
}

fn fields_match(spec: &[F], toks: &[&str]) -> bool {
    spec.len() == toks.len() && spec.iter().zip(toks).all(|(f, t)| field_ok(*f, t))
}

/// Whether `bytes` is one well-formed request to `server`.
pub fn request_ok(bytes: &[u8], server: Component) -> bool {
    let (line, rest) = split_line(bytes);
    let Some(toks) = fields(line) else {
        return false;
    };
    let Some((kw, args)) = toks.split_first() else {
        return false;
    };
    let Some(spec) = request_fields(server, kw) else {
        return false;
    };
    if !fields_match(spec, args) {
        return false;
    }
    let rest = rest.unwrap_or_default();
    if server == Component::MachineManager && *kw == "STARTVM" {
        args[1].parse::<u64>().is_ok_and(|n| n == rest.len() as u64)
    } else {
        rest.is_empty()
    }
}

fn ok_payload(kind: RequestKind) -> Option<&'static [F]> {
    use RequestKind as K;
    use F::*;
    Some(match kind {
        K::GetPhyMach => &[Tok, Port],
        K::GetVm => &[Int, Int, Tok, Tok, Status],
        K::GetVmMachMngr => &[Int, Tok, Port, Tok],
        K::GetVmServ => &[Int, B64, Int, Tok, Port],
        K::GetVmStatus | K::UpdateVmStatus => &[Status],
        K::IsSrvProtoVer | K::RmSrvProtoVer | K::ScSrvProtoVer | K::MmSrvProtoVer => &[Tok],
        K::RegPhyMach
        | K::RegRepo
        | K::RegServ
        | K::RegVm
        | K::UnregPhyMach
        | K::UnregRepo
        | K::UnregServ
        | K::UnregVm
        | K::RmStopVm
        | K::RmSubmitVm
        | K::ScStopServ
        | K::ScSubmitServ
        | K::MmStartVm
        | K::MmStopVm => &[Int],
        _ => return None,
    })
}

fn list_entry(kind: RequestKind) -> Option<&'static [F]> {
    use RequestKind as K;
    use F::*;
    Some(match kind {
        K::ListPhyMach => &[Int, Tok, Port],
        K::ListPhyMachStatus => &[Int, Real, Real, Real, Net],
        K::ListRepo => &[Int, Tok, Port, B64, B64],
        K::ListServ => &[Int, B64, Int, Tok, Port],
        K::ListVm => &[Int, Int, Tok, Tok, Status],
        _ => return None,
    })
}

/// Whether `bytes` is one well-formed reply to a `kind` request.
pub fn reply_ok(bytes: &[u8], kind: RequestKind) -> bool {
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let lines: Vec<&[u8]> = body.split(|b| *b == b'\n').collect();
    let Some(parsed) = lines.iter().map(|l| fields(l)).collect::<Option<Vec<_>>>() else {
        return false;
    };
    let header = &parsed[0];
    match header.as_slice() {
        ["ERR", code] => {
            parsed.len() == 1 && DIGITS.is_match(code) && code.parse::<u32>().is_ok_and(|c| c > 0)
        }
        ["OK", rest @ ..] => match (list_entry(kind), ok_payload(kind)) {
            (Some(_), _) if rest == ["."] => parsed.len() == 1,
            (Some(entry), _) => {
                let n = parsed.len();
                rest.is_empty()
                    && n >= 3
                    && parsed[n - 1] == ["."]
                    && parsed[1..n - 1].iter().all(|e| fields_match(entry, e))
            }
            (None, Some(payload)) => parsed.len() == 1 && fields_match(payload, rest),
            (None, None) => false,
        },
        _ => false,
    }
}
