//! Time-boxed fuzzing of both parsers.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use base64::Engine as _;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use taaroa_core::protocol::{
    parse_reply, parse_request, render_reply, render_request, Component, RequestKind,
};

use crate::grammar;

const MIB: usize = 1 << 20;

#[derive(Debug, Default)]
pub struct Stats {
    pub inputs: u64,
    pub accepted: u64,
    pub crashes: Vec<String>,
    pub violations: Vec<String>,
}

impl Stats {
    fn merge(&mut self, o: Stats) {
        self.inputs += o.inputs;
        self.accepted += o.accepted;
        self.crashes.extend(o.crashes);
        self.violations.extend(o.violations);
    }
}

const KEYWORDS: &[&str] = &[
    "GETPHYMACH", "GETVM", "GETVMMACHMNGR", "GETVMSERV", "GETVMSTATUS", "LISTPHYMACH",
    "LISTPHYMACHSTATUS", "LISTREPO", "LISTSERV", "LISTVM", "REGPHYMACH", "REGREPO", "REGSERV",
    "REGVM", "SRVPROTOVER", "UNREGPHYMACH", "UNREGREPO", "UNREGSERV", "UNREGVM",
    "UPDATEVMSTATUS", "STOPVM", "SUBMITVM", "STOPSERV", "SUBMITSERV", "STARTVM", "OK", "ERR",
    ".", "getvm", "OK.", "",
];

const SUFFIXES: &[&str] = &[
    "", "Hz", "KHz", "MHz", "GHz", "THz", "PHz", "B", "KB", "MB", "GB", "TB", "PB", "bps",
    "Kbps", "Mbps", "Gbps", "Tbps", "Pbps", "kb", "Mb", "%",
];

fn field(rng: &mut StdRng) -> String {
    match rng.random_range(0..12) {
        0 => rng.random_range(0..20u64).to_string(),
        1 => rng.random::<u64>().to_string(),
        2 => "18446744073709551616".into(),
        3 => ["-1", "-3", "+4", "0", "00", "65535", "65536", "9", "10"][rng.random_range(0..9)]
            .into(),
        4 => format!("{}.{}", rng.random_range(0..100), rng.random_range(0..1000)),
        5 => format!(
            "{}.{}{}{}",
            rng.random_range(0..10),
            rng.random_range(0..100),
            ["e", "E", "e+", "e-", "E+"][rng.random_range(0..5)],
            rng.random_range(0..400)
        ),
        6 => format!(
            "{}{}",
            rng.random_range(0..5000),
            SUFFIXES[rng.random_range(0..SUFFIXES.len())]
        ),
        7 => {
            let n = rng.random_range(0..12);
            let raw: Vec<u8> = (0..n).map(|_| rng.random()).collect();
            base64::engine::general_purpose::STANDARD.encode(raw)
        }
        8 => ["=", "==", "A", "AB==", "QQ", "QUI=", "wA==", "/w=="][rng.random_range(0..8)]
            .into(),
        9 => format!("vm-{}", rng.random_range(0..50)),
        10 => "127.0.0.1".into(),
        _ => {
            let n = rng.random_range(1..6);
            (0..n)
                .map(|_| char::from(rng.random_range(0x21u8..0x7f)))
                .collect()
        }
    }
}

fn blank(rng: &mut StdRng) -> &'static str {
    [" ", " ", " ", "  ", "\t", " \t "][rng.random_range(0..6)]
}

/// Keyword followed by plausible fields, with random blanks and endings.
fn token_line(rng: &mut StdRng) -> Vec<u8> {
    let mut s = String::new();
    if rng.random_bool(0.1) {
        s.push_str(blank(rng));
    }
    s.push_str(KEYWORDS[rng.random_range(0..KEYWORDS.len())]);
    for _ in 0..rng.random_range(0..15) {
        s.push_str(blank(rng));
        s.push_str(&field(rng));
    }
    if rng.random_bool(0.1) {
        s.push_str(blank(rng));
    }
    let mut out = s.into_bytes();
    match rng.random_range(0..8) {
        0 => out.extend_from_slice(b"\r\n"),
        1 => {}
        2 => out.extend_from_slice(b"\n\n"),
        _ => out.push(b'\n'),
    }
    out
}

/// A multi-line list-shaped reply.
fn list_reply(rng: &mut StdRng) -> Vec<u8> {
    let mut out = b"OK\n".to_vec();
    for _ in 0..rng.random_range(0..4) {
        let mut l: Vec<String> = (0..rng.random_range(0..7)).map(|_| field(rng)).collect();
        if rng.random_bool(0.1) {
            l.push(".".into());
        }
        out.extend_from_slice(l.join(" ").as_bytes());
        out.push(b'\n');
    }
    if rng.random_bool(0.9) {
        out.extend_from_slice(b".\n");
    }
    out
}

fn mutate(rng: &mut StdRng, mut v: Vec<u8>) -> Vec<u8> {
    for _ in 0..rng.random_range(1..4) {
        if v.is_empty() {
            v.push(rng.random());
            continue;
        }
        let i = rng.random_range(0..v.len());
        match rng.random_range(0..5) {
            0 => v[i] = rng.random(),
            1 => {
                v.remove(i);
            }
            2 => v.insert(i, b" \t\n\r-.="[rng.random_range(0..7)]),
            3 => v.truncate(i),
            _ => {
                let j = rng.random_range(i..v.len());
                let chunk = v[i..=j].to_vec();
                v.splice(i..i, chunk);
            }
        }
    }
    v
}

fn random_bytes(rng: &mut StdRng, max: usize) -> Vec<u8> {
    let n = rng.random_range(0..=max);
    let mut v = vec![0u8; n];
    rng.fill(&mut v[..]);
    v
}

fn well_formed(rng: &mut StdRng, runner: &mut proptest::test_runner::TestRunner) -> Vec<u8> {
    use proptest::strategy::{Strategy, ValueTree};
    use taaroa_core::protocol::arbitrary::{any_reply, any_request};
    if rng.random_bool(0.5) {
        render_request(&any_request().new_tree(runner).unwrap().current())
    } else {
        render_reply(&any_reply().new_tree(runner).unwrap().current().1)
    }
}

fn input(rng: &mut StdRng, runner: &mut proptest::test_runner::TestRunner) -> Vec<u8> {
    match rng.random_range(0..100) {
        0..=29 => token_line(rng),
        30..=39 => list_reply(rng),
        40..=69 => {
            let base = well_formed(rng, runner);
            mutate(rng, base)
        }
        70..=79 => well_formed(rng, runner),
        80..=98 => random_bytes(rng, 256),
        _ => {
            if rng.random_range(0..50) == 0 {
                random_bytes(rng, MIB)
            } else {
                random_bytes(rng, 8192)
            }
        }
    }
}

fn show(bytes: &[u8]) -> String {
    let mut s = String::from_utf8_lossy(&bytes[..bytes.len().min(200)]).into_owned();
    if bytes.len() > 200 {
        s.push_str("...");
    }
    format!("{s:?}")
}

fn check_one(bytes: &[u8], stats: &mut Stats) {
    for server in Component::ALL {
        stats.inputs += 1;
        match catch_unwind(AssertUnwindSafe(|| parse_request(bytes, server))) {
            Err(_) => stats.crashes.push(format!("parse_request({server:?}) on {}", show(bytes))),
            Ok(Ok(req)) => {
                stats.accepted += 1;
                let again = parse_request(&render_request(&req), server);
                if !grammar::request_ok(bytes, server) || again.as_ref() != Ok(&req) {
                    stats
                        .violations
                        .push(format!("request to {server:?} accepted: {}", show(bytes)));
                }
            }
            Ok(Err(_)) => {}
        }
    }
    for kind in RequestKind::ALL {
        stats.inputs += 1;
        match catch_unwind(AssertUnwindSafe(|| parse_reply(bytes, kind))) {
            Err(_) => stats.crashes.push(format!("parse_reply({kind}) on {}", show(bytes))),
            Ok(Ok(reply)) => {
                stats.accepted += 1;
                let again = parse_reply(&render_reply(&reply), kind);
                if !grammar::reply_ok(bytes, kind) || again.as_ref() != Ok(&reply) {
                    stats
                        .violations
                        .push(format!("reply to {kind} accepted: {}", show(bytes)));
                }
            }
            Ok(Err(_)) => {}
        }
    }
}

fn worker(seed: u64, deadline: Instant) -> Stats {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut runner = proptest::test_runner::TestRunner::new_with_rng(
        Default::default(),
        proptest::test_runner::TestRng::from_seed(
            proptest::test_runner::RngAlgorithm::ChaCha,
            &rng.random::<[u8; 32]>(),
        ),
    );
    let mut stats = Stats::default();
    while Instant::now() < deadline {
        for _ in 0..64 {
            let bytes = input(&mut rng, &mut runner);
            check_one(&bytes, &mut stats);
        }
    }
    stats
}

pub fn run(duration: Duration, threads: usize, seed: u64) -> Stats {
    let deadline = Instant::now() + duration;
    let handles: Vec<_> = (0..threads as u64)
        .map(|i| std::thread::spawn(move || worker(seed.wrapping_add(i), deadline)))
        .collect();
    let mut total = Stats::default();
    for h in handles {
        total.merge(h.join().expect("fuzz worker"));
    }
    total
}
