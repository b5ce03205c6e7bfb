//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `TAAROA_FUZZ_SECS` sets the fuzzing budget (default 300).

mod codec;
mod fuzz;
mod grammar;
mod registry;
mod workflow;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Duration;

const FUZZ_DEFAULT_SECS: u64 = 300;
const FUZZ_THREADS: usize = 4;
const AVAILABILITY_REGISTRIES: usize = 1000;
const CASCADE_SEQUENCES: usize = 1000;
const FCFS_RUNS: usize = 20;
const FCFS_SUBMISSIONS: usize = 50;
const WORKFLOW_VMS: usize = 10;

fn run(name: &str, f: impl FnOnce() -> Result<String, String>) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .map_or("panicked".into(), |m| format!("panicked: {m}")))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let secs = std::env::var("TAAROA_FUZZ_SECS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(FUZZ_DEFAULT_SECS);
    let fuzzing = std::thread::spawn(move || {
        catch_unwind(|| fuzz::run(Duration::from_secs(secs), FUZZ_THREADS, 0x7AA_2010))
    });

    let mut ok = true;
    ok &= run("codec_round_trip", || {
        let (n, t) = codec::round_trip(codec::ROUND_TRIP_MIN / 58 + 1)?;
        if n < codec::ROUND_TRIP_MIN || t > codec::ROUND_TRIP_BUDGET {
            return Err(format!("{n} messages in {t:?}"));
        }
        Ok(format!("{n} messages over 29 kinds in {t:.2?}"))
    });
    ok &= run("lifecycle_relation", || {
        codec::lifecycle().map(|n| format!("17 transitions, {n} (state, event) pairs checked"))
    });
    ok &= run("availability_consistency", || {
        registry::availability(AVAILABILITY_REGISTRIES, 41).map(|(r, c)| {
            format!("{r} registries, {c} listings within {:e}", registry::TOLERANCE)
        })
    });
    ok &= run("cascade_integrity", || {
        registry::cascade(CASCADE_SEQUENCES, 43)
            .map(|n| format!("{CASCADE_SEQUENCES} sequences, {n} operations audited"))
    });
    ok &= run("fcfs_order", || {
        workflow::fcfs(FCFS_RUNS, FCFS_SUBMISSIONS)
            .map(|(r, n)| format!("{r} runs of {n} concurrent submissions"))
    });
    ok &= run("workflow_conformance", || {
        workflow::workflow(WORKFLOW_VMS)
            .map(|(n, t)| format!("{n} VMs submitted and stopped in {t:.2?}"))
    });
    ok &= run("is_statelessness", || {
        workflow::statelessness().map(|n| format!("{n} IS requests replayed byte-identically"))
    });
    ok &= run("parser_fuzzing", || match fuzzing.join() {
        Ok(Ok(s)) if s.crashes.is_empty() && s.violations.is_empty() => Ok(format!(
            "{} parses in {secs}s, {} accepted, 0 crashes, 0 violations",
            s.inputs, s.accepted
        )),
        Ok(Ok(s)) => Err(format!(
            "{} crashes, {} violations; first: {:?}",
            s.crashes.len(),
            s.violations.len(),
            s.crashes.iter().chain(&s.violations).take(5).collect::<Vec<_>>()
        )),
        _ => Err("fuzz driver panicked".into()),
    });

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
