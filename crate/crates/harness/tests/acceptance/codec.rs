//! Round-trip and lifecycle criteria.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use taaroa_core::lifecycle::{apply_event, is_final, relation, successor, VmEvent};
use taaroa_core::protocol::arbitrary::{reply_for, request_of};
use taaroa_core::protocol::{
    parse_reply, parse_request, render_reply, render_request, ExecStatus, RequestKind,
};

pub const ROUND_TRIP_MIN: usize = 10_000;
pub const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(30);

/// Returns messages checked and time taken.
pub fn round_trip(per_kind: usize) -> Result<(usize, Duration), String> {
    let start = Instant::now();
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]),
    );
    let mut n = 0;
    for kind in RequestKind::ALL {
        let reqs = request_of(kind);
        let replies = reply_for(kind);
        for _ in 0..per_kind {
            let req = reqs.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
            let bytes = render_request(&req);
            match parse_request(&bytes, kind.component()) {
                Ok(back) if back == req => {}
                other => {
                    return Err(format!(
                        "{kind} request {:?} came back as {other:?}",
                        String::from_utf8_lossy(&bytes)
                    ))
                }
            }
            let reply = replies.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
            let bytes = render_reply(&reply);
            match parse_reply(&bytes, kind) {
                Ok(back) if back == reply => {}
                other => {
                    return Err(format!(
                        "{kind} reply {:?} came back as {other:?}",
                        String::from_utf8_lossy(&bytes)
                    ))
                }
            }
            n += 2;
        }
    }
    Ok((n, start.elapsed()))
}

/// The state graph as drawn: named edges, then cancel, abort and fail out
/// of every temporary state.
fn oracle() -> BTreeSet<(ExecStatus, &'static str, ExecStatus)> {
    use ExecStatus::*;
    let mut t = BTreeSet::from([
        (Unstarted, "select_for_execution", StagingIn),
        (StagingIn, "stage_in_complete", Running),
        (Running, "suspend", Suspended),
        (Suspended, "resume", Running),
        (Running, "shutdown", Stopped),
    ]);
    for s in [Unstarted, StagingIn, Running, Suspended] {
        t.insert((s, "cancel", Cancelled));
        t.insert((s, "abort", Aborted));
        t.insert((s, "fail", Failed));
    }
    t
}

pub fn lifecycle() -> Result<usize, String> {
    let expect = oracle();
    let got: BTreeSet<_> = relation().into_iter().map(|(a, e, b)| (a, e.name(), b)).collect();
    if got != expect {
        return Err(format!(
            "extra {:?}, missing {:?}",
            got.difference(&expect).collect::<Vec<_>>(),
            expect.difference(&got).collect::<Vec<_>>()
        ));
    }
    let mut checked = 0;
    for s in ExecStatus::ALL {
        for e in VmEvent::ALL {
            checked += 1;
            let want = expect
                .iter()
                .find(|(a, n, _)| *a == s && *n == e.name())
                .map(|t| t.2);
            if successor(s, e) != want || apply_event(s, e).ok() != want {
                return Err(format!("{s} --{e}--> disagrees with the graph"));
            }
            let absorbing = [
                ExecStatus::Stopped,
                ExecStatus::Cancelled,
                ExecStatus::Failed,
                ExecStatus::Aborted,
            ]
            .contains(&s);
            if absorbing != is_final(s) {
                return Err(format!("{s} finality misclassified"));
            }
            if absorbing && want.is_some() {
                return Err(format!("final state {s} has an exit"));
            }
        }
    }
    Ok(checked)
}
