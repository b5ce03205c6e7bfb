use std::process::ExitCode;

use taaroa_core::net::{bind, serve};
use taaroa_core::scheduler::Scheduler;
use tracing::{error, info};

fn main() -> ExitCode {
    let settings = match taaroa_daemons::init().and_then(|c| taaroa_daemons::sc_settings(&c)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("taaroa-sc: {e}");
            return ExitCode::FAILURE;
        }
    };
    let sc = Scheduler::new(settings.is_addr.clone());
    let server = match bind(&settings.listen).and_then(|l| serve(l, sc)) {
        Ok(s) => s,
        Err(e) => {
            error!("cannot listen on {}: {e}", settings.listen);
            return ExitCode::FAILURE;
        }
    };
    info!(addr = %server.local_addr(), is = %settings.is_addr, "scheduler listening");
    taaroa_daemons::wait_for_signal();
    ExitCode::SUCCESS
}
