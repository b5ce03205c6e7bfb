use std::process::ExitCode;

use taaroa_core::net::{bind, serve};
use taaroa_core::registry::InformationService;
use tracing::{error, info};

fn main() -> ExitCode {
    let settings = match taaroa_daemons::init().and_then(|c| taaroa_daemons::is_settings(&c)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("taaroa-is: {e}");
            return ExitCode::FAILURE;
        }
    };
    let is = match &settings.data_dir {
        Some(dir) => InformationService::open(dir),
        None => Ok(InformationService::new()),
    };
    let is = match is {
        Ok(is) => std::sync::Arc::new(is),
        Err(e) => {
            error!("cannot open data directory: {e}");
            return ExitCode::FAILURE;
        }
    };
    let server = match bind(&settings.listen).and_then(|l| serve(l, is.clone())) {
        Ok(s) => s,
        Err(e) => {
            error!("cannot listen on {}: {e}", settings.listen);
            return ExitCode::FAILURE;
        }
    };
    info!(addr = %server.local_addr(), "information service listening");
    taaroa_daemons::wait_for_signal();
    drop(server);
    if let Err(e) = is.checkpoint() {
        error!("checkpoint failed: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
