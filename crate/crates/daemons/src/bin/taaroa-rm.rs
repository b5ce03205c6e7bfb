use std::process::ExitCode;

use taaroa_core::net::{bind, serve};
use taaroa_core::repository::RepositoryManager;
use tracing::{error, info, warn};

fn main() -> ExitCode {
    let settings = match taaroa_daemons::init().and_then(|c| taaroa_daemons::rm_settings(&c)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("taaroa-rm: {e}");
            return ExitCode::FAILURE;
        }
    };
    let listener = match bind(&settings.listen) {
        Ok(l) => l,
        Err(e) => {
            error!("cannot listen on {}: {e}", settings.listen);
            return ExitCode::FAILURE;
        }
    };
    let rm = match RepositoryManager::join(settings.rm.clone()) {
        Ok(rm) => rm,
        Err(e) => {
            error!("cannot join the information service: {e}");
            return ExitCode::FAILURE;
        }
    };
    let server = match serve(listener, rm.clone()) {
        Ok(s) => s,
        Err(e) => {
            error!("cannot serve: {e}");
            return ExitCode::FAILURE;
        }
    };
    info!(addr = %server.local_addr(), rm_id = rm.rm_id(), services = rm.vmlist().len(), "repository manager listening");
    taaroa_daemons::wait_for_signal();
    drop(server);
    if let Err(code) = rm.leave() {
        warn!("UNREGREPO refused: {code}");
    }
    ExitCode::SUCCESS
}
