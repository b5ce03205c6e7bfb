use std::process::ExitCode;

use taaroa_core::machine::{MachineManager, MockVmm};
use taaroa_core::net::{bind, serve};
use tracing::{error, info, warn};

fn main() -> ExitCode {
    let settings = match taaroa_daemons::init().and_then(|c| taaroa_daemons::mm_settings(&c)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("taaroa-mm: {e}");
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
    let vmm = MockVmm {
        work_dir: settings.vm_dir.clone(),
    };
    let mm = match MachineManager::join(settings.mm.clone(), vmm) {
        Ok(mm) => mm,
        Err(e) => {
            error!("cannot join the information service: {e}");
            return ExitCode::FAILURE;
        }
    };
    let server = match serve(listener, mm.clone()) {
        Ok(s) => s,
        Err(e) => {
            error!("cannot serve: {e}");
            return ExitCode::FAILURE;
        }
    };
    info!(addr = %server.local_addr(), phy_id = mm.phy_id(), "machine manager listening");
    taaroa_daemons::wait_for_signal();
    drop(server);
    if let Err(code) = mm.leave() {
        warn!("UNREGPHYMACH refused: {code}");
    }
    ExitCode::SUCCESS
}
