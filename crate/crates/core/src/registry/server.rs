use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use tracing::{error, info};

use crate::net::Service;
use crate::protocol::{Component, ErrorCode, Reply, Request};

use super::persist::{read_snapshot, write_file_atomic, write_snapshot, SnapshotError, Wal};
use super::IsDatabase;

const SNAPSHOT_FILE: &str = "snapshot";
const WAL_FILE: &str = "wal";

struct Durable {
    dir: PathBuf,
    wal: Wal,
    /// Set when a log write failed: memory is ahead of disk, so further
    /// mutations are refused.
    poisoned: bool,
}

/// The Information Service: the database behind a reader/writer lock,
/// optionally backed by a data directory.
pub struct InformationService {
    db: RwLock<IsDatabase>,
    durable: Option<Mutex<Durable>>,
}

impl Default for InformationService {
    fn default() -> Self {
        Self::new()
    }
}

impl InformationService {
    /// An in-memory service with an empty database.
    pub fn new() -> Self {
        Self::with_database(IsDatabase::new())
    }

    pub fn with_database(db: IsDatabase) -> Self {
        Self {
            db: RwLock::new(db),
            durable: None,
        }
    }

    /// Opens a durable service, recovering from the snapshot and log in
    /// `dir` if present.
    pub fn open(dir: &Path) -> Result<Self, SnapshotError> {
        std::fs::create_dir_all(dir)?;
        let (mut db, mut lsn) = match std::fs::read_to_string(dir.join(SNAPSHOT_FILE)) {
            Ok(text) => read_snapshot(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => (IsDatabase::new(), 0),
            Err(e) => return Err(e.into()),
        };
        let wal_path = dir.join(WAL_FILE);
        let mut replayed = 0;
        for rec in Wal::read(&wal_path)? {
            if rec.lsn <= lsn {
                continue;
            }
            let reply = db.apply(&rec.request);
            if reply != rec.reply {
                return Err(SnapshotError::Corrupt {
                    line: 0,
                    msg: format!("WAL record {} replays to a different reply", rec.lsn),
                });
            }
            lsn = rec.lsn;
            replayed += 1;
        }
        info!(
            machines = db.machines.len(),
            services = db.services.len(),
            vms = db.vms.len(),
            replayed,
            "information service recovered"
        );
        let wal = Wal::open(&wal_path, lsn + 1)?;
        Ok(Self {
            db: RwLock::new(db),
            durable: Some(Mutex::new(Durable {
                dir: dir.to_owned(),
                wal,
                poisoned: false,
            })),
        })
    }

    /// Runs `f` against a consistent view of the database.
    pub fn with_db<R>(&self, f: impl FnOnce(&IsDatabase) -> R) -> R {
        f(&self.db.read().unwrap())
    }

    pub fn database(&self) -> IsDatabase {
        self.with_db(Clone::clone)
    }

    /// Snapshot text of the current state.
    pub fn snapshot(&self) -> String {
        let db = self.db.read().unwrap();
        let lsn = self
            .durable
            .as_ref()
            .map(|d| d.lock().unwrap().wal.next_lsn() - 1)
            .unwrap_or(0);
        write_snapshot(&db, lsn)
    }

    /// An in-memory service holding the state of a snapshot.
    pub fn restore(snapshot: &str) -> Result<Self, SnapshotError> {
        let (db, _) = read_snapshot(snapshot)?;
        Ok(Self::with_database(db))
    }

    /// Writes a snapshot to the data directory and empties the log.
    pub fn checkpoint(&self) -> io::Result<()> {
        let Some(durable) = &self.durable else {
            return Ok(());
        };
        let db = self.db.read().unwrap();
        let mut d = durable.lock().unwrap();
        let text = write_snapshot(&db, d.wal.next_lsn() - 1);
        write_file_atomic(&d.dir.join(SNAPSHOT_FILE), &text)?;
        d.wal.truncate()
    }
}

impl Service for InformationService {
    fn component(&self) -> Component {
        Component::InformationService
    }

    fn handle(&self, req: Request) -> Reply {
        let Request::Is(req) = req else {
            return Reply::Err(ErrorCode::INTERNAL_ERROR);
        };
        if !req.kind().is_mutation() {
            return self.db.read().unwrap().query(&req);
        }
        let mut db = self.db.write().unwrap();
        let Some(durable) = &self.durable else {
            return db.apply(&req);
        };
        let mut d = durable.lock().unwrap();
        if d.poisoned {
            return Reply::Err(ErrorCode::INTERNAL_ERROR);
        }
        let reply = db.apply(&req);
        if reply.is_ok() {
            if let Err(e) = d.wal.append(&req, &reply) {
                error!("WAL append failed, refusing further mutations: {e}");
                d.poisoned = true;
                return Reply::Err(ErrorCode::INTERNAL_ERROR);
            }
        }
        reply
    }
}
