use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use nsp_core::search::{CellDirectives, SearchConfig};
use nsp_core::Instance;

use crate::events::IncumbentEvent;
use crate::session::SessionState;

/// Persisted session metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub state: SessionState,
    pub config: SearchConfig,
    pub directives: CellDirectives,
    pub revision: u64,
    /// Search time consumed so far.
    pub elapsed_seconds: f64,
    pub epoch_base: u64,
}

pub struct StoredSession {
    pub meta: SessionMeta,
    pub instance: Instance,
    pub events: Vec<IncumbentEvent>,
}

/// File store with one directory per session: `meta.json`,
/// `instance.json` and an append-only `events.jsonl`. A process-wide lock
/// serializes writers.
pub struct Store {
    root: PathBuf,
    lock: Mutex<()>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Store { root, lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn create(&self, meta: &SessionMeta, instance: &Instance) -> io::Result<()> {
        let _g = self.lock.lock().unwrap();
        let dir = self.dir(&meta.id);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("instance.json"), instance.to_json().as_bytes())?;
        write_atomic(&dir.join("meta.json"), &serde_json::to_vec_pretty(meta)?)?;
        File::create(dir.join("events.jsonl"))?;
        Ok(())
    }

    pub fn save_meta(&self, meta: &SessionMeta) -> io::Result<()> {
        let _g = self.lock.lock().unwrap();
        write_atomic(&self.dir(&meta.id).join("meta.json"), &serde_json::to_vec_pretty(meta)?)
    }

    pub fn save_instance(&self, id: &str, instance: &Instance) -> io::Result<()> {
        let _g = self.lock.lock().unwrap();
        write_atomic(&self.dir(id).join("instance.json"), instance.to_json().as_bytes())
    }

    pub fn append_event(&self, id: &str, event: &IncumbentEvent) -> io::Result<()> {
        let _g = self.lock.lock().unwrap();
        let mut f = OpenOptions::new().append(true).create(true).open(self.dir(id).join("events.jsonl"))?;
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        f.write_all(&line)
    }

    /// Every readable session under the root. A truncated final event line
    /// (an interrupted append) is dropped.
    pub fn load_all(&self) -> io::Result<Vec<StoredSession>> {
        let _g = self.lock.lock().unwrap();
        let mut out = Vec::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("meta.json").is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let meta: SessionMeta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
            let text = fs::read_to_string(dir.join("instance.json"))?;
            let instance =
                Instance::from_json(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
            let mut events = Vec::new();
            if let Ok(f) = File::open(dir.join("events.jsonl")) {
                for line in BufReader::new(f).lines() {
                    match serde_json::from_str::<IncumbentEvent>(&line?) {
                        Ok(e) => events.push(e),
                        Err(err) => {
                            log::warn!("{}: dropping unreadable event line: {err}", dir.display());
                            break;
                        }
                    }
                }
            }
            out.push(StoredSession { meta, instance, events });
        }
        Ok(out)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}
