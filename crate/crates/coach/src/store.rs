//! Session registry with one append-only JSONL log per session.
//!
//! Mutations on a session are serialized by its writer lock: the new state
//! is computed, the event is appended and flushed, and only then is the new
//! snapshot published. Readers clone the current `Arc<Session>` and never
//! wait on a writer.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::Utc;
use rally_core::{Dataset, PlayerId, PolicyRegistry, Termination};
use serde::{Deserialize, Serialize};

use crate::error::SessionError;
use crate::session::{Event, Session, SessionConfig};

pub const DATA_DIR_ENV: &str = "RALLYCOACH_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub dataset: Option<String>,
    pub focal: String,
    pub opponent: String,
    /// Overrides on top of the server defaults.
    #[serde(default)]
    pub config: Option<serde_json::Map<String, serde_json::Value>>,
}

struct Slot {
    writer: Mutex<Option<File>>,
    snapshot: RwLock<Arc<Session>>,
}

pub struct SessionStore {
    datasets: BTreeMap<String, Arc<Dataset>>,
    default_dataset: Option<String>,
    defaults: SessionConfig,
    registry: PolicyRegistry,
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl SessionStore {
    /// `datasets` in priority order; the first is used when a request names none.
    /// With `dir`, sessions are logged under `dir/sessions/` and reloaded from there.
    pub fn open(
        datasets: Vec<(String, Dataset)>,
        defaults: SessionConfig,
        registry: PolicyRegistry,
        dir: Option<PathBuf>,
    ) -> Result<SessionStore, SessionError> {
        defaults.validate(&registry)?;
        let default_dataset = datasets.first().map(|(n, _)| n.clone());
        let store = SessionStore {
            datasets: datasets.into_iter().map(|(n, d)| (n, Arc::new(d))).collect(),
            default_dataset,
            defaults,
            registry,
            dir: dir.map(|d| d.join("sessions")),
            sessions: RwLock::new(HashMap::new()),
        };
        if let Some(dir) = &store.dir {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| io_error(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            for path in paths {
                let session = store.replay(&path)?;
                let file = OpenOptions::new().append(true).open(&path).map_err(|e| io_error(&path, e))?;
                store.insert(session, Some(file));
            }
        }
        Ok(store)
    }

    pub fn registry(&self) -> &PolicyRegistry {
        &self.registry
    }

    pub fn defaults(&self) -> &SessionConfig {
        &self.defaults
    }

    pub fn datasets(&self) -> impl Iterator<Item = (&str, &Arc<Dataset>)> {
        self.datasets.iter().map(|(n, d)| (n.as_str(), d))
    }

    fn dataset(&self, name: &str) -> Result<Arc<Dataset>, SessionError> {
        self.datasets.get(name).cloned().ok_or_else(|| SessionError::UnknownDataset {
            name: name.to_string(),
            known: self.datasets.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn insert(&self, session: Session, file: Option<File>) {
        let slot = Slot { writer: Mutex::new(file), snapshot: RwLock::new(Arc::new(session)) };
        let id = slot.snapshot.read().expect("fresh lock").id.clone();
        self.sessions.write().expect("session map lock").insert(id, Arc::new(slot));
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, SessionError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("session map lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Current snapshot of a session.
    pub fn get(&self, id: &str) -> Result<Arc<Session>, SessionError> {
        Ok(self.slot(id)?.snapshot.read().expect("snapshot lock").clone())
    }

    pub fn create(&self, req: CreateRequest) -> Result<Arc<Session>, SessionError> {
        let name = match req.dataset {
            Some(n) => n,
            None => self
                .default_dataset
                .clone()
                .ok_or_else(|| SessionError::UnknownDataset { name: "(default)".into(), known: String::new() })?,
        };
        let base = self.dataset(&name)?;
        let mut config = serde_json::to_value(&self.defaults).expect("config serializes");
        if let (Some(over), Some(obj)) = (req.config, config.as_object_mut()) {
            obj.extend(over);
        }
        let config: SessionConfig =
            serde_json::from_value(config).map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        let player = |id: &str| PlayerId::new(id).map_err(|_| SessionError::UnknownPlayer(id.to_string()));
        let event = Event::Created {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            created_at: Utc::now(),
            dataset: name,
            dataset_version: base.version(),
            focal: player(&req.focal)?,
            opponent: player(&req.opponent)?,
            config,
        };
        let session = Session::create(&event, base, &self.registry)?;
        let file = match self.log_path(&session.id) {
            Some(path) => {
                let mut f =
                    OpenOptions::new().create_new(true).append(true).open(&path).map_err(|e| io_error(&path, e))?;
                append(&mut f, &path, &LogEntry { seq: 0, event })?;
                Some(f)
            }
            None => None,
        };
        let snapshot = Arc::new(session.clone());
        self.insert(session, file);
        Ok(snapshot)
    }

    fn mutate(&self, id: &str, event: Event) -> Result<Arc<Session>, SessionError> {
        let slot = self.slot(id)?;
        let mut writer = slot.writer.lock().expect("writer lock");
        let current = slot.snapshot.read().expect("snapshot lock").clone();
        let next = Arc::new(current.apply(&event)?);
        if let Some(file) = writer.as_mut() {
            let path = self.log_path(id).expect("file implies a log dir");
            append(file, &path, &LogEntry { seq: current.seq(), event })?;
        }
        *slot.snapshot.write().expect("snapshot lock") = next.clone();
        Ok(next)
    }

    pub fn record_shot(&self, id: &str, actor: &str, shot: &str) -> Result<Arc<Session>, SessionError> {
        let actor = self.get(id)?.resolve_player(actor)?;
        self.mutate(id, Event::Shot { actor, shot: shot.to_string() })
    }

    pub fn rally_end(&self, id: &str, winner: &str, termination: Termination) -> Result<Arc<Session>, SessionError> {
        let winner = self.get(id)?.resolve_player(winner)?;
        self.mutate(id, Event::RallyEnd { winner, termination })
    }

    pub fn undo(&self, id: &str) -> Result<Arc<Session>, SessionError> {
        self.mutate(id, Event::Undo)
    }

    /// Rebuilds a session from its log. A torn final line from an
    /// interrupted write is cut off.
    pub fn replay(&self, path: &Path) -> Result<Session, SessionError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            let f = OpenOptions::new().write(true).open(path).map_err(|e| io_error(path, e))?;
            f.set_len(complete as u64).map_err(|e| io_error(path, e))?;
        }
        let bad = |n: usize, m: String| SessionError::Log(format!("{}:{}: {m}", path.display(), n + 1));
        let mut session: Option<Session> = None;
        for (n, line) in text[..complete].lines().enumerate() {
            let entry: LogEntry = serde_json::from_str(line).map_err(|e| bad(n, e.to_string()))?;
            if entry.seq != n as u64 {
                return Err(bad(n, format!("expected seq {n}, found {}", entry.seq)));
            }
            session = Some(match session {
                None => {
                    let Event::Created { dataset, .. } = &entry.event else {
                        return Err(bad(n, "first entry must create the session".into()));
                    };
                    Session::create(&entry.event, self.dataset(dataset)?, &self.registry)?
                }
                Some(s) => s.apply(&entry.event).map_err(|e| bad(n, e.to_string()))?,
            });
        }
        session.ok_or_else(|| SessionError::Log(format!("{}: empty log", path.display())))
    }
}

fn append(file: &mut File, path: &Path, entry: &LogEntry) -> Result<(), SessionError> {
    let mut line = serde_json::to_string(entry).expect("log entry serializes");
    line.push('\n');
    file.write_all(line.as_bytes()).and_then(|_| file.sync_data()).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> SessionError {
    SessionError::Io { path: path.display().to_string(), source }
}
