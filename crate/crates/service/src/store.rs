use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex as StdMutex};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use uuid::Uuid;

use safe_evop::engine::{EvopConfig, EvopSession};

use crate::error::{Result, ServiceError};

/// On-disk form of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnvelope {
    pub session_id: Uuid,
    pub session: EvopSession,
}

pub type SessionHandle = Arc<Mutex<SessionEnvelope>>;

/// Sessions kept in memory and mirrored to one JSON file each.
///
/// Every mutation is written to disk (temp file, fsync, rename) before the
/// in-memory copy changes, so the directory always holds the last
/// acknowledged state.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: StdMutex<HashMap<Uuid, SessionHandle>>,
}

impl SessionStore {
    /// Opens `dir`, creating it if needed, and loads every stored session.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let Some(id) = session_file_id(&path) else {
                continue;
            };
            let envelope: SessionEnvelope = serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| ServiceError::Corrupt(path.clone(), e.to_string()))?;
            if envelope.session_id != id {
                return Err(ServiceError::Corrupt(
                    path,
                    "file name does not match session id".into(),
                ));
            }
            sessions.insert(id, Arc::new(Mutex::new(envelope)));
        }
        tracing::info!(dir = %dir.display(), sessions = sessions.len(), "session store opened");
        Ok(Self {
            dir,
            sessions: StdMutex::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, config: EvopConfig) -> Result<Uuid> {
        let session = EvopSession::new(config)?;
        let session_id = Uuid::new_v4();
        let envelope = SessionEnvelope {
            session_id,
            session,
        };
        self.persist(&envelope)?;
        self.sessions
            .lock()
            .expect("session map poisoned")
            .insert(session_id, Arc::new(Mutex::new(envelope)));
        Ok(session_id)
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle> {
        let uuid = Uuid::parse_str(id).map_err(|_| ServiceError::NotFound(id.to_string()))?;
        self.sessions
            .lock()
            .expect("session map poisoned")
            .get(&uuid)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Applies `f` to a copy of the session, persists the copy and only then
    /// replaces the live session. Nothing changes if `f` or the write fails.
    pub async fn update<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut EvopSession) -> safe_evop::Result<T>,
    ) -> Result<T> {
        let handle = self.get(id)?;
        let mut guard = handle.lock().await;
        let mut next = guard.clone();
        let out = f(&mut next.session)?;
        self.persist(&next)?;
        *guard = next;
        Ok(out)
    }

    fn path_for(&self, id: Uuid) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn persist(&self, envelope: &SessionEnvelope) -> Result<()> {
        let path = self.path_for(envelope.session_id);
        let tmp = self.dir.join(format!(".{}.json.tmp", envelope.session_id));
        let bytes = serde_json::to_vec_pretty(envelope)?;
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn session_file_id(path: &Path) -> Option<Uuid> {
    if path.extension()? != "json" {
        return None;
    }
    Uuid::parse_str(path.file_stem()?.to_str()?).ok()
}
