use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::Mutex;

use super::{Event, Tracker};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt event log for `{id}` at line {line}: {message}")]
    Corrupt { id: String, line: usize, message: String },
    #[error("invalid conversation id `{0}`")]
    InvalidId(String),
}

/// Persistence for trackers, keyed by conversation id. Stores hold the
/// event log only; trackers are rebuilt by replay.
pub trait TrackerStore: Send + Sync {
    fn save(&self, tracker: &Tracker) -> Result<(), StoreError>;
    fn load(&self, id: &str) -> Result<Option<Tracker>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    logs: Mutex<HashMap<String, Vec<Event>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl TrackerStore for MemoryStore {
    fn save(&self, tracker: &Tracker) -> Result<(), StoreError> {
        let mut logs = self.logs.lock().unwrap_or_else(|e| e.into_inner());
        logs.insert(tracker.conversation_id.clone(), tracker.events().to_vec());
        Ok(())
    }

    fn load(&self, id: &str) -> Result<Option<Tracker>, StoreError> {
        let logs = self.logs.lock().unwrap_or_else(|e| e.into_inner());
        Ok(logs.get(id).map(|events| Tracker::replay(id, events.iter().cloned())))
    }
}

/// One `<conversation-id>.jsonl` file per conversation, one event per line.
/// Saving appends only the events not yet on disk.
#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        let safe = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !safe {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.jsonl")))
    }

    fn read_events(&self, id: &str) -> Result<Option<Vec<Event>>, StoreError> {
        let path = self.path(id)?;
        if !path.exists() {
            return Ok(None);
        }
        let reader = BufReader::new(File::open(path)?);
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                id: id.to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(event);
        }
        Ok(Some(events))
    }
}

impl TrackerStore for FileStore {
    fn save(&self, tracker: &Tracker) -> Result<(), StoreError> {
        let id = &tracker.conversation_id;
        let stored = self.read_events(id)?.map_or(0, |e| e.len());
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path(id)?)?;
        for event in tracker.events().iter().skip(stored) {
            let line = serde_json::to_string(event).map_err(|e| StoreError::Corrupt {
                id: id.clone(),
                line: 0,
                message: e.to_string(),
            })?;
            writeln!(file, "{line}")?;
        }
        Ok(())
    }

    fn load(&self, id: &str) -> Result<Option<Tracker>, StoreError> {
        Ok(self.read_events(id)?.map(|events| Tracker::replay(id, events)))
    }
}
