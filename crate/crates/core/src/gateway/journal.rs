//! Append-only JSON-lines journal of raw request/response pairs.
//!
//! Every transport-level success is journaled before parsing, so a batch
//! can resume after interruption and its outputs can be rebuilt from the
//! journal without re-contacting the service.

use super::GatewayError;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JournalEntry {
    pub item_id: String,
    pub request: Value,
    pub response: Value,
    /// Unix milliseconds at journaling time.
    pub ts: u64,
}

impl JournalEntry {
    pub fn now(item_id: String, request: Value, response: Value) -> Self {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        JournalEntry {
            item_id,
            request,
            response,
            ts,
        }
    }
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
    entries: BTreeMap<String, JournalEntry>,
}

impl Journal {
    /// Opens or creates a journal, loading any existing entries. Malformed
    /// lines (for example a torn final line after a crash) are skipped with
    /// a warning so the journal stays usable for resumption.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| GatewayError::JournalIo {
            path: path.clone(),
            source,
        };
        let mut entries = BTreeMap::new();
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                for (lineno, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<JournalEntry>(line) {
                        Ok(entry) => {
                            entries.insert(entry.item_id.clone(), entry);
                        }
                        Err(e) => {
                            log::warn!(
                                "journal {}: skipping malformed line {}: {e}",
                                path.display(),
                                lineno + 1
                            );
                        }
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(e)),
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        Ok(Journal {
            path,
            file,
            entries,
        })
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.entries.contains_key(item_id)
    }

    pub fn get(&self, item_id: &str) -> Option<&JournalEntry> {
        self.entries.get(item_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends one entry, flushing the line to disk before returning.
    pub fn append(&mut self, entry: JournalEntry) -> Result<(), GatewayError> {
        let io_err = |source| GatewayError::JournalIo {
            path: self.path.clone(),
            source,
        };
        let mut line = serde_json::to_string(&entry).expect("journal entry serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err)?;
        self.file.flush().map_err(io_err)?;
        self.entries.insert(entry.item_id.clone(), entry);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn journal_persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        {
            let mut journal = Journal::open(&path).unwrap();
            journal
                .append(JournalEntry::now(
                    "a".into(),
                    json!({"q": 1}),
                    json!({"r": 2}),
                ))
                .unwrap();
            journal
                .append(JournalEntry::now("b".into(), json!({}), json!({})))
                .unwrap();
        }
        let journal = Journal::open(&path).unwrap();
        assert_eq!(journal.len(), 2);
        assert!(journal.contains("a"));
        assert_eq!(journal.get("a").unwrap().response, json!({"r": 2}));
    }

    #[test]
    fn torn_final_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        {
            let mut journal = Journal::open(&path).unwrap();
            journal
                .append(JournalEntry::now("a".into(), json!({}), json!({})))
                .unwrap();
        }
        // simulate a crash mid-write
        let mut file = OpenOptions::new().append(true).open(&path).unwrap();
        file.write_all(b"{\"item_id\": \"b\", \"requ").unwrap();
        drop(file);

        let journal = Journal::open(&path).unwrap();
        assert_eq!(journal.len(), 1);
        assert!(journal.contains("a"));
        assert!(!journal.contains("b"));
    }
}
