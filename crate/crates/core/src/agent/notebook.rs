//! Long-term notebook: an append-only newline-delimited JSON file.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::estimate_tokens;

#[derive(Debug, Error)]
pub enum NotebookError {
    #[error("notebook already has a record with key {0:?}")]
    DuplicateKey(String),
    #[error("record {0:?} has an empty payload")]
    EmptyPayload(String),
    #[error("record {key:?} needs {tokens} tokens, over the batch budget of {budget}")]
    RecordOversized { key: String, tokens: usize, budget: usize },
    #[error("notebook {path}: line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error("notebook I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotebookRecord {
    pub key: String,
    pub payload: String,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
}

mod rfc3339 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Micros, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

impl NotebookRecord {
    pub fn new(key: impl Into<String>, payload: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            payload: payload.into(),
            created_at: Utc::now(),
        }
    }

    pub fn tokens(&self) -> usize {
        estimate_tokens(&self.payload)
    }
}

struct State {
    file: File,
    records: Vec<NotebookRecord>,
    keys: HashSet<String>,
}

/// Appends are serialized by an internal lock and synced to disk before
/// `append` returns.
pub struct Notebook {
    path: PathBuf,
    state: Mutex<State>,
}

impl Notebook {
    /// Opens (creating if needed) the notebook at `path` and loads the
    /// records already in it. A torn final line from a crash is dropped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, NotebookError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut records = Vec::new();
        let mut keys = HashSet::new();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(&path)?).lines().collect::<Result<_, _>>()?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<NotebookRecord>(line) {
                    Ok(rec) => {
                        if !keys.insert(rec.key.clone()) {
                            return Err(NotebookError::Corrupt {
                                path,
                                line: i + 1,
                                reason: format!("duplicate key {:?}", rec.key),
                            });
                        }
                        records.push(rec);
                    }
                    Err(e) if i + 1 == last => {
                        log::warn!("{}: dropping torn final line: {e}", path.display());
                    }
                    Err(e) => {
                        return Err(NotebookError::Corrupt {
                            path,
                            line: i + 1,
                            reason: e.to_string(),
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            state: Mutex::new(State { file, records, keys }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: NotebookRecord) -> Result<(), NotebookError> {
        if record.payload.is_empty() {
            return Err(NotebookError::EmptyPayload(record.key));
        }
        let mut state = self.state.lock().expect("notebook lock poisoned");
        if state.keys.contains(&record.key) {
            return Err(NotebookError::DuplicateKey(record.key));
        }
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        state.file.write_all(line.as_bytes())?;
        state.file.sync_data()?;
        state.keys.insert(record.key.clone());
        state.records.push(record);
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.state.lock().expect("notebook lock poisoned").keys.contains(key)
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("notebook lock poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records in append order.
    pub fn records(&self) -> Vec<NotebookRecord> {
        self.state.lock().expect("notebook lock poisoned").records.clone()
    }

    pub fn batches(&self, key_prefix: &str, batch_token_budget: usize) -> Result<Vec<Vec<NotebookRecord>>, NotebookError> {
        notebook_batches(&self.records(), key_prefix, batch_token_budget)
    }
}

/// Greedy in-order packing of the records whose key starts with
/// `key_prefix` into batches of at most `budget` estimated tokens.
pub fn notebook_batches(
    records: &[NotebookRecord],
    key_prefix: &str,
    budget: usize,
) -> Result<Vec<Vec<NotebookRecord>>, NotebookError> {
    let mut batches = Vec::new();
    let mut current: Vec<NotebookRecord> = Vec::new();
    let mut used = 0;
    for rec in records.iter().filter(|r| r.key.starts_with(key_prefix)) {
        let tokens = rec.tokens();
        if tokens > budget {
            return Err(NotebookError::RecordOversized {
                key: rec.key.clone(),
                tokens,
                budget,
            });
        }
        if used + tokens > budget && !current.is_empty() {
            batches.push(std::mem::take(&mut current));
            used = 0;
        }
        used += tokens;
        current.push(rec.clone());
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(key: &str, tokens: usize) -> NotebookRecord {
        NotebookRecord::new(key, "x".repeat(tokens * 4))
    }

    #[test]
    fn append_and_reject_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let nb = Notebook::open(dir.path().join("run.ndjson")).unwrap();
        nb.append(NotebookRecord::new("hub1/2024-01-01", "payload")).unwrap();
        assert_eq!(nb.len(), 1);
        assert!(matches!(
            nb.append(NotebookRecord::new("hub1/2024-01-01", "again")),
            Err(NotebookError::DuplicateKey(_))
        ));
        assert!(matches!(
            nb.append(NotebookRecord::new("hub1/2024-01-02", "")),
            Err(NotebookError::EmptyPayload(_))
        ));
    }

    #[test]
    fn survives_reopen_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nb").join("run.ndjson");
        {
            let nb = Notebook::open(&path).unwrap();
            for i in 0..1000 {
                nb.append(NotebookRecord::new(format!("k{i:04}"), format!("p{i}"))).unwrap();
            }
        }
        let nb = Notebook::open(&path).unwrap();
        let recs = nb.records();
        assert_eq!(recs.len(), 1000);
        assert!(recs.iter().enumerate().all(|(i, r)| r.key == format!("k{i:04}")));
        assert!(nb.contains("k0999"));
    }

    #[test]
    fn torn_last_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ndjson");
        {
            let nb = Notebook::open(&path).unwrap();
            nb.append(NotebookRecord::new("a", "1")).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"key\":\"b\",\"pay").unwrap();
        drop(f);
        let nb = Notebook::open(&path).unwrap();
        assert_eq!(nb.len(), 1);
    }

    #[test]
    fn concurrent_appends_keep_every_record() {
        let dir = tempfile::tempdir().unwrap();
        let nb = std::sync::Arc::new(Notebook::open(dir.path().join("c.ndjson")).unwrap());
        std::thread::scope(|s| {
            for t in 0..4 {
                let nb = &nb;
                s.spawn(move || {
                    for i in 0..50 {
                        nb.append(NotebookRecord::new(format!("t{t}/{i}"), "p")).unwrap();
                    }
                });
            }
        });
        assert_eq!(Notebook::open(dir.path().join("c.ndjson")).unwrap().len(), 200);
    }

    #[test]
    fn greedy_batches() {
        let recs: Vec<_> = (0..4).map(|i| rec(&format!("h/{i}"), 10)).collect();
        let sizes: Vec<_> = notebook_batches(&recs, "h/", 25)
            .unwrap()
            .iter()
            .map(Vec::len)
            .collect();
        assert_eq!(sizes, vec![2, 2]);
        assert_eq!(notebook_batches(&recs[..1], "", 10).unwrap().len(), 1);
        assert!(matches!(
            notebook_batches(&[rec("big", 30)], "", 25),
            Err(NotebookError::RecordOversized { tokens: 30, .. })
        ));
    }

    #[test]
    fn prefix_filters_records() {
        let recs = vec![rec("a/1", 1), rec("b/1", 1), rec("a/2", 1)];
        let batches = notebook_batches(&recs, "a/", 100).unwrap();
        let keys: Vec<_> = batches.concat().into_iter().map(|r| r.key).collect();
        assert_eq!(keys, vec!["a/1", "a/2"]);
    }

    proptest! {
        #[test]
        fn batches_flatten_to_input_and_respect_budget(
            sizes in prop::collection::vec(0usize..40, 0..60),
            budget in 40usize..200,
        ) {
            let recs: Vec<_> = sizes.iter().enumerate().map(|(i, &t)| {
                NotebookRecord::new(format!("k{i}"), "y".repeat(t * 4 + 1))
            }).collect();
            prop_assume!(recs.iter().all(|r| r.tokens() <= budget));
            let batches = notebook_batches(&recs, "", budget).unwrap();
            for b in &batches {
                prop_assert!(!b.is_empty());
                prop_assert!(b.iter().map(NotebookRecord::tokens).sum::<usize>() <= budget);
            }
            prop_assert_eq!(batches.concat(), recs);
        }
    }
}
