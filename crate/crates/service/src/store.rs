//! Append-only JSON-lines decision log. Each line is either a new decision
//! or a feedback flag for an earlier one; the in-memory view is rebuilt by
//! replaying the file.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::records::{DecisionRecord, FeedbackFlag};

pub const LOG_FILE: &str = "decisions.jsonl";

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Entry {
    Decision { record: DecisionRecord },
    Feedback { record_id: u64, flag: FeedbackFlag },
}

#[derive(Debug, Default)]
pub struct DecisionLog {
    path: Option<PathBuf>,
    file: Option<File>,
    records: Vec<DecisionRecord>,
    by_action: HashMap<String, usize>,
}

impl DecisionLog {
    /// A log that is not persisted.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open or create `dir/decisions.jsonl` and replay it. A final line cut
    /// short by a crash is dropped; any other unreadable line is an error.
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut log = DecisionLog::default();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(&path)?).lines().collect::<Result<_, _>>()?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Entry>(line) {
                    Ok(entry) => log.apply(entry).map_err(|e| {
                        ServiceError::CorruptStore(format!("{}:{}: {e}", path.display(), i + 1))
                    })?,
                    Err(e) if i + 1 == last => {
                        log::warn!("dropping truncated last line of {}: {e}", path.display());
                    }
                    Err(e) => {
                        return Err(ServiceError::CorruptStore(format!("{}:{}: {e}", path.display(), i + 1)));
                    }
                }
            }
        }
        log.file = Some(OpenOptions::new().create(true).append(true).open(&path)?);
        log.path = Some(path);
        Ok(log)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn apply(&mut self, entry: Entry) -> Result<(), ServiceError> {
        match entry {
            Entry::Decision { record } => {
                if record.record_id != self.records.len() as u64 + 1 {
                    return Err(ServiceError::CorruptStore(format!(
                        "record id {} out of sequence",
                        record.record_id
                    )));
                }
                self.by_action.insert(record.action.action_id.clone(), self.records.len());
                self.records.push(record);
            }
            Entry::Feedback { record_id, flag } => {
                let rec = self.get_mut(record_id)?;
                rec.feedback.push(flag);
            }
        }
        Ok(())
    }

    fn write(&mut self, entry: &Entry) -> Result<(), ServiceError> {
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_string(entry).expect("entries serialize");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    pub fn contains_action(&self, action_id: &str) -> bool {
        self.by_action.contains_key(action_id)
    }

    pub fn get(&self, record_id: u64) -> Result<&DecisionRecord, ServiceError> {
        record_id
            .checked_sub(1)
            .and_then(|i| self.records.get(i as usize))
            .ok_or(ServiceError::UnknownRecord(record_id))
    }

    fn get_mut(&mut self, record_id: u64) -> Result<&mut DecisionRecord, ServiceError> {
        record_id
            .checked_sub(1)
            .and_then(|i| self.records.get_mut(i as usize))
            .ok_or(ServiceError::UnknownRecord(record_id))
    }

    pub fn next_id(&self) -> u64 {
        self.records.len() as u64 + 1
    }

    /// Append a decision. Its id must be `next_id()` and its action id new.
    pub fn append(&mut self, record: DecisionRecord) -> Result<&DecisionRecord, ServiceError> {
        if self.contains_action(&record.action.action_id) {
            return Err(ServiceError::DuplicateActionId(record.action.action_id));
        }
        assert_eq!(record.record_id, self.next_id(), "record ids are assigned by the log");
        let entry = Entry::Decision { record };
        self.write(&entry)?;
        self.apply(entry)?;
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn add_feedback(&mut self, record_id: u64, flag: FeedbackFlag) -> Result<&DecisionRecord, ServiceError> {
        let rec = self.get(record_id)?;
        if rec.feedback.iter().any(|f| f.member_id == flag.member_id) {
            return Err(ServiceError::DuplicateFlag {
                record: record_id,
                member: flag.member_id,
            });
        }
        let entry = Entry::Feedback { record_id, flag };
        self.write(&entry)?;
        self.apply(entry)?;
        self.get(record_id)
    }
}
