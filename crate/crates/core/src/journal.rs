//! Append-only event journal.
//!
//! One JSON record per line, `\n` terminated, keys in the fixed order
//! `seq, at, instance_id, kind, payload`. Sequence numbers start at 1 and are
//! dense. A line that fails to parse, skips a sequence number, or lacks its
//! terminating newline marks the end of the valid journal.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::engine::{Event, EventRecord, State};

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("journal is corrupt at line {}: {}", .0.line, .0.message)]
    Corrupt(Corruption),
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corruption {
    /// 1-based line number of the first bad record.
    pub line: usize,
    /// Byte offset where the valid prefix ends.
    pub offset: u64,
    /// Sequence number of the last valid record.
    pub last_valid_seq: u64,
    pub message: String,
}

/// Outcome of replaying a journal.
#[derive(Debug)]
pub struct Replay {
    pub state: State,
    pub records: Vec<EventRecord>,
    pub corruption: Option<Corruption>,
}

/// Parses journal bytes into records, stopping at the first corrupt line.
pub fn read_records(bytes: &[u8]) -> (Vec<EventRecord>, Option<Corruption>) {
    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let expected = records.len() as u64 + 1;
        let corrupt = |message: String, records: &Vec<EventRecord>| Corruption {
            line: line_no,
            offset: offset as u64,
            last_valid_seq: records.len() as u64,
            message,
        };
        let Some(end) = bytes[offset..].iter().position(|b| *b == b'\n') else {
            return (records.clone(), Some(corrupt("truncated record".into(), &records)));
        };
        let line = &bytes[offset..offset + end];
        match serde_json::from_slice::<EventRecord>(line) {
            Ok(rec) if rec.seq == expected => records.push(rec),
            Ok(rec) => {
                let msg = format!("expected sequence number {expected}, found {}", rec.seq);
                return (records.clone(), Some(corrupt(msg, &records)));
            }
            Err(e) => return (records.clone(), Some(corrupt(e.to_string(), &records))),
        }
        offset += end + 1;
    }
    (records, None)
}

/// Rebuilds state from journal bytes, optionally starting at a snapshot.
pub fn replay(bytes: &[u8], snapshot: Option<&Snapshot>) -> Result<Replay, JournalError> {
    let (records, corruption) = read_records(bytes);
    let mut state = match snapshot {
        Some(s) => s.restore()?,
        None => State::default(),
    };
    let from = state.last_seq;
    if (records.len() as u64) < from {
        return Err(JournalError::Snapshot(format!(
            "snapshot at sequence {from} is ahead of the journal ({} records)",
            records.len()
        )));
    }
    for rec in records.iter().filter(|r| r.seq > from) {
        state.apply(rec);
    }
    Ok(Replay {
        state,
        records,
        corruption,
    })
}

pub fn state_from_records(records: &[EventRecord]) -> State {
    let mut state = State::default();
    for r in records {
        state.apply(r);
    }
    state
}

/// Canonical state serialization paired with the sequence number it reflects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub state: serde_json::Value,
}

impl Snapshot {
    pub fn capture(state: &State) -> Snapshot {
        Snapshot {
            seq: state.last_seq,
            state: serde_json::to_value(state).expect("state serializes"),
        }
    }

    pub fn restore(&self) -> Result<State, JournalError> {
        let mut state: State = serde_json::from_value(self.state.clone())
            .map_err(|e| JournalError::Snapshot(e.to_string()))?;
        if state.last_seq != self.seq {
            return Err(JournalError::Snapshot("sequence mismatch".into()));
        }
        state.reindex();
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<(), JournalError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self).expect("snapshot serializes"))?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Snapshot, JournalError> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| JournalError::Snapshot(e.to_string()))
    }
}

enum Backend {
    Memory(Vec<u8>),
    File { file: File, path: PathBuf, fsync: bool },
}

/// The single commit point. Records are kept in memory as well for history
/// queries.
pub struct Journal {
    backend: Backend,
    records: Vec<EventRecord>,
    fail_appends: usize,
}

impl Journal {
    pub fn in_memory() -> Journal {
        Journal {
            backend: Backend::Memory(Vec::new()),
            records: Vec::new(),
            fail_appends: 0,
        }
    }

    /// Opens or creates a journal file and replays it. A corrupt tail is cut
    /// off so that appends continue from the last valid record.
    pub fn open(path: &Path, fsync: bool) -> Result<(Journal, Replay), JournalError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let replay = replay(&bytes, None)?;
        if let Some(c) = &replay.corruption {
            log::warn!(
                "journal {}: discarding records from line {} ({})",
                path.display(),
                c.line,
                c.message
            );
            file.set_len(c.offset)?;
        }
        let journal = Journal {
            backend: Backend::File {
                file,
                path: path.to_path_buf(),
                fsync,
            },
            records: replay.records.clone(),
            fail_appends: 0,
        };
        Ok((journal, replay))
    }

    pub fn next_seq(&self) -> u64 {
        self.records.len() as u64 + 1
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.backend {
            Backend::File { path, .. } => Some(path),
            Backend::Memory(_) => None,
        }
    }

    /// Makes the next `n` appends fail, for exercising recovery paths.
    pub fn inject_append_failures(&mut self, n: usize) {
        self.fail_appends = n;
    }

    /// Appends a single event; returns its sequence number.
    pub fn append(&mut self, at: DateTime<Utc>, event: Event) -> Result<u64, JournalError> {
        let rec = EventRecord::new(self.next_seq(), at, event);
        self.append_records(vec![rec])?;
        Ok(self.records.len() as u64)
    }

    /// Durably appends pre-numbered records as one write. Either all of
    /// them become part of the journal or none do.
    pub fn append_records(&mut self, batch: Vec<EventRecord>) -> Result<(), JournalError> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut expected = self.next_seq();
        let mut buf = Vec::new();
        for rec in &batch {
            if rec.seq != expected {
                return Err(JournalError::Io(io::Error::new(
                    io::ErrorKind::InvalidInput,
                    format!("record has sequence {} but next is {expected}", rec.seq),
                )));
            }
            expected += 1;
            serde_json::to_writer(&mut buf, rec).map_err(io::Error::from)?;
            buf.push(b'\n');
        }
        if self.fail_appends > 0 {
            self.fail_appends -= 1;
            return Err(JournalError::Io(io::Error::other("injected append failure")));
        }
        match &mut self.backend {
            Backend::Memory(bytes) => bytes.extend_from_slice(&buf),
            Backend::File { file, fsync, .. } => {
                let before = file.metadata()?.len();
                if let Err(e) = file.write_all(&buf).and_then(|_| {
                    if *fsync {
                        file.sync_data()
                    } else {
                        Ok(())
                    }
                }) {
                    let _ = file.set_len(before);
                    return Err(e.into());
                }
            }
        }
        self.records.extend(batch);
        Ok(())
    }

    /// The raw journal bytes.
    pub fn bytes(&self) -> Result<Vec<u8>, JournalError> {
        match &self.backend {
            Backend::Memory(b) => Ok(b.clone()),
            Backend::File { path, .. } => Ok(std::fs::read(path)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::InstanceId;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 5, 1, 6, 0, 0).unwrap()
    }

    fn ev(i: u64) -> Event {
        Event::InstanceCompleted { instance: InstanceId(i) }
    }

    #[test]
    fn first_append_is_one_and_recovery_continues() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.ndjson");
        {
            let (mut j, r) = Journal::open(&path, false).unwrap();
            assert!(r.records.is_empty());
            assert_eq!(j.append(t0(), ev(1)).unwrap(), 1);
            for i in 2..=500 {
                j.append(t0(), ev(i)).unwrap();
            }
        }
        let (mut j, r) = Journal::open(&path, false).unwrap();
        assert_eq!(r.records.len(), 500);
        assert!(r.corruption.is_none());
        assert_eq!(j.append(t0(), ev(501)).unwrap(), 501);
    }

    #[test]
    fn corrupt_tail_is_reported_and_cut() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.ndjson");
        {
            let (mut j, _) = Journal::open(&path, false).unwrap();
            for i in 1..=3 {
                j.append(t0(), ev(i)).unwrap();
            }
        }
        let mut bytes = std::fs::read(&path).unwrap();
        let keep = bytes.len();
        bytes.extend_from_slice(b"{\"seq\":4,\"at\":");
        std::fs::write(&path, &bytes).unwrap();

        let (records, corruption) = read_records(&bytes);
        assert_eq!(records.len(), 3);
        let c = corruption.unwrap();
        assert_eq!((c.line, c.offset, c.last_valid_seq), (4, keep as u64, 3));

        let (mut j, r) = Journal::open(&path, false).unwrap();
        assert!(r.corruption.is_some());
        assert_eq!(std::fs::metadata(&path).unwrap().len(), keep as u64);
        assert_eq!(j.append(t0(), ev(4)).unwrap(), 4);
    }

    #[test]
    fn sequence_gap_is_corruption() {
        let mut j = Journal::in_memory();
        j.append(t0(), ev(1)).unwrap();
        let mut bytes = j.bytes().unwrap();
        let line = serde_json::to_string(&EventRecord::new(3, t0(), ev(3))).unwrap();
        bytes.extend_from_slice(line.as_bytes());
        bytes.push(b'\n');
        let (records, c) = read_records(&bytes);
        assert_eq!(records.len(), 1);
        assert!(c.unwrap().message.contains("expected sequence number 2"));
    }

    #[test]
    fn failed_append_leaves_journal_unchanged() {
        let mut j = Journal::in_memory();
        j.append(t0(), ev(1)).unwrap();
        let before = j.bytes().unwrap();
        j.inject_append_failures(1);
        assert!(j.append(t0(), ev(2)).is_err());
        assert_eq!(j.bytes().unwrap(), before);
        assert_eq!(j.append(t0(), ev(2)).unwrap(), 2);
    }

    #[test]
    fn empty_journal_replays_to_empty_state() {
        let r = replay(b"", None).unwrap();
        assert_eq!(r.state.canonical(), State::default().canonical());
    }
}
