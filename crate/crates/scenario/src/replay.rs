//! Journal replay checks: the state rebuilt from the journal must equal the
//! live state, both at the end and after every prefix of the journal.

use agriflow_core::engine::{EventRecord, State};
use agriflow_core::journal::{read_records, state_from_records, Snapshot};
use agriflow_core::platform::Platform;
use sha2::{Digest, Sha256};

use crate::ScenarioError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayCheck {
    pub records: usize,
    pub identical: bool,
}

/// Replays the platform's journal bytes from empty state and compares the
/// result with the live state under canonical serialization.
pub fn replay_check(platform: &Platform) -> Result<ReplayCheck, ScenarioError> {
    let engine = platform.engine();
    let bytes = engine.journal().bytes()?;
    let (records, corruption) = read_records(&bytes);
    if let Some(c) = corruption {
        return Err(ScenarioError::Replay(format!("journal corrupt: {c:?}")));
    }
    let replayed = state_from_records(&records);
    Ok(ReplayCheck {
        records: records.len(),
        identical: replayed.canonical() == engine.state().canonical(),
    })
}

/// Compares a saved snapshot with the state replayed from the journal up to
/// the snapshot's sequence number.
pub fn snapshot_matches(journal: &[u8], snapshot: &Snapshot) -> Result<bool, ScenarioError> {
    let (records, corruption) = read_records(journal);
    if corruption.is_some() || (records.len() as u64) < snapshot.seq {
        return Ok(false);
    }
    let replayed = state_from_records(&records[..snapshot.seq as usize]);
    let restored = snapshot.restore()?;
    Ok(replayed.canonical() == restored.canonical())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruncationCheck {
    /// Boundaries checked, the empty journal included.
    pub boundaries: usize,
    /// Boundaries whose replay did not parse cleanly into exactly the
    /// records before it.
    pub corrupt: Vec<usize>,
    /// Boundaries whose replayed state differs from the live state recorded
    /// at that point.
    pub mismatched: Vec<usize>,
}

impl TruncationCheck {
    pub fn passed(&self) -> bool {
        self.boundaries > 0 && self.corrupt.is_empty() && self.mismatched.is_empty()
    }
}

fn digest(state: &State) -> [u8; 32] {
    Sha256::digest(state.canonical()).into()
}

fn boundaries(bytes: &[u8]) -> Vec<usize> {
    std::iter::once(0)
        .chain(bytes.iter().enumerate().filter(|(_, b)| **b == b'\n').map(|(i, _)| i + 1))
        .collect()
}

/// Cuts the journal at every record boundary and replays each prefix,
/// comparing against `live`, the hash of the live state after each sequence
/// number (index 0 being the empty state).
///
/// `exhaustive` re-parses every truncated prefix from its bytes; otherwise
/// the journal is parsed once and the prefixes are replayed incrementally,
/// which yields the same states because records are parsed line by line.
pub fn truncation_check(bytes: &[u8], live: &[[u8; 32]], exhaustive: bool) -> TruncationCheck {
    let cuts = boundaries(bytes);
    let mut out = TruncationCheck {
        boundaries: cuts.len(),
        ..TruncationCheck::default()
    };
    let expected = |k: usize| live.get(k).copied();
    if exhaustive {
        for (k, cut) in cuts.iter().enumerate() {
            let (records, corruption) = read_records(&bytes[..*cut]);
            if corruption.is_some() || records.len() != k {
                out.corrupt.push(k);
                continue;
            }
            if expected(k) != Some(digest(&state_from_records(&records))) {
                out.mismatched.push(k);
            }
        }
    } else {
        let (records, corruption) = read_records(bytes);
        if corruption.is_some() || records.len() + 1 != cuts.len() {
            out.corrupt.push(records.len());
        }
        let mut state = State::default();
        if expected(0) != Some(digest(&state)) {
            out.mismatched.push(0);
        }
        for (i, rec) in records.iter().enumerate() {
            state.apply(rec);
            if expected(i + 1) != Some(digest(&state)) {
                out.mismatched.push(i + 1);
            }
        }
    }
    out
}

/// Records of a journal, for callers that only have bytes.
pub fn records(bytes: &[u8]) -> Result<Vec<EventRecord>, ScenarioError> {
    match read_records(bytes) {
        (r, None) => Ok(r),
        (_, Some(c)) => Err(ScenarioError::Replay(format!("journal corrupt: {c:?}"))),
    }
}
