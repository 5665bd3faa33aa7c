//! State snapshot files.
//!
//! Binary form: the 5-byte magic `SKVM1`, the six layout fields as
//! little-endian `u64`, then every word as a little-endian `f64`.
//! JSON form: `{"format": "SKVM1", "layout": {..}, "words": [..]}`.

use crate::state::{RegionLayout, State, StateError};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 5] = b"SKVM1";

pub fn to_binary(state: &State) -> Vec<u8> {
    let l = state.layout();
    let mut out = Vec::with_capacity(MAGIC.len() + 48 + 8 * state.len());
    out.extend_from_slice(MAGIC);
    for field in [
        l.register_count,
        l.stack_capacity,
        l.descriptor_capacity,
        l.skill_block_capacity,
        l.code_capacity,
        l.static_memory_capacity,
    ] {
        out.extend_from_slice(&(field as u64).to_le_bytes());
    }
    for w in state.words() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn from_binary(bytes: &[u8]) -> Result<State, StateError> {
    let bad = |m: &str| StateError::Snapshot(m.to_string());
    let rest = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| bad("missing SKVM1 header"))?;
    if rest.len() < 48 {
        return Err(bad("truncated layout"));
    }
    let (head, body) = rest.split_at(48);
    let mut fields = head
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize);
    let mut next = || fields.next().unwrap();
    let layout = RegionLayout {
        register_count: next(),
        stack_capacity: next(),
        descriptor_capacity: next(),
        skill_block_capacity: next(),
        code_capacity: next(),
        static_memory_capacity: next(),
    };
    if body.len() % 8 != 0 {
        return Err(bad("word section is not a multiple of 8 bytes"));
    }
    let words = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    State::from_words(layout, words)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSnapshot {
    format: String,
    layout: RegionLayout,
    words: Vec<f64>,
}

pub fn to_json(state: &State) -> String {
    serde_json::to_string(&JsonSnapshot {
        format: "SKVM1".into(),
        layout: *state.layout(),
        words: state.words().to_vec(),
    })
    .expect("snapshot serialization")
}

pub fn from_json(text: &str) -> Result<State, StateError> {
    let snap: JsonSnapshot =
        serde_json::from_str(text).map_err(|e| StateError::Snapshot(e.to_string()))?;
    if snap.format != "SKVM1" {
        return Err(StateError::Snapshot(format!(
            "unknown format {:?}",
            snap.format
        )));
    }
    State::from_words(snap.layout, snap.words)
}
