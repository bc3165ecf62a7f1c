//! Lossless textual note-list format.
//!
//! ```text
//! {
//!   "length_ticks": 1920,
//!   "notes": [
//!     { "channel": 0, "duration": 480, "onset": 0, "pitch": 60, "velocity": 100 }
//!   ],
//!   "tempo_bpm": 120.0,
//!   "ticks_per_quarter": 480,
//!   "time_signature": [4, 4]
//! }
//! ```
//!
//! Keys are written in sorted order; `channel` defaults to 0 on read.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::music::{Note, NoteList, TimeSignature};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("not valid JSON: {0}")]
    Syntax(String),
    #[error("schema violation at `{field}`: {message}")]
    Field { field: String, message: String },
}

impl SchemaError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError::Field {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Name of the offending field, if the error concerns one.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            SchemaError::Field { field, .. } => Some(field),
            SchemaError::Syntax(_) => None,
        }
    }
}

// Field order is alphabetical so output keys come out sorted.
#[derive(Serialize)]
struct NoteOut {
    channel: u8,
    duration: u32,
    onset: u32,
    pitch: u8,
    velocity: u8,
}

#[derive(Serialize)]
struct NoteListOut {
    length_ticks: u32,
    notes: Vec<NoteOut>,
    tempo_bpm: f64,
    ticks_per_quarter: u16,
    time_signature: [u8; 2],
}

pub fn write_notes_json(notes: &NoteList) -> String {
    let out = NoteListOut {
        length_ticks: notes.length_ticks(),
        notes: notes
            .notes()
            .iter()
            .map(|n| NoteOut {
                channel: n.channel,
                duration: n.duration,
                onset: n.onset,
                pitch: n.pitch,
                velocity: n.velocity,
            })
            .collect(),
        tempo_bpm: notes.tempo_bpm,
        ticks_per_quarter: notes.ticks_per_quarter,
        time_signature: [notes.time_signature.0, notes.time_signature.1],
    };
    let mut text = serde_json::to_string_pretty(&out).expect("plain data serializes");
    text.push('\n');
    text
}

pub(crate) fn object<'a>(value: &'a Value, field: &str) -> Result<&'a Map<String, Value>, SchemaError> {
    value
        .as_object()
        .ok_or_else(|| SchemaError::field(field, "expected an object"))
}

pub(crate) fn reject_unknown(map: &Map<String, Value>, allowed: &[&str], prefix: &str) -> Result<(), SchemaError> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(SchemaError::field(format!("{prefix}{k}"), "unknown field")),
        None => Ok(()),
    }
}

pub(crate) fn int_field(
    map: &Map<String, Value>,
    key: &str,
    path: &str,
    range: std::ops::RangeInclusive<i64>,
    default: Option<i64>,
) -> Result<i64, SchemaError> {
    let value = match map.get(key) {
        Some(v) => v,
        None => {
            return default.ok_or_else(|| SchemaError::field(path, "missing"));
        }
    };
    let n = value
        .as_i64()
        .ok_or_else(|| SchemaError::field(path, format!("expected an integer, got {value}")))?;
    if !range.contains(&n) {
        return Err(SchemaError::field(
            path,
            format!("{n} outside {}..={}", range.start(), range.end()),
        ));
    }
    Ok(n)
}

pub fn read_notes_json(text: &str) -> Result<NoteList, SchemaError> {
    let root: Value = serde_json::from_str(text).map_err(|e| SchemaError::Syntax(e.to_string()))?;
    let map = object(&root, "$")?;
    reject_unknown(
        map,
        &["length_ticks", "notes", "tempo_bpm", "ticks_per_quarter", "time_signature"],
        "",
    )?;

    let tpq = int_field(map, "ticks_per_quarter", "ticks_per_quarter", 1..=0x7fff, None)? as u16;
    let tempo_bpm = map
        .get("tempo_bpm")
        .ok_or_else(|| SchemaError::field("tempo_bpm", "missing"))?
        .as_f64()
        .filter(|t| t.is_finite() && *t > 0.0)
        .ok_or_else(|| SchemaError::field("tempo_bpm", "expected a positive number"))?;
    let ts = match map.get("time_signature") {
        Some(Value::Array(parts)) if parts.len() == 2 => {
            let part = |i: usize| {
                parts[i]
                    .as_u64()
                    .filter(|&v| (1..=255).contains(&v))
                    .ok_or_else(|| SchemaError::field(format!("time_signature[{i}]"), "expected 1..=255"))
            };
            let (num, den) = (part(0)? as u8, part(1)? as u8);
            if !den.is_power_of_two() {
                return Err(SchemaError::field("time_signature[1]", "denominator must be a power of two"));
            }
            TimeSignature(num, den)
        }
        Some(_) => return Err(SchemaError::field("time_signature", "expected [numerator, denominator]")),
        None => return Err(SchemaError::field("time_signature", "missing")),
    };
    let length = match map.get("length_ticks") {
        Some(_) => Some(int_field(map, "length_ticks", "length_ticks", 0..=u32::MAX as i64, None)? as u32),
        None => None,
    };
    let raw_notes = map
        .get("notes")
        .ok_or_else(|| SchemaError::field("notes", "missing"))?
        .as_array()
        .ok_or_else(|| SchemaError::field("notes", "expected an array"))?;

    let mut notes = Vec::with_capacity(raw_notes.len());
    for (i, raw) in raw_notes.iter().enumerate() {
        let at = |k: &str| format!("notes[{i}].{k}");
        let n = object(raw, &format!("notes[{i}]"))?;
        reject_unknown(n, &["channel", "duration", "onset", "pitch", "velocity"], &format!("notes[{i}]."))?;
        notes.push(Note {
            onset: int_field(n, "onset", &at("onset"), 0..=u32::MAX as i64, None)? as u32,
            duration: int_field(n, "duration", &at("duration"), 1..=u32::MAX as i64, None)? as u32,
            pitch: int_field(n, "pitch", &at("pitch"), 0..=127, None)? as u8,
            velocity: int_field(n, "velocity", &at("velocity"), 1..=127, None)? as u8,
            channel: int_field(n, "channel", &at("channel"), 0..=15, Some(0))? as u8,
        });
    }
    NoteList::new(notes, tpq, tempo_bpm, ts, length).map_err(|e| SchemaError::field("notes", e.to_string()))
}
