//! Deterministic texture codec: piano roll → 2-D texture map → piano roll.
//!
//! The encoder scores every cell as `onset + 0.5 * sustain`, max-pooled over
//! `time_pool` steps, so a struck note reads `0.5 + velocity/127` and a held
//! note reads `0.5`. The decoder reads cells at or above `theta + 0.5` as
//! note starts and cells in `[theta, theta + 0.5)` as continuations.

use ndarray::Array2;
use thiserror::Error;

use crate::chords::{extract_chords, ChordProgression};
use crate::music::{intensity_to_velocity, Note, NoteList, PianoRoll, SegmentMeta, PITCHES};

pub const DEFAULT_THETA: f64 = 0.4;
const SUSTAIN_WEIGHT: f64 = 0.5;
const MIN_INTENSITY: f64 = 1.0 / 127.0;

const MAGIC: &[u8; 4] = b"TXM1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("time_pool must be at least 1")]
    ZeroPool,
    #[error("theta must lie in (0, 1), got {0}")]
    BadTheta(f64),
    #[error("malformed texture map at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

/// The 2-D texture feature map `[128 × ceil(steps / time_pool)]`.
///
/// Entries are finite and non-negative on encode; transforms may push them
/// anywhere, and only decoding clamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureMap {
    pub plane: Array2<f64>,
    pub time_pool: usize,
    pub steps_per_beat: u32,
    pub meta: SegmentMeta,
}

impl TextureMap {
    pub fn columns(&self) -> usize {
        self.plane.ncols()
    }

    /// Same map with a different plane.
    pub fn with_plane(&self, plane: Array2<f64>) -> TextureMap {
        TextureMap {
            plane,
            ..self.clone()
        }
    }

    /// Little-endian grid: magic `TXM1`, then rows, cols and time_pool as
    /// `u32`, then `rows * cols` `f64` values in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (rows, cols) = self.plane.dim();
        let mut out = Vec::with_capacity(16 + rows * cols * 8);
        out.extend_from_slice(MAGIC);
        for v in [rows, cols, self.time_pool] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in self.plane.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses [`TextureMap::to_bytes`] output. The grid format does not carry
    /// the segment header, so defaults are assumed for it.
    pub fn from_bytes(bytes: &[u8], steps_per_beat: u32) -> Result<TextureMap, CodecError> {
        let err = |offset, message: &str| CodecError::Parse {
            offset,
            message: message.into(),
        };
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(err(0, "missing TXM1 header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (rows, cols, time_pool) = (word(4), word(8), word(12));
        if rows != PITCHES {
            return Err(err(4, "row count must be 128"));
        }
        if time_pool == 0 {
            return Err(err(12, "time_pool must be at least 1"));
        }
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(16));
        if expected != Some(bytes.len()) {
            return Err(err(16, "payload size does not match dimensions"));
        }
        let values = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(TextureMap {
            plane: Array2::from_shape_vec((rows, cols), values).expect("size checked"),
            time_pool,
            steps_per_beat,
            meta: SegmentMeta::default(),
        })
    }
}

/// `plane[p, u] = max over the pooled steps of (onset + 0.5 * sustain)`.
pub fn encode_texture(roll: &PianoRoll, time_pool: usize) -> Result<TextureMap, CodecError> {
    if time_pool == 0 {
        return Err(CodecError::ZeroPool);
    }
    let steps = roll.steps();
    let cols = steps.div_ceil(time_pool);
    let mut plane = Array2::zeros((PITCHES, cols));
    for p in 0..PITCHES {
        for t in 0..steps {
            let v = roll.onset[[p, t]] + SUSTAIN_WEIGHT * roll.sustain[[p, t]];
            let cell = &mut plane[[p, t / time_pool]];
            if v > *cell {
                *cell = v;
            }
        }
    }
    Ok(TextureMap {
        plane,
        time_pool,
        steps_per_beat: roll.steps_per_beat,
        meta: roll.meta,
    })
}

/// Nearest representable velocity, as an intensity.
fn snap(intensity: f64) -> f64 {
    intensity_to_velocity(intensity) as f64 / 127.0
}

/// Reconstructs a piano roll from a texture map.
///
/// Per pitch, scanning left to right:
/// * `v >= theta + 0.5` starts a note of intensity `clamp(v - 0.5, 0, 1)`;
/// * `theta <= v < theta + 0.5` continues the note sounding in the previous
///   cell, or else starts a note of intensity `max(v - 0.5, 1/127)`;
/// * `v < theta` is silence.
///
/// Intensities are snapped to the velocity grid (multiples of 1/127) and
/// every decoded cell covers `time_pool` steps.
pub fn decode_texture(map: &TextureMap, theta: f64, steps_per_beat: u32) -> Result<PianoRoll, CodecError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(CodecError::BadTheta(theta));
    }
    let pool = map.time_pool.max(1);
    let cols = map.columns();
    let mut roll = PianoRoll::zeros(cols * pool, steps_per_beat, map.meta);
    let strong = theta + SUSTAIN_WEIGHT;
    for p in 0..PITCHES {
        let mut sounding = false;
        for u in 0..cols {
            let v = map.plane[[p, u]];
            let start = if v >= strong {
                Some(snap((v - SUSTAIN_WEIGHT).clamp(0.0, 1.0)))
            } else if v >= theta {
                (!sounding).then(|| snap((v - SUSTAIN_WEIGHT).clamp(MIN_INTENSITY, 1.0)))
            } else {
                sounding = false;
                continue;
            };
            if let Some(intensity) = start {
                roll.onset[[p, u * pool]] = intensity;
            }
            for t in u * pool..(u + 1) * pool {
                roll.sustain[[p, t]] = 1.0;
            }
            sounding = true;
        }
    }
    Ok(roll)
}

/// Melody skyline: the highest sounding pitch at each step.
///
/// A contour note starts wherever the top pitch changes or the top pitch is
/// re-struck; its velocity comes from the most recent onset at that pitch.
pub fn extract_contour(roll: &PianoRoll) -> NoteList {
    let steps = roll.steps();
    let tpq = roll.meta.ticks_per_quarter as u64;
    let spb = roll.steps_per_beat as u64;
    let to_ticks = |s: usize| (s as u64 * tpq).div_ceil(spb) as u32;

    let mut last_onset = [0.0f64; PITCHES];
    let mut notes: Vec<Note> = Vec::new();
    let mut current: Option<(usize, usize, f64)> = None; // (pitch, start step, intensity)
    let flush = |notes: &mut Vec<Note>, cur: Option<(usize, usize, f64)>, end: usize| {
        if let Some((pitch, start, intensity)) = cur {
            let onset = to_ticks(start);
            notes.push(Note::new(onset, to_ticks(end) - onset, pitch as u8, intensity_to_velocity(intensity)));
        }
    };
    for t in 0..steps {
        for (p, last) in last_onset.iter_mut().enumerate() {
            if roll.onset[[p, t]] > 0.0 {
                *last = roll.onset[[p, t]];
            }
        }
        let top = (0..PITCHES).rev().find(|&p| roll.sustain[[p, t]] > 0.0 || roll.onset[[p, t]] > 0.0);
        match (top, current) {
            (Some(p), Some((cp, _, _))) if p == cp && roll.onset[[p, t]] <= 0.0 => {}
            (Some(p), _) => {
                flush(&mut notes, current, t);
                current = Some((p, t, last_onset[p]));
            }
            (None, _) => {
                flush(&mut notes, current, t);
                current = None;
            }
        }
    }
    flush(&mut notes, current, steps);
    NoteList::new(
        notes,
        roll.meta.ticks_per_quarter,
        roll.meta.tempo_bpm,
        roll.meta.time_signature,
        Some(to_ticks(steps)),
    )
    .expect("contour notes lie inside the roll")
}

/// Contour, texture and chords of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicRepresentation {
    pub contour: NoteList,
    pub texture: TextureMap,
    pub chords: ChordProgression,
}

pub fn represent(roll: &PianoRoll) -> MusicRepresentation {
    MusicRepresentation {
        contour: extract_contour(roll),
        texture: encode_texture(roll, 1).expect("pool of 1 is valid"),
        chords: extract_chords(roll),
    }
}
