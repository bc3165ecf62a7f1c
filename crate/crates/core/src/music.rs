//! Symbolic music: timed note events and the quantized two-plane piano roll.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of MIDI pitches, i.e. rows of every piano-roll plane.
pub const PITCHES: usize = 128;

pub const DEFAULT_TICKS_PER_QUARTER: u16 = 480;
pub const DEFAULT_STEPS_PER_BEAT: u32 = 4;
pub const DEFAULT_TEMPO_BPM: f64 = 120.0;

/// Grid resolutions accepted by [`quantize`].
pub const SUPPORTED_STEPS_PER_BEAT: [u32; 5] = [1, 2, 4, 8, 12];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MusicError {
    #[error("invalid note {index}: {reason}")]
    InvalidNote { index: usize, reason: String },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("unsupported steps per beat {0} (expected one of 1, 2, 4, 8, 12)")]
    UnsupportedGrid(u32),
    #[error("degenerate piece: total length is 0 ticks")]
    ZeroLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Note {
    pub onset: u32,
    pub duration: u32,
    pub pitch: u8,
    pub velocity: u8,
    /// MIDI channel, 0..=15. Melody lines use channel 0.
    #[serde(default)]
    pub channel: u8,
}

impl Note {
    pub fn new(onset: u32, duration: u32, pitch: u8, velocity: u8) -> Self {
        Note {
            onset,
            duration,
            pitch,
            velocity,
            channel: 0,
        }
    }

    pub fn with_channel(mut self, channel: u8) -> Self {
        self.channel = channel;
        self
    }

    /// Exclusive end tick.
    pub fn end(&self) -> u64 {
        self.onset as u64 + self.duration as u64
    }

    fn sort_key(&self) -> (u32, u8, u8, u32, u8) {
        (self.onset, self.pitch, self.channel, self.duration, self.velocity)
    }

    fn check(&self) -> Result<(), String> {
        if self.duration == 0 {
            return Err("duration must be at least 1 tick".into());
        }
        if self.pitch > 127 {
            return Err(format!("pitch {} outside 0..=127", self.pitch));
        }
        if !(1..=127).contains(&self.velocity) {
            return Err(format!("velocity {} outside 1..=127", self.velocity));
        }
        if self.channel > 15 {
            return Err(format!("channel {} outside 0..=15", self.channel));
        }
        Ok(())
    }
}

/// A time signature as (numerator, denominator); the denominator is a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSignature(pub u8, pub u8);

impl Default for TimeSignature {
    fn default() -> Self {
        TimeSignature(4, 4)
    }
}

impl TimeSignature {
    /// Length of one bar in ticks at the given resolution.
    pub fn bar_ticks(&self, ticks_per_quarter: u16) -> u32 {
        ticks_per_quarter as u32 * 4 * self.0 as u32 / self.1 as u32
    }

    fn check(&self) -> Result<(), MusicError> {
        if self.0 == 0 || self.1 == 0 || !self.1.is_power_of_two() {
            return Err(MusicError::InvalidHeader(format!(
                "time signature {}/{}",
                self.0, self.1
            )));
        }
        Ok(())
    }
}

/// Ordered notes plus the segment header.
///
/// Notes are always sorted by `(onset, pitch)` (then channel, duration,
/// velocity) and every note ends within `length_ticks`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteList {
    notes: Vec<Note>,
    pub ticks_per_quarter: u16,
    pub tempo_bpm: f64,
    pub time_signature: TimeSignature,
    length_ticks: u32,
}

impl NoteList {
    /// Builds a validated, sorted note list. `length_ticks` of `None` means
    /// "up to the end of the last note".
    pub fn new(
        mut notes: Vec<Note>,
        ticks_per_quarter: u16,
        tempo_bpm: f64,
        time_signature: TimeSignature,
        length_ticks: Option<u32>,
    ) -> Result<Self, MusicError> {
        if ticks_per_quarter == 0 || ticks_per_quarter > 0x7fff {
            return Err(MusicError::InvalidHeader(format!(
                "ticks_per_quarter {ticks_per_quarter}"
            )));
        }
        if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
            return Err(MusicError::InvalidHeader(format!("tempo_bpm {tempo_bpm}")));
        }
        time_signature.check()?;
        for (index, note) in notes.iter().enumerate() {
            note.check()
                .map_err(|reason| MusicError::InvalidNote { index, reason })?;
        }
        let last_end = notes.iter().map(Note::end).max().unwrap_or(0);
        if last_end > u32::MAX as u64 {
            return Err(MusicError::InvalidHeader("piece longer than u32 ticks".into()));
        }
        let length_ticks = match length_ticks {
            Some(len) if (len as u64) < last_end => {
                let index = notes.iter().position(|n| n.end() > len as u64).unwrap_or(0);
                return Err(MusicError::InvalidNote {
                    index,
                    reason: format!("ends after piece length {len}"),
                });
            }
            Some(len) => len,
            None => last_end as u32,
        };
        notes.sort_by_key(Note::sort_key);
        Ok(NoteList {
            notes,
            ticks_per_quarter,
            tempo_bpm,
            time_signature,
            length_ticks,
        })
    }

    /// Note list with the default header (480 TPQ, 120 BPM, 4/4).
    pub fn from_notes(notes: Vec<Note>) -> Result<Self, MusicError> {
        NoteList::new(
            notes,
            DEFAULT_TICKS_PER_QUARTER,
            DEFAULT_TEMPO_BPM,
            TimeSignature::default(),
            None,
        )
    }

    pub fn empty(ticks_per_quarter: u16, length_ticks: u32) -> Self {
        NoteList::new(
            Vec::new(),
            ticks_per_quarter,
            DEFAULT_TEMPO_BPM,
            TimeSignature::default(),
            Some(length_ticks),
        )
        .expect("valid empty header")
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.notes
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn length_ticks(&self) -> u32 {
        self.length_ticks
    }

    pub fn bar_ticks(&self) -> u32 {
        self.time_signature.bar_ticks(self.ticks_per_quarter)
    }

    /// Same header, different notes.
    pub fn with_notes(&self, notes: Vec<Note>) -> Result<Self, MusicError> {
        NoteList::new(
            notes,
            self.ticks_per_quarter,
            self.tempo_bpm,
            self.time_signature,
            Some(self.length_ticks),
        )
    }

    pub fn lowest_pitch(&self) -> Option<u8> {
        self.notes.iter().map(|n| n.pitch).min()
    }

    pub fn highest_pitch(&self) -> Option<u8> {
        self.notes.iter().map(|n| n.pitch).max()
    }

    /// Notes on one channel, same header.
    pub fn channel(&self, channel: u8) -> NoteList {
        let mut out = self.clone();
        out.notes.retain(|n| n.channel == channel);
        out
    }

    /// True when no two notes overlap in time.
    pub fn is_monophonic(&self) -> bool {
        self.notes
            .windows(2)
            .all(|w| w[0].end() <= w[1].onset as u64)
    }

    pub fn total_velocity(&self) -> u64 {
        self.notes.iter().map(|n| n.velocity as u64).sum()
    }
}

/// Header fields a piano roll carries so it can be turned back into notes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMeta {
    pub ticks_per_quarter: u16,
    pub tempo_bpm: f64,
    pub time_signature: TimeSignature,
}

impl Default for SegmentMeta {
    fn default() -> Self {
        SegmentMeta {
            ticks_per_quarter: DEFAULT_TICKS_PER_QUARTER,
            tempo_bpm: DEFAULT_TEMPO_BPM,
            time_signature: TimeSignature::default(),
        }
    }
}

/// The quasi-piano-roll: an onset plane holding `velocity / 127` at each note
/// start and a sustain plane holding 1.0 wherever a pitch sounds.
///
/// Both planes are `[128 × steps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PianoRoll {
    pub onset: Array2<f64>,
    pub sustain: Array2<f64>,
    pub steps_per_beat: u32,
    pub meta: SegmentMeta,
}

impl PianoRoll {
    pub fn zeros(steps: usize, steps_per_beat: u32, meta: SegmentMeta) -> Self {
        PianoRoll {
            onset: Array2::zeros((PITCHES, steps)),
            sustain: Array2::zeros((PITCHES, steps)),
            steps_per_beat,
            meta,
        }
    }

    pub fn steps(&self) -> usize {
        self.onset.ncols()
    }

    pub fn beats(&self) -> usize {
        self.steps().div_ceil(self.steps_per_beat as usize)
    }

    pub fn is_sounding(&self, pitch: usize, step: usize) -> bool {
        self.sustain[[pitch, step]] > 0.0
    }

    /// Checks the plane invariants: matching shapes, entries in `[0, 1]`, and
    /// every sustain either starting at an onset or continuing a sustain.
    pub fn validate(&self) -> Result<(), MusicError> {
        if self.onset.dim() != self.sustain.dim() || self.onset.nrows() != PITCHES {
            return Err(MusicError::InvalidHeader("plane shape mismatch".into()));
        }
        for ((p, t), &s) in self.sustain.indexed_iter() {
            let o = self.onset[[p, t]];
            if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&o) {
                return Err(MusicError::InvalidHeader(format!(
                    "entry out of [0,1] at pitch {p}, step {t}"
                )));
            }
            if s > 0.0 && o == 0.0 && (t == 0 || self.sustain[[p, t - 1]] == 0.0) {
                return Err(MusicError::InvalidHeader(format!(
                    "orphan sustain at pitch {p}, step {t}"
                )));
            }
        }
        Ok(())
    }
}

/// `value * num / den`, rounded to nearest with ties going down.
fn scale_round_down_ties(value: u64, num: u64, den: u64) -> u64 {
    let scaled = value * num;
    let (q, r) = (scaled / den, scaled % den);
    if 2 * r > den {
        q + 1
    } else {
        q
    }
}

/// Quantizes notes onto a `steps_per_beat` grid.
///
/// Onsets and durations round to the nearest step (ties down); a note that
/// collapses to zero steps still occupies one.
pub fn quantize(notes: &NoteList, steps_per_beat: u32) -> Result<PianoRoll, MusicError> {
    if !SUPPORTED_STEPS_PER_BEAT.contains(&steps_per_beat) {
        return Err(MusicError::UnsupportedGrid(steps_per_beat));
    }
    if notes.length_ticks() == 0 {
        return Err(MusicError::ZeroLength);
    }
    let tpq = notes.ticks_per_quarter as u64;
    let spb = steps_per_beat as u64;
    let spans: Vec<(usize, usize, &Note)> = notes
        .notes()
        .iter()
        .map(|n| {
            let start = scale_round_down_ties(n.onset as u64, spb, tpq) as usize;
            let len = scale_round_down_ties(n.duration as u64, spb, tpq).max(1) as usize;
            (start, len, n)
        })
        .collect();
    let steps = spans
        .iter()
        .map(|&(s, l, _)| s + l)
        .max()
        .unwrap_or(0)
        .max((notes.length_ticks() as u64 * spb).div_ceil(tpq) as usize);

    let meta = SegmentMeta {
        ticks_per_quarter: notes.ticks_per_quarter,
        tempo_bpm: notes.tempo_bpm,
        time_signature: notes.time_signature,
    };
    let mut roll = PianoRoll::zeros(steps, steps_per_beat, meta);
    for (start, len, note) in spans {
        let p = note.pitch as usize;
        let intensity = note.velocity as f64 / 127.0;
        let cell = &mut roll.onset[[p, start]];
        *cell = cell.max(intensity);
        for t in start..start + len {
            roll.sustain[[p, t]] = 1.0;
        }
    }
    Ok(roll)
}

/// Velocity for an onset intensity: `round(intensity * 127)` clamped to `1..=127`.
pub fn intensity_to_velocity(intensity: f64) -> u8 {
    (intensity * 127.0).round().clamp(1.0, 127.0) as u8
}

/// Turns a piano roll back into notes: every onset followed by its contiguous
/// sustain run (up to the next onset at that pitch) becomes one note.
pub fn unquantize(roll: &PianoRoll, ticks_per_quarter: u16) -> NoteList {
    let tpq = ticks_per_quarter as u64;
    let spb = roll.steps_per_beat as u64;
    let to_ticks = |steps: usize| (steps as u64 * tpq).div_ceil(spb) as u32;
    let steps = roll.steps();
    let mut notes = Vec::new();
    for p in 0..PITCHES {
        let mut t = 0;
        while t < steps {
            let intensity = roll.onset[[p, t]];
            if intensity <= 0.0 {
                t += 1;
                continue;
            }
            let mut end = t + 1;
            while end < steps && roll.sustain[[p, end]] > 0.0 && roll.onset[[p, end]] <= 0.0 {
                end += 1;
            }
            let onset = to_ticks(t);
            notes.push(Note::new(
                onset,
                to_ticks(end) - onset,
                p as u8,
                intensity_to_velocity(intensity),
            ));
            t = end;
        }
    }
    NoteList::new(
        notes,
        ticks_per_quarter,
        roll.meta.tempo_bpm,
        roll.meta.time_signature,
        Some(to_ticks(steps)),
    )
    .expect("notes derived from a roll are in range")
}
