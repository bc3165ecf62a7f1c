//! Per-beat chord labels by chroma template matching.
//!
//! Each beat's sounding steps are folded into a 12-bin pitch-class histogram
//! (one unit per sounding step). Every template at every root is scored as
//! `matched mass - 0.3 * unmatched mass`; the best score wins, with ties going
//! to the smaller template, then the lower root, then template order.

use serde::Serialize;
use serde_json::Value;

use crate::music::{PianoRoll, PITCHES};
use crate::notes_json::{int_field, object, reject_unknown, SchemaError};

/// Weight of histogram mass that falls outside a template.
pub const UNMATCHED_PENALTY: f64 = 0.3;

const TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChordQuality {
    Major,
    Minor,
    Diminished,
    Augmented,
    Major7,
    Minor7,
    Dominant7,
    Sus4,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; 8] = [
        ChordQuality::Major,
        ChordQuality::Minor,
        ChordQuality::Diminished,
        ChordQuality::Augmented,
        ChordQuality::Major7,
        ChordQuality::Minor7,
        ChordQuality::Dominant7,
        ChordQuality::Sus4,
    ];

    /// Intervals above the root.
    pub fn intervals(&self) -> &'static [u8] {
        match self {
            ChordQuality::Major => &[0, 4, 7],
            ChordQuality::Minor => &[0, 3, 7],
            ChordQuality::Diminished => &[0, 3, 6],
            ChordQuality::Augmented => &[0, 4, 8],
            ChordQuality::Major7 => &[0, 4, 7, 11],
            ChordQuality::Minor7 => &[0, 3, 7, 10],
            ChordQuality::Dominant7 => &[0, 4, 7, 10],
            ChordQuality::Sus4 => &[0, 5, 7],
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            ChordQuality::Major => "maj",
            ChordQuality::Minor => "min",
            ChordQuality::Diminished => "dim",
            ChordQuality::Augmented => "aug",
            ChordQuality::Major7 => "maj7",
            ChordQuality::Minor7 => "min7",
            ChordQuality::Dominant7 => "dom7",
            ChordQuality::Sus4 => "sus4",
        }
    }

    pub fn from_symbol(s: &str) -> Option<ChordQuality> {
        ChordQuality::ALL.into_iter().find(|q| q.symbol() == s)
    }

    /// 12-bit pitch-class mask of this quality built on `root`.
    pub fn chroma(&self, root: u8) -> u16 {
        self.intervals()
            .iter()
            .fold(0u16, |m, &i| m | 1 << ((root + i) % 12))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chord {
    pub root_pc: u8,
    pub quality: ChordQuality,
    /// Bit `pc` set for every chord tone.
    pub chroma: u16,
    pub bass_pc: u8,
}

impl Chord {
    pub fn contains_pc(&self, pc: u8) -> bool {
        self.chroma & (1 << (pc % 12)) != 0
    }

    pub fn pitch_classes(&self) -> Vec<u8> {
        (0..12).filter(|&pc| self.contains_pc(pc)).collect()
    }
}

/// One entry per beat; `None` marks a silent beat (no chord).
#[derive(Debug, Clone, PartialEq)]
pub struct ChordProgression {
    pub steps_per_beat: u32,
    beats: Vec<Option<Chord>>,
}

impl ChordProgression {
    pub fn new(steps_per_beat: u32, beats: Vec<Option<Chord>>) -> Self {
        ChordProgression {
            steps_per_beat,
            beats,
        }
    }

    pub fn beats(&self) -> &[Option<Chord>] {
        &self.beats
    }

    pub fn beat(&self, index: usize) -> Option<&Chord> {
        self.beats.get(index).and_then(Option::as_ref)
    }
}

/// Best `(root, quality)` for a pitch-class histogram, or `None` when the
/// histogram is empty.
pub fn match_template(histogram: &[f64; 12]) -> Option<(u8, ChordQuality)> {
    let total: f64 = histogram.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut best: Option<(f64, u8, ChordQuality)> = None;
    // Candidates are visited in tie-break order, so only a strictly better
    // score replaces the incumbent.
    let mut order: Vec<(usize, u8, ChordQuality)> = Vec::with_capacity(96);
    for quality in ChordQuality::ALL {
        for root in 0..12u8 {
            order.push((quality.intervals().len(), root, quality));
        }
    }
    order.sort();
    for (_, root, quality) in order {
        let chroma = quality.chroma(root);
        let matched: f64 = (0..12).filter(|pc| chroma & (1 << pc) != 0).map(|pc| histogram[pc]).sum();
        let score = matched - UNMATCHED_PENALTY * (total - matched);
        match best {
            Some((s, _, _)) if score <= s + TIE_EPSILON => {}
            _ => best = Some((score, root, quality)),
        }
    }
    best.map(|(_, root, quality)| (root, quality))
}

pub fn extract_chords(roll: &PianoRoll) -> ChordProgression {
    let spb = roll.steps_per_beat as usize;
    let steps = roll.steps();
    let beats = (0..roll.beats())
        .map(|beat| {
            let mut histogram = [0.0f64; 12];
            let mut lowest: Option<usize> = None;
            for t in beat * spb..((beat + 1) * spb).min(steps) {
                for p in 0..PITCHES {
                    if roll.sustain[[p, t]] > 0.0 || roll.onset[[p, t]] > 0.0 {
                        histogram[p % 12] += 1.0;
                        lowest = Some(lowest.map_or(p, |l| l.min(p)));
                    }
                }
            }
            let (root_pc, quality) = match_template(&histogram)?;
            Some(Chord {
                root_pc,
                quality,
                chroma: quality.chroma(root_pc),
                bass_pc: (lowest? % 12) as u8,
            })
        })
        .collect();
    ChordProgression::new(roll.steps_per_beat, beats)
}

#[derive(Serialize)]
struct ChordOut {
    bass: u8,
    chroma: Vec<u8>,
    quality: &'static str,
    root: u8,
}

#[derive(Serialize)]
struct ProgressionOut {
    beats: Vec<Option<ChordOut>>,
    steps_per_beat: u32,
}

/// Sibling of the note-list format: `{"beats": [...], "steps_per_beat": n}`
/// with `null` for no-chord beats.
pub fn write_chords_json(progression: &ChordProgression) -> String {
    let out = ProgressionOut {
        beats: progression
            .beats
            .iter()
            .map(|c| {
                c.map(|c| ChordOut {
                    bass: c.bass_pc,
                    chroma: c.pitch_classes(),
                    quality: c.quality.symbol(),
                    root: c.root_pc,
                })
            })
            .collect(),
        steps_per_beat: progression.steps_per_beat,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("plain data serializes");
    text.push('\n');
    text
}

pub fn read_chords_json(text: &str) -> Result<ChordProgression, SchemaError> {
    let root: Value = serde_json::from_str(text).map_err(|e| SchemaError::Syntax(e.to_string()))?;
    let map = object(&root, "$")?;
    reject_unknown(map, &["beats", "steps_per_beat"], "")?;
    let spb = int_field(map, "steps_per_beat", "steps_per_beat", 1..=u32::MAX as i64, None)? as u32;
    let raw = map
        .get("beats")
        .and_then(Value::as_array)
        .ok_or_else(|| SchemaError::field("beats", "expected an array"))?;
    let mut beats = Vec::with_capacity(raw.len());
    for (i, b) in raw.iter().enumerate() {
        if b.is_null() {
            beats.push(None);
            continue;
        }
        let path = format!("beats[{i}]");
        let m = object(b, &path)?;
        reject_unknown(m, &["bass", "chroma", "quality", "root"], &format!("{path}."))?;
        let root_pc = int_field(m, "root", &format!("{path}.root"), 0..=11, None)? as u8;
        let bass_pc = int_field(m, "bass", &format!("{path}.bass"), 0..=11, None)? as u8;
        let quality = m
            .get("quality")
            .and_then(Value::as_str)
            .and_then(ChordQuality::from_symbol)
            .ok_or_else(|| SchemaError::field(format!("{path}.quality"), "unknown chord quality"))?;
        let chroma = quality.chroma(root_pc);
        let listed: Option<u16> = m.get("chroma").and_then(Value::as_array).and_then(|pcs| {
            pcs.iter()
                .map(|v| v.as_u64().filter(|&pc| pc < 12))
                .try_fold(0u16, |acc, pc| pc.map(|pc| acc | 1 << pc))
        });
        if listed != Some(chroma) {
            return Err(SchemaError::field(
                format!("{path}.chroma"),
                "must list the chord tones of root and quality",
            ));
        }
        beats.push(Some(Chord {
            root_pc,
            quality,
            chroma,
            bass_pc,
        }));
    }
    Ok(ChordProgression::new(spb, beats))
}
