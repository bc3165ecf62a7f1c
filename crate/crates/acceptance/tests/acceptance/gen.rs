//! Random inputs for the acceptance checks. Everything is seeded.

use crossmap::music::{Note, NoteList, PianoRoll, SegmentMeta, TimeSignature};
use crossmap::RasterImage;
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::Rng;

pub fn matrix(rng: &mut StdRng) -> Array2<f64> {
    let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=16));
    let scale = [1.0, 10.0, 127.0][rng.random_range(0..3)];
    let signed = rng.random_bool(0.3);
    Array2::from_shape_fn((r, c), |_| {
        let v = rng.random::<f64>() * scale;
        if signed {
            v - scale / 2.0
        } else {
            v
        }
    })
}

/// A 4/4 piece at 480 TPQ, 16th-note aligned, with no same-pitch overlaps
/// and velocities in `min_velocity..=127`.
pub fn grid_piece(rng: &mut StdRng, bars: u32, min_velocity: u8) -> NoteList {
    let steps = bars * 16;
    let mut taken = vec![vec![false; steps as usize]; 128];
    let mut notes = Vec::new();
    for _ in 0..rng.random_range(0..24) {
        let s = rng.random_range(0..steps);
        let l = rng.random_range(1..=8).min(steps - s);
        let p = rng.random_range(21..=108u8);
        let row = &mut taken[p as usize][s as usize..(s + l) as usize];
        if row.iter().any(|&b| b) {
            continue;
        }
        row.fill(true);
        notes.push(Note::new(s * 120, l * 120, p, rng.random_range(min_velocity..=127)));
    }
    NoteList::new(notes, 480, 120.0, TimeSignature(4, 4), Some(steps * 120)).unwrap()
}

/// A monophonic two-bar line with rests.
pub fn melody(rng: &mut StdRng) -> NoteList {
    let mut notes = Vec::new();
    let mut s = 0u32;
    while s < 32 {
        let l = rng.random_range(1..=8).min(32 - s);
        if notes.is_empty() || rng.random_bool(0.85) {
            notes.push(Note::new(s * 120, l * 120, rng.random_range(60..=84), rng.random_range(40..=120)));
        }
        s += l;
    }
    let bpm = rng.random_range(70.0..150.0);
    NoteList::new(notes, 480, bpm, TimeSignature(4, 4), Some(3840)).unwrap()
}

/// A chordal or arpeggiated pattern of one or two bars at an arbitrary TPQ.
pub fn accompaniment(rng: &mut StdRng) -> NoteList {
    let tpq = [96u16, 240, 480, 960][rng.random_range(0..4)];
    let bars = rng.random_range(1..=2u32);
    let step = tpq as u32 / 2;
    let mut notes = Vec::new();
    for i in 0..bars * 8 {
        if !rng.random_bool(0.8) {
            continue;
        }
        let root = rng.random_range(36..=76u8);
        let voices = rng.random_range(1..=3);
        for v in 0..voices {
            let pitch = root + [0u8, 4, 7][v];
            let dur = step * rng.random_range(1..=2u32);
            notes.push(Note::new(i * step, dur.min(bars * 8 * step - i * step), pitch, rng.random_range(30..=110)));
        }
    }
    if notes.is_empty() {
        notes.push(Note::new(0, step, 48, 64));
    }
    NoteList::new(notes, tpq, rng.random_range(80.0..160.0), TimeSignature(4, 4), Some(bars * 4 * tpq as u32))
        .unwrap()
}

/// One beat (4 steps) of distinct pitches, each sounding for a sub-run.
/// Also returns `(pitch, first step, steps)` for the oracle.
pub fn one_beat(rng: &mut StdRng) -> (PianoRoll, Vec<(u8, usize, usize)>) {
    let mut roll = PianoRoll::zeros(4, 4, SegmentMeta::default());
    let mut sounding = Vec::new();
    let count = rng.random_range(1..=6);
    while sounding.len() < count {
        let pitch = rng.random_range(24..=96u8);
        if sounding.iter().any(|&(p, _, _)| p == pitch) {
            continue;
        }
        let start = rng.random_range(0..4usize);
        let len = rng.random_range(1..=4 - start);
        roll.onset[[pitch as usize, start]] = rng.random_range(1..=127u8) as f64 / 127.0;
        for t in start..start + len {
            roll.sustain[[pitch as usize, t]] = 1.0;
        }
        sounding.push((pitch, start, len));
    }
    (roll, sounding)
}

pub fn image(rng: &mut StdRng) -> RasterImage {
    let (w, h) = (rng.random_range(1..=9), rng.random_range(1..=9));
    let c = if rng.random_bool(0.5) { 1 } else { 3 };
    let samples = (0..w * h * c).map(|_| rng.random()).collect();
    RasterImage::new(w, h, c, samples).unwrap()
}

/// Arbitrary (non-grid) piece for format checks, multiple channels.
pub fn any_piece(rng: &mut StdRng) -> NoteList {
    let tpq = [96u16, 480, 960][rng.random_range(0..3)];
    let notes = (0..rng.random_range(0..30))
        .map(|_| {
            Note::new(rng.random_range(0..4000), rng.random_range(1..900), rng.random_range(0..=127), rng.random_range(1..=127))
                .with_channel(rng.random_range(0..16))
        })
        .collect();
    let ts = TimeSignature(rng.random_range(1..=12), [2u8, 4, 8][rng.random_range(0..3)]);
    NoteList::new(notes, tpq, rng.random_range(40.0..200.0), ts, None).unwrap()
}
