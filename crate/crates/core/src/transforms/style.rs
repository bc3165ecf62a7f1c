use crate::chords::{extract_chords, Chord};
use crate::codec::{extract_contour, MusicRepresentation};
use crate::music::{quantize, Note, NoteList, DEFAULT_STEPS_PER_BEAT};

use super::TransformError;

/// Channel carrying the melody in compositional-transfer output.
pub const MELODY_CHANNEL: u8 = 0;
/// Channel carrying the re-harmonized accompaniment.
pub const ACCOMPANIMENT_CHANNEL: u8 = 1;
/// Minimum gap, in semitones, between the accompaniment's highest pitch and
/// the melody's lowest after register alignment.
pub const REGISTER_MARGIN: i32 = 2;

/// Contour from `content`, texture and chords from `style`.
pub fn style_fuse(content: &MusicRepresentation, style: &MusicRepresentation) -> MusicRepresentation {
    MusicRepresentation {
        contour: content.contour.clone(),
        texture: style.texture.clone(),
        chords: style.chords.clone(),
    }
}

/// Skyline of a piece at the default grid (empty for zero-length pieces).
pub fn melody_skyline(notes: &NoteList) -> NoteList {
    match quantize(notes, DEFAULT_STEPS_PER_BEAT) {
        Ok(roll) => extract_contour(&roll),
        Err(_) => NoteList::empty(notes.ticks_per_quarter, 0),
    }
}

/// Nearest pitch whose class is a chord tone; ties go down.
pub fn snap_to_chord(pitch: u8, chord: &Chord) -> u8 {
    let p = pitch as i32;
    for d in 0..=6 {
        for q in [p - d, p + d] {
            if (0..=127).contains(&q) && chord.contains_pc(q as u8) {
                return q as u8;
            }
        }
    }
    pitch
}

fn rescale(ticks: u32, from: u16, to: u16) -> u32 {
    if from == to {
        return ticks;
    }
    let scaled = ticks as u64 * to as u64;
    let (q, r) = (scaled / from as u64, scaled % from as u64);
    (if 2 * r > from as u64 { q + 1 } else { q }) as u32
}

/// Fuses a melody with another piece's accompaniment.
///
/// 1. The accompaniment moves onto the melody's tick grid and tempo, and is
///    looped or cut to the melody's bar count.
/// 2. It drops by whole octaves until its highest pitch sits at least
///    [`REGISTER_MARGIN`] semitones under the melody's lowest pitch.
/// 3. Every accompaniment note is snapped to the nearest tone of the melody
///    chord for the beat it starts in; chordless beats are left alone.
///
/// The melody (its skyline, if it was polyphonic) is kept as is on
/// [`MELODY_CHANNEL`]; the accompaniment goes to [`ACCOMPANIMENT_CHANNEL`].
pub fn compositional_transfer(melody: &NoteList, accompaniment: &NoteList) -> Result<NoteList, TransformError> {
    if melody.is_empty() {
        return Err(TransformError::EmptyInput("melody"));
    }
    if accompaniment.is_empty() {
        return Err(TransformError::EmptyInput("accompaniment"));
    }
    let line = if melody.is_monophonic() {
        melody.clone()
    } else {
        extract_contour(&quantize(melody, DEFAULT_STEPS_PER_BEAT)?)
    };
    let tpq = line.ticks_per_quarter;
    let bar = line.bar_ticks().max(1);
    let target = line.length_ticks().div_ceil(bar).max(1) * bar;

    let from = accompaniment.ticks_per_quarter;
    let period = rescale(accompaniment.length_ticks(), from, tpq).max(1);
    let mut accomp = Vec::new();
    let mut offset = 0u32;
    while offset < target {
        for n in accompaniment.notes() {
            let onset = offset + rescale(n.onset, from, tpq);
            if onset >= target {
                continue;
            }
            let duration = rescale(n.duration, from, tpq).max(1).min(target - onset);
            accomp.push(Note {
                onset,
                duration,
                channel: ACCOMPANIMENT_CHANNEL,
                ..*n
            });
        }
        offset += period;
    }

    let low = line.lowest_pitch().expect("melody is nonempty") as i32;
    let high = accomp.iter().map(|n| n.pitch as i32).max().unwrap_or(0);
    let excess = high + REGISTER_MARGIN - low;
    let shift = if excess > 0 { -12 * ((excess + 11) / 12) } else { 0 };

    let chords = extract_chords(&quantize(&line, DEFAULT_STEPS_PER_BEAT)?);
    let mut seen = std::collections::HashSet::new();
    let accomp: Vec<Note> = accomp
        .into_iter()
        .filter_map(|n| {
            let pitch = n.pitch as i32 + shift;
            if pitch < 0 {
                return None;
            }
            let beat = (n.onset / tpq as u32) as usize;
            let pitch = match chords.beat(beat) {
                Some(chord) => snap_to_chord(pitch as u8, chord),
                None => pitch as u8,
            };
            seen.insert((n.onset, pitch)).then_some(Note { pitch, ..n })
        })
        .collect();

    let mut notes: Vec<Note> = line
        .notes()
        .iter()
        .map(|n| n.with_channel(MELODY_CHANNEL))
        .collect();
    notes.extend(accomp);
    Ok(NoteList::new(
        notes,
        tpq,
        line.tempo_bpm,
        line.time_signature,
        Some(target.max(line.length_ticks())),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chords::ChordQuality;
    use crate::codec::represent;
    use crate::music::TimeSignature;

    fn c_major() -> Chord {
        Chord {
            root_pc: 0,
            quality: ChordQuality::Major,
            chroma: ChordQuality::Major.chroma(0),
            bass_pc: 0,
        }
    }

    #[test]
    fn chord_tones_are_fixed_points() {
        assert_eq!(snap_to_chord(55, &c_major()), 55);
        assert_eq!(snap_to_chord(60, &c_major()), 60);
    }

    #[test]
    fn snapping_prefers_nearest_then_lower() {
        assert_eq!(snap_to_chord(57, &c_major()), 55);
        assert_eq!(snap_to_chord(59, &c_major()), 60);
        assert_eq!(snap_to_chord(62, &c_major()), 60);
        assert_eq!(snap_to_chord(127, &c_major()), 127);
        assert_eq!(snap_to_chord(1, &c_major()), 0);
    }

    fn melody() -> NoteList {
        // C E G C over one 4/4 bar.
        NoteList::new(
            vec![
                Note::new(0, 480, 72, 100),
                Note::new(480, 480, 76, 90),
                Note::new(960, 480, 79, 80),
                Note::new(1440, 480, 72, 70),
            ],
            480,
            90.0,
            TimeSignature(4, 4),
            Some(1920),
        )
        .unwrap()
    }

    fn accompaniment() -> NoteList {
        // Half-bar pattern at 96 TPQ, pitched above the melody.
        NoteList::new(
            vec![Note::new(0, 96, 74, 60), Note::new(96, 96, 81, 60)],
            96,
            140.0,
            TimeSignature(4, 4),
            Some(192),
        )
        .unwrap()
    }

    #[test]
    fn transfer_aligns_tempo_length_register_and_chords() {
        let out = compositional_transfer(&melody(), &accompaniment()).unwrap();
        assert_eq!(out.ticks_per_quarter, 480);
        assert_eq!(out.tempo_bpm, 90.0);
        assert_eq!(out.length_ticks(), 1920);

        let mel = out.channel(MELODY_CHANNEL);
        assert_eq!(mel.notes(), melody().notes());

        let acc = out.channel(ACCOMPANIMENT_CHANNEL);
        // One-bar loop of a two-beat pattern: 4 notes.
        assert_eq!(acc.len(), 4);
        let low = melody().lowest_pitch().unwrap();
        let chords = extract_chords(&quantize(&melody(), 4).unwrap());
        for n in acc.notes() {
            assert!(n.pitch <= low, "register: {n:?}");
            let chord = chords.beat((n.onset / 480) as usize).unwrap();
            assert!(chord.contains_pc(n.pitch % 12));
            assert_eq!(n.velocity, 60);
            assert_eq!(n.duration, 480);
        }
    }

    #[test]
    fn transfer_keeps_melody_skyline() {
        let out = compositional_transfer(&melody(), &accompaniment()).unwrap();
        assert_eq!(
            melody_skyline(&out.channel(MELODY_CHANNEL)),
            melody_skyline(&melody())
        );
    }

    #[test]
    fn long_accompaniment_is_truncated() {
        let long = NoteList::new(
            vec![Note::new(0, 3840, 40, 80), Note::new(2400, 480, 43, 80)],
            480,
            120.0,
            TimeSignature(4, 4),
            Some(3840),
        )
        .unwrap();
        let out = compositional_transfer(&melody(), &long).unwrap();
        let acc = out.channel(ACCOMPANIMENT_CHANNEL);
        assert_eq!(acc.len(), 1);
        assert_eq!(acc.notes()[0].duration, 1920);
    }

    #[test]
    fn empty_inputs_are_errors() {
        let empty = NoteList::empty(480, 1920);
        assert!(compositional_transfer(&empty, &accompaniment()).is_err());
        assert!(compositional_transfer(&melody(), &empty).is_err());
    }

    #[test]
    fn style_fuse_selects_slots() {
        let a = represent(&quantize(&melody(), 4).unwrap());
        let b = represent(&quantize(&accompaniment(), 4).unwrap());
        assert_eq!(style_fuse(&a, &a), a);
        let ab = style_fuse(&a, &b);
        let ba = style_fuse(&b, &a);
        assert_eq!(ab.contour, a.contour);
        assert_eq!(ab.texture, b.texture);
        assert_eq!(ab.chords, b.chords);
        assert_eq!(ba.contour, b.contour);
        assert_eq!(ba.texture, a.texture);
        assert_eq!(style_fuse(&ab, &b), ab);
    }
}
