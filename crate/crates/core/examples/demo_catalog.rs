//! Writes a small anchor-pair catalog: three sketch/melody pairs and three
//! image/accompaniment pairs.
//!
//! ```text
//! cargo run -p crossmap-core --example demo_catalog -- data/demo
//! ```

use std::fs;
use std::path::PathBuf;

use crossmap::image::{write_pnm, RasterImage};
use crossmap::midi::write_midi;
use crossmap::music::{Note, NoteList, TimeSignature};
use crossmap::notes_json::write_notes_json;

fn sketch(kind: usize) -> RasterImage {
    let (w, h) = (32usize, 32usize);
    let mut px = vec![255u8; w * h];
    for i in 0..w {
        let y = match kind {
            0 => h - 1 - i * (h - 1) / (w - 1),
            1 => h / 2 + ((i as f64 / 4.0).sin() * 8.0) as usize,
            _ => (i * i) / w,
        };
        for dy in 0..2 {
            px[(y + dy).min(h - 1) * w + i] = 0;
        }
    }
    RasterImage::new(w, h, 1, px).unwrap()
}

fn painting(kind: usize) -> RasterImage {
    let (w, h) = (48usize, 40usize);
    let mut px = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = match kind {
                0 => (40 + 4 * x, 60 + 3 * y, 200 - 2 * x),
                1 => (220 - 3 * y, 120 + (x % 8) * 10, 50 + 2 * y),
                _ => (90 + ((x / 6 + y / 6) % 2) * 120, 80 + 2 * x, 140),
            };
            px.extend([r as u8, g as u8, b as u8]);
        }
    }
    RasterImage::new(w, h, 3, px).unwrap()
}

fn piece(notes: Vec<Note>, tpq: u16, bpm: f64, bars: u32) -> NoteList {
    let len = bars * 4 * tpq as u32;
    NoteList::new(notes, tpq, bpm, TimeSignature(4, 4), Some(len)).unwrap()
}

fn melody(kind: usize) -> NoteList {
    let lines: [&[(u32, u32, u8)]; 3] = [
        &[(0, 2, 72), (2, 2, 74), (4, 4, 76), (8, 4, 79), (12, 4, 77), (16, 8, 76), (24, 8, 72)],
        &[(0, 4, 69), (4, 4, 72), (8, 2, 76), (10, 2, 74), (12, 4, 72), (16, 4, 71), (20, 4, 72), (24, 8, 69)],
        &[(0, 6, 79), (6, 2, 77), (8, 4, 76), (12, 4, 74), (16, 4, 72), (20, 4, 74), (24, 8, 76)],
    ];
    let notes = lines[kind]
        .iter()
        .enumerate()
        .map(|(i, &(on, dur, p))| Note::new(on * 120, dur * 120, p, 80 + (i as u8 % 3) * 12))
        .collect();
    piece(notes, 480, [96.0, 84.0, 108.0][kind], 2)
}

fn accompaniment(kind: usize) -> NoteList {
    match kind {
        // Alberti bass at 96 TPQ, one bar.
        0 => {
            let notes = [48u8, 55, 52, 55, 48, 55, 52, 55]
                .iter()
                .enumerate()
                .map(|(i, &p)| Note::new(i as u32 * 48, 48, p, 64))
                .collect();
            piece(notes, 96, 132.0, 1)
        }
        // Block chords on beats one and three, half notes.
        1 => {
            let mut notes = Vec::new();
            for (beat, chord) in [(0u32, [57u8, 60, 64]), (2, [53, 57, 60])] {
                for p in chord {
                    notes.push(Note::new(beat * 480, 960, p, 72));
                }
            }
            piece(notes, 480, 100.0, 1)
        }
        // Broken arpeggio, two bars, above middle C.
        _ => {
            let notes = (0..16)
                .map(|i| Note::new(i * 240, 240, [60u8, 64, 67, 72][i as usize % 4], 58 + (i % 4) as u8 * 6))
                .collect();
            piece(notes, 480, 120.0, 2)
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/demo".into()));
    fs::create_dir_all(&out)?;
    let mut entries = Vec::new();
    let names = ["rising", "wave", "arc"];
    for (i, name) in names.iter().enumerate() {
        let id = format!("sketch-{name}");
        fs::write(out.join(format!("{id}.pgm")), write_pnm(&sketch(i)))?;
        let music = if i == 2 {
            let file = format!("{id}.notes");
            fs::write(out.join(&file), write_notes_json(&melody(i)))?;
            file
        } else {
            let file = format!("{id}.mid");
            fs::write(out.join(&file), write_midi(&melody(i)))?;
            file
        };
        entries.push(serde_json::json!({
            "id": id, "role": "sketch_melody", "image": format!("{id}.pgm"),
            "music": music, "display_name": format!("Sketch: {name}"),
        }));
    }
    for (i, name) in ["dusk", "brick", "checker"].iter().enumerate() {
        let id = format!("image-{name}");
        fs::write(out.join(format!("{id}.ppm")), write_pnm(&painting(i)))?;
        fs::write(out.join(format!("{id}.mid")), write_midi(&accompaniment(i)))?;
        entries.push(serde_json::json!({
            "id": id, "role": "image_accompaniment", "image": format!("{id}.ppm"),
            "music": format!("{id}.mid"), "display_name": format!("Image: {name}"),
        }));
    }
    let manifest = serde_json::json!({ "entries": entries });
    fs::write(out.join("catalog.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("wrote {} entries to {}", entries.len(), out.display());
    Ok(())
}
