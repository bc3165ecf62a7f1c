//! Acceptance criteria, one PASS/FAIL line each, with wall-clock limits.
//!
//! ```text
//! cargo test -p crossmap-acceptance --test acceptance
//! ```

mod gen;
mod oracles;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use crossmap::catalog::{Catalog, Role};
use crossmap::chords::extract_chords;
use crossmap::codec::{decode_texture, encode_texture, DEFAULT_THETA};
use crossmap::image::{read_pnm, write_pnm, RasterImage};
use crossmap::midi::{read_midi, write_midi};
use crossmap::music::{quantize, Note, NoteList, TimeSignature, DEFAULT_STEPS_PER_BEAT};
use crossmap::study::{
    binomial_tail, generate_ab_trials, generate_style_trials, score, write_bundles, AnswerKey, StudyResponse,
    TrialBundle, TrialKind,
};
use crossmap::transforms::{
    apply_music_transform, brightness, compositional_transfer, contrast, melody_skyline, TransformSpec,
    ACCOMPANIMENT_CHANNEL, MELODY_CHANNEL,
};
use ndarray::{array, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn brightness_suite() -> Check {
    let mut r = rng(1);
    for _ in 0..50 {
        let x = gen::matrix(&mut r);
        let y = brightness(&x, 0.0).map_err(|e| e.to_string())?;
        ensure!(
            x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()),
            "alpha 0 is not bit-exact"
        );
    }
    let worked = brightness(&array![[0.0, 2.0], [4.0, 6.0]], 1.0).map_err(|e| e.to_string())?;
    ensure!(worked == array![[3.0, 5.0], [7.0, 9.0]], "worked example gave {worked}");
    let zeros = Array2::<f64>::zeros((5, 7));
    ensure!(brightness(&zeros, 0.8).unwrap() == zeros, "zero matrix moved");

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = gen::matrix(&mut r);
        let alpha = r.random_range(-1.0..=1.0);
        let y = brightness(&x, alpha).map_err(|e| e.to_string())?;
        let shift = alpha / 2.0 * x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (a, b) in x.iter().zip(&y) {
            worst = worst.max(((b - a) - shift).abs());
        }
    }
    ensure!(worst <= 1e-12, "max shift error {worst:e}");
    Ok(format!("1000 matrices, max shift error {worst:.1e}"))
}

fn contrast_suite() -> Check {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = gen::matrix(&mut r);
        let mean = x.mean().unwrap();
        let same = contrast(&x, 0.0).map_err(|e| e.to_string())?;
        ensure!(
            x.iter().zip(&same).all(|(a, b)| a.to_bits() == b.to_bits()),
            "alpha 0 is not bit-exact"
        );
        let flat = contrast(&x, -1.0).map_err(|e| e.to_string())?;
        ensure!(flat.iter().all(|&v| v == flat[[0, 0]]), "alpha -1 did not collapse");
        ensure!((flat[[0, 0]] - mean).abs() <= 1e-9, "collapsed to {} not mean {mean}", flat[[0, 0]]);
        let alpha = r.random_range(-1.0..=1.0);
        let y = contrast(&x, alpha).map_err(|e| e.to_string())?;
        worst = worst.max((y.mean().unwrap() - mean).abs());
    }
    ensure!(worst <= 1e-9, "mean drift {worst:e}");
    Ok(format!("1000 matrices, max mean drift {worst:.1e}"))
}

fn codec_round_trip() -> Check {
    let mut r = rng(3);
    let mut notes = 0;
    for i in 0..200 {
        let piece = gen::grid_piece(&mut r, 2, 51);
        notes += piece.len();
        let roll = quantize(&piece, DEFAULT_STEPS_PER_BEAT).map_err(|e| e.to_string())?;
        let map = encode_texture(&roll, 1).map_err(|e| e.to_string())?;
        let back = decode_texture(&map, 0.4, DEFAULT_STEPS_PER_BEAT).map_err(|e| e.to_string())?;
        ensure!(back == roll, "piece {i} did not round-trip");
    }
    Ok(format!("200 pieces, {notes} notes, exact"))
}

fn pipeline_monotonicity() -> Check {
    let mut r = rng(4);
    let mut compared = 0usize;
    for i in 0..100 {
        let piece = gen::grid_piece(&mut r, 2, 51);
        for alpha in [0.1, 0.5, 1.0, -0.1, -0.5] {
            let out = apply_music_transform(&piece, &TransformSpec::brightness(alpha), DEFAULT_THETA)
                .map_err(|e| e.to_string())?;
            for n in piece.notes() {
                let found = out.notes().iter().find(|m| m.onset == n.onset && m.pitch == n.pitch);
                match found {
                    Some(m) if alpha > 0.0 => {
                        ensure!(m.velocity >= n.velocity, "piece {i} alpha {alpha}: {n:?} -> {m:?}")
                    }
                    Some(m) => ensure!(m.velocity <= n.velocity, "piece {i} alpha {alpha}: {n:?} -> {m:?}"),
                    None => ensure!(alpha < 0.0, "piece {i} alpha {alpha}: {n:?} deleted"),
                }
                compared += 1;
            }
            if alpha < 0.0 {
                for m in out.notes() {
                    let src = piece.notes().iter().find(|n| n.onset == m.onset && n.pitch == m.pitch);
                    ensure!(src.is_some(), "piece {i} alpha {alpha}: {m:?} appeared");
                }
            }
        }
    }
    Ok(format!("100 pieces x 5 alphas, {compared} note comparisons"))
}

fn compositional_transfer_check() -> Check {
    let mut r = rng(5);
    let melodies: Vec<NoteList> = (0..10).map(|_| gen::melody(&mut r)).collect();
    let accomps: Vec<NoteList> = (0..10).map(|_| gen::accompaniment(&mut r)).collect();
    let (mut checked, mut chordless) = (0usize, 0usize);
    for (mi, melody) in melodies.iter().enumerate() {
        let chords = extract_chords(&quantize(melody, DEFAULT_STEPS_PER_BEAT).unwrap());
        for (ai, accomp) in accomps.iter().enumerate() {
            let out = compositional_transfer(melody, accomp).map_err(|e| e.to_string())?;
            ensure!(
                melody_skyline(&out.channel(MELODY_CHANNEL)) == melody_skyline(melody),
                "melody {mi} x accompaniment {ai}: skyline changed"
            );
            for n in out.channel(ACCOMPANIMENT_CHANNEL).notes() {
                let beat = (n.onset / out.ticks_per_quarter as u32) as usize;
                match chords.beat(beat) {
                    Some(chord) => {
                        ensure!(
                            chord.chroma & (1 << (n.pitch % 12)) != 0,
                            "melody {mi} x accompaniment {ai}: {n:?} outside beat {beat} chord"
                        );
                        checked += 1;
                    }
                    None => chordless += 1,
                }
            }
        }
    }
    Ok(format!("100 transfers, {checked} chorded notes in chroma, {chordless} on chordless beats"))
}

fn chord_oracle() -> Check {
    let mut r = rng(6);
    for i in 0..500 {
        let (roll, sounding) = gen::one_beat(&mut r);
        let expected = oracles::best_chord(&sounding);
        let got = extract_chords(&roll)
            .beat(0)
            .map(|c| (c.root_pc, c.chroma, c.quality.symbol()));
        ensure!(got == expected, "config {i} {sounding:?}: library {got:?}, oracle {expected:?}");
    }
    Ok("500 configurations, 100% agreement".into())
}

fn responses(keys: &[AnswerKey], correct: usize) -> Vec<StudyResponse> {
    keys.iter()
        .enumerate()
        .map(|(i, k)| StudyResponse {
            trial_id: k.trial_id.clone(),
            subject_id: format!("s{i}"),
            chosen_index: if i < correct { k.answer_key } else { (k.answer_key + 1) % k.candidate_count },
        })
        .collect()
}

fn keys(kind: TrialKind, n: usize) -> Vec<AnswerKey> {
    (0..n)
        .map(|i| AnswerKey {
            trial_id: format!("{kind}-{i}"),
            kind,
            answer_key: i % kind.candidate_count(),
            candidate_count: kind.candidate_count(),
        })
        .collect()
}

fn binomial_oracle() -> Check {
    let mut worst = 0.0f64;
    for (num, den) in [(1, 4), (1, 2)] {
        let p0 = num as f64 / den as f64;
        for n in 0..=64u64 {
            let exact = oracles::binomial_tails(n, num, den);
            for k in 0..=n {
                let got = binomial_tail(k, n, p0).map_err(|e| e.to_string())?;
                let err = (got - exact[k as usize]).abs();
                ensure!(err <= 1e-12, "k={k} n={n} p0={p0}: {got:e} vs exact {:e}", exact[k as usize]);
                worst = worst.max(err);
            }
        }
    }
    let mut rows = Vec::new();
    for (kind, n, k, shown) in [
        (TrialKind::Brightness, 24, 15, "62.5"),
        (TrialKind::Contrast, 22, 15, "68.2"),
    ] {
        let keys = keys(kind, n);
        let row = score(&responses(&keys, k), &keys).map_err(|e| e.to_string())?.remove(0);
        let pct = format!("{:.1}", 100.0 * row.accuracy);
        ensure!(pct == shown, "{kind} {k}/{n}: {pct}% != {shown}%");
        rows.push(format!("{k}/{n}={pct}% p={:.3}", row.p_value));
    }
    let keys = keys(TrialKind::Style, 61);
    let style = score(&responses(&keys, 37), &keys).map_err(|e| e.to_string())?.remove(0);
    ensure!(style.baseline == 0.25, "style baseline {}", style.baseline);
    ensure!(style.p_value < 1e-8, "style 37/61 tail {:e}", style.p_value);
    Ok(format!(
        "n<=64 max error {worst:.1e}; {}; style 37/61 p={:.2e}",
        rows.join(", "),
        style.p_value
    ))
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo")
}

fn study_bundles(catalog: &Catalog) -> Result<Vec<TrialBundle>, String> {
    let mut all = catalog.pairs(Role::SketchMelody);
    all.extend(catalog.pairs(Role::ImageAccompaniment));
    let mut out = generate_ab_trials(&all, TransformSpec::brightness(0.5), 35, 71).map_err(|e| e.to_string())?;
    out.extend(generate_ab_trials(&all, TransformSpec::contrast(-0.6), 35, 72).map_err(|e| e.to_string())?);
    out.extend(
        generate_style_trials(
            &catalog.pairs(Role::SketchMelody),
            &catalog.pairs(Role::ImageAccompaniment),
            30,
            73,
        )
        .map_err(|e| e.to_string())?,
    );
    Ok(out)
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn study_protocol() -> Check {
    let catalog = Catalog::load(&demo_dir()).map_err(|e| e.to_string())?;
    let first = study_bundles(&catalog)?;
    ensure!(first.len() == 100, "{} bundles", first.len());
    for b in &first {
        b.validate().map_err(|e| e.to_string())?;
    }
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_bundles(&first, a.path()).map_err(|e| e.to_string())?;
    write_bundles(&study_bundles(&catalog)?, b.path()).map_err(|e| e.to_string())?;
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    ensure!(ta == tb, "regenerated bundle trees differ");
    Ok(format!("100 bundles valid, {} files byte-identical on regeneration", ta.len()))
}

/// Hand-assembled: C4 then E4 on channel 1, one bar of 3/4 at 120 BPM.
const GOLDEN_MIDI: &[u8] = &[
    b'M', b'T', b'h', b'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0,
    b'M', b'T', b'r', b'k', 0, 0, 0, 38,
    0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20,
    0x00, 0xff, 0x58, 0x04, 3, 2, 24, 8,
    0x00, 0x90, 60, 100,
    0x83, 0x60, 0x80, 60, 0x40,
    0x00, 0x91, 64, 80,
    0x83, 0x60, 0x81, 64, 0x40,
    0x83, 0x60, 0xff, 0x2f, 0x00,
];

/// The same piece as format 1 with running status and zero-velocity offs.
const LOOSE_MIDI: &[u8] = &[
    b'M', b'T', b'h', b'd', 0, 0, 0, 6, 0, 1, 0, 2, 0x01, 0xe0,
    b'M', b'T', b'r', b'k', 0, 0, 0, 19,
    0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20,
    0x00, 0xff, 0x58, 0x04, 3, 2, 24, 8,
    0x00, 0xff, 0x2f, 0x00,
    b'M', b'T', b'r', b'k', 0, 0, 0, 21,
    0x00, 0x90, 60, 100,
    0x83, 0x60, 60, 0,
    0x00, 0x91, 64, 80,
    0x83, 0x60, 64, 0,
    0x83, 0x60, 0xff, 0x2f, 0x00,
];

const GOLDEN_PGM: &[u8] = b"P5\n2 2\n255\n\x00\x40\x80\xff";
const GOLDEN_PPM: &[u8] = b"P6\n1 2\n255\n\xff\x00\x00\x00\x00\xff";

fn format_goldens() -> Check {
    let piece = NoteList::new(
        vec![Note::new(0, 480, 60, 100), Note::new(480, 480, 64, 80).with_channel(1)],
        480,
        120.0,
        TimeSignature(3, 4),
        Some(1440),
    )
    .unwrap();
    ensure!(write_midi(&piece) == GOLDEN_MIDI, "built piece does not write the golden MIDI bytes");
    let read = read_midi(GOLDEN_MIDI).map_err(|e| e.to_string())?;
    ensure!(read == piece, "golden MIDI reads as {read:?}");
    ensure!(write_midi(&read) == GOLDEN_MIDI, "golden MIDI is not a fixed point");
    let loose = read_midi(LOOSE_MIDI).map_err(|e| e.to_string())?;
    ensure!(write_midi(&loose) == GOLDEN_MIDI, "format 1 / running status file does not canonicalize");

    let gray = RasterImage::new(2, 2, 1, vec![0, 64, 128, 255]).unwrap();
    let rgb = RasterImage::new(1, 2, 3, vec![255, 0, 0, 0, 0, 255]).unwrap();
    ensure!(write_pnm(&gray) == GOLDEN_PGM, "PGM golden mismatch");
    ensure!(write_pnm(&rgb) == GOLDEN_PPM, "PPM golden mismatch");
    for golden in [GOLDEN_PGM, GOLDEN_PPM] {
        ensure!(write_pnm(&read_pnm(golden).map_err(|e| e.to_string())?) == golden, "PNM golden not a fixed point");
    }
    let commented = b"P5 # made by hand\n2\t2\n# max\n255\n\x00\x40\x80\xff";
    ensure!(write_pnm(&read_pnm(commented).unwrap()) == GOLDEN_PGM, "commented header did not canonicalize");

    let mut r = rng(9);
    for i in 0..200 {
        let bytes = write_midi(&gen::any_piece(&mut r));
        let again = write_midi(&read_midi(&bytes).map_err(|e| format!("piece {i}: {e}"))?);
        ensure!(again == bytes, "random piece {i} is not a fixed point");
        let bytes = write_pnm(&gen::image(&mut r));
        ensure!(write_pnm(&read_pnm(&bytes).unwrap()) == bytes, "random image {i} is not a fixed point");
    }
    Ok("4 goldens byte-exact, 200 random pieces and images are fixed points".into())
}

async fn service_contract() -> Check {
    use crossmap_service::{spawn, Config};
    use reqwest::StatusCode;
    use serde_json::json;

    let sessions = tempfile::tempdir().unwrap();
    let config = Config {
        addr: "127.0.0.1:0".parse().unwrap(),
        data_dir: demo_dir(),
        sessions_dir: sessions.path().to_path_buf(),
    };
    let e = |e: reqwest::Error| e.to_string();
    let server = spawn(&config).await.map_err(|e| e.to_string())?;
    let base = format!("http://{}", server.addr);
    let client = reqwest::Client::new();

    let created: serde_json::Value = client
        .post(format!("{base}/session"))
        .json(&json!({"sketch_melody_id": "sketch-rising", "image_accomp_id": "image-brick"}))
        .send()
        .await
        .map_err(e)?
        .json()
        .await
        .map_err(e)?;
    let id = created["session_id"].as_str().ok_or("no session id")?.to_string();
    let adjust = |b: f64, c: f64| {
        client
            .post(format!("{base}/session/{id}/adjust"))
            .json(&json!({"alpha_b": b, "alpha_c": c}))
            .send()
    };
    let get = |name: &str| client.get(format!("{base}/session/{id}/assets/{name}")).send();

    let early = adjust(0.5, 0.0).await.map_err(e)?.status();
    ensure!(early == StatusCode::CONFLICT, "adjust before stylize gave {early}");

    let status = client.post(format!("{base}/session/{id}/stylize")).send().await.map_err(e)?.status();
    ensure!(status == StatusCode::OK, "stylize gave {status}");
    let fused_music = get("fused_music.mid").await.map_err(e)?.bytes().await.map_err(e)?;
    let fused_image = get("fused_image.ppm").await.map_err(e)?.bytes().await.map_err(e)?;

    ensure!(adjust(0.0, 0.0).await.map_err(e)?.status() == StatusCode::OK, "{{0,0}} adjust failed");
    ensure!(
        get("adjusted_music.mid").await.map_err(e)?.bytes().await.map_err(e)? == fused_music,
        "{{0,0}} adjusted music differs from fused"
    );
    ensure!(
        get("adjusted_image.ppm").await.map_err(e)?.bytes().await.map_err(e)? == fused_image,
        "{{0,0}} adjusted image differs from fused"
    );

    let mut outs = Vec::new();
    for _ in 0..2 {
        ensure!(adjust(0.5, 0.0).await.map_err(e)?.status() == StatusCode::OK, "adjust failed");
        outs.push(get("adjusted_music.mid").await.map_err(e)?.bytes().await.map_err(e)?);
    }
    ensure!(outs[0] == outs[1], "repeated adjust compounded");
    ensure!(outs[0] != fused_music, "alpha 0.5 left the music unchanged");

    let mut before = Vec::new();
    for name in crossmap_service::ASSET_NAMES {
        before.push(get(name).await.map_err(e)?.bytes().await.map_err(e)?);
    }
    server.stop().await.map_err(|e| e.to_string())?;

    let server = spawn(&config).await.map_err(|e| e.to_string())?;
    let base2 = format!("http://{}", server.addr);
    for (name, old) in crossmap_service::ASSET_NAMES.iter().zip(&before) {
        let now = client
            .get(format!("{base2}/session/{id}/assets/{name}"))
            .send()
            .await
            .map_err(e)?
            .bytes()
            .await
            .map_err(e)?;
        ensure!(now == old, "{name} changed across restart");
    }
    server.stop().await.map_err(|e| e.to_string())?;
    Ok("state machine, {0,0} identity, non-compounding, restart durability".into())
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: Box<dyn Fn() -> Check>,
}

fn main() -> ExitCode {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let criteria = vec![
        Criterion { name: "brightness", limit: Duration::from_secs(1), run: Box::new(brightness_suite) },
        Criterion { name: "contrast", limit: Duration::from_secs(1), run: Box::new(contrast_suite) },
        Criterion { name: "codec-round-trip", limit: Duration::from_secs(5), run: Box::new(codec_round_trip) },
        Criterion { name: "pipeline-monotonicity", limit: Duration::from_secs(10), run: Box::new(pipeline_monotonicity) },
        Criterion { name: "compositional-transfer", limit: Duration::from_secs(5), run: Box::new(compositional_transfer_check) },
        Criterion { name: "chord-oracle", limit: Duration::from_secs(5), run: Box::new(chord_oracle) },
        Criterion { name: "binomial-oracle", limit: Duration::from_secs(2), run: Box::new(binomial_oracle) },
        Criterion { name: "study-protocol", limit: Duration::from_secs(30), run: Box::new(study_protocol) },
        Criterion { name: "format-goldens", limit: Duration::from_secs(1), run: Box::new(format_goldens) },
        Criterion {
            name: "service-contract",
            limit: Duration::from_secs(30),
            run: Box::new(move || runtime.block_on(service_contract())),
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("too slow; {d}")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:<24} {:>8.3}s / {:>2}s  {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
