//! Listening-study trials: A/B brightness/contrast trials, four-way style
//! trials, blind bundle files with a separate keys file, and exact binomial
//! scoring against chance.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::DEFAULT_THETA;
use crate::image::{image_style_fuse, image_transform, write_pnm, ImageError, RasterImage};
use crate::midi::write_midi;
use crate::music::NoteList;
use crate::transforms::{
    apply_music_transform, compositional_transfer, melody_skyline, TransformError, TransformKind, TransformSpec,
    MELODY_CHANNEL,
};

pub const KEYS_FILE: &str = "keys.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("alpha must be nonzero for an A/B trial")]
    DegenerateSpec,
    #[error("duplicate stimulus pair `{0}`")]
    DuplicatePair(String),
    #[error("responses reference unknown trials: {}", .0.join(", "))]
    OrphanResponses(Vec<String>),
    #[error("trial `{trial_id}`: chosen index {chosen} outside 0..{count}")]
    ChoiceOutOfRange { trial_id: String, chosen: usize, count: usize },
    #[error("binomial domain error: {0}")]
    Domain(String),
    #[error("bundle `{trial_id}` fails validation: {reason}")]
    InvalidBundle { trial_id: String, reason: String },
    #[error("need at least {need} {what}, have {have}")]
    NotEnoughPairs { what: &'static str, need: usize, have: usize },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StudyError + '_ {
    move |source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Seeded 64-bit linear congruential generator.
///
/// `state <- state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`;
/// draws use the top 31 bits (`state >> 33`).
#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(Self::MULTIPLIER).wrapping_add(Self::INCREMENT);
        self.state
    }

    /// Uniform-ish draw in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() >> 33) % n as u64) as usize
    }

    /// Fisher-Yates, walking from the last slot down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialKind {
    Brightness,
    Contrast,
    Style,
}

impl TrialKind {
    pub fn candidate_count(&self) -> usize {
        match self {
            TrialKind::Style => 4,
            _ => 2,
        }
    }

    /// Chance accuracy for one response.
    pub fn baseline(&self) -> f64 {
        1.0 / self.candidate_count() as f64
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TrialKind::Brightness => "brightness",
            TrialKind::Contrast => "contrast",
            TrialKind::Style => "style",
        }
    }
}

impl From<TransformKind> for TrialKind {
    fn from(kind: TransformKind) -> Self {
        match kind {
            TransformKind::Brightness => TrialKind::Brightness,
            TransformKind::Contrast => TrialKind::Contrast,
        }
    }
}

impl fmt::Display for TrialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TrialKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brightness" => Ok(TrialKind::Brightness),
            "contrast" => Ok(TrialKind::Contrast),
            "style" => Ok(TrialKind::Style),
            other => Err(format!("unknown trial kind `{other}`")),
        }
    }
}

/// An anchored image-music pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusPair {
    pub id: String,
    pub image: RasterImage,
    pub music: NoteList,
}

/// Where a candidate came from. Kept out of the blind manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateOrigin {
    SameDirection,
    Inverse,
    Combination { melody: usize, accompaniment: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialBundle {
    pub trial_id: String,
    pub kind: TrialKind,
    pub seed: u64,
    /// The image-side transform (A/B trials only).
    pub spec: Option<TransformSpec>,
    /// A/B: the one anchor pair. Style: two sketch-melody pairs, then two
    /// image-accompaniment pairs.
    pub preview: Vec<StimulusPair>,
    /// Transformed (A/B) or fused (style) image.
    pub image: RasterImage,
    pub candidates: Vec<NoteList>,
    pub origins: Vec<CandidateOrigin>,
    pub answer_key: usize,
}

/// The sealed part of a bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub trial_id: String,
    pub kind: TrialKind,
    pub answer_key: usize,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyResponse {
    pub trial_id: String,
    pub subject_id: String,
    pub chosen_index: usize,
}

/// One A/B trial: the image moves by `spec`, and the music candidates are the
/// same transform and its negated-alpha counterpart, in seeded order.
pub fn make_ab_trial(pair: &StimulusPair, spec: TransformSpec, seed: u64) -> Result<TrialBundle, StudyError> {
    if spec.alpha == 0.0 {
        return Err(StudyError::DegenerateSpec);
    }
    spec.validate(false)?;
    let image = image_transform(&pair.image, &spec)?;
    let same = apply_music_transform(&pair.music, &spec, DEFAULT_THETA)?;
    let inverse = apply_music_transform(&pair.music, &spec.inverse(), DEFAULT_THETA)?;

    let mut slots = vec![(CandidateOrigin::SameDirection, same), (CandidateOrigin::Inverse, inverse)];
    Lcg::new(seed).shuffle(&mut slots);
    let answer_key = slots
        .iter()
        .position(|(o, _)| *o == CandidateOrigin::SameDirection)
        .expect("same-direction candidate present");
    let kind = TrialKind::from(spec.kind);
    let (origins, candidates) = slots.into_iter().unzip();
    Ok(TrialBundle {
        trial_id: format!("{kind}-{seed:016x}"),
        kind,
        seed,
        spec: Some(spec),
        preview: vec![pair.clone()],
        image,
        candidates,
        origins,
        answer_key,
    })
}

/// One four-way style trial. The seed picks which sketch supplies the content
/// and which image supplies the style; the candidates are every
/// melody × accompaniment transfer, in seeded order.
pub fn make_style_trial(
    sketch_melody: [&StimulusPair; 2],
    image_accomp: [&StimulusPair; 2],
    seed: u64,
) -> Result<TrialBundle, StudyError> {
    let mut ids = HashSet::new();
    for pair in sketch_melody.iter().chain(image_accomp.iter()) {
        if !ids.insert(pair.id.as_str()) {
            return Err(StudyError::DuplicatePair(pair.id.clone()));
        }
    }
    let mut rng = Lcg::new(seed);
    let content = rng.below(2);
    let style = rng.below(2);
    let image = image_style_fuse(&sketch_melody[content].image, &image_accomp[style].image)?;

    let mut slots = Vec::with_capacity(4);
    for (melody, m) in sketch_melody.iter().enumerate() {
        for (accompaniment, a) in image_accomp.iter().enumerate() {
            let music = compositional_transfer(&m.music, &a.music)?;
            slots.push((CandidateOrigin::Combination { melody, accompaniment }, music));
        }
    }
    rng.shuffle(&mut slots);
    let target = CandidateOrigin::Combination {
        melody: content,
        accompaniment: style,
    };
    let answer_key = slots.iter().position(|(o, _)| *o == target).expect("all combinations present");
    let (origins, candidates) = slots.into_iter().unzip();
    Ok(TrialBundle {
        trial_id: format!("style-{seed:016x}"),
        kind: TrialKind::Style,
        seed,
        spec: None,
        preview: sketch_melody
            .iter()
            .chain(image_accomp.iter())
            .map(|p| (*p).clone())
            .collect(),
        image,
        candidates,
        origins,
        answer_key,
    })
}

impl TrialBundle {
    pub fn key(&self) -> AnswerKey {
        AnswerKey {
            trial_id: self.trial_id.clone(),
            kind: self.kind,
            answer_key: self.answer_key,
            candidate_count: self.candidates.len(),
        }
    }

    /// Re-derives the keyed candidate from the preview stimuli and checks the
    /// kind-specific postconditions.
    pub fn validate(&self) -> Result<(), StudyError> {
        let fail = |reason: String| StudyError::InvalidBundle {
            trial_id: self.trial_id.clone(),
            reason,
        };
        let count = self.kind.candidate_count();
        if self.candidates.len() != count || self.origins.len() != count {
            return Err(fail(format!("expected {count} candidates, found {}", self.candidates.len())));
        }
        if self.answer_key >= count {
            return Err(fail(format!("answer key {} out of range", self.answer_key)));
        }
        let keyed = &self.candidates[self.answer_key];
        match self.kind {
            TrialKind::Brightness | TrialKind::Contrast => {
                let spec = self.spec.ok_or_else(|| fail("A/B trial without a transform".into()))?;
                let pair = self.preview.first().ok_or_else(|| fail("missing preview pair".into()))?;
                if self.origins[self.answer_key] != CandidateOrigin::SameDirection {
                    return Err(fail("answer key does not point at the same-direction candidate".into()));
                }
                if *keyed != apply_music_transform(&pair.music, &spec, DEFAULT_THETA)? {
                    return Err(fail("keyed candidate is not the same-direction transform".into()));
                }
                let other = &self.candidates[1 - self.answer_key];
                if *other != apply_music_transform(&pair.music, &spec.inverse(), DEFAULT_THETA)? {
                    return Err(fail("distractor is not the inverse transform".into()));
                }
                if self.image != image_transform(&pair.image, &spec)? {
                    return Err(fail("image does not match the transform".into()));
                }
                if self.kind == TrialKind::Brightness {
                    let (k, o) = (keyed.total_velocity(), other.total_velocity());
                    if (spec.alpha > 0.0 && k < o) || (spec.alpha < 0.0 && k > o) {
                        return Err(fail(format!("keyed total velocity {k} vs distractor {o}")));
                    }
                }
            }
            TrialKind::Style => {
                let CandidateOrigin::Combination { melody, accompaniment } = self.origins[self.answer_key] else {
                    return Err(fail("style candidate without a combination".into()));
                };
                if self.preview.len() != 4 {
                    return Err(fail("style trial needs four preview pairs".into()));
                }
                let sketch = &self.preview[melody];
                let styled = &self.preview[2 + accompaniment];
                if melody_skyline(&keyed.channel(MELODY_CHANNEL)) != melody_skyline(&sketch.music) {
                    return Err(fail("keyed candidate's skyline differs from the sketch melody".into()));
                }
                if *keyed != compositional_transfer(&sketch.music, &styled.music)? {
                    return Err(fail("keyed candidate is not the chosen combination".into()));
                }
                if self.image != image_style_fuse(&sketch.image, &styled.image)? {
                    return Err(fail("fused image is not built from the keyed pairs".into()));
                }
            }
        }
        Ok(())
    }

    /// Writes `<dir>/<trial_id>/` with a blind manifest and the stimulus
    /// files. The answer key is not written here; see [`write_keys`].
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, StudyError> {
        let root = dir.join(&self.trial_id);
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = root.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))
        };
        let image_name = |stem: &str, img: &RasterImage| {
            format!("{stem}.{}", if img.channels() == 1 { "pgm" } else { "ppm" })
        };

        let mut preview = Vec::new();
        for (i, pair) in self.preview.iter().enumerate() {
            let image = image_name(&format!("preview_{i}"), &pair.image);
            let music = format!("preview_{i}.mid");
            write(&image, &write_pnm(&pair.image))?;
            write(&music, &write_midi(&pair.music))?;
            preview.push(PreviewEntry {
                id: pair.id.clone(),
                image,
                music,
            });
        }
        let image = image_name(if self.kind == TrialKind::Style { "fused" } else { "transformed" }, &self.image);
        write(&image, &write_pnm(&self.image))?;
        let mut candidates = Vec::new();
        for (i, c) in self.candidates.iter().enumerate() {
            let name = format!("candidate_{i}.mid");
            write(&name, &write_midi(c))?;
            candidates.push(name);
        }
        let manifest = Manifest {
            trial_id: self.trial_id.clone(),
            kind: self.kind,
            seed: self.seed,
            spec: self.spec,
            preview,
            image,
            candidates,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
        text.push('\n');
        write(MANIFEST_FILE, text.as_bytes())?;
        Ok(root)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PreviewEntry {
    id: String,
    image: String,
    music: String,
}

/// Blind bundle manifest as written to disk.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    trial_id: String,
    kind: TrialKind,
    seed: u64,
    spec: Option<TransformSpec>,
    preview: Vec<PreviewEntry>,
    image: String,
    candidates: Vec<String>,
}

/// `n` A/B trials over randomly drawn pairs. Trial ids are `<kind>-NNNN`.
pub fn generate_ab_trials(
    pairs: &[StimulusPair],
    spec: TransformSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<TrialBundle>, StudyError> {
    if pairs.is_empty() {
        return Err(StudyError::NotEnoughPairs {
            what: "anchor pairs",
            need: 1,
            have: 0,
        });
    }
    let mut rng = Lcg::new(seed);
    (0..n)
        .map(|i| {
            let pair = &pairs[rng.below(pairs.len())];
            let mut bundle = make_ab_trial(pair, spec, rng.next_u64())?;
            bundle.trial_id = format!("{}-{i:04}", bundle.kind);
            Ok(bundle)
        })
        .collect()
}

fn draw_two<'a>(rng: &mut Lcg, pool: &'a [StimulusPair], what: &'static str) -> Result<[&'a StimulusPair; 2], StudyError> {
    if pool.len() < 2 {
        return Err(StudyError::NotEnoughPairs {
            what,
            need: 2,
            have: pool.len(),
        });
    }
    let a = rng.below(pool.len());
    let b = (a + 1 + rng.below(pool.len() - 1)) % pool.len();
    Ok([&pool[a], &pool[b]])
}

/// `n` style trials, each over two distinct sketch-melody pairs and two
/// distinct image-accompaniment pairs.
pub fn generate_style_trials(
    sketch_melody: &[StimulusPair],
    image_accomp: &[StimulusPair],
    n: usize,
    seed: u64,
) -> Result<Vec<TrialBundle>, StudyError> {
    let mut rng = Lcg::new(seed);
    (0..n)
        .map(|i| {
            let sketches = draw_two(&mut rng, sketch_melody, "sketch-melody pairs")?;
            let images = draw_two(&mut rng, image_accomp, "image-accompaniment pairs")?;
            let mut bundle = make_style_trial(sketches, images, rng.next_u64())?;
            bundle.trial_id = format!("style-{i:04}");
            Ok(bundle)
        })
        .collect()
}

/// Writes every bundle under `dir` plus the sealed `keys.csv`.
pub fn write_bundles(bundles: &[TrialBundle], dir: &Path) -> Result<(), StudyError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for bundle in bundles {
        bundle.write_to(dir)?;
    }
    let keys: Vec<AnswerKey> = bundles.iter().map(TrialBundle::key).collect();
    write_keys(&keys, &dir.join(KEYS_FILE))
}

pub fn write_keys(keys: &[AnswerKey], path: &Path) -> Result<(), StudyError> {
    let mut w = csv::Writer::from_path(path)?;
    for key in keys {
        w.serialize(key)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_keys(path: &Path) -> Result<Vec<AnswerKey>, StudyError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn read_responses(path: &Path) -> Result<Vec<StudyResponse>, StudyError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_responses(responses: &[StudyResponse], path: &Path) -> Result<(), StudyError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in responses {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

/// `P(X >= k)` for `X ~ Binomial(n, p0)`, summed term by term.
///
/// The first term is built in log space; later terms follow from the ratio
/// `C(n, i+1) / C(n, i) = (n - i) / (i + 1)`.
pub fn binomial_tail(k: u64, n: u64, p0: f64) -> Result<f64, StudyError> {
    if k > n {
        return Err(StudyError::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StudyError::Domain(format!("p0 = {p0} outside (0, 1)")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let q0 = 1.0 - p0;
    let ln_choose: f64 = (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum();
    let mut term = (ln_choose + k as f64 * p0.ln() + (n - k) as f64 * q0.ln()).exp();
    let ratio = p0 / q0;
    let mut sum = 0.0;
    for i in k..=n {
        sum += term;
        term *= (n - i) as f64 / (i + 1) as f64 * ratio;
    }
    Ok(sum.min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindScore {
    pub kind: TrialKind,
    pub n: u64,
    pub k: u64,
    /// Fraction correct, `k / n`.
    pub accuracy: f64,
    /// One-sided exact binomial tail against `baseline`.
    pub p_value: f64,
    pub baseline: f64,
}

impl fmt::Display for KindScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<10} n={:<4} k={:<4} accuracy={:.1}% p={:.6e} baseline={:.1}%",
            self.kind.as_str(),
            self.n,
            self.k,
            100.0 * self.accuracy,
            self.p_value,
            100.0 * self.baseline
        )
    }
}

/// Pools responses per trial kind and scores them against the answer keys.
pub fn score(responses: &[StudyResponse], keys: &[AnswerKey]) -> Result<Vec<KindScore>, StudyError> {
    let by_id: BTreeMap<&str, &AnswerKey> = keys.iter().map(|k| (k.trial_id.as_str(), k)).collect();
    let mut orphans: Vec<String> = responses
        .iter()
        .filter(|r| !by_id.contains_key(r.trial_id.as_str()))
        .map(|r| r.trial_id.clone())
        .collect();
    if !orphans.is_empty() {
        orphans.sort();
        orphans.dedup();
        return Err(StudyError::OrphanResponses(orphans));
    }
    let mut tally: BTreeMap<TrialKind, (u64, u64)> = BTreeMap::new();
    for r in responses {
        let key = by_id[r.trial_id.as_str()];
        if r.chosen_index >= key.candidate_count {
            return Err(StudyError::ChoiceOutOfRange {
                trial_id: r.trial_id.clone(),
                chosen: r.chosen_index,
                count: key.candidate_count,
            });
        }
        let entry = tally.entry(key.kind).or_default();
        entry.0 += 1;
        entry.1 += (r.chosen_index == key.answer_key) as u64;
    }
    tally
        .into_iter()
        .map(|(kind, (n, k))| {
            Ok(KindScore {
                kind,
                n,
                k,
                accuracy: k as f64 / n as f64,
                p_value: binomial_tail(k, n, kind.baseline())?,
                baseline: kind.baseline(),
            })
        })
        .collect()
}
