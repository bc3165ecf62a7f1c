//! Anchor-pair catalog: `<data>/catalog.json` plus the files it names.
//!
//! ```json
//! {"entries": [{"id": "s1", "role": "sketch_melody", "image": "s1.pgm",
//!               "music": "s1.mid", "display_name": "Rising line"}]}
//! ```
//!
//! Music files are Standard MIDI (`.mid`, `.midi`) or note lists (`.notes`,
//! `.json`); images are binary PNM. Entries that fail to load are set aside
//! in [`Catalog::rejected`] instead of failing the whole catalog.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{read_pnm, ImageError, RasterImage};
use crate::midi::{read_midi, MidiError};
use crate::music::NoteList;
use crate::notes_json::{read_notes_json, SchemaError};
use crate::study::StimulusPair;

pub const CATALOG_FILE: &str = "catalog.json";

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Midi { path: PathBuf, source: MidiError },
    #[error("{path}: {source}")]
    Notes { path: PathBuf, source: SchemaError },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: ImageError },
    #[error("{0}: unrecognized file extension")]
    Extension(PathBuf),
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("data directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

pub fn is_music_path(path: &Path) -> bool {
    matches!(extension(path).as_str(), "mid" | "midi" | "notes" | "json")
}

pub fn is_image_path(path: &Path) -> bool {
    matches!(extension(path).as_str(), "pgm" | "ppm" | "pnm")
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, AssetError> {
    fs::read(path).map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a piece by extension.
pub fn load_music(path: &Path) -> Result<NoteList, AssetError> {
    let owned = || path.to_path_buf();
    match extension(path).as_str() {
        "mid" | "midi" => read_midi(&read_bytes(path)?).map_err(|source| AssetError::Midi { path: owned(), source }),
        "notes" | "json" => {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8_lossy(&bytes);
            read_notes_json(&text).map_err(|source| AssetError::Notes { path: owned(), source })
        }
        _ => Err(AssetError::Extension(owned())),
    }
}

pub fn load_image(path: &Path) -> Result<RasterImage, AssetError> {
    if !is_image_path(path) {
        return Err(AssetError::Extension(path.to_path_buf()));
    }
    read_pnm(&read_bytes(path)?).map_err(|source| AssetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    SketchMelody,
    ImageAccompaniment,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::SketchMelody => "sketch_melody",
            Role::ImageAccompaniment => "image_accompaniment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub id: String,
    pub role: Role,
    /// Relative to the data directory.
    pub image: String,
    pub music: String,
    pub display_name: String,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    entries: Vec<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    entries: BTreeMap<String, (CatalogEntry, StimulusPair)>,
    /// `(id or position, reason)` for every entry that was left out.
    pub rejected: Vec<(String, String)>,
}

impl Catalog {
    pub fn empty() -> Self {
        Catalog {
            entries: BTreeMap::new(),
            rejected: Vec::new(),
        }
    }

    /// Loads and validates every entry. A data directory without a
    /// `catalog.json` is an empty catalog; a missing directory is an error.
    pub fn load(data_dir: &Path) -> Result<Catalog, CatalogError> {
        if !data_dir.is_dir() {
            return Err(CatalogError::MissingDir(data_dir.to_path_buf()));
        }
        let path = data_dir.join(CATALOG_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Catalog::empty()),
            Err(source) => return Err(CatalogError::Io { path, source }),
        };
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CatalogError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;

        let mut catalog = Catalog::empty();
        for (i, raw) in manifest.entries.into_iter().enumerate() {
            let entry: CatalogEntry = match serde_json::from_value(raw) {
                Ok(entry) => entry,
                Err(e) => {
                    catalog.rejected.push((format!("entries[{i}]"), e.to_string()));
                    continue;
                }
            };
            if catalog.entries.contains_key(&entry.id) {
                catalog.rejected.push((entry.id.clone(), "duplicate id".into()));
                continue;
            }
            match load_pair(data_dir, &entry) {
                Ok(pair) => {
                    catalog.entries.insert(entry.id.clone(), (entry, pair));
                }
                Err(reason) => catalog.rejected.push((entry.id.clone(), reason)),
            }
        }
        Ok(catalog)
    }

    /// Entries ordered by id.
    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values().map(|(e, _)| e)
    }

    pub fn get(&self, id: &str) -> Option<(&CatalogEntry, &StimulusPair)> {
        self.entries.get(id).map(|(e, p)| (e, p))
    }

    /// Pairs with the given role, ordered by id.
    pub fn pairs(&self, role: Role) -> Vec<StimulusPair> {
        self.entries
            .values()
            .filter(|(e, _)| e.role == role)
            .map(|(_, p)| p.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn load_pair(data_dir: &Path, entry: &CatalogEntry) -> Result<StimulusPair, String> {
    if entry.id.is_empty() {
        return Err("empty id".into());
    }
    let image = load_image(&data_dir.join(&entry.image)).map_err(|e| e.to_string())?;
    let music = load_music(&data_dir.join(&entry.music)).map_err(|e| e.to_string())?;
    if music.is_empty() {
        return Err(format!("{}: piece has no notes", entry.music));
    }
    Ok(StimulusPair {
        id: entry.id.clone(),
        image,
        music,
    })
}
