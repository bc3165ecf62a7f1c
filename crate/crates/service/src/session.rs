use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crossmap::catalog::Catalog;
use crossmap::image::write_pnm;
use crossmap::notes_json::write_notes_json;
use crossmap::workflow::{adjust, stylize, Rendition, WorkflowError};

use crate::ServiceError;

pub const STATE_FILE: &str = "state.json";

/// Every asset a session can serve, in a fixed order.
pub const ASSET_NAMES: [&str; 7] = [
    "input_sketch.pgm",
    "input_image.ppm",
    "fused_image.ppm",
    "adjusted_image.ppm",
    "fused_music.mid",
    "adjusted_music.mid",
    "adjusted_music.notes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Created,
    Stylized,
    Adjusted,
}

/// The persisted and served view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub sketch_melody_id: String,
    pub image_accomp_id: String,
    pub alpha_b: f64,
    pub alpha_c: f64,
    pub revision: u64,
    pub phase: Phase,
    /// Names of the assets available at this revision.
    pub assets: Vec<String>,
}

#[derive(Debug)]
pub struct Session {
    pub state: SessionState,
    pub dir: PathBuf,
    assets: BTreeMap<String, Vec<u8>>,
    /// The stylize-time baseline every adjust is derived from. Rebuilt from
    /// the catalog on demand after a restart.
    fused: Option<Rendition>,
}

impl Session {
    pub fn create(
        catalog: &Catalog,
        sessions_dir: &Path,
        session_id: String,
        sketch_melody_id: String,
        image_accomp_id: String,
    ) -> Result<Session, ServiceError> {
        let (_, sketch) = catalog
            .get(&sketch_melody_id)
            .ok_or_else(|| ServiceError::NotFound(format!("catalog entry `{sketch_melody_id}`")))?;
        let (_, image) = catalog
            .get(&image_accomp_id)
            .ok_or_else(|| ServiceError::NotFound(format!("catalog entry `{image_accomp_id}`")))?;
        let mut session = Session {
            state: SessionState {
                session_id: session_id.clone(),
                sketch_melody_id,
                image_accomp_id,
                alpha_b: 0.0,
                alpha_c: 0.0,
                revision: 0,
                phase: Phase::Created,
                assets: Vec::new(),
            },
            dir: sessions_dir.join(&session_id),
            assets: BTreeMap::new(),
            fused: None,
        };
        session.put("input_sketch.pgm", write_pnm(&sketch.image.to_gray()));
        session.put("input_image.ppm", write_pnm(&image.image.to_rgb()));
        session.persist()?;
        Ok(session)
    }

    /// Reads `<dir>/state.json` and the assets it lists.
    pub fn load(dir: &Path) -> Result<Session, ServiceError> {
        let text = fs::read_to_string(dir.join(STATE_FILE)).map_err(|e| io_error(dir, e))?;
        let state: SessionState =
            serde_json::from_str(&text).map_err(|e| ServiceError::Corrupt(format!("{}: {e}", dir.display())))?;
        let mut assets = BTreeMap::new();
        for name in &state.assets {
            if !ASSET_NAMES.contains(&name.as_str()) {
                return Err(ServiceError::Corrupt(format!("{}: unknown asset `{name}`", dir.display())));
            }
            let bytes = fs::read(dir.join(name)).map_err(|e| io_error(dir, e))?;
            assets.insert(name.clone(), bytes);
        }
        Ok(Session {
            state,
            dir: dir.to_path_buf(),
            assets,
            fused: None,
        })
    }

    pub fn asset(&self, name: &str) -> Option<&[u8]> {
        self.assets.get(name).map(Vec::as_slice)
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) {
        self.assets.insert(name.to_string(), bytes);
        self.state.assets = ASSET_NAMES
            .iter()
            .filter(|n| self.assets.contains_key(**n))
            .map(|n| n.to_string())
            .collect();
    }

    fn render(&mut self, fused: &Rendition, adjusted: &Rendition) {
        self.put("fused_image.ppm", fused.image_bytes());
        self.put("fused_music.mid", fused.music_bytes());
        self.put("adjusted_image.ppm", adjusted.image_bytes());
        self.put("adjusted_music.mid", adjusted.music_bytes());
        self.put("adjusted_music.notes", write_notes_json(&adjusted.music).into_bytes());
    }

    fn pairs<'c>(
        &self,
        catalog: &'c Catalog,
    ) -> Result<(&'c crossmap::study::StimulusPair, &'c crossmap::study::StimulusPair), ServiceError> {
        let find = |id: &str| {
            catalog
                .get(id)
                .map(|(_, p)| p)
                .ok_or_else(|| ServiceError::Conflict(format!("catalog entry `{id}` is no longer available")))
        };
        Ok((find(&self.state.sketch_melody_id)?, find(&self.state.image_accomp_id)?))
    }

    pub fn stylize(&mut self, catalog: &Catalog) -> Result<(), ServiceError> {
        let (sketch, image) = self.pairs(catalog)?;
        let fused = stylize(sketch, image)?;
        let adjusted = adjust(&fused, self.state.alpha_b, self.state.alpha_c)?;
        self.render(&fused, &adjusted);
        self.fused = Some(fused);
        self.state.phase = Phase::Stylized;
        self.state.revision += 1;
        self.persist()
    }

    pub fn adjust(&mut self, catalog: &Catalog, alpha_b: f64, alpha_c: f64) -> Result<(), ServiceError> {
        if self.state.phase == Phase::Created {
            return Err(ServiceError::Conflict("adjust requires a stylized session".into()));
        }
        let fused = match self.fused.take() {
            Some(fused) => fused,
            None => {
                let (sketch, image) = self.pairs(catalog)?;
                stylize(sketch, image)?
            }
        };
        let adjusted = adjust(&fused, alpha_b, alpha_c);
        let adjusted = match adjusted {
            Ok(a) => a,
            Err(e) => {
                self.fused = Some(fused);
                return Err(e.into());
            }
        };
        self.render(&fused, &adjusted);
        self.fused = Some(fused);
        self.state.alpha_b = alpha_b;
        self.state.alpha_c = alpha_c;
        self.state.phase = Phase::Adjusted;
        self.state.revision += 1;
        self.persist()
    }

    /// Assets first, then the state file through a rename, so a crash never
    /// leaves a state that names missing assets.
    fn persist(&self) -> Result<(), ServiceError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        for (name, bytes) in &self.assets {
            write_atomic(&self.dir.join(name), bytes)?;
        }
        let mut text = serde_json::to_string_pretty(&self.state).expect("state serializes");
        text.push('\n');
        write_atomic(&self.dir.join(STATE_FILE), text.as_bytes())
    }
}

fn io_error(path: &Path, e: io::Error) -> ServiceError {
    ServiceError::Io(format!("{}: {e}", path.display()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

impl From<WorkflowError> for ServiceError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::Transform(t) => ServiceError::Validation(t.to_string()),
            WorkflowError::Image(i) => ServiceError::Validation(i.to_string()),
        }
    }
}
