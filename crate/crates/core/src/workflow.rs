//! The interactive stylize-then-adjust workflow. The service and the CLI both
//! call into here, so their artifacts are byte-identical.

use thiserror::Error;

use crate::codec::DEFAULT_THETA;
use crate::image::{image_brightness, image_contrast, image_style_fuse, write_pnm, ImageError, RasterImage};
use crate::midi::write_midi;
use crate::music::NoteList;
use crate::study::StimulusPair;
use crate::transforms::{apply_music_transform, compositional_transfer, TransformError, TransformSpec};

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// A fused (or adjusted) image and piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendition {
    pub image: RasterImage,
    pub music: NoteList,
}

impl Rendition {
    pub fn image_bytes(&self) -> Vec<u8> {
        write_pnm(&self.image)
    }

    pub fn music_bytes(&self) -> Vec<u8> {
        write_midi(&self.music)
    }
}

/// Sketch imprinted on the style image (always RGB) and the melody carried
/// over the other pair's accompaniment.
pub fn stylize(sketch_melody: &StimulusPair, image_accomp: &StimulusPair) -> Result<Rendition, WorkflowError> {
    let image = image_style_fuse(&sketch_melody.image, &image_accomp.image)?.to_rgb();
    let music = compositional_transfer(&sketch_melody.music, &image_accomp.music)?;
    Ok(Rendition { image, music })
}

/// Brightness, then contrast, applied to both halves of `fused`.
///
/// Always derived from `fused`, so repeated calls never compound. A zero
/// alpha leaves its stage out entirely, which makes `{0, 0}` an exact no-op.
pub fn adjust(fused: &Rendition, alpha_b: f64, alpha_c: f64) -> Result<Rendition, WorkflowError> {
    let b = TransformSpec::brightness(alpha_b);
    let c = TransformSpec::contrast(alpha_c);
    b.validate(false)?;
    c.validate(false)?;

    let image = image_contrast(&image_brightness(&fused.image, alpha_b)?, alpha_c)?;
    let mut music = fused.music.clone();
    for spec in [b, c] {
        if spec.alpha != 0.0 {
            music = apply_music_transform(&music, &spec, DEFAULT_THETA)?;
        }
    }
    Ok(Rendition { image, music })
}
