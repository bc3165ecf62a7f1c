use crate::codec::{decode_texture, encode_texture};
use crate::image::{image_transform, RasterImage};
use crate::music::{quantize, unquantize, NoteList, DEFAULT_STEPS_PER_BEAT};

use super::{TransformError, TransformSpec};

/// Quantize, encode, transform the texture map, decode, unquantize.
///
/// The piece keeps its header; only the notes change.
pub fn apply_music_transform(
    music: &NoteList,
    spec: &TransformSpec,
    theta: f64,
) -> Result<NoteList, TransformError> {
    let roll = quantize(music, DEFAULT_STEPS_PER_BEAT)?;
    let map = encode_texture(&roll, 1)?;
    let moved = map.with_plane(spec.apply(&map.plane)?);
    let decoded = decode_texture(&moved, theta, DEFAULT_STEPS_PER_BEAT)?;
    Ok(unquantize(&decoded, music.ticks_per_quarter))
}

/// The same transform on both halves of an image-music pair.
pub fn apply_image_music_transform_pair(
    image: &RasterImage,
    music: &NoteList,
    spec: &TransformSpec,
    theta: f64,
) -> Result<(RasterImage, NoteList), TransformError> {
    let image = image_transform(image, spec)?;
    let music = apply_music_transform(music, spec, theta)?;
    Ok((image, music))
}
