//! Applies the same brightness, contrast, and style transforms to images and
//! to a 2-D texture map of music, then decodes the music back to notes.
//!
//! ```
//! use crossmap::music::{Note, NoteList, TimeSignature};
//! use crossmap::transforms::{apply_music_transform, TransformSpec, DEFAULT_THETA};
//!
//! let piece = NoteList::new(
//!     vec![Note::new(0, 480, 60, 64), Note::new(480, 480, 64, 80)],
//!     480,
//!     120.0,
//!     TimeSignature(4, 4),
//!     None,
//! )?;
//! let brighter = apply_music_transform(&piece, &TransformSpec::brightness(0.5), DEFAULT_THETA)?;
//! assert!(brighter.total_velocity() >= piece.total_velocity());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod catalog;
pub mod chords;
pub mod codec;
pub mod image;
pub mod midi;
pub mod music;
pub mod notes_json;
pub mod study;
pub mod transforms;
pub mod workflow;

pub use image::RasterImage;
pub use music::{Note, NoteList, PianoRoll, TimeSignature};
pub use transforms::{TransformKind, TransformSpec};

// Book chapters, compiled as doc-tests so their snippets stay honest.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/music.md")]
    mod music {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/style.md")]
    mod style {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/study.md")]
    mod study {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
