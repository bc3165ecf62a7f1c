//! The transformation family shared by images and the music texture map.
//!
//! Brightness shifts every element by half of `alpha_b` times the matrix
//! maximum; contrast scales deviations from the matrix mean by `1 + alpha_c`.
//! Both statistics are taken once, over the whole input matrix.

mod pipeline;
mod style;

use ndarray::{Array, ArrayBase, Data, Dimension};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::codec::DEFAULT_THETA;
pub use pipeline::{apply_image_music_transform_pair, apply_music_transform};
pub use style::{
    compositional_transfer, melody_skyline, snap_to_chord, style_fuse, ACCOMPANIMENT_CHANNEL,
    MELODY_CHANNEL, REGISTER_MARGIN,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("cannot transform an empty matrix")]
    Empty,
    #[error("matrix contains a non-finite value")]
    NonFinite,
    #[error("alpha must be finite, got {0}")]
    BadAlpha(f64),
    #[error("alpha {0} outside [-1, 1]")]
    AlphaOutOfRange(f64),
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Music(#[from] crate::music::MusicError),
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
}

fn check<S, D>(x: &ArrayBase<S, D>, alpha: f64) -> Result<(), TransformError>
where
    S: Data<Elem = f64>,
    D: Dimension,
{
    if x.is_empty() {
        return Err(TransformError::Empty);
    }
    if !alpha.is_finite() {
        return Err(TransformError::BadAlpha(alpha));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TransformError::NonFinite);
    }
    Ok(())
}

/// `x_i + (alpha_b / 2) * max(x)` for every element.
pub fn brightness<S, D>(x: &ArrayBase<S, D>, alpha_b: f64) -> Result<Array<f64, D>, TransformError>
where
    S: Data<Elem = f64>,
    D: Dimension,
{
    check(x, alpha_b)?;
    if alpha_b == 0.0 {
        return Ok(x.to_owned());
    }
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let shift = alpha_b / 2.0 * max;
    Ok(x.mapv(|v| v + shift))
}

/// `mean(x) + (x_i - mean(x)) * (1 + alpha_c)` for every element.
pub fn contrast<S, D>(x: &ArrayBase<S, D>, alpha_c: f64) -> Result<Array<f64, D>, TransformError>
where
    S: Data<Elem = f64>,
    D: Dimension,
{
    check(x, alpha_c)?;
    if alpha_c == 0.0 {
        return Ok(x.to_owned());
    }
    let mean = x.sum() / x.len() as f64;
    let gain = 1.0 + alpha_c;
    Ok(x.mapv(|v| mean + (v - mean) * gain))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Brightness,
    Contrast,
}

impl TransformKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransformKind::Brightness => "brightness",
            TransformKind::Contrast => "contrast",
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brightness" => Ok(TransformKind::Brightness),
            "contrast" => Ok(TransformKind::Contrast),
            other => Err(format!("unknown transform kind `{other}`")),
        }
    }
}

/// A brightness or contrast transform with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub alpha: f64,
}

impl TransformSpec {
    pub fn brightness(alpha: f64) -> Self {
        TransformSpec {
            kind: TransformKind::Brightness,
            alpha,
        }
    }

    pub fn contrast(alpha: f64) -> Self {
        TransformSpec {
            kind: TransformKind::Contrast,
            alpha,
        }
    }

    /// Rejects non-finite alphas, and alphas outside `[-1, 1]` unless
    /// `allow_wide` is set.
    pub fn validate(&self, allow_wide: bool) -> Result<(), TransformError> {
        if !self.alpha.is_finite() {
            return Err(TransformError::BadAlpha(self.alpha));
        }
        if !allow_wide && !(-1.0..=1.0).contains(&self.alpha) {
            return Err(TransformError::AlphaOutOfRange(self.alpha));
        }
        Ok(())
    }

    /// Same kind, negated parameter. This is parameter negation applied to the
    /// original input, not a functional inverse of the transformed output.
    pub fn inverse(&self) -> Self {
        TransformSpec {
            kind: self.kind,
            alpha: -self.alpha,
        }
    }

    pub fn apply<S, D>(&self, x: &ArrayBase<S, D>) -> Result<Array<f64, D>, TransformError>
    where
        S: Data<Elem = f64>,
        D: Dimension,
    {
        match self.kind {
            TransformKind::Brightness => brightness(x, self.alpha),
            TransformKind::Contrast => contrast(x, self.alpha),
        }
    }
}
