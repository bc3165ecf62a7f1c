//! 8-bit raster images, binary PNM I/O and pixel-domain transforms.

use ndarray::Array1;
use thiserror::Error;

use crate::transforms::{brightness, contrast, TransformError, TransformKind, TransformSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("malformed PNM at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported maxval {maxval} at byte {offset} (only 255 is supported)")]
    UnsupportedMaxval { offset: usize, maxval: u32 },
}

/// Row-major, channel-interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!("zero dimension {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Invalid(format!("{channels} channels")));
        }
        if samples.len() != width * height * channels {
            return Err(ImageError::Invalid(format!(
                "{} samples for {width}x{height}x{channels}",
                samples.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        RasterImage::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    /// One channel as reals, in pixel order.
    pub fn channel(&self, c: usize) -> Array1<f64> {
        self.samples
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&s| s as f64)
            .collect()
    }

    /// Mean over all samples.
    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|&s| s as f64).sum::<f64>() / self.samples.len() as f64
    }

    /// Luminance `0.299 R + 0.587 G + 0.114 B`, rounded; gray images pass through.
    pub fn to_gray(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let samples = self
            .samples
            .chunks_exact(3)
            .map(|px| to_u8(0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64))
            .collect();
        RasterImage::new(self.width, self.height, 1, samples).expect("same dimensions")
    }

    /// Gray replicated into three channels; RGB images pass through.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let samples = self.samples.iter().flat_map(|&s| [s, s, s]).collect();
        RasterImage::new(self.width, self.height, 3, samples).expect("same dimensions")
    }

    fn with_planes(&self, channels: Vec<Vec<u8>>) -> RasterImage {
        let mut samples = vec![0u8; self.samples.len()];
        for (c, plane) in channels.into_iter().enumerate() {
            for (i, v) in plane.into_iter().enumerate() {
                samples[i * self.channels + c] = v;
            }
        }
        RasterImage::new(self.width, self.height, self.channels, samples).expect("same dimensions")
    }
}

/// Rounds half away from zero, then clamps to `0..=255`.
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Applies a real-valued kernel to each channel, then rounds and clamps.
fn per_channel<F>(img: &RasterImage, kernel: F) -> Result<RasterImage, TransformError>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>, TransformError>,
{
    let planes = (0..img.channels)
        .map(|c| kernel(&img.channel(c)).map(|out| out.iter().map(|&v| to_u8(v)).collect()))
        .collect::<Result<Vec<Vec<u8>>, _>>()?;
    Ok(img.with_planes(planes))
}

/// Per channel, `round(x + alpha_b / 2 * max(channel))`, clamped to 8 bits.
pub fn image_brightness(img: &RasterImage, alpha_b: f64) -> Result<RasterImage, TransformError> {
    if alpha_b == 0.0 {
        return Ok(img.clone());
    }
    per_channel(img, |ch| brightness(ch, alpha_b))
}

/// Per channel, `round(mean + (x - mean) * (1 + alpha_c))`, clamped to 8 bits.
pub fn image_contrast(img: &RasterImage, alpha_c: f64) -> Result<RasterImage, TransformError> {
    if alpha_c == 0.0 {
        return Ok(img.clone());
    }
    per_channel(img, |ch| contrast(ch, alpha_c))
}

pub fn image_transform(img: &RasterImage, spec: &TransformSpec) -> Result<RasterImage, TransformError> {
    match spec.kind {
        TransformKind::Brightness => image_brightness(img, spec.alpha),
        TransformKind::Contrast => image_contrast(img, spec.alpha),
    }
}

/// Bilinear resize sampling at pixel centers, with edge clamping.
pub fn resize_bilinear(img: &RasterImage, width: usize, height: usize) -> Result<RasterImage, ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::Invalid(format!("target size {width}x{height}")));
    }
    if (width, height) == (img.width, img.height) {
        return Ok(img.clone());
    }
    let axis = |dst: usize, src: usize| -> Vec<(usize, usize, f64)> {
        let ratio = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let s = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, s - lo as f64)
            })
            .collect()
    };
    let xs = axis(width, img.width);
    let ys = axis(height, img.height);
    let mut samples = Vec::with_capacity(width * height * img.channels);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..img.channels {
                let top = img.get(x0, y0, c) as f64 * (1.0 - fx) + img.get(x1, y0, c) as f64 * fx;
                let bottom = img.get(x0, y1, c) as f64 * (1.0 - fx) + img.get(x1, y1, c) as f64 * fx;
                samples.push(to_u8(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    RasterImage::new(width, height, img.channels, samples)
}

/// Imprints a sketch onto a style image: the style is resized to the sketch
/// and every sample is scaled by `sketch / 255`.
pub fn image_style_fuse(sketch: &RasterImage, style: &RasterImage) -> Result<RasterImage, ImageError> {
    let mask = sketch.to_gray();
    let style = resize_bilinear(style, mask.width, mask.height)?;
    let channels = style.channels;
    let samples = style
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| to_u8((s as u32 * mask.samples[i / channels] as u32) as f64 / 255.0))
        .collect();
    RasterImage::new(mask.width, mask.height, channels, samples)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<(usize, u32), ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::Parse {
                offset: start,
                message: "expected a decimal number".into(),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(|n| (start, n))
            .ok_or(ImageError::Parse {
                offset: start,
                message: "number too large".into(),
            })
    }
}

/// Reads binary P5 (gray) or P6 (RGB) with maxval 255. Header comments are
/// accepted and dropped.
pub fn read_pnm(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => {
            return Err(ImageError::Parse {
                offset: 0,
                message: "expected P5 or P6 magic".into(),
            })
        }
    };
    let mut h = Header { bytes, pos: 2 };
    let (_, width) = h.number()?;
    let (_, height) = h.number()?;
    let (at, maxval) = h.number()?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval { offset: at, maxval });
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => {
            return Err(ImageError::Parse {
                offset: h.pos,
                message: "expected whitespace after maxval".into(),
            })
        }
    }
    let (width, height) = (width as usize, height as usize);
    if width == 0 || height == 0 {
        return Err(ImageError::Parse {
            offset: 2,
            message: "zero image dimension".into(),
        });
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(ImageError::Parse {
            offset: 2,
            message: "image dimensions overflow".into(),
        })?;
    let payload = &bytes[h.pos..];
    if payload.len() < need {
        return Err(ImageError::Parse {
            offset: bytes.len(),
            message: format!("truncated payload: {} of {need} bytes", payload.len()),
        });
    }
    if payload.len() > need {
        return Err(ImageError::Parse {
            offset: h.pos + need,
            message: "trailing data after payload".into(),
        });
    }
    RasterImage::new(width, height, channels, payload.to_vec())
}

/// Canonical form: `P5`/`P6`, width and height on one line, maxval 255, one
/// newline, then the samples.
pub fn write_pnm(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.samples);
    out
}
