//! Image containers and persistence.
//!
//! View-set float binary (little-endian):
//!
//! | offset | size      | field                       |
//! |--------|-----------|-----------------------------|
//! | 0      | 4         | magic `SMVW`                |
//! | 4      | 4         | u32 version (1)             |
//! | 8      | 4         | u32 view count K            |
//! | 12     | 4         | u32 height                  |
//! | 16     | 4         | u32 width                   |
//! | 20     | 4         | u32 channels                |
//! | 24     | 4·K·H·W·C | f32 samples, view-major, rows top-down, channels interleaved |

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VIEWSET_MAGIC: &[u8; 4] = b"SMVW";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Row-major, channels interleaved, values in [0, 1].
    pub data: Vec<f32>,
    /// Set when no geometry reached the image plane.
    pub blank: bool,
}

impl Image {
    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
            blank: false,
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        assert!(self.same_shape(other));
        let total: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        total / self.data.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSet {
    pub images: Vec<Image>,
    pub model_id: String,
}

impl ViewSet {
    pub fn new(images: Vec<Image>, model_id: impl Into<String>) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::Shape("view set needs at least one image".into()))?;
        if let Some(bad) = images.iter().position(|im| !im.same_shape(first)) {
            return Err(Error::Shape(format!(
                "view {bad} is {}x{}x{}, view 0 is {}x{}x{}",
                images[bad].width,
                images[bad].height,
                images[bad].channels,
                first.width,
                first.height,
                first.channels
            )));
        }
        Ok(ViewSet {
            images,
            model_id: model_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

pub fn write_viewset(vs: &ViewSet, path: &Path) -> Result<()> {
    let im = &vs.images[0];
    let mut out = Vec::with_capacity(24 + vs.len() * im.data.len() * 4);
    out.extend_from_slice(VIEWSET_MAGIC);
    for v in [1, vs.len(), im.height, im.width, im.channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for im in &vs.images {
        for v in &im.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_viewset(path: &Path) -> Result<ViewSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::format("view set", m);
    if bytes.len() < 24 || &bytes[..4] != VIEWSET_MAGIC {
        return Err(bad("missing SMVW header".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    if word(0) != 1 {
        return Err(bad(format!("unsupported version {}", word(0))));
    }
    let (k, h, w, c) = (word(1), word(2), word(3), word(4));
    let per = h * w * c;
    if bytes.len() != 24 + 4 * k * per {
        return Err(bad("payload length does not match header".into()));
    }
    let floats: Vec<f32> = bytes[24..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let images = floats
        .chunks_exact(per.max(1))
        .take(k)
        .map(|d| Image {
            width: w,
            height: h,
            channels: c,
            data: d.to_vec(),
            blank: false,
        })
        .collect();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ViewSet::new(images, id)
}

/// 8-bit PNG (grayscale or RGB).
pub fn write_png(img: &Image, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(match img.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(Error::Shape(format!("cannot write {c}-channel PNG"))),
    });
    enc.set_depth(png::BitDepth::Eight);
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let to_err = |e: png::EncodingError| Error::format("png", e.to_string());
    let mut w = enc.write_header().map_err(to_err)?;
    w.write_image_data(&bytes).map_err(to_err)?;
    w.finish().map_err(to_err)
}
