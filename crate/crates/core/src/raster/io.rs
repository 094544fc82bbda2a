use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageFormat};
use log::warn;

use super::{EdgeMap, GrayImage};
use crate::error::{ensure_arg, Error, Result};

/// Reads an 8-bit PGM or PNG file into [0,1] intensities.
///
/// Multi-channel inputs are reduced to the selected channel (default 0);
/// the alpha channel of gray+alpha or RGBA files is addressable too.
pub fn load_image(path: impl AsRef<Path>, channel: Option<usize>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;

    let channels = match &decoded {
        DynamicImage::ImageLuma8(_) => 1,
        DynamicImage::ImageLumaA8(_) => 2,
        DynamicImage::ImageRgb8(_) => 3,
        DynamicImage::ImageRgba8(_) => 4,
        other => {
            return Err(Error::Format(format!(
                "{}: only 8-bit gray/RGB images are supported, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let channel = channel.unwrap_or(0);
    ensure_arg!(
        channel < channels,
        "channel {channel} out of range for a {channels}-channel image"
    );

    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let raw = decoded.as_bytes();
    let data = raw
        .iter()
        .skip(channel)
        .step_by(channels)
        .map(|&v| f64::from(v) / 255.0)
        .collect();
    GrayImage::new(width, height, data)
}

fn quantize(img: &GrayImage) -> Vec<u8> {
    let (unit, clamped) = img.clamp_unit();
    if clamped > 0 {
        warn!("clamped {clamped} pixel(s) outside [0,1] before saving");
    }
    unit.data()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect()
}

fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(pixels.len() + 20);
    write!(out, "P5\n{width} {height}\n255\n").expect("write to vec");
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_gray8(path: &Path, width: usize, height: usize, pixels: Vec<u8>) -> Result<()> {
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if !is_png {
        return write_pgm(path, width, height, &pixels);
    }
    let buf = image::GrayImage::from_raw(width as u32, height as u32, pixels)
        .expect("buffer matches dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Format(other.to_string()),
        })
}

/// Writes an 8-bit image: PNG when the extension is `.png`, binary PGM (P5)
/// otherwise. Values outside [0,1] are clamped with a logged warning.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_gray8(path.as_ref(), img.width(), img.height(), quantize(img))
}

/// Writes a mask with values {0,255}.
pub fn save_mask(mask: &EdgeMap, path: impl AsRef<Path>) -> Result<()> {
    let pixels = mask.bits().iter().map(|&b| b * 255).collect();
    write_gray8(path.as_ref(), mask.width(), mask.height(), pixels)
}

/// Reads a mask image; pixels at or above half intensity are set.
pub fn load_mask(path: impl AsRef<Path>) -> Result<EdgeMap> {
    Ok(load_image(path, Some(0))?.threshold(0.5))
}
