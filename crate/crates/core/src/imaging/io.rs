//! Image file I/O and 8-bit quantization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{gamma_compress, gamma_expand, Encoding, RasterImage};
use crate::error::{Error, Result};

/// Which transfer curve gray8 exports are written with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrayExport {
    /// sRGB-encoded, so the file displays with the original luminosity.
    #[default]
    Gamma,
    /// Linear light, for numeric interchange.
    Linear,
}

/// Round-half-up quantization of a unit value to 8 bits.
pub fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Load an 8-bit image file (PNG, JPEG, BMP) as 3-channel sRGB.
pub fn load_rgb(path: &Path) -> Result<RasterImage> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect();
    RasterImage::new(w as usize, h as usize, 3, Encoding::SrgbGamma, data)
}

/// Load an image file as plain 1-channel values in `[0, 1]` (no curve applied).
pub fn load_gray(path: &Path) -> Result<RasterImage> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_luma8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect();
    RasterImage::new(w as usize, h as usize, 1, Encoding::Linear, data)
}

/// Quantize a 1-channel image to gray8 bytes, row-major.
pub fn to_gray8(img: &RasterImage, export: GrayExport) -> Result<Vec<u8>> {
    img.require_gray("gray8 export")?;
    img.data()
        .iter()
        .map(|&v| {
            let v = match (img.encoding(), export) {
                (Encoding::Linear, GrayExport::Gamma) => gamma_compress(v)?,
                (Encoding::SrgbGamma, GrayExport::Linear) => gamma_expand(v)?,
                _ => v,
            };
            Ok(quantize8(v))
        })
        .collect()
}

/// Quantize a 3-channel image to interleaved RGB8 bytes, keeping its encoding.
pub fn to_rgb8(img: &RasterImage) -> Result<Vec<u8>> {
    if img.channels() != 3 {
        return Err(Error::Type("RGB export needs a 3-channel image".into()));
    }
    Ok(img.data().iter().map(|&v| quantize8(v)).collect())
}

fn dims_u32(img: &RasterImage) -> (u32, u32) {
    (img.width() as u32, img.height() as u32)
}

pub fn save_gray_png(path: &Path, img: &RasterImage, export: GrayExport) -> Result<()> {
    let bytes = to_gray8(img, export)?;
    let (w, h) = dims_u32(img);
    image::save_buffer(path, &bytes, w, h, image::ExtendedColorType::L8)
        .map_err(|e| image_err(path, e))
}

pub fn save_rgb_png(path: &Path, img: &RasterImage) -> Result<()> {
    let bytes = to_rgb8(img)?;
    let (w, h) = dims_u32(img);
    image::save_buffer(path, &bytes, w, h, image::ExtendedColorType::Rgb8)
        .map_err(|e| image_err(path, e))
}

/// Binary PGM (P5), 8-bit.
pub fn write_pgm(path: &Path, img: &RasterImage, export: GrayExport) -> Result<()> {
    let bytes = to_gray8(img, export)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())
        .and_then(|_| out.write_all(&bytes))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Raw pixel payload of a 24-bit RGB image.
pub fn rgb24_bytes(width: usize, height: usize) -> usize {
    width * height * 3
}

/// Raw pixel payload of an 8-bit grayscale image.
pub fn gray8_bytes(width: usize, height: usize) -> usize {
    width * height
}
