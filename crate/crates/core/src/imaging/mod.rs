//! The HC→LG transform: gamma handling, luminance conversion, binomial
//! anti-aliasing and bicubic resampling.
//!
//! All pixels are `f64` in `[0, 1]`; quantization to 8 bits only happens at
//! export time (see [`io`]).

mod filter;
mod gamma;
pub mod io;
mod luminance;
mod resample;

pub use filter::{binomial_blur, BINOMIAL_KERNEL, BINOMIAL_KERNEL_SUM};
pub use gamma::{gamma_compress, gamma_expand, LINEAR_BREAKPOINT, SRGB_BREAKPOINT};
pub use luminance::{srgb_to_luminance, LUMA_B, LUMA_G, LUMA_R};
pub use resample::{catmull_rom, downsample_to_height, hc_to_lg, resize_bicubic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How stored pixel values relate to light intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// sRGB transfer curve applied (what 8-bit image files hold).
    SrgbGamma,
    /// Linear light.
    Linear,
}

/// A row-major raster with 1 (luminance) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    encoding: Encoding,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        encoding: Encoding,
        data: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain(format!(
                "image dimensions must be positive, got {width}×{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Type(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Validation(format!(
                "pixel buffer holds {} values, expected {width}×{height}×{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            encoding,
            data,
        })
    }

    /// Constant image. Panics on zero dimensions or an out-of-range value.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        encoding: Encoding,
        value: f64,
    ) -> Self {
        Self::new(
            width,
            height,
            channels,
            encoding,
            vec![value; width * height * channels],
        )
        .expect("valid constant image")
    }

    /// Single-channel image from a per-pixel function; values are clamped to `[0, 1]`.
    pub fn from_fn_gray(
        width: usize,
        height: usize,
        encoding: Encoding,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, 1, encoding, data)
    }

    // Internal constructor for results that are in range by construction.
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        channels: usize,
        encoding: Encoding,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            encoding,
            data,
        }
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

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Extract one channel as a 1-channel image with the same encoding.
    pub fn channel(&self, c: usize) -> Result<Self> {
        if c >= self.channels {
            return Err(Error::Type(format!(
                "channel {c} requested from a {}-channel image",
                self.channels
            )));
        }
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Ok(Self::from_parts(
            self.width,
            self.height,
            1,
            self.encoding,
            data,
        ))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation over all samples.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .data
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.data.len() as f64;
        var.sqrt()
    }

    pub(crate) fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::Type(format!(
                "{op} needs a 1-channel image, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }
}

/// How the output width is chosen when shrinking to the target height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "width")]
pub enum AspectMode {
    /// Width follows the source aspect ratio, rounded to the nearest pixel.
    Preserve,
    /// Force an exact output width.
    FixedWidth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResizePolicy {
    pub target_height: usize,
    pub aspect: AspectMode,
}

impl Default for ResizePolicy {
    fn default() -> Self {
        Self {
            target_height: 64,
            aspect: AspectMode::Preserve,
        }
    }
}

impl ResizePolicy {
    pub fn preserve(target_height: usize) -> Self {
        Self {
            target_height,
            aspect: AspectMode::Preserve,
        }
    }

    pub fn fixed(width: usize, target_height: usize) -> Self {
        Self {
            target_height,
            aspect: AspectMode::FixedWidth(width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_height == 0 {
            return Err(Error::Domain("target height must be ≥ 1".into()));
        }
        if self.aspect == AspectMode::FixedWidth(0) {
            return Err(Error::Domain("fixed width must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Final output dimensions for a source of the given size.
    pub fn output_dims(&self, src_width: usize, src_height: usize) -> (usize, usize) {
        let w = match self.aspect {
            AspectMode::FixedWidth(w) => w,
            AspectMode::Preserve => {
                let w = (src_width as f64 * self.target_height as f64 / src_height as f64).round();
                (w as usize).max(1)
            }
        };
        (w, self.target_height)
    }
}
