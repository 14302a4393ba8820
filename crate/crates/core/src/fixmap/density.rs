use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::io::{load_gray, save_gray_png, GrayExport};
use crate::imaging::{Encoding, RasterImage};
use crate::npy;

/// Which normalization a [`DensityMap`] currently satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Values sum to 1.
    Sum1,
    /// Maximum value is exactly 1.
    Max1,
    /// No normalization (e.g. fixation counts).
    Raw,
}

const SUM_TOLERANCE: f64 = 1e-6;

/// A nonnegative row-major map over a stimulus raster.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    normalization: Normalization,
}

impl DensityMap {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        normalization: Normalization,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "density map dimensions must be positive, got {width}×{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::Validation(format!(
                "density map holds {} values, expected {width}×{height}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Validation(format!(
                "density values must be finite and nonnegative, found {bad}"
            )));
        }
        let map = Self {
            width,
            height,
            values,
            normalization,
        };
        match normalization {
            Normalization::Sum1 if (map.sum() - 1.0).abs() > SUM_TOLERANCE => {
                Err(Error::Validation(format!(
                    "sum-1 map sums to {}",
                    map.sum()
                )))
            }
            Normalization::Max1 if map.max() != 1.0 => Err(Error::Validation(format!(
                "max-1 map has maximum {}",
                map.max()
            ))),
            _ => Ok(map),
        }
    }

    pub fn raw(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(width, height, values, Normalization::Raw)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::raw(width, height, vec![0.0; width * height]).expect("valid zero map")
    }

    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>, normalization: Normalization) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
            normalization,
        }
    }

    /// Interpret a 1-channel image as a raw map.
    pub fn from_image(img: &RasterImage) -> Result<Self> {
        if img.channels() != 1 {
            return Err(Error::Type("density maps come from 1-channel images".into()));
        }
        Self::raw(img.width(), img.height(), img.data().to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Flat index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn to_sum1(&self) -> Result<Self> {
        let sum = self.sum();
        if sum <= 0.0 {
            return Err(Error::EmptyInput("map has zero mass".into()));
        }
        let values = self.values.iter().map(|v| v / sum).collect();
        Ok(Self::from_parts(self.width, self.height, values, Normalization::Sum1))
    }

    pub fn to_max1(&self) -> Result<Self> {
        let max = self.max();
        if max <= 0.0 {
            return Err(Error::EmptyInput("map has zero mass".into()));
        }
        let values = self.values.iter().map(|v| v / max).collect();
        Ok(Self::from_parts(self.width, self.height, values, Normalization::Max1))
    }

    /// Max-1 view as a 1-channel linear image.
    pub fn to_image(&self) -> Result<RasterImage> {
        let m = self.to_max1()?;
        RasterImage::new(self.width, self.height, 1, Encoding::Linear, m.values)
    }

    /// 8-bit PNG of the max-1 map (values written without a transfer curve).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_gray_png(path, &self.to_image()?, GrayExport::Linear)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Self::from_image(&load_gray(path)?)
    }

    /// Raw float values as a `(height, width)` `<f8` NPY array.
    pub fn save_npy(&self, path: &Path) -> Result<()> {
        npy::write(path, self.height, self.width, &self.values)
    }

    pub fn load_npy(path: &Path) -> Result<Self> {
        let arr = npy::read(path)?;
        Self::raw(arr.width, arr.height, arr.data)
    }

    /// Load from `.npy` or any supported image file, by extension.
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("npy") => Self::load_npy(path),
            _ => Self::load_png(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(DensityMap::raw(2, 2, vec![0.0, 1.0, -0.1, 0.0]).is_err());
        assert!(DensityMap::raw(2, 2, vec![0.0; 3]).is_err());
        assert!(DensityMap::raw(2, 2, vec![f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(DensityMap::new(1, 2, vec![0.5, 0.4], Normalization::Sum1).is_err());
        assert!(DensityMap::new(1, 2, vec![0.5, 0.5], Normalization::Sum1).is_ok());
        assert!(DensityMap::new(1, 2, vec![0.5, 0.9], Normalization::Max1).is_err());
    }

    #[test]
    fn normalizations() {
        let m = DensityMap::raw(3, 1, vec![1.0, 3.0, 0.0]).unwrap();
        let s = m.to_sum1().unwrap();
        assert_eq!(s.values(), &[0.25, 0.75, 0.0]);
        let x = m.to_max1().unwrap();
        assert_eq!(x.max(), 1.0);
        assert_eq!(x.normalization(), Normalization::Max1);
        assert!(matches!(DensityMap::zeros(2, 2).to_sum1(), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = DensityMap::raw(3, 2, vec![0.0, 0.5, 1.0, 0.25, 0.0, 0.125]).unwrap();
        let npy_path = dir.path().join("m.npy");
        m.save_npy(&npy_path).unwrap();
        assert_eq!(DensityMap::load(&npy_path).unwrap(), m);

        let png_path = dir.path().join("m.png");
        m.save_png(&png_path).unwrap();
        let back = DensityMap::load(&png_path).unwrap();
        assert_eq!(back.size(), (3, 2));
        assert_eq!(back.get(2, 0), 1.0);
        assert!((back.get(1, 0) - 0.5).abs() <= 0.5 / 255.0);
    }
}
