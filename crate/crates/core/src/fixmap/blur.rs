use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{DensityMap, Normalization};
use crate::error::{Error, Result};

/// Smallest accepted Gaussian σ, in pixels.
pub const MIN_SIGMA: f64 = 0.5;

/// Kernel taps below this fraction of the central tap are dropped.
const TAP_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlurDomain {
    /// Multiply by the Gaussian transfer function in frequency space,
    /// with a 4σ zero margin against wrap-around.
    #[default]
    Fourier,
    /// Sampled Gaussian truncated at ⌈4σ⌉, renormalized to unit mass.
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurSpec {
    pub sigma: f64,
    #[serde(default)]
    pub domain: BlurDomain,
}

impl BlurSpec {
    pub fn new(sigma: f64, domain: BlurDomain) -> Result<Self> {
        let spec = Self { sigma, domain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fourier(sigma: f64) -> Result<Self> {
        Self::new(sigma, BlurDomain::Fourier)
    }

    pub fn spatial(sigma: f64) -> Result<Self> {
        Self::new(sigma, BlurDomain::Spatial)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < MIN_SIGMA {
            return Err(Error::Domain(format!(
                "blur σ must be ≥ {MIN_SIGMA}, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    fn margin(&self) -> usize {
        (4.0 * self.sigma).ceil() as usize
    }
}

/// Symmetric 1-D kernel: `taps[d]` is the weight at distance `d`.
#[derive(Debug, Clone)]
struct AxisKernel {
    taps: Vec<f64>,
}

impl AxisKernel {
    fn new(spec: &BlurSpec, len: usize) -> Self {
        let mut taps = match spec.domain {
            BlurDomain::Fourier => fourier_taps(spec.sigma, len, spec.margin()),
            BlurDomain::Spatial => spatial_taps(spec.sigma, spec.margin()),
        };
        taps.truncate(len);
        let cutoff = taps[0].abs() * TAP_CUTOFF;
        while taps.len() > 1 && taps.last().is_some_and(|t| t.abs() <= cutoff) {
            taps.pop();
        }
        Self { taps }
    }

    fn radius(&self) -> usize {
        self.taps.len() - 1
    }

    #[inline]
    fn weight(&self, a: usize, b: usize) -> f64 {
        self.taps[a.abs_diff(b)]
    }

    /// Output index range reached from source index `i` on an axis of `len`.
    #[inline]
    fn reach(&self, i: usize, len: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.radius())..(i + self.radius() + 1).min(len)
    }
}

/// Impulse response of the padded frequency-domain Gaussian filter.
///
/// An axis of `len` samples is embedded in `len + 2·margin` zeros; the
/// filter is then a circulant operator whose kernel is the inverse DFT of
/// the transfer function `exp(−2π²σ²f²)`. Distances inside the axis never
/// exceed `len − 1`, so only those taps are needed; for short margins the
/// tail taps include whatever wraps around the padded period.
fn fourier_taps(sigma: f64, len: usize, margin: usize) -> Vec<f64> {
    let padded = len + 2 * margin;
    let mut spectrum: Vec<Complex<f64>> = (0..padded)
        .map(|k| {
            let f = k.min(padded - k) as f64 / padded as f64;
            Complex::new((-2.0 * PI * PI * sigma * sigma * f * f).exp(), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(padded).process(&mut spectrum);
    let scale = 1.0 / padded as f64;
    spectrum
        .iter()
        .take(len)
        .map(|c| c.re * scale)
        .collect()
}

fn spatial_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let mut taps: Vec<f64> = (0..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let mass = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();
    for t in &mut taps {
        *t /= mass;
    }
    taps
}

/// A Gaussian blur prepared for one raster size.
///
/// Build once per (σ, size) and apply to many maps; the per-axis kernels are
/// the expensive part for the frequency-domain variant.
#[derive(Debug, Clone)]
pub struct GaussianBlur {
    spec: BlurSpec,
    width: usize,
    height: usize,
    x_kernel: AxisKernel,
    y_kernel: AxisKernel,
}

impl GaussianBlur {
    pub fn new(spec: BlurSpec, width: usize, height: usize) -> Result<Self> {
        spec.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "blur raster must be at least 1×1, got {width}×{height}"
            )));
        }
        let x_kernel = AxisKernel::new(&spec, width);
        let y_kernel = if height == width {
            x_kernel.clone()
        } else {
            AxisKernel::new(&spec, height)
        };
        Ok(Self {
            spec,
            width,
            height,
            x_kernel,
            y_kernel,
        })
    }

    pub fn spec(&self) -> &BlurSpec {
        &self.spec
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Separable linear filtering with zero padding; no clamping or
    /// renormalization. Zero rows and pixels are skipped, so sparse fixation
    /// rasters are cheap.
    pub fn apply_linear(&self, values: &[f64]) -> Result<Vec<f64>> {
        let (w, h) = (self.width, self.height);
        if values.len() != w * h {
            return Err(Error::Validation(format!(
                "map holds {} values, blur prepared for {w}×{h}",
                values.len()
            )));
        }
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for y in 0..h {
            let src = &values[y * w..(y + 1) * w];
            if src.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut row = vec![0.0; w];
            for (x, &v) in src.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                for ox in self.x_kernel.reach(x, w) {
                    row[ox] += v * self.x_kernel.weight(ox, x);
                }
            }
            rows.push((y, row));
        }

        let mut out = vec![0.0; w * h];
        for (y, row) in &rows {
            for oy in self.y_kernel.reach(*y, h) {
                let wt = self.y_kernel.weight(oy, *y);
                for (o, r) in out[oy * w..(oy + 1) * w].iter_mut().zip(row) {
                    *o += wt * r;
                }
            }
        }
        Ok(out)
    }

    /// Blur and renormalize to a sum-1 density.
    ///
    /// Negative ringing from the frequency-domain filter (only noticeable
    /// for σ ≲ 1) is clipped to zero before renormalizing.
    pub fn apply(&self, map: &DensityMap) -> Result<DensityMap> {
        if map.size() != self.size() {
            return Err(Error::Validation(format!(
                "map is {}×{}, blur prepared for {}×{}",
                map.width(),
                map.height(),
                self.width,
                self.height
            )));
        }
        if map.sum() <= 0.0 {
            return Err(Error::EmptyInput("cannot blur a map with zero mass".into()));
        }
        let mut values = self.apply_linear(map.values())?;
        for v in &mut values {
            *v = v.max(0.0);
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyInput("blurred map has zero mass".into()));
        }
        for v in &mut values {
            *v /= total;
        }
        Ok(DensityMap::from_parts(
            self.width,
            self.height,
            values,
            Normalization::Sum1,
        ))
    }
}

/// One-shot Gaussian regularization of a fixation (or any) map to sum 1.
pub fn blur_density(map: &DensityMap, spec: &BlurSpec) -> Result<DensityMap> {
    GaussianBlur::new(*spec, map.width(), map.height())?.apply(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixmap::{rasterize, FixationSet, Point};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct 2-D frequency-domain reference: pad, 2-D FFT, multiply by the
    /// 2-D transfer function, inverse FFT, crop.
    fn fft2_reference(values: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
        let m = (4.0 * sigma).ceil() as usize;
        let (pw, ph) = (w + 2 * m, h + 2 * m);
        let mut grid = vec![Complex::new(0.0, 0.0); pw * ph];
        for y in 0..h {
            for x in 0..w {
                grid[(y + m) * pw + x + m].re = values[y * w + x];
            }
        }
        let mut planner = FftPlanner::new();
        let (fw, fh) = (planner.plan_fft_forward(pw), planner.plan_fft_forward(ph));
        let (iw, ih) = (planner.plan_fft_inverse(pw), planner.plan_fft_inverse(ph));
        let transpose = |g: &[Complex<f64>], cols: usize, rows: usize| {
            let mut t = vec![Complex::new(0.0, 0.0); g.len()];
            for r in 0..rows {
                for c in 0..cols {
                    t[c * rows + r] = g[r * cols + c];
                }
            }
            t
        };
        for row in grid.chunks_mut(pw) {
            fw.process(row);
        }
        let mut cols = transpose(&grid, pw, ph);
        for col in cols.chunks_mut(ph) {
            fh.process(col);
        }
        for kx in 0..pw {
            for ky in 0..ph {
                let fx = kx.min(pw - kx) as f64 / pw as f64;
                let fy = ky.min(ph - ky) as f64 / ph as f64;
                cols[kx * ph + ky] *= (-2.0 * PI * PI * sigma * sigma * (fx * fx + fy * fy)).exp();
            }
        }
        for col in cols.chunks_mut(ph) {
            ih.process(col);
        }
        let mut grid = transpose(&cols, ph, pw);
        for row in grid.chunks_mut(pw) {
            iw.process(row);
        }
        let scale = 1.0 / (pw * ph) as f64;
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                out.push(grid[(y + m) * pw + x + m].re * scale);
            }
        }
        out
    }

    fn random_raster(w: usize, h: usize, n: usize, seed: u64) -> DensityMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| Point::new(rng.random_range(0.0..w as f64 - 0.5), rng.random_range(0.0..h as f64 - 0.5)))
            .collect();
        rasterize(&FixationSet::new("s", "o", (w, h), pts).unwrap()).unwrap()
    }

    #[test]
    fn sigma_floor() {
        assert!(BlurSpec::fourier(0.49).is_err());
        assert!(BlurSpec::fourier(f64::NAN).is_err());
        assert!(BlurSpec::spatial(0.5).is_ok());
    }

    #[test]
    fn fourier_matches_2d_fft() {
        for (sigma, seed) in [(1.0, 1), (3.0, 2), (7.5, 3)] {
            let raster = random_raster(40, 23, 12, seed);
            let blur = GaussianBlur::new(BlurSpec::fourier(sigma).unwrap(), 40, 23).unwrap();
            let ours = blur.apply_linear(raster.values()).unwrap();
            let reference = fft2_reference(raster.values(), 40, 23, sigma);
            for (a, b) in ours.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12, "σ={sigma}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn fourier_vs_spatial() {
        let raster = random_raster(64, 64, 30, 11);
        let f = blur_density(&raster, &BlurSpec::fourier(5.0).unwrap()).unwrap();
        let s = blur_density(&raster, &BlurSpec::spatial(5.0).unwrap()).unwrap();
        let max_diff = f.values().iter().zip(s.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_diff <= 1e-3);
        // and tight relative to the peak, so the comparison is not vacuous
        assert!(max_diff / f.max() < 1e-3, "relative diff {}", max_diff / f.max());
    }

    #[test]
    fn central_fixation_is_symmetric() {
        for domain in [BlurDomain::Fourier, BlurDomain::Spatial] {
            for sigma in [1.0, 4.0, 30.0] {
                let set = FixationSet::new("s", "o", (41, 41), vec![Point::new(20.0, 20.0)]).unwrap();
                let m = blur_density(&rasterize(&set).unwrap(), &BlurSpec::new(sigma, domain).unwrap()).unwrap();
                assert_eq!(m.argmax(), 20 * 41 + 20);
                for y in 0..41 {
                    for x in 0..41 {
                        let v = m.get(x, y);
                        assert!((v - m.get(40 - x, y)).abs() < 1e-6);
                        assert!((v - m.get(x, 40 - y)).abs() < 1e-6);
                        assert!((v - m.get(y, x)).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn output_sums_to_one() {
        let raster = random_raster(120, 64, 15, 5);
        for sigma in [1.0, 30.0, 100.0] {
            for domain in [BlurDomain::Fourier, BlurDomain::Spatial] {
                let m = blur_density(&raster, &BlurSpec::new(sigma, domain).unwrap()).unwrap();
                assert!((m.sum() - 1.0).abs() < 1e-6);
                assert!(m.values().iter().all(|&v| v >= 0.0));
                assert_eq!(m.normalization(), Normalization::Sum1);
            }
        }
    }

    #[test]
    fn zero_map_is_rejected() {
        let zero = DensityMap::zeros(8, 8);
        assert!(matches!(
            blur_density(&zero, &BlurSpec::fourier(2.0).unwrap()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn translation_moves_peak() {
        let (w, h) = (96, 64);
        let sigma = 6.0; // ≤ h/8, fixation ≥ 4σ from every border
        let blur = GaussianBlur::new(BlurSpec::fourier(sigma).unwrap(), w, h).unwrap();
        let peak = |x: f64, y: f64| {
            let set = FixationSet::new("s", "o", (w, h), vec![Point::new(x, y)]).unwrap();
            let m = blur.apply(&rasterize(&set).unwrap()).unwrap();
            let i = m.argmax();
            ((i % w) as f64, (i / w) as f64)
        };
        let base = peak(30.0, 30.0);
        for (dx, dy) in [(5.0, 0.0), (0.0, 3.0), (20.0, 2.0), (-4.0, 4.0)] {
            let moved = peak(30.0 + dx, 30.0 + dy);
            assert!((moved.0 - base.0 - dx).abs() <= 0.5 && (moved.1 - base.1 - dy).abs() <= 0.5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linear_before_renormalization(seed in any::<u64>(), a in 0.1f64..5.0, b in 0.1f64..5.0, sigma in 0.5f64..20.0) {
            let p = random_raster(30, 20, 6, seed);
            let q = random_raster(30, 20, 9, seed ^ 0x9e37);
            let blur = GaussianBlur::new(BlurSpec::fourier(sigma).unwrap(), 30, 20).unwrap();
            let mixed: Vec<f64> = p.values().iter().zip(q.values()).map(|(x, y)| a * x + b * y).collect();
            let lhs = blur.apply_linear(&mixed).unwrap();
            let bp = blur.apply_linear(p.values()).unwrap();
            let bq = blur.apply_linear(q.values()).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * bp[i] + b * bq[i])).abs() < 1e-6);
            }
        }

        #[test]
        fn wider_sigma_never_raises_the_peak(seed in any::<u64>(), s1 in 0.5f64..60.0, extra in 0.1f64..40.0) {
            let raster = random_raster(50, 40, 8, seed);
            for domain in [BlurDomain::Fourier, BlurDomain::Spatial] {
                let narrow = blur_density(&raster, &BlurSpec::new(s1.max(1.0), domain).unwrap()).unwrap();
                let wide = blur_density(&raster, &BlurSpec::new(s1.max(1.0) + extra, domain).unwrap()).unwrap();
                prop_assert!(wide.max() <= narrow.max() + 1e-12);
            }
        }
    }
}
