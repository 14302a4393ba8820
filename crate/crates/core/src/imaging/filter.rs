use super::RasterImage;
use crate::error::Result;

/// 5×5 binomial anti-aliasing kernel (unnormalized).
pub const BINOMIAL_KERNEL: [[u32; 5]; 5] = [
    [1, 1, 1, 1, 1],
    [1, 4, 4, 4, 1],
    [1, 4, 6, 4, 1],
    [1, 4, 4, 4, 1],
    [1, 1, 1, 1, 1],
];

/// Sum of [`BINOMIAL_KERNEL`] entries; the kernel is applied divided by this.
pub const BINOMIAL_KERNEL_SUM: u32 = 54;

/// Low-pass a 1-channel image with the binomial kernel, replicating edge pixels.
pub fn binomial_blur(img: &RasterImage) -> Result<RasterImage> {
    img.require_gray("binomial_blur")?;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.data();
    let norm = f64::from(BINOMIAL_KERNEL_SUM);
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ky, row) in BINOMIAL_KERNEL.iter().enumerate() {
                let sy = (y + ky as isize - 2).clamp(0, h - 1) as usize;
                let line = &src[sy * w as usize..(sy + 1) * w as usize];
                for (kx, &k) in row.iter().enumerate() {
                    let sx = (x + kx as isize - 2).clamp(0, w - 1) as usize;
                    acc += f64::from(k) * line[sx];
                }
            }
            out.push((acc / norm).clamp(0.0, 1.0));
        }
    }
    Ok(RasterImage::from_parts(
        img.width(),
        img.height(),
        1,
        img.encoding(),
        out,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Encoding;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_sum() {
        let sum: u32 = BINOMIAL_KERNEL.iter().flatten().sum();
        assert_eq!(sum, BINOMIAL_KERNEL_SUM);
        assert_eq!(sum, 54);
    }

    #[test]
    fn preserves_constants() {
        for v in [0.0, 0.25, 1.0] {
            let img = RasterImage::filled(9, 6, 1, Encoding::Linear, v);
            let out = binomial_blur(&img).unwrap();
            assert!(out.data().iter().all(|p| (p - v).abs() < 1e-15));
        }
    }

    #[test]
    fn impulse_response_is_kernel() {
        let mut data = vec![0.0; 121];
        data[5 * 11 + 5] = 1.0;
        let img = RasterImage::new(11, 11, 1, Encoding::Linear, data).unwrap();
        let out = binomial_blur(&img).unwrap();
        for y in 0..11 {
            for x in 0..11 {
                let (dx, dy) = (x as isize - 5, y as isize - 5);
                let expected = if dx.abs() <= 2 && dy.abs() <= 2 {
                    f64::from(BINOMIAL_KERNEL[(dy + 2) as usize][(dx + 2) as usize]) / 54.0
                } else {
                    0.0
                };
                assert!((out.get(x, y, 0) - expected).abs() < 1e-15, "({x},{y})");
            }
        }
    }

    #[test]
    fn global_mean_nearly_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..128 * 128).map(|_| rng.random::<f64>()).collect();
        let img = RasterImage::new(128, 128, 1, Encoding::Linear, data).unwrap();
        let out = binomial_blur(&img).unwrap();
        assert!((out.mean() - img.mean()).abs() < 1e-3);
    }

    #[test]
    fn tiny_images() {
        let img = RasterImage::new(1, 1, 1, Encoding::Linear, vec![0.7]).unwrap();
        assert!((binomial_blur(&img).unwrap().data()[0] - 0.7).abs() < 1e-15);
        let img = RasterImage::new(2, 1, 1, Encoding::Linear, vec![0.0, 1.0]).unwrap();
        let out = binomial_blur(&img).unwrap();
        assert!(out.get(0, 0, 0) < out.get(1, 0, 0));
    }

    #[test]
    fn rejects_colour() {
        let img = RasterImage::filled(3, 3, 3, Encoding::SrgbGamma, 0.5);
        assert!(binomial_blur(&img).is_err());
    }
}
