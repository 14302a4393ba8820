use super::{binomial_blur, srgb_to_luminance, RasterImage, ResizePolicy};
use crate::error::{Error, Result};

const CUBIC_A: f64 = -0.5;

/// Catmull-Rom cubic convolution kernel (Keys, a = −0.5).
pub fn catmull_rom(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Four (source index, weight) taps per output sample along one axis.
fn axis_taps(src_len: usize, dst_len: usize) -> Vec<[(usize, f64); 4]> {
    let scale = src_len as f64 / dst_len as f64;
    let last = src_len as isize - 1;
    (0..dst_len)
        .map(|d| {
            let center = (d as f64 + 0.5) * scale - 0.5;
            let base = center.floor();
            let t = center - base;
            let base = base as isize;
            let mut taps = [(0usize, 0.0f64); 4];
            for (k, tap) in taps.iter_mut().enumerate() {
                let offset = k as isize - 1;
                let idx = (base + offset).clamp(0, last) as usize;
                *tap = (idx, catmull_rom(t - offset as f64));
            }
            taps
        })
        .collect()
}

/// Separable bicubic resampling to `out_w × out_h`, replicating edges.
///
/// Sample centers are aligned (`src = (dst + 0.5)·scale − 0.5`); the kernel is
/// not widened when shrinking, so callers low-pass first. Output is clamped
/// to `[0, 1]`. Each pass divides by its weight sum so constants map to
/// themselves.
pub fn resize_bicubic(img: &RasterImage, out_w: usize, out_h: usize) -> Result<RasterImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Domain(format!(
            "resize target must be at least 1×1, got {out_w}×{out_h}"
        )));
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    if (w, h) == (out_w, out_h) {
        return Ok(img.clone());
    }
    let src = img.data();

    let xtaps = axis_taps(w, out_w);
    let mut horiz = vec![0.0; out_w * h * c];
    for y in 0..h {
        let row = &src[y * w * c..(y + 1) * w * c];
        let out_row = &mut horiz[y * out_w * c..(y + 1) * out_w * c];
        for (ox, taps) in xtaps.iter().enumerate() {
            for ch in 0..c {
                let acc: f64 = taps.iter().map(|&(i, wt)| wt * row[i * c + ch]).sum();
                out_row[ox * c + ch] = acc / taps.iter().map(|&(_, wt)| wt).sum::<f64>();
            }
        }
    }

    let ytaps = axis_taps(h, out_h);
    let stride = out_w * c;
    let mut out = vec![0.0; out_w * out_h * c];
    for (oy, taps) in ytaps.iter().enumerate() {
        let out_row = &mut out[oy * stride..(oy + 1) * stride];
        let wsum: f64 = taps.iter().map(|&(_, wt)| wt).sum();
        for &(iy, wt) in taps {
            let in_row = &horiz[iy * stride..(iy + 1) * stride];
            for (o, v) in out_row.iter_mut().zip(in_row) {
                *o += wt * v;
            }
        }
        for o in out_row.iter_mut() {
            *o = (*o / wsum).clamp(0.0, 1.0);
        }
    }
    Ok(RasterImage::from_parts(out_w, out_h, c, img.encoding(), out))
}

/// Shrink a 1-channel image to the policy's target height.
///
/// While the image is at least twice the target height it is binomial-blurred
/// and halved (odd sizes round up); a final bicubic resize then lands on the
/// exact output dimensions.
pub fn downsample_to_height(img: &RasterImage, policy: &ResizePolicy) -> Result<RasterImage> {
    img.require_gray("downsample_to_height")?;
    policy.validate()?;
    let target = policy.target_height;
    if img.height() < target {
        return Err(Error::Domain(format!(
            "image height {} is below the target height {target}",
            img.height()
        )));
    }
    let (out_w, out_h) = policy.output_dims(img.width(), img.height());
    let mut cur = img.clone();
    while cur.height() >= 2 * target {
        let blurred = binomial_blur(&cur)?;
        cur = resize_bicubic(
            &blurred,
            cur.width().div_ceil(2).max(1),
            cur.height().div_ceil(2),
        )?;
    }
    resize_bicubic(&cur, out_w, out_h)
}

/// High-resolution colour to low-resolution grayscale.
pub fn hc_to_lg(img: &RasterImage, policy: &ResizePolicy) -> Result<RasterImage> {
    let lum = srgb_to_luminance(img)?;
    downsample_to_height(&lum, policy)
}
