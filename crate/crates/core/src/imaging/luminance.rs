use super::{gamma_expand, Encoding, RasterImage};
use crate::error::{Error, Result};

/// Rec. 709 / sRGB luminance weights for linear R, G and B.
pub const LUMA_R: f64 = 0.2126;
pub const LUMA_G: f64 = 0.7152;
pub const LUMA_B: f64 = 0.0722;

/// Convert a 3-channel image to 1-channel linear luminance.
///
/// Gamma-encoded inputs are expanded per component before the weighted sum;
/// linear inputs are weighted directly.
pub fn srgb_to_luminance(img: &RasterImage) -> Result<RasterImage> {
    if img.channels() != 3 {
        return Err(Error::Type(format!(
            "luminance conversion needs a 3-channel image, got {} channel(s)",
            img.channels()
        )));
    }
    let expand = img.encoding() == Encoding::SrgbGamma;
    let lin = |v: f64| -> Result<f64> {
        if expand {
            gamma_expand(v)
        } else {
            Ok(v)
        }
    };
    let mut out = Vec::with_capacity(img.width() * img.height());
    for px in img.data().chunks_exact(3) {
        let (r, g, b) = (lin(px[0])?, lin(px[1])?, lin(px[2])?);
        let y = LUMA_R * r + LUMA_G * g + LUMA_B * b;
        out.push(y.clamp(0.0, 1.0));
    }
    Ok(RasterImage::from_parts(
        img.width(),
        img.height(),
        1,
        Encoding::Linear,
        out,
    ))
}
