use crate::error::{Error, Result};

/// Encoded value at which the sRGB curve switches from linear to power law.
pub const SRGB_BREAKPOINT: f64 = 0.04045;

/// Linear value corresponding to [`SRGB_BREAKPOINT`]; the exact image of the
/// encoded breakpoint so that compress is the inverse of expand.
pub const LINEAR_BREAKPOINT: f64 = SRGB_BREAKPOINT / 12.92;

fn check_unit(c: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!("{what} {c} outside [0, 1]")));
    }
    Ok(())
}

/// Remove the sRGB transfer curve from one encoded component.
pub fn gamma_expand(c: f64) -> Result<f64> {
    check_unit(c, "sRGB component")?;
    let linear = if c <= SRGB_BREAKPOINT {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    };
    Ok(linear.min(1.0))
}

/// Apply the sRGB transfer curve to one linear component.
pub fn gamma_compress(c: f64) -> Result<f64> {
    check_unit(c, "linear component")?;
    let encoded = if c <= LINEAR_BREAKPOINT {
        c * 12.92
    } else {
        1.055 * (c.powf(1.0 / 2.4) - 1.0) + 1.0
    };
    Ok(encoded.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        assert_eq!(gamma_expand(0.0).unwrap(), 0.0);
        assert_eq!(gamma_expand(1.0).unwrap(), 1.0);
        assert_eq!(gamma_compress(0.0).unwrap(), 0.0);
        assert_eq!(gamma_compress(1.0).unwrap(), 1.0);
    }

    #[test]
    fn mid_grey() {
        // ((0.5 + 0.055) / 1.055)^2.4 evaluated with 30-digit arithmetic.
        let reference = 0.214_041_140_482_232_44;
        assert!((gamma_expand(0.5).unwrap() - reference).abs() < 1e-4);
        assert!((gamma_expand(0.5).unwrap() - reference).abs() < 1e-12);
        assert!((gamma_compress(reference).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn continuous_at_breakpoint() {
        let below = SRGB_BREAKPOINT / 12.92;
        let above = ((SRGB_BREAKPOINT + 0.055) / 1.055).powf(2.4);
        assert!((below - above).abs() < 1e-6);
        let lo = gamma_expand(SRGB_BREAKPOINT).unwrap();
        let hi = gamma_expand(SRGB_BREAKPOINT + 1e-12).unwrap();
        assert!((hi - lo).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        for bad in [-0.01, 1.01, f64::NAN] {
            assert!(matches!(gamma_expand(bad), Err(Error::Domain(_))));
            assert!(matches!(gamma_compress(bad), Err(Error::Domain(_))));
        }
    }

    proptest! {
        #[test]
        fn round_trip(x in 0.0f64..=1.0) {
            let back = gamma_compress(gamma_expand(x).unwrap()).unwrap();
            prop_assert!((back - x).abs() <= 1e-6);
        }

        #[test]
        fn expand_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(gamma_expand(lo).unwrap() <= gamma_expand(hi).unwrap());
        }
    }
}
