//! Minimal NPY (NumPy array file) support for 2-D float maps.
//!
//! Writes version 1.0 files holding little-endian `f64` in C order. Reads
//! little-endian `f4`/`f8`, C order, with shape `(h, w)`, `(h, w, 1)` or
//! `(1, h, w)`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8] = b"\x93NUMPY";

/// A row-major 2-D float array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array2 {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

pub fn encode(height: usize, width: usize, data: &[f64]) -> Vec<u8> {
    assert_eq!(data.len(), height * width, "array length does not match shape");
    let mut header =
        format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({height}, {width}), }}");
    // Pad so the payload starts on a 64-byte boundary; the header ends in '\n'.
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write(path: &Path, height: usize, width: usize, data: &[f64]) -> Result<()> {
    fs::write(path, encode(height, width, data)).map_err(|e| Error::io(path, e))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(format!("npy: {}", msg.into()))
}

fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}':");
    let start = header
        .find(&pat)
        .ok_or_else(|| bad(format!("header lacks '{key}'")))?
        + pat.len();
    Ok(header[start..].trim_start())
}

pub fn decode(bytes: &[u8]) -> Result<Array2> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(bad("missing magic string"));
    }
    let (header_len, offset) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(bad("truncated header"));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => return Err(bad(format!("unsupported version {v}"))),
    };
    let header = bytes
        .get(offset..offset + header_len)
        .ok_or_else(|| bad("truncated header"))?;
    let header = std::str::from_utf8(header).map_err(|_| bad("header is not UTF-8"))?;

    let descr = dict_value(header, "descr")?;
    let width_bytes = if descr.starts_with("'<f8'") {
        8
    } else if descr.starts_with("'<f4'") {
        4
    } else {
        return Err(bad(format!("unsupported dtype {}", &descr[..descr.len().min(8)])));
    };
    if !dict_value(header, "fortran_order")?.starts_with("False") {
        return Err(bad("Fortran-ordered arrays are not supported"));
    }
    let shape = dict_value(header, "shape")?;
    let close = shape.find(')').ok_or_else(|| bad("malformed shape"))?;
    let dims: Vec<usize> = shape[1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| bad(format!("bad dimension '{s}'"))))
        .collect::<Result<_>>()?;
    let (height, width) = match dims.as_slice() {
        [h, w] | [h, w, 1] | [1, h, w] => (*h, *w),
        other => return Err(bad(format!("expected a 2-D map, got shape {other:?}"))),
    };

    let payload = &bytes[offset + header_len..];
    let n = height * width;
    if payload.len() < n * width_bytes {
        return Err(bad(format!(
            "payload holds {} bytes, shape needs {}",
            payload.len(),
            n * width_bytes
        )));
    }
    let data = if width_bytes == 8 {
        payload
            .chunks_exact(8)
            .take(n)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    } else {
        payload
            .chunks_exact(4)
            .take(n)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect()
    };
    Ok(Array2 {
        height,
        width,
        data,
    })
}

pub fn read(path: &Path) -> Result<Array2> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_aligned() {
        let bytes = encode(2, 3, &[0.0; 6]);
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + header_len) % 64, 0);
        assert_eq!(bytes[10 + header_len - 1], b'\n');
        assert_eq!(bytes.len(), 10 + header_len + 48);
    }

    #[test]
    fn reads_f32_and_trailing_channel() {
        let header = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2, 1), }";
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(header.len() as u16).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for v in [0.5f32, 0.25, 1.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let arr = decode(&bytes).unwrap();
        assert_eq!((arr.height, arr.width), (2, 2));
        assert_eq!(arr.data, vec![0.5, 0.25, 1.0, 0.0]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"hello").is_err());
        let mut bytes = encode(2, 2, &[0.0; 4]);
        bytes.truncate(bytes.len() - 1);
        assert!(decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
            let data: Vec<f64> = (0..h * w).map(|i| (i as f64 + seed as f64).sin()).collect();
            let arr = decode(&encode(h, w, &data)).unwrap();
            prop_assert_eq!(arr, Array2 { height: h, width: w, data });
        }
    }
}
