//! Two-dimensional little-endian float32 arrays in the NPY v1.0 layout.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

/// Row-major `(rows, cols)` float32 array.
#[derive(Debug, Clone, PartialEq)]
pub struct Array2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

pub fn encode_f32_2d(rows: usize, cols: usize, data: &[f32]) -> Result<Vec<u8>> {
    if data.len() != rows * cols {
        return Err(Error::invalid(format!("{} values do not fill shape ({rows}, {cols})", data.len())));
    }
    let mut dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    // Preamble is 10 bytes; pad with spaces so the data starts on an aligned offset.
    let total = 10 + dict.len() + 1;
    let pad = (ALIGN - total % ALIGN) % ALIGN;
    dict.push_str(&" ".repeat(pad));
    dict.push('\n');
    let header_len = u16::try_from(dict.len()).map_err(|_| Error::invalid("NPY header too long"))?;
    let mut out = Vec::with_capacity(10 + dict.len() + 4 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}':");
    let at = dict
        .find(&pat)
        .ok_or_else(|| Error::format(format!("NPY header lacks {key:?}")))?;
    Ok(dict[at + pat.len()..].trim_start())
}

/// Decodes a 2-D `<f4` C-order array (format versions 1.0 to 3.0).
pub fn decode_f32_2d(bytes: &[u8]) -> Result<Array2> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::format("not an NPY file"));
    }
    let (header_len, start): (usize, usize) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::format("NPY preamble is truncated"));
            }
            (u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize, 12)
        }
        v => return Err(Error::format(format!("unsupported NPY version {v}"))),
    };
    let end = start
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format("NPY header is truncated"))?;
    let dict = std::str::from_utf8(&bytes[start..end]).map_err(|_| Error::format("NPY header is not text"))?;

    let descr = dict_value(dict, "descr")?;
    if !(descr.starts_with("'<f4'") || descr.starts_with("\"<f4\"")) {
        return Err(Error::format("NPY dtype is not little-endian float32"));
    }
    if !dict_value(dict, "fortran_order")?.starts_with("False") {
        return Err(Error::format("Fortran-ordered NPY arrays are not supported"));
    }
    let shape = dict_value(dict, "shape")?;
    let close = shape.find(')').ok_or_else(|| Error::format("NPY shape is malformed"))?;
    let dims: Vec<usize> = shape[..close]
        .trim_start_matches('(')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::format(format!("bad NPY dimension {s:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::format(format!("expected a 2-D array, found {} dimensions", dims.len())));
    };
    let n = rows.checked_mul(cols).ok_or_else(|| Error::format("NPY shape overflows"))?;
    let body = &bytes[end..];
    if n.checked_mul(4) != Some(body.len()) {
        return Err(Error::format(format!("NPY body has {} bytes for shape ({rows}, {cols})", body.len())));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(Array2 { rows, cols, data })
}

pub fn write_f32_2d(path: impl AsRef<Path>, rows: usize, cols: usize, data: &[f32]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_f32_2d(rows, cols, data)?).map_err(|e| Error::io(path, e))
}

pub fn read_f32_2d(path: impl AsRef<Path>) -> Result<Array2> {
    let path = path.as_ref();
    decode_f32_2d(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
