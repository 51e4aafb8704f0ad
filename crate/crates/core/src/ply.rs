//! Binary little-endian PLY in the layout common splat viewers read.
//!
//! Per vertex: `x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3`,
//! all `float`. Normals are written as zeros. `f_rest` is channel-major: all
//! red higher-order coefficients first, then green, then blue.

use std::io::Write;
use std::path::Path;

use nalgebra::{Vector3, Vector4};

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianFrame};
use crate::sh;

/// Property names in file order for the given SH degree.
pub fn property_names(sh_degree: usize) -> Vec<String> {
    let rest = 3 * (sh::coeff_count(sh_degree) - 1);
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

fn vertex_values(g: &Gaussian) -> Vec<f32> {
    let n = g.sh.len();
    let mut v = Vec::with_capacity(14 + 3 * n);
    v.extend(g.mean.iter().map(|&x| x as f32));
    v.extend([0.0f32; 3]);
    v.extend(g.sh[0].iter().map(|&x| x as f32));
    for c in 0..3 {
        v.extend(g.sh[1..].iter().map(|b| b[c] as f32));
    }
    v.push(g.opacity_logit as f32);
    v.extend(g.log_scale.iter().map(|&x| x as f32));
    v.extend(g.rotation.iter().map(|&x| x as f32));
    v
}

pub fn encode_ply(frame: &GaussianFrame) -> Vec<u8> {
    let names = property_names(frame.sh_degree);
    let mut out = Vec::new();
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", frame.len()).as_bytes());
    for n in &names {
        out.extend_from_slice(format!("property float {n}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");
    out.reserve(frame.len() * names.len() * 4);
    for g in &frame.gaussians {
        for v in vertex_values(g) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_ply_file(frame: &GaussianFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_ply(frame)).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

/// Decodes a splat PLY. Unknown vertex properties are skipped; the SH degree
/// is inferred from the number of `f_rest_*` properties.
pub fn decode_ply(bytes: &[u8]) -> Result<GaussianFrame> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::format("PLY header has no end_header line"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::format("PLY header is not UTF-8"))?;
    let body = &bytes[end + END.len()..];

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::format("missing PLY magic"));
    }
    let mut count: Option<usize> = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex = false;
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::format(format!("unsupported PLY format {fmt}")));
                }
            }
            ["element", name, n] => {
                if count.is_some() {
                    return Err(Error::format("PLY has more than one element"));
                }
                if *name != "vertex" {
                    return Err(Error::format(format!("unexpected PLY element {name}")));
                }
                count = Some(n.parse().map_err(|_| Error::format(format!("bad vertex count {n}")))?);
                in_vertex = true;
            }
            ["property", "list", ..] => return Err(Error::format("list properties are not supported")),
            ["property", ty, name] => {
                if !in_vertex {
                    return Err(Error::format("property before element"));
                }
                let ty = Scalar::parse(ty).ok_or_else(|| Error::format(format!("unknown PLY type {ty}")))?;
                props.push((name.to_string(), ty));
            }
            _ => return Err(Error::format(format!("unrecognized PLY header line {line:?}"))),
        }
    }
    let count = count.ok_or_else(|| Error::format("PLY has no vertex element"))?;
    let stride: usize = props.iter().map(|(_, t)| t.size()).sum();
    if stride == 0 {
        return Err(Error::format("PLY vertex has no properties"));
    }
    let need = count
        .checked_mul(stride)
        .ok_or_else(|| Error::format("PLY vertex data size overflows"))?;
    if body.len() < need {
        return Err(Error::format(format!("PLY body has {} bytes, needs {need}", body.len())));
    }

    let mut offsets = std::collections::HashMap::new();
    let mut at = 0;
    for (name, ty) in &props {
        offsets.insert(name.as_str(), (at, *ty));
        at += ty.size();
    }
    let rest = (0..).take_while(|i| offsets.contains_key(format!("f_rest_{i}").as_str())).count();
    if rest % 3 != 0 {
        return Err(Error::format(format!("{rest} f_rest properties is not a multiple of 3")));
    }
    let n = rest / 3 + 1;
    let degree = sh::degree_for_count(n).ok_or_else(|| Error::format(format!("{rest} f_rest properties match no SH degree")))?;
    let lookup = |name: String| {
        offsets
            .get(name.as_str())
            .copied()
            .ok_or_else(|| Error::format(format!("PLY lacks property {name}")))
    };
    let field = |names: &[&str]| -> Vec<String> { names.iter().map(|s| s.to_string()).collect() };
    let mut cols = Vec::new();
    for name in field(&["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]) {
        cols.push(lookup(name)?);
    }
    for i in 0..rest {
        cols.push(lookup(format!("f_rest_{i}"))?);
    }

    let mut gaussians = Vec::with_capacity(count.min(1 << 24));
    for v in 0..count {
        let rec = &body[v * stride..(v + 1) * stride];
        let val = |c: usize| {
            let (o, t) = cols[c];
            t.read(&rec[o..])
        };
        let mut g = Gaussian::zeros(degree);
        g.mean = Vector3::new(val(0), val(1), val(2));
        g.sh[0] = Vector3::new(val(3), val(4), val(5));
        g.opacity_logit = val(6);
        g.log_scale = Vector3::new(val(7), val(8), val(9));
        g.rotation = Vector4::new(val(10), val(11), val(12), val(13));
        for m in 1..n {
            g.sh[m] = Vector3::from_fn(|c, _| val(14 + c * (n - 1) + (m - 1)));
        }
        gaussians.push(g);
    }
    GaussianFrame::new(0, degree, gaussians)
}

pub fn read_ply_file(path: impl AsRef<Path>) -> Result<GaussianFrame> {
    let path = path.as_ref();
    decode_ply(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
