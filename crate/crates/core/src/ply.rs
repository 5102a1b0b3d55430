//! Reader and writer for the binary little-endian PLY layout written by
//! 3DGS trainers (`x y z [nx ny nz] f_dc_* f_rest_* opacity scale_* rot_*`).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::scene::{sh_basis_count, sh_degree_from_basis, Gaussian3D, GaussianCloud};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed PLY header: {0}")]
    Header(String),
    #[error("missing vertex attribute `{0}`")]
    MissingAttribute(String),
    #[error("inconsistent f_rest count {0}: expected 0, 9, 24 or 45 ({1})")]
    InconsistentRest(usize, String),
    #[error("vertex data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("empty output path")]
    EmptyPath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f32 {
        match self {
            Self::I8 => b[0] as i8 as f32,
            Self::U8 => b[0] as f32,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f32,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f32,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()) as f32,
        }
    }
}

struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

struct VertexLayout {
    count: usize,
    stride: usize,
    properties: Vec<Property>,
}

impl VertexLayout {
    fn find(&self, name: &str) -> Result<&Property, PlyError> {
        self.properties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| PlyError::MissingAttribute(name.to_string()))
    }
}

fn parse_header(text: &str) -> Result<VertexLayout, PlyError> {
    let mut lines = text.lines().map(str::trim_end);
    if lines.next() != Some("ply") {
        return Err(PlyError::Header("missing `ply` magic".into()));
    }
    let mut format_seen = false;
    let mut layout: Option<VertexLayout> = None;
    let mut in_vertex = false;
    for line in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                if *fmt != "binary_little_endian" {
                    return Err(PlyError::Header(format!("unsupported format `{fmt}`")));
                }
                format_seen = true;
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| PlyError::Header(format!("bad element count `{count}`")))?;
                if *name == "vertex" {
                    if layout.is_some() {
                        return Err(PlyError::Header("duplicate vertex element".into()));
                    }
                    layout = Some(VertexLayout { count, stride: 0, properties: Vec::new() });
                    in_vertex = true;
                } else if layout.is_none() {
                    return Err(PlyError::Header(format!("element `{name}` precedes vertex")));
                } else {
                    in_vertex = false;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(PlyError::Header("list properties are not supported on vertices".into()));
                }
            }
            ["property", ty, name] => {
                if in_vertex {
                    let ty = ScalarType::parse(ty)
                        .ok_or_else(|| PlyError::Header(format!("unknown property type `{ty}`")))?;
                    let l = layout.as_mut().expect("in vertex element");
                    l.properties.push(Property { name: name.to_string(), ty, offset: l.stride });
                    l.stride += ty.size();
                }
            }
            _ => return Err(PlyError::Header(format!("unexpected line `{line}`"))),
        }
    }
    if !format_seen {
        return Err(PlyError::Header("missing format line".into()));
    }
    layout.ok_or_else(|| PlyError::Header("no vertex element".into()))
}

/// Parses a 3DGS PLY from memory.
pub fn parse_ply(bytes: &[u8]) -> Result<GaussianCloud, PlyError> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| PlyError::Header("missing end_header".into()))?;
    let mut body_start = end + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) != Some(&b'\n') {
        return Err(PlyError::Header("end_header not terminated by newline".into()));
    }
    body_start += 1;
    let header = std::str::from_utf8(&bytes[..end])
        .map_err(|_| PlyError::Header("header is not UTF-8".into()))?;
    let layout = parse_header(header)?;

    let rest_count = layout.properties.iter().filter(|p| p.name.starts_with("f_rest_")).count();
    let degree = rest_count
        .checked_rem(3)
        .filter(|&r| r == 0)
        .and_then(|_| sh_degree_from_basis(rest_count / 3 + 1))
        .ok_or_else(|| PlyError::InconsistentRest(rest_count, "not 3·(B−1) for B in {1,4,9,16}".into()))?;
    let basis = sh_basis_count(degree);

    let lookup = |name: &str| layout.find(name).map(|p| (p.ty, p.offset));
    let xyz = [lookup("x")?, lookup("y")?, lookup("z")?];
    let dc = [lookup("f_dc_0")?, lookup("f_dc_1")?, lookup("f_dc_2")?];
    let mut rest = Vec::with_capacity(rest_count);
    for i in 0..rest_count {
        let name = format!("f_rest_{i}");
        rest.push(
            lookup(&name).map_err(|_| PlyError::InconsistentRest(rest_count, format!("`{name}` is missing")))?,
        );
    }
    let opacity = lookup("opacity")?;
    let scale = [lookup("scale_0")?, lookup("scale_1")?, lookup("scale_2")?];
    let rot = [lookup("rot_0")?, lookup("rot_1")?, lookup("rot_2")?, lookup("rot_3")?];

    let expected = layout.count * layout.stride;
    let body = &bytes[body_start..];
    if body.len() < expected {
        return Err(PlyError::Truncated { expected, found: body.len() });
    }

    let per_channel = basis - 1;
    let gaussians = body[..expected]
        .chunks_exact(layout.stride.max(1))
        .take(layout.count)
        .map(|v| {
            let get = |(ty, off): (ScalarType, usize)| ty.read(&v[off..]);
            let mut g = Gaussian3D {
                mean: xyz.map(get),
                log_scale: scale.map(get),
                rotation: rot.map(get),
                opacity_logit: get(opacity),
                ..Default::default()
            };
            g.sh[0] = dc.map(get);
            for c in 0..3 {
                for k in 1..basis {
                    g.sh[k][c] = get(rest[c * per_channel + k - 1]);
                }
            }
            g
        })
        .collect();
    Ok(GaussianCloud::from_gaussians(gaussians, degree).expect("degree from basis table"))
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianCloud, PlyError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_ply(&bytes)
}

/// Serializes a cloud in the standard attribute order (normals written as zero).
pub fn write_ply<W: Write>(cloud: &GaussianCloud, mut out: W) -> std::io::Result<()> {
    let basis = cloud.sh_basis();
    let per_channel = basis - 1;
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3 * per_channel).map(|i| format!("f_rest_{i}")));
    names.extend(
        ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
            .iter()
            .map(|s| s.to_string()),
    );
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes())?;

    let mut record = Vec::with_capacity(names.len() * 4);
    for g in &cloud.gaussians {
        record.clear();
        let mut put = |v: f32| record.extend_from_slice(&v.to_le_bytes());
        g.mean.iter().for_each(|&v| put(v));
        (0..3).for_each(|_| put(0.0));
        g.sh[0].iter().for_each(|&v| put(v));
        for c in 0..3 {
            for k in 1..basis {
                put(g.sh[k][c]);
            }
        }
        put(g.opacity_logit);
        g.log_scale.iter().for_each(|&v| put(v));
        g.rotation.iter().for_each(|&v| put(v));
        out.write_all(&record)?;
    }
    out.flush()
}

pub fn save_ply(cloud: &GaussianCloud, path: impl AsRef<Path>) -> Result<(), PlyError> {
    let path = path.as_ref();
    if path.as_os_str().is_empty() {
        return Err(PlyError::EmptyPath);
    }
    write_ply(cloud, BufWriter::new(File::create(path)?))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(props: &[&str], count: usize) -> Vec<u8> {
        let mut h = format!("ply\nformat binary_little_endian 1.0\nelement vertex {count}\n");
        for p in props {
            h.push_str(&format!("property float {p}\n"));
        }
        h.push_str("end_header\n");
        h.into_bytes()
    }

    const BASE: [&str; 14] = [
        "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
        "rot_1", "rot_2", "rot_3",
    ];

    #[test]
    fn minimal_vertex_is_degree_zero() {
        let mut bytes = header(&BASE, 1);
        for i in 0..BASE.len() {
            bytes.extend_from_slice(&(i as f32).to_le_bytes());
        }
        let cloud = parse_ply(&bytes).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.sh_degree(), 0);
        let g = &cloud.gaussians[0];
        assert_eq!(g.mean, [0.0, 1.0, 2.0]);
        assert_eq!(g.sh[0], [3.0, 4.0, 5.0]);
        assert_eq!(g.opacity_logit, 6.0);
        assert_eq!(g.opacity(), crate::scene::sigmoid(6.0));
        assert_eq!(g.log_scale, [7.0, 8.0, 9.0]);
        assert_eq!(g.rotation, [10.0, 11.0, 12.0, 13.0]);
    }

    #[test]
    fn forty_five_rest_fields_is_degree_three() {
        let rest: Vec<String> = (0..45).map(|i| format!("f_rest_{i}")).collect();
        let mut props: Vec<&str> = BASE.to_vec();
        props.extend(rest.iter().map(String::as_str));
        let mut bytes = header(&props, 2);
        bytes.resize(bytes.len() + 2 * props.len() * 4, 0);
        assert_eq!(parse_ply(&bytes).unwrap().sh_degree(), 3);
    }

    #[test]
    fn errors_name_the_field() {
        let props: Vec<&str> = BASE.iter().copied().filter(|p| *p != "scale_1").collect();
        let bytes = header(&props, 0);
        match parse_ply(&bytes) {
            Err(PlyError::MissingAttribute(name)) => assert_eq!(name, "scale_1"),
            other => panic!("unexpected {other:?}"),
        }

        let mut props: Vec<&str> = BASE.to_vec();
        props.extend(["f_rest_0", "f_rest_1"]);
        assert!(matches!(parse_ply(&header(&props, 0)), Err(PlyError::InconsistentRest(2, _))));

        assert!(matches!(parse_ply(b"ply\nformat ascii 1.0\nend_header\n"), Err(PlyError::Header(_))));
        assert!(matches!(parse_ply(b"not a ply"), Err(PlyError::Header(_))));

        let bytes = header(&BASE, 3);
        assert!(matches!(parse_ply(&bytes), Err(PlyError::Truncated { .. })));
    }

    #[test]
    fn empty_path_is_rejected() {
        let cloud = GaussianCloud::new(0).unwrap();
        assert!(matches!(save_ply(&cloud, ""), Err(PlyError::EmptyPath)));
    }

    #[test]
    fn reads_double_and_extra_properties() {
        let mut h = String::from("ply\nformat binary_little_endian 1.0\ncomment made by hand\nelement vertex 1\n");
        h.push_str("property double x\nproperty uchar red\n");
        for p in &BASE[1..] {
            h.push_str(&format!("property float {p}\n"));
        }
        h.push_str("end_header\n");
        let mut bytes = h.into_bytes();
        bytes.extend_from_slice(&2.5f64.to_le_bytes());
        bytes.push(200);
        for _ in 1..BASE.len() {
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        let cloud = parse_ply(&bytes).unwrap();
        assert_eq!(cloud.gaussians[0].mean, [2.5, 1.0, 1.0]);
    }
}
