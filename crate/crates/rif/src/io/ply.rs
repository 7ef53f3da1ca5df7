//! PLY reading (ascii 1.0 and binary_little_endian 1.0) and writing.
//!
//! Only the `vertex` element's x/y/z properties are consumed; other elements
//! and properties are skipped, never an error. Our writers emit `double`
//! precision so the ascii and binary encodings of a cloud parse to identical
//! f64 coordinates.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

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
    fn parse(tok: &str) -> Option<Scalar> {
        Some(match tok {
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

    fn read_le_f64(self, bytes: &[u8]) -> f64 {
        match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { ty: Scalar, name: String },
    List { count_ty: Scalar, item_ty: Scalar },
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLE,
}

struct Header {
    format: Format,
    elements: Vec<ElementDecl>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    // the header is ASCII text terminated by an end_header line
    let mut pos = 0usize;
    let mut first = true;
    let mut format = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    loop {
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Truncated("header (no end_header)".into()))?;
        let raw = &bytes[pos..pos + line_end];
        pos += line_end + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::Parse { line: 0, msg: "header is not ASCII".into() })?
            .trim_end_matches('\r')
            .trim();
        if first {
            if line != "ply" {
                return Err(Error::BadMagic);
            }
            first = false;
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                let kind = toks.next().unwrap_or("");
                let version = toks.next().unwrap_or("");
                if version != "1.0" {
                    return Err(Error::UnsupportedFormat(format!("ply version {version:?}")));
                }
                format = Some(match kind {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLE,
                    other => return Err(Error::UnsupportedFormat(format!("ply format {other:?}"))),
                });
            }
            Some("element") => {
                let name = toks.next().unwrap_or("").to_string();
                let count: usize = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or(Error::Parse { line: 0, msg: "bad element count".into() })?;
                elements.push(ElementDecl { name, count, properties: Vec::new() });
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or(Error::Parse { line: 0, msg: "property before element".into() })?;
                let first_tok = toks.next().unwrap_or("");
                if first_tok == "list" {
                    let count_ty = Scalar::parse(toks.next().unwrap_or(""))
                        .ok_or(Error::Parse { line: 0, msg: "bad list count type".into() })?;
                    let item_ty = Scalar::parse(toks.next().unwrap_or(""))
                        .ok_or(Error::Parse { line: 0, msg: "bad list item type".into() })?;
                    elem.properties.push(Property::List { count_ty, item_ty });
                } else {
                    let ty = Scalar::parse(first_tok).ok_or(Error::Parse {
                        line: 0,
                        msg: format!("unknown property type {first_tok:?}"),
                    })?;
                    let name = toks.next().unwrap_or("").to_string();
                    elem.properties.push(Property::Scalar { ty, name });
                }
            }
            Some("end_header") => {
                let format =
                    format.ok_or(Error::Parse { line: 0, msg: "missing format line".into() })?;
                return Ok(Header { format, elements, body_offset: pos });
            }
            Some(other) => {
                return Err(Error::Parse { line: 0, msg: format!("unknown header line {other:?}") })
            }
        }
    }
}

/// Indices of the x, y, z scalar properties within the vertex element.
fn xyz_columns(elem: &ElementDecl) -> Result<[usize; 3]> {
    let mut idx = [usize::MAX; 3];
    for (i, p) in elem.properties.iter().enumerate() {
        if let Property::Scalar { ty, name } = p {
            let slot = match name.as_str() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => continue,
            };
            if !matches!(ty, Scalar::F32 | Scalar::F64) {
                return Err(Error::UnsupportedFormat(format!(
                    "vertex {name} property must be float or double"
                )));
            }
            idx[slot] = i;
        }
    }
    if idx.contains(&usize::MAX) {
        return Err(Error::Parse { line: 0, msg: "vertex element lacks x/y/z properties".into() });
    }
    Ok(idx)
}

pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or(Error::Parse { line: 0, msg: "no vertex element".into() })?;
    let cols = xyz_columns(vertex)?;
    let body = &bytes[header.body_offset..];
    match header.format {
        Format::Ascii => parse_ascii_body(body, &header.elements, vertex.name.as_str(), cols),
        Format::BinaryLE => parse_binary_body(body, &header.elements, vertex.name.as_str(), cols),
    }
}

fn parse_ascii_body(
    body: &[u8],
    elements: &[ElementDecl],
    vertex_name: &str,
    cols: [usize; 3],
) -> Result<PointCloud> {
    let text = std::str::from_utf8(body)
        .map_err(|_| Error::Parse { line: 0, msg: "ascii body is not UTF-8".into() })?;
    let mut toks = text.split_whitespace();
    let mut next_tok = |what: &str| -> Result<&str> {
        toks.next().ok_or_else(|| Error::Truncated(what.to_string()))
    };
    let mut points = Vec::new();
    for elem in elements {
        let is_vertex = elem.name == vertex_name;
        for _ in 0..elem.count {
            let mut coords = [0.0f64; 3];
            for (pi, prop) in elem.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { .. } => {
                        let tok = next_tok("ascii body value")?;
                        if is_vertex {
                            if let Some(slot) = cols.iter().position(|&c| c == pi) {
                                coords[slot] = tok.parse::<f64>().map_err(|_| Error::Parse {
                                    line: 0,
                                    msg: format!("bad vertex value {tok:?}"),
                                })?;
                            }
                        }
                    }
                    Property::List { .. } => {
                        let n: usize = next_tok("ascii list count")?
                            .parse()
                            .map_err(|_| Error::Parse { line: 0, msg: "bad list count".into() })?;
                        for _ in 0..n {
                            next_tok("ascii list item")?;
                        }
                    }
                }
            }
            if is_vertex {
                let p = Point3::new(coords[0], coords[1], coords[2]);
                if !p.is_finite() {
                    return Err(Error::Parse { line: 0, msg: "non-finite vertex".into() });
                }
                points.push(p);
            }
        }
        if is_vertex {
            break; // later elements cannot affect the cloud
        }
    }
    Ok(PointCloud::new(points))
}

fn parse_binary_body(
    body: &[u8],
    elements: &[ElementDecl],
    vertex_name: &str,
    cols: [usize; 3],
) -> Result<PointCloud> {
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if pos + n > body.len() {
            return Err(Error::Truncated(what.to_string()));
        }
        let s = &body[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let mut points = Vec::new();
    for elem in elements {
        let is_vertex = elem.name == vertex_name;
        for _ in 0..elem.count {
            let mut coords = [0.0f64; 3];
            for (pi, prop) in elem.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let raw = take(ty.size(), "binary body value")?;
                        if is_vertex {
                            if let Some(slot) = cols.iter().position(|&c| c == pi) {
                                coords[slot] = ty.read_le_f64(raw);
                            }
                        }
                    }
                    Property::List { count_ty, item_ty } => {
                        let raw = take(count_ty.size(), "binary list count")?;
                        let n = count_ty.read_le_f64(raw) as usize;
                        take(n * item_ty.size(), "binary list items")?;
                    }
                }
            }
            if is_vertex {
                let p = Point3::new(coords[0], coords[1], coords[2]);
                if !p.is_finite() {
                    return Err(Error::Parse { line: 0, msg: "non-finite vertex".into() });
                }
                points.push(p);
            }
        }
        if is_vertex {
            break;
        }
    }
    Ok(PointCloud::new(points))
}

fn ascii_header(n: usize, format: &str) -> String {
    format!(
        "ply\nformat {format} 1.0\nelement vertex {n}\n\
         property double x\nproperty double y\nproperty double z\nend_header\n"
    )
}

pub fn write_ply_ascii(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = ascii_header(cloud.len(), "ascii");
    for p in cloud.points() {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_ply_binary(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = ascii_header(cloud.len(), "binary_little_endian").into_bytes();
    for p in cloud.points() {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ascii_single_vertex() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\n\
                    end_header\n0.5 -1.25 3\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.points()[0], Point3::new(0.5, -1.25, 3.0));
    }

    // Bytes assembled by hand: 2 float32 vertices (1,2,3) and (-1, 0.5, 8).
    #[test]
    fn binary_little_endian_hand_built() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
              property float x\nproperty float y\nproperty float z\nend_header\n",
        );
        for v in [1.0f32, 2.0, 3.0, -1.0, 0.5, 8.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let c = parse_ply(&bytes).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.points()[0], Point3::new(1.0, 2.0, 3.0));
        assert_eq!(c.points()[1], Point3::new(-1.0, 0.5, 8.0));
    }

    #[test]
    fn big_endian_is_unsupported() {
        let text = "ply\nformat binary_big_endian 1.0\nelement vertex 0\n\
                    property float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn missing_magic_is_bad_magic() {
        assert!(matches!(parse_ply(b"plX\nformat ascii 1.0\nend_header\n"), Err(Error::BadMagic)));
    }

    #[test]
    fn truncated_binary_body_errors() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
              property float x\nproperty float y\nproperty float z\nend_header\n",
        );
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        assert!(matches!(parse_ply(&bytes), Err(Error::Truncated(_))));
    }

    #[test]
    fn skips_extra_properties_and_elements() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\n\
                    element face 1\nproperty list uchar int vertex_indices\n\
                    element vertex 2\n\
                    property float nx\nproperty float x\nproperty float y\n\
                    property float z\nproperty uchar red\n\
                    end_header\n\
                    3 0 1 2\n\
                    9 1 2 3 255\n9 4 5 6 0\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.points()[0], Point3::new(1.0, 2.0, 3.0));
        assert_eq!(c.points()[1], Point3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn ascii_and_binary_writers_parse_identically() {
        let c: PointCloud = [(0.1, -0.2, 0.3), (1e-7, 2e9, -3.5), (0.0, 0.25, -0.125)]
            .iter()
            .map(|&(x, y, z)| Point3::new(x, y, z))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.ply");
        let pb = dir.path().join("b.ply");
        write_ply_ascii(&c, &pa).unwrap();
        write_ply_binary(&c, &pb).unwrap();
        let ca = parse_ply(&fs::read(&pa).unwrap()).unwrap();
        let cb = parse_ply(&fs::read(&pb).unwrap()).unwrap();
        assert_eq!(ca.points(), cb.points());
        assert_eq!(ca.points(), c.points());
    }

    #[test]
    fn truncated_ascii_body_errors() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\n\
                    property float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n4 5\n";
        assert!(matches!(parse_ply(text.as_bytes()), Err(Error::Truncated(_))));
    }
}
