//! Binary little-endian PLY point clouds, vertex element only.
//!
//! Written files use float64 coordinates so that clouds round-trip exactly.
//! The reader also accepts float32 properties and skips properties it does
//! not know, which covers clouds produced by common tooling.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::ReadError;
use crate::geometry::Frame;
use crate::sweep::{Sweep, TimedPoint};

/// Writes points (and per-point normals when given) as binary LE PLY.
pub fn write_ply(
    path: &Path,
    points: &[Vector3<f64>],
    normals: Option<&[Vector3<f64>]>,
) -> std::io::Result<()> {
    if let Some(normals) = normals {
        assert_eq!(points.len(), normals.len(), "normals must match points");
    }
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", points.len()));
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    header.push_str("end_header\n");

    let record = if normals.is_some() { 48 } else { 24 };
    let mut body = Vec::with_capacity(points.len() * record);
    for (i, p) in points.iter().enumerate() {
        body.extend_from_slice(&p.x.to_le_bytes());
        body.extend_from_slice(&p.y.to_le_bytes());
        body.extend_from_slice(&p.z.to_le_bytes());
        if let Some(normals) = normals {
            let n = normals[i];
            body.extend_from_slice(&n.x.to_le_bytes());
            body.extend_from_slice(&n.y.to_le_bytes());
            body.extend_from_slice(&n.z.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(header.as_bytes())?;
    file.write_all(&body)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    F32,
    F64,
    Other(usize),
}

impl Scalar {
    fn size(self) -> usize {
        match self {
            Scalar::F32 => 4,
            Scalar::F64 => 8,
            Scalar::Other(n) => n,
        }
    }
}

fn scalar_type(name: &str) -> Option<Scalar> {
    Some(match name {
        "float" | "float32" => Scalar::F32,
        "double" | "float64" => Scalar::F64,
        "char" | "int8" | "uchar" | "uint8" => Scalar::Other(1),
        "short" | "int16" | "ushort" | "uint16" => Scalar::Other(2),
        "int" | "int32" | "uint" | "uint32" => Scalar::Other(4),
        _ => return None,
    })
}

/// Parsed cloud: positions plus normals when the file carries them.
pub struct PlyCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

/// Reads a binary little-endian PLY vertex cloud.
pub fn read_ply(path: &Path) -> Result<PlyCloud, ReadError> {
    let bytes = fs::read(path).map_err(|e| ReadError::io(path, e))?;

    // Locate the end of the ASCII header.
    let marker = b"end_header\n";
    let header_end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| ReadError::malformed(path, "missing end_header"))?
        + marker.len();
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| ReadError::malformed(path, "header is not UTF-8"))?;

    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex_element = false;
    let mut format_seen = false;
    for line in header.lines() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["ply"] | ["comment", ..] | ["end_header"] => {}
            ["format", kind, _version] => {
                if *kind != "binary_little_endian" {
                    return Err(ReadError::malformed(
                        path,
                        format!("unsupported format {kind}"),
                    ));
                }
                format_seen = true;
            }
            ["element", "vertex", count] => {
                vertex_count = Some(
                    count
                        .parse()
                        .map_err(|_| ReadError::malformed(path, "bad vertex count"))?,
                );
                in_vertex_element = true;
            }
            ["element", ..] => in_vertex_element = false,
            ["property", kind, name] if in_vertex_element => {
                let scalar = scalar_type(kind)
                    .ok_or_else(|| ReadError::malformed(path, format!("property type {kind}")))?;
                properties.push((name.to_string(), scalar));
            }
            ["property", ..] => {}
            _ => return Err(ReadError::malformed(path, format!("header line `{line}`"))),
        }
    }
    if !format_seen {
        return Err(ReadError::malformed(path, "missing format line"));
    }
    let vertex_count = vertex_count.ok_or_else(|| ReadError::malformed(path, "no vertex element"))?;

    let offset_of = |name: &str| -> Option<(usize, Scalar)> {
        let mut offset = 0;
        for (prop, scalar) in &properties {
            if prop == name {
                return Some((offset, *scalar));
            }
            offset += scalar.size();
        }
        None
    };
    let record: usize = properties.iter().map(|(_, s)| s.size()).sum();
    let xyz = ["x", "y", "z"].map(|n| offset_of(n));
    let nxyz = ["nx", "ny", "nz"].map(|n| offset_of(n));
    if xyz.iter().any(|o| o.is_none()) {
        return Err(ReadError::malformed(path, "missing x/y/z properties"));
    }
    let has_normals = nxyz.iter().all(|o| o.is_some());

    let body = &bytes[header_end..];
    if body.len() != record * vertex_count {
        return Err(ReadError::malformed(
            path,
            format!(
                "body is {} bytes, expected {} ({} vertices × {} bytes)",
                body.len(),
                record * vertex_count,
                vertex_count,
                record
            ),
        ));
    }

    let get = |row: &[u8], slot: (usize, Scalar)| -> f64 {
        let (offset, scalar) = slot;
        match scalar {
            Scalar::F32 => f32::from_le_bytes(row[offset..offset + 4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(row[offset..offset + 8].try_into().unwrap()),
            Scalar::Other(_) => 0.0,
        }
    };

    let mut points = Vec::with_capacity(vertex_count);
    let mut normals = if has_normals {
        Some(Vec::with_capacity(vertex_count))
    } else {
        None
    };
    for row in body.chunks_exact(record.max(1)).take(vertex_count) {
        let p = Vector3::new(
            get(row, xyz[0].unwrap()),
            get(row, xyz[1].unwrap()),
            get(row, xyz[2].unwrap()),
        );
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(ReadError::malformed(path, "non-finite coordinate"));
        }
        points.push(p);
        if let Some(normals) = normals.as_mut() {
            normals.push(Vector3::new(
                get(row, nxyz[0].unwrap()),
                get(row, nxyz[1].unwrap()),
                get(row, nxyz[2].unwrap()),
            ));
        }
    }
    Ok(PlyCloud { points, normals })
}

/// Reads a PLY file as a raw (not motion-compensated) sweep.
pub fn read_ply_sweep(path: &Path, index: usize) -> Result<Sweep, ReadError> {
    let cloud = read_ply(path)?;
    let points: Vec<TimedPoint> = cloud
        .points
        .into_iter()
        .filter(|p| p.norm_squared() > 0.0)
        .map(|position| TimedPoint {
            position,
            time_fraction: 0.0,
            intensity: None,
        })
        .collect();
    if points.is_empty() {
        return Err(ReadError::EmptySweep {
            path: path.to_path_buf(),
        });
    }
    let mut sweep = Sweep {
        index,
        points,
        frame: Frame::Sensor,
        pre_deskewed: false,
    };
    sweep.synthesize_time_fractions();
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    #[test]
    fn empty_cloud_is_a_valid_ply() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.ply");
        write_ply(&path, &[], None).unwrap();
        let cloud = read_ply(&path).unwrap();
        assert!(cloud.points.is_empty());
        assert!(cloud.normals.is_none());
    }

    #[test]
    fn header_declares_vertex_count() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.ply");
        write_ply(&path, &[Vector3::zeros()], None).unwrap();
        let bytes = fs::read(&path).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("element vertex 1"));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rt.ply");
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points: Vec<Vector3<f64>> = (0..10_000)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                )
            })
            .collect();
        let normals: Vec<Vector3<f64>> = (0..10_000)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .normalize()
            })
            .collect();
        write_ply(&path, &points, Some(&normals)).unwrap();
        let cloud = read_ply(&path).unwrap();
        assert_eq!(cloud.points, points);
        assert_eq!(cloud.normals.unwrap(), normals);
    }

    #[test]
    fn rejects_ascii_ply() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ascii.ply");
        fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        )
        .unwrap();
        assert!(matches!(
            read_ply(&path),
            Err(ReadError::MalformedFile { .. })
        ));
    }

    #[test]
    fn reads_float32_clouds_with_extra_properties() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f32.ply");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
              property float x\nproperty float y\nproperty float z\nproperty float intensity\n\
              end_header\n",
        );
        for v in [1.0f32, 2.0, 3.0, 0.9, -1.0, -2.0, -3.0, 0.1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        let cloud = read_ply(&path).unwrap();
        assert_eq!(cloud.points.len(), 2);
        assert_eq!(cloud.points[0], Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(cloud.points[1], Vector3::new(-1.0, -2.0, -3.0));
        assert!(cloud.normals.is_none());
    }
}
