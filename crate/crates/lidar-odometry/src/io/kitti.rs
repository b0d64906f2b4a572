//! KITTI odometry formats: packed float32 `.bin` sweeps and 12-value pose rows.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::{format_sig9, ReadError};
use crate::geometry::{Frame, RigidTransform};
use crate::sweep::{Sweep, TimedPoint};

/// Reads a KITTI velodyne sweep: consecutive little-endian float32
/// (x, y, z, reflectance) records.
///
/// KITTI distributes motion-compensated scans, so the sweep is flagged
/// pre-de-skewed; per-point time fractions are still synthesized from azimuth
/// for consumers that want them. Zero-range returns are dropped.
pub fn read_kitti_sweep(path: &Path, index: usize) -> Result<Sweep, ReadError> {
    let bytes = fs::read(path).map_err(|e| ReadError::io(path, e))?;
    if bytes.len() % 16 != 0 {
        return Err(ReadError::malformed(
            path,
            format!("size {} is not a multiple of 16", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    for record in bytes.chunks_exact(16) {
        let x = f32::from_le_bytes(record[0..4].try_into().unwrap());
        let y = f32::from_le_bytes(record[4..8].try_into().unwrap());
        let z = f32::from_le_bytes(record[8..12].try_into().unwrap());
        let reflectance = f32::from_le_bytes(record[12..16].try_into().unwrap());
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(ReadError::malformed(path, "non-finite coordinate"));
        }
        if x == 0.0 && y == 0.0 && z == 0.0 {
            continue; // invalid zero-range return
        }
        points.push(TimedPoint {
            position: Vector3::new(x as f64, y as f64, z as f64),
            time_fraction: 0.0,
            intensity: Some(reflectance),
        });
    }
    if points.is_empty() {
        return Err(ReadError::EmptySweep {
            path: path.to_path_buf(),
        });
    }
    let mut sweep = Sweep {
        index,
        points,
        frame: Frame::Sensor,
        pre_deskewed: true,
    };
    sweep.synthesize_time_fractions();
    Ok(sweep)
}

/// Writes a sweep in the KITTI binary layout. Positions are truncated to f32.
pub fn write_kitti_sweep(path: &Path, points: &[(Vector3<f64>, f32)]) -> std::io::Result<()> {
    let mut buffer = Vec::with_capacity(points.len() * 16);
    for (p, intensity) in points {
        buffer.extend_from_slice(&(p.x as f32).to_le_bytes());
        buffer.extend_from_slice(&(p.y as f32).to_le_bytes());
        buffer.extend_from_slice(&(p.z as f32).to_le_bytes());
        buffer.extend_from_slice(&intensity.to_le_bytes());
    }
    fs::write(path, buffer)
}

/// Writes poses in the KITTI odometry format: one line per pose, the 12
/// row-major entries of the 3×4 matrix [R | t].
pub fn write_trajectory(path: &Path, poses: &[RigidTransform]) -> std::io::Result<()> {
    assert!(!poses.is_empty(), "trajectory must contain at least one pose");
    let mut out = String::new();
    for pose in poses {
        let r = pose.rotation();
        let t = pose.translation();
        let row = [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ];
        let fields: Vec<String> = row.iter().map(|v| format_sig9(*v)).collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

/// Reads a KITTI pose file written by [`write_trajectory`] (or the benchmark's
/// own ground-truth files).
pub fn read_trajectory(path: &Path) -> Result<Vec<RigidTransform>, ReadError> {
    let text = fs::read_to_string(path).map_err(|e| ReadError::io(path, e))?;
    let mut poses = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let values: Vec<f64> = trimmed
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| {
                ReadError::malformed(path, format!("line {}: bad number", number + 1))
            })?;
        if values.len() != 12 {
            return Err(ReadError::malformed(
                path,
                format!("line {}: expected 12 values, got {}", number + 1, values.len()),
            ));
        }
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8],
            values[9], values[10],
        );
        let translation = Vector3::new(values[3], values[7], values[11]);
        let pose = RigidTransform::from_parts_projected(rotation, translation).ok_or_else(
            || ReadError::malformed(path, format!("line {}: not a rotation", number + 1)),
        )?;
        poses.push(pose);
    }
    if poses.is_empty() {
        return Err(ReadError::malformed(path, "no poses"));
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use tempfile::tempdir;

    #[test]
    fn reads_a_single_record() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("000000.bin");
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        let sweep = read_kitti_sweep(&path, 0).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep.points[0].position, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(sweep.points[0].intensity, Some(0.5));
        assert!(sweep.pre_deskewed);
    }

    #[test]
    fn empty_file_is_an_empty_sweep() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        fs::write(&path, []).unwrap();
        assert!(matches!(
            read_kitti_sweep(&path, 0),
            Err(ReadError::EmptySweep { .. })
        ));
    }

    #[test]
    fn truncated_and_non_finite_files_are_malformed() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        fs::write(&path, [0u8; 15]).unwrap();
        assert!(matches!(
            read_kitti_sweep(&path, 0),
            Err(ReadError::MalformedFile { .. })
        ));

        let mut bytes = Vec::new();
        for v in [f32::NAN, 2.0, 3.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_kitti_sweep(&path, 0),
            Err(ReadError::MalformedFile { .. })
        ));
    }

    #[test]
    fn sweep_write_read_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rt.bin");
        let points = vec![
            (Vector3::new(1.25, -3.5, 0.125), 0.75f32),
            (Vector3::new(10.0, 0.5, -1.0), 0.0),
            (Vector3::new(-2.0, 7.0, 3.25), 1.0),
        ];
        write_kitti_sweep(&path, &points).unwrap();
        let sweep = read_kitti_sweep(&path, 3).unwrap();
        assert_eq!(sweep.index, 3);
        assert_eq!(sweep.len(), points.len());
        for (got, (p, i)) in sweep.points.iter().zip(&points) {
            assert_eq!(got.position, *p); // values chosen representable in f32
            assert_eq!(got.intensity, Some(*i));
        }
    }

    #[test]
    fn identity_pose_writes_plain_row() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.txt");
        write_trajectory(&path, &[RigidTransform::identity()]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "1 0 0 0 0 1 0 0 0 0 1 0\n");
    }

    #[test]
    fn translation_lands_in_the_last_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.txt");
        let poses = [
            RigidTransform::identity(),
            RigidTransform::from_translation(Vector3::new(0.0, 0.0, 5.0)),
        ];
        write_trajectory(&path, &poses).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let second = text.lines().nth(1).unwrap();
        assert!(second.ends_with("0 0 1 5"));
    }

    #[test]
    fn trajectory_round_trip_within_1e9() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("traj.txt");
        let poses: Vec<RigidTransform> = (0..20)
            .map(|i| {
                let angle = i as f64 * 0.1;
                RigidTransform::from_parts(
                    Rotation3::from_scaled_axis(Vector3::new(angle, -angle / 2.0, angle / 3.0))
                        .into_inner(),
                    Vector3::new(
                        (i as f64 * 0.7).sin(),
                        (i as f64 * 0.3).cos(),
                        i as f64 * 0.01,
                    ),
                )
            })
            .collect();
        write_trajectory(&path, &poses).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back.len(), poses.len());
        for (a, b) in poses.iter().zip(&back) {
            let dr = (a.rotation() - b.rotation()).amax();
            let dt = (a.translation() - b.translation()).amax();
            assert!(dr < 1e-9 && dt < 1e-9, "dr={dr} dt={dt}");
        }
    }
}
