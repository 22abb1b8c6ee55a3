//! Converters from public benchmark layouts into the canonical poses format.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Pose, Rotation, UnitQuaternion, Vec3};
use crate::solver::CameraIntrinsics;

/// Nominal 7-Scenes RGB calibration.
pub fn seven_scenes_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 585.0,
        fy: 585.0,
        cx: 320.0,
        cy: 240.0,
    }
}

/// Reads a 4x4 camera-to-world matrix as written by 7-Scenes.
pub fn parse_camera_to_world(path: &Path, text: &str) -> Result<Pose> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
    if vals.len() != 16 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected 16 numbers, found {}", vals.len()),
        });
    }
    let r_cw = Mat3::new(
        vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10],
    );
    let center = Vec3::new(vals[3], vals[7], vals[11]);
    // The stored rotations are only approximately orthonormal.
    let rotation = Rotation::nearest(&r_cw)?.transpose();
    Ok(Pose::from_center(rotation, &center))
}

/// Poses of one 7-Scenes sequence directory (`frame-NNNNNN.pose.txt`),
/// sorted by frame. Ids are `<sequence>/frame-NNNNNN`.
pub fn seven_scenes_sequence(dir: &Path) -> Result<Vec<(String, Pose)>> {
    let seq = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
        if let Some(stem) = name.as_deref().and_then(|n| n.strip_suffix(".pose.txt")) {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            frames.push((format!("{seq}/{stem}"), parse_camera_to_world(&path, &text)?));
        }
    }
    frames.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(frames)
}

/// Cambridge Landmarks split file: three header lines, then
/// `image X Y Z W P Q R` with the camera center and world-to-camera
/// quaternion.
pub fn cambridge_split(path: &Path) -> Result<Vec<(String, Pose)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(3) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let v: Vec<f64> = fields[1..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(e.to_string()))?;
        let q = UnitQuaternion::new(v[3], v[4], v[5], v[6]).map_err(|e| err(e.to_string()))?;
        let center = Vec3::new(v[0], v[1], v[2]);
        let id = fields[0].trim_end_matches(".png").to_string();
        out.push((id, Pose::from_center(Rotation::from_quaternion(q), &center)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_scenes_matrix() {
        // Camera at (1, 2, 3) rotated 90 degrees about z.
        let text = "0 -1 0 1\n1 0 0 2\n0 0 1 3\n0 0 0 1\n";
        let pose = parse_camera_to_world(Path::new("f.pose.txt"), text).unwrap();
        assert!((pose.center() - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        let cam_x_in_world = pose.rotation.transpose().apply(&Vec3::x());
        assert!((cam_x_in_world - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn sequence_directory() {
        let dir = tempfile::tempdir().unwrap();
        let seq = dir.path().join("seq-01");
        fs::create_dir(&seq).unwrap();
        let id = "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n";
        fs::write(seq.join("frame-000001.pose.txt"), id).unwrap();
        fs::write(seq.join("frame-000000.pose.txt"), id).unwrap();
        fs::write(seq.join("frame-000000.color.png"), b"").unwrap();
        let poses = seven_scenes_sequence(&seq).unwrap();
        let ids: Vec<&str> = poses.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["seq-01/frame-000000", "seq-01/frame-000001"]);
    }

    #[test]
    fn cambridge_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset_test.txt");
        fs::write(
            &path,
            "Visual Landmark Dataset V1\nImageFile, Camera Position [X Y Z W P Q R]\n\n\
             seq1/frame00001.png 1.0 2.0 3.0 1 0 0 0\n",
        )
        .unwrap();
        let poses = cambridge_split(&path).unwrap();
        assert_eq!(poses[0].0, "seq1/frame00001");
        assert!((poses[0].1.center() - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-15);
    }
}
