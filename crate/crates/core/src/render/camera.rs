use serde::{Deserialize, Serialize};

use crate::geometry::math::{cross, dot, normalize, sub, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_deg: f64,
}

impl CameraPose {
    /// Orthonormal (right, up, forward) basis; `None` if the pose is
    /// degenerate (eye at target or up parallel to the view direction).
    pub fn basis(&self) -> Option<(Vec3, Vec3, Vec3)> {
        let forward = normalize(sub(self.look_at, self.position))?;
        let right = normalize(cross(forward, self.up))?;
        let up = cross(right, forward);
        Some((right, up, forward))
    }

    /// Camera-space coordinates: x right, y up, z along the view direction.
    pub fn to_camera(&self, basis: &(Vec3, Vec3, Vec3), p: Vec3) -> Vec3 {
        let d = sub(p, self.position);
        [dot(d, basis.0), dot(d, basis.1), dot(d, basis.2)]
    }
}

/// `k` cameras evenly spaced in azimuth on a circle around the z axis,
/// looking at the origin. Azimuth 0 sits on +x.
pub fn ring_cameras(k: usize, radius: f64, elevation_deg: f64, fov_deg: f64) -> Vec<CameraPose> {
    let (se, ce) = elevation_deg.to_radians().sin_cos();
    (0..k)
        .map(|i| {
            let (sa, ca) = (std::f64::consts::TAU * i as f64 / k as f64).sin_cos();
            CameraPose {
                position: [radius * ce * ca, radius * ce * sa, radius * se],
                look_at: [0.0; 3],
                up: [0.0, 0.0, 1.0],
                fov_deg,
            }
        })
        .collect()
}
