//! Meshes, point clouds, and the operations that turn one into the other.

pub mod math;
mod obj;
mod pointcloud_io;
mod procedural;
mod sample;

use serde::{Deserialize, Serialize};

pub use math::Vec3;
pub use obj::{parse_obj, read_obj, write_obj};
pub use pointcloud_io::{read_point_cloud, write_point_cloud, PointCloudFormat};
pub use procedural::{gen_procedural, ShapeClass, ShapeParams, GENERATOR_CLASSES};
pub use sample::{
    chamfer_distance, normalize_unit_sphere, occlude, sample_surface, sample_surface_with_faces,
};

use crate::error::{Error, Result};
use math::{add, dot, mat_vec, scale, sub, triangle_area, Mat3};

/// Triangle soup of a CAD model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub model_id: String,
    pub class_label: Option<String>,
}

impl TriMesh {
    /// Builds a mesh and checks that every index is in range and that the
    /// surface has positive area.
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        model_id: impl Into<String>,
        class_label: Option<String>,
    ) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::Shape(format!(
                "face {f:?} indexes past {} vertices",
                vertices.len()
            )));
        }
        let mesh = TriMesh {
            vertices,
            faces,
            model_id: model_id.into(),
            class_label,
        };
        if !(mesh.total_area() > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "mesh `{}` has zero surface area",
                mesh.model_id
            )));
        }
        Ok(mesh)
    }

    pub fn face_corners(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.face_corners(f);
                triangle_area(a, b, c)
            })
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// V - E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &i in f {
                used[i] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_count() as i64 + self.faces.len() as i64
    }

    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn rotated(&self, r: &Mat3) -> TriMesh {
        self.map_vertices(|v| mat_vec(r, v))
    }

    /// Centers the vertex centroid at the origin and scales the farthest
    /// vertex to distance 1.
    pub fn normalized(&self) -> TriMesh {
        let n = self.vertices.len() as f64;
        let c = scale(self.vertices.iter().fold([0.0; 3], |acc, &v| add(acc, v)), 1.0 / n);
        let r = self
            .vertices
            .iter()
            .map(|&v| math::norm(sub(v, c)))
            .fold(0.0, f64::max);
        let s = if r > 0.0 { 1.0 / r } else { 1.0 };
        self.map_vertices(|v| scale(sub(v, c), s))
    }

    /// Drops every face whose centroid projects beyond `threshold` along
    /// `direction`. Returns `None` when nothing with positive area survives.
    pub fn clip_half_space(&self, direction: Vec3, threshold: f64) -> Option<TriMesh> {
        let faces: Vec<[usize; 3]> = (0..self.faces.len())
            .filter(|&f| {
                let [a, b, c] = self.face_corners(f);
                dot(scale(add(add(a, b), c), 1.0 / 3.0), direction) <= threshold
            })
            .map(|f| self.faces[f])
            .collect();
        TriMesh::new(
            self.vertices.clone(),
            faces,
            self.model_id.clone(),
            self.class_label.clone(),
        )
        .ok()
    }
}

/// Sampled surface points of one model or scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub source_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, source_id: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Shape("point cloud must hold at least one point".into()));
        }
        Ok(PointCloud {
            points,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.points.len() as f64;
        scale(self.points.iter().fold([0.0; 3], |acc, &p| add(acc, p)), 1.0 / n)
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|&p| math::norm(p)).fold(0.0, f64::max)
    }

    pub fn rotated(&self, r: &Mat3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|&p| mat_vec(r, p)).collect(),
            source_id: self.source_id.clone(),
        }
    }
}
