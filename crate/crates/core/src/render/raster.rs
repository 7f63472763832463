//! Depth-buffered triangle rasterizer with flat Lambertian shading.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ring_cameras, CameraPose, Image, RenderConfig, ViewSet};
use crate::error::Result;
use crate::geometry::math::{cross, dot, mat_vec, normalize, rot_x, scale, sub, Mat3, Vec3};
use crate::geometry::{PointCloud, TriMesh};
use crate::linalg::symmetric_eigen;
use crate::seeds;

const NEAR: f64 = 1e-3;

struct Frame {
    side: usize,
    focal: f64,
    light: Vec3,
    model: Mat3,
    basis: (Vec3, Vec3, Vec3),
}

impl Frame {
    fn new(cam: &CameraPose, cfg: &RenderConfig) -> Option<Frame> {
        let basis = cam.basis()?;
        let side = cfg.image_side;
        let tan = (cam.fov_deg.to_radians() * 0.5).tan();
        let r = rot_x(cfg.model_pitch_deg);
        let model = [
            scale(r[0], cfg.scale),
            scale(r[1], cfg.scale),
            scale(r[2], cfg.scale),
        ];
        Some(Frame {
            side,
            focal: side as f64 * 0.5 / tan,
            light: normalize(cfg.light_dir).unwrap_or([0.0, 0.0, -1.0]),
            model,
            basis,
        })
    }

    fn to_camera(&self, cam: &CameraPose, v: Vec3) -> Vec3 {
        cam.to_camera(&self.basis, mat_vec(&self.model, v))
    }

    fn project(&self, p: Vec3) -> (f64, f64) {
        let h = self.side as f64 * 0.5;
        (h + self.focal * p[0] / p[2], h - self.focal * p[1] / p[2])
    }

    fn shade(&self, cfg: &RenderConfig, normal: Vec3) -> f32 {
        // two-sided: CAD exports do not guarantee consistent winding
        (cfg.ambient + cfg.diffuse * dot(normal, self.light).abs()).clamp(0.0, 1.0) as f32
    }
}

fn background(cfg: &RenderConfig, seed: u64) -> f32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.random();
    (cfg.background_min + (cfg.background_max - cfg.background_min) * u).clamp(0.0, 1.0) as f32
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Renders one grayscale view of a unit-sphere-normalized mesh.
pub fn render_view(mesh: &TriMesh, cam: &CameraPose, cfg: &RenderConfig, seed: u64) -> Image {
    let side = cfg.image_side;
    let mut img = Image::filled(side, side, 1, background(cfg, seed));
    let Some(frame) = Frame::new(cam, cfg) else {
        img.blank = true;
        return img;
    };
    let verts: Vec<Vec3> = mesh.vertices.iter().map(|&v| frame.to_camera(cam, v)).collect();
    let mut depth = vec![0.0f64; side * side];
    let mut covered = false;

    for &[ia, ib, ic] in &mesh.faces {
        let (a, b, c) = (verts[ia], verts[ib], verts[ic]);
        if a[2] <= NEAR || b[2] <= NEAR || c[2] <= NEAR {
            continue;
        }
        let Some(n) = normalize(cross(sub(b, a), sub(c, a))) else {
            continue;
        };
        let value = frame.shade(cfg, n);
        let (p0, p1, p2) = (frame.project(a), frame.project(b), frame.project(c));
        let area = edge(p0, p1, p2);
        if area.abs() < 1e-12 {
            continue;
        }
        let lo_x = p0.0.min(p1.0).min(p2.0).floor().max(0.0);
        let hi_x = p0.0.max(p1.0).max(p2.0).ceil().min(side as f64 - 1.0);
        let lo_y = p0.1.min(p1.1).min(p2.1).floor().max(0.0);
        let hi_y = p0.1.max(p1.1).max(p2.1).ceil().min(side as f64 - 1.0);
        if lo_x > hi_x || lo_y > hi_y {
            continue;
        }
        let inv_area = 1.0 / area;
        for y in lo_y as usize..=hi_y as usize {
            for x in lo_x as usize..=hi_x as usize {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let w0 = edge(p1, p2, p) * inv_area;
                let w1 = edge(p2, p0, p) * inv_area;
                let w2 = edge(p0, p1, p) * inv_area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 / a[2] + w1 / b[2] + w2 / c[2];
                let idx = y * side + x;
                if inv_z > depth[idx] {
                    depth[idx] = inv_z;
                    img.data[idx] = value;
                    covered = true;
                }
            }
        }
    }
    if !covered {
        log::warn!("render of `{}` produced no foreground pixels", mesh.model_id);
        img.blank = true;
    }
    img
}

/// Renders the configured ring of views. View `i` uses a seed derived from
/// `(seed, i)` for its background.
pub fn render_views(mesh: &TriMesh, cfg: &RenderConfig, seed: u64) -> Result<ViewSet> {
    let cams = ring_cameras(cfg.view_count, cfg.camera_radius, cfg.elevation_deg, cfg.fov_deg);
    let images = cams
        .iter()
        .enumerate()
        .map(|(i, cam)| render_view(mesh, cam, cfg, seeds::derive(seed, &[i as u64])))
        .collect();
    ViewSet::new(images, mesh.model_id.clone())
}

/// Per-point unit normals from the smallest principal axis of each point's
/// `k` nearest neighbours, plus the mean neighbour spacing.
fn estimate_normals(pc: &PointCloud, k: usize) -> (Vec<Vec3>, f64) {
    let n = pc.len();
    let k = k.min(n.saturating_sub(1)).max(1);
    let mut spacing = 0.0;
    let mut normals = Vec::with_capacity(n);
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &p in &pc.points {
        dists.clear();
        dists.extend(pc.points.iter().enumerate().map(|(j, &q)| {
            let d = sub(p, q);
            (dot(d, d), j)
        }));
        let kk = k.min(dists.len() - 1);
        dists.select_nth_unstable_by(kk, |a, b| a.0.total_cmp(&b.0));
        let nbrs = &dists[..=kk];
        spacing += nbrs.iter().map(|d| d.0.sqrt()).fold(0.0, f64::max);
        let m = nbrs.len() as f64;
        let mean = nbrs.iter().fold([0.0; 3], |acc, &(_, j)| {
            let q = pc.points[j];
            [acc[0] + q[0] / m, acc[1] + q[1] / m, acc[2] + q[2] / m]
        });
        let mut cov = [0.0; 9];
        for &(_, j) in nbrs {
            let d = sub(pc.points[j], mean);
            for r in 0..3 {
                for c in 0..3 {
                    cov[r * 3 + c] += d[r] * d[c];
                }
            }
        }
        let (_, vecs) = symmetric_eigen(&cov, 3);
        normals.push([vecs[2], vecs[5], vecs[8]]);
    }
    (normals, spacing / n as f64)
}

/// Splat rendering of a bare point cloud, for scans without a mesh. Each
/// point becomes a depth-tested square sized to the local sample spacing and
/// shaded with its estimated normal.
pub fn render_points(pc: &PointCloud, cfg: &RenderConfig, seed: u64) -> Result<ViewSet> {
    let (normals, spacing) = estimate_normals(pc, 8);
    let cams = ring_cameras(cfg.view_count, cfg.camera_radius, cfg.elevation_deg, cfg.fov_deg);
    let side = cfg.image_side;
    let images = cams
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let mut img = Image::filled(side, side, 1, background(cfg, seeds::derive(seed, &[i as u64])));
            let Some(frame) = Frame::new(cam, cfg) else {
                img.blank = true;
                return img;
            };
            let rot = [frame.basis.0, frame.basis.1, frame.basis.2];
            let mut depth = vec![0.0f64; side * side];
            let mut covered = false;
            for (&p, &nrm) in pc.points.iter().zip(&normals) {
                let c = frame.to_camera(cam, p);
                if c[2] <= NEAR {
                    continue;
                }
                let n_cam = mat_vec(&rot, mat_vec(&frame.model, nrm));
                let value = frame.shade(cfg, normalize(n_cam).unwrap_or([0.0, 0.0, 1.0]));
                let (px, py) = frame.project(c);
                let half = (0.5 * frame.focal * spacing * cfg.scale / c[2]).max(0.5);
                let inv_z = 1.0 / c[2];
                let x0 = (px - half).floor().max(0.0) as usize;
                let y0 = (py - half).floor().max(0.0) as usize;
                let x1 = ((px + half).ceil() as isize).min(side as isize - 1);
                let y1 = ((py + half).ceil() as isize).min(side as isize - 1);
                if x1 < 0 || y1 < 0 {
                    continue;
                }
                for y in y0..=y1 as usize {
                    for x in x0..=x1 as usize {
                        let idx = y * side + x;
                        if inv_z > depth[idx] {
                            depth[idx] = inv_z;
                            img.data[idx] = value;
                            covered = true;
                        }
                    }
                }
            }
            img.blank = !covered;
            img
        })
        .collect();
    ViewSet::new(images, pc.source_id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::math::{mat_mul, rot_y, rot_z};
    use std::f64::consts::{PI, TAU};

    fn uv_sphere(rings: usize, segs: usize) -> TriMesh {
        let mut v = vec![[0.0, 0.0, 1.0]];
        for i in 1..rings {
            let th = PI * i as f64 / rings as f64;
            for j in 0..segs {
                let ph = TAU * j as f64 / segs as f64;
                v.push([th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
        v.push([0.0, 0.0, -1.0]);
        let last = v.len() - 1;
        let idx = |i: usize, j: usize| 1 + (i - 1) * segs + j % segs;
        let mut f = Vec::new();
        for j in 0..segs {
            f.push([0, idx(1, j), idx(1, j + 1)]);
            f.push([last, idx(rings - 1, j + 1), idx(rings - 1, j)]);
            for i in 1..rings - 1 {
                f.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                f.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        TriMesh::new(v, f, "sphere", None).unwrap()
    }

    fn small_cfg() -> RenderConfig {
        RenderConfig {
            image_side: 96,
            ..RenderConfig::default()
        }
    }

    #[test]
    fn sphere_silhouette_matches_analytic_disc() {
        let cfg = RenderConfig::default();
        let sphere = uv_sphere(48, 96);
        // analytic silhouette: sphere of radius s at distance d subtends
        // asin(s/d); image radius = tan(asin(s/d)) / tan(fov/2) * side/2
        let s = cfg.scale;
        let d = cfg.camera_radius;
        let side = cfg.image_side as f64;
        let rad = (s / d).asin().tan() / (cfg.fov_deg.to_radians() / 2.0).tan() * side / 2.0;
        for cam in ring_cameras(4, cfg.camera_radius, 0.0, cfg.fov_deg) {
            let img = render_view(&sphere, &cam, &cfg, 3);
            let bg = img.data[0];
            let (mut inter, mut union) = (0usize, 0usize);
            for y in 0..cfg.image_side {
                for x in 0..cfg.image_side {
                    let dx = x as f64 + 0.5 - side / 2.0;
                    let dy = y as f64 + 0.5 - side / 2.0;
                    let disc = dx * dx + dy * dy <= rad * rad;
                    let fg = img.at(x, y, 0) != bg;
                    inter += (disc && fg) as usize;
                    union += (disc || fg) as usize;
                }
            }
            let iou = inter as f64 / union as f64;
            assert!(iou > 0.98, "iou {iou}");
        }
    }

    #[test]
    fn deterministic_and_in_range() {
        let m = crate::geometry::gen_procedural("gear", &Default::default(), 1)
            .unwrap()
            .normalized();
        let cfg = small_cfg();
        let a = render_views(&m, &cfg, 5).unwrap();
        let b = render_views(&m, &cfg, 5).unwrap();
        assert_eq!(a, b);
        for im in &a.images {
            assert!(im.data.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(!im.blank);
        }
    }

    #[test]
    fn background_varies_with_seed_foreground_does_not() {
        let m = crate::geometry::gen_procedural("nut", &Default::default(), 2)
            .unwrap()
            .normalized();
        let cfg = small_cfg();
        let cam = ring_cameras(4, cfg.camera_radius, 0.0, cfg.fov_deg)[1];
        let renders: Vec<Image> = (0..10).map(|s| render_view(&m, &cam, &cfg, s)).collect();
        // foreground mask: pixels differing from the corner background
        let mask: Vec<bool> = (0..renders[0].data.len())
            .map(|i| renders[0].data[i] != renders[0].data[0])
            .collect();
        let bgs: Vec<f32> = renders.iter().map(|r| r.data[0]).collect();
        let mean = bgs.iter().sum::<f32>() / bgs.len() as f32;
        assert!(bgs.iter().map(|b| (b - mean).powi(2)).sum::<f32>() > 0.0);
        for r in &renders[1..] {
            for (i, &fg) in mask.iter().enumerate() {
                if fg {
                    assert_eq!(r.data[i], renders[0].data[i]);
                }
            }
        }
    }

    #[test]
    fn behind_camera_is_flagged_blank() {
        let m = crate::geometry::gen_procedural("washer", &Default::default(), 0)
            .unwrap()
            .normalized();
        let cfg = small_cfg();
        let cam = CameraPose {
            position: [2.0, 0.0, 0.0],
            look_at: [5.0, 0.0, 0.0],
            up: [0.0, 0.0, 1.0],
            fov_deg: 40.0,
        };
        assert!(render_view(&m, &cam, &cfg, 0).blank);
    }

    #[test]
    fn rotating_mesh_and_cameras_together_preserves_render() {
        let m = crate::geometry::gen_procedural("bracket", &Default::default(), 4)
            .unwrap()
            .normalized();
        let cfg = RenderConfig {
            model_pitch_deg: 0.0,
            ..small_cfg()
        };
        let r = mat_mul(&rot_z(37.0), &rot_y(-21.0));
        let rotated = m.rotated(&r);
        for cam in ring_cameras(4, cfg.camera_radius, 15.0, cfg.fov_deg) {
            let moved = CameraPose {
                position: mat_vec(&r, cam.position),
                look_at: mat_vec(&r, cam.look_at),
                up: mat_vec(&r, cam.up),
                ..cam
            };
            let a = render_view(&m, &cam, &cfg, 8);
            let b = render_view(&rotated, &moved, &cfg, 8);
            assert!(a.mean_abs_diff(&b) < 5e-3);
        }
    }

    #[test]
    fn point_splats_cover_similar_area_to_mesh() {
        // solid part: splats overstate thin sheets seen edge-on
        let m = crate::geometry::gen_procedural("nut", &Default::default(), 0)
            .unwrap()
            .normalized();
        let pc = crate::geometry::sample_surface(&m, 2048, 1).unwrap();
        let cfg = small_cfg();
        let mesh_views = render_views(&m, &cfg, 0).unwrap();
        let pt_views = render_points(&pc, &cfg, 0).unwrap();
        for (a, b) in mesh_views.images.iter().zip(&pt_views.images) {
            let fa = a.data.iter().filter(|&&v| v != a.data[0]).count() as f64;
            let fb = b.data.iter().filter(|&&v| v != b.data[0]).count() as f64;
            assert!((fa - fb).abs() / fa < 0.35, "mesh {fa} vs splat {fb}");
        }
    }
}
