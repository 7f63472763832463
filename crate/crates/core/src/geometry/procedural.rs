//! Procedural mechanical parts used as a desk-scale stand-in for a CAD
//! catalog. Each class draws its dimensions from a fixed range using the
//! seed, so instances of one class differ while classes stay apart.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

pub const GENERATOR_CLASSES: [&str; 8] = [
    "washer",
    "nut",
    "pipe",
    "elbow",
    "flange",
    "gear",
    "sphere-cap",
    "bracket",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeClass {
    Washer,
    Nut,
    Pipe,
    Elbow,
    Flange,
    Gear,
    SphereCap,
    Bracket,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 8] = [
        ShapeClass::Washer,
        ShapeClass::Nut,
        ShapeClass::Pipe,
        ShapeClass::Elbow,
        ShapeClass::Flange,
        ShapeClass::Gear,
        ShapeClass::SphereCap,
        ShapeClass::Bracket,
    ];

    pub fn name(self) -> &'static str {
        GENERATOR_CLASSES[self as usize]
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShapeClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnsupportedClass(s.to_string()))
    }
}

/// Generator knobs. `jitter` scales the random spread around each range's
/// midpoint (0 = always the midpoint, 1 = the full range); `overrides` pins
/// named dimensions exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeParams {
    pub jitter: f64,
    pub segments: usize,
    pub overrides: BTreeMap<String, f64>,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            jitter: 1.0,
            segments: 32,
            overrides: BTreeMap::new(),
        }
    }
}

struct Dims<'a> {
    rng: ChaCha8Rng,
    params: &'a ShapeParams,
}

impl Dims<'_> {
    fn get(&mut self, name: &str, lo: f64, hi: f64) -> f64 {
        // always draw so overriding one dimension leaves the others unchanged
        let u: f64 = self.rng.random();
        if let Some(&v) = self.params.overrides.get(name) {
            return v;
        }
        let mid = 0.5 * (lo + hi);
        mid + (u - 0.5) * (hi - lo) * self.params.jitter.clamp(0.0, 1.0)
    }
}

pub fn gen_procedural(class_name: &str, params: &ShapeParams, seed: u64) -> Result<TriMesh> {
    let class: ShapeClass = class_name.parse()?;
    let mut d = Dims {
        rng: ChaCha8Rng::seed_from_u64(seed ^ ((class as u64) << 56)),
        params,
    };
    let seg = params.segments.max(6);
    let (vertices, faces) = match class {
        ShapeClass::Washer => {
            let ro = d.get("outer_radius", 0.9, 1.1);
            let ri = ro * d.get("inner_ratio", 0.3, 0.7);
            let t = d.get("thickness", 0.05, 0.22);
            revolve_closed(&[[ri, 0.0], [ro, 0.0], [ro, t], [ri, t]], seg)
        }
        ShapeClass::Pipe => {
            let ro = d.get("radius", 0.25, 0.5);
            let ri = ro * (1.0 - d.get("wall_ratio", 0.08, 0.35));
            let len = d.get("length", 1.6, 3.4);
            revolve_closed(&[[ri, 0.0], [ro, 0.0], [ro, len], [ri, len]], seg)
        }
        ShapeClass::Flange => {
            let rb = d.get("bore_radius", 0.18, 0.38);
            let rp = d.get("plate_radius", 1.05, 1.15);
            let tp = d.get("plate_thickness", 0.08, 0.24);
            let rh = d.get("hub_radius", 0.45, 0.7);
            let th = d.get("hub_height", 0.6, 1.2);
            revolve_closed(
                &[[rb, 0.0], [rp, 0.0], [rp, tp], [rh, tp], [rh, th], [rb, th]],
                seg,
            )
        }
        ShapeClass::Nut => {
            let r = d.get("radius", 0.9, 1.1);
            let hole = r * d.get("hole_ratio", 0.3, 0.6);
            let t = r * d.get("thickness_ratio", 0.45, 1.0);
            let m = 6 * (seg / 6).max(2);
            let outer: Vec<[f64; 2]> = (0..m)
                .map(|i| {
                    let a = TAU * i as f64 / m as f64;
                    let sector = (a / (PI / 3.0)).floor() * (PI / 3.0);
                    // distance to the hexagon edge along angle a
                    let rr = r * (PI / 6.0).cos() / (a - sector - PI / 6.0).cos();
                    [rr * a.cos(), rr * a.sin()]
                })
                .collect();
            extrude_annulus(&outer, &circle(hole, m), 0.0, t)
        }
        ShapeClass::Gear => {
            let root = d.get("root_radius", 0.8, 0.9);
            let tip = root + d.get("tooth_height", 0.1, 0.26);
            let teeth = d.get("teeth", 8.0, 20.0).round().max(3.0) as usize;
            let bore = root * d.get("bore_ratio", 0.2, 0.5);
            let t = d.get("thickness", 0.2, 0.5);
            let m = teeth * 4;
            let outer: Vec<[f64; 2]> = (0..m)
                .map(|i| {
                    let a = TAU * i as f64 / m as f64;
                    let rr = if i % 4 == 1 || i % 4 == 2 { tip } else { root };
                    [rr * a.cos(), rr * a.sin()]
                })
                .collect();
            extrude_annulus(&outer, &circle(bore, m), 0.0, t)
        }
        ShapeClass::Elbow => {
            let ro = d.get("tube_radius", 0.2, 0.4);
            let ri = ro * (1.0 - d.get("wall_ratio", 0.1, 0.35));
            let bend = d.get("bend_radius", 0.7, 1.4);
            let sweep = d.get("sweep_deg", 60.0, 120.0);
            sweep_tube(ro, ri, bend, sweep.to_radians(), seg / 2 + 4, seg)
        }
        ShapeClass::SphereCap => {
            let r = d.get("radius", 0.9, 1.1);
            let h = r * d.get("height_ratio", 0.45, 1.0);
            let base_z = r - h;
            let rim_angle = (base_z / r).acos();
            let arc = (seg / 2).max(4);
            let mut profile = vec![[0.0, r]];
            for i in 1..=arc {
                let a = rim_angle * i as f64 / arc as f64;
                profile.push([r * a.sin(), r * a.cos()]);
            }
            // flat brim of thickness 0.06 around the base
            let rim = profile[arc][0] * d.get("brim_ratio", 1.05, 1.4);
            let base = base_z - 0.06;
            profile.push([rim, base_z]);
            profile.push([rim, base]);
            for i in 1..4 {
                profile.push([rim * (1.0 - i as f64 / 4.0), base]);
            }
            profile.push([0.0, base]);
            revolve_open(&profile, seg)
        }
        ShapeClass::Bracket => {
            let a = d.get("arm_a", 1.1, 2.2);
            let b = d.get("arm_b", 0.6, 1.6);
            let t = d.get("thickness", 0.2, 0.45);
            let w = d.get("width", 0.4, 1.2);
            let outline = [
                [0.0, 0.0],
                [a, 0.0],
                [a, t],
                [t, t],
                [t, b],
                [0.0, b],
                [0.0, t],
            ];
            let caps = [[0, 1, 2], [0, 2, 3], [0, 3, 6], [6, 3, 4], [6, 4, 5]];
            extrude_polygon(&outline, &caps, 0.0, w)
        }
    };
    TriMesh::new(
        vertices,
        faces,
        format!("{}-{seed}", class.name()),
        Some(class.name().to_string()),
    )
}

fn circle(r: f64, m: usize) -> Vec<[f64; 2]> {
    (0..m)
        .map(|i| {
            let a = TAU * i as f64 / m as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

fn push_quad(faces: &mut Vec<[usize; 3]>, a: usize, b: usize, c: usize, d: usize) {
    faces.push([a, b, c]);
    faces.push([a, c, d]);
}

/// Revolves a closed (r, z) loop with all r > 0 around the z axis; the
/// result has torus topology.
fn revolve_closed(profile: &[[f64; 2]], seg: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let p = profile.len();
    let mut v = Vec::with_capacity(seg * p);
    for s in 0..seg {
        let (sn, cs) = (TAU * s as f64 / seg as f64).sin_cos();
        for &[r, z] in profile {
            v.push([r * cs, r * sn, z]);
        }
    }
    let idx = |s: usize, k: usize| (s % seg) * p + (k % p);
    let mut f = Vec::with_capacity(2 * seg * p);
    for s in 0..seg {
        for k in 0..p {
            push_quad(&mut f, idx(s, k), idx(s, k + 1), idx(s + 1, k + 1), idx(s + 1, k));
        }
    }
    (v, f)
}

/// Revolves an open (r, z) polyline whose endpoints lie on the axis; the
/// result has sphere topology.
fn revolve_open(profile: &[[f64; 2]], seg: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let inner = &profile[1..profile.len() - 1];
    let p = inner.len();
    let mut v = vec![[0.0, 0.0, profile[0][1]]];
    for s in 0..seg {
        let (sn, cs) = (TAU * s as f64 / seg as f64).sin_cos();
        for &[r, z] in inner {
            v.push([r * cs, r * sn, z]);
        }
    }
    let bottom = v.len();
    v.push([0.0, 0.0, profile[profile.len() - 1][1]]);
    let idx = |s: usize, k: usize| 1 + (s % seg) * p + k;
    let mut f = Vec::new();
    for s in 0..seg {
        f.push([0, idx(s, 0), idx(s + 1, 0)]);
        for k in 0..p - 1 {
            push_quad(&mut f, idx(s, k), idx(s, k + 1), idx(s + 1, k + 1), idx(s + 1, k));
        }
        f.push([bottom, idx(s + 1, p - 1), idx(s, p - 1)]);
    }
    (v, f)
}

/// Prism between two planar loops of equal length (outer, inner hole).
fn extrude_annulus(
    outer: &[[f64; 2]],
    inner: &[[f64; 2]],
    z0: f64,
    z1: f64,
) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    assert_eq!(outer.len(), inner.len());
    let m = outer.len();
    let mut v = Vec::with_capacity(4 * m);
    for (pts, z) in [(outer, z0), (outer, z1), (inner, z0), (inner, z1)] {
        v.extend(pts.iter().map(|&[x, y]| [x, y, z]));
    }
    let ob = |i: usize| i % m;
    let ot = |i: usize| m + i % m;
    let ib = |i: usize| 2 * m + i % m;
    let it = |i: usize| 3 * m + i % m;
    let mut f = Vec::with_capacity(8 * m);
    for i in 0..m {
        push_quad(&mut f, ob(i), ob(i + 1), ot(i + 1), ot(i));
        push_quad(&mut f, ib(i + 1), ib(i), it(i), it(i + 1));
        push_quad(&mut f, ot(i), ot(i + 1), it(i + 1), it(i));
        push_quad(&mut f, ob(i + 1), ob(i), ib(i), ib(i + 1));
    }
    (v, f)
}

/// Prism over a simple polygon with a caller-supplied cap triangulation.
fn extrude_polygon(
    outline: &[[f64; 2]],
    caps: &[[usize; 3]],
    z0: f64,
    z1: f64,
) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let m = outline.len();
    let mut v: Vec<Vec3> = outline.iter().map(|&[x, y]| [x, y, z0]).collect();
    v.extend(outline.iter().map(|&[x, y]| [x, y, z1]));
    let mut f = Vec::new();
    for i in 0..m {
        let j = (i + 1) % m;
        push_quad(&mut f, i, j, m + j, m + i);
    }
    for &[a, b, c] in caps {
        f.push([a, c, b]);
        f.push([m + a, m + b, m + c]);
    }
    (v, f)
}

/// Hollow tube swept along a circular arc in the xy plane, ends capped.
fn sweep_tube(
    ro: f64,
    ri: f64,
    bend: f64,
    sweep: f64,
    stations: usize,
    ring: usize,
) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let n = stations + 1;
    let mut v = Vec::with_capacity(2 * n * ring);
    for r in [ro, ri] {
        for j in 0..n {
            let (sa, ca) = (sweep * j as f64 / stations as f64).sin_cos();
            for k in 0..ring {
                let (sb, cb) = (TAU * k as f64 / ring as f64).sin_cos();
                let radial = bend + r * cb;
                v.push([radial * ca, radial * sa, r * sb]);
            }
        }
    }
    let o = |j: usize, k: usize| j * ring + k % ring;
    let i = |j: usize, k: usize| n * ring + j * ring + k % ring;
    let mut f = Vec::new();
    for j in 0..stations {
        for k in 0..ring {
            push_quad(&mut f, o(j, k), o(j + 1, k), o(j + 1, k + 1), o(j, k + 1));
            push_quad(&mut f, i(j, k + 1), i(j + 1, k + 1), i(j + 1, k), i(j, k));
        }
    }
    for k in 0..ring {
        push_quad(&mut f, o(0, k + 1), i(0, k + 1), i(0, k), o(0, k));
        let e = stations;
        push_quad(&mut f, o(e, k), i(e, k), i(e, k + 1), o(e, k + 1));
    }
    (v, f)
}
