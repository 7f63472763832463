use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::math::{add, dot, norm, scale, sub};
use super::{PointCloud, TriMesh, Vec3};
use crate::error::{Error, Result};

/// Area-weighted uniform surface sampling.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    sample_surface_with_faces(mesh, n, seed).map(|(pc, _)| pc)
}

/// Like [`sample_surface`], also returning the face each point was drawn from.
pub fn sample_surface_with_faces(
    mesh: &TriMesh,
    n: usize,
    seed: u64,
) -> Result<(PointCloud, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Shape("sample count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for a in mesh.face_areas() {
        total += a;
        cumulative.push(total);
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "mesh `{}` has no positive-area faces to sample",
            mesh.model_id
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random::<f64>() * total;
        // Zero-area faces share their predecessor's cumulative value and can
        // never be the first entry strictly above `u`.
        let face = cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.face_corners(face);
        let s = rng.random::<f64>().sqrt();
        let t = rng.random::<f64>();
        let wa = 1.0 - s;
        let wb = s * (1.0 - t);
        let wc = s * t;
        points.push(add(add(scale(a, wa), scale(b, wb)), scale(c, wc)));
        faces.push(face);
    }
    Ok((
        PointCloud {
            points,
            source_id: mesh.model_id.clone(),
        },
        faces,
    ))
}

/// Moves the centroid to the origin and scales so the farthest point sits at
/// radius 1. A cloud with zero radius (e.g. a single point) is only centered.
pub fn normalize_unit_sphere(pc: &PointCloud) -> PointCloud {
    let c = pc.centroid();
    let centered: Vec<Vec3> = pc.points.iter().map(|&p| sub(p, c)).collect();
    let r = centered.iter().map(|&p| norm(p)).fold(0.0, f64::max);
    let s = if r > 0.0 { 1.0 / r } else { 1.0 };
    PointCloud {
        points: centered.into_iter().map(|p| scale(p, s)).collect(),
        source_id: pc.source_id.clone(),
    }
}

/// Number of points a half-space cut removes.
pub(crate) fn occluded_count(n: usize, fraction: f64) -> usize {
    // guard against 0.1 * 30 = 3.0000000000000004 style round-up
    let raw = fraction * n as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Simulates a view-dependent partial scan: drops the `ceil(fraction * N)`
/// points that project farthest along `direction`. Exact projection ties are
/// broken by a seeded shuffle; survivors keep their original order.
pub fn occlude(pc: &PointCloud, direction: Vec3, fraction: f64, seed: u64) -> Result<PointCloud> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidFraction(fraction));
    }
    let n = pc.len();
    let remove = occluded_count(n, fraction);
    if remove == 0 {
        return Ok(pc.clone());
    }
    if remove >= n {
        return Err(Error::DegenerateGeometry(format!(
            "occluding {fraction} of {n} points leaves nothing"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<(f64, u64, usize)> = pc
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| (dot(p, direction), rng.random::<u64>(), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut keep = vec![true; n];
    for &(_, _, i) in &order[..remove] {
        keep[i] = false;
    }
    let points = pc
        .points
        .iter()
        .zip(&keep)
        .filter_map(|(&p, &k)| k.then_some(p))
        .collect();
    Ok(PointCloud {
        points,
        source_id: pc.source_id.clone(),
    })
}

/// Symmetric mean nearest-neighbour distance between two clouds.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    fn one_way(x: &[Vec3], y: &[Vec3]) -> f64 {
        let total: f64 = x
            .iter()
            .map(|&p| {
                y.iter()
                    .map(|&q| {
                        let d = sub(p, q);
                        dot(d, d)
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum();
        total / x.len() as f64
    }
    0.5 * (one_way(&a.points, &b.points) + one_way(&b.points, &a.points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::math::{cross, rot_x, rot_z, mat_mul};
    use proptest::prelude::*;

    fn mesh(v: Vec<Vec3>, f: Vec<[usize; 3]>) -> TriMesh {
        TriMesh::new(v, f, "m", None).unwrap()
    }

    fn unit_square() -> TriMesh {
        mesh(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    /// Barycentric containment, independent of the sampler's bookkeeping.
    fn contains(tri: [Vec3; 3], p: Vec3, tol: f64) -> bool {
        let [a, b, c] = tri;
        let n = cross(sub(b, a), sub(c, a));
        let area2 = dot(n, n);
        let l1 = dot(cross(sub(c, b), sub(p, b)), n) / area2;
        let l2 = dot(cross(sub(a, c), sub(p, c)), n) / area2;
        let l3 = 1.0 - l1 - l2;
        let off_plane = dot(sub(p, a), n).abs() / area2.sqrt();
        l1 >= -tol && l2 >= -tol && l3 >= -tol && off_plane < tol
    }

    #[test]
    fn square_halves_within_binomial_bound() {
        // Bin(10_000, 0.5): sigma = sqrt(10_000 * 0.25) = 50, 3 sigma = 150.
        let (_, faces) = sample_surface_with_faces(&unit_square(), 10_000, 7).unwrap();
        let first = faces.iter().filter(|&&f| f == 0).count() as i64;
        assert!((first - 5_000).abs() <= 150, "first = {first}");
    }

    #[test]
    fn one_to_three_area_ratio_by_geometric_count() {
        // (0,0)-(1,0)-(0,1) has area 0.5, (1,0)-(4,0)-(1,1) has area 1.5.
        let m = mesh(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [4.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
            ],
            vec![[0, 1, 2], [1, 3, 4]],
        );
        let pc = sample_surface(&m, 10_000, 11).unwrap();
        let small = m.face_corners(0);
        let hits = pc.points.iter().filter(|&&p| contains(small, p, 1e-12)).count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.25).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn single_triangle_contains_all() {
        let m = mesh(
            vec![[0.3, -1.0, 2.0], [1.0, 0.5, 0.0], [-2.0, 1.0, 1.0]],
            vec![[0, 1, 2]],
        );
        let pc = sample_surface(&m, 2_000, 3).unwrap();
        let tri = m.face_corners(0);
        assert!(pc.points.iter().all(|&p| contains(tri, p, 1e-9)));
    }

    #[test]
    fn zero_area_faces_never_sampled() {
        let m = mesh(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 3], [0, 1, 2], [1, 3, 3]],
        );
        let (_, faces) = sample_surface_with_faces(&m, 5_000, 1).unwrap();
        assert!(faces.iter().all(|&f| f == 1));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = sample_surface(&unit_square(), 100, 42).unwrap();
        let b = sample_surface(&unit_square(), 100, 42).unwrap();
        let c = sample_surface(&unit_square(), 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normalize_examples() {
        let pc = PointCloud::new(vec![[1.0, 1.0, 1.0], [3.0, 1.0, 1.0]], "p").unwrap();
        let n = normalize_unit_sphere(&pc);
        assert_eq!(n.points, vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);

        let single = PointCloud::new(vec![[5.0, 5.0, 5.0]], "s").unwrap();
        assert_eq!(normalize_unit_sphere(&single).points, vec![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn occlude_fraction_zero_is_identity() {
        let pc = sample_surface(&unit_square(), 64, 0).unwrap();
        assert_eq!(occlude(&pc, [0.0, 0.0, 1.0], 0.0, 1).unwrap(), pc);
    }

    #[test]
    fn occlude_rejects_fraction_one() {
        let pc = sample_surface(&unit_square(), 64, 0).unwrap();
        assert!(matches!(
            occlude(&pc, [0.0, 0.0, 1.0], 1.0, 1),
            Err(Error::InvalidFraction(_))
        ));
    }

    #[test]
    fn occlude_high_fraction_count() {
        let pc = sample_surface(&unit_square(), 2048, 0).unwrap();
        let out = occlude(&pc, [1.0, 0.0, 0.0], 0.99, 5).unwrap();
        // ceil(0.99 * 2048) = 2028 removed
        assert_eq!(out.len(), 2048 - 2028);
    }

    #[test]
    fn occlude_half_cube_matches_sort_oracle() {
        let cube = crate::geometry::gen_procedural(
            "bracket",
            &crate::geometry::ShapeParams::default(),
            0,
        )
        .unwrap();
        let pc = normalize_unit_sphere(&sample_surface(&cube, 2048, 9).unwrap());
        let out = occlude(&pc, [0.0, 0.0, 1.0], 0.5, 2).unwrap();
        let mut zs: Vec<f64> = pc.points.iter().map(|p| p[2]).collect();
        zs.sort_by(f64::total_cmp);
        // 1024 survivors: all at or below the 1024th smallest z
        let cutoff = zs[1023];
        assert_eq!(out.len(), 1024);
        assert!(out.points.iter().all(|p| p[2] <= cutoff));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn normalize_is_idempotent_and_rotation_equivariant(
            pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 2..64),
            ax in -180.0f64..180.0,
            az in -180.0f64..180.0,
        ) {
            let pc = PointCloud::new(pts, "p").unwrap();
            let n1 = normalize_unit_sphere(&pc);
            let n2 = normalize_unit_sphere(&n1);
            for (a, b) in n1.points.iter().zip(&n2.points) {
                for k in 0..3 { prop_assert!((a[k] - b[k]).abs() < 1e-6); }
            }
            prop_assert!(norm(n1.centroid()) < 1e-6);
            let r = mat_mul(&rot_z(az), &rot_x(ax));
            let lhs = normalize_unit_sphere(&pc.rotated(&r));
            let rhs = n1.rotated(&r);
            for (a, b) in lhs.points.iter().zip(&rhs.points) {
                for k in 0..3 { prop_assert!((a[k] - b[k]).abs() < 1e-6); }
            }
        }

        #[test]
        fn occlude_output_size(n in 1usize..600, fraction in 0.0f64..0.95, seed in 0u64..1000) {
            let pts: Vec<Vec3> = (0..n).map(|i| [i as f64, (i * 7 % 13) as f64, 0.5]).collect();
            let pc = PointCloud::new(pts, "p").unwrap();
            let removed = occluded_count(n, fraction);
            match occlude(&pc, [0.6, 0.8, 0.0], fraction, seed) {
                Ok(out) => prop_assert_eq!(out.len(), n - removed),
                Err(_) => prop_assert_eq!(removed, n),
            }
        }
    }
}
