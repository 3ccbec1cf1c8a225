//! Geometry-dataset diagnostics: farthest-point sampling of oriented
//! surface points, normalized Chamfer + normal-cosine-dissimilarity (NCND)
//! pairwise distances under alignment/scaling modes, and a nearest-neighbor
//! field baseline.
//!
//! NCND between two clouds is `chamfer/x + y * dissimilarity` where chamfer
//! is the symmetric mean point-to-point nearest-neighbor distance and the
//! dissimilarity averages `(1 - cos theta)/2` between each point's normal
//! and its nearest neighbor's normal over both directions. Calibrating
//! `x = 2 * max(chamfer)` and `y = 0.5 / max(dissim)` over a collection
//! caps NCND at 1 with each component contributing at most 0.5.

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::TriangleMesh;
use crate::metrics::{relative_l2, MetricsError, SampleRecord};

#[derive(Debug, Error)]
pub enum GeomDiagError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("requested {requested} points but only {available} candidates were sampled")]
    NotEnoughCandidates { requested: usize, available: usize },
    #[error("mesh bounding box has zero extent")]
    DegenerateBoundingBox,
    #[error("calibration impossible: maximum {0} value is zero")]
    ZeroCalibrationMax(&'static str),
    #[error("pairwise matrix needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Surface points with unit normals taken from their source triangles.
#[derive(Debug, Clone)]
pub struct OrientedPointCloud {
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
}

impl OrientedPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// NCND constants. The paper-scale point budget is 100_000; the desk-scale
/// default keeps pairwise matrices cheap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NcndConfig {
    /// Chamfer normalizer (> 0).
    pub x: f64,
    /// Dissimilarity weight (> 0).
    pub y: f64,
    pub n_points: usize,
}

impl Default for NcndConfig {
    fn default() -> Self {
        Self {
            x: 1.0,
            y: 0.5,
            n_points: 4096,
        }
    }
}

/// Uniform-area candidate points on the mesh surface, deterministic for a
/// given seed. Each point carries its triangle's face normal.
pub fn sample_surface(
    mesh: &TriangleMesh,
    count: usize,
    seed: u64,
) -> Result<OrientedPointCloud, GeomDiagError> {
    if mesh.triangles.is_empty() || count == 0 {
        return Err(GeomDiagError::EmptyCloud);
    }
    // Cumulative area table for triangle selection.
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.gen::<f64>() * total;
        let t = cumulative.partition_point(|&c| c < u).min(mesh.triangles.len() - 1);
        let [a, b, c] = mesh.triangle_vertices(t);
        // Square-root trick for uniform barycentric sampling.
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let w0 = 1.0 - s;
        let w1 = s * (1.0 - r2);
        let w2 = s * r2;
        points.push(Point3::from(
            a.coords * w0 + b.coords * w1 + c.coords * w2,
        ));
        normals.push(mesh.face_normal(t));
    }
    Ok(OrientedPointCloud { points, normals })
}

/// Farthest point sampling with an explicit candidate budget.
///
/// Greedy FPS over a dense uniform-area candidate set, starting from the
/// candidate farthest from the candidate centroid (lowest index on ties).
pub fn fps_with_candidates(
    mesh: &TriangleMesh,
    n: usize,
    candidates: usize,
    seed: u64,
) -> Result<OrientedPointCloud, GeomDiagError> {
    if n == 0 {
        return Err(GeomDiagError::EmptyCloud);
    }
    if n > candidates {
        return Err(GeomDiagError::NotEnoughCandidates {
            requested: n,
            available: candidates,
        });
    }
    let pool = sample_surface(mesh, candidates, seed)?;

    let mut centroid = Vector3::zeros();
    for p in &pool.points {
        centroid += p.coords;
    }
    centroid /= pool.len() as f64;
    let centroid = Point3::from(centroid);

    let mut selected = Vec::with_capacity(n);
    let mut start = 0;
    let mut best = -1.0;
    for (i, p) in pool.points.iter().enumerate() {
        let d = (p - centroid).norm_squared();
        if d > best {
            best = d;
            start = i;
        }
    }
    selected.push(start);

    // min_dist2[i] tracks each candidate's distance to the selected set.
    let mut min_dist2: Vec<f64> = pool
        .points
        .iter()
        .map(|p| (p - pool.points[start]).norm_squared())
        .collect();
    while selected.len() < n {
        let mut next = 0;
        let mut far = -1.0;
        for (i, &d) in min_dist2.iter().enumerate() {
            if d > far {
                far = d;
                next = i;
            }
        }
        selected.push(next);
        let np = pool.points[next];
        for (i, d) in min_dist2.iter_mut().enumerate() {
            let cand = (pool.points[i] - np).norm_squared();
            if cand < *d {
                *d = cand;
            }
        }
    }
    Ok(OrientedPointCloud {
        points: selected.iter().map(|&i| pool.points[i]).collect(),
        normals: selected.iter().map(|&i| pool.normals[i]).collect(),
    })
}

/// Candidate budget used by [`farthest_point_sample`]: dense relative to
/// the request, with a floor for small `n`.
pub fn default_candidate_count(n: usize) -> usize {
    (4 * n).max(4096)
}

/// Greedy farthest point sampling of `n` oriented surface points.
pub fn farthest_point_sample(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<OrientedPointCloud, GeomDiagError> {
    fps_with_candidates(mesh, n, default_candidate_count(n), seed)
}

/// Translate so the vertex centroid sits at the origin, then shift along z
/// so the minimum z is zero (common ground plane). Idempotent.
pub fn align_geometry(mesh: &TriangleMesh) -> TriangleMesh {
    let mut out = mesh.clone();
    let c = out.vertex_centroid();
    out.translate(-c.coords);
    let min_z = out
        .vertices
        .iter()
        .map(|v| v.z)
        .fold(f64::INFINITY, f64::min);
    out.translate(Vector3::new(0.0, 0.0, -min_z));
    out
}

/// Align, then scale uniformly so the longest bounding-box edge is 1.
pub fn unit_cube_scale(mesh: &TriangleMesh) -> Result<TriangleMesh, GeomDiagError> {
    let mut out = align_geometry(mesh);
    let (lo, hi) = out.bounding_box();
    let longest = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
    if longest <= 0.0 {
        return Err(GeomDiagError::DegenerateBoundingBox);
    }
    out.scale_about_origin(1.0 / longest);
    Ok(out)
}

/// Static kd-tree over points for exact nearest-neighbor queries.
struct KdTree<'a> {
    points: &'a [Point3<f64>],
    nodes: Vec<KdNode>,
    root: i32,
}

struct KdNode {
    point: u32,
    axis: u8,
    left: i32,  // -1 = none
    right: i32, // -1 = none
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [Point3<f64>]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::split(points, &mut order, &mut nodes);
        Self {
            points,
            nodes,
            root,
        }
    }

    fn split(points: &[Point3<f64>], order: &mut [u32], nodes: &mut Vec<KdNode>) -> i32 {
        if order.is_empty() {
            return -1;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in order.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i as usize][a]);
                hi[a] = hi[a].max(points[i as usize][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&i, &j| (hi[i] - lo[i]).total_cmp(&(hi[j] - lo[j])))
            .unwrap();
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&x, &y| {
            points[x as usize][axis].total_cmp(&points[y as usize][axis])
        });
        let point = order[mid];
        let idx = nodes.len();
        nodes.push(KdNode {
            point,
            axis: axis as u8,
            left: -1,
            right: -1,
        });
        let (left_slice, rest) = order.split_at_mut(mid);
        let left = Self::split(points, left_slice, nodes);
        let right = Self::split(points, &mut rest[1..], nodes);
        nodes[idx].left = left;
        nodes[idx].right = right;
        idx as i32
    }

    /// Index of the nearest point to `q` (exact; ties break to the lowest
    /// point index).
    fn nearest(&self, q: &Point3<f64>) -> usize {
        let mut best = f64::INFINITY;
        let mut best_idx = usize::MAX;
        self.search(q, self.root, &mut best, &mut best_idx);
        best_idx
    }

    fn search(&self, q: &Point3<f64>, node: i32, best: &mut f64, best_idx: &mut usize) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let i = n.point as usize;
        let d = (self.points[i] - q).norm_squared();
        if d < *best || (d == *best && i < *best_idx) {
            *best = d;
            *best_idx = i;
        }
        let axis = n.axis as usize;
        let delta = q[axis] - self.points[i][axis];
        let (near, far) = if delta <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(q, near, best, best_idx);
        if delta * delta <= *best {
            self.search(q, far, best, best_idx);
        }
    }
}

/// Mean nearest-neighbor distance from `a` into `b` and the matching mean
/// normal dissimilarity `(1 - cos theta) / 2`.
fn directed_terms(a: &OrientedPointCloud, b: &OrientedPointCloud, tree_b: &KdTree) -> (f64, f64) {
    let mut dist_sum = 0.0;
    let mut dissim_sum = 0.0;
    for (p, n) in a.points.iter().zip(&a.normals) {
        let j = tree_b.nearest(p);
        dist_sum += (b.points[j] - p).norm();
        // (1 - cos)/2 written as |n - m|^2/4 for unit vectors: exact zero
        // for identical normals.
        dissim_sum += (b.normals[j] - n).norm_squared() / 4.0;
    }
    let n = a.len() as f64;
    (dist_sum / n, dissim_sum / n)
}

/// Symmetric chamfer distance and normal dissimilarity between two clouds.
pub fn chamfer_terms(
    a: &OrientedPointCloud,
    b: &OrientedPointCloud,
) -> Result<(f64, f64), GeomDiagError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeomDiagError::EmptyCloud);
    }
    let tree_a = KdTree::build(&a.points);
    let tree_b = KdTree::build(&b.points);
    let (dist_ab, dissim_ab) = directed_terms(a, b, &tree_b);
    let (dist_ba, dissim_ba) = directed_terms(b, a, &tree_a);
    Ok((
        0.5 * (dist_ab + dist_ba),
        0.5 * (dissim_ab + dissim_ba),
    ))
}

/// Normalized Chamfer-Normal Distance: `chamfer/x + y * dissimilarity`.
pub fn ncnd(
    a: &OrientedPointCloud,
    b: &OrientedPointCloud,
    cfg: &NcndConfig,
) -> Result<f64, GeomDiagError> {
    let (chamfer, dissim) = chamfer_terms(a, b)?;
    Ok(chamfer / cfg.x + cfg.y * dissim)
}

/// Calibrate `x` and `y` from observed pairwise component values so the
/// maximum NCND is 1 with equal 0.5 component contributions. Use the union
/// of every dataset being compared so one set of constants serves all
/// plots.
pub fn calibrate_xy(
    chamfer_values: &[f64],
    dissim_values: &[f64],
    n_points: usize,
) -> Result<NcndConfig, GeomDiagError> {
    let max_chamfer = chamfer_values.iter().fold(0.0f64, |m, &v| m.max(v));
    let max_dissim = dissim_values.iter().fold(0.0f64, |m, &v| m.max(v));
    if chamfer_values.is_empty() || max_chamfer == 0.0 {
        return Err(GeomDiagError::ZeroCalibrationMax("chamfer"));
    }
    if dissim_values.is_empty() || max_dissim == 0.0 {
        return Err(GeomDiagError::ZeroCalibrationMax("dissimilarity"));
    }
    Ok(NcndConfig {
        x: 2.0 * max_chamfer,
        y: 0.5 / max_dissim,
        n_points,
    })
}

/// Full symmetric pairwise matrix with a zero diagonal; the upper triangle
/// is computed once (in parallel) and mirrored.
pub fn pairwise_matrix<T, F>(items: &[T], distance: F) -> Result<Vec<Vec<f64>>, GeomDiagError>
where
    T: Sync,
    F: Fn(&T, &T) -> f64 + Sync,
{
    let n = items.len();
    if n < 2 {
        return Err(GeomDiagError::TooFewItems(n));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| distance(&items[i], &items[j]))
        .collect();
    let mut matrix = vec![vec![0.0; n]; n];
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        matrix[i][j] = v;
        matrix[j][i] = v;
    }
    Ok(matrix)
}

/// Nearest-neighbor field baseline: each test sample is predicted by the
/// true field of its geometrically closest training sample (ties break to
/// the lowest training index); returns the relative L2 error in percent.
pub fn nn_field_baseline<F>(
    train: &[SampleRecord],
    test: &[SampleRecord],
    geo_distance: F,
) -> Result<f64, GeomDiagError>
where
    F: Fn(usize, usize) -> f64,
{
    if train.is_empty() {
        return Err(GeomDiagError::EmptyTrainSet);
    }
    let mut predicted = Vec::with_capacity(test.len());
    for (ti, t) in test.iter().enumerate() {
        let mut best = f64::INFINITY;
        let mut best_j = 0usize;
        for j in 0..train.len() {
            let d = geo_distance(ti, j);
            if d < best {
                best = d;
                best_j = j;
            }
        }
        let mut rec = t.clone();
        rec.field_pred = train[best_j].field_true.clone();
        predicted.push(rec);
    }
    let refs: Vec<&SampleRecord> = predicted.iter().collect();
    Ok(relative_l2(&refs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldTag, Roi, VoxelGrid};
    use crate::mesh::primitives::{box_mesh, icosphere, plate};

    #[test]
    fn fps_single_point_is_farthest_from_centroid() {
        let mesh = icosphere(Point3::origin(), 1.0, 2);
        let n = 1;
        let candidates = default_candidate_count(n);
        let cloud = fps_with_candidates(&mesh, n, candidates, 7).unwrap();
        assert_eq!(cloud.len(), 1);
        assert!((cloud.normals[0].norm() - 1.0).abs() < 1e-6);
        // Must be the candidate farthest from the candidate centroid.
        let pool = sample_surface(&mesh, candidates, 7).unwrap();
        let mut centroid = Vector3::zeros();
        for p in &pool.points {
            centroid += p.coords;
        }
        centroid /= pool.len() as f64;
        let far = pool
            .points
            .iter()
            .map(|p| (p.coords - centroid).norm_squared())
            .fold(0.0f64, f64::max);
        assert!(
            ((cloud.points[0].coords - centroid).norm_squared() - far).abs() < 1e-15,
            "not the farthest candidate"
        );
    }

    #[test]
    fn fps_two_points_on_sphere_are_near_antipodal() {
        let mesh = icosphere(Point3::origin(), 1.0, 3);
        let cloud = farthest_point_sample(&mesh, 2, 99).unwrap();
        let a = cloud.points[0].coords.normalize();
        let b = cloud.points[1].coords.normalize();
        let angle = a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle > 150.0, "angle {angle}");
    }

    #[test]
    fn fps_beats_random_subsets_on_min_pairwise_distance() {
        let mesh = icosphere(Point3::origin(), 1.0, 3);
        let n = 24;
        let candidates = 512;
        let fps = fps_with_candidates(&mesh, n, candidates, 5).unwrap();
        let min_pairwise = |pts: &[Point3<f64>]| {
            let mut m = f64::INFINITY;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    m = m.min((pts[i] - pts[j]).norm());
                }
            }
            m
        };
        let fps_min = min_pairwise(&fps.points);
        // Random n-subsets of the same candidate pool never beat FPS here.
        let pool = sample_surface(&mesh, candidates, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..20 {
            let mut idx: Vec<usize> = (0..candidates).collect();
            for i in (1..idx.len()).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            let subset: Vec<Point3<f64>> = idx[..n].iter().map(|&i| pool.points[i]).collect();
            assert!(min_pairwise(&subset) <= fps_min + 1e-12);
        }
    }

    #[test]
    fn fps_is_deterministic_and_validates_budget() {
        let mesh = icosphere(Point3::origin(), 1.0, 2);
        let a = farthest_point_sample(&mesh, 16, 3).unwrap();
        let b = farthest_point_sample(&mesh, 16, 3).unwrap();
        assert_eq!(a.points, b.points);
        let c = farthest_point_sample(&mesh, 16, 4).unwrap();
        assert_ne!(a.points, c.points);
        assert!(matches!(
            fps_with_candidates(&mesh, 100, 50, 0),
            Err(GeomDiagError::NotEnoughCandidates { .. })
        ));
    }

    #[test]
    fn align_geometry_properties() {
        let mesh = box_mesh(Point3::new(4.0, -2.0, 7.0), Vector3::new(1.0, 0.5, 0.25));
        let aligned = align_geometry(&mesh);
        let c = aligned.vertex_centroid();
        assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12);
        let min_z = aligned.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        assert!(min_z.abs() < 1e-12);
        // Centroid z = half the box height once the base is grounded.
        assert!((c.z - 0.25).abs() < 1e-12);

        // Idempotence.
        let again = align_geometry(&aligned);
        for (a, b) in again.vertices.iter().zip(&aligned.vertices) {
            assert!((a - b).norm() < 1e-12);
        }

        // Translation invariance.
        let mut shifted = mesh.clone();
        shifted.translate(Vector3::new(-13.0, 5.5, 2.25));
        let aligned2 = align_geometry(&shifted);
        for (a, b) in aligned2.vertices.iter().zip(&aligned.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_cube_scale_properties() {
        let mesh = box_mesh(Point3::new(3.0, 3.0, 3.0), Vector3::new(1.0, 0.5, 0.5));
        let scaled = unit_cube_scale(&mesh).unwrap();
        let (lo, hi) = scaled.bounding_box();
        assert!((hi.x - lo.x - 1.0).abs() < 1e-12);
        assert!((hi.y - lo.y - 0.5).abs() < 1e-12);
        assert!((hi.z - lo.z - 0.5).abs() < 1e-12);

        // Idempotence.
        let again = unit_cube_scale(&scaled).unwrap();
        for (a, b) in again.vertices.iter().zip(&scaled.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn kd_tree_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let points: Vec<Point3<f64>> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let tree = KdTree::build(&points);
        for _ in 0..200 {
            let q = Point3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let brute = points
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - q).norm_squared().total_cmp(&(*b - q).norm_squared())
                })
                .unwrap()
                .0;
            let got = tree.nearest(&q);
            assert!(
                ((points[got] - q).norm() - (points[brute] - q).norm()).abs() < 1e-12,
                "kd {got} vs brute {brute}"
            );
        }
    }

    fn cloud(points: Vec<Point3<f64>>, normal: Vector3<f64>) -> OrientedPointCloud {
        let n = points.len();
        OrientedPointCloud {
            points,
            normals: vec![normal; n],
        }
    }

    #[test]
    fn ncnd_identity_is_zero_and_symmetric() {
        let mesh = icosphere(Point3::origin(), 1.0, 2);
        let a = farthest_point_sample(&mesh, 64, 3).unwrap();
        let cfg = NcndConfig {
            x: 0.7,
            y: 0.9,
            n_points: 64,
        };
        assert_eq!(ncnd(&a, &a, &cfg).unwrap(), 0.0);

        let mesh_b = icosphere(Point3::new(0.3, 0.0, 0.0), 0.8, 2);
        let b = farthest_point_sample(&mesh_b, 64, 4).unwrap();
        let ab = ncnd(&a, &b, &cfg).unwrap();
        let ba = ncnd(&b, &a, &cfg).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0);
    }

    #[test]
    fn ncnd_flipped_normals_cost_exactly_y() {
        let pts: Vec<Point3<f64>> = (0..32)
            .map(|i| Point3::new(i as f64 * 0.1, (i % 5) as f64 * 0.2, 0.0))
            .collect();
        let a = cloud(pts.clone(), Vector3::new(0.0, 0.0, 1.0));
        let b = cloud(pts, Vector3::new(0.0, 0.0, -1.0));
        let cfg = NcndConfig {
            x: 2.0,
            y: 0.35,
            n_points: 32,
        };
        // Chamfer 0, dissimilarity (1 - (-1))/2 = 1 -> ncnd = y.
        let v = ncnd(&a, &b, &cfg).unwrap();
        assert!((v - 0.35).abs() < 1e-12);
    }

    #[test]
    fn ncnd_parallel_plates_measure_gap() {
        // Matching grids of points on two parallel planes distance d apart,
        // same normals: chamfer = d exactly (verified by brute force on
        // these small sets elsewhere), dissimilarity = 0.
        let d = 0.37;
        let make = |z: f64| -> Vec<Point3<f64>> {
            let mut pts = Vec::new();
            for i in 0..8 {
                for j in 0..8 {
                    pts.push(Point3::new(i as f64 * 0.125, j as f64 * 0.125, z));
                }
            }
            pts
        };
        let a = cloud(make(0.0), Vector3::new(0.0, 0.0, 1.0));
        let b = cloud(make(d), Vector3::new(0.0, 0.0, 1.0));
        // Brute-force check of the chamfer term.
        let (chamfer, dissim) = chamfer_terms(&a, &b).unwrap();
        assert!((chamfer - d).abs() < 1e-12);
        assert_eq!(dissim, 0.0);
        let cfg = NcndConfig {
            x: 2.0 * d,
            y: 1.0,
            n_points: 64,
        };
        assert!((ncnd(&a, &b, &cfg).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ncnd_translation_invariance() {
        let mesh_a = icosphere(Point3::origin(), 1.0, 2);
        let mesh_b = box_mesh(Point3::origin(), Vector3::new(0.8, 0.6, 0.5));
        let cfg = NcndConfig::default();
        let a1 = farthest_point_sample(&mesh_a, 48, 1).unwrap();
        let b1 = farthest_point_sample(&mesh_b, 48, 2).unwrap();
        let v1 = ncnd(&a1, &b1, &cfg).unwrap();

        let offset = Vector3::new(5.0, -3.0, 2.0);
        let mut ma = mesh_a.clone();
        let mut mb = mesh_b.clone();
        ma.translate(offset);
        mb.translate(offset);
        let a2 = farthest_point_sample(&ma, 48, 1).unwrap();
        let b2 = farthest_point_sample(&mb, 48, 2).unwrap();
        let v2 = ncnd(&a2, &b2, &cfg).unwrap();
        assert!((v1 - v2).abs() < 1e-9);
    }

    #[test]
    fn calibrate_xy_formula_and_guards() {
        let cfg = calibrate_xy(&[0.1, 0.4, 0.2], &[0.8, 0.5], 100).unwrap();
        assert!((cfg.x - 0.8).abs() < 1e-15);
        assert!((cfg.y - 0.625).abs() < 1e-15);
        // The pair achieving both maxima scores exactly 1.
        assert!((0.4 / cfg.x + cfg.y * 0.8 - 1.0).abs() < 1e-12);

        assert!(matches!(
            calibrate_xy(&[0.0, 0.0], &[0.5], 10),
            Err(GeomDiagError::ZeroCalibrationMax("chamfer"))
        ));
        assert!(matches!(
            calibrate_xy(&[0.5], &[0.0], 10),
            Err(GeomDiagError::ZeroCalibrationMax("dissimilarity"))
        ));
    }

    #[test]
    fn pairwise_matrix_shape_and_symmetry() {
        let items = vec![0.0, 1.0, 3.5];
        let m = pairwise_matrix(&items, |a: &f64, b: &f64| (a - b).abs()).unwrap();
        for i in 0..3 {
            assert_eq!(m[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        assert_eq!(m[0][2], 3.5);
        assert!(matches!(
            pairwise_matrix(&[1.0], |a: &f64, b: &f64| a + b),
            Err(GeomDiagError::TooFewItems(1))
        ));

        let two = vec![0.5, 0.5];
        let m = pairwise_matrix(&two, |a: &f64, b: &f64| (a - b).abs()).unwrap();
        assert_eq!(m, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    fn field_sample(id: &str, values: Vec<f64>) -> SampleRecord {
        let roi = Roi::new([0.0; 3], [1.0; 3]).unwrap();
        let n = values.len();
        let mut rec = SampleRecord::new("toy", id, 0.3, 0.3);
        rec.field_true =
            Some(VoxelGrid::from_data([n, 1, 1], 1, roi, FieldTag::Velocity, values).unwrap());
        rec
    }

    #[test]
    fn nn_baseline_exact_match_contributes_zero() {
        let train = vec![field_sample("t0", vec![1.0, 2.0]), field_sample("t1", vec![3.0, 4.0])];
        let test = vec![field_sample("q", vec![3.0, 4.0])];
        // Geometry distance says train[1] is closest.
        let err = nn_field_baseline(&train, &test, |_, j| if j == 1 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn nn_baseline_matches_brute_force_on_smooth_family() {
        // Fields vary smoothly in a shape parameter; the baseline must pick
        // the nearest parameter.
        let param = |i: usize| i as f64;
        let make = |p: f64| field_sample(&format!("p{p}"), vec![10.0 + p, 5.0 - 0.5 * p, p * p]);
        let train: Vec<SampleRecord> = (0..5).map(|i| make(param(i) * 2.0)).collect();
        let test: Vec<SampleRecord> = [0.7, 3.2, 6.9].iter().map(|&p| make(p)).collect();
        let test_params = [0.7, 3.2, 6.9];
        let train_params: Vec<f64> = (0..5).map(|i| param(i) * 2.0).collect();

        let err = nn_field_baseline(&train, &test, |ti, j| {
            (test_params[ti] - train_params[j]).abs()
        })
        .unwrap();

        // Brute force: nearest parameter prediction.
        let mut expected_records = Vec::new();
        for (ti, t) in test.iter().enumerate() {
            let j = train_params
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - test_params[ti]).abs().total_cmp(&(*b - test_params[ti]).abs())
                })
                .unwrap()
                .0;
            let mut rec = t.clone();
            rec.field_pred = train[j].field_true.clone();
            expected_records.push(rec);
        }
        let refs: Vec<&SampleRecord> = expected_records.iter().collect();
        let expected = relative_l2(&refs).unwrap();
        assert!((err - expected).abs() < 1e-12);
    }

    #[test]
    fn nn_baseline_single_train_sample() {
        let train = vec![field_sample("t0", vec![1.0, 0.0])];
        let test = vec![
            field_sample("a", vec![1.0, 0.0]),
            field_sample("b", vec![2.0, 0.0]),
        ];
        let err = nn_field_baseline(&train, &test, |_, _| 0.0).unwrap();
        // Sample a: 0%; sample b: |2-1|/2 = 50%; mean 25%.
        assert!((err - 25.0).abs() < 1e-9);

        assert!(matches!(
            nn_field_baseline(&[], &test, |_, _| 0.0),
            Err(GeomDiagError::EmptyTrainSet)
        ));
    }

    #[test]
    fn plate_family_calibration_reaches_exactly_one() {
        // Ten plates, translated and rotated progressively: the most
        // separated pair attains both component maxima, so the calibrated
        // maximum NCND is exactly 1.
        let meshes: Vec<TriangleMesh> = (0..10)
            .map(|i| {
                let angle = std::f64::consts::PI * i as f64 / 9.0;
                let u = Vector3::new(1.0, 0.0, 0.0);
                let v = Vector3::new(0.0, angle.cos(), angle.sin());
                plate(Point3::new(i as f64 * 2.0, 0.0, 0.0), u, v)
            })
            .collect();
        let clouds: Vec<OrientedPointCloud> = meshes
            .iter()
            .map(|m| farthest_point_sample(m, 128, 11).unwrap())
            .collect();
        let mut chamfers = Vec::new();
        let mut dissims = Vec::new();
        for i in 0..clouds.len() {
            for j in (i + 1)..clouds.len() {
                let (c, d) = chamfer_terms(&clouds[i], &clouds[j]).unwrap();
                chamfers.push(c);
                dissims.push(d);
            }
        }
        let cfg = calibrate_xy(&chamfers, &dissims, 128).unwrap();
        let mut max_ncnd = 0.0f64;
        for i in 0..clouds.len() {
            for j in (i + 1)..clouds.len() {
                let v = ncnd(&clouds[i], &clouds[j], &cfg).unwrap();
                assert!((0.0..=1.0 + 1e-9).contains(&v));
                max_ncnd = max_ncnd.max(v);
            }
        }
        assert!((max_ncnd - 1.0).abs() < 1e-9, "max {max_ncnd}");
    }
}
