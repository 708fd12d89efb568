//! Synthetic cohorts with planted ground truth.
//!
//! The base surface is a subdivided icosahedron projected onto a sphere,
//! ellipsoid or superellipsoid and rescaled to a fixed surface area. It is
//! exactly mirror symmetric across `x = 0`: every vertex has a partner whose
//! coordinates are bitwise `(-x, y, z)`.
//!
//! Each shape is
//!
//! ```text
//! base + sum_k z_ik sqrt(lambda_k) mode_k + shift (group B) + asymmetry + noise
//! ```
//!
//! followed by an optional random similarity transform. Modes are smooth
//! normal displacements built from low-order polynomials of the sphere
//! direction, with the similarity directions at the base projected out and
//! then orthonormalized in the area-weighted inner product.

use std::collections::HashMap;

use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::mesh::{AreaWeights, BilateralPairing, ShapeSample, SurfaceMesh, Triangle};
use crate::registration::SimilarityTransform;
use crate::rng::SeededRng;
use crate::Points;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseShape {
    Sphere,
    Ellipsoid { axes: [f64; 3] },
    /// `|x/a|^e + |y/b|^e + |z/c|^e = 1`.
    Superellipsoid { axes: [f64; 3], exponent: f64 },
}

impl Default for BaseShape {
    fn default() -> Self {
        Self::Ellipsoid {
            axes: [1.0, 1.25, 0.8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupShift {
    /// Planted mode (1-based) along which group B is displaced.
    pub mode: usize,
    /// Displacement in standard deviations of that mode.
    pub magnitude_sd: f64,
}

/// A Gaussian bump of normal displacement centred off the symmetry plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryField {
    pub amplitude: f64,
    /// Direction on the unit sphere of the bump centre.
    pub center: [f64; 3],
    pub width: f64,
}

impl Default for AsymmetryField {
    fn default() -> Self {
        Self {
            amplitude: 0.02,
            center: [0.6, 0.3, 0.74],
            width: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    /// Rotation angle drawn uniformly from `[0, max_rotation]` radians about
    /// a uniformly random axis.
    pub max_rotation: f64,
    /// Each translation coordinate uniform in `[-t, t]`.
    pub max_translation: f64,
    /// Log-scale uniform in `[-ln s, ln s]`.
    pub max_scale: f64,
}

impl Default for Nuisance {
    fn default() -> Self {
        Self {
            max_rotation: std::f64::consts::PI,
            max_translation: 1.0,
            max_scale: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub base: BaseShape,
    pub subdivisions: u32,
    /// Surface area of the base mesh.
    pub area: f64,
    /// Planted eigenvalues, strictly decreasing; one mode per entry.
    pub spectrum: Vec<f64>,
    pub n_a: usize,
    pub n_b: usize,
    pub group_shift: Option<GroupShift>,
    pub asymmetry: Option<AsymmetryField>,
    pub noise_sd: f64,
    pub nuisance: Option<Nuisance>,
    /// Centre the planted scores and make their sample covariance exactly
    /// the identity, so the planted spectrum is the sample spectrum.
    pub whiten_scores: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            base: BaseShape::default(),
            subdivisions: 2,
            area: 1.0,
            spectrum: vec![5e-4, 3e-4, 1e-4, 5e-5, 1e-5],
            n_a: 15,
            n_b: 15,
            group_shift: None,
            asymmetry: None,
            noise_sd: 0.0,
            nuisance: None,
            whiten_scores: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ShapeError::InvalidArgument(m));
        if self.subdivisions < 2 {
            return bad(format!("subdivisions must be at least 2, got {}", self.subdivisions));
        }
        if self.subdivisions > 7 {
            return bad(format!("subdivisions above 7 are not supported, got {}", self.subdivisions));
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return bad("area must be positive".into());
        }
        if self.spectrum.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("spectrum entries must be positive".into());
        }
        if self.spectrum.windows(2).any(|w| w[1] >= w[0]) {
            return bad("spectrum must be strictly decreasing".into());
        }
        if self.spectrum.len() > MODE_FIELDS.len() {
            return bad(format!("at most {} planted modes are available", MODE_FIELDS.len()));
        }
        let n = self.n_a + self.n_b;
        if n == 0 {
            return bad("cohort is empty".into());
        }
        if self.whiten_scores && n <= self.spectrum.len() {
            return bad(format!(
                "whitening {} modes needs more than {} shapes",
                self.spectrum.len(),
                self.spectrum.len()
            ));
        }
        if let Some(shift) = self.group_shift {
            if shift.mode == 0 || shift.mode > self.spectrum.len() {
                return bad(format!("group shift mode {} is not a planted mode", shift.mode));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be non-negative".into());
        }
        if let Some(a) = self.asymmetry {
            if !(a.width > 0.0) || Vector3::from(a.center).norm() == 0.0 {
                return bad("asymmetry field needs a positive width and a nonzero centre".into());
            }
        }
        if let Some(n) = self.nuisance {
            if !(n.max_scale >= 1.0) || n.max_rotation < 0.0 || n.max_translation < 0.0 {
                return bad("nuisance ranges must be non-negative with max_scale >= 1".into());
            }
        }
        match self.base {
            BaseShape::Sphere => {}
            BaseShape::Ellipsoid { axes } | BaseShape::Superellipsoid { axes, .. } => {
                if axes.iter().any(|&a| !(a > 0.0)) {
                    return bad("base axes must be positive".into());
                }
            }
        }
        if let BaseShape::Superellipsoid { exponent, .. } = self.base {
            if !(exponent > 0.0) {
                return bad("superellipsoid exponent must be positive".into());
            }
        }
        Ok(())
    }
}

/// Vertex count of an icosphere after `r` subdivisions.
pub fn icosphere_vertex_count(r: u32) -> usize {
    10 * 4usize.pow(r) + 2
}

pub fn icosphere_triangle_count(r: u32) -> usize {
    20 * 4usize.pow(r)
}

/// Unit-sphere directions and triangles of a subdivided icosahedron.
fn icosphere(subdivisions: u32) -> (Vec<Vector3<f64>>, Vec<Triangle>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut points: Vec<Vector3<f64>> = raw.iter().map(|p| Vector3::from(*p).normalize()).collect();
    let mut faces: Vec<Triangle> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, points: &mut Vec<Vector3<f64>>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                points.push(((points[a] + points[b]) / 2.0).normalize());
                points.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut points);
            let bc = midpoint(b, c, &mut points);
            let ca = midpoint(c, a, &mut points);
            next.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        faces = next;
    }
    for face in &mut faces {
        let [a, b, c] = *face;
        let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
        if n.dot(&(points[a] + points[b] + points[c])) < 0.0 {
            face.swap(1, 2);
        }
    }
    (points, faces)
}

fn coordinate_key(p: &Vector3<f64>) -> (u64, u64, u64) {
    // Adding 0.0 folds -0.0 into 0.0.
    ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits(), (p.z + 0.0).to_bits())
}

fn mirror_pairing(points: &[Vector3<f64>]) -> Result<BilateralPairing> {
    let index: HashMap<_, _> = points.iter().enumerate().map(|(j, p)| (coordinate_key(p), j)).collect();
    let pair = points
        .iter()
        .map(|p| {
            index
                .get(&coordinate_key(&Vector3::new(-p.x, p.y, p.z)))
                .copied()
                .ok_or_else(|| ShapeError::Degenerate("base surface is not mirror symmetric".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    BilateralPairing::new(pair, Vector3::x())
}

fn embed(u: &Vector3<f64>, base: BaseShape) -> Vector3<f64> {
    match base {
        BaseShape::Sphere => *u,
        BaseShape::Ellipsoid { axes } => Vector3::new(u.x * axes[0], u.y * axes[1], u.z * axes[2]),
        BaseShape::Superellipsoid { axes, exponent } => {
            let rho = ((u.x / axes[0]).abs().powf(exponent)
                + (u.y / axes[1]).abs().powf(exponent)
                + (u.z / axes[2]).abs().powf(exponent))
            .powf(1.0 / exponent);
            u / rho
        }
    }
}

/// The symmetric base surface, its mirror pairing and the unit-sphere
/// direction of every vertex.
pub struct BaseSurface {
    pub mesh: SurfaceMesh,
    pub pairing: BilateralPairing,
    pub directions: Vec<Vector3<f64>>,
}

pub fn synth_base_surface(config: &SynthConfig) -> Result<BaseSurface> {
    config.validate()?;
    let (directions, faces) = icosphere(config.subdivisions);
    let pairing = mirror_pairing(&directions)?;
    let mut vertices = Points::zeros(directions.len(), 3);
    for (j, u) in directions.iter().enumerate() {
        let p = embed(u, config.base);
        vertices[(j, 0)] = p.x;
        vertices[(j, 1)] = p.y;
        vertices[(j, 2)] = p.z;
    }
    let mesh = SurfaceMesh::new(vertices, faces)?;
    let factor = (config.area / mesh.surface_area()).sqrt();
    let mesh = mesh.with_vertices(mesh.vertices() * factor)?;
    Ok(BaseSurface {
        mesh,
        pairing,
        directions,
    })
}

/// Mirror-symmetric base mesh with its exact pairing across `x = 0`.
pub fn synth_base_mesh(config: &SynthConfig) -> Result<(SurfaceMesh, BilateralPairing)> {
    let base = synth_base_surface(config)?;
    Ok((base.mesh, base.pairing))
}

type ModeField = fn(&Vector3<f64>) -> f64;

const MODE_FIELDS: [ModeField; 16] = [
    |u| u.x * u.y,
    |u| u.y * u.z,
    |u| u.x * u.z,
    |u| u.x * u.x - u.y * u.y,
    |u| 3.0 * u.z * u.z - 1.0,
    |u| u.x * u.y * u.z,
    |u| u.z * (u.x * u.x - u.y * u.y),
    |u| u.x * (5.0 * u.z * u.z - 1.0),
    |u| u.y * (5.0 * u.z * u.z - 1.0),
    |u| u.z * (5.0 * u.z * u.z - 3.0),
    |u| u.x * (u.x * u.x - 3.0 * u.y * u.y),
    |u| u.y * (3.0 * u.x * u.x - u.y * u.y),
    |u| u.x * u.y * (u.x * u.x - u.y * u.y),
    |u| u.x * u.z * (7.0 * u.z * u.z - 3.0),
    |u| 35.0 * u.z.powi(4) - 30.0 * u.z * u.z + 3.0,
    |u| (u.x * u.x - u.y * u.y) * (7.0 * u.z * u.z - 1.0),
];

fn inner(a: &Points, b: &Points, w: &AreaWeights) -> f64 {
    (0..a.nrows())
        .map(|j| w[j] * (a[(j, 0)] * b[(j, 0)] + a[(j, 1)] * b[(j, 1)] + a[(j, 2)] * b[(j, 2)]))
        .sum()
}

/// Similarity directions at `base`: translations, infinitesimal rotations
/// and scaling about the weighted centroid.
fn similarity_directions(base: &Points, w: &AreaWeights) -> Vec<Points> {
    let j = base.nrows();
    let mut centroid = Vector3::zeros();
    for v in 0..j {
        centroid += w[v] * Vector3::new(base[(v, 0)], base[(v, 1)], base[(v, 2)]);
    }
    centroid /= w.total_area();
    let mut dirs = Vec::with_capacity(7);
    for c in 0..3 {
        let mut t = Points::zeros(j, 3);
        t.column_mut(c).fill(1.0);
        dirs.push(t);
    }
    for c in 0..3 {
        let axis = Vector3::ith(c, 1.0);
        dirs.push(Points::from_fn(j, 3, |v, d| {
            let p = Vector3::new(base[(v, 0)], base[(v, 1)], base[(v, 2)]) - centroid;
            axis.cross(&p)[d]
        }));
    }
    dirs.push(Points::from_fn(j, 3, |v, d| base[(v, d)] - centroid[d]));
    dirs
}

/// A-orthonormal planted modes, orthogonal to every similarity direction.
fn planted_modes(base: &BaseSurface, k: usize) -> Result<Vec<Points>> {
    let w = base.mesh.vertex_areas()?;
    let normals = base.mesh.vertex_normals()?;
    let mut basis: Vec<Points> = Vec::new();
    for d in similarity_directions(base.mesh.vertices(), &w) {
        gram_schmidt_push(&mut basis, d, &w);
    }
    let fixed = basis.len();
    for field in MODE_FIELDS.iter().take(k) {
        let candidate = Points::from_fn(base.mesh.n_vertices(), 3, |v, d| {
            field(&base.directions[v]) * normals[v][d]
        });
        if !gram_schmidt_push(&mut basis, candidate, &w) {
            return Err(ShapeError::Degenerate("planted mode is degenerate on the base".into()));
        }
    }
    Ok(basis.split_off(fixed))
}

fn gram_schmidt_push(basis: &mut Vec<Points>, mut v: Points, w: &AreaWeights) -> bool {
    let start = inner(&v, &v, w).sqrt();
    // Two passes keep the result orthogonal to machine precision.
    for _ in 0..2 {
        for b in basis.iter() {
            let c = inner(&v, b, w);
            v -= b * c;
        }
    }
    let norm = inner(&v, &v, w).sqrt();
    if !(norm > 1e-8 * start) {
        return false;
    }
    basis.push(v / norm);
    true
}

fn planted_scores(rng: &mut SeededRng, n: usize, k: usize, whiten: bool) -> DMatrix<f64> {
    let mut z = DMatrix::from_fn(n, k, |_, _| rng.normal());
    if whiten && k > 0 {
        for mut col in z.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        let q = z.clone().qr().q();
        z = q * ((n - 1) as f64).sqrt();
    }
    z
}

fn random_similarity(rng: &mut SeededRng, nuisance: &Nuisance) -> SimilarityTransform {
    let axis = loop {
        let a = Vector3::new(rng.normal(), rng.normal(), rng.normal());
        if a.norm() > 1e-12 {
            break Unit::new_normalize(a);
        }
    };
    let angle = rng.uniform_range(0.0, nuisance.max_rotation);
    let rotation: Matrix3<f64> = Rotation3::from_axis_angle(&axis, angle).into_inner();
    let ls = nuisance.max_scale.ln();
    let scale = rng.uniform_range(-ls, ls).exp();
    let t = nuisance.max_translation;
    let translation = Vector3::new(
        rng.uniform_range(-t, t),
        rng.uniform_range(-t, t),
        rng.uniform_range(-t, t),
    );
    SimilarityTransform {
        scale,
        rotation,
        translation,
    }
}

fn asymmetry_displacement(base: &BaseSurface, field: &AsymmetryField) -> Result<Points> {
    let normals = base.mesh.vertex_normals()?;
    let c = Vector3::from(field.center).normalize();
    Ok(Points::from_fn(base.mesh.n_vertices(), 3, |v, d| {
        let r2 = (base.directions[v] - c).norm_squared();
        field.amplitude * (-r2 / (2.0 * field.width * field.width)).exp() * normals[v][d]
    }))
}

/// Every random draw and derived field behind a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub base: Points,
    /// `J x 3` planted modes, A-orthonormal on the base.
    pub modes: Vec<Points>,
    /// `n x K` standardized mode scores.
    pub scores: DMatrix<f64>,
    /// 0 for group A, 1 for group B.
    pub groups: Vec<usize>,
    pub shift: Option<Points>,
    pub asymmetry: Option<Points>,
    pub noise: Vec<Points>,
    pub transforms: Vec<SimilarityTransform>,
}

/// Generate a cohort; shapes are named `shape_000`, `shape_001`, ... with
/// group A first, and labelled `A`/`B` when group B is non-empty.
pub fn synth_cohort(config: &SynthConfig) -> Result<(ShapeSample, GroundTruth)> {
    let base = synth_base_surface(config)?;
    let k = config.spectrum.len();
    let modes = planted_modes(&base, k)?;
    let n = config.n_a + config.n_b;
    let mut rng = SeededRng::new(config.seed);
    let scores = planted_scores(&mut rng, n, k, config.whiten_scores);
    let groups: Vec<usize> = (0..n).map(|i| usize::from(i >= config.n_a)).collect();
    let shift = config
        .group_shift
        .map(|s| &modes[s.mode - 1] * (s.magnitude_sd * config.spectrum[s.mode - 1].sqrt()));
    let asymmetry = config
        .asymmetry
        .as_ref()
        .map(|f| asymmetry_displacement(&base, f))
        .transpose()?;

    let j = base.mesh.n_vertices();
    let mut meshes = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    let mut transforms = Vec::with_capacity(n);
    for i in 0..n {
        let mut shape = base.mesh.vertices().clone();
        for (m, mode) in modes.iter().enumerate() {
            shape += mode * (scores[(i, m)] * config.spectrum[m].sqrt());
        }
        if let (Some(s), 1) = (&shift, groups[i]) {
            shape += s;
        }
        if let Some(a) = &asymmetry {
            shape += a;
        }
        let eps = if config.noise_sd > 0.0 {
            Points::from_fn(j, 3, |_, _| config.noise_sd * rng.normal())
        } else {
            Points::zeros(j, 3)
        };
        shape += &eps;
        noise.push(eps);
        let t = match &config.nuisance {
            Some(nu) => random_similarity(&mut rng, nu),
            None => SimilarityTransform::identity(),
        };
        if config.nuisance.is_some() {
            shape = t.apply(&shape);
        }
        transforms.push(t);
        meshes.push(base.mesh.with_vertices(shape)?);
    }
    let names = (0..n).map(|i| format!("shape_{i:03}")).collect();
    let mut sample = ShapeSample::with_names(meshes, names)?.with_pairing(base.pairing.clone())?;
    if config.n_b > 0 {
        sample = sample.with_labels(groups.iter().map(|&g| ["A", "B"][g].to_string()).collect())?;
    }
    let truth = GroundTruth {
        config: config.clone(),
        base: base.mesh.vertices().clone(),
        modes,
        scores,
        groups,
        shift,
        asymmetry,
        noise,
        transforms,
    };
    Ok((sample, truth))
}
