//! Area-weighted Procrustes registration.
//!
//! Shapes are `J x 3` row configurations. A similarity transform acts on a
//! configuration `X` as `beta * X * Gamma + 1 gamma^T`, so the rotation
//! multiplies row vectors from the right.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::mesh::{AreaWeights, ShapeSample, SurfaceMesh};
use crate::Points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, shape: &Points) -> Points {
        apply_similarity(shape, self)
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * self.rotation.transpose() * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            translation: -(self.rotation * self.translation) / self.scale,
            rotation,
        }
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &SimilarityTransform) -> Self {
        Self {
            scale: self.scale * first.scale,
            rotation: first.rotation * self.rotation,
            translation: self.scale * self.rotation.transpose() * first.translation
                + self.translation,
        }
    }
}

/// `beta * shape * Gamma + 1 gamma^T`.
pub fn apply_similarity(shape: &Points, t: &SimilarityTransform) -> Points {
    let m = t.rotation * t.scale;
    let mut out = shape * DMatrix::from_column_slice(3, 3, m.as_slice());
    for mut row in out.row_iter_mut() {
        row[0] += t.translation.x;
        row[1] += t.translation.y;
        row[2] += t.translation.z;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpaOptions {
    pub allow_scaling: bool,
    pub allow_reflection: bool,
}

impl Default for OpaOptions {
    fn default() -> Self {
        Self {
            allow_scaling: true,
            allow_reflection: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpaFit {
    pub transform: SimilarityTransform,
    /// The source mapped into the target frame.
    pub fitted: Points,
    /// `sum_j a_j ||y_j - fitted_j||^2`.
    pub residual: f64,
}

fn check_pair(source: &Points, target: &Points, weights: &AreaWeights) -> Result<()> {
    if source.ncols() != 3 || target.ncols() != 3 {
        return Err(ShapeError::InvalidArgument(
            "configurations must have 3 columns".into(),
        ));
    }
    if source.nrows() != target.nrows() || weights.len() != target.nrows() {
        return Err(ShapeError::Correspondence(format!(
            "source has {} vertices, target {}, weights {}",
            source.nrows(),
            target.nrows(),
            weights.len()
        )));
    }
    Ok(())
}

/// Area-weighted centroid.
pub fn weighted_centroid(shape: &Points, weights: &AreaWeights) -> Vector3<f64> {
    let mut c = Vector3::zeros();
    for (j, row) in shape.row_iter().enumerate() {
        c += weights[j] * Vector3::new(row[0], row[1], row[2]);
    }
    c / weights.total_area()
}

fn centered(shape: &Points, centroid: &Vector3<f64>) -> Points {
    let mut out = shape.clone();
    for mut row in out.row_iter_mut() {
        row[0] -= centroid.x;
        row[1] -= centroid.y;
        row[2] -= centroid.z;
    }
    out
}

/// `sum_j a_j ||x_j - y_j||^2`.
pub fn weighted_sq_distance(x: &Points, y: &Points, weights: &AreaWeights) -> f64 {
    (0..x.nrows())
        .map(|j| {
            let d = (0..3).map(|c| (x[(j, c)] - y[(j, c)]).powi(2)).sum::<f64>();
            weights[j] * d
        })
        .sum()
}

/// `X^T A Y` for two `J x 3` configurations.
fn weighted_cross(x: &Points, y: &Points, weights: &AreaWeights) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for j in 0..x.nrows() {
        let a = weights[j];
        for p in 0..3 {
            for q in 0..3 {
                m[(p, q)] += a * x[(j, p)] * y[(j, q)];
            }
        }
    }
    m
}

/// Weighted ordinary Procrustes fit of `source` onto `target`, minimizing
/// `sum_j a_j ||y_j - beta Gamma^T x_j - gamma||^2`.
pub fn weighted_opa(
    source: &Points,
    target: &Points,
    weights: &AreaWeights,
    options: OpaOptions,
) -> Result<OpaFit> {
    check_pair(source, target, weights)?;
    if source == target {
        return Ok(OpaFit {
            transform: SimilarityTransform::identity(),
            fitted: source.clone(),
            residual: 0.0,
        });
    }

    let source_centroid = weighted_centroid(source, weights);
    let target_centroid = weighted_centroid(target, weights);
    let xc = centered(source, &source_centroid);
    let yc = centered(target, &target_centroid);

    // Y^T A X = U S V^T; Gamma = V D U^T maximizes tr(Y^T A X Gamma).
    let cross = weighted_cross(&yc, &xc, weights);
    let svd = cross.svd(true, true);
    let u = svd.u.expect("3x3 SVD with u");
    let v = svd.v_t.expect("3x3 SVD with v_t").transpose();
    let s = svd.singular_values;

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    if !(s[order[0]] > 0.0) || s[order[1]] <= 1e-12 * s[order[0]] {
        return Err(ShapeError::Degenerate(
            "degenerate configuration: weighted cross-product matrix has rank < 2".into(),
        ));
    }

    let mut d = Matrix3::identity();
    if !options.allow_reflection && (v * u.transpose()).determinant() < 0.0 {
        d[(order[2], order[2])] = -1.0;
    }
    let rotation = v * d * u.transpose();

    let scale = if options.allow_scaling {
        let source_ss = weighted_cross(&xc, &xc, weights).trace();
        if !(source_ss > 0.0) {
            return Err(ShapeError::Degenerate(
                "degenerate configuration: source has zero size".into(),
            ));
        }
        (cross * rotation).trace() / source_ss
    } else {
        1.0
    };

    let translation = target_centroid - scale * rotation.transpose() * source_centroid;
    let transform = SimilarityTransform {
        scale,
        rotation,
        translation,
    };
    let fitted = apply_similarity(source, &transform);
    let residual = weighted_sq_distance(target, &fitted, weights);
    Ok(OpaFit {
        transform,
        fitted,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeConstraint {
    /// Mean surface area fixed at 1.
    UnitArea,
    /// Mean surface area fixed at the area of the initial mean.
    InitialMeanArea,
}

impl std::str::FromStr for SizeConstraint {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_area" | "unit-area" => Ok(Self::UnitArea),
            "initial_mean_area" | "initial-mean-area" => Ok(Self::InitialMeanArea),
            other => Err(ShapeError::InvalidArgument(format!(
                "unknown size constraint {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpaOptions {
    pub max_iter: usize,
    /// Relative change of the objective below which iteration stops.
    pub tol: f64,
    pub size_constraint: SizeConstraint,
    pub allow_scaling: bool,
}

impl Default for GpaOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            size_constraint: SizeConstraint::UnitArea,
            allow_scaling: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpaResult {
    pub mean: Points,
    pub aligned: Vec<Points>,
    pub transforms: Vec<SimilarityTransform>,
    pub mean_weights: AreaWeights,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Surface area imposed on the mean.
    pub target_area: f64,
}

/// Centre `shape` at its own area-weighted centroid and rescale it to
/// surface area `target_area`.
fn normalize_mean(template: &SurfaceMesh, shape: &Points, target_area: f64) -> Result<Points> {
    let mesh = template.with_vertices(shape.clone())?;
    let weights = mesh.vertex_areas()?;
    let c = weighted_centroid(shape, &weights);
    let factor = (target_area / weights.total_area()).sqrt();
    Ok(centered(shape, &c) * factor)
}

fn average(shapes: &[Points]) -> Points {
    let mut sum = Points::zeros(shapes[0].nrows(), 3);
    for s in shapes {
        sum += s;
    }
    sum / shapes.len() as f64
}

/// Generalized weighted Procrustes alignment with a surface-area size
/// constraint. Area weights are recomputed from the current mean on every
/// iteration.
pub fn weighted_gpa(sample: &ShapeSample, options: &GpaOptions) -> Result<GpaResult> {
    if sample.len() < 2 {
        return Err(ShapeError::InvalidArgument(
            "generalized Procrustes alignment needs at least 2 shapes".into(),
        ));
    }
    if options.max_iter == 0 {
        return Err(ShapeError::InvalidArgument("max_iter must be positive".into()));
    }
    let template = sample.template();
    let shapes = sample.configurations();
    let opa = OpaOptions {
        allow_scaling: options.allow_scaling,
        allow_reflection: false,
    };

    let target_area = match options.size_constraint {
        SizeConstraint::UnitArea => 1.0,
        SizeConstraint::InitialMeanArea => template.surface_area(),
    };
    let mut mean = normalize_mean(template, &shapes[0], target_area)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut fits: Vec<OpaFit> = Vec::new();

    loop {
        let weights = template.with_vertices(mean.clone())?.vertex_areas()?;
        let candidate = shapes
            .par_iter()
            .map(|x| weighted_opa(x, &mean, &weights, opa))
            .collect::<Result<Vec<_>>>()?;
        let objective: f64 = candidate.iter().map(|f| f.residual).sum();
        let size: f64 = {
            let c = weighted_centroid(&mean, &weights);
            let zero = centered(&mean, &c);
            weighted_sq_distance(&zero, &Points::zeros(zero.nrows(), 3), &weights)
        };
        let floor = 1e-24 * size * shapes.len() as f64;
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            // Recomputing the weights from the new mean can raise the
            // objective slightly; keep the previous fits and stop there.
            if objective > prev {
                converged = true;
                break;
            }
            if objective <= floor || prev - objective <= options.tol * prev {
                converged = true;
            }
        } else if objective <= floor {
            converged = true;
        }
        trace.push(objective);
        fits = candidate;
        if converged || trace.len() >= options.max_iter {
            break;
        }
        let aligned: Vec<Points> = fits.iter().map(|f| f.fitted.clone()).collect();
        mean = normalize_mean(template, &average(&aligned), target_area)?;
    }

    // Finish with mean = average of the aligned shapes, all rescaled together
    // so the size constraint holds exactly.
    let mut aligned: Vec<Points> = fits.iter().map(|f| f.fitted.clone()).collect();
    let mut transforms: Vec<SimilarityTransform> =
        fits.into_iter().map(|f| f.transform).collect();
    let raw_mean = average(&aligned);
    let raw_area = template.with_vertices(raw_mean.clone())?.surface_area();
    if !(raw_area > 0.0) {
        return Err(ShapeError::ZeroArea);
    }
    let factor = (target_area / raw_area).sqrt();
    for (shape, t) in aligned.iter_mut().zip(transforms.iter_mut()) {
        *shape *= factor;
        t.scale *= factor;
        t.translation *= factor;
    }
    let mean = raw_mean * factor;
    let mean_weights = template.with_vertices(mean.clone())?.vertex_areas()?;

    Ok(GpaResult {
        mean,
        aligned,
        transforms,
        mean_weights,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        target_area,
    })
}

/// `vec(X)`: x-coordinates, then y, then z.
pub fn vec_shape(shape: &Points) -> DVector<f64> {
    DVector::from_column_slice(shape.as_slice())
}

/// Inverse of [`vec_shape`].
pub fn unvec(v: &DVector<f64>) -> Points {
    assert!(v.len() % 3 == 0, "vector length must be a multiple of 3");
    Points::from_column_slice(v.len() / 3, 3, v.as_slice())
}

/// Rows `vec(X_i - mean)`, one per shape.
pub fn tangent_coordinates(aligned: &[Points], mean: &Points) -> Result<DMatrix<f64>> {
    let j = mean.nrows();
    let mut out = DMatrix::zeros(aligned.len(), 3 * j);
    for (i, shape) in aligned.iter().enumerate() {
        if shape.nrows() != j || shape.ncols() != 3 {
            return Err(ShapeError::Correspondence(format!(
                "shape {i} is {}x{}, mean is {j}x3",
                shape.nrows(),
                shape.ncols()
            )));
        }
        let d = shape - mean;
        out.row_mut(i).copy_from_slice(d.as_slice());
    }
    Ok(out)
}

/// Square root of the weighted residual after a full similarity fit of
/// `a` onto `b`.
pub fn procrustes_distance(a: &Points, b: &Points, weights: &AreaWeights) -> Result<f64> {
    Ok(weighted_opa(a, b, weights, OpaOptions::default())?
        .residual
        .sqrt())
}
