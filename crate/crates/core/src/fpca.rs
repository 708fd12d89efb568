//! Functional principal components under the area-weighted inner product
//! `<u, v>_A = sum_j a_j (u_j . v_j)`, where the sum runs over the three
//! coordinate slots of every vertex.
//!
//! The weighted problem is mapped onto an ordinary PCA by scaling each slot
//! of vertex `j` by `sqrt(a_j)`; eigenvectors are unscaled afterwards so that
//! they are orthonormal under `<., .>_A`. When there are fewer samples than
//! coordinates the eigenproblem is solved on the `n x n` Gram matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::mesh::AreaWeights;
use crate::registration::{tangent_coordinates, unvec, vec_shape, GpaResult};
use crate::rng::SeededRng;
use crate::Points;

/// How many components to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentRule {
    Fixed(usize),
    /// Smallest K whose cumulative explained-variance fraction reaches the
    /// threshold.
    VarianceFraction(f64),
}

impl Default for ComponentRule {
    fn default() -> Self {
        ComponentRule::VarianceFraction(0.80)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpcaModel {
    mean: Points,
    weights: AreaWeights,
    eigenfunctions: Vec<DVector<f64>>,
    eigenvalues: Vec<f64>,
    explained: Vec<f64>,
    total_variance: f64,
    n_samples: usize,
    warnings: Vec<String>,
}

/// Weighted inner product of two `3J` vectors.
pub fn a_inner(u: &DVector<f64>, v: &DVector<f64>, weights: &AreaWeights) -> f64 {
    let j = weights.len();
    debug_assert_eq!(u.len(), 3 * j);
    let mut acc = 0.0;
    for k in 0..3 * j {
        acc += weights[k % j] * u[k] * v[k];
    }
    acc
}

pub fn a_norm(u: &DVector<f64>, weights: &AreaWeights) -> f64 {
    a_inner(u, u, weights).sqrt()
}

/// Flip `v` so its entry of largest magnitude is positive (first such entry
/// on ties).
fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k].abs() > v[best].abs() {
            best = k;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Eigenpairs of `Z^T Z / (n - 1)` sorted by decreasing eigenvalue, via the
/// Gram matrix when `Z` is wide. Eigenvectors are unit length in the scaled
/// space; eigenvalues are clipped at zero.
pub(crate) fn scaled_eigen(z: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let n = z.nrows();
    let dim = z.ncols();
    let denom = (n as f64 - 1.0).max(1.0);
    let mut pairs: Vec<(f64, DVector<f64>)> = if dim > n {
        let gram = (z * z.transpose()) / denom;
        let eig = SymmetricEigen::new(gram);
        (0..n)
            .map(|i| {
                let lambda = eig.eigenvalues[i].max(0.0);
                let mut f = z.transpose() * eig.eigenvectors.column(i);
                let norm = f.norm();
                if norm > 0.0 {
                    f /= norm;
                }
                (lambda, f)
            })
            .collect()
    } else {
        let cov = (z.transpose() * z) / denom;
        let eig = SymmetricEigen::new(cov);
        (0..dim)
            .map(|i| (eig.eigenvalues[i].max(0.0), eig.eigenvectors.column(i).into_owned()))
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.into_iter().unzip()
}

/// Multiply slot `k` of every row by `sqrt(a_{k mod J})`.
pub(crate) fn scale_rows(data: &DMatrix<f64>, weights: &AreaWeights) -> DMatrix<f64> {
    let j = weights.len();
    let mut z = data.clone();
    for k in 0..3 * j {
        let s = weights[k % j].sqrt();
        z.column_mut(k).scale_mut(s);
    }
    z
}

pub(crate) fn unscale(f: &DVector<f64>, weights: &AreaWeights) -> DVector<f64> {
    let j = weights.len();
    DVector::from_fn(f.len(), |k, _| f[k] / weights[k % j].sqrt())
}

/// Fit an area-weighted PCA to tangent coordinates (rows `vec(X_i - X_ref)`).
///
/// `reference` is the shape the tangent coordinates are measured from; the
/// model mean is `reference` plus the average tangent row.
pub fn fit_fpca(
    reference: &Points,
    tangent: &DMatrix<f64>,
    weights: &AreaWeights,
    rule: ComponentRule,
) -> Result<FpcaModel> {
    let n = tangent.nrows();
    let j = weights.len();
    if n < 2 {
        return Err(ShapeError::InvalidArgument(
            "principal components need at least 2 samples".into(),
        ));
    }
    if tangent.ncols() != 3 * j || reference.nrows() != j || reference.ncols() != 3 {
        return Err(ShapeError::Correspondence(format!(
            "tangent rows have {} entries, reference has {} vertices, weights {}",
            tangent.ncols(),
            reference.nrows(),
            j
        )));
    }
    if weights.as_slice().iter().any(|&w| w <= 0.0) {
        return Err(ShapeError::InvalidArgument(
            "principal components need strictly positive area weights".into(),
        ));
    }

    let row_mean: DVector<f64> = DVector::from_fn(3 * j, |k, _| tangent.column(k).mean());
    let mut centered = tangent.clone();
    for mut row in centered.row_iter_mut() {
        row -= row_mean.transpose();
    }
    let z = scale_rows(&centered, weights);
    let total_variance = z.norm_squared() / (n as f64 - 1.0);
    let (values, vectors) = scaled_eigen(&z);

    let lambda_max = values.first().copied().unwrap_or(0.0);
    let rank_tol = 1e-12 * lambda_max.max(f64::MIN_POSITIVE);
    let rank = values
        .iter()
        .take(n - 1)
        .take_while(|&&l| l > rank_tol)
        .count();
    let cumulative: Vec<f64> = values
        .iter()
        .scan(0.0, |acc, &l| {
            *acc += l;
            Some(if total_variance > 0.0 {
                *acc / total_variance
            } else {
                0.0
            })
        })
        .collect();

    let mut warnings = Vec::new();
    let requested = match rule {
        ComponentRule::Fixed(0) => {
            return Err(ShapeError::InvalidArgument(
                "component count must be positive".into(),
            ))
        }
        ComponentRule::Fixed(k) => k,
        ComponentRule::VarianceFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ShapeError::InvalidArgument(format!(
                    "variance fraction {f} outside (0, 1]"
                )));
            }
            cumulative
                .iter()
                .position(|&c| c >= f - 1e-12)
                .map(|i| i + 1)
                .unwrap_or(rank)
        }
    };
    let k = if requested > rank {
        warnings.push(format!(
            "requested {requested} components but the data have rank {rank}; truncated to {rank}"
        ));
        rank
    } else {
        requested
    };
    if k == 0 {
        return Err(ShapeError::Degenerate(
            "no variation in the sample: all tangent coordinates coincide".into(),
        ));
    }

    let eigenfunctions = vectors
        .iter()
        .take(k)
        .map(|f| {
            let mut e = unscale(f, weights);
            canonical_sign(&mut e);
            e
        })
        .collect();

    Ok(FpcaModel {
        mean: reference + unvec(&row_mean),
        weights: weights.clone(),
        eigenfunctions,
        eigenvalues: values[..k].to_vec(),
        explained: cumulative[..k].to_vec(),
        total_variance,
        n_samples: n,
        warnings,
    })
}

/// PCA on GPA output with weights from the GPA mean surface.
pub fn fit_from_gpa(gpa: &GpaResult, rule: ComponentRule) -> Result<FpcaModel> {
    let tangent = tangent_coordinates(&gpa.aligned, &gpa.mean)?;
    fit_fpca(&gpa.mean, &tangent, &gpa.mean_weights, rule)
}

impl FpcaModel {
    /// Assemble a model from stored parts, checking its invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        mean: Points,
        weights: AreaWeights,
        eigenfunctions: Vec<DVector<f64>>,
        eigenvalues: Vec<f64>,
        explained: Vec<f64>,
        total_variance: f64,
        n_samples: usize,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let j = weights.len();
        if mean.nrows() != j || mean.ncols() != 3 {
            return Err(ShapeError::InvalidArgument(format!(
                "mean has {} vertices, weights {j}",
                mean.nrows()
            )));
        }
        if eigenfunctions.len() != eigenvalues.len() || explained.len() != eigenvalues.len() {
            return Err(ShapeError::InvalidArgument(
                "eigenfunction, eigenvalue and explained-variance counts differ".into(),
            ));
        }
        if eigenfunctions.iter().any(|e| e.len() != 3 * j) {
            return Err(ShapeError::InvalidArgument(format!(
                "eigenfunctions must have length {}",
                3 * j
            )));
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(ShapeError::InvalidArgument(
                "eigenvalues must be non-negative".into(),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(ShapeError::InvalidArgument(
                "eigenvalues must be non-increasing".into(),
            ));
        }
        Ok(Self {
            mean,
            weights,
            eigenfunctions,
            eigenvalues,
            explained,
            total_variance,
            n_samples,
            warnings,
        })
    }

    pub fn mean(&self) -> &Points {
        &self.mean
    }

    pub fn weights(&self) -> &AreaWeights {
        &self.weights
    }

    pub fn eigenfunctions(&self) -> &[DVector<f64>] {
        &self.eigenfunctions
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Cumulative explained-variance fractions for components `1..=K`.
    pub fn explained(&self) -> &[f64] {
        &self.explained
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.weights.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Keep only the first `k` components.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_components() {
            return Err(ShapeError::InvalidArgument(format!(
                "cannot keep {k} of {} components",
                self.n_components()
            )));
        }
        let mut out = self.clone();
        out.eigenfunctions.truncate(k);
        out.eigenvalues.truncate(k);
        out.explained.truncate(k);
        Ok(out)
    }

    /// Negate eigenfunction `k` (1-based).
    pub fn negate_component(&mut self, k: usize) {
        self.eigenfunctions[k - 1].neg_mut();
    }

    fn check_component(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_components() {
            return Err(ShapeError::InvalidArgument(format!(
                "component {k} outside 1..={}",
                self.n_components()
            )));
        }
        Ok(())
    }

    /// Scores of a tangent vector `vec(shape - mean)`.
    pub fn project(&self, tangent: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_components(),
            self.eigenfunctions
                .iter()
                .map(|e| a_inner(tangent, e, &self.weights)),
        )
    }

    /// `score_k = <vec(shape - mean), e_k>_A`.
    pub fn scores(&self, shape: &Points) -> Result<DVector<f64>> {
        if shape.nrows() != self.n_vertices() || shape.ncols() != 3 {
            return Err(ShapeError::Correspondence(format!(
                "shape has {} vertices, model has {}",
                shape.nrows(),
                self.n_vertices()
            )));
        }
        Ok(self.project(&vec_shape(&(shape - &self.mean))))
    }

    /// One row of scores per shape.
    pub fn score_matrix(&self, shapes: &[Points]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(shapes.len(), self.n_components());
        for (i, s) in shapes.iter().enumerate() {
            out.row_mut(i).copy_from(&self.scores(s)?.transpose());
        }
        Ok(out)
    }

    /// Tangent displacement `sum_k s_k e_k` for the leading `s.len()`
    /// components.
    pub fn displacement(&self, s: &[f64]) -> DVector<f64> {
        let mut d = DVector::zeros(3 * self.n_vertices());
        for (e, &sk) in self.eigenfunctions.iter().zip(s) {
            d.axpy(sk, e, 1.0);
        }
        d
    }

    /// `mean + vec^-1(sum_k s_k e_k)`.
    pub fn reconstruct(&self, s: &[f64]) -> Result<Points> {
        if s.len() > self.n_components() {
            return Err(ShapeError::InvalidArgument(format!(
                "{} scores for a {}-component model",
                s.len(),
                self.n_components()
            )));
        }
        Ok(&self.mean + unvec(&self.displacement(s)))
    }

    /// `mean + c sqrt(lambda_k) vec^-1(e_k)` for 1-based `k`.
    pub fn component_shape(&self, k: usize, c: f64) -> Result<Points> {
        self.check_component(k)?;
        let d = &self.eigenfunctions[k - 1] * (c * self.eigenvalues[k - 1].sqrt());
        Ok(&self.mean + unvec(&d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TourOptions {
    pub components: usize,
    pub n_stops: usize,
    pub frames_per_leg: usize,
    pub seed: u64,
    /// Replace every draw by zero (test hook).
    pub zero_draws: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TourFrame {
    /// Index of the leg this frame belongs to, or of the stop itself.
    pub leg: usize,
    /// Interpolation parameter within the leg; 0 at a stop.
    pub t: f64,
    pub is_stop: bool,
    /// Component scores `z_k sqrt(lambda_k)` of the frame.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Tour {
    pub stops_z: Vec<Vec<f64>>,
    pub frames: Vec<TourFrame>,
    pub shapes: Vec<Points>,
}

/// A seeded random walk through the first `p` components: stops at
/// `mean + sum_k z_k sqrt(lambda_k) e_k` with standard-normal `z`, joined
/// by straight lines in tangent space.
pub fn grand_tour(model: &FpcaModel, options: &TourOptions) -> Result<Tour> {
    let p = options.components;
    if p == 0 || p > model.n_components() {
        return Err(ShapeError::InvalidArgument(format!(
            "tour over {p} components, model has {}",
            model.n_components()
        )));
    }
    if options.n_stops == 0 {
        return Err(ShapeError::InvalidArgument("a tour needs at least one stop".into()));
    }
    let mut rng = SeededRng::new(options.seed);
    let stops_z: Vec<Vec<f64>> = (0..options.n_stops)
        .map(|_| {
            let z = rng.normals(p);
            if options.zero_draws {
                vec![0.0; p]
            } else {
                z
            }
        })
        .collect();
    let sd: Vec<f64> = model.eigenvalues()[..p].iter().map(|l| l.sqrt()).collect();
    let stop_scores: Vec<Vec<f64>> = stops_z
        .iter()
        .map(|z| z.iter().zip(&sd).map(|(z, s)| z * s).collect())
        .collect();

    let mut frames = Vec::new();
    for (i, s) in stop_scores.iter().enumerate() {
        frames.push(TourFrame {
            leg: i,
            t: 0.0,
            is_stop: true,
            scores: s.clone(),
        });
        if let Some(next) = stop_scores.get(i + 1) {
            for f in 1..=options.frames_per_leg {
                let t = f as f64 / (options.frames_per_leg + 1) as f64;
                frames.push(TourFrame {
                    leg: i,
                    t,
                    is_stop: false,
                    scores: s.iter().zip(next).map(|(a, b)| (1.0 - t) * a + t * b).collect(),
                });
            }
        }
    }
    let shapes = frames
        .iter()
        .map(|f| model.reconstruct(&f.scores))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tour {
        stops_z,
        frames,
        shapes,
    })
}

/// Stand-in for `log|det|` at vertices whose covariance is singular:
/// the log of the smallest positive normal double.
pub const SINGULAR_LOG_DET: f64 = -708.396_418_532_264_1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariabilityMap {
    pub values: Vec<f64>,
    /// Vertices whose covariance was singular and carry [`SINGULAR_LOG_DET`].
    pub singular: Vec<usize>,
}

/// Per-vertex `log|det(Sigma_j)|` of the 3x3 covariance of aligned positions.
pub fn variability_map(aligned: &[Points]) -> Result<VariabilityMap> {
    let n = aligned.len();
    if n < 4 {
        return Err(ShapeError::InvalidArgument(format!(
            "variability map needs at least 4 shapes, got {n}"
        )));
    }
    let j = aligned[0].nrows();
    if aligned.iter().any(|s| s.nrows() != j || s.ncols() != 3) {
        return Err(ShapeError::Correspondence(
            "shapes differ in vertex count".into(),
        ));
    }
    let mut values = Vec::with_capacity(j);
    let mut singular = Vec::new();
    for v in 0..j {
        let mut mean = [0.0; 3];
        for s in aligned {
            for c in 0..3 {
                mean[c] += s[(v, c)];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = nalgebra::Matrix3::<f64>::zeros();
        for s in aligned {
            for p in 0..3 {
                for q in 0..3 {
                    cov[(p, q)] += (s[(v, p)] - mean[p]) * (s[(v, q)] - mean[q]);
                }
            }
        }
        cov /= n as f64 - 1.0;
        let det = cov.determinant();
        let scale = (cov.trace() / 3.0).powi(3);
        if !(det > f64::MIN_POSITIVE && det > 1e-12 * scale) {
            singular.push(v);
            values.push(SINGULAR_LOG_DET);
        } else {
            values.push(det.ln());
        }
    }
    Ok(VariabilityMap { values, singular })
}
