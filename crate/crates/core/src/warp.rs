//! Exact 3D thin-plate-spline warping.
//!
//! The warp is `y(x) = sum_j phi(|x - x_j|) beta1_j + (1, x^T) beta2` with
//! the 3D biharmonic kernel `phi(z) = -z / (8 pi)`. Coefficients solve the
//! extended system
//!
//! ```text
//! | S   Q | | beta1 |   | Y |
//! | Q^T 0 | | beta2 | = | 0 |,   S_ij = phi(|x_i - x_j|),  Q = (1 X)
//! ```
//!
//! whose lower block forces `1^T beta1 = 0` and `X^T beta1 = 0`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::mesh::SurfaceMesh;
use crate::Points;

/// Source points closer than this are treated as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

pub fn tps_basis(z: f64) -> f64 {
    -z / (8.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpsOptions {
    /// Added to the diagonal of `S`; zero gives exact interpolation.
    pub ridge: f64,
}

impl Default for TpsOptions {
    fn default() -> Self {
        Self { ridge: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpField {
    pub control_points: Points,
    /// `J x 3` non-affine coefficients.
    pub beta1: DMatrix<f64>,
    /// `4 x 3` affine coefficients; row 0 is the translation.
    pub beta2: DMatrix<f64>,
    /// `tr(Y^T B_e Y)`, computed as `tr(Y^T beta1)`.
    pub bending_energy: f64,
    pub bending_energy_per_coordinate: [f64; 3],
}

fn distance(a: &Points, i: usize, b: &Points, j: usize) -> f64 {
    let dx = a[(i, 0)] - b[(j, 0)];
    let dy = a[(i, 1)] - b[(j, 1)];
    let dz = a[(i, 2)] - b[(j, 2)];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn check_sources(source: &Points) -> Result<()> {
    let j = source.nrows();
    if source.ncols() != 3 {
        return Err(ShapeError::InvalidArgument("points must have 3 columns".into()));
    }
    if j < 5 {
        return Err(ShapeError::InvalidArgument(format!(
            "thin-plate spline needs at least 5 control points, got {j}"
        )));
    }
    for a in 0..j {
        for b in (a + 1)..j {
            if distance(source, a, source, b) < DUPLICATE_TOLERANCE {
                return Err(ShapeError::Singular(format!(
                    "duplicate source points {a} and {b}: extended system is singular"
                )));
            }
        }
    }
    let centroid = source.row_mean();
    let mut centered = source.clone();
    for mut row in centered.row_iter_mut() {
        row -= &centroid;
    }
    let sv = centered.singular_values();
    if !(sv.min() > 1e-10 * sv.max()) {
        return Err(ShapeError::Degenerate(
            "coplanar source points: Q = (1 X) is rank deficient".into(),
        ));
    }
    Ok(())
}

pub(crate) fn fit_with_basis(
    source: &Points,
    target: &Points,
    options: TpsOptions,
    basis: impl Fn(f64) -> f64,
) -> Result<WarpField> {
    check_sources(source)?;
    let j = source.nrows();
    if target.nrows() != j || target.ncols() != 3 {
        return Err(ShapeError::Correspondence(format!(
            "source has {j} points, target {}",
            target.nrows()
        )));
    }
    let size = j + 4;
    let mut system = DMatrix::zeros(size, size);
    for a in 0..j {
        for b in 0..j {
            system[(a, b)] = if a == b {
                basis(0.0) + options.ridge
            } else {
                basis(distance(source, a, source, b))
            };
        }
        system[(a, j)] = 1.0;
        system[(j, a)] = 1.0;
        for c in 0..3 {
            system[(a, j + 1 + c)] = source[(a, c)];
            system[(j + 1 + c, a)] = source[(a, c)];
        }
    }
    let mut rhs = DMatrix::zeros(size, 3);
    rhs.rows_mut(0, j).copy_from(target);

    let lu = system.full_piv_lu();
    let solution = lu
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| ShapeError::Singular("thin-plate spline system is singular".into()))?;
    let beta1 = solution.rows(0, j).into_owned();
    let beta2 = solution.rows(j, 4).into_owned();
    let energy = target.transpose() * &beta1;
    Ok(WarpField {
        control_points: source.clone(),
        bending_energy: energy.trace(),
        bending_energy_per_coordinate: [energy[(0, 0)], energy[(1, 1)], energy[(2, 2)]],
        beta1,
        beta2,
    })
}

/// Fit the interpolating thin-plate spline taking `source` to `target`.
pub fn fit_tps(source: &Points, target: &Points, options: TpsOptions) -> Result<WarpField> {
    fit_with_basis(source, target, options, tps_basis)
}

impl WarpField {
    pub fn apply(&self, points: &Points) -> Points {
        apply_warp(self, points)
    }

    pub fn apply_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let mut y = Vector3::new(self.beta2[(0, 0)], self.beta2[(0, 1)], self.beta2[(0, 2)]);
        for c in 0..3 {
            for d in 0..3 {
                y[d] += x[c] * self.beta2[(1 + c, d)];
            }
        }
        let cp = &self.control_points;
        for j in 0..cp.nrows() {
            let r = ((x.x - cp[(j, 0)]).powi(2)
                + (x.y - cp[(j, 1)]).powi(2)
                + (x.z - cp[(j, 2)]).powi(2))
            .sqrt();
            let phi = tps_basis(r);
            for d in 0..3 {
                y[d] += phi * self.beta1[(j, d)];
            }
        }
        y
    }
}

/// Evaluate the warp at every row of `points`.
pub fn apply_warp(field: &WarpField, points: &Points) -> Points {
    let mut out = Points::zeros(points.nrows(), 3);
    for i in 0..points.nrows() {
        let y = field.apply_point(&Vector3::new(points[(i, 0)], points[(i, 1)], points[(i, 2)]));
        for d in 0..3 {
            out[(i, d)] = y[d];
        }
    }
    out
}

/// Warp every vertex of `template` with the spline taking `model_source` to
/// `model_target`; the triangulation is unchanged.
pub fn warp_template(
    template: &SurfaceMesh,
    model_source: &Points,
    model_target: &Points,
    options: TpsOptions,
) -> Result<(SurfaceMesh, WarpField)> {
    let field = fit_tps(model_source, model_target, options)?;
    let warped = template.with_vertices(apply_warp(&field, template.vertices()))?;
    Ok((warped, field))
}
