//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Rotation3, Vector3};
use surfshape::registration::SimilarityTransform;
use surfshape::rng::SeededRng;
use surfshape::{AreaWeights, Points, SurfaceMesh};

pub fn random_points(rng: &mut SeededRng, j: usize) -> Points {
    Points::from_fn(j, 3, |_, _| rng.normal())
}

pub fn random_weights(rng: &mut SeededRng, j: usize) -> AreaWeights {
    AreaWeights::from_values((0..j).map(|_| rng.uniform_range(0.2, 2.0)).collect()).unwrap()
}

pub fn random_rotation(rng: &mut SeededRng) -> Matrix3<f64> {
    let axis = Vector3::new(rng.normal(), rng.normal(), rng.normal()).normalize();
    let angle = rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI);
    Rotation3::from_scaled_axis(axis * angle).into_inner()
}

pub fn random_similarity(rng: &mut SeededRng) -> SimilarityTransform {
    SimilarityTransform {
        scale: rng.uniform_range(-1.5f64, 1.5).exp(),
        rotation: random_rotation(rng),
        translation: Vector3::new(
            rng.uniform_range(-5.0, 5.0),
            rng.uniform_range(-5.0, 5.0),
            rng.uniform_range(-5.0, 5.0),
        ),
    }
}

pub fn row(p: &Points, j: usize) -> Vector3<f64> {
    Vector3::new(p[(j, 0)], p[(j, 1)], p[(j, 2)])
}

/// `s R^T x + t` applied row by row with explicit loops.
pub fn transform_rows(p: &Points, t: &SimilarityTransform) -> Points {
    let mut out = Points::zeros(p.nrows(), 3);
    for j in 0..p.nrows() {
        let y = t.scale * t.rotation.transpose() * row(p, j) + t.translation;
        for c in 0..3 {
            out[(j, c)] = y[c];
        }
    }
    out
}

pub fn weighted_residual(x: &Points, y: &Points, w: &[f64]) -> f64 {
    (0..x.nrows()).map(|j| w[j] * (row(x, j) - row(y, j)).norm_squared()).sum()
}

/// Horn's closed-form quaternion solution of the weighted similarity fit
/// taking `source` onto `target` (proper rotations only).
pub fn horn_similarity(source: &Points, target: &Points, w: &[f64]) -> SimilarityTransform {
    let total: f64 = w.iter().sum();
    let cx = (0..source.nrows()).map(|j| row(source, j) * w[j]).sum::<Vector3<f64>>() / total;
    let cy = (0..target.nrows()).map(|j| row(target, j) * w[j]).sum::<Vector3<f64>>() / total;
    let mut m = Matrix3::zeros();
    let mut sxx = 0.0;
    for j in 0..source.nrows() {
        let a = row(source, j) - cx;
        let b = row(target, j) - cy;
        m += w[j] * a * b.transpose();
        sxx += w[j] * a.norm_squared();
    }
    let (sxx_, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    let n = Matrix4::new(
        sxx_ + syy + szz, syz - szy, szx - sxz, sxy - syx,
        syz - szy, sxx_ - syy - szz, sxy + syx, szx + sxz,
        szx - sxz, sxy + syx, -sxx_ + syy - szz, syz + szy,
        sxy - syx, szx + sxz, syz + szy, -sxx_ - syy + szz,
    );
    let eig = n.symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(k);
    let (q0, qx, qy, qz) = (q[0], q[1], q[2], q[3]);
    let r = Matrix3::new(
        q0 * q0 + qx * qx - qy * qy - qz * qz,
        2.0 * (qx * qy - q0 * qz),
        2.0 * (qx * qz + q0 * qy),
        2.0 * (qy * qx + q0 * qz),
        q0 * q0 - qx * qx + qy * qy - qz * qz,
        2.0 * (qy * qz - q0 * qx),
        2.0 * (qz * qx - q0 * qy),
        2.0 * (qz * qy + q0 * qx),
        q0 * q0 - qx * qx - qy * qy + qz * qz,
    );
    let mut sxy_rot = 0.0;
    for j in 0..source.nrows() {
        sxy_rot += w[j] * (row(target, j) - cy).dot(&(r * (row(source, j) - cx)));
    }
    let scale = sxy_rot / sxx;
    SimilarityTransform {
        scale,
        rotation: r.transpose(),
        translation: cy - scale * r * cx,
    }
}

/// Nelder-Mead minimisation with the standard coefficients.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() <= 1e-15 * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|p| p[d]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|d| centroid[d] + t * (simplex[n][d] - centroid[d])).collect()
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|d| simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d])).collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best])
}

/// Eigenvalues (descending) and eigenvectors of the sample covariance of
/// the rows of `data`, from an SVD of the centred data matrix.
pub fn svd_pca(data: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let n = data.nrows();
    let mean = DVector::from_fn(data.ncols(), |c, _| data.column(c).mean());
    let mut centred = data.clone();
    for mut r in centred.row_iter_mut() {
        r -= mean.transpose();
    }
    let svd = centred.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let mut pairs: Vec<(f64, DVector<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| (s * s / (n as f64 - 1.0), v_t.row(i).transpose()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.into_iter().unzip()
}

/// Cosines of the principal angles between two subspaces given by
/// orthonormal (under `w`) bases.
pub fn principal_cosines(a: &[DVector<f64>], b: &[DVector<f64>], w: &[f64]) -> Vec<f64> {
    let m = DMatrix::from_fn(a.len(), b.len(), |i, k| {
        a[i].iter().zip(b[k].iter()).enumerate().map(|(d, (x, y))| w[d] * x * y).sum::<f64>()
    });
    m.singular_values().iter().copied().collect()
}

/// Per-coordinate weights `a_j` repeated for the x, y and z blocks of a
/// column-major `vec`.
pub fn vec_weights(w: &AreaWeights) -> Vec<f64> {
    let a = w.as_slice();
    (0..3).flat_map(|_| a.iter().copied()).collect()
}

/// Triangle areas summed into vertices, by explicit loops.
pub fn brute_vertex_areas(mesh: &SurfaceMesh) -> Vec<f64> {
    let v = mesh.vertices();
    let mut out = vec![0.0; mesh.n_vertices()];
    for t in mesh.triangles() {
        let a = row(v, t[0]);
        let b = row(v, t[1]);
        let c = row(v, t[2]);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        for &k in t {
            out[k] += area / 3.0;
        }
    }
    out
}

/// Pooled two-sample t statistic.
pub fn pooled_t(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let ss = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sd = (ss / (na + nb - 2.0)).sqrt();
    (ma - mb) / (sd * (1.0 / na + 1.0 / nb).sqrt())
}

/// Closed-form thin-plate spline: bending matrix and coefficients via
/// `S^-1` and the projected affine solve.
pub struct ClosedFormTps {
    pub bending: DMatrix<f64>,
    pub beta1: DMatrix<f64>,
    pub beta2: DMatrix<f64>,
}

pub fn closed_form_tps(x: &Points, y: &Points) -> ClosedFormTps {
    let j = x.nrows();
    let s = DMatrix::from_fn(j, j, |a, b| {
        let r = (row(x, a) - row(x, b)).norm();
        -r / (8.0 * std::f64::consts::PI)
    });
    let q = DMatrix::from_fn(j, 4, |a, c| if c == 0 { 1.0 } else { x[(a, c - 1)] });
    let s_inv = s.try_inverse().expect("S invertible");
    let qt_sinv = q.transpose() * &s_inv;
    let inner = (&qt_sinv * &q).try_inverse().expect("Q^T S^-1 Q invertible");
    let bending = &s_inv - &s_inv * &q * &inner * &qt_sinv;
    let beta1 = &bending * y;
    let beta2 = inner * qt_sinv * y;
    ClosedFormTps { bending, beta1, beta2 }
}
