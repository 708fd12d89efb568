//! Two-group comparisons in component spaces.
//!
//! Group membership is a slice of `0`/`1` indicators, one per shape. Component
//! numbers in public results are 1-based.

use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::fpca::{fit_fpca, scale_rows, scaled_eigen, unscale, ComponentRule, FpcaModel};
use crate::mesh::AreaWeights;
use crate::registration::unvec;
use crate::rng::SeededRng;
use crate::stats;
use crate::Points;

/// Caveat attached to every permutation report.
pub const SIMULTANEOUS_NULL_CAVEAT: &str = "Per-component p-values are to be interpreted under \
the null hypothesis that mean scores are identical for all components simultaneously.";

fn check_groups(groups: &[usize], n: usize) -> Result<(usize, usize)> {
    if groups.len() != n {
        return Err(ShapeError::InvalidArgument(format!(
            "{} group labels for {n} rows",
            groups.len()
        )));
    }
    if let Some(&g) = groups.iter().find(|&&g| g > 1) {
        return Err(ShapeError::InvalidArgument(format!(
            "group label {g}; labels must be 0 or 1"
        )));
    }
    let n_b = groups.iter().filter(|&&g| g == 1).count();
    Ok((n - n_b, n_b))
}

fn select_rows(data: &DMatrix<f64>, groups: &[usize], which: usize) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == which).collect();
    DMatrix::from_fn(idx.len(), data.ncols(), |r, c| data[(idx[r], c)])
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.ncols(), |c, _| m.column(c).mean())
}

/// Rows minus their own group's mean.
fn within_centered(data: &DMatrix<f64>, groups: &[usize]) -> DMatrix<f64> {
    let means = [
        column_means(&select_rows(data, groups, 0)),
        column_means(&select_rows(data, groups, 1)),
    ];
    let mut out = data.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row -= means[groups[i]].transpose();
    }
    out
}

/// Pooled within-group covariance, divisor `n_a + n_b - 2`.
fn pooled_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.ncols();
    let mut s = DMatrix::zeros(p, p);
    for m in [a, b] {
        let mean = column_means(m);
        for row in m.row_iter() {
            let d = row.transpose() - &mean;
            s += &d * d.transpose();
        }
    }
    s / (a.nrows() + b.nrows() - 2) as f64
}

fn check_two_samples(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(ShapeError::InvalidArgument(format!(
            "score dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(ShapeError::InvalidArgument("both groups must be non-empty".into()));
    }
    if a.nrows() + b.nrows() < a.ncols() + 2 {
        return Err(ShapeError::InvalidArgument(format!(
            "{} + {} observations cannot support {} components",
            a.nrows(),
            b.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Hotelling's two-sample `T^2` with pooled covariance.
pub fn hotelling_t2(scores_a: &DMatrix<f64>, scores_b: &DMatrix<f64>) -> Result<f64> {
    check_two_samples(scores_a, scores_b)?;
    let diff = column_means(scores_a) - column_means(scores_b);
    let pooled = pooled_covariance(scores_a, scores_b);
    let scale = pooled.diagonal().max();
    let chol = pooled
        .clone()
        .cholesky()
        .filter(|c| {
            let d = c.l_dirty().diagonal();
            scale > 0.0 && d.iter().all(|&v| v * v > 1e-13 * scale)
        })
        .ok_or_else(|| ShapeError::Singular("pooled covariance singular; reduce p".into()))?;
    let solved = chol.solve(&diff);
    let factor = 1.0 / scores_a.nrows() as f64 + 1.0 / scores_b.nrows() as f64;
    Ok(diff.dot(&solved) / factor)
}

/// Pooled two-sample t statistic on component `l` (1-based).
pub fn component_t(scores_a: &DMatrix<f64>, scores_b: &DMatrix<f64>, l: usize) -> Result<f64> {
    check_two_samples(scores_a, scores_b)?;
    if l == 0 || l > scores_a.ncols() {
        return Err(ShapeError::InvalidArgument(format!(
            "component {l} outside 1..={}",
            scores_a.ncols()
        )));
    }
    let a: Vec<f64> = scores_a.column(l - 1).iter().copied().collect();
    let b: Vec<f64> = scores_b.column(l - 1).iter().copied().collect();
    pooled_t(&a, &b)
}

fn pooled_t(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (stats::mean(a), stats::mean(b));
    let ss: f64 = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>()
        + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
    let sd = (ss / (na + nb - 2.0)).sqrt();
    if !(sd > 0.0) {
        return Err(ShapeError::Singular(
            "pooled standard deviation is zero".into(),
        ));
    }
    Ok((ma - mb) / (sd * (1.0 / na + 1.0 / nb).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    /// Components fixed from the label-blind PCA of the pooled sample.
    TangentPca,
    /// Components re-derived from the pooled within-group covariance on
    /// every permutation.
    GroupShapeSpace,
}

impl std::str::FromStr for PermutationMode {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tangent_pca" | "tangent-pca" => Ok(Self::TangentPca),
            "group_shape_space" | "group-shape-space" => Ok(Self::GroupShapeSpace),
            other => Err(ShapeError::InvalidArgument(format!(
                "unknown permutation mode {other:?}"
            ))),
        }
    }
}

/// Data handed to [`permutation_test`].
#[derive(Debug, Clone, Copy)]
pub enum PermutationInput<'a> {
    /// Component scores, one row per shape; the first `p` columns are used.
    /// Only valid for [`PermutationMode::TangentPca`].
    Scores(&'a DMatrix<f64>),
    /// Tangent coordinates (rows `vec(X_i - mean)`) with area weights.
    Tangent {
        tangent: &'a DMatrix<f64>,
        weights: &'a AreaWeights,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationOptions {
    pub components: usize,
    pub n_perm: usize,
    pub seed: u64,
    pub mode: PermutationMode,
    /// Family-wise level; the per-component threshold is `alpha / p`.
    pub alpha: f64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        Self {
            components: 10,
            n_perm: 500,
            seed: 0,
            mode: PermutationMode::TangentPca,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: v[0],
            q1: stats::quantile_sorted(&v, 0.25),
            median: stats::quantile_sorted(&v, 0.5),
            q3: stats::quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTestReport {
    pub mode: PermutationMode,
    pub components: usize,
    pub n_a: usize,
    pub n_b: usize,
    /// `sqrt(T^2 / p)`.
    pub global_stat: f64,
    /// `|t_l|` for `l = 1..=p`.
    pub component_stats: Vec<f64>,
    pub global_p: f64,
    pub component_p: Vec<f64>,
    pub bonferroni_alpha: f64,
    /// 1-based components with `component_p < bonferroni_alpha`.
    pub significant: Vec<usize>,
    pub n_perm: usize,
    pub seed: u64,
    pub permuted_global: Vec<f64>,
    /// `permuted_components[l][b]`: component `l + 1` under permutation `b`.
    pub permuted_components: Vec<Vec<f64>>,
    pub permuted_global_quartiles: Quartiles,
    pub permuted_component_quartiles: Vec<Quartiles>,
    pub caveat: String,
}

/// Statistics for one labelling: `(sqrt(T^2/p), |t_1|..|t_p|)`.
type Stats = (f64, Vec<f64>);

fn tangent_pca_stats(scores: &DMatrix<f64>, groups: &[usize]) -> Result<Stats> {
    let a = select_rows(scores, groups, 0);
    let b = select_rows(scores, groups, 1);
    let p = scores.ncols();
    let t2 = hotelling_t2(&a, &b)?;
    let comps = (1..=p)
        .map(|l| component_t(&a, &b, l).map(f64::abs))
        .collect::<Result<Vec<_>>>()?;
    Ok(((t2 / p as f64).sqrt(), comps))
}

/// Leading eigenpairs of the pooled within-group covariance of tangent
/// coordinates, under the area-weighted inner product.
#[derive(Debug, Clone)]
pub struct GroupBasis {
    pub eigenvalues: Vec<f64>,
    /// Unscaled eigenfunctions, A-orthonormal.
    pub eigenfunctions: Vec<DVector<f64>>,
}

fn group_basis_scaled(
    scaled: &DMatrix<f64>,
    groups: &[usize],
    p: usize,
) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let n = scaled.nrows();
    let within = within_centered(scaled, groups);
    let (mut values, vectors) = scaled_eigen(&within);
    // scaled_eigen divides by n - 1; the pooled estimate uses n - 2.
    let adjust = (n as f64 - 1.0) / (n as f64 - 2.0);
    values.iter_mut().for_each(|l| *l *= adjust);
    if values.len() < p || !(values[p - 1] > 1e-12 * values[0]) {
        return Err(ShapeError::Singular(format!(
            "pooled within-group covariance has fewer than {p} positive eigenvalues"
        )));
    }
    Ok((values[..p].to_vec(), vectors[..p].to_vec()))
}

pub fn group_shape_space_basis(
    tangent: &DMatrix<f64>,
    weights: &AreaWeights,
    groups: &[usize],
    p: usize,
) -> Result<GroupBasis> {
    let (n_a, n_b) = check_groups(groups, tangent.nrows())?;
    if n_a == 0 || n_b == 0 || n_a + n_b < p + 2 {
        return Err(ShapeError::InvalidArgument(format!(
            "group sizes {n_a} and {n_b} cannot support {p} components"
        )));
    }
    let scaled = scale_rows(tangent, weights);
    let (eigenvalues, vectors) = group_basis_scaled(&scaled, groups, p)?;
    Ok(GroupBasis {
        eigenvalues,
        eigenfunctions: vectors.iter().map(|f| unscale(f, weights)).collect(),
    })
}

fn group_shape_space_stats(scaled: &DMatrix<f64>, groups: &[usize], p: usize) -> Result<Stats> {
    let (values, vectors) = group_basis_scaled(scaled, groups, p)?;
    let diff = column_means(&select_rows(scaled, groups, 0))
        - column_means(&select_rows(scaled, groups, 1));
    let n_a = groups.iter().filter(|&&g| g == 0).count() as f64;
    let n_b = groups.len() as f64 - n_a;
    let factor = 1.0 / n_a + 1.0 / n_b;
    let comps: Vec<f64> = values
        .iter()
        .zip(&vectors)
        .map(|(l, f)| (f.dot(&diff) / (l * factor).sqrt()).abs())
        .collect();
    let t2: f64 = comps.iter().map(|t| t * t).sum();
    Ok(((t2 / p as f64).sqrt(), comps))
}

/// Permutation reference distributions for the global and per-component
/// statistics. Permutations are drawn from one seeded stream in order and
/// evaluated in parallel; results are reduced in permutation order.
pub fn permutation_test(
    input: PermutationInput<'_>,
    groups: &[usize],
    options: &PermutationOptions,
) -> Result<GroupTestReport> {
    let p = options.components;
    if options.n_perm < 1 {
        return Err(ShapeError::InvalidArgument("n_perm must be at least 1".into()));
    }
    if p == 0 {
        return Err(ShapeError::InvalidArgument("need at least one component".into()));
    }
    let n = match input {
        PermutationInput::Scores(s) => s.nrows(),
        PermutationInput::Tangent { tangent, .. } => tangent.nrows(),
    };
    let (n_a, n_b) = check_groups(groups, n)?;
    if n_a < 1 || n_b < 1 || n_a + n_b < p + 2 {
        return Err(ShapeError::InvalidArgument(format!(
            "degenerate group sizes {n_a} and {n_b} for {p} components"
        )));
    }

    let evaluate: Box<dyn Fn(&[usize]) -> Result<Stats> + Sync> = match (options.mode, input) {
        (PermutationMode::TangentPca, PermutationInput::Scores(s)) => {
            if s.ncols() < p {
                return Err(ShapeError::InvalidArgument(format!(
                    "{p} components requested but scores have {} columns",
                    s.ncols()
                )));
            }
            let scores = s.columns(0, p).into_owned();
            Box::new(move |g: &[usize]| tangent_pca_stats(&scores, g))
        }
        (PermutationMode::TangentPca, PermutationInput::Tangent { tangent, weights }) => {
            let j = weights.len();
            let model = fit_fpca(&Points::zeros(j, 3), tangent, weights, ComponentRule::Fixed(p))?;
            if model.n_components() < p {
                return Err(ShapeError::Singular(format!(
                    "pooled PCA has only {} non-degenerate components",
                    model.n_components()
                )));
            }
            let shapes: Vec<Points> = tangent
                .row_iter()
                .map(|r| unvec(&r.transpose()))
                .collect();
            let scores = model.score_matrix(&shapes)?;
            Box::new(move |g: &[usize]| tangent_pca_stats(&scores, g))
        }
        (PermutationMode::GroupShapeSpace, PermutationInput::Tangent { tangent, weights }) => {
            let scaled = scale_rows(tangent, weights);
            Box::new(move |g: &[usize]| group_shape_space_stats(&scaled, g, p))
        }
        (PermutationMode::GroupShapeSpace, PermutationInput::Scores(_)) => {
            return Err(ShapeError::InvalidArgument(
                "group shape space mode needs tangent coordinates, not scores".into(),
            ))
        }
    };

    let (global_stat, component_stats) = evaluate(groups)?;

    let mut rng = SeededRng::new(options.seed);
    let labelings: Vec<Vec<usize>> = (0..options.n_perm)
        .map(|_| {
            let mut g = groups.to_vec();
            rng.shuffle(&mut g);
            g
        })
        .collect();
    let permuted: Vec<Stats> = labelings
        .par_iter()
        .map(|g| evaluate(g))
        .collect::<Result<Vec<_>>>()?;

    let exceed = |observed: f64, draws: &mut dyn Iterator<Item = f64>| {
        let threshold = observed - 1e-12 * observed.abs();
        let count = draws.filter(|&v| v >= threshold).count();
        (1 + count) as f64 / (1 + options.n_perm) as f64
    };
    let permuted_global: Vec<f64> = permuted.iter().map(|s| s.0).collect();
    let permuted_components: Vec<Vec<f64>> = (0..p)
        .map(|l| permuted.iter().map(|s| s.1[l]).collect())
        .collect();
    let global_p = exceed(global_stat, &mut permuted_global.iter().copied());
    let component_p: Vec<f64> = (0..p)
        .map(|l| exceed(component_stats[l], &mut permuted_components[l].iter().copied()))
        .collect();
    let bonferroni_alpha = options.alpha / p as f64;
    let significant = component_p
        .iter()
        .enumerate()
        .filter_map(|(l, &pv)| (pv < bonferroni_alpha).then_some(l + 1))
        .collect();

    Ok(GroupTestReport {
        mode: options.mode,
        components: p,
        n_a,
        n_b,
        global_stat,
        component_stats,
        global_p,
        component_p,
        bonferroni_alpha,
        significant,
        n_perm: options.n_perm,
        seed: options.seed,
        permuted_global_quartiles: Quartiles::of(&permuted_global),
        permuted_component_quartiles: permuted_components.iter().map(|v| Quartiles::of(v)).collect(),
        permuted_global,
        permuted_components,
        caveat: SIMULTANEOUS_NULL_CAVEAT.to_string(),
    })
}

/// Flip component signs so the reference group's mean score is at least the
/// other group's on every component.
pub fn align_component_signs(
    model: &FpcaModel,
    scores: &DMatrix<f64>,
    groups: &[usize],
    reference_group: usize,
) -> Result<(FpcaModel, DMatrix<f64>)> {
    let (n_a, n_b) = check_groups(groups, scores.nrows())?;
    if n_a == 0 || n_b == 0 || reference_group > 1 {
        return Err(ShapeError::InvalidArgument(
            "sign alignment needs two non-empty groups and a reference of 0 or 1".into(),
        ));
    }
    let k = scores.ncols().min(model.n_components());
    let reference = column_means(&select_rows(scores, groups, reference_group));
    let other = column_means(&select_rows(scores, groups, 1 - reference_group));
    let mut model = model.clone();
    let mut scores = scores.clone();
    for c in 0..k {
        if reference[c] < other[c] {
            model.negate_component(c + 1);
            scores.column_mut(c).neg_mut();
        }
    }
    Ok((model, scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEffect {
    /// 1-based components moved simultaneously.
    pub components: Vec<usize>,
    pub multiplier: f64,
    /// Score of each listed component on the plus side: `c sqrt(lambda_k / q)`.
    pub plus_scores: Vec<f64>,
    pub plus_shape: Points,
    pub minus_shape: Points,
}

/// Joint movement along several components by `+-c sqrt(lambda_k) / sqrt(q)`.
pub fn combined_effect_shape(model: &FpcaModel, significant: &[usize], c: f64) -> Result<SubspaceEffect> {
    if significant.is_empty() {
        return Err(ShapeError::InvalidArgument(
            "combined effect needs at least one component".into(),
        ));
    }
    let q = significant.len() as f64;
    let mut scores = vec![0.0; model.n_components()];
    let mut plus_scores = Vec::with_capacity(significant.len());
    for &k in significant {
        if k == 0 || k > model.n_components() {
            return Err(ShapeError::InvalidArgument(format!(
                "component {k} outside 1..={}",
                model.n_components()
            )));
        }
        let s = c * model.eigenvalues()[k - 1].sqrt() / q.sqrt();
        scores[k - 1] = s;
        plus_scores.push(s);
    }
    let d = unvec(&model.displacement(&scores));
    Ok(SubspaceEffect {
        components: significant.to_vec(),
        multiplier: c,
        plus_scores,
        plus_shape: model.mean() + &d,
        minus_shape: model.mean() - &d,
    })
}

#[derive(Debug, Clone)]
pub struct AffineSplit {
    pub affine: Vec<Points>,
    pub nonaffine: Vec<Points>,
    pub coefficients: Vec<Matrix3<f64>>,
}

/// Regress each aligned shape on the mean, `X_i = mean * alpha_i + e_i`.
/// Fitted values are the affine part; residuals added back to the mean are
/// the non-affine part. `weights` switches to area-weighted least squares.
pub fn affine_nonaffine_split(
    aligned: &[Points],
    mean: &Points,
    weights: Option<&AreaWeights>,
) -> Result<AffineSplit> {
    let j = mean.nrows();
    let weighted_mean = match weights {
        Some(w) => {
            if w.len() != j {
                return Err(ShapeError::Correspondence(format!(
                    "{} weights for {j} vertices",
                    w.len()
                )));
            }
            let mut m = mean.clone();
            for (r, mut row) in m.row_iter_mut().enumerate() {
                row *= w[r];
            }
            m
        }
        None => mean.clone(),
    };
    // mean^T A mean and mean^T A X_i with A = I when unweighted.
    let gram = weighted_mean.transpose() * mean;
    let scale = gram.diagonal().max();
    let lu = gram.clone().full_piv_lu();
    let svd_min = gram.clone().singular_values().min();
    if !(scale > 0.0) || svd_min <= 1e-12 * scale || !lu.is_invertible() {
        return Err(ShapeError::Singular(
            "mean^T mean is singular (planar or degenerate mean)".into(),
        ));
    }
    let mut affine = Vec::with_capacity(aligned.len());
    let mut nonaffine = Vec::with_capacity(aligned.len());
    let mut coefficients = Vec::with_capacity(aligned.len());
    for (i, x) in aligned.iter().enumerate() {
        if x.nrows() != j || x.ncols() != 3 {
            return Err(ShapeError::Correspondence(format!(
                "shape {i} has {} vertices, mean has {j}",
                x.nrows()
            )));
        }
        let rhs = weighted_mean.transpose() * x;
        let alpha = lu.solve(&rhs).ok_or_else(|| {
            ShapeError::Singular("mean^T mean is singular".into())
        })?;
        let fitted = mean * &alpha;
        nonaffine.push(mean + (x - &fitted));
        affine.push(fitted);
        coefficients.push(Matrix3::from_iterator(alpha.iter().copied()));
    }
    Ok(AffineSplit {
        affine,
        nonaffine,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rng: &mut SeededRng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.normal())
    }

    #[test]
    fn t2_zero_for_equal_means() {
        let mut rng = SeededRng::new(1);
        let a = random(&mut rng, 6, 2);
        let mut b = a.clone();
        b.row_mut(0).scale_mut(1.0);
        let t2 = hotelling_t2(&a, &b).unwrap();
        assert!(t2.abs() < 1e-20);
    }

    #[test]
    fn t2_scale_invariant() {
        let mut rng = SeededRng::new(2);
        let a = random(&mut rng, 8, 3);
        let b = random(&mut rng, 9, 3).add_scalar(0.5);
        let t = hotelling_t2(&a, &b).unwrap();
        let t10 = hotelling_t2(&(&a * 10.0), &(&b * 10.0)).unwrap();
        assert!((t - t10).abs() < 1e-10 * t);
    }

    #[test]
    fn singular_pooled_covariance() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 2.0, 5.0, 10.0]);
        let err = hotelling_t2(&a, &b).unwrap_err();
        assert!(err.to_string().contains("reduce p"));
    }

    #[test]
    fn t_antisymmetric() {
        let mut rng = SeededRng::new(3);
        let a = random(&mut rng, 7, 2);
        let b = random(&mut rng, 5, 2);
        let tab = component_t(&a, &b, 2).unwrap();
        let tba = component_t(&b, &a, 2).unwrap();
        assert_eq!(tab, -tba);
        let flat = DMatrix::from_element(4, 1, 1.0);
        assert!(component_t(&flat, &flat, 1).is_err());
    }

    #[test]
    fn sign_alignment_idempotent() {
        let mut rng = SeededRng::new(4);
        let j = 4;
        let w = AreaWeights::uniform(j, 1.0).unwrap();
        let tangent = random(&mut rng, 12, 3 * j);
        let model = fit_fpca(&Points::zeros(j, 3), &tangent, &w, ComponentRule::Fixed(4)).unwrap();
        let shapes: Vec<Points> = tangent.row_iter().map(|r| unvec(&r.transpose())).collect();
        let scores = model.score_matrix(&shapes).unwrap();
        let groups: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let (m1, s1) = align_component_signs(&model, &scores, &groups, 1).unwrap();
        let ref_mean = column_means(&select_rows(&s1, &groups, 1));
        let other = column_means(&select_rows(&s1, &groups, 0));
        for c in 0..4 {
            assert!(ref_mean[c] >= other[c]);
        }
        let (m2, s2) = align_component_signs(&m1, &s1, &groups, 1).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn combined_effect_single_component() {
        let mut rng = SeededRng::new(5);
        let j = 4;
        let w = AreaWeights::uniform(j, 0.5).unwrap();
        let tangent = random(&mut rng, 10, 3 * j);
        let model = fit_fpca(&Points::zeros(j, 3), &tangent, &w, ComponentRule::Fixed(3)).unwrap();
        let effect = combined_effect_shape(&model, &[2], 2.0).unwrap();
        let plus = model.component_shape(2, 2.0).unwrap();
        let minus = model.component_shape(2, -2.0).unwrap();
        assert!((effect.plus_shape - plus).amax() < 1e-14);
        assert!((effect.minus_shape - minus).amax() < 1e-14);
        assert!(combined_effect_shape(&model, &[], 2.0).is_err());
    }

    #[test]
    fn affine_split_pure_affine() {
        let mut rng = SeededRng::new(6);
        let mean = random(&mut rng, 10, 3);
        let m = Matrix3::new(1.1, 0.2, 0.0, -0.1, 0.9, 0.3, 0.05, 0.0, 1.2);
        let x = &mean * DMatrix::from_column_slice(3, 3, m.as_slice());
        let split = affine_nonaffine_split(&[x], &mean, None).unwrap();
        assert!((split.coefficients[0] - m).amax() < 1e-12);
        assert!((&split.nonaffine[0] - &mean).amax() < 1e-12);
        let planar = Points::from_fn(5, 3, |r, c| if c == 2 { 0.0 } else { (r * (c + 1)) as f64 });
        assert!(affine_nonaffine_split(&[planar.clone()], &planar, None).is_err());
    }
}
