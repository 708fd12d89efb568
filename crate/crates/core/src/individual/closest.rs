use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::asymmetry::{asymmetry_report, AsymmetryOptions, AsymmetryReference, AsymmetryReport};
use crate::error::{Result, ShapeError};
use crate::fpca::{fit_from_gpa, ComponentRule, FpcaModel};
use crate::mesh::{
    shape_difference_field, BilateralPairing, DifferenceMode, RegionMap, ShapeSample, SurfaceMesh,
};
use crate::registration::{
    unvec, weighted_gpa, weighted_opa, GpaOptions, OpaOptions, SimilarityTransform,
};
use crate::stats;
use crate::Points;

/// Probability level of the normal-range ellipsoid and residual bound.
pub const NORMAL_RANGE_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOptions {
    pub variance_threshold: f64,
    pub gpa: GpaOptions,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            variance_threshold: 0.80,
            gpa: GpaOptions::default(),
        }
    }
}

/// Principal components of a control population together with the
/// statistics that define its normal range.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlModel {
    /// Components `1..=p` only.
    pub fpca: FpcaModel,
    pub p: usize,
    pub chi2_threshold: f64,
    /// Per-vertex standard deviation of control residual lengths.
    pub nu: Vec<f64>,
    pub q95: f64,
    pub control_d: Vec<f64>,
    pub control_r: Vec<f64>,
    pub warnings: Vec<String>,
    pub asymmetry_reference: Option<AsymmetryReference>,
}

/// Score vector, Mahalanobis distance and centred residual of a registered
/// shape.
struct Decomposition {
    scores: Vec<f64>,
    d: f64,
    residual: Points,
    lengths: Vec<f64>,
}

fn decompose(model: &FpcaModel, shape: &Points) -> Result<Decomposition> {
    let scores: Vec<f64> = model.scores(shape)?.iter().copied().collect();
    let d = scores
        .iter()
        .zip(model.eigenvalues())
        .map(|(v, l)| v * v / l)
        .sum();
    let projection = unvec(&model.displacement(&scores));
    let residual = (shape - model.mean()) - projection;
    let lengths = residual
        .row_iter()
        .map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
        .collect();
    Ok(Decomposition {
        scores,
        d,
        residual,
        lengths,
    })
}

fn residual_score(lengths: &[f64], nu: &[f64]) -> f64 {
    lengths.iter().zip(nu).map(|(l, n)| l / n).sum::<f64>() / lengths.len() as f64
}

/// Fit the control model: GPA, principal components retaining the smallest
/// number of components reaching `variance_threshold`, and residual
/// statistics.
pub fn fit_control_model(controls: &ShapeSample, options: &ControlOptions) -> Result<ControlModel> {
    let n = controls.len();
    if n < 5 {
        return Err(ShapeError::InvalidArgument(format!(
            "control model needs at least 5 shapes, got {n}"
        )));
    }
    let gpa = weighted_gpa(controls, &options.gpa)?;
    let fpca = fit_from_gpa(&gpa, ComponentRule::VarianceFraction(options.variance_threshold))?;
    let p = fpca.n_components();
    let mut warnings: Vec<String> = fpca.warnings().to_vec();
    if !gpa.converged {
        warnings.push(format!(
            "generalized Procrustes alignment stopped after {} iterations without converging",
            gpa.iterations
        ));
    }

    let parts = gpa
        .aligned
        .iter()
        .map(|x| decompose(&fpca, x))
        .collect::<Result<Vec<_>>>()?;
    let j = fpca.n_vertices();
    let mut nu: Vec<f64> = (0..j)
        .map(|v| {
            let l: Vec<f64> = parts.iter().map(|d| d.lengths[v]).collect();
            stats::sample_variance(&l).sqrt()
        })
        .collect();
    let min_positive = nu.iter().copied().filter(|&s| s > 0.0).fold(f64::INFINITY, f64::min);
    if !min_positive.is_finite() {
        return Err(ShapeError::Degenerate(
            "control residual lengths do not vary at any vertex".into(),
        ));
    }
    let degenerate: Vec<usize> = (0..j).filter(|&v| !(nu[v] > 0.0)).collect();
    if !degenerate.is_empty() {
        warnings.push(format!(
            "residual length has zero spread at {} vertices (first: {}); replaced by {min_positive}",
            degenerate.len(),
            degenerate[0]
        ));
        for v in degenerate {
            nu[v] = min_positive;
        }
    }

    let control_d = parts.iter().map(|d| d.d).collect();
    let control_r: Vec<f64> = parts.iter().map(|d| residual_score(&d.lengths, &nu)).collect();
    let q95 = stats::quantile(&control_r, NORMAL_RANGE_LEVEL);
    let chi2_threshold = stats::chi2_quantile(NORMAL_RANGE_LEVEL, p)?;

    Ok(ControlModel {
        fpca,
        p,
        chi2_threshold,
        nu,
        q95,
        control_d,
        control_r,
        warnings,
        asymmetry_reference: None,
    })
}

impl ControlModel {
    /// Attach control asymmetry scores so assessments can report percentiles.
    pub fn with_asymmetry_reference(
        mut self,
        controls: &ShapeSample,
        pairing: &BilateralPairing,
        regions: &RegionMap,
        options: AsymmetryOptions,
    ) -> Result<Self> {
        self.asymmetry_reference = Some(AsymmetryReference::from_sample(
            controls, pairing, regions, options,
        )?);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosestControlResult {
    pub d: f64,
    pub alpha1: f64,
    pub r: f64,
    pub alpha2: f64,
    pub within_component_range: bool,
    pub within_residual_range: bool,
    pub chi2_threshold: f64,
    pub q95: f64,
    pub scores: Vec<f64>,
    pub registration: SimilarityTransform,
    /// The case after registration onto the control mean.
    #[serde(skip)]
    pub registered: Points,
    /// Closest control within the component space.
    #[serde(skip)]
    pub cc_p: Points,
    /// Closest control combining component and residual spaces.
    #[serde(skip)]
    pub cc: Points,
    #[serde(skip)]
    pub residual: Points,
}

/// Register `case` onto the control mean and construct its closest control.
pub fn assess_individual(model: &ControlModel, case: &SurfaceMesh) -> Result<ClosestControlResult> {
    let fpca = &model.fpca;
    if case.n_vertices() != fpca.n_vertices() {
        return Err(ShapeError::Correspondence(format!(
            "case has {} vertices, control model has {}",
            case.n_vertices(),
            fpca.n_vertices()
        )));
    }
    let fit = weighted_opa(
        case.vertices(),
        fpca.mean(),
        fpca.weights(),
        OpaOptions::default(),
    )?;
    let registered = fit.fitted;
    let parts = decompose(fpca, &registered)?;

    let within_component_range = parts.d <= model.chi2_threshold;
    let alpha1 = if within_component_range {
        1.0
    } else {
        (model.chi2_threshold / parts.d).sqrt()
    };
    let shrunk: Vec<f64> = parts.scores.iter().map(|v| alpha1 * v).collect();
    let cc_p = fpca.mean() + unvec(&fpca.displacement(&shrunk));

    let r = residual_score(&parts.lengths, &model.nu);
    let within_residual_range = r <= model.q95;
    let alpha2 = if within_residual_range { 1.0 } else { model.q95 / r };
    let cc = &cc_p + &parts.residual * alpha2;

    Ok(ClosestControlResult {
        d: parts.d,
        alpha1,
        r,
        alpha2,
        within_component_range,
        within_residual_range,
        chi2_threshold: model.chi2_threshold,
        q95: model.q95,
        scores: parts.scores,
        registration: fit.transform,
        registered,
        cc_p,
        cc,
        residual: parts.residual,
    })
}

#[derive(Debug, Clone)]
pub struct TimePointAssessment {
    pub label: String,
    pub asymmetry: AsymmetryReport,
    pub closest_control: ClosestControlResult,
    /// Normal distances from the registered case to its closest control.
    pub normal_distance_to_cc: Vec<f64>,
    /// The registered case as a mesh (triangulation of the input).
    pub case_mesh: SurfaceMesh,
    pub cc_mesh: SurfaceMesh,
}

#[derive(Debug, Clone)]
pub struct IntegratedAssessment {
    pub time_points: Vec<TimePointAssessment>,
    pub regions: Vec<String>,
}

fn assess_time_point(
    label: &str,
    model: &ControlModel,
    case: &SurfaceMesh,
    pairing: &BilateralPairing,
    regions: &RegionMap,
    options: AsymmetryOptions,
) -> Result<TimePointAssessment> {
    let mut asymmetry = asymmetry_report(case, pairing, regions, options)?;
    if let Some(reference) = &model.asymmetry_reference {
        reference.annotate(&mut asymmetry);
    }
    let closest_control = assess_individual(model, case)?;
    let case_mesh = case.with_vertices(closest_control.registered.clone())?;
    let cc_mesh = case.with_vertices(closest_control.cc.clone())?;
    let normal_distance_to_cc = shape_difference_field(&case_mesh, &cc_mesh, DifferenceMode::Normal)?;
    Ok(TimePointAssessment {
        label: label.to_string(),
        asymmetry,
        closest_control,
        normal_distance_to_cc,
        case_mesh,
        cc_mesh,
    })
}

/// Asymmetry and closest-control assessment of one individual before and
/// after an intervention.
pub fn integrated_assessment(
    model: &ControlModel,
    pre: &SurfaceMesh,
    post: &SurfaceMesh,
    pairing: &BilateralPairing,
    regions: &RegionMap,
    options: AsymmetryOptions,
) -> Result<IntegratedAssessment> {
    let time_points = vec![
        assess_time_point("pre", model, pre, pairing, regions, options)?,
        assess_time_point("post", model, post, pairing, regions, options)?,
    ];
    Ok(IntegratedAssessment {
        time_points,
        regions: regions.keys().cloned().collect(),
    })
}

impl IntegratedAssessment {
    /// Machine-readable summary; `files` maps artifact roles to file names
    /// per time point.
    pub fn to_json(&self, files: &BTreeMap<String, BTreeMap<String, String>>) -> serde_json::Value {
        let points: Vec<serde_json::Value> = self
            .time_points
            .iter()
            .map(|tp| {
                let nd = &tp.normal_distance_to_cc;
                let max_abs = nd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                serde_json::json!({
                    "label": tp.label,
                    "asymmetry": tp.asymmetry,
                    "closest_control": tp.closest_control,
                    "normal_distance_to_cc": {
                        "min": nd.iter().copied().fold(f64::INFINITY, f64::min),
                        "max": nd.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        "max_abs": max_abs,
                    },
                    "files": files.get(&tp.label).cloned().unwrap_or_default(),
                })
            })
            .collect();
        serde_json::json!({
            "regions": self.regions,
            "time_points": points,
        })
    }
}
