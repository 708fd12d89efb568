use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::mesh::{AreaWeights, BilateralPairing, RegionMap, ShapeSample, SurfaceMesh};
use crate::registration::{weighted_opa, OpaOptions};
use crate::stats;
use crate::Points;

/// Reflect through the pairing's plane (through the origin) and swap each
/// vertex with its mirror partner.
pub fn reflect_relabel(shape: &Points, pairing: &BilateralPairing) -> Result<Points> {
    if shape.nrows() != pairing.len() || shape.ncols() != 3 {
        return Err(ShapeError::Correspondence(format!(
            "shape has {} vertices, pairing covers {}",
            shape.nrows(),
            pairing.len()
        )));
    }
    let n = pairing.plane_normal();
    Ok(Points::from_fn(shape.nrows(), 3, |j, c| {
        let m = pairing.mirror(j);
        let along = shape[(m, 0)] * n.x + shape[(m, 1)] * n.y + shape[(m, 2)] * n.z;
        shape[(m, c)] - 2.0 * along * n[c]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymmetryOptions {
    /// Include scaling when matching the mirror image.
    pub allow_scaling: bool,
    /// Re-run the matching on each region instead of matching once over the
    /// whole surface and restricting the sum.
    pub per_region_registration: bool,
}

impl Default for AsymmetryOptions {
    fn default() -> Self {
        Self {
            allow_scaling: true,
            per_region_registration: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsymmetryScore {
    /// Root mean squared distance (area weighted) to the matched mirror image.
    pub score: f64,
    pub matched_reflection: Points,
    pub per_vertex_distance: Vec<f64>,
}

fn check_region(region: &BTreeSet<usize>, j: usize) -> Result<()> {
    if region.is_empty() {
        return Err(ShapeError::InvalidArgument("empty region".into()));
    }
    if let Some(&bad) = region.iter().find(|&&v| v >= j) {
        return Err(ShapeError::InvalidArgument(format!(
            "region references vertex {bad}, but there are {j} vertices"
        )));
    }
    Ok(())
}

fn matched_mirror(
    mesh: &SurfaceMesh,
    pairing: &BilateralPairing,
    registration_region: Option<&BTreeSet<usize>>,
    options: AsymmetryOptions,
) -> Result<Points> {
    let x = mesh.vertices();
    let mirrored = reflect_relabel(x, pairing)?;
    let mut weights = mesh.vertex_areas()?;
    if let Some(region) = registration_region {
        let w: Vec<f64> = (0..x.nrows())
            .map(|j| if region.contains(&j) { weights[j] } else { 0.0 })
            .collect();
        weights = AreaWeights::from_values(w)?;
    }
    // The mirror image is already reflected, so the fit must not add or
    // remove a reflection of its own.
    let fit = weighted_opa(
        &mirrored,
        x,
        &weights,
        OpaOptions {
            allow_scaling: options.allow_scaling,
            allow_reflection: true,
        },
    )?;
    Ok(fit.fitted)
}

fn score_from_match(
    mesh: &SurfaceMesh,
    matched: &Points,
    region: Option<&BTreeSet<usize>>,
) -> Result<(f64, Vec<f64>)> {
    let x = mesh.vertices();
    let average = (x + matched) / 2.0;
    let weights = mesh.with_vertices(average)?.vertex_areas()?;
    let distance: Vec<f64> = (0..x.nrows())
        .map(|j| {
            (0..3)
                .map(|c| (x[(j, c)] - matched[(j, c)]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let in_region = |j: &usize| region.is_none_or(|r| r.contains(j));
    let (num, den) = (0..x.nrows())
        .filter(in_region)
        .fold((0.0, 0.0), |(num, den), j| {
            (num + weights[j] * distance[j] * distance[j], den + weights[j])
        });
    if !(den > 0.0) {
        return Err(ShapeError::ZeroArea);
    }
    Ok(((num / den).sqrt(), distance))
}

/// Functional asymmetry score of `mesh`, optionally restricted to a region.
pub fn asymmetry_score(
    mesh: &SurfaceMesh,
    pairing: &BilateralPairing,
    region: Option<&BTreeSet<usize>>,
    options: AsymmetryOptions,
) -> Result<AsymmetryScore> {
    if let Some(r) = region {
        check_region(r, mesh.n_vertices())?;
    }
    let registration_region = if options.per_region_registration {
        region
    } else {
        None
    };
    let matched = matched_mirror(mesh, pairing, registration_region, options)?;
    let (score, per_vertex_distance) = score_from_match(mesh, &matched, region)?;
    Ok(AsymmetryScore {
        score,
        matched_reflection: matched,
        per_vertex_distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub global_score: f64,
    pub region_scores: BTreeMap<String, f64>,
    #[serde(skip)]
    pub matched_reflection: Points,
    #[serde(skip)]
    pub per_vertex_distance: Vec<f64>,
    /// Percentile of the global score among control scores, when available.
    pub global_percentile: Option<f64>,
    pub region_percentiles: BTreeMap<String, f64>,
}

/// Global and per-region asymmetry scores.
pub fn asymmetry_report(
    mesh: &SurfaceMesh,
    pairing: &BilateralPairing,
    regions: &RegionMap,
    options: AsymmetryOptions,
) -> Result<AsymmetryReport> {
    let global = asymmetry_score(mesh, pairing, None, options)?;
    let mut region_scores = BTreeMap::new();
    for (name, region) in regions {
        check_region(region, mesh.n_vertices())
            .map_err(|e| ShapeError::InvalidArgument(format!("region {name:?}: {e}")))?;
        let score = if options.per_region_registration {
            asymmetry_score(mesh, pairing, Some(region), options)?.score
        } else {
            score_from_match(mesh, &global.matched_reflection, Some(region))?.0
        };
        region_scores.insert(name.clone(), score);
    }
    Ok(AsymmetryReport {
        global_score: global.score,
        region_scores,
        matched_reflection: global.matched_reflection,
        per_vertex_distance: global.per_vertex_distance,
        global_percentile: None,
        region_percentiles: BTreeMap::new(),
    })
}

/// Asymmetry scores of a control population, for percentile lookups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReference {
    pub global: Vec<f64>,
    pub regions: BTreeMap<String, Vec<f64>>,
    pub options: AsymmetryOptions,
}

impl AsymmetryReference {
    pub fn from_sample(
        controls: &ShapeSample,
        pairing: &BilateralPairing,
        regions: &RegionMap,
        options: AsymmetryOptions,
    ) -> Result<Self> {
        let mut global = Vec::with_capacity(controls.len());
        let mut by_region: BTreeMap<String, Vec<f64>> =
            regions.keys().map(|k| (k.clone(), Vec::new())).collect();
        for mesh in controls.meshes() {
            let report = asymmetry_report(mesh, pairing, regions, options)?;
            global.push(report.global_score);
            for (name, score) in report.region_scores {
                by_region.entry(name).or_default().push(score);
            }
        }
        Ok(Self {
            global,
            regions: by_region,
            options,
        })
    }

    /// Fill in the percentile fields of `report`.
    pub fn annotate(&self, report: &mut AsymmetryReport) {
        report.global_percentile = Some(stats::percentile_rank(&self.global, report.global_score));
        report.region_percentiles = report
            .region_scores
            .iter()
            .filter_map(|(name, &score)| {
                self.regions
                    .get(name)
                    .filter(|v| !v.is_empty())
                    .map(|v| (name.clone(), stats::percentile_rank(v, score)))
            })
            .collect();
    }
}
