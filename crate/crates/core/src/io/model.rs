//! JSON persistence of fitted models (schema version 1).
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "kind": "fpca" | "control",
//!   "fpca": { mean, weights, eigenvalues, explained, total_variance,
//!             n_samples, eigenfunctions, warnings },
//!   "control": { p, chi2_threshold, nu, q95, control_d, control_r,
//!                warnings, asymmetry_reference }      // kind = control only
//! }
//! ```
//!
//! `mean` is a list of `[x, y, z]` rows; each eigenfunction is a flat list
//! of `3J` values (all x, then all y, then all z). Numbers are written in
//! shortest round-trip form, so every value reloads bitwise.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::write_text;
use crate::error::{Result, ShapeError};
use crate::fpca::FpcaModel;
use crate::individual::{AsymmetryReference, ControlModel};
use crate::mesh::AreaWeights;
use crate::Points;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Fpca(FpcaModel),
    Control(ControlModel),
}

impl SavedModel {
    pub fn fpca(&self) -> &FpcaModel {
        match self {
            SavedModel::Fpca(m) => m,
            SavedModel::Control(c) => &c.fpca,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Fpca(_) => "fpca",
            SavedModel::Control(_) => "control",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FpcaDoc {
    mean: Vec<[f64; 3]>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    explained: Vec<f64>,
    total_variance: f64,
    n_samples: usize,
    eigenfunctions: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ControlDoc {
    p: usize,
    chi2_threshold: f64,
    nu: Vec<f64>,
    q95: f64,
    control_d: Vec<f64>,
    control_r: Vec<f64>,
    warnings: Vec<String>,
    asymmetry_reference: Option<AsymmetryReference>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    schema_version: u64,
    kind: String,
    fpca: FpcaDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    control: Option<ControlDoc>,
}

fn fpca_doc(m: &FpcaModel) -> FpcaDoc {
    let mean = m.mean();
    FpcaDoc {
        mean: (0..mean.nrows())
            .map(|j| [mean[(j, 0)], mean[(j, 1)], mean[(j, 2)]])
            .collect(),
        weights: m.weights().as_slice().to_vec(),
        eigenvalues: m.eigenvalues().to_vec(),
        explained: m.explained().to_vec(),
        total_variance: m.total_variance(),
        n_samples: m.n_samples(),
        eigenfunctions: m
            .eigenfunctions()
            .iter()
            .map(|e| e.iter().copied().collect())
            .collect(),
        warnings: m.warnings().to_vec(),
    }
}

fn fpca_from_doc(doc: FpcaDoc) -> Result<FpcaModel> {
    let rows: Vec<f64> = doc.mean.iter().flatten().copied().collect();
    let mean = Points::from_row_slice(doc.mean.len(), 3, &rows);
    FpcaModel::from_parts(
        mean,
        AreaWeights::from_values(doc.weights)?,
        doc.eigenfunctions.into_iter().map(DVector::from_vec).collect(),
        doc.eigenvalues,
        doc.explained,
        doc.total_variance,
        doc.n_samples,
        doc.warnings,
    )
}

fn control_from_doc(fpca: FpcaModel, doc: ControlDoc) -> Result<ControlModel> {
    let invalid = |m: String| Err(ShapeError::InvalidArgument(m));
    if doc.p != fpca.n_components() {
        return invalid(format!(
            "control p = {} but the model stores {} components",
            doc.p,
            fpca.n_components()
        ));
    }
    if doc.nu.len() != fpca.n_vertices() || doc.nu.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return invalid("nu must hold one positive value per vertex".into());
    }
    if doc.control_d.len() != doc.control_r.len() {
        return invalid("control_d and control_r lengths differ".into());
    }
    if !(doc.chi2_threshold > 0.0) || !(doc.q95.is_finite()) {
        return invalid("chi2_threshold must be positive and q95 finite".into());
    }
    Ok(ControlModel {
        fpca,
        p: doc.p,
        chi2_threshold: doc.chi2_threshold,
        nu: doc.nu,
        q95: doc.q95,
        control_d: doc.control_d,
        control_r: doc.control_r,
        warnings: doc.warnings,
        asymmetry_reference: doc.asymmetry_reference,
    })
}

pub fn model_to_json(model: &SavedModel) -> String {
    let (fpca, control) = match model {
        SavedModel::Fpca(m) => (fpca_doc(m), None),
        SavedModel::Control(c) => (
            fpca_doc(&c.fpca),
            Some(ControlDoc {
                p: c.p,
                chi2_threshold: c.chi2_threshold,
                nu: c.nu.clone(),
                q95: c.q95,
                control_d: c.control_d.clone(),
                control_r: c.control_r.clone(),
                warnings: c.warnings.clone(),
                asymmetry_reference: c.asymmetry_reference.clone(),
            }),
        ),
    };
    let doc = ModelDoc {
        schema_version: SCHEMA_VERSION,
        kind: model.kind().to_string(),
        fpca,
        control,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("model serializes");
    text.push('\n');
    text
}

/// Parse model JSON; `path` is used in error messages only.
pub fn model_from_json(text: &str, path: &Path) -> Result<SavedModel> {
    let fail = |m: String| ShapeError::format(path, m);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| fail(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(fail(format!(
                "schema_version {other} is not supported (expected {SCHEMA_VERSION})"
            )))
        }
        None => return Err(fail("missing field `schema_version`".into())),
    }
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| fail(e.to_string()))?;
    let fpca = fpca_from_doc(doc.fpca).map_err(|e| fail(e.to_string()))?;
    match (doc.kind.as_str(), doc.control) {
        ("fpca", _) => Ok(SavedModel::Fpca(fpca)),
        ("control", Some(c)) => control_from_doc(fpca, c)
            .map(SavedModel::Control)
            .map_err(|e| fail(e.to_string())),
        ("control", None) => Err(fail("missing field `control`".into())),
        (other, _) => Err(fail(format!("unknown model kind {other:?}"))),
    }
}

pub fn save_model(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &model_to_json(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ShapeError::io(path, e))?;
    model_from_json(&text, path)
}
