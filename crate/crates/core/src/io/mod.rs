//! Plain-text file formats: OBJ meshes, painted ASCII PLY, JSON models and
//! CSV sidecars. Every writer is deterministic.

mod model;
mod obj;
mod ply;
mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

pub use model::{load_model, model_from_json, model_to_json, save_model, SavedModel, SCHEMA_VERSION};
pub use obj::{format_obj, parse_obj, read_mesh, write_mesh};
pub use ply::{
    format_painted_mesh, read_painted_mesh, write_painted_mesh, ColorMap, ColorMapKind, PaintSummary,
    PaintedMesh, DIVERGING_HIGH, DIVERGING_LOW, NEUTRAL, SEQUENTIAL_HIGH, SEQUENTIAL_LOW,
};
pub use tables::{
    format_csv, read_labels, read_pairing, read_regions, read_weight_overrides, write_csv,
    write_labels, write_pairing, write_regions,
};

use crate::error::{Result, ShapeError};
use crate::mesh::{ShapeSample, SurfaceMesh};

/// `%.9g`-style formatting: 9 significant digits, trailing zeros removed.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        trim_zeros(format!("{:.*}", (8 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Shortest text that parses back to exactly `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| ShapeError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| ShapeError::format(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// `.obj` files of `dir` in lexicographic file-name order.
pub fn list_meshes(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| ShapeError::io(dir, e))? {
        let entry = entry.map_err(|e| ShapeError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".obj") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Load every mesh of `dir` (sorted by file name) as a sample. Labels are
/// keyed by file name, with or without the `.obj` extension.
pub fn read_cohort(dir: impl AsRef<Path>, labels: Option<&BTreeMap<String, String>>) -> Result<ShapeSample> {
    let dir = dir.as_ref();
    let names = list_meshes(dir)?;
    if names.is_empty() {
        return Err(ShapeError::format(dir, "no .obj meshes found"));
    }
    let meshes = names
        .iter()
        .map(|n| read_mesh(dir.join(n)))
        .collect::<Result<Vec<SurfaceMesh>>>()?;
    let mut sample = ShapeSample::with_names(meshes, names.clone())?;
    if let Some(labels) = labels {
        let tags = names
            .iter()
            .map(|n| {
                let stem = &n[..n.len() - 4];
                labels
                    .get(n)
                    .or_else(|| labels.get(stem))
                    .cloned()
                    .ok_or_else(|| ShapeError::InvalidArgument(format!("no label for {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        sample = sample.with_labels(tags)?;
    }
    Ok(sample)
}

/// Write each mesh as `<name>.obj` (the extension is not doubled).
pub fn write_cohort(sample: &ShapeSample, dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ShapeError::io(dir, e))?;
    let mut files = Vec::with_capacity(sample.len());
    for (mesh, name) in sample.meshes().iter().zip(sample.names()) {
        let file = if name.to_ascii_lowercase().ends_with(".obj") {
            name.clone()
        } else {
            format!("{name}.obj")
        };
        write_mesh(mesh, dir.join(&file))?;
        files.push(file);
    }
    Ok(files)
}
