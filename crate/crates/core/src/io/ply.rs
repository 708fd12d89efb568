//! ASCII PLY export of a scalar field painted as vertex colours.
//!
//! Layout (one vertex per line: `x y z red green blue value`, then one face
//! per line: `3 a b c`):
//!
//! ```text
//! ply
//! format ascii 1.0
//! element vertex J
//! property double x
//! property double y
//! property double z
//! property uchar red
//! property uchar green
//! property uchar blue
//! property double value
//! element face T
//! property list uchar int vertex_indices
//! end_header
//! ```
//!
//! Colours interpolate linearly in linear-light sRGB between pinned
//! endpoints. Diverging maps run `DIVERGING_LOW -> NEUTRAL -> DIVERGING_HIGH`
//! with the reference value at `NEUTRAL`; sequential maps run
//! `SEQUENTIAL_LOW -> SEQUENTIAL_HIGH`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fmt_f64, write_text};
use crate::error::{Result, ShapeError};
use crate::mesh::{SurfaceMesh, Triangle};
use crate::Points;

pub const DIVERGING_LOW: [u8; 3] = [59, 76, 192];
pub const NEUTRAL: [u8; 3] = [221, 221, 221];
pub const DIVERGING_HIGH: [u8; 3] = [180, 4, 38];
pub const SEQUENTIAL_LOW: [u8; 3] = [68, 1, 84];
pub const SEQUENTIAL_HIGH: [u8; 3] = [253, 231, 37];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMapKind {
    Diverging,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorMap {
    kind: ColorMapKind,
    lo: f64,
    hi: f64,
    reference: f64,
}

impl ColorMap {
    pub fn diverging(lo: f64, hi: f64, reference: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(ShapeError::InvalidArgument(format!(
                "colour range needs lo < hi, got ({lo}, {hi})"
            )));
        }
        if !(lo..=hi).contains(&reference) {
            return Err(ShapeError::InvalidArgument(format!(
                "reference {reference} outside colour range ({lo}, {hi})"
            )));
        }
        Ok(Self {
            kind: ColorMapKind::Diverging,
            lo,
            hi,
            reference,
        })
    }

    pub fn sequential(lo: f64, hi: f64) -> Result<Self> {
        let mut map = Self::diverging(lo, hi, lo)?;
        map.kind = ColorMapKind::Sequential;
        Ok(map)
    }

    /// Diverging map over `[-m, m]` about 0, where `m` is the largest
    /// absolute finite value (1 for an all-zero field).
    pub fn symmetric_for(field: &[f64]) -> Self {
        let m = field
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let m = if m > 0.0 { m } else { 1.0 };
        Self {
            kind: ColorMapKind::Diverging,
            lo: -m,
            hi: m,
            reference: 0.0,
        }
    }

    /// Sequential map over the finite range of `field`.
    pub fn sequential_for(field: &[f64]) -> Self {
        let (lo, hi) = field
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo < hi {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        };
        Self {
            kind: ColorMapKind::Sequential,
            lo,
            hi,
            reference: lo,
        }
    }

    pub fn kind(&self) -> ColorMapKind {
        self.kind
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn reference(&self) -> f64 {
        self.reference
    }

    /// Colour of `value` after clamping to the range.
    pub fn color(&self, value: f64) -> [u8; 3] {
        let v = value.clamp(self.lo, self.hi);
        match self.kind {
            ColorMapKind::Sequential => {
                mix(SEQUENTIAL_LOW, SEQUENTIAL_HIGH, (v - self.lo) / (self.hi - self.lo))
            }
            ColorMapKind::Diverging => {
                if v == self.reference {
                    NEUTRAL
                } else if v < self.reference {
                    mix(DIVERGING_LOW, NEUTRAL, (v - self.lo) / (self.reference - self.lo))
                } else {
                    mix(NEUTRAL, DIVERGING_HIGH, (v - self.reference) / (self.hi - self.reference))
                }
            }
        }
    }
}

fn to_linear(c: u8) -> f64 {
    let s = c as f64 / 255.0;
    if s <= 0.04045 {
        s / 12.92
    } else {
        ((s + 0.055) / 1.055).powf(2.4)
    }
}

fn to_srgb(l: f64) -> u8 {
    let s = if l <= 0.0031308 {
        12.92 * l
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    };
    (s * 255.0).round().clamp(0.0, 255.0) as u8
}

fn mix(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = to_srgb((1.0 - t) * to_linear(a[c]) + t * to_linear(b[c]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PaintSummary {
    pub clamped_low: usize,
    pub clamped_high: usize,
}

impl PaintSummary {
    pub fn clamped(&self) -> usize {
        self.clamped_low + self.clamped_high
    }
}

pub fn format_painted_mesh(
    mesh: &SurfaceMesh,
    field: &[f64],
    cmap: &ColorMap,
) -> Result<(String, PaintSummary)> {
    let j = mesh.n_vertices();
    if field.len() != j {
        return Err(ShapeError::InvalidArgument(format!(
            "field has {} values, mesh has {j} vertices",
            field.len()
        )));
    }
    if let Some(bad) = field.iter().position(|v| !v.is_finite()) {
        return Err(ShapeError::InvalidArgument(format!(
            "field value at vertex {bad} is not finite"
        )));
    }
    let mut summary = PaintSummary::default();
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {j}");
    for p in ["x", "y", "z"] {
        let _ = writeln!(out, "property double {p}");
    }
    for p in ["red", "green", "blue"] {
        let _ = writeln!(out, "property uchar {p}");
    }
    out.push_str("property double value\n");
    let _ = writeln!(out, "element face {}", mesh.n_triangles());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    let v = mesh.vertices();
    for (i, &value) in field.iter().enumerate() {
        if value < cmap.lo {
            summary.clamped_low += 1;
        } else if value > cmap.hi {
            summary.clamped_high += 1;
        }
        let [r, g, b] = cmap.color(value);
        let _ = writeln!(
            out,
            "{} {} {} {r} {g} {b} {}",
            fmt_f64(v[(i, 0)]),
            fmt_f64(v[(i, 1)]),
            fmt_f64(v[(i, 2)]),
            fmt_f64(value)
        );
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    Ok((out, summary))
}

/// Write `mesh` as ASCII PLY with `field` painted through `cmap`. Values
/// outside the map's range are clamped and counted.
pub fn write_painted_mesh(
    mesh: &SurfaceMesh,
    field: &[f64],
    cmap: &ColorMap,
    path: impl AsRef<Path>,
) -> Result<PaintSummary> {
    let (text, summary) = format_painted_mesh(mesh, field, cmap)?;
    write_text(path.as_ref(), &text)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct PaintedMesh {
    pub mesh: SurfaceMesh,
    pub colors: Vec<[u8; 3]>,
    pub values: Vec<f64>,
}

/// Read back a file produced by [`write_painted_mesh`].
pub fn read_painted_mesh(path: impl AsRef<Path>) -> Result<PaintedMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ShapeError::io(path, e))?;
    let bad = |line: usize, message: String| ShapeError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let lines: Vec<&str> = text.lines().collect();
    let end = lines
        .iter()
        .position(|l| l.trim() == "end_header")
        .ok_or_else(|| ShapeError::format(path, "missing end_header"))?;
    let count = |prefix: &str| -> Result<usize> {
        lines[..end]
            .iter()
            .find_map(|l| l.strip_prefix(prefix))
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| ShapeError::format(path, format!("missing '{prefix}' header")))
    };
    let n_vertices = count("element vertex ")?;
    let n_faces = count("element face ")?;
    if lines.len() < end + 1 + n_vertices + n_faces {
        return Err(ShapeError::format(path, "truncated body"));
    }
    let mut coords = Vec::with_capacity(3 * n_vertices);
    let mut colors = Vec::with_capacity(n_vertices);
    let mut values = Vec::with_capacity(n_vertices);
    for k in 0..n_vertices {
        let line = end + 2 + k;
        let fields: Vec<&str> = lines[line - 1].split_whitespace().collect();
        if fields.len() != 7 {
            return Err(bad(line, format!("expected 7 vertex fields, got {}", fields.len())));
        }
        for f in &fields[..3] {
            coords.push(f.parse::<f64>().map_err(|e| bad(line, e.to_string()))?);
        }
        let mut rgb = [0u8; 3];
        for c in 0..3 {
            rgb[c] = fields[3 + c].parse().map_err(|e: std::num::ParseIntError| bad(line, e.to_string()))?;
        }
        colors.push(rgb);
        values.push(fields[6].parse::<f64>().map_err(|e| bad(line, e.to_string()))?);
    }
    let mut triangles: Vec<Triangle> = Vec::with_capacity(n_faces);
    for k in 0..n_faces {
        let line = end + 2 + n_vertices + k;
        let fields: Vec<usize> = lines[line - 1]
            .split_whitespace()
            .map(|f| f.parse().map_err(|e: std::num::ParseIntError| bad(line, e.to_string())))
            .collect::<Result<_>>()?;
        if fields.len() != 4 || fields[0] != 3 {
            return Err(bad(line, "expected a triangle".into()));
        }
        triangles.push([fields[1], fields[2], fields[3]]);
    }
    let mesh = SurfaceMesh::new(Points::from_row_slice(n_vertices, 3, &coords), triangles)
        .map_err(|e| ShapeError::format(path, e.to_string()))?;
    Ok(PaintedMesh {
        mesh,
        colors,
        values,
    })
}
