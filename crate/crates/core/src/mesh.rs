//! Triangulated surfaces, per-vertex area weights, normals and
//! correspondence checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::Points;

pub type Triangle = [usize; 3];

/// Named vertex subsets, e.g. anatomical sub-regions.
pub type RegionMap = BTreeMap<String, BTreeSet<usize>>;

/// Vertex positions plus a triangulation that may be shared between many
/// shapes in correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    vertices: Points,
    triangles: Arc<[Triangle]>,
    regions: RegionMap,
}

impl SurfaceMesh {
    pub fn new(vertices: Points, triangles: Vec<Triangle>) -> Result<Self> {
        Self::from_shared(vertices, triangles.into())
    }

    pub fn from_shared(vertices: Points, triangles: Arc<[Triangle]>) -> Result<Self> {
        if vertices.ncols() != 3 {
            return Err(ShapeError::InvalidMesh(format!(
                "vertex matrix has {} columns, expected 3",
                vertices.ncols()
            )));
        }
        let j = vertices.nrows();
        if j < 3 {
            return Err(ShapeError::InvalidMesh(format!(
                "need at least 3 vertices, got {j}"
            )));
        }
        if triangles.is_empty() {
            return Err(ShapeError::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= j) {
                return Err(ShapeError::InvalidMesh(format!(
                    "triangle {t} references vertex {bad}, but there are {j} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(ShapeError::InvalidMesh(format!(
                    "triangle {t} repeats a vertex: {tri:?}"
                )));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            regions: RegionMap::new(),
        })
    }

    /// Same triangulation and regions, new vertex positions.
    pub fn with_vertices(&self, vertices: Points) -> Result<Self> {
        if vertices.nrows() != self.n_vertices() || vertices.ncols() != 3 {
            return Err(ShapeError::Correspondence(format!(
                "vertex matrix is {}x{}, mesh has {} vertices",
                vertices.nrows(),
                vertices.ncols(),
                self.n_vertices()
            )));
        }
        Ok(Self {
            vertices,
            triangles: Arc::clone(&self.triangles),
            regions: self.regions.clone(),
        })
    }

    pub fn with_regions(mut self, regions: RegionMap) -> Result<Self> {
        let j = self.n_vertices();
        for (name, set) in &regions {
            if let Some(&bad) = set.iter().find(|&&v| v >= j) {
                return Err(ShapeError::InvalidArgument(format!(
                    "region {name:?} references vertex {bad}, but there are {j} vertices"
                )));
            }
        }
        self.regions = regions;
        Ok(self)
    }

    pub fn vertices(&self) -> &Points {
        &self.vertices
    }

    pub fn vertex(&self, j: usize) -> Vector3<f64> {
        Vector3::new(
            self.vertices[(j, 0)],
            self.vertices[(j, 1)],
            self.vertices[(j, 2)],
        )
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn shared_triangles(&self) -> Arc<[Triangle]> {
        Arc::clone(&self.triangles)
    }

    pub fn regions(&self) -> &RegionMap {
        &self.regions
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.nrows()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Vertices not referenced by any triangle.
    pub fn unreferenced_vertices(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_vertices()];
        for tri in self.triangles.iter() {
            for &v in tri {
                used[v] = true;
            }
        }
        used.iter()
            .enumerate()
            .filter_map(|(j, &u)| (!u).then_some(j))
            .collect()
    }

    /// Twice-area vector (edge cross product) of triangle `t`.
    fn cross(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertex(a);
        (self.vertex(b) - pa).cross(&(self.vertex(c) - pa))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.cross(t).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn vertex_areas(&self) -> Result<AreaWeights> {
        vertex_areas(self)
    }

    pub fn vertex_normals(&self) -> Result<Vec<Vector3<f64>>> {
        vertex_normals(self)
    }
}

/// Per-vertex surface area weights: the diagonal of the matrix `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaWeights {
    weights: Vec<f64>,
    total_area: f64,
}

impl AreaWeights {
    pub fn from_values(weights: Vec<f64>) -> Result<Self> {
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(ShapeError::InvalidArgument(format!(
                "area weight {w} at vertex {j} is not a non-negative number"
            )));
        }
        let total_area: f64 = weights.iter().sum();
        if total_area <= 0.0 {
            return Err(ShapeError::ZeroArea);
        }
        Ok(Self {
            weights,
            total_area,
        })
    }

    /// Equal weights `c` at each of `n` vertices.
    pub fn uniform(n: usize, c: f64) -> Result<Self> {
        Self::from_values(vec![c; n])
    }

    /// Replace selected weights (e.g. small patches around embedded curve
    /// points) and recompute the total.
    pub fn with_overrides(&self, overrides: &BTreeMap<usize, f64>) -> Result<Self> {
        let mut weights = self.weights.clone();
        for (&j, &w) in overrides {
            if j >= weights.len() {
                return Err(ShapeError::InvalidArgument(format!(
                    "weight override for vertex {j}, but there are {} vertices",
                    weights.len()
                )));
            }
            weights[j] = w;
        }
        Self::from_values(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Trace of `A`.
    pub fn total_area(&self) -> f64 {
        self.total_area
    }
}

impl std::ops::Index<usize> for AreaWeights {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.weights[j]
    }
}

/// One third of the area of each triangle goes to each of its vertices.
pub fn vertex_areas(mesh: &SurfaceMesh) -> Result<AreaWeights> {
    let mut weights = vec![0.0; mesh.n_vertices()];
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        total += area;
        for &v in tri {
            weights[v] += area / 3.0;
        }
    }
    if !(total > 0.0) {
        return Err(ShapeError::ZeroArea);
    }
    AreaWeights::from_values(weights)
}

/// Unit normals from the area-weighted average of incident face normals.
pub fn vertex_normals(mesh: &SurfaceMesh) -> Result<Vec<Vector3<f64>>> {
    let mut acc = vec![Vector3::zeros(); mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        // |cross| is twice the area, so summing raw cross products is the
        // area-weighted sum of unit normals.
        let c = mesh.cross(t);
        for &v in tri {
            acc[v] += c;
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(j, n)| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                Ok(n / len)
            } else {
                Err(ShapeError::IsolatedVertex(j))
            }
        })
        .collect()
}

/// An involution on vertex indices describing left/right counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilateralPairing {
    pair: Vec<usize>,
    plane_normal: [f64; 3],
}

impl BilateralPairing {
    pub fn new(pair: Vec<usize>, plane_normal: Vector3<f64>) -> Result<Self> {
        let j = pair.len();
        for (i, &m) in pair.iter().enumerate() {
            if m >= j {
                return Err(ShapeError::InvalidArgument(format!(
                    "vertex {i} is paired with {m}, but there are {j} vertices"
                )));
            }
            if pair[m] != i {
                return Err(ShapeError::InvalidArgument(format!(
                    "pairing is not an involution: {i} -> {m} -> {}",
                    pair[m]
                )));
            }
        }
        let norm = plane_normal.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(ShapeError::InvalidArgument(
                "symmetry plane normal must be a non-zero vector".into(),
            ));
        }
        let n = plane_normal / norm;
        Ok(Self {
            pair,
            plane_normal: [n.x, n.y, n.z],
        })
    }

    pub fn mirror(&self, j: usize) -> usize {
        self.pair[j]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.pair
    }

    pub fn len(&self) -> usize {
        self.pair.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair.is_empty()
    }

    pub fn plane_normal(&self) -> Vector3<f64> {
        Vector3::from(self.plane_normal)
    }

    /// Fixed points of the involution.
    pub fn midline(&self) -> Vec<usize> {
        self.pair
            .iter()
            .enumerate()
            .filter_map(|(j, &m)| (j == m).then_some(j))
            .collect()
    }
}

/// A cohort of shapes sharing one triangulation.
#[derive(Debug, Clone)]
pub struct ShapeSample {
    meshes: Vec<SurfaceMesh>,
    names: Vec<String>,
    labels: Option<Vec<String>>,
    pairing: Option<BilateralPairing>,
}

impl ShapeSample {
    pub fn new(meshes: Vec<SurfaceMesh>) -> Result<Self> {
        let names = (0..meshes.len()).map(|i| format!("shape_{i:04}")).collect();
        Self::with_names(meshes, names)
    }

    pub fn with_names(meshes: Vec<SurfaceMesh>, names: Vec<String>) -> Result<Self> {
        if meshes.is_empty() {
            return Err(ShapeError::InvalidArgument("empty shape sample".into()));
        }
        if names.len() != meshes.len() {
            return Err(ShapeError::InvalidArgument(format!(
                "{} names for {} shapes",
                names.len(),
                meshes.len()
            )));
        }
        let report = validate_correspondence(&meshes);
        if !report.is_ok() {
            return Err(ShapeError::Correspondence(report.to_string()));
        }
        Ok(Self {
            meshes,
            names,
            labels: None,
            pairing: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.meshes.len() {
            return Err(ShapeError::InvalidArgument(format!(
                "{} labels for {} shapes",
                labels.len(),
                self.meshes.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_pairing(mut self, pairing: BilateralPairing) -> Result<Self> {
        if pairing.len() != self.n_vertices() {
            return Err(ShapeError::Correspondence(format!(
                "pairing covers {} vertices, shapes have {}",
                pairing.len(),
                self.n_vertices()
            )));
        }
        self.pairing = Some(pairing);
        Ok(self)
    }

    pub fn meshes(&self) -> &[SurfaceMesh] {
        &self.meshes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn pairing(&self) -> Option<&BilateralPairing> {
        self.pairing.as_ref()
    }

    pub fn len(&self) -> usize {
        self.meshes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meshes.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.meshes[0].n_vertices()
    }

    pub fn template(&self) -> &SurfaceMesh {
        &self.meshes[0]
    }

    pub fn configurations(&self) -> Vec<Points> {
        self.meshes.iter().map(|m| m.vertices().clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorrespondenceIssue {
    pub shape: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorrespondenceReport {
    pub issues: Vec<CorrespondenceIssue>,
}

impl CorrespondenceReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for CorrespondenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "OK");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "shape {}: {}", issue.shape, issue.message)?;
        }
        Ok(())
    }
}

/// Checks that every shape matches the first in vertex count and
/// triangulation and carries only finite coordinates.
pub fn validate_correspondence(meshes: &[SurfaceMesh]) -> CorrespondenceReport {
    let mut report = CorrespondenceReport::default();
    let Some(first) = meshes.first() else {
        return report;
    };
    let j = first.n_vertices();
    for (i, mesh) in meshes.iter().enumerate() {
        if mesh.n_vertices() != j {
            report.issues.push(CorrespondenceIssue {
                shape: i,
                message: format!("vertex count {} ≠ {}", mesh.n_vertices(), j),
            });
        }
        if mesh.triangles() != first.triangles() {
            let detail = if mesh.n_triangles() != first.n_triangles() {
                format!(
                    "triangle count {} ≠ {}",
                    mesh.n_triangles(),
                    first.n_triangles()
                )
            } else {
                let t = mesh
                    .triangles()
                    .iter()
                    .zip(first.triangles())
                    .position(|(a, b)| a != b)
                    .unwrap_or(0);
                format!("triangle {t} differs from the first shape")
            };
            report.issues.push(CorrespondenceIssue {
                shape: i,
                message: detail,
            });
        }
        for v in 0..mesh.n_vertices() {
            if (0..3).any(|c| !mesh.vertices()[(v, c)].is_finite()) {
                report.issues.push(CorrespondenceIssue {
                    shape: i,
                    message: format!("vertex {v} has a non-finite coordinate"),
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceMode {
    X,
    Y,
    Z,
    Normal,
    SignedEuclidean,
}

impl std::str::FromStr for DifferenceMode {
    type Err = ShapeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            "z" => Ok(Self::Z),
            "normal" => Ok(Self::Normal),
            "signed_euclidean" | "signed-euclidean" => Ok(Self::SignedEuclidean),
            other => Err(ShapeError::InvalidArgument(format!(
                "unknown difference mode {other:?}"
            ))),
        }
    }
}

/// Per-vertex scalar summary of `other - base`; normals come from `base`.
pub fn shape_difference_field(
    base: &SurfaceMesh,
    other: &SurfaceMesh,
    mode: DifferenceMode,
) -> Result<Vec<f64>> {
    if base.n_vertices() != other.n_vertices() {
        return Err(ShapeError::Correspondence(format!(
            "vertex count {} ≠ {}",
            other.n_vertices(),
            base.n_vertices()
        )));
    }
    let j = base.n_vertices();
    let column = |c: usize| -> Vec<f64> {
        (0..j)
            .map(|v| other.vertices()[(v, c)] - base.vertices()[(v, c)])
            .collect()
    };
    match mode {
        DifferenceMode::X => Ok(column(0)),
        DifferenceMode::Y => Ok(column(1)),
        DifferenceMode::Z => Ok(column(2)),
        DifferenceMode::Normal | DifferenceMode::SignedEuclidean => {
            let normals = base.vertex_normals()?;
            Ok((0..j)
                .map(|v| {
                    let d = other.vertex(v) - base.vertex(v);
                    let along = d.dot(&normals[v]);
                    match mode {
                        DifferenceMode::Normal => along,
                        _ => {
                            let len = d.norm();
                            if along < 0.0 {
                                -len
                            } else {
                                len
                            }
                        }
                    }
                })
                .collect())
        }
    }
}
