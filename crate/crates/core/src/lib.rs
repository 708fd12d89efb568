//! Functional statistical shape analysis of triangulated 3D surfaces that
//! share a common vertex correspondence.
//!
//! Shapes are stored as `J x 3` matrices (one row per vertex). Every
//! integral over a surface is approximated with per-vertex area weights, one
//! third of the area of each incident triangle, so that registration,
//! principal components and scores all respect the surface geometry rather
//! than the vertex density.
//!
//! Modules:
//! - [`mesh`]: meshes, area weights, normals, correspondence checks, difference fields
//! - [`registration`]: weighted ordinary/generalized Procrustes alignment
//! - [`fpca`]: area-weighted principal components, scores, tours, variability maps
//! - [`groupcompare`]: Hotelling T², permutation tests, combined effects, affine split
//! - [`individual`]: asymmetry scores, closest controls, integrated assessment
//! - [`warp`]: exact 3D thin-plate-spline warping
//! - [`synth`]: synthetic cohorts with planted ground truth
//! - [`io`]: OBJ/PLY/JSON/CSV readers and writers

pub mod error;
pub mod fpca;
pub mod groupcompare;
pub mod individual;
pub mod io;
pub mod mesh;
pub mod registration;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod warp;

pub use error::{Result, ShapeError};
pub use fpca::{ComponentRule, FpcaModel};
pub use mesh::{AreaWeights, BilateralPairing, RegionMap, ShapeSample, SurfaceMesh};
pub use registration::{GpaResult, SimilarityTransform};

/// A `J x 3` configuration of vertex positions, one row per vertex.
pub type Points = nalgebra::DMatrix<f64>;
