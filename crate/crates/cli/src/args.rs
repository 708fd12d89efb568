use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;
use surfshape::groupcompare::PermutationMode;
use surfshape::mesh::DifferenceMode;
use surfshape::registration::{GpaOptions, SizeConstraint};

#[derive(Debug, Parser)]
#[command(
    name = "surfshape",
    version,
    about = "Functional shape analysis of corresponded triangulated surfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generalized Procrustes alignment of a mesh cohort
    Register(RegisterArgs),
    /// Area-weighted principal components of a cohort
    Pca(PcaArgs),
    /// Seeded random tour through component space as a mesh sequence
    Tour(TourArgs),
    /// Two-group permutation tests on component scores
    Compare(CompareArgs),
    /// Split aligned shapes into affine and non-affine parts
    SplitAffine(SplitAffineArgs),
    /// Global and regional asymmetry scores
    Asymmetry(AsymmetryArgs),
    /// Closest-control and asymmetry assessment of one individual
    Assess(AssessArgs),
    /// Thin-plate-spline warp of a template mesh
    Warp(WarpArgs),
    /// Generate a synthetic cohort with planted ground truth
    Simulate(SimulateArgs),
    /// Paint the difference between two corresponded meshes
    Diff(DiffArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// Flat key = value file; keys are flag names, flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GpaArgs {
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// unit_area or initial_mean_area
    #[arg(long, default_value = "unit_area")]
    pub size_constraint: SizeConstraint,
    #[arg(long, default_value_t = true, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub allow_scaling: bool,
}

impl GpaArgs {
    pub fn options(&self) -> GpaOptions {
        GpaOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            size_constraint: self.size_constraint,
            allow_scaling: self.allow_scaling,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RegisterArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of corresponded .obj meshes
    #[arg(long)]
    pub meshes: PathBuf,
    #[command(flatten)]
    pub gpa: GpaArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PcaArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub meshes: PathBuf,
    #[command(flatten)]
    pub gpa: GpaArgs,
    /// Fixed number of components (overrides --variance)
    #[arg(long)]
    pub components: Option<usize>,
    /// Smallest number of components explaining this variance fraction
    #[arg(long, default_value_t = 0.8)]
    pub variance: f64,
    /// CSV of vertex_index,weight replacing area weights
    #[arg(long)]
    pub weight_overrides: Option<PathBuf>,
    /// Component shapes are written at mean +- sd * sqrt(lambda)
    #[arg(long, default_value_t = 3.0)]
    pub sd: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TourArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model JSON written by pca or assess
    #[arg(long)]
    pub model: PathBuf,
    /// Mesh supplying the triangulation (e.g. mean.obj from pca)
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub components: usize,
    #[arg(long, default_value_t = 5)]
    pub stops: usize,
    #[arg(long, default_value_t = 10)]
    pub frames_per_leg: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub meshes: PathBuf,
    /// CSV of filename,label with exactly two labels
    #[arg(long)]
    pub labels: PathBuf,
    /// Label of the reference group (default: first in sort order)
    #[arg(long)]
    pub group_a: Option<String>,
    #[command(flatten)]
    pub gpa: GpaArgs,
    #[arg(long, default_value_t = 10)]
    pub components: usize,
    #[arg(long, default_value_t = 500)]
    pub n_perm: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// tangent_pca or group_shape_space
    #[arg(long, default_value = "tangent_pca")]
    pub mode: PermutationMode,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Multiplier of the combined-effect shapes
    #[arg(long, default_value_t = 3.0)]
    pub effect_sd: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitAffineArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub meshes: PathBuf,
    #[command(flatten)]
    pub gpa: GpaArgs,
    /// Use area-weighted least squares
    #[arg(long, default_value_t = false, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub weighted: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AsymmetryArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of meshes to score
    #[arg(long, conflicts_with = "mesh")]
    pub meshes: Option<PathBuf>,
    /// A single mesh to score
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// CSV of index,mirror_index
    #[arg(long)]
    pub pairing: PathBuf,
    /// CSV of vertex_index,region_name
    #[arg(long)]
    pub regions: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub allow_scaling: bool,
    #[arg(long, default_value_t = false, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub per_region_registration: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AssessArgs {
    #[command(flatten)]
    pub common: Common,
    /// Control cohort directory (builds the control model)
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub controls: Option<PathBuf>,
    /// Previously saved control model JSON
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub pre: PathBuf,
    #[arg(long)]
    pub post: PathBuf,
    #[arg(long)]
    pub pairing: PathBuf,
    #[arg(long)]
    pub regions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub variance: f64,
    #[command(flatten)]
    pub gpa: GpaArgs,
    #[arg(long, default_value_t = true, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub allow_scaling_asymmetry: bool,
    #[arg(long, default_value_t = false, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub per_region_registration: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct WarpArgs {
    #[command(flatten)]
    pub common: Common,
    /// Source model mesh (control points)
    #[arg(long)]
    pub source: PathBuf,
    /// Target model mesh in correspondence with the source
    #[arg(long)]
    pub target: PathBuf,
    /// High-resolution template mesh to warp
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// sphere, ellipsoid or superellipsoid
    #[arg(long, default_value = "ellipsoid")]
    pub base: String,
    #[arg(long, value_delimiter = ',', default_value = "1,1.25,0.8")]
    pub axes: Vec<f64>,
    #[arg(long, default_value_t = 2.5)]
    pub exponent: f64,
    #[arg(long, default_value_t = 2)]
    pub subdivisions: u32,
    #[arg(long, default_value_t = 1.0)]
    pub area: f64,
    #[arg(long, value_delimiter = ',', default_value = "5e-4,3e-4,1e-4,5e-5,1e-5")]
    pub spectrum: Vec<f64>,
    #[arg(long, default_value_t = 15)]
    pub n_a: usize,
    #[arg(long, default_value_t = 15)]
    pub n_b: usize,
    /// Planted mode (1-based) shifted in group B; 0 for none
    #[arg(long, default_value_t = 0)]
    pub shift_mode: usize,
    #[arg(long, default_value_t = 0.0)]
    pub shift_sd: f64,
    /// Amplitude of the planted asymmetry bump; 0 for none
    #[arg(long, default_value_t = 0.0)]
    pub asymmetry: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = false, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub nuisance: bool,
    #[arg(long, default_value_t = false, action = ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub whiten: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct DiffArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base mesh (normals are taken from it)
    pub base: PathBuf,
    pub other: PathBuf,
    /// x, y, z, normal or signed_euclidean
    #[arg(long, default_value = "normal")]
    pub mode: DifferenceMode,
    /// diverging or sequential
    #[arg(long, default_value = "diverging")]
    pub cmap: String,
    #[arg(long, requires = "hi")]
    pub lo: Option<f64>,
    #[arg(long, requires = "lo")]
    pub hi: Option<f64>,
    /// Neutral value of a diverging map (default 0, or the midpoint when 0
    /// is outside the range)
    #[arg(long)]
    pub reference: Option<f64>,
}
