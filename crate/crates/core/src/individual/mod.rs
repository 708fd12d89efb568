//! Assessment of individual shapes against a reference population.

mod asymmetry;
mod closest;

pub use asymmetry::{
    asymmetry_report, asymmetry_score, reflect_relabel, AsymmetryOptions, AsymmetryReference,
    AsymmetryReport, AsymmetryScore,
};
pub use closest::{
    assess_individual, fit_control_model, integrated_assessment, ClosestControlResult,
    ControlModel, ControlOptions, IntegratedAssessment, TimePointAssessment,
};
