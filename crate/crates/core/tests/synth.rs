mod common;

use common::*;
use nalgebra::DVector;
use surfshape::fpca::{a_inner, fit_fpca, fit_from_gpa};
use surfshape::individual::{asymmetry_score, AsymmetryOptions};
use surfshape::registration::{tangent_coordinates, vec_shape, weighted_gpa, GpaOptions};
use surfshape::synth::{
    icosphere_triangle_count, icosphere_vertex_count, synth_base_mesh, synth_cohort, BaseShape, Nuisance,
    SynthConfig,
};
use surfshape::{AreaWeights, ComponentRule};

/// Re-orthonormalise `vectors` under `w`.
fn orthonormal(vectors: &[DVector<f64>], w: &AreaWeights) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut v = v.clone();
        for _ in 0..2 {
            for b in &out {
                let c = a_inner(&v, b, w);
                v -= b * c;
            }
        }
        let n = a_inner(&v, &v, w).sqrt();
        out.push(v / n);
    }
    out
}

fn largest_angle(a: &[DVector<f64>], b: &[DVector<f64>], w: &AreaWeights) -> f64 {
    let cosines = principal_cosines(&orthonormal(a, w), &orthonormal(b, w), &vec_weights(w));
    let smallest = cosines.iter().copied().fold(1.0f64, f64::min).min(1.0);
    // Sine form keeps precision for tiny angles.
    (1.0 - smallest * smallest).max(0.0).sqrt().asin()
}

#[test]
fn counts_follow_the_subdivision_formula() {
    for r in 2..=4 {
        let config = SynthConfig { subdivisions: r, ..SynthConfig::default() };
        let (mesh, pairing) = synth_base_mesh(&config).unwrap();
        let mut vertices = 12usize;
        let mut edges = 30usize;
        let mut faces = 20usize;
        for _ in 0..r {
            vertices += edges;
            edges = 2 * edges + 3 * faces;
            faces *= 4;
        }
        assert_eq!(mesh.n_vertices(), vertices);
        assert_eq!(mesh.n_triangles(), faces);
        assert_eq!(icosphere_vertex_count(r), vertices);
        assert_eq!(icosphere_triangle_count(r), faces);
        for j in 0..pairing.len() {
            assert_eq!(pairing.mirror(pairing.mirror(j)), j);
        }
        let score = asymmetry_score(&mesh, &pairing, None, AsymmetryOptions::default()).unwrap();
        assert_eq!(score.score, 0.0);
        assert!((mesh.surface_area() - config.area).abs() < 1e-12);
    }
}

#[test]
fn every_base_shape_is_symmetric() {
    let bases = [
        BaseShape::Sphere,
        BaseShape::Ellipsoid { axes: [1.0, 1.3, 0.7] },
        BaseShape::Superellipsoid { axes: [1.0, 1.1, 0.9], exponent: 3.0 },
    ];
    for base in bases {
        let (mesh, pairing) = synth_base_mesh(&SynthConfig { base, ..SynthConfig::default() }).unwrap();
        let score = asymmetry_score(&mesh, &pairing, None, AsymmetryOptions::default()).unwrap();
        assert_eq!(score.score, 0.0, "{base:?}");
    }
}

#[test]
fn same_seed_same_cohort_other_seed_differs() {
    let config = SynthConfig {
        noise_sd: 1e-3,
        nuisance: Some(Nuisance::default()),
        seed: 31,
        ..SynthConfig::default()
    };
    let (a, ta) = synth_cohort(&config).unwrap();
    let (b, tb) = synth_cohort(&config).unwrap();
    assert_eq!(a.configurations(), b.configurations());
    assert_eq!(ta, tb);
    let (c, _) = synth_cohort(&SynthConfig { seed: 32, ..config }).unwrap();
    assert_ne!(a.configurations(), c.configurations());
}

#[test]
fn single_mode_is_recovered_exactly() {
    let config = SynthConfig {
        spectrum: vec![4e-4],
        n_a: 12,
        n_b: 0,
        whiten_scores: true,
        seed: 5,
        ..SynthConfig::default()
    };
    let (sample, truth) = synth_cohort(&config).unwrap();
    let (mesh, _) = synth_base_mesh(&config).unwrap();
    let weights = mesh.vertex_areas().unwrap();
    let tangent = tangent_coordinates(&sample.configurations(), &truth.base).unwrap();
    let model = fit_fpca(&truth.base, &tangent, &weights, ComponentRule::Fixed(1)).unwrap();
    let lambda = model.eigenvalues()[0];
    assert!((lambda - 4e-4).abs() < 1e-6 * 4e-4, "lambda {lambda}");
    let angle = largest_angle(&model.eigenfunctions()[..1], &[vec_shape(&truth.modes[0])], &weights);
    assert!(angle < 1e-4, "angle {angle}");
}

fn registered_recovery(spectrum: &[f64]) -> (f64, Vec<f64>) {
    let config = SynthConfig {
        spectrum: spectrum.to_vec(),
        n_a: 25,
        n_b: 0,
        whiten_scores: true,
        seed: 6,
        ..SynthConfig::default()
    };
    let (sample, truth) = synth_cohort(&config).unwrap();
    let gpa = weighted_gpa(&sample, &GpaOptions::default()).unwrap();
    let model = fit_from_gpa(&gpa, ComponentRule::Fixed(spectrum.len())).unwrap();
    let planted: Vec<DVector<f64>> = truth.modes.iter().map(vec_shape).collect();
    let angle = largest_angle(&model.eigenfunctions()[..spectrum.len()], &planted, &gpa.mean_weights);
    (angle, model.eigenvalues().to_vec())
}

#[test]
fn registration_then_components_recover_the_planted_subspace() {
    // Alignment with scaling bends the tangent space at second order, so
    // recovery is exact only as the deformations shrink.
    let small = [5e-10, 2e-10, 8e-11];
    let (angle, values) = registered_recovery(&small);
    assert!(angle < 1e-4, "largest principal angle {angle}");
    for (got, want) in values.iter().zip(&small) {
        assert!((got - want).abs() < 1e-2 * want, "eigenvalue {got} vs {want}");
    }
    // The error grows linearly with the deformation amplitude.
    let (a1, _) = registered_recovery(&[5e-6, 2e-6, 8e-7]);
    let (a2, _) = registered_recovery(&[5e-8, 2e-8, 8e-9]);
    let ratio = a1 / a2;
    assert!((ratio - 10.0).abs() < 1.0, "angle ratio {ratio}");
}
