mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use common::*;
use proptest::prelude::*;
use surfshape::fpca::fit_from_gpa;
use surfshape::individual::{fit_control_model, ControlOptions};
use surfshape::io::{
    fmt_sig9, format_obj, format_painted_mesh, load_model, model_from_json, model_to_json, parse_obj,
    read_mesh, read_painted_mesh, read_pairing, read_regions, save_model, write_mesh, write_painted_mesh,
    write_pairing, write_regions, ColorMap, SavedModel, DIVERGING_HIGH, DIVERGING_LOW, NEUTRAL,
    SEQUENTIAL_HIGH, SEQUENTIAL_LOW,
};
use surfshape::registration::{weighted_gpa, GpaOptions};
use surfshape::rng::SeededRng;
use surfshape::synth::{synth_base_mesh, synth_cohort, SynthConfig};
use surfshape::{ComponentRule, Points, RegionMap, ShapeError, SurfaceMesh};

fn tetra() -> SurfaceMesh {
    let v = Points::from_row_slice(
        4,
        3,
        &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 0.0, 0.0, 0.0, -2.5e-7],
    );
    SurfaceMesh::new(v, vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]).unwrap()
}

fn random_mesh(rng: &mut SeededRng) -> SurfaceMesh {
    let (base, _) = synth_base_mesh(&SynthConfig::default()).unwrap();
    let j = base.n_vertices();
    base.with_vertices(base.vertices() * rng.uniform_range(0.1, 100.0) + random_points(rng, j) * 0.01)
        .unwrap()
}

/// Linear-light sRGB blend, written independently of the library.
fn blend(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let lin = |c: u8| {
        let s = c as f64 / 255.0;
        if s <= 0.04045 { s / 12.92 } else { ((s + 0.055) / 1.055).powf(2.4) }
    };
    let enc = |l: f64| {
        let s = if l <= 0.0031308 { 12.92 * l } else { 1.055 * l.powf(1.0 / 2.4) - 0.055 };
        (s * 255.0).round() as u8
    };
    [0, 1, 2].map(|c| enc((1.0 - t) * lin(a[c]) + t * lin(b[c])))
}

fn model_fixture() -> (SavedModel, SavedModel, Vec<Points>) {
    let config = SynthConfig { n_a: 12, n_b: 0, noise_sd: 1e-3, seed: 17, ..SynthConfig::default() };
    let (sample, _) = synth_cohort(&config).unwrap();
    let gpa = weighted_gpa(&sample, &GpaOptions::default()).unwrap();
    let fpca = fit_from_gpa(&gpa, ComponentRule::Fixed(5)).unwrap();
    let control = fit_control_model(&sample, &ControlOptions::default()).unwrap();
    (SavedModel::Fpca(fpca), SavedModel::Control(control), gpa.aligned)
}

fn error_text(r: Result<impl std::fmt::Debug, ShapeError>) -> String {
    r.unwrap_err().to_string()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn obj_round_trip_keeps_topology_and_orientation(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let mesh = random_mesh(&mut rng);
        let back = parse_obj(&format_obj(&mesh), Path::new("m.obj")).unwrap();
        prop_assert_eq!(back.triangles(), mesh.triangles());
        let scale = mesh.vertices().amax();
        prop_assert!((back.vertices() - mesh.vertices()).amax() <= 1e-7 * scale);
        let na = mesh.vertex_normals().unwrap();
        let nb = back.vertex_normals().unwrap();
        prop_assert!(na.iter().zip(&nb).all(|(a, b)| a.dot(b) > 0.99));
        prop_assert_eq!(format_obj(&back), format_obj(&parse_obj(&format_obj(&back), Path::new("m.obj")).unwrap()));
    }

    #[test]
    fn sig9_matches_c_formatting_rules(x in -1e12f64..1e12, e in -12i32..12) {
        let v = x * 10f64.powi(e);
        let text = fmt_sig9(v);
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-9 * v.abs());
        let digits = text.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
        prop_assert!(digits.trim_start_matches('0').len() <= 9);
    }
}

#[test]
fn obj_golden_text() {
    let expected = "v 0 0 0\nv 1 0 0\nv 0 0.333333333 0\nv 0 0 -2.5e-07\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";
    assert_eq!(format_obj(&tetra()), expected);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.obj");
    write_mesh(&tetra(), &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), expected);
    assert_eq!(read_mesh(&path).unwrap().triangles(), tetra().triangles());
}

#[test]
fn obj_errors_name_the_problem() {
    let p = Path::new("bad.obj");
    let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
    let msg = error_text(parse_obj(quad, p));
    assert!(msg.starts_with("bad.obj:5:") && msg.contains("only triangles"), "{msg}");
    assert!(error_text(parse_obj("", p)).contains("no vertices"));
    assert!(error_text(parse_obj("# nothing\n", p)).contains("no vertices"));
    let bad_coord = "v 0 0 zero\n";
    assert!(error_text(parse_obj(bad_coord, p)).starts_with("bad.obj:1:"));
    let out_of_range = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
    assert!(error_text(parse_obj(out_of_range, p)).starts_with("bad.obj:4:"));
    let no_faces = "v 0 0 0\n";
    assert!(error_text(parse_obj(no_faces, p)).contains("no faces"));
}

#[test]
fn painted_ply_golden_text() {
    let mesh = tetra();
    let field = [-1.0, 0.0, 0.5, 1.0];
    let cmap = ColorMap::diverging(-1.0, 1.0, 0.0).unwrap();
    let (text, summary) = format_painted_mesh(&mesh, &field, &cmap).unwrap();
    let half = blend(NEUTRAL, DIVERGING_HIGH, 0.5);
    let expected = format!(
        "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\n\
property uchar red\nproperty uchar green\nproperty uchar blue\nproperty double value\nelement face 4\n\
property list uchar int vertex_indices\nend_header\n\
0.0 0.0 0.0 59 76 192 -1.0\n\
1.0 0.0 0.0 221 221 221 0.0\n\
0.0 0.3333333333333333 0.0 {} {} {} 0.5\n\
0.0 0.0 -2.5e-7 180 4 38 1.0\n\
3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n",
        half[0], half[1], half[2]
    );
    assert_eq!(text, expected);
    assert_eq!(summary.clamped(), 0);
}

#[test]
fn painting_rules() {
    let mesh = tetra();
    let cmap = ColorMap::diverging(-2.0, 4.0, 1.0).unwrap();
    let (text, _) = format_painted_mesh(&mesh, &[1.0; 4], &cmap).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ply");
    fs::write(&path, &text).unwrap();
    assert!(read_painted_mesh(&path).unwrap().colors.iter().all(|&c| c == NEUTRAL));

    let summary = write_painted_mesh(&mesh, &[-2.0, 1.0, 1.0, 4.0], &cmap, &path).unwrap();
    let painted = read_painted_mesh(&path).unwrap();
    assert_eq!(painted.colors, vec![DIVERGING_LOW, NEUTRAL, NEUTRAL, DIVERGING_HIGH]);
    assert_eq!(summary.clamped(), 0);

    let field = [-9.0, -2.5, 4.0001, 0.0];
    let summary = write_painted_mesh(&mesh, &field, &cmap, &path).unwrap();
    assert_eq!((summary.clamped_low, summary.clamped_high), (2, 1));
    let painted = read_painted_mesh(&path).unwrap();
    assert_eq!(painted.colors[..3], [DIVERGING_LOW, DIVERGING_LOW, DIVERGING_HIGH]);
    assert_eq!(painted.values, field.to_vec());
    assert_eq!(painted.mesh.triangles(), mesh.triangles());

    let seq = ColorMap::sequential(0.0, 1.0).unwrap();
    let (text, _) = format_painted_mesh(&mesh, &[0.0, 1.0, 0.25, 0.75], &seq).unwrap();
    fs::write(&path, &text).unwrap();
    let painted = read_painted_mesh(&path).unwrap();
    assert_eq!(painted.colors[0], SEQUENTIAL_LOW);
    assert_eq!(painted.colors[1], SEQUENTIAL_HIGH);
    assert_eq!(painted.colors[2], blend(SEQUENTIAL_LOW, SEQUENTIAL_HIGH, 0.25));

    assert!(format_painted_mesh(&mesh, &[0.0; 3], &cmap).is_err());
    assert!(ColorMap::diverging(1.0, 1.0, 1.0).is_err());
    assert!(ColorMap::diverging(0.0, 1.0, 2.0).is_err());
}

#[test]
fn model_round_trip_is_exact() {
    let (fpca, control, aligned) = model_fixture();
    let dir = tempfile::tempdir().unwrap();
    for model in [fpca, control] {
        let path = dir.path().join(format!("{}.json", model.kind()));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let bits = |m: &SavedModel| m.fpca().eigenvalues().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&model));
        for shape in &aligned {
            let a = model.fpca().scores(shape).unwrap();
            let b = back.fpca().scores(shape).unwrap();
            assert!((a - b).amax() < 1e-10);
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(model_to_json(&back), text);
    }
}

#[test]
fn damaged_models_are_rejected() {
    let (fpca, control, _) = model_fixture();
    let p = Path::new("model.json");
    let text = model_to_json(&fpca);
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();

    let mut unsorted = doc.clone();
    let values = unsorted["fpca"]["eigenvalues"].as_array_mut().unwrap();
    values.swap(0, 1);
    let msg = error_text(model_from_json(&unsorted.to_string(), p));
    assert!(msg.contains("non-increasing"), "{msg}");

    let mut missing = doc.clone();
    missing["fpca"].as_object_mut().unwrap().remove("weights");
    let msg = error_text(model_from_json(&missing.to_string(), p));
    assert!(msg.contains("weights"), "{msg}");

    let mut future = doc.clone();
    future["schema_version"] = serde_json::json!(2);
    let msg = error_text(model_from_json(&future.to_string(), p));
    assert!(msg.contains("schema_version 2"), "{msg}");

    doc.as_object_mut().unwrap().remove("schema_version");
    assert!(error_text(model_from_json(&doc.to_string(), p)).contains("schema_version"));

    let truncated = &text[..text.len() / 2];
    assert!(error_text(model_from_json(truncated, p)).starts_with("model.json:"));

    let mut no_control: serde_json::Value = serde_json::from_str(&model_to_json(&control)).unwrap();
    no_control.as_object_mut().unwrap().remove("control");
    assert!(error_text(model_from_json(&no_control.to_string(), p)).contains("control"));
}

#[test]
fn sidecar_files_load_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    };

    let regions = read_regions(write("r.csv", "vertex_index,region_name\n0,left\n1,left\n3,right\n"), 4).unwrap();
    assert_eq!(regions["left"], BTreeSet::from([0, 1]));
    assert_eq!(regions["right"], BTreeSet::from([3]));
    let msg = error_text(read_regions(write("r2.csv", "0,a\n4,b\n"), 4));
    assert!(msg.contains(":2:") && msg.contains("out of range"), "{msg}");

    let pairing = read_pairing(write("p.csv", "index,mirror_index\n0,1\n2,2\n3,3\n"), 4).unwrap();
    assert_eq!(pairing.as_slice(), &[1, 0, 2, 3]);
    let msg = error_text(read_pairing(write("p2.csv", "0,1\n1,2\n2,2\n3,3\n"), 4));
    assert!(msg.contains("involution"), "{msg}");
    assert!(read_pairing(write("p3.csv", "0,1\n"), 4).is_err());
    assert!(read_pairing(write("p4.csv", "0,4\n"), 4).is_err());

    let normal = read_pairing(write("p5.csv", "# plane_normal=0,1,0\n0,1\n2,3\n"), 4).unwrap();
    assert_eq!(normal.plane_normal(), nalgebra::Vector3::y());
}

#[test]
fn writers_are_deterministic() {
    let (mesh, pairing) = synth_base_mesh(&SynthConfig::default()).unwrap();
    let mut regions = RegionMap::new();
    for v in 0..mesh.n_vertices() {
        let name = if mesh.vertices()[(v, 1)] > 0.0 { "front" } else { "back" };
        regions.entry(name.into()).or_default().insert(v);
    }
    let field: Vec<f64> = (0..mesh.n_vertices()).map(|v| mesh.vertices()[(v, 0)]).collect();
    let cmap = ColorMap::symmetric_for(&field);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_mesh(&mesh, d.path().join("m.obj")).unwrap();
        write_painted_mesh(&mesh, &field, &cmap, d.path().join("m.ply")).unwrap();
        write_regions(&regions, d.path().join("r.csv")).unwrap();
        write_pairing(&pairing, d.path().join("p.csv")).unwrap();
    }
    for name in ["m.obj", "m.ply", "r.csv", "p.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let back = read_pairing(dirs[0].path().join("p.csv"), mesh.n_vertices()).unwrap();
    assert_eq!(back, pairing);
    let back = read_regions(dirs[0].path().join("r.csv"), mesh.n_vertices()).unwrap();
    assert_eq!(back, regions);
}
