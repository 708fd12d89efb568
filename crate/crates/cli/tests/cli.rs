use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use surfshape::io;
use surfshape::mesh::{shape_difference_field, DifferenceMode};

fn surfshape(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfshape"))
        .current_dir(dir)
        .env("SURFSHAPE_THREADS", "2")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = surfshape(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

const SIM: &[&str] = &[
    "simulate", "--out", "sim", "--n-a", "7", "--n-b", "7", "--shift-mode", "1", "--shift-sd",
    "4", "--nuisance", "--noise-sd", "0.0005", "--asymmetry", "0.02", "--seed", "11",
];

fn simulated() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SIM);
    dir
}

fn check_manifest(dir: &Path, command: &str) -> Value {
    let manifest = json(dir.join("manifest.json"));
    assert_eq!(manifest["command"], command);
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        assert!(dir.join(a.as_str().unwrap()).is_file(), "{command}: missing {a}");
    }
    manifest
}

/// Every file below `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn every_subcommand_writes_its_manifest() {
    let tmp = simulated();
    let d = tmp.path();
    check_manifest(&d.join("sim"), "simulate");
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("register", vec!["register", "--out", "reg", "--meshes", "sim/meshes"]),
        ("pca", vec!["pca", "--out", "pca", "--meshes", "sim/meshes", "--components", "3"]),
        ("split-affine", vec!["split-affine", "--out", "aff", "--meshes", "sim/meshes", "--weighted"]),
        (
            "asymmetry",
            vec![
                "asymmetry", "--out", "asy", "--meshes", "sim/meshes", "--pairing",
                "sim/pairing.csv", "--regions", "sim/regions.csv",
            ],
        ),
        (
            "assess",
            vec![
                "assess", "--out", "ass", "--controls", "sim/meshes", "--pre",
                "sim/meshes/shape_000.obj", "--post", "sim/meshes/shape_009.obj", "--pairing",
                "sim/pairing.csv", "--regions", "sim/regions.csv",
            ],
        ),
        (
            "warp",
            vec![
                "warp", "--out", "warp", "--source", "sim/meshes/shape_000.obj", "--target",
                "sim/meshes/shape_001.obj", "--template", "sim/base.obj",
            ],
        ),
        ("diff", vec!["diff", "--out", "diff", "sim/base.obj", "sim/meshes/shape_002.obj"]),
        (
            "compare",
            vec![
                "compare", "--out", "cmp", "--meshes", "sim/meshes", "--labels", "sim/labels.csv",
                "--components", "4", "--n-perm", "99",
            ],
        ),
    ];
    for (name, args) in &runs {
        ok(d, args);
        check_manifest(&d.join(args[2]), name);
    }
    ok(
        d,
        &[
            "tour", "--out", "tour", "--model", "pca/model.json", "--template", "sim/base.obj",
            "--components", "2", "--stops", "3", "--frames-per-leg", "4",
        ],
    );
    let manifest = check_manifest(&d.join("tour"), "tour");
    let frames = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a.as_str().unwrap().starts_with("frames/"))
        .count();
    // Every stop plus the interior frames of each leg between consecutive stops.
    assert_eq!(frames, 3 + 2 * 4);

    ok(
        d,
        &[
            "assess", "--out", "ass2", "--model", "ass/control_model.json", "--pre",
            "sim/meshes/shape_000.obj", "--post", "sim/meshes/shape_009.obj", "--pairing",
            "sim/pairing.csv", "--regions", "sim/regions.csv",
        ],
    );
    assert_eq!(
        fs::read(d.join("ass/assessment.json")).unwrap(),
        fs::read(d.join("ass2/assessment.json")).unwrap()
    );
}

#[test]
fn reruns_are_byte_identical() {
    let runs = [simulated(), simulated()];
    for tmp in &runs {
        ok(
            tmp.path(),
            &[
                "compare", "--out", "cmp", "--meshes", "sim/meshes", "--labels", "sim/labels.csv",
                "--components", "3", "--n-perm", "199", "--seed", "3",
            ],
        );
        ok(
            tmp.path(),
            &[
                "tour", "--out", "tour", "--model", "cmp/model.json", "--template", "sim/base.obj",
                "--components", "2", "--stops", "3", "--frames-per-leg", "3", "--seed", "8",
            ],
        );
    }
    let a = snapshot(runs[0].path());
    let b = snapshot(runs[1].path());
    assert_eq!(a.len(), b.len());
    for ((pa, ba), (pb, bb)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{} differs between runs", pa.display());
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = simulated();
    let d = tmp.path();
    for (threads, out) in [("1", "one"), ("4", "four")] {
        let status = Command::new(env!("CARGO_BIN_EXE_surfshape"))
            .current_dir(d)
            .env("SURFSHAPE_THREADS", threads)
            .args([
                "compare", "--out", out, "--meshes", "sim/meshes", "--labels", "sim/labels.csv",
                "--components", "3", "--n-perm", "150",
            ])
            .output()
            .unwrap();
        assert!(status.status.success());
    }
    assert_eq!(
        fs::read(d.join("one/report.json")).unwrap(),
        fs::read(d.join("four/report.json")).unwrap()
    );
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let tmp = simulated();
    let d = tmp.path();
    fs::write(
        d.join("run.toml"),
        "n_perm = 40\ncomponents = 2\nmode = \"group_shape_space\"\nallow_scaling = false\n",
    )
    .unwrap();
    let base = ["--meshes", "sim/meshes", "--labels", "sim/labels.csv"];
    let mut args = vec!["compare", "--config", "run.toml", "--out", "a"];
    args.extend(base);
    ok(d, &args);
    let report = json(d.join("a/report.json"));
    assert_eq!(report["n_perm"], 40);
    assert_eq!(report["components"], 2);
    assert_eq!(report["mode"], "group_shape_space");
    let manifest = json(d.join("a/manifest.json"));
    assert_eq!(manifest["options"]["gpa"]["allow_scaling"], false);

    let mut args = vec!["compare", "--config", "run.toml", "--out", "b", "--n-perm", "30"];
    args.extend(base);
    ok(d, &args);
    assert_eq!(json(d.join("b/report.json"))["n_perm"], 30);

    fs::write(d.join("bad.toml"), "no_such_option = 1\n").unwrap();
    let mut args = vec!["compare", "--config", "bad.toml", "--out", "c"];
    args.extend(base);
    assert_eq!(surfshape(d, &args).status.code(), Some(2));
}

#[test]
fn exit_codes_and_error_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(surfshape(d, &["--help"]).status.code(), Some(0));
    let usage = surfshape(d, &["pca", "--out", "x", "--sd"]);
    assert_eq!(usage.status.code(), Some(2));
    let line = String::from_utf8_lossy(&usage.stderr);
    assert!(line.starts_with("error: kind=usage message="), "{line}");
    assert_eq!(line.trim_end().lines().count(), 1);

    let missing = surfshape(d, &["pca", "--out", "x", "--meshes", "absent"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: kind=io"));

    // A flat grid: warping with coplanar control points is numerically degenerate.
    let mut obj = String::new();
    for y in 0..3 {
        for x in 0..3 {
            obj.push_str(&format!("v {x} {y} 0\n"));
        }
    }
    for y in 0..2 {
        for x in 0..2 {
            let a = y * 3 + x + 1;
            obj.push_str(&format!("f {} {} {}\nf {} {} {}\n", a, a + 1, a + 4, a, a + 4, a + 3));
        }
    }
    fs::write(d.join("flat.obj"), obj).unwrap();
    let flat = surfshape(
        d,
        &["warp", "--out", "w", "--source", "flat.obj", "--target", "flat.obj", "--template", "flat.obj"],
    );
    assert_eq!(flat.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&flat.stderr).starts_with("error: kind=degenerate"));

    let threads = Command::new(env!("CARGO_BIN_EXE_surfshape"))
        .current_dir(d)
        .env("SURFSHAPE_THREADS", "zero")
        .args(["diff", "--out", "x", "flat.obj", "flat.obj"])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn symmetric_base_has_zero_asymmetry() {
    let tmp = simulated();
    let d = tmp.path();
    ok(
        d,
        &[
            "asymmetry", "--out", "asy", "--mesh", "sim/base.obj", "--pairing", "sim/pairing.csv",
            "--regions", "sim/regions.csv",
        ],
    );
    let text = fs::read_to_string(d.join("asy/asymmetry.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,global,back,front,lower,upper"));
    assert_eq!(lines.next(), Some("base.obj,0.0,0.0,0.0,0.0,0.0"));
}

#[test]
fn diff_output_matches_library_field() {
    let tmp = simulated();
    let d = tmp.path();
    ok(
        d,
        &["diff", "--out", "diff", "sim/base.obj", "sim/meshes/shape_004.obj", "--mode", "signed_euclidean"],
    );
    let base = io::read_mesh(&d.join("sim/base.obj")).unwrap();
    let other = io::read_mesh(&d.join("sim/meshes/shape_004.obj")).unwrap();
    let expected = shape_difference_field(&base, &other, DifferenceMode::SignedEuclidean).unwrap();
    let painted = io::read_painted_mesh(&d.join("diff/diff.ply")).unwrap();
    assert_eq!(painted.values, expected);
    assert_eq!(painted.mesh.vertices(), base.vertices());
    let summary = json(d.join("diff/diff.json"));
    assert_eq!(summary["clamped_low"], 0);
    assert_eq!(summary["clamped_high"], 0);

    ok(
        d,
        &["diff", "--out", "clamped", "sim/base.obj", "sim/meshes/shape_004.obj", "--lo=-0.001", "--hi=0.001"],
    );
    let summary = json(d.join("clamped/diff.json"));
    let clamped = summary["clamped_low"].as_u64().unwrap() + summary["clamped_high"].as_u64().unwrap();
    assert!(clamped > 0);
}

#[test]
fn compare_detects_planted_group_shift() {
    let tmp = simulated();
    let d = tmp.path();
    ok(
        d,
        &[
            "compare", "--out", "cmp", "--meshes", "sim/meshes", "--labels", "sim/labels.csv",
            "--components", "4", "--n-perm", "199",
        ],
    );
    let report = json(d.join("cmp/report.json"));
    assert!(report["global_p"].as_f64().unwrap() < 0.05);
    assert!(d.join("cmp/effect_plus.obj").is_file());
    assert!(d.join("cmp/effect_normal.ply").is_file());
    let perms = fs::read_to_string(d.join("cmp/permutations.csv")).unwrap();
    assert_eq!(perms.lines().count(), 1 + 199);
}

#[test]
fn simulate_rejects_bad_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for args in [
        vec!["simulate", "--out", "s", "--subdivisions", "1"],
        vec!["simulate", "--out", "s", "--spectrum", "1e-4,2e-4"],
        vec!["simulate", "--out", "s", "--base", "torus"],
        vec!["simulate", "--out", "s", "--axes", "1,2"],
    ] {
        assert_eq!(surfshape(d, &args).status.code(), Some(2), "{args:?}");
    }
}
