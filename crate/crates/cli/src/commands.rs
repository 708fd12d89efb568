use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use surfshape::fpca::{fit_fpca, fit_from_gpa, grand_tour, variability_map, TourOptions};
use surfshape::groupcompare::{
    affine_nonaffine_split, align_component_signs, combined_effect_shape, group_shape_space_basis,
    permutation_test, PermutationInput, PermutationMode, PermutationOptions,
};
use surfshape::individual::{
    asymmetry_report, fit_control_model, integrated_assessment, AsymmetryOptions, ControlModel,
    ControlOptions,
};
use surfshape::io::{self, fmt_f64, ColorMap, SavedModel};
use surfshape::mesh::{shape_difference_field, DifferenceMode, RegionMap, ShapeSample, SurfaceMesh};
use surfshape::registration::{tangent_coordinates, weighted_gpa};
use surfshape::synth::{
    synth_base_mesh, synth_cohort, AsymmetryField, BaseShape, GroupShift, Nuisance, SynthConfig,
};
use surfshape::warp::{warp_template, TpsOptions};
use surfshape::{ComponentRule, FpcaModel, GpaResult, Points, Result, ShapeError};

use crate::args::*;
use crate::output::Output;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Register(a) => register(&a),
        Command::Pca(a) => pca(&a),
        Command::Tour(a) => tour(&a),
        Command::Compare(a) => compare(&a),
        Command::SplitAffine(a) => split_affine(&a),
        Command::Asymmetry(a) => asymmetry(&a),
        Command::Assess(a) => assess(&a),
        Command::Warp(a) => warp(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Diff(a) => diff(&a),
    }
}

fn invalid(message: impl Into<String>) -> ShapeError {
    ShapeError::InvalidArgument(message.into())
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

fn write_shape(out: &mut Output, rel: &str, template: &SurfaceMesh, shape: &Points) -> Result<()> {
    io::write_mesh(&template.with_vertices(shape.clone())?, out.path(rel)?)
}

fn paint(out: &mut Output, rel: &str, mesh: &SurfaceMesh, field: &[f64], cmap: &ColorMap) -> Result<usize> {
    let summary = io::write_painted_mesh(mesh, field, cmap, out.path(rel)?)?;
    Ok(summary.clamped())
}

fn stem(name: &str) -> &str {
    name.strip_suffix(".obj").unwrap_or(name)
}

fn aligned_cohort(meshes: &Path, gpa: &GpaArgs) -> Result<(ShapeSample, GpaResult)> {
    let sample = io::read_cohort(meshes, None)?;
    let result = weighted_gpa(&sample, &gpa.options())?;
    if !result.converged {
        warn(&format!(
            "alignment stopped after {} iterations without converging",
            result.iterations
        ));
    }
    Ok((sample, result))
}

fn gpa_summary(gpa: &GpaResult) -> serde_json::Value {
    serde_json::json!({
        "iterations": gpa.iterations,
        "converged": gpa.converged,
        "objective_trace": gpa.objective_trace,
        "target_area": gpa.target_area,
    })
}

fn register(a: &RegisterArgs) -> Result<()> {
    let (sample, gpa) = aligned_cohort(&a.meshes, &a.gpa)?;
    let mut out = Output::create(&a.common.out)?;
    let template = sample.template();
    write_shape(&mut out, "mean.obj", template, &gpa.mean)?;
    let mut rows = Vec::new();
    for ((name, shape), t) in sample.names().iter().zip(&gpa.aligned).zip(&gpa.transforms) {
        write_shape(&mut out, &format!("aligned/{name}"), template, shape)?;
        let mut row = vec![name.clone(), fmt_f64(t.scale)];
        for r in 0..3 {
            for c in 0..3 {
                row.push(fmt_f64(t.rotation[(r, c)]));
            }
        }
        row.extend(t.translation.iter().map(|v| fmt_f64(*v)));
        rows.push(row);
    }
    out.csv(
        "transforms.csv",
        &[
            "name", "scale", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33", "tx",
            "ty", "tz",
        ],
        &rows,
    )?;
    out.json("gpa.json", &gpa_summary(&gpa))?;
    out.finish("register", None, a)
}

fn component_header(first: &[&str], k: usize) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((1..=k).map(|c| format!("pc{c}")))
        .collect()
}

fn score_rows(names: &[String], extra: Option<&[String]>, scores: &Points) -> Vec<Vec<String>> {
    (0..scores.nrows())
        .map(|i| {
            let mut row = vec![names[i].clone()];
            if let Some(extra) = extra {
                row.push(extra[i].clone());
            }
            row.extend(scores.row(i).iter().map(|v| fmt_f64(*v)));
            row
        })
        .collect()
}

fn pca(a: &PcaArgs) -> Result<()> {
    let (sample, gpa) = aligned_cohort(&a.meshes, &a.gpa)?;
    let rule = match a.components {
        Some(k) => ComponentRule::Fixed(k),
        None => ComponentRule::VarianceFraction(a.variance),
    };
    let model = match &a.weight_overrides {
        Some(path) => {
            let overrides = io::read_weight_overrides(path, sample.n_vertices())?;
            let weights = gpa.mean_weights.with_overrides(&overrides)?;
            let tangent = tangent_coordinates(&gpa.aligned, &gpa.mean)?;
            fit_fpca(&gpa.mean, &tangent, &weights, rule)?
        }
        None => fit_from_gpa(&gpa, rule)?,
    };
    for w in model.warnings() {
        warn(w);
    }
    let mut out = Output::create(&a.common.out)?;
    let template = sample.template();
    io::save_model(&SavedModel::Fpca(model.clone()), out.path("model.json")?)?;
    write_shape(&mut out, "mean.obj", template, model.mean())?;

    let total = model.total_variance();
    let rows: Vec<Vec<String>> = (0..model.n_components())
        .map(|k| {
            let l = model.eigenvalues()[k];
            vec![
                (k + 1).to_string(),
                fmt_f64(l),
                fmt_f64(l / total),
                fmt_f64(model.explained()[k]),
            ]
        })
        .collect();
    out.csv(
        "eigenvalues.csv",
        &["component", "eigenvalue", "fraction", "cumulative"],
        &rows,
    )?;
    let scores = model.score_matrix(&gpa.aligned)?;
    let header = component_header(&["name"], model.n_components());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("scores.csv", &header, &score_rows(sample.names(), None, &scores))?;
    for k in 1..=model.n_components() {
        write_shape(&mut out, &format!("modes/pc{k}_plus.obj"), template, &model.component_shape(k, a.sd)?)?;
        write_shape(&mut out, &format!("modes/pc{k}_minus.obj"), template, &model.component_shape(k, -a.sd)?)?;
    }

    let mut variability = serde_json::Value::Null;
    if sample.len() >= 4 {
        let map = variability_map(&gpa.aligned)?;
        let singular: BTreeSet<usize> = map.singular.iter().copied().collect();
        let regular: Vec<f64> = map
            .values
            .iter()
            .enumerate()
            .filter(|(j, _)| !singular.contains(j))
            .map(|(_, v)| *v)
            .collect();
        let cmap = ColorMap::sequential_for(&regular);
        let mean_mesh = template.with_vertices(model.mean().clone())?;
        let clamped = paint(&mut out, "variability.ply", &mean_mesh, &map.values, &cmap)?;
        let rows: Vec<Vec<String>> = map
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| vec![j.to_string(), fmt_f64(*v), singular.contains(&j).to_string()])
            .collect();
        out.csv("variability.csv", &["vertex", "log_det", "singular"], &rows)?;
        variability = serde_json::json!({ "singular": map.singular, "clamped": clamped });
    } else {
        warn("variability map skipped: needs at least 4 shapes");
    }
    out.json(
        "pca.json",
        &serde_json::json!({
            "n_shapes": sample.len(),
            "n_components": model.n_components(),
            "total_variance": total,
            "warnings": model.warnings(),
            "gpa": gpa_summary(&gpa),
            "variability": variability,
        }),
    )?;
    out.finish("pca", None, a)
}

fn tour(a: &TourArgs) -> Result<()> {
    let saved = io::load_model(&a.model)?;
    let model = saved.fpca();
    let template = io::read_mesh(&a.template)?;
    if template.n_vertices() != model.n_vertices() {
        return Err(ShapeError::Correspondence(format!(
            "template has {} vertices, model has {}",
            template.n_vertices(),
            model.n_vertices()
        )));
    }
    let tour = grand_tour(
        model,
        &TourOptions {
            components: a.components,
            n_stops: a.stops,
            frames_per_leg: a.frames_per_leg,
            seed: a.seed,
            zero_draws: false,
        },
    )?;
    let mut out = Output::create(&a.common.out)?;
    let mut rows = Vec::with_capacity(tour.frames.len());
    for (i, (frame, shape)) in tour.frames.iter().zip(&tour.shapes).enumerate() {
        let file = format!("frames/frame_{i:05}.obj");
        write_shape(&mut out, &file, &template, shape)?;
        let mut row = vec![
            i.to_string(),
            file,
            frame.leg.to_string(),
            fmt_f64(frame.t),
            frame.is_stop.to_string(),
        ];
        row.extend(frame.scores.iter().map(|v| fmt_f64(*v)));
        rows.push(row);
    }
    let header = component_header(&["frame", "file", "leg", "t", "is_stop"], a.components);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("tour.csv", &header, &rows)?;
    let stops: Vec<Vec<String>> = tour
        .stops_z
        .iter()
        .enumerate()
        .map(|(i, z)| std::iter::once(i.to_string()).chain(z.iter().map(|v| fmt_f64(*v))).collect())
        .collect();
    let header: Vec<String> = std::iter::once("stop".to_string())
        .chain((1..=a.components).map(|c| format!("z{c}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("stops.csv", &header, &stops)?;
    out.finish("tour", Some(a.seed), a)
}

fn two_groups(sample: &ShapeSample, group_a: Option<&String>) -> Result<(Vec<usize>, [String; 2])> {
    let tags = sample
        .labels()
        .ok_or_else(|| invalid("cohort has no labels"))?;
    let distinct: BTreeSet<&String> = tags.iter().collect();
    if distinct.len() != 2 {
        return Err(invalid(format!(
            "group comparison needs exactly 2 labels, found {}",
            distinct.len()
        )));
    }
    let mut it = distinct.into_iter();
    let (first, second) = (it.next().unwrap().clone(), it.next().unwrap().clone());
    let names = match group_a {
        None => [first, second],
        Some(g) if *g == first => [first, second],
        Some(g) if *g == second => [second, first],
        Some(g) => return Err(invalid(format!("label {g:?} does not occur"))),
    };
    let groups = tags.iter().map(|t| usize::from(*t != names[0])).collect();
    Ok((groups, names))
}

fn compare(a: &CompareArgs) -> Result<()> {
    let labels = io::read_labels(&a.labels)?;
    let sample = io::read_cohort(&a.meshes, Some(&labels))?;
    let (groups, group_names) = two_groups(&sample, a.group_a.as_ref())?;
    let gpa = weighted_gpa(&sample, &a.gpa.options())?;
    if !gpa.converged {
        warn("alignment did not converge");
    }
    let tangent = tangent_coordinates(&gpa.aligned, &gpa.mean)?;
    let p = a.components;
    let options = PermutationOptions {
        components: p,
        n_perm: a.n_perm,
        seed: a.seed,
        mode: a.mode,
        alpha: a.alpha,
    };
    let (report, model) = match a.mode {
        PermutationMode::TangentPca => {
            let model = fit_fpca(&gpa.mean, &tangent, &gpa.mean_weights, ComponentRule::Fixed(p))?;
            for w in model.warnings() {
                warn(w);
            }
            let scores = model.score_matrix(&gpa.aligned)?;
            let report = permutation_test(PermutationInput::Scores(&scores), &groups, &options)?;
            (report, model)
        }
        PermutationMode::GroupShapeSpace => {
            let input = PermutationInput::Tangent {
                tangent: &tangent,
                weights: &gpa.mean_weights,
            };
            let report = permutation_test(input, &groups, &options)?;
            let basis = group_shape_space_basis(&tangent, &gpa.mean_weights, &groups, p)?;
            let total: f64 = basis.eigenvalues.iter().sum();
            let explained = basis
                .eigenvalues
                .iter()
                .scan(0.0, |acc, l| {
                    *acc += l;
                    Some(*acc / total)
                })
                .collect();
            let model = FpcaModel::from_parts(
                gpa.mean.clone(),
                gpa.mean_weights.clone(),
                basis.eigenfunctions,
                basis.eigenvalues,
                explained,
                total,
                sample.len(),
                Vec::new(),
            )?;
            (report, model)
        }
    };
    let scores = model.score_matrix(&gpa.aligned)?;
    let (model, scores) = align_component_signs(&model, &scores, &groups, 0)?;

    let mut out = Output::create(&a.common.out)?;
    out.json("report.json", &report)?;
    let rows: Vec<Vec<String>> = (0..p)
        .map(|k| {
            vec![
                (k + 1).to_string(),
                fmt_f64(model.eigenvalues()[k]),
                fmt_f64(report.component_stats[k]),
                fmt_f64(report.component_p[k]),
                report.significant.contains(&(k + 1)).to_string(),
            ]
        })
        .collect();
    out.csv(
        "components.csv",
        &["component", "eigenvalue", "statistic", "p_value", "significant"],
        &rows,
    )?;
    let perm_rows: Vec<Vec<String>> = (0..report.n_perm)
        .map(|b| {
            let mut row = vec![(b + 1).to_string(), fmt_f64(report.permuted_global[b])];
            row.extend(report.permuted_components.iter().map(|c| fmt_f64(c[b])));
            row
        })
        .collect();
    let header = component_header(&["permutation", "global"], p);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("permutations.csv", &header, &perm_rows)?;
    let tags: Vec<String> = groups.iter().map(|&g| group_names[g].clone()).collect();
    let header = component_header(&["name", "group"], p);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("scores.csv", &header, &score_rows(sample.names(), Some(&tags), &scores))?;
    io::save_model(&SavedModel::Fpca(model.clone()), out.path("model.json")?)?;

    if !report.significant.is_empty() {
        let effect = combined_effect_shape(&model, &report.significant, a.effect_sd)?;
        let template = sample.template();
        write_shape(&mut out, "effect_plus.obj", template, &effect.plus_shape)?;
        write_shape(&mut out, "effect_minus.obj", template, &effect.minus_shape)?;
        let minus = template.with_vertices(effect.minus_shape.clone())?;
        let plus = template.with_vertices(effect.plus_shape.clone())?;
        let field = shape_difference_field(&minus, &plus, DifferenceMode::Normal)?;
        paint(&mut out, "effect_normal.ply", &minus, &field, &ColorMap::symmetric_for(&field))?;
    }
    out.json(
        "groups.json",
        &serde_json::json!({ "group_a": group_names[0], "group_b": group_names[1], "gpa": gpa_summary(&gpa) }),
    )?;
    println!(
        "global p = {}; significant components: {:?}",
        fmt_f64(report.global_p),
        report.significant
    );
    out.finish("compare", Some(a.seed), a)
}

fn split_affine(a: &SplitAffineArgs) -> Result<()> {
    let (sample, gpa) = aligned_cohort(&a.meshes, &a.gpa)?;
    let weights = a.weighted.then_some(&gpa.mean_weights);
    let split = affine_nonaffine_split(&gpa.aligned, &gpa.mean, weights)?;
    let mut out = Output::create(&a.common.out)?;
    let template = sample.template();
    write_shape(&mut out, "mean.obj", template, &gpa.mean)?;
    let mut rows = Vec::new();
    for (i, name) in sample.names().iter().enumerate() {
        write_shape(&mut out, &format!("affine/{name}"), template, &split.affine[i])?;
        write_shape(&mut out, &format!("nonaffine/{name}"), template, &split.nonaffine[i])?;
        let c = &split.coefficients[i];
        let mut row = vec![name.clone()];
        for r in 0..3 {
            for k in 0..3 {
                row.push(fmt_f64(c[(r, k)]));
            }
        }
        rows.push(row);
    }
    out.csv(
        "coefficients.csv",
        &["name", "a11", "a12", "a13", "a21", "a22", "a23", "a31", "a32", "a33"],
        &rows,
    )?;
    out.finish("split-affine", None, a)
}

fn optional_regions(path: Option<&Path>, n_vertices: usize) -> Result<RegionMap> {
    path.map(|p| io::read_regions(p, n_vertices))
        .transpose()
        .map(Option::unwrap_or_default)
}

fn asymmetry(a: &AsymmetryArgs) -> Result<()> {
    let meshes: Vec<(String, SurfaceMesh)> = match (&a.meshes, &a.mesh) {
        (Some(dir), _) => {
            let sample = io::read_cohort(dir, None)?;
            sample.names().iter().cloned().zip(sample.meshes().iter().cloned()).collect()
        }
        (None, Some(file)) => {
            let name = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "mesh.obj".into());
            vec![(name, io::read_mesh(file)?)]
        }
        (None, None) => return Err(invalid("one of --meshes or --mesh is required")),
    };
    let j = meshes[0].1.n_vertices();
    let pairing = io::read_pairing(&a.pairing, j)?;
    let regions = optional_regions(a.regions.as_deref(), j)?;
    let options = AsymmetryOptions {
        allow_scaling: a.allow_scaling,
        per_region_registration: a.per_region_registration,
    };
    let mut out = Output::create(&a.common.out)?;
    let mut rows = Vec::new();
    for (name, mesh) in &meshes {
        let report = asymmetry_report(mesh, &pairing, &regions, options)?;
        let mut row = vec![name.clone(), fmt_f64(report.global_score)];
        row.extend(report.region_scores.values().map(|v| fmt_f64(*v)));
        rows.push(row);
        let max = report.per_vertex_distance.iter().fold(0.0f64, |m, v| m.max(*v));
        let cmap = ColorMap::sequential(0.0, if max > 0.0 { max } else { 1.0 })?;
        paint(
            &mut out,
            &format!("painted/{}.ply", stem(name)),
            mesh,
            &report.per_vertex_distance,
            &cmap,
        )?;
    }
    let header: Vec<&str> = ["name", "global"]
        .into_iter()
        .chain(regions.keys().map(String::as_str))
        .collect();
    out.csv("asymmetry.csv", &header, &rows)?;
    out.finish("asymmetry", None, a)
}

fn assess(a: &AssessArgs) -> Result<()> {
    let pre = io::read_mesh(&a.pre)?;
    let post = io::read_mesh(&a.post)?;
    let j = pre.n_vertices();
    let pairing = io::read_pairing(&a.pairing, j)?;
    let regions = optional_regions(a.regions.as_deref(), j)?;
    let options = AsymmetryOptions {
        allow_scaling: a.allow_scaling_asymmetry,
        per_region_registration: a.per_region_registration,
    };
    let mut out = Output::create(&a.common.out)?;
    let model: ControlModel = match (&a.controls, &a.model) {
        (Some(dir), _) => {
            let controls = io::read_cohort(dir, None)?;
            let model = fit_control_model(
                &controls,
                &ControlOptions {
                    variance_threshold: a.variance,
                    gpa: a.gpa.options(),
                },
            )?
            .with_asymmetry_reference(&controls, &pairing, &regions, options)?;
            io::save_model(&SavedModel::Control(model.clone()), out.path("control_model.json")?)?;
            model
        }
        (None, Some(path)) => match io::load_model(path)? {
            SavedModel::Control(m) => m,
            SavedModel::Fpca(_) => return Err(invalid("--model must be a control model")),
        },
        (None, None) => return Err(invalid("one of --controls or --model is required")),
    };
    for w in &model.warnings {
        warn(w);
    }
    let result = integrated_assessment(&model, &pre, &post, &pairing, &regions, options)?;
    let mut files: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for tp in &result.time_points {
        let label = &tp.label;
        let entry = files.entry(label.clone()).or_default();
        let registered = format!("{label}/registered.obj");
        io::write_mesh(&tp.case_mesh, out.path(&registered)?)?;
        entry.insert("registered".into(), registered);
        let cc = format!("{label}/closest_control.obj");
        io::write_mesh(&tp.cc_mesh, out.path(&cc)?)?;
        entry.insert("closest_control".into(), cc);
        let normal = format!("{label}/closest_control_normal_distance.ply");
        let field = &tp.normal_distance_to_cc;
        paint(&mut out, &normal, &tp.case_mesh, field, &ColorMap::symmetric_for(field))?;
        entry.insert("closest_control_normal_distance".into(), normal);
        let asym = format!("{label}/asymmetry_distance.ply");
        let d = &tp.asymmetry.per_vertex_distance;
        let max = d.iter().fold(0.0f64, |m, v| m.max(*v));
        let cmap = ColorMap::sequential(0.0, if max > 0.0 { max } else { 1.0 })?;
        paint(&mut out, &asym, &tp.case_mesh, d, &cmap)?;
        entry.insert("asymmetry_distance".into(), asym);
    }
    let (first, second) = (&result.time_points[0], &result.time_points[1]);
    let change = shape_difference_field(&first.case_mesh, &second.case_mesh, DifferenceMode::Normal)?;
    paint(&mut out, "change_normal.ply", &first.case_mesh, &change, &ColorMap::symmetric_for(&change))?;
    let mut summary = result.to_json(&files);
    summary["change_normal"] = serde_json::json!("change_normal.ply");
    summary["control_model"] = serde_json::json!({
        "p": model.p,
        "chi2_threshold": model.chi2_threshold,
        "q95": model.q95,
        "n_controls": model.control_d.len(),
        "warnings": model.warnings,
    });
    out.json("assessment.json", &summary)?;
    out.finish("assess", None, a)
}

fn warp(a: &WarpArgs) -> Result<()> {
    let source = io::read_mesh(&a.source)?;
    let target = io::read_mesh(&a.target)?;
    let template = io::read_mesh(&a.template)?;
    if source.n_vertices() != target.n_vertices() {
        return Err(ShapeError::Correspondence(format!(
            "source has {} vertices, target {}",
            source.n_vertices(),
            target.n_vertices()
        )));
    }
    let (warped, field) = warp_template(
        &template,
        source.vertices(),
        target.vertices(),
        TpsOptions { ridge: a.ridge },
    )?;
    let mut out = Output::create(&a.common.out)?;
    io::write_mesh(&warped, out.path("warped.obj")?)?;
    let moved = shape_difference_field(&template, &warped, DifferenceMode::SignedEuclidean)?;
    paint(&mut out, "displacement.ply", &template, &moved, &ColorMap::symmetric_for(&moved))?;
    let affine: Vec<Vec<f64>> = field.beta2.row_iter().map(|r| r.iter().copied().collect()).collect();
    out.json(
        "warp.json",
        &serde_json::json!({
            "control_points": source.n_vertices(),
            "bending_energy": field.bending_energy,
            "bending_energy_per_coordinate": field.bending_energy_per_coordinate,
            "affine": affine,
        }),
    )?;
    out.finish("warp", None, a)
}

fn synth_config(a: &SimulateArgs) -> Result<SynthConfig> {
    let axes = || -> Result<[f64; 3]> {
        <[f64; 3]>::try_from(a.axes.as_slice())
            .map_err(|_| invalid(format!("--axes needs 3 values, got {}", a.axes.len())))
    };
    let base = match a.base.as_str() {
        "sphere" => BaseShape::Sphere,
        "ellipsoid" => BaseShape::Ellipsoid { axes: axes()? },
        "superellipsoid" => BaseShape::Superellipsoid {
            axes: axes()?,
            exponent: a.exponent,
        },
        other => return Err(invalid(format!("unknown base shape {other:?}"))),
    };
    Ok(SynthConfig {
        base,
        subdivisions: a.subdivisions,
        area: a.area,
        spectrum: a.spectrum.clone(),
        n_a: a.n_a,
        n_b: a.n_b,
        group_shift: (a.shift_mode > 0).then_some(GroupShift {
            mode: a.shift_mode,
            magnitude_sd: a.shift_sd,
        }),
        asymmetry: (a.asymmetry != 0.0).then(|| AsymmetryField {
            amplitude: a.asymmetry,
            ..AsymmetryField::default()
        }),
        noise_sd: a.noise_sd,
        nuisance: a.nuisance.then(Nuisance::default),
        whiten_scores: a.whiten,
        seed: a.seed,
    })
}

/// Mirror-symmetric regions of the base: upper/lower and front/back halves.
fn synth_regions(base: &SurfaceMesh) -> RegionMap {
    let v = base.vertices();
    let mut regions = RegionMap::new();
    for j in 0..base.n_vertices() {
        let vertical = if v[(j, 2)] > 0.0 { "upper" } else { "lower" };
        let depth = if v[(j, 1)] > 0.0 { "front" } else { "back" };
        regions.entry(vertical.into()).or_default().insert(j);
        regions.entry(depth.into()).or_default().insert(j);
    }
    regions
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let config = synth_config(a)?;
    let (sample, truth) = synth_cohort(&config)?;
    let (base, pairing) = synth_base_mesh(&config)?;
    let mut out = Output::create(&a.common.out)?;
    let mut labels = BTreeMap::new();
    for (i, (mesh, name)) in sample.meshes().iter().zip(sample.names()).enumerate() {
        let file = format!("{name}.obj");
        io::write_mesh(mesh, out.path(&format!("meshes/{file}"))?)?;
        labels.insert(file, ["A", "B"][truth.groups[i]].to_string());
    }
    io::write_labels(&labels, out.path("labels.csv")?)?;
    io::write_pairing(&pairing, out.path("pairing.csv")?)?;
    io::write_regions(&synth_regions(&base), out.path("regions.csv")?)?;
    io::write_mesh(&base, out.path("base.obj")?)?;
    out.json("ground_truth.json", &truth)?;
    out.finish("simulate", Some(a.seed), a)
}

fn diff(a: &DiffArgs) -> Result<()> {
    let base = io::read_mesh(&a.base)?;
    let other = io::read_mesh(&a.other)?;
    let field = shape_difference_field(&base, &other, a.mode)?;
    let cmap = match (a.cmap.as_str(), a.lo, a.hi) {
        ("diverging", Some(lo), Some(hi)) => {
            let reference = a
                .reference
                .unwrap_or(if lo <= 0.0 && 0.0 <= hi { 0.0 } else { (lo + hi) / 2.0 });
            ColorMap::diverging(lo, hi, reference)?
        }
        ("diverging", _, _) => match a.reference {
            None => ColorMap::symmetric_for(&field),
            Some(r) => {
                let m = field.iter().fold(0.0f64, |m, v| m.max((v - r).abs()));
                let m = if m > 0.0 { m } else { 1.0 };
                ColorMap::diverging(r - m, r + m, r)?
            }
        },
        ("sequential", Some(lo), Some(hi)) => ColorMap::sequential(lo, hi)?,
        ("sequential", _, _) => ColorMap::sequential_for(&field),
        (other, _, _) => return Err(invalid(format!("unknown colour map {other:?}"))),
    };
    let mut out = Output::create(&a.common.out)?;
    let summary = io::write_painted_mesh(&base, &field, &cmap, out.path("diff.ply")?)?;
    let rows: Vec<Vec<String>> = field
        .iter()
        .enumerate()
        .map(|(j, v)| vec![j.to_string(), fmt_f64(*v)])
        .collect();
    out.csv("diff.csv", &["vertex", "value"], &rows)?;
    let min = field.iter().copied().fold(f64::INFINITY, f64::min);
    let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.json(
        "diff.json",
        &serde_json::json!({
            "mode": a.mode,
            "min": min,
            "max": max,
            "colormap": cmap,
            "clamped_low": summary.clamped_low,
            "clamped_high": summary.clamped_high,
        }),
    )?;
    out.finish("diff", None, a)
}
