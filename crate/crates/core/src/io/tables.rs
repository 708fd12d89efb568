//! CSV sidecar files.
//!
//! - regions: `vertex_index,region_name`
//! - pairing: `index,mirror_index`, optionally preceded by a line
//!   `# plane_normal=nx,ny,nz` (default `1,0,0`). Each pair may be listed in
//!   one or both directions; every vertex must be covered.
//! - labels: `filename,label`
//! - weight overrides: `vertex_index,weight`
//!
//! A first row whose leading field is not an integer (or, for labels, is
//! `filename`) is treated as a header. Lines starting with `#` are ignored.
//! Row numbers in errors are 1-based file lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use super::write_text;
use crate::error::{Result, ShapeError};
use crate::mesh::{BilateralPairing, RegionMap};

type Row = (usize, Vec<String>);

fn read_rows(path: &Path, text: &str, width: usize) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ShapeError::format(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != width {
            return Err(ShapeError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {width} fields, got {}", record.len()),
            });
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ShapeError::io(path, e))
}

fn drop_header(mut rows: Vec<Row>) -> Vec<Row> {
    if rows
        .first()
        .is_some_and(|(_, r)| r[0].parse::<i64>().is_err())
    {
        rows.remove(0);
    }
    rows
}

fn parse_index(path: &Path, line: usize, field: &str, n_vertices: usize) -> Result<usize> {
    let err = |message: String| ShapeError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let j: usize = field
        .parse()
        .map_err(|_| err(format!("bad vertex index {field:?}")))?;
    if j >= n_vertices {
        return Err(err(format!(
            "vertex index {j} out of range (mesh has {n_vertices} vertices)"
        )));
    }
    Ok(j)
}

pub fn read_regions(path: impl AsRef<Path>, n_vertices: usize) -> Result<RegionMap> {
    let path = path.as_ref();
    let rows = drop_header(read_rows(path, &read_file(path)?, 2)?);
    let mut regions = RegionMap::new();
    for (line, r) in rows {
        let j = parse_index(path, line, &r[0], n_vertices)?;
        if r[1].is_empty() {
            return Err(ShapeError::Parse {
                path: path.to_path_buf(),
                line,
                message: "empty region name".into(),
            });
        }
        regions.entry(r[1].clone()).or_default().insert(j);
    }
    Ok(regions)
}

fn parse_plane_normal(path: &Path, text: &str) -> Result<Vector3<f64>> {
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some(value) = rest.trim().strip_prefix("plane_normal=") else {
            continue;
        };
        let parts: Vec<f64> = value
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| ShapeError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("bad plane normal {value:?}"),
            })?;
        if parts.len() != 3 {
            return Err(ShapeError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "plane normal needs 3 components".into(),
            });
        }
        return Ok(Vector3::new(parts[0], parts[1], parts[2]));
    }
    Ok(Vector3::x())
}

pub fn read_pairing(path: impl AsRef<Path>, n_vertices: usize) -> Result<BilateralPairing> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let normal = parse_plane_normal(path, &text)?;
    let rows = drop_header(read_rows(path, &text, 2)?);
    let mut pair: Vec<Option<usize>> = vec![None; n_vertices];
    for (line, r) in rows {
        let a = parse_index(path, line, &r[0], n_vertices)?;
        let b = parse_index(path, line, &r[1], n_vertices)?;
        for (x, y) in [(a, b), (b, a)] {
            match pair[x] {
                Some(existing) if existing != y => {
                    return Err(ShapeError::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!(
                            "pairing is not an involution: vertex {x} paired with both {existing} and {y}"
                        ),
                    })
                }
                _ => pair[x] = Some(y),
            }
        }
    }
    let pair = pair
        .into_iter()
        .enumerate()
        .map(|(j, p)| p.ok_or_else(|| ShapeError::format(path, format!("vertex {j} has no mirror"))))
        .collect::<Result<Vec<_>>>()?;
    BilateralPairing::new(pair, normal).map_err(|e| ShapeError::format(path, e.to_string()))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let mut rows = read_rows(path, &read_file(path)?, 2)?;
    if rows.first().is_some_and(|(_, r)| r[0] == "filename") {
        rows.remove(0);
    }
    let mut labels = BTreeMap::new();
    for (line, r) in rows {
        if labels.insert(r[0].clone(), r[1].clone()).is_some() {
            return Err(ShapeError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate label for {:?}", r[0]),
            });
        }
    }
    Ok(labels)
}

pub fn read_weight_overrides(path: impl AsRef<Path>, n_vertices: usize) -> Result<BTreeMap<usize, f64>> {
    let path = path.as_ref();
    let rows = drop_header(read_rows(path, &read_file(path)?, 2)?);
    let mut out = BTreeMap::new();
    for (line, r) in rows {
        let j = parse_index(path, line, &r[0], n_vertices)?;
        let w: f64 = r[1].parse().ok().filter(|w: &f64| *w >= 0.0 && w.is_finite()).ok_or_else(|| {
            ShapeError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bad weight {:?}", r[1]),
            }
        })?;
        out.insert(j, w);
    }
    Ok(out)
}

/// CSV text with a header row.
pub fn format_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_text(path.as_ref(), &format_csv(header, rows))
}

pub fn write_regions(regions: &RegionMap, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<Vec<String>> = regions
        .iter()
        .flat_map(|(name, set)| set.iter().map(move |j| vec![j.to_string(), name.clone()]))
        .collect();
    write_csv(path, &["vertex_index", "region_name"], &rows)
}

pub fn write_pairing(pairing: &BilateralPairing, path: impl AsRef<Path>) -> Result<()> {
    let n = pairing.plane_normal();
    let rows: Vec<Vec<String>> = (0..pairing.len())
        .map(|j| vec![j.to_string(), pairing.mirror(j).to_string()])
        .collect();
    let text = format!(
        "# plane_normal={},{},{}\n{}",
        super::fmt_f64(n.x),
        super::fmt_f64(n.y),
        super::fmt_f64(n.z),
        format_csv(&["index", "mirror_index"], &rows)
    );
    write_text(path.as_ref(), &text)
}

pub fn write_labels(labels: &BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<Vec<String>> = labels.iter().map(|(f, l)| vec![f.clone(), l.clone()]).collect();
    write_csv(path, &["filename", "label"], &rows)
}
