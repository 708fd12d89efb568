//! Wavefront OBJ, restricted to `v` and triangular `f` records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{fmt_sig9, write_text};
use crate::error::{Result, ShapeError};
use crate::mesh::{SurfaceMesh, Triangle};
use crate::Points;

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> ShapeError {
    ShapeError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn face_index(token: &str, n_vertices: usize, path: &Path, line: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad face index {token:?}")))?;
    let index = match raw {
        r if r > 0 => r - 1,
        r if r < 0 => n_vertices as i64 + r,
        _ => return Err(parse_error(path, line, "face index 0 is not valid")),
    };
    if index < 0 || index as usize >= n_vertices {
        return Err(parse_error(
            path,
            line,
            format!("face index {raw} out of range (vertices so far: {n_vertices})"),
        ));
    }
    Ok(index as usize)
}

/// Parse OBJ text; `path` is used in error messages only.
pub fn parse_obj(text: &str, path: &Path) -> Result<SurfaceMesh> {
    let mut coords: Vec<f64> = Vec::new();
    let mut triangles: Vec<Triangle> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let values: Vec<&str> = tokens.collect();
                if values.len() < 3 {
                    return Err(parse_error(path, line, "vertex needs 3 coordinates"));
                }
                for t in &values[..3] {
                    let v: f64 = t
                        .parse()
                        .map_err(|_| parse_error(path, line, format!("bad coordinate {t:?}")))?;
                    coords.push(v);
                }
            }
            Some("f") => {
                let n = coords.len() / 3;
                let idx = tokens
                    .map(|t| face_index(t, n, path, line))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() != 3 {
                    return Err(parse_error(
                        path,
                        line,
                        format!("face has {} vertices; only triangles are supported", idx.len()),
                    ));
                }
                triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    if coords.is_empty() {
        return Err(ShapeError::format(path, "no vertices"));
    }
    if triangles.is_empty() {
        return Err(ShapeError::format(path, "no faces"));
    }
    let vertices = Points::from_row_slice(coords.len() / 3, 3, &coords);
    let mesh = SurfaceMesh::new(vertices, triangles)
        .map_err(|e| ShapeError::format(path, e.to_string()))?;
    let unreferenced = mesh.unreferenced_vertices();
    if let Some(&first) = unreferenced.first() {
        return Err(ShapeError::format(
            path,
            format!(
                "{} vertices belong to no triangle (first: {})",
                unreferenced.len(),
                first + 1
            ),
        ));
    }
    Ok(mesh)
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ShapeError::io(path, e))?;
    parse_obj(&text, path)
}

/// OBJ text with 9 significant digits per coordinate and 1-based indices.
pub fn format_obj(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    let v = mesh.vertices();
    for j in 0..mesh.n_vertices() {
        let _ = writeln!(
            out,
            "v {} {} {}",
            fmt_sig9(v[(j, 0)]),
            fmt_sig9(v[(j, 1)]),
            fmt_sig9(v[(j, 2)])
        );
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn write_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_obj(mesh))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "# unit square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n";

    #[test]
    fn parses_square() {
        let mesh = parse_obj(SQUARE, Path::new("sq.obj")).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(mesh.vertex(2).x, 1.0);
    }

    #[test]
    fn slash_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n";
        let mesh = parse_obj(text, Path::new("t.obj")).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn quad_names_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let err = parse_obj(text, Path::new("q.obj")).unwrap_err();
        match err {
            ShapeError::Parse { line, message, .. } => {
                assert_eq!(line, 5);
                assert!(message.contains("only triangles"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_file_has_no_vertices() {
        let err = parse_obj("", Path::new("e.obj")).unwrap_err();
        assert!(err.to_string().contains("no vertices"));
    }

    #[test]
    fn malformed_vertex_names_line() {
        let err = parse_obj("v 0 0 0\nv 1 x 0\n", Path::new("m.obj")).unwrap_err();
        assert!(matches!(err, ShapeError::Parse { line: 2, .. }));
    }

    #[test]
    fn unreferenced_vertex_rejected() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 5\nf 1 2 3\n", Path::new("u.obj"))
            .unwrap_err();
        assert!(err.to_string().contains("belong to no triangle"));
    }

    #[test]
    fn round_trip_text_is_stable() {
        let mesh = parse_obj(SQUARE, Path::new("sq.obj")).unwrap();
        let text = format_obj(&mesh);
        let again = parse_obj(&text, Path::new("sq.obj")).unwrap();
        assert_eq!(format_obj(&again), text);
    }
}
