use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Wavefront OBJ text: all `v` lines, then 1-based `f` lines. Coordinates
/// are written in shortest round-trip form, so import restores them exactly.
pub fn export_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.triangles.len() * 20);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

/// Reads `v` and `f` records; polygon faces are fan-triangulated. Texture
/// and normal references (`f 1/2/3`) and negative (relative) indices are
/// accepted; other record types are ignored.
pub fn import_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |message: String| Error::Obj {
            line: line_no,
            message,
        };
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad coordinate {t:?}"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(err("non-finite coordinate".into()));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let n = vertices.len() as i64;
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let raw: i64 = head
                            .parse()
                            .map_err(|_| err(format!("bad face index {t:?}")))?;
                        let resolved = match raw {
                            0 => return Err(err("face index 0 (OBJ indices are 1-based)".into())),
                            r if r > 0 => r - 1,
                            r => n + r,
                        };
                        if resolved < 0 || resolved >= n {
                            return Err(err(format!(
                                "face index {raw} out of range for {n} vertices"
                            )));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::unit_cube;

    #[test]
    fn empty_mesh_has_no_records() {
        let text = export_obj(&TriangleMesh::default());
        assert!(!text.lines().any(|l| l.starts_with("v ") || l.starts_with("f ")));
    }

    #[test]
    fn cube_counts_and_round_trip() {
        let cube = unit_cube();
        let text = export_obj(&cube);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 12);
        assert_eq!(import_obj(&text).unwrap(), cube);
    }

    #[test]
    fn awkward_coordinates_survive() {
        let m = TriangleMesh::new(
            vec![[390_123.456_789_012_3, 5.820_000_1e6, 0.1 + 0.2], [1e-300, -0.0, 7.0], [3.0, 2.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(import_obj(&export_obj(&m)).unwrap(), m);
    }

    #[test]
    fn quad_face_fans() {
        let m = import_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3//3 4\n").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        let rel = import_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(rel.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn bad_indices_name_the_line() {
        match import_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 0 1 2\n") {
            Err(Error::Obj { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match import_obj("# c\nv 0 0 0\nf 1 2 3\n") {
            Err(Error::Obj { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("out of range"));
            }
            other => panic!("{other:?}"),
        }
    }
}
