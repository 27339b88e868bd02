//! Triangle meshes of embedded bodies on full `S^2` grids.
//!
//! Vertex order is latitude-major: node `(i, j)` of the grid (ring `i` from the
//! north, longitude `j`) is vertex `i * n_lon + j`, followed by one north and
//! one south cap vertex placed at the centroids of the first and last rings.
//! Faces are counter-clockwise seen from outside.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridVariant;

use super::EmbeddedBody;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn from_body(body: &EmbeddedBody) -> Result<Self> {
        let grid = &body.grid;
        if grid.variant() != GridVariant::FullS2 {
            return Err(Error::InvalidGrid("mesh export needs a full S^2 grid".into()));
        }
        let (n_lat, n_lon) = (grid.n_lat(), grid.n_lon());
        let mut vertices: Vec<[f64; 3]> = body.points.iter().map(|p| [p[0], p[1], p[2]]).collect();
        let centroid = |ring: usize| {
            let mut c = [0.0; 3];
            for p in &vertices[ring * n_lon..(ring + 1) * n_lon] {
                for d in 0..3 {
                    c[d] += p[d] / n_lon as f64;
                }
            }
            c
        };
        let (north, south) = (centroid(0), centroid(n_lat - 1));
        vertices.push(north);
        vertices.push(south);
        let (n_pole, s_pole) = (n_lat * n_lon, n_lat * n_lon + 1);

        let p = |i: usize, j: usize| i * n_lon + j % n_lon;
        let mut faces = Vec::with_capacity(2 * n_lat * n_lon);
        for j in 0..n_lon {
            faces.push([n_pole, p(0, j), p(0, j + 1)]);
        }
        for i in 0..n_lat - 1 {
            for j in 0..n_lon {
                faces.push([p(i, j), p(i + 1, j), p(i, j + 1)]);
                faces.push([p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)]);
            }
        }
        for j in 0..n_lon {
            faces.push([s_pole, p(n_lat - 1, j + 1), p(n_lat - 1, j)]);
        }
        Ok(Self { vertices, faces })
    }

    /// Enclosed volume by the divergence theorem; positive when faces are
    /// oriented outward.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i]);
                (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0]))
                    / 6.0
            })
            .sum()
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} vertices, {} faces", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        s
    }

    /// ASCII PLY.
    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.vertices.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        let _ = writeln!(s, "element face {}", self.faces.len());
        s.push_str("property list uchar int vertex_indices\nend_header\n");
        for v in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
        }
        s
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(self.to_obj().as_bytes())?;
        Ok(())
    }

    pub fn write_ply(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(self.to_ply().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::embed;
    use crate::grid::{build_grid, legendre, Resolution, SupportField};

    #[test]
    fn round_mesh_is_closed_and_outward() {
        let g = build_grid(GridVariant::FullS2, 2, Resolution::full(16, 32)).unwrap();
        let u = SupportField::constant(g.clone(), 2.0);
        let mesh = TriangleMesh::from_body(&embed(&u).unwrap()).unwrap();
        assert_eq!(mesh.vertices.len(), 16 * 32 + 2);
        assert_eq!(mesh.faces.len(), 2 * 16 * 32);
        // every edge shared by exactly two faces with opposite directions
        let mut edges = std::collections::HashMap::new();
        for f in &mesh.faces {
            for e in 0..3 {
                *edges.entry((f[e], f[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        assert!(edges
            .iter()
            .all(|(&(a, b), &n)| n == 1 && edges.get(&(b, a)) == Some(&1)));
        let vol = mesh.signed_volume();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 8.0;
        assert!(vol > 0.0 && (vol - exact).abs() / exact < 0.05, "{vol}");
        for f in &mesh.faces {
            let [a, b, c] = f.map(|i| mesh.vertices[i]);
            let (e1, e2) = (
                [b[0] - a[0], b[1] - a[1], b[2] - a[2]],
                [c[0] - a[0], c[1] - a[1], c[2] - a[2]],
            );
            let n = [
                e1[1] * e2[2] - e1[2] * e2[1],
                e1[2] * e2[0] - e1[0] * e2[2],
                e1[0] * e2[1] - e1[1] * e2[0],
            ];
            assert!(n[0] * a[0] + n[1] * a[1] + n[2] * a[2] > 0.0);
        }
    }

    #[test]
    fn obj_and_ply_counts() {
        let g = build_grid(GridVariant::FullS2, 2, Resolution::full(8, 16)).unwrap();
        let u = SupportField::zonal(g, |t| 1.0 + 0.05 * legendre(2, t.cos())).unwrap();
        let mesh = TriangleMesh::from_body(&embed(&u).unwrap()).unwrap();
        let obj = mesh.to_obj();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 130);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 256);
        let ply = mesh.to_ply();
        assert!(ply.contains("element vertex 130\n") && ply.contains("element face 256\n"));
        assert_eq!(ply.lines().count(), 9 + 130 + 256);
    }

    #[test]
    fn axisym_bodies_are_refused() {
        let g = build_grid(GridVariant::Axisym, 3, Resolution::axisym(16)).unwrap();
        let body = embed(&SupportField::constant(g, 1.0)).unwrap();
        assert!(TriangleMesh::from_body(&body).is_err());
    }
}
