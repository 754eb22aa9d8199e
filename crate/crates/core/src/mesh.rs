//! Triangle meshes with vertices on S³.

use crate::sphere::{LawsonParams, Vec4};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {vertex} but the mesh has {count} vertices")]
    BadIndex {
        face: usize,
        vertex: usize,
        count: usize,
    },
    #[error("face {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("degenerate faces remain after edge flips: {0:?}")]
    Degenerate(Vec<usize>),
}

/// Role of a patch vertex with respect to the boundary quadrilateral.
///
/// Arcs are numbered 0..4 for γ₁..γ₄ (γ₁ = P₁Q₁, γ₂ = Q₁P₂, γ₃ = P₂Q₂,
/// γ₄ = Q₂P₁); corners 0..4 are P₁, Q₁, P₂, Q₂. Arc `a` runs from corner `a`
/// to corner `a + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexTag {
    Interior,
    Arc(u8),
    Corner(u8),
}

impl VertexTag {
    /// Whether the vertex lies on arc `a` (0-based), corners included.
    pub fn on_arc(&self, a: u8) -> bool {
        match *self {
            VertexTag::Interior => false,
            VertexTag::Arc(x) => x == a,
            VertexTag::Corner(c) => c == a || (c + 3) % 4 == a,
        }
    }

    pub fn is_boundary(&self) -> bool {
        !matches!(self, VertexTag::Interior)
    }

    /// Short code used in mesh files: `i`, `a0..a3`, `c0..c3`.
    pub fn code(&self) -> String {
        match self {
            VertexTag::Interior => "i".into(),
            VertexTag::Arc(a) => format!("a{a}"),
            VertexTag::Corner(c) => format!("c{c}"),
        }
    }

    pub fn parse(code: &str) -> Option<Self> {
        let (kind, rest) = code.split_at(1.min(code.len()));
        match kind {
            "i" if rest.is_empty() => Some(VertexTag::Interior),
            "a" => rest
                .parse::<u8>()
                .ok()
                .filter(|a| *a < 4)
                .map(VertexTag::Arc),
            "c" => rest
                .parse::<u8>()
                .ok()
                .filter(|c| *c < 4)
                .map(VertexTag::Corner),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Vec4>,
    pub faces: Vec<[usize; 3]>,
    pub tags: Vec<VertexTag>,
    /// Grid parameter the mesh was generated with (0 when unknown).
    pub resolution: usize,
    pub params: Option<LawsonParams>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec4>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let tags = vec![VertexTag::Interior; vertices.len()];
        let mesh = Self {
            vertices,
            faces,
            tags,
            resolution: 0,
            params: None,
        };
        mesh.validate_indices()?;
        Ok(mesh)
    }

    pub fn validate_indices(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                if v >= count {
                    return Err(MeshError::BadIndex {
                        face: fi,
                        vertex: v,
                        count,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::RepeatedVertex(fi));
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        total_area(&self.vertices, &self.faces)
    }

    /// Sum of geodesic triangle areas on S³.
    pub fn spherical_area(&self) -> f64 {
        total_spherical_area(&self.vertices, &self.faces)
    }

    /// Barycentric (one third of incident triangle areas) vertex areas.
    pub fn vertex_areas(&self) -> Vec<f64> {
        vertex_areas(&self.vertices, &self.faces)
    }

    /// Undirected edges (sorted pairs) with their incident faces, in order of
    /// first appearance.
    pub fn edge_faces(&self) -> Vec<([usize; 2], Vec<usize>)> {
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut out: Vec<([usize; 2], Vec<usize>)> = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for e in 0..3 {
                let key = sorted_edge(f[e], f[(e + 1) % 3]);
                match index.get(&key) {
                    Some(&slot) => out[slot].1.push(fi),
                    None => {
                        index.insert(key, out.len());
                        out.push((key, vec![fi]));
                    }
                }
            }
        }
        out
    }

    pub fn edges(&self) -> Vec<[usize; 2]> {
        self.edge_faces().into_iter().map(|(e, _)| e).collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Vertex adjacency lists (sorted, deduplicated).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Faces whose area is below `tol`.
    pub fn degenerate_faces(&self, tol: f64) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| self.face_area(f) < tol)
            .collect()
    }

    /// Flips the longest edge of each degenerate face when that edge is
    /// interior to the mesh and the flip produces non-degenerate faces.
    /// Returns the number of flips performed.
    pub fn flip_degenerate(&mut self, tol: f64) -> Result<usize, MeshError> {
        let mut flips = 0;
        for f in self.degenerate_faces(tol) {
            if self.face_area(f) >= tol {
                continue;
            }
            let [a, b, c] = self.faces[f];
            let len = |x: usize, y: usize| (self.vertices[x] - self.vertices[y]).norm();
            let cands = [(a, b, c), (b, c, a), (c, a, b)];
            let &(p, q, r) = cands
                .iter()
                .max_by(|x, y| len(x.0, x.1).total_cmp(&len(y.0, y.1)))
                .expect("three candidates");
            // Neighbor across (p, q) holds the edge as (q, p).
            let other =
                self.faces.iter().enumerate().position(|(gi, g)| {
                    gi != f && (0..3).any(|e| g[e] == q && g[(e + 1) % 3] == p)
                });
            let Some(g) = other else { continue };
            let s = *self.faces[g]
                .iter()
                .find(|&&v| v != p && v != q)
                .expect("triangle has a third vertex");
            let t1 = [r, p, s];
            let t2 = [s, q, r];
            let ok = |t: &[usize; 3]| {
                triangle_area(
                    &self.vertices[t[0]],
                    &self.vertices[t[1]],
                    &self.vertices[t[2]],
                ) >= tol
            };
            if ok(&t1) && ok(&t2) {
                self.faces[f] = t1;
                self.faces[g] = t2;
                flips += 1;
            }
        }
        let left = self.degenerate_faces(tol);
        if left.is_empty() {
            Ok(flips)
        } else {
            Err(MeshError::Degenerate(left))
        }
    }
}

pub fn sorted_edge(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Area of the flat triangle spanned by three points of R⁴.
pub fn triangle_area(a: &Vec4, b: &Vec4, c: &Vec4) -> f64 {
    let e1 = b - a;
    let e2 = c - a;
    let g = e1.norm_squared() * e2.norm_squared() - e1.dot(&e2).powi(2);
    0.5 * g.max(0.0).sqrt()
}

/// Area and its gradient with respect to the three corners.
pub fn triangle_area_gradient(a: &Vec4, b: &Vec4, c: &Vec4) -> (f64, [Vec4; 3]) {
    let e1 = b - a;
    let e2 = c - a;
    let n11 = e1.norm_squared();
    let n22 = e2.norm_squared();
    let n12 = e1.dot(&e2);
    let area = 0.5 * (n11 * n22 - n12 * n12).max(0.0).sqrt();
    if area <= 0.0 {
        return (0.0, [Vec4::zeros(); 3]);
    }
    let gb = (e1 * n22 - e2 * n12) / (4.0 * area);
    let gc = (e2 * n11 - e1 * n12) / (4.0 * area);
    (area, [-(gb + gc), gb, gc])
}

pub fn total_area(vertices: &[Vec4], faces: &[[usize; 3]]) -> f64 {
    faces
        .iter()
        .map(|f| triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
        .sum()
}

pub fn vertex_areas(vertices: &[Vec4], faces: &[[usize; 3]]) -> Vec<f64> {
    let mut out = vec![0.0; vertices.len()];
    for f in faces {
        let a = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]) / 3.0;
        for &v in f {
            out[v] += a;
        }
    }
    out
}

/// Sum of triangle areas and the per-vertex area gradient. Per-face terms
/// are evaluated in parallel and accumulated in face order.
pub fn area_and_gradient(vertices: &[Vec4], faces: &[[usize; 3]]) -> (f64, Vec<Vec4>) {
    use rayon::prelude::*;
    let per_face: Vec<(f64, [Vec4; 3])> = faces
        .par_iter()
        .map(|f| triangle_area_gradient(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
        .collect();
    let mut grad = vec![Vec4::zeros(); vertices.len()];
    let mut area = 0.0;
    for (f, (a, g)) in faces.iter().zip(per_face) {
        area += a;
        for i in 0..3 {
            grad[f[i]] += g[i];
        }
    }
    (area, grad)
}

/// Area of the geodesic triangle on S³ with corners `a`, `b`, `c` (unit
/// vectors): the spherical excess on the great 2-sphere through them,
/// `E = 2 atan2(|a∧b∧c|, 1 + a·b + b·c + c·a)`.
pub fn spherical_triangle_area(a: &Vec4, b: &Vec4, c: &Vec4) -> f64 {
    let vol = wedge3(a, b, c);
    let d = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * vol.atan2(d)
}

/// `|a∧b∧c|`, the volume of the parallelepiped spanned by three vectors,
/// evaluated as `|a∧(b−a)∧(c−a)|` to keep precision for small triangles.
fn wedge3(a: &Vec4, b: &Vec4, c: &Vec4) -> f64 {
    let aa = a.norm_squared();
    if aa <= 0.0 {
        return 0.0;
    }
    let u = b - a;
    let v = c - a;
    let u = u - a * (a.dot(&u) / aa);
    let v = v - a * (a.dot(&v) / aa);
    let g = u.norm_squared() * v.norm_squared() - u.dot(&v).powi(2);
    (aa * g.max(0.0)).sqrt()
}

/// Gradient of `|x∧p∧q|` with respect to `x`: the part of `x` orthogonal to
/// span(p, q), scaled by `|p∧q| / |x⊥|`.
fn wedge3_gradient(x: &Vec4, p: &Vec4, q: &Vec4) -> Vec4 {
    let e = q - p;
    let (pp, pe, ee) = (p.dot(p), p.dot(&e), e.dot(&e));
    let det = pp * ee - pe * pe;
    if det <= 0.0 {
        return Vec4::zeros();
    }
    // Orthogonalize against p first, then against e.
    let f = e - p * (pe / pp);
    let ff = f.norm_squared();
    let mut perp = x - p * (x.dot(p) / pp);
    perp -= f * (perp.dot(&f) / ff);
    let r = perp.norm();
    if r <= 0.0 {
        return Vec4::zeros();
    }
    perp * (det.max(0.0).sqrt() / r)
}

/// Spherical triangle area and its gradient with respect to the corners,
/// treating the corners as free points of R⁴ in the formula above.
pub fn spherical_triangle_area_gradient(a: &Vec4, b: &Vec4, c: &Vec4) -> (f64, [Vec4; 3]) {
    let vol = wedge3(a, b, c);
    let d = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    let area = 2.0 * vol.atan2(d);
    let denom = vol * vol + d * d;
    if denom <= 0.0 {
        return (area, [Vec4::zeros(); 3]);
    }
    let s = 2.0 / denom;
    let ga = (wedge3_gradient(a, b, c) * d - (b + c) * vol) * s;
    let gb = (wedge3_gradient(b, c, a) * d - (c + a) * vol) * s;
    let gc = (wedge3_gradient(c, a, b) * d - (a + b) * vol) * s;
    (area, [ga, gb, gc])
}

pub fn total_spherical_area(vertices: &[Vec4], faces: &[[usize; 3]]) -> f64 {
    faces
        .iter()
        .map(|f| spherical_triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
        .sum()
}

/// Sum of geodesic triangle areas and its per-vertex gradient, accumulated
/// in face order.
pub fn spherical_area_and_gradient(vertices: &[Vec4], faces: &[[usize; 3]]) -> (f64, Vec<Vec4>) {
    use rayon::prelude::*;
    let per_face: Vec<(f64, [Vec4; 3])> = faces
        .par_iter()
        .map(|f| {
            spherical_triangle_area_gradient(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]])
        })
        .collect();
    let mut grad = vec![Vec4::zeros(); vertices.len()];
    let mut area = 0.0;
    for (f, (a, g)) in faces.iter().zip(per_face) {
        area += a;
        for i in 0..3 {
            grad[f[i]] += g[i];
        }
    }
    (area, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let a = Vec4::new(0.1, 0.2, -0.3, 0.9);
        let b = Vec4::new(0.5, -0.1, 0.2, 0.4);
        let c = Vec4::new(-0.2, 0.6, 0.3, 0.1);
        let (area, g) = triangle_area_gradient(&a, &b, &c);
        assert!((area - triangle_area(&a, &b, &c)).abs() < 1e-15);
        let h = 1e-6;
        let pts = [a, b, c];
        for v in 0..3 {
            for d in 0..4 {
                let mut p = pts;
                p[v][d] += h;
                let up = triangle_area(&p[0], &p[1], &p[2]);
                p[v][d] -= 2.0 * h;
                let dn = triangle_area(&p[0], &p[1], &p[2]);
                let fd = (up - dn) / (2.0 * h);
                assert!(
                    (fd - g[v][d]).abs() < 1e-8,
                    "v={v} d={d}: {fd} vs {}",
                    g[v][d]
                );
            }
        }
    }

    #[test]
    fn spherical_area_matches_octant_and_gradient() {
        let e = |i: usize| {
            let mut v = Vec4::zeros();
            v[i] = 1.0;
            v
        };
        let octant = spherical_triangle_area(&e(0), &e(1), &e(2));
        assert!((octant - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        let a = Vec4::new(0.1, 0.2, -0.3, 0.9).normalize();
        let b = Vec4::new(0.5, -0.1, 0.2, 0.4).normalize();
        let c = Vec4::new(-0.2, 0.6, 0.3, 0.1).normalize();
        let (area, g) = spherical_triangle_area_gradient(&a, &b, &c);
        let h = 1e-6;
        let pts = [a, b, c];
        for (k, gk) in g.iter().enumerate() {
            for i in 0..4 {
                let mut p = pts;
                p[k][i] += h;
                let up = spherical_triangle_area(&p[0], &p[1], &p[2]);
                p[k][i] -= 2.0 * h;
                let dn = spherical_triangle_area(&p[0], &p[1], &p[2]);
                assert!(((up - dn) / (2.0 * h) - gk[i]).abs() < 1e-7, "{k} {i}");
            }
        }
        // Small triangles approach the flat area.
        let d = Vec4::new(0.0, 0.0, 0.0, 1.0);
        let (p, q) = (
            Vec4::new(1e-3, 0.0, 0.0, 1.0).normalize(),
            Vec4::new(0.0, 1e-3, 0.0, 1.0).normalize(),
        );
        assert!(
            (spherical_triangle_area(&d, &p, &q) / triangle_area(&d, &p, &q) - 1.0).abs() < 1e-5
        );
        assert!(area > triangle_area(&a, &b, &c));
    }

    #[test]
    fn tag_codes_round_trip() {
        for t in [
            VertexTag::Interior,
            VertexTag::Arc(0),
            VertexTag::Arc(3),
            VertexTag::Corner(2),
        ] {
            assert_eq!(VertexTag::parse(&t.code()), Some(t));
        }
        assert_eq!(VertexTag::parse("a7"), None);
        assert!(VertexTag::Corner(0).on_arc(0));
        assert!(VertexTag::Corner(0).on_arc(3));
        assert!(!VertexTag::Corner(0).on_arc(1));
    }

    #[test]
    fn flip_repairs_sliver() {
        // Square split so that one triangle is a sliver along a long edge.
        let v = vec![
            Vec4::new(0.0, 0.0, 0.0, 1.0),
            Vec4::new(1.0, 0.0, 0.0, 1.0),
            Vec4::new(0.5, 1e-16, 0.0, 1.0),
            Vec4::new(0.5, 1.0, 0.0, 1.0),
        ];
        let faces = vec![[0, 1, 2], [1, 0, 3]];
        let mut mesh = TriMesh::new(v, faces).unwrap();
        assert_eq!(mesh.degenerate_faces(1e-14), vec![0]);
        assert_eq!(mesh.flip_degenerate(1e-14).unwrap(), 1);
        assert!(mesh.degenerate_faces(1e-14).is_empty());
    }

    #[test]
    fn rejects_bad_faces() {
        let v = vec![Vec4::new(0.0, 0.0, 0.0, 1.0); 3];
        assert!(matches!(
            TriMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(MeshError::BadIndex { .. })
        ));
        assert!(matches!(
            TriMesh::new(v, vec![[0, 1, 1]]),
            Err(MeshError::RepeatedVertex(0))
        ));
    }
}
