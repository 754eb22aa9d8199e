//! The closed surface ξ_{m,k}: all group images of the fundamental patch,
//! welded along their boundaries.

use crate::dsu::UnionFind;
use crate::group::{enumerate_group, multiply, GroupElement};
use crate::mesh::{sorted_edge, MeshError, TriMesh, VertexTag};
use crate::sphere::{LawsonParams, Vec4};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

/// Absolute weld distance in R⁴.
pub const WELD_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("patch carries no Lawson parameters")]
    MissingParams,
    #[error(
        "weld ambiguity: cluster of diameter {diameter:e} exceeds tolerance; points {points:?}"
    )]
    WeldAmbiguity {
        diameter: f64,
        points: Vec<[f64; 4]>,
    },
    #[error("non-manifold edge {edge:?} shared by {faces} faces")]
    NonManifoldEdge { edge: [usize; 2], faces: usize },
    #[error("surface is not orientable")]
    NonOrientable,
    #[error("Euler characteristic {found}, expected {expected}")]
    EulerMismatch { expected: i64, found: i64 },
    #[error(
        "symmetry broken: {element} moves vertex {vertex} to no vertex (closest {distance:e})"
    )]
    SymmetryBroken {
        element: String,
        vertex: usize,
        distance: f64,
    },
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone)]
pub struct AssembledSurface {
    pub mesh: TriMesh,
    pub params: LawsonParams,
    /// Group elements in enumeration order; copy `c` is `elements[c]` applied
    /// to the patch.
    pub elements: Vec<GroupElement>,
    /// Copy index of every face.
    pub copy_map: Vec<usize>,
    /// `vertex_of[c][p]`: global vertex of patch vertex `p` in copy `c`.
    pub vertex_of: Vec<Vec<usize>>,
    /// `action_table[c][v] = π_{elements[c]}(v)`.
    pub action_table: Vec<Vec<usize>>,
    pub patch_tags: Vec<VertexTag>,
    pub weld_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    #[serde(rename = "V")]
    pub v: usize,
    #[serde(rename = "E")]
    pub e: usize,
    #[serde(rename = "F")]
    pub f: usize,
    pub chi: i64,
    pub genus: i64,
    pub copies: usize,
    pub weld_count: usize,
    pub area: f64,
}

impl AssembledSurface {
    pub fn copies(&self) -> usize {
        self.elements.len()
    }

    pub fn face_element(&self, face: usize) -> GroupElement {
        self.elements[self.copy_map[face]]
    }

    /// Vertex permutation of `g`: `π_g(v)` is the vertex at `g·x_v`.
    /// Composition follows the group product: `π_{gh} = π_g ∘ π_h`.
    pub fn permutation(&self, g: &GroupElement) -> &[usize] {
        &self.action_table[g.index()]
    }

    /// Pullback `(φ∘g)(v) = φ(π_g(v))`.
    pub fn pullback(&self, g: &GroupElement, phi: &[f64]) -> Vec<f64> {
        self.permutation(g).iter().map(|&w| phi[w]).collect()
    }

    pub fn topology(&self) -> TopologyReport {
        let chi = self.mesh.euler_characteristic();
        TopologyReport {
            v: self.mesh.vertex_count(),
            e: self.mesh.edges().len(),
            f: self.mesh.face_count(),
            chi,
            genus: (2 - chi) / 2,
            copies: self.copies(),
            weld_count: self.weld_count,
            area: self.mesh.total_area(),
        }
    }

    /// Faces belonging to the identity copy, i.e. the fundamental patch.
    pub fn patch_faces(&self) -> Vec<usize> {
        (0..self.copy_map.len())
            .filter(|&f| self.copy_map[f] == 0)
            .collect()
    }
}

/// Weld clusters of points within `tol`, by a sweep along a fixed generic
/// direction. Returns the cluster label of every point, labels numbered by
/// first (lowest-index) member.
pub fn weld_points(points: &[Vec4], tol: f64) -> Result<(Vec<usize>, usize), AssemblyError> {
    let dir = Vec4::new(0.537_7, 0.183_4, -0.225_9, 0.862_2).normalize();
    let proj: Vec<f64> = points.iter().map(|x| x.dot(&dir)).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let mut uf = UnionFind::new(points.len());
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if proj[j] - proj[i] > tol {
                break;
            }
            if (points[i] - points[j]).norm() <= tol {
                uf.union(i, j);
            }
        }
    }
    let (labels, count) = uf.labels();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    for m in members.iter().filter(|m| m.len() > 2) {
        let mut diameter = 0.0f64;
        for (a, &i) in m.iter().enumerate() {
            for &j in &m[a + 1..] {
                diameter = diameter.max((points[i] - points[j]).norm());
            }
        }
        if diameter > tol {
            return Err(AssemblyError::WeldAmbiguity {
                diameter,
                points: m
                    .iter()
                    .map(|&i| [points[i][0], points[i][1], points[i][2], points[i][3]])
                    .collect(),
            });
        }
    }
    Ok((labels, count))
}

/// Welds coincident vertices of an arbitrary mesh. Each merged vertex keeps
/// the position of its lowest-index member. Returns the new mesh and the
/// number of vertices removed.
pub fn weld_mesh(mesh: &TriMesh, tol: f64) -> Result<(TriMesh, usize), AssemblyError> {
    let (labels, count) = weld_points(&mesh.vertices, tol)?;
    let mut vertices = vec![Vec4::zeros(); count];
    let mut tags = vec![VertexTag::Interior; count];
    let mut seen = vec![false; count];
    for (i, &l) in labels.iter().enumerate() {
        if !seen[l] {
            seen[l] = true;
            vertices[l] = mesh.vertices[i];
            tags[l] = mesh.tags[i];
        }
    }
    let faces = mesh.faces.iter().map(|f| f.map(|v| labels[v])).collect();
    let out = TriMesh {
        vertices,
        faces,
        tags,
        resolution: mesh.resolution,
        params: mesh.params,
    };
    out.validate_indices()?;
    Ok((out, mesh.vertex_count() - count))
}

/// Flips faces so that every shared edge is traversed in opposite
/// directions by its two faces. Requires a 2-manifold.
fn orient(faces: &mut [[usize; 3]]) -> Result<(), AssemblyError> {
    let mut by_edge: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for e in 0..3 {
            by_edge
                .entry(sorted_edge(f[e], f[(e + 1) % 3]))
                .or_default()
                .push(fi);
        }
    }
    let mut edges: Vec<_> = by_edge.into_iter().collect();
    edges.sort_unstable_by_key(|(e, _)| *e);
    let mut adjacency: Vec<Vec<(usize, [usize; 2])>> = vec![Vec::new(); faces.len()];
    for (edge, fs) in &edges {
        if fs.len() != 2 {
            return Err(AssemblyError::NonManifoldEdge {
                edge: *edge,
                faces: fs.len(),
            });
        }
        adjacency[fs[0]].push((fs[1], *edge));
        adjacency[fs[1]].push((fs[0], *edge));
    }
    let directed =
        |f: &[usize; 3], e: [usize; 2]| (0..3).any(|i| f[i] == e[0] && f[(i + 1) % 3] == e[1]);
    let mut state: Vec<Option<bool>> = vec![None; faces.len()];
    for seed in 0..faces.len() {
        if state[seed].is_some() {
            continue;
        }
        state[seed] = Some(false);
        let mut queue = VecDeque::from([seed]);
        while let Some(f) = queue.pop_front() {
            let flip_f = state[f].expect("visited");
            for &(g, e) in &adjacency[f] {
                // After applying flips, f and g must traverse e oppositely.
                let same = directed(&faces[f], e) == directed(&faces[g], e);
                let want = flip_f ^ same;
                match state[g] {
                    None => {
                        state[g] = Some(want);
                        queue.push_back(g);
                    }
                    Some(s) if s != want => return Err(AssemblyError::NonOrientable),
                    Some(_) => {}
                }
            }
        }
    }
    for (f, s) in faces.iter_mut().zip(state) {
        if s == Some(true) {
            f.swap(1, 2);
        }
    }
    Ok(())
}

/// Applies every group element to the patch, welds the copies, repairs
/// orientation, checks the 2-manifold property and χ = 2 − 2mk, and builds
/// the vertex action of the group.
pub fn assemble(patch: &TriMesh, weld_tol: f64) -> Result<AssembledSurface, AssemblyError> {
    let params = patch.params.ok_or(AssemblyError::MissingParams)?;
    let elements = enumerate_group(&params);
    let nv = patch.vertex_count();
    let copies: Vec<Vec<Vec4>> = elements
        .par_iter()
        .map(|g| {
            let mat = g.to_matrix();
            patch.vertices.iter().map(|x| mat * x).collect()
        })
        .collect();
    let points: Vec<Vec4> = copies.into_iter().flatten().collect();
    let (labels, count) = weld_points(&points, weld_tol)?;
    let mut vertices = vec![Vec4::zeros(); count];
    let mut seen = vec![false; count];
    for (i, &l) in labels.iter().enumerate() {
        if !seen[l] {
            seen[l] = true;
            vertices[l] = points[i];
        }
    }
    let vertex_of: Vec<Vec<usize>> = (0..elements.len())
        .map(|c| labels[c * nv..(c + 1) * nv].to_vec())
        .collect();
    let mut faces = Vec::with_capacity(elements.len() * patch.face_count());
    let mut copy_map = Vec::with_capacity(faces.capacity());
    for (c, map) in vertex_of.iter().enumerate() {
        for f in &patch.faces {
            faces.push(f.map(|v| map[v]));
            copy_map.push(c);
        }
    }
    orient(&mut faces)?;
    let mesh = TriMesh {
        vertices,
        faces,
        tags: vec![VertexTag::Interior; count],
        resolution: patch.resolution,
        params: Some(params),
    };
    mesh.validate_indices()?;
    let found = mesh.euler_characteristic();
    if found != params.euler_characteristic() {
        return Err(AssemblyError::EulerMismatch {
            expected: params.euler_characteristic(),
            found,
        });
    }
    let mut origin = vec![(usize::MAX, usize::MAX); count];
    for (c, map) in vertex_of.iter().enumerate() {
        for (p, &v) in map.iter().enumerate() {
            if origin[v].0 == usize::MAX {
                origin[v] = (c, p);
            }
        }
    }
    let mut action_table = Vec::with_capacity(elements.len());
    for g in &elements {
        let mat = g.to_matrix();
        let mut perm = Vec::with_capacity(count);
        for (v, &(c, p)) in origin.iter().enumerate() {
            let gc = multiply(g, &elements[c]).expect("same group");
            let w = vertex_of[gc.index()][p];
            let distance = (mat * mesh.vertices[v] - mesh.vertices[w]).norm();
            if distance > weld_tol {
                return Err(AssemblyError::SymmetryBroken {
                    element: g.to_string(),
                    vertex: v,
                    distance,
                });
            }
            perm.push(w);
        }
        action_table.push(perm);
    }
    Ok(AssembledSurface {
        mesh,
        params,
        elements,
        copy_map,
        vertex_of,
        action_table,
        patch_tags: patch.tags.clone(),
        weld_count: points.len() - count,
    })
}

/// Vertex permutation of `g` on an assembled surface.
pub fn group_action_on_mesh(
    surface: &AssembledSurface,
    g: &GroupElement,
) -> Result<Vec<usize>, AssemblyError> {
    if g.params() != surface.params {
        return Err(AssemblyError::SymmetryBroken {
            element: g.to_string(),
            vertex: 0,
            distance: f64::INFINITY,
        });
    }
    Ok(surface.permutation(g).to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddednessReport {
    /// Minimum distance between faces that share no vertex; `None` when
    /// skipped.
    pub min_separation: Option<f64>,
    pub pairs_checked: usize,
    pub notice: Option<String>,
}

/// Squared distance between the convex hulls of two point sets of at most
/// three points each, by enumerating all pairs of sub-simplices and keeping
/// the critical points with non-negative barycentric coordinates.
pub fn simplex_distance(a: &[Vec4], b: &[Vec4]) -> f64 {
    let subsets = |n: usize| -> Vec<Vec<usize>> {
        (1u32..(1 << n))
            .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
            .collect()
    };
    let mut best = f64::INFINITY;
    for sa in subsets(a.len()) {
        for sb in subsets(b.len()) {
            if let Some(d) = affine_critical_distance(
                &sa.iter().map(|&i| a[i]).collect::<Vec<_>>(),
                &sb.iter().map(|&i| b[i]).collect::<Vec<_>>(),
            ) {
                best = best.min(d);
            }
        }
    }
    best.sqrt()
}

/// Minimizes |Σ αᵢ aᵢ − Σ βⱼ bⱼ|² over the affine hulls (Σα = Σβ = 1) and
/// returns the squared distance if the minimizer lies in both simplices.
fn affine_critical_distance(a: &[Vec4], b: &[Vec4]) -> Option<f64> {
    // Parametrize: p = a0 + Σ s_i (a_i − a0), q = b0 + Σ t_j (b_j − b0).
    let mut cols: Vec<Vec4> = Vec::new();
    for ai in &a[1..] {
        cols.push(ai - a[0]);
    }
    for bj in &b[1..] {
        cols.push(-(bj - b[0]));
    }
    let r0 = a[0] - b[0];
    let k = cols.len();
    let coeffs = if k == 0 {
        Vec::new()
    } else {
        let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| cols[i].dot(&cols[j]));
        let rhs = nalgebra::DVector::from_fn(k, |i, _| -cols[i].dot(&r0));
        let scale = (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let chol = gram.clone().cholesky()?;
        let sol = chol.solve(&rhs);
        // Reject near-singular systems; lower-dimensional faces cover them.
        let det = chol.l().diagonal().iter().map(|d| d * d).product::<f64>();
        if det <= 1e-24 * scale.powi(k as i32) {
            return None;
        }
        sol.iter().copied().collect()
    };
    let (s, t) = coeffs.split_at(a.len() - 1);
    let inside = |w: &[f64]| w.iter().all(|&x| x >= 0.0) && w.iter().sum::<f64>() <= 1.0;
    if !inside(s) || !inside(t) {
        return None;
    }
    let mut r = r0;
    for (c, w) in cols.iter().zip(&coeffs) {
        r += c * *w;
    }
    Some(r.norm_squared())
}

/// Minimum distance between non-adjacent faces of a closed mesh. Candidate
/// pairs come from a uniform grid on the face bounding boxes; the cell size
/// doubles until a pair within it is found.
pub fn embeddedness_diagnostic(mesh: &TriMesh) -> EmbeddednessReport {
    let boundary = mesh.edge_faces().iter().any(|(_, fs)| fs.len() != 2);
    if boundary || mesh.face_count() < 4 {
        return EmbeddednessReport {
            min_separation: None,
            pairs_checked: 0,
            notice: Some("mesh is not a closed surface; embeddedness diagnostic skipped".into()),
        };
    }
    let corners: Vec<[Vec4; 3]> = mesh
        .faces
        .iter()
        .map(|f| f.map(|v| mesh.vertices[v]))
        .collect();
    let boxes: Vec<(Vec4, Vec4)> = corners
        .iter()
        .map(|c| (c[0].inf(&c[1]).inf(&c[2]), c[0].sup(&c[1]).sup(&c[2])))
        .collect();
    let mut cell = mesh
        .edges()
        .iter()
        .map(|e| (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm())
        .fold(0.0, f64::max);
    loop {
        let key = |x: f64| (x / cell).floor() as i64;
        let mut grid: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
        for (f, (lo, hi)) in boxes.iter().enumerate() {
            let (l, h) = (
                lo.map(|x| key(x - cell / 2.0)),
                hi.map(|x| key(x + cell / 2.0)),
            );
            for i0 in l[0]..=h[0] {
                for i1 in l[1]..=h[1] {
                    for i2 in l[2]..=h[2] {
                        for i3 in l[3]..=h[3] {
                            grid.entry([i0, i1, i2, i3]).or_default().push(f);
                        }
                    }
                }
            }
        }
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for list in grid.values() {
            for (x, &f) in list.iter().enumerate() {
                for &g in &list[x + 1..] {
                    let shared = mesh.faces[f].iter().any(|v| mesh.faces[g].contains(v));
                    if !shared {
                        candidates.push((f.min(g), f.max(g)));
                    }
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let pairs_checked = candidates.len();
        let best = candidates
            .par_iter()
            .map(|&(f, g)| simplex_distance(&corners[f], &corners[g]))
            .reduce(|| f64::INFINITY, f64::min);
        if best <= cell || cell > 4.0 {
            return EmbeddednessReport {
                min_separation: Some(best),
                pairs_checked,
                notice: None,
            };
        }
        cell *= 2.0;
    }
}
