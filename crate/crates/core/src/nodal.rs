//! Nodal domains, symmetry signatures, equator separation and the nodal
//! obstruction classifier on the fundamental patch.

use crate::assembly::AssembledSurface;
use crate::dsu::UnionFind;
use crate::fem::MassMatrix;
use crate::group::{generators, GroupElement};
use crate::mesh::{sorted_edge, VertexTag};
use crate::sphere::Vec4;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Relative zero cutoff `z`; vertices within `BAND_FACTOR·z` join no sign
/// component.
pub const ZERO_CUTOFF: f64 = 1e-9;
pub const BAND_FACTOR: f64 = 10.0;
pub const SIGNATURE_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodalError {
    #[error("function vanishes identically")]
    ZeroFunction,
    #[error("vertex vector has length {got}, surface has {expected} vertices")]
    Length { expected: usize, got: usize },
    #[error("surface carries no group action table")]
    MissingAction,
    #[error("function is not invariant (signature {signature:?}); check symmetry_signature first")]
    NotInvariant { signature: [Signature; 4] },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalDomains {
    pub count: usize,
    /// Domain label per vertex; `None` on the zero set and its band.
    pub labels: Vec<Option<usize>>,
    /// Sign of each domain.
    pub signs: Vec<i8>,
}

fn sup_norm(phi: &[f64]) -> f64 {
    phi.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// +1, −1, or 0 inside the hysteresis band.
fn signs(phi: &[f64]) -> Result<Vec<i8>, NodalError> {
    let sup = sup_norm(phi);
    if sup == 0.0 || !sup.is_finite() {
        return Err(NodalError::ZeroFunction);
    }
    let band = BAND_FACTOR * ZERO_CUTOFF * sup;
    Ok(phi
        .iter()
        .map(|&x| {
            if x.abs() <= band {
                0
            } else if x > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect())
}

fn check_len(surface: &AssembledSurface, phi: &[f64]) -> Result<(), NodalError> {
    let n = surface.mesh.vertex_count();
    if phi.len() != n {
        return Err(NodalError::Length {
            expected: n,
            got: phi.len(),
        });
    }
    Ok(())
}

/// Connected components of the same-sign subgraphs of the edge graph.
pub fn nodal_domains(surface: &AssembledSurface, phi: &[f64]) -> Result<NodalDomains, NodalError> {
    check_len(surface, phi)?;
    let sign = signs(phi)?;
    let n = phi.len();
    let mut uf = UnionFind::new(n);
    for [a, b] in surface.mesh.edges() {
        if sign[a] != 0 && sign[a] == sign[b] {
            uf.union(a, b);
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut labels = vec![None; n];
    let mut domain_signs = Vec::new();
    for v in 0..n {
        if sign[v] == 0 {
            continue;
        }
        let r = uf.find(v);
        if map[r] == usize::MAX {
            map[r] = domain_signs.len();
            domain_signs.push(sign[v]);
        }
        labels[v] = Some(map[r]);
    }
    Ok(NodalDomains {
        count: domain_signs.len(),
        labels,
        signs: domain_signs,
    })
}

/// `f_v = ⟨X, v⟩` per vertex, for unit `v`.
pub fn coordinate_function(surface: &AssembledSurface, v: &Vec4) -> Vec<f64> {
    surface.mesh.vertices.iter().map(|x| x.dot(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Signature {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "mixed")]
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureReport {
    pub signs: [Signature; 4],
    /// `‖φ∘π_σ − φ‖_M / ‖φ‖_M` and `‖φ∘π_σ + φ‖_M / ‖φ‖_M` per generator.
    pub distances: [[f64; 2]; 4],
}

impl SignatureReport {
    pub fn invariant(&self) -> bool {
        self.signs.iter().all(|s| *s == Signature::Plus)
    }
}

/// Compares `φ∘π_σ` with `±φ` for the four edge reflections.
pub fn symmetry_signature(
    surface: &AssembledSurface,
    mass: &MassMatrix,
    phi: &[f64],
) -> Result<SignatureReport, NodalError> {
    check_len(surface, phi)?;
    if surface.action_table.len() != surface.copies() || surface.action_table.is_empty() {
        return Err(NodalError::MissingAction);
    }
    let norm = mass.norm(phi);
    if norm == 0.0 {
        return Err(NodalError::ZeroFunction);
    }
    let gens = generators(&surface.params);
    let mut signs = [Signature::Mixed; 4];
    let mut distances = [[0.0; 2]; 4];
    for (i, g) in gens.iter().enumerate() {
        let moved = surface.pullback(&g.element, phi);
        let minus: Vec<f64> = moved.iter().zip(phi).map(|(a, b)| a - b).collect();
        let plus: Vec<f64> = moved.iter().zip(phi).map(|(a, b)| a + b).collect();
        let d = [mass.norm(&minus) / norm, mass.norm(&plus) / norm];
        distances[i] = d;
        signs[i] = if d[0] <= SIGNATURE_TOL {
            Signature::Plus
        } else if d[1] <= SIGNATURE_TOL {
            Signature::Minus
        } else {
            Signature::Mixed
        };
    }
    Ok(SignatureReport { signs, distances })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquatorCheck {
    pub direction: [f64; 4],
    pub component_count: usize,
    /// Edge number of the generator used to test the exchange, if one
    /// negates `v`.
    pub reflection_edge: Option<usize>,
    pub exchanged_by_reflection: bool,
}

/// Components of the surface minus the zero band of `f_v`, and whether a
/// generator reflection negating `v` swaps them.
pub fn equator_separation_check(
    surface: &AssembledSurface,
    v: &Vec4,
) -> Result<EquatorCheck, NodalError> {
    let f = coordinate_function(surface, v);
    let domains = nodal_domains(surface, &f)?;
    let gens = generators(&surface.params);
    let flip = gens.iter().find(|g| (g.matrix * v + v).norm() < 1e-9);
    let exchanged = match flip {
        Some(g) if domains.count == 2 => {
            let perm = surface.permutation(&g.element);
            (0..f.len()).all(|u| match (domains.labels[u], domains.labels[perm[u]]) {
                (Some(a), Some(b)) => a != b,
                (None, None) => true,
                _ => false,
            })
        }
        _ => false,
    };
    Ok(EquatorCheck {
        direction: [v[0], v[1], v[2], v[3]],
        component_count: domains.count,
        reflection_edge: flip.map(|g| g.edge),
        exchanged_by_reflection: exchanged,
    })
}

/// `(1/|G|) Σ_g ⟨g·X, e_a⟩⟨g·X, e_b⟩ − offset`, invariant under every `π_g`
/// as a vertex vector.
pub fn symmetrized_product(
    surface: &AssembledSurface,
    a: usize,
    b: usize,
    offset: f64,
) -> Vec<f64> {
    let x = &surface.mesh.vertices;
    let order = surface.copies() as f64;
    (0..x.len())
        .map(|v| {
            let s: f64 = surface
                .elements
                .iter()
                .map(|g| {
                    let w = surface.permutation(g)[v];
                    x[w][a] * x[w][b]
                })
                .sum();
            s / order - offset
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstructionBranch {
    /// No nodal component meets the patch interior.
    NoInteriorNodalSet,
    /// Some component satisfies H1–H4.
    HypothesesHold,
    HypothesesFail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentCheck {
    pub nodes: usize,
    pub meets_interior: bool,
    /// Simple path meeting the interior.
    pub h1: bool,
    /// Pieces of the patch once the component is removed.
    pub pieces: usize,
    pub h2: bool,
    /// Edge γ_a avoided by one of the two pieces.
    pub h3_edge: Option<usize>,
    pub h3: bool,
    pub h4: bool,
}

impl ComponentCheck {
    fn all(&self) -> bool {
        self.h1 && self.h2 && self.h3 && self.h4
    }

    fn depth(&self) -> usize {
        [self.h1, self.h2, self.h3, self.h4]
            .iter()
            .take_while(|h| **h)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstruction {
    pub branch: ObstructionBranch,
    #[serde(rename = "H1")]
    pub h1: bool,
    #[serde(rename = "H2")]
    pub h2: bool,
    #[serde(rename = "H3")]
    pub h3: bool,
    #[serde(rename = "H4")]
    pub h4: bool,
    pub global_count: usize,
    /// False only if H1–H4 hold and fewer than three global domains exist.
    pub consistent: bool,
    pub components: Vec<ComponentCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Vertex(usize),
    Edge([usize; 2]),
}

struct Patch {
    faces: Vec<[usize; 3]>,
    vertices: BTreeSet<usize>,
    edges: BTreeSet<[usize; 2]>,
    boundary_edges: BTreeSet<[usize; 2]>,
    boundary_vertices: BTreeSet<usize>,
    tags: BTreeMap<usize, VertexTag>,
}

impl Patch {
    fn new(surface: &AssembledSurface) -> Self {
        let faces: Vec<[usize; 3]> = surface
            .patch_faces()
            .iter()
            .map(|&f| surface.mesh.faces[f])
            .collect();
        let mut count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut vertices = BTreeSet::new();
        for f in &faces {
            for c in 0..3 {
                vertices.insert(f[c]);
                *count.entry(sorted_edge(f[c], f[(c + 1) % 3])).or_default() += 1;
            }
        }
        let boundary_edges: BTreeSet<[usize; 2]> = count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(e, _)| *e)
            .collect();
        let boundary_vertices = boundary_edges.iter().flatten().copied().collect();
        let tags = surface.vertex_of[0]
            .iter()
            .zip(&surface.patch_tags)
            .map(|(&v, &t)| (v, t))
            .collect();
        Self {
            faces,
            vertices,
            edges: count.into_keys().collect(),
            boundary_edges,
            boundary_vertices,
            tags,
        }
    }

    fn interior(&self, node: &Node) -> bool {
        match node {
            Node::Vertex(v) => !self.boundary_vertices.contains(v),
            Node::Edge(e) => !self.boundary_edges.contains(e),
        }
    }
}

/// Restricts the nodal set of a G-invariant `φ` to the fundamental patch
/// and tests the obstruction hypotheses on each nodal component.
///
/// The discrete nodal set has a node per zero vertex and per sign-changing
/// edge, joined when they share a patch face; all-zero faces are collapsed.
/// A component counts as an arc when it is a simple path with at least two
/// nodes.
pub fn obstruction_classifier(
    surface: &AssembledSurface,
    mass: &MassMatrix,
    phi: &[f64],
) -> Result<Obstruction, NodalError> {
    let signature = symmetry_signature(surface, mass, phi)?;
    if !signature.invariant() {
        return Err(NodalError::NotInvariant {
            signature: signature.signs,
        });
    }
    let sign = signs(phi)?;
    let global = nodal_domains(surface, phi)?;
    let patch = Patch::new(surface);

    let mut index: BTreeMap<Node, usize> = BTreeMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut node_of = |nd: Node, index: &mut BTreeMap<Node, usize>| {
        *index.entry(nd).or_insert_with(|| {
            nodes.push(nd);
            nodes.len() - 1
        })
    };
    let mut face_nodes: Vec<Vec<usize>> = Vec::with_capacity(patch.faces.len());
    for f in &patch.faces {
        let mut here = Vec::new();
        for &v in f {
            if sign[v] == 0 {
                here.push(node_of(Node::Vertex(v), &mut index));
            }
        }
        for c in 0..3 {
            let (a, b) = (f[c], f[(c + 1) % 3]);
            if sign[a] * sign[b] < 0 {
                here.push(node_of(Node::Edge(sorted_edge(a, b)), &mut index));
            }
        }
        face_nodes.push(here);
    }
    let count = nodes.len();
    let mut collapse = UnionFind::new(count);
    for (f, here) in patch.faces.iter().zip(&face_nodes) {
        if f.iter().all(|&v| sign[v] == 0) {
            collapse.union(here[0], here[1]);
            collapse.union(here[0], here[2]);
        }
    }
    let mut links: BTreeSet<[usize; 2]> = BTreeSet::new();
    for here in &face_nodes {
        if here.len() == 2 {
            let (a, b) = (collapse.find(here[0]), collapse.find(here[1]));
            if a != b {
                links.insert(sorted_edge(a, b));
            }
        }
    }
    let mut comp = UnionFind::new(count);
    for [a, b] in &links {
        comp.union(*a, *b);
    }
    for i in 0..count {
        let r = collapse.find(i);
        comp.union(i, r);
    }
    let (label, ncomp) = comp.labels();

    let gens = generators(&surface.params);
    let mut components = Vec::with_capacity(ncomp);
    for c in 0..ncomp {
        let members: Vec<usize> = (0..count).filter(|&i| label[i] == c).collect();
        let reps: BTreeSet<usize> = members.iter().map(|&i| collapse.find(i)).collect();
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        let mut edge_count = 0;
        for [a, b] in &links {
            if reps.contains(a) {
                edge_count += 1;
                *degree.entry(*a).or_default() += 1;
                *degree.entry(*b).or_default() += 1;
            }
        }
        let path =
            reps.len() >= 2 && edge_count + 1 == reps.len() && degree.values().all(|&d| d <= 2);
        let meets_interior = members.iter().any(|&i| patch.interior(&nodes[i]));
        let h1 = path && meets_interior;

        let mut cut_vertices = BTreeSet::new();
        let mut cut_edges = BTreeSet::new();
        for &i in &members {
            match nodes[i] {
                Node::Vertex(v) => {
                    cut_vertices.insert(v);
                }
                Node::Edge(e) => {
                    cut_edges.insert(e);
                }
            }
        }
        let pieces = split_patch(&patch, &cut_vertices, &cut_edges);
        let h2 = pieces.len() == 2;

        let mut h3_edge = None;
        let mut h4 = false;
        if h2 {
            'search: for piece in &pieces {
                for g in &gens {
                    let a = (g.edge - 1) as u8;
                    let avoids = piece
                        .iter()
                        .all(|v| !patch.tags.get(v).is_some_and(|t| t.on_arc(a)));
                    if avoids {
                        h3_edge = Some(g.edge);
                        h4 = distinct_domains(surface, &global, piece, &g.element);
                        break 'search;
                    }
                }
            }
        }
        components.push(ComponentCheck {
            nodes: reps.len(),
            meets_interior,
            h1,
            pieces: pieces.len(),
            h2,
            h3_edge,
            h3: h3_edge.is_some(),
            h4,
        });
    }

    let any_interior = components.iter().any(|c| c.meets_interior);
    let lead = components
        .iter()
        .filter(|c| c.meets_interior)
        .max_by_key(|c| (c.all(), c.depth()));
    let hold = lead.is_some_and(|c| c.all());
    let branch = if !any_interior {
        ObstructionBranch::NoInteriorNodalSet
    } else if hold {
        ObstructionBranch::HypothesesHold
    } else {
        ObstructionBranch::HypothesesFail
    };
    let depth = lead.map_or(0, |c| c.depth());
    Ok(Obstruction {
        branch,
        h1: depth >= 1,
        h2: depth >= 2,
        h3: depth >= 3,
        h4: depth >= 4,
        global_count: global.count,
        consistent: !hold || global.count >= 3,
        components,
    })
}

/// Vertex sets of the patch pieces left after removing a nodal component.
fn split_patch(
    patch: &Patch,
    cut_vertices: &BTreeSet<usize>,
    cut_edges: &BTreeSet<[usize; 2]>,
) -> Vec<Vec<usize>> {
    let verts: Vec<usize> = patch
        .vertices
        .iter()
        .copied()
        .filter(|v| !cut_vertices.contains(v))
        .collect();
    let local: BTreeMap<usize, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut uf = UnionFind::new(verts.len());
    for e in &patch.edges {
        if cut_edges.contains(e) {
            continue;
        }
        if let (Some(&a), Some(&b)) = (local.get(&e[0]), local.get(&e[1])) {
            uf.union(a, b);
        }
    }
    let (labels, count) = uf.labels();
    let mut pieces = vec![Vec::new(); count];
    for (i, &v) in verts.iter().enumerate() {
        pieces[labels[i]].push(v);
    }
    pieces
}

/// True when the labeled vertices of `piece` and of its image under `g`
/// are non-empty and share no global nodal domain.
fn distinct_domains(
    surface: &AssembledSurface,
    global: &NodalDomains,
    piece: &[usize],
    g: &GroupElement,
) -> bool {
    let perm = surface.permutation(g);
    let here: BTreeSet<usize> = piece.iter().filter_map(|&v| global.labels[v]).collect();
    let there: BTreeSet<usize> = piece
        .iter()
        .filter_map(|&v| global.labels[perm[v]])
        .collect();
    !here.is_empty() && !there.is_empty() && here.is_disjoint(&there)
}
