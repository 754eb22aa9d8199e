//! The reflection group G_{m,k} = ⟨(A,A), (B,I), (I,C)⟩ in normal form,
//! its action on the cells C_{i,j} of S³, and cell membership of points.
//!
//! Elements are stored as the triple (ε, j, ℓ) meaning
//! `(A,A)^ε (B,I)^j (I,C)^ℓ = (A^ε B^j, A^ε C^ℓ)`; matrices are derived on
//! demand and only serve as ground truth in checks.

use crate::sphere::{lawson_vertices, GreatCircle, LawsonParams, SpherePoint, Vec4};
use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use thiserror::Error;

/// Vertex-matching tolerance for cell identification.
pub const CELL_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("group elements belong to different surfaces ({0:?} vs {1:?})")]
    ContextMismatch(LawsonParams, LawsonParams),
    #[error("image of a cell vertex matches no Lawson vertex (residual {0:e})")]
    VertexMatch(f64),
    #[error("cell vertex images do not form a cell: {0}")]
    CellMismatch(String),
    #[error("point lies within {0:e} of C1 or C2; its cell is boundary-degenerate")]
    BoundaryDegenerate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    params: LawsonParams,
    eps: u8,
    j: usize,
    ell: usize,
}

impl GroupElement {
    pub fn identity(params: LawsonParams) -> Self {
        Self::new(params, 0, 0, 0)
    }

    /// Builds the element from any integers, reducing them to the canonical
    /// ranges.
    pub fn new(params: LawsonParams, eps: i64, j: i64, ell: i64) -> Self {
        Self {
            params,
            eps: eps.rem_euclid(2) as u8,
            j: j.rem_euclid(params.k() as i64 + 1) as usize,
            ell: ell.rem_euclid(params.m() as i64 + 1) as usize,
        }
    }

    pub fn params(&self) -> LawsonParams {
        self.params
    }

    pub fn eps(&self) -> u8 {
        self.eps
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn triple(&self) -> (u8, usize, usize) {
        (self.eps, self.j, self.ell)
    }

    pub fn is_identity(&self) -> bool {
        self.eps == 0 && self.j == 0 && self.ell == 0
    }

    /// Position in the lexicographic enumeration of [`enumerate_group`].
    pub fn index(&self) -> usize {
        let (m1, k1) = (self.params.m() + 1, self.params.k() + 1);
        (self.eps as usize * k1 + self.j) * m1 + self.ell
    }

    pub fn from_index(params: LawsonParams, index: usize) -> Self {
        let (m1, k1) = (params.m() + 1, params.k() + 1);
        let ell = index % m1;
        let j = (index / m1) % k1;
        let eps = index / (m1 * k1);
        Self::new(params, eps as i64, j as i64, ell as i64)
    }

    pub fn inverse(&self) -> Self {
        if self.eps == 1 {
            // (A,A)·h is an involution for every h in H.
            *self
        } else {
            Self::new(self.params, 0, -(self.j as i64), -(self.ell as i64))
        }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let blocks = BlockMatrices::new(&self.params);
        let a = if self.eps == 1 {
            blocks.a
        } else {
            Matrix2::identity()
        };
        let left = a * blocks.b.pow(self.j as u32);
        let right = a * blocks.c.pow(self.ell as u32);
        direct_sum(&left, &right)
    }

    pub fn apply(&self, x: &Vec4) -> Vec4 {
        self.to_matrix() * x
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.eps, self.j, self.ell)
    }
}

/// The 2×2 blocks A = diag(-1, 1), B = rot(2θ), C = rot(2β).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatrices {
    pub a: Matrix2<f64>,
    pub b: Matrix2<f64>,
    pub c: Matrix2<f64>,
}

impl BlockMatrices {
    pub fn new(params: &LawsonParams) -> Self {
        Self {
            a: Matrix2::new(-1.0, 0.0, 0.0, 1.0),
            b: rotation(2.0 * params.theta()),
            c: rotation(2.0 * params.beta()),
        }
    }
}

fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `X ⊕ Y`, acting on (x₁, x₂) by X and on (x₃, x₄) by Y.
pub fn direct_sum(x: &Matrix2<f64>, y: &Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(x);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(y);
    m
}

/// Normal-form product `g·h`, using `(B,C)(A,A) = (A,A)(B⁻¹,C⁻¹)`.
pub fn multiply(g: &GroupElement, h: &GroupElement) -> Result<GroupElement, GroupError> {
    if g.params != h.params {
        return Err(GroupError::ContextMismatch(g.params, h.params));
    }
    let sign = if h.eps == 1 { -1 } else { 1 };
    Ok(GroupElement::new(
        g.params,
        g.eps as i64 + h.eps as i64,
        sign * g.j as i64 + h.j as i64,
        sign * g.ell as i64 + h.ell as i64,
    ))
}

/// All 2(m+1)(k+1) elements in lexicographic (ε, j, ℓ) order; the identity
/// comes first.
pub fn enumerate_group(params: &LawsonParams) -> Vec<GroupElement> {
    (0..params.group_order())
        .map(|i| GroupElement::from_index(*params, i))
        .collect()
}

/// The index-two subgroup H = {ε = 0} ≅ Z_{k+1} × Z_{m+1}.
pub fn rotation_subgroup(params: &LawsonParams) -> Vec<GroupElement> {
    enumerate_group(params)
        .into_iter()
        .filter(|g| g.eps == 0)
        .collect()
}

/// One of the four edge reflections of Γ_{m,k}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    /// 1-based edge number: γ₁ = P₁Q₁, γ₂ = Q₁P₂, γ₃ = P₂Q₂, γ₄ = Q₂P₁.
    pub edge: usize,
    pub element: GroupElement,
    pub matrix: Matrix4<f64>,
    pub circle: GreatCircle,
}

/// r_{γ1} = (A,A), r_{γ2} = (A,AC), r_{γ3} = (AB,AC), r_{γ4} = (AB,A).
pub fn generators(params: &LawsonParams) -> [Generator; 4] {
    let triples = [(1, 0, 0), (1, 0, 1), (1, 1, 1), (1, 1, 0)];
    let arcs = crate::sphere::fundamental_quadrilateral(params);
    std::array::from_fn(|i| {
        let (e, j, l) = triples[i];
        let element = GroupElement::new(*params, e, j, l);
        Generator {
            edge: i + 1,
            element,
            matrix: element.to_matrix(),
            circle: arcs[i].parent,
        }
    })
}

/// Cell C_{i,j}, with 1-based canonical indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
}

impl CellIndex {
    pub fn new(params: &LawsonParams, i: i64, j: i64) -> Self {
        let ni = 2 * params.m() as i64 + 2;
        let nj = 2 * params.k() as i64 + 2;
        Self {
            i: ((i - 1).rem_euclid(ni) + 1) as usize,
            j: ((j - 1).rem_euclid(nj) + 1) as usize,
        }
    }

    pub fn parity_even(&self) -> bool {
        (self.i + self.j).is_multiple_of(2)
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C({},{})", self.i, self.j)
    }
}

/// Result of acting with the whole group on C_{1,1}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOrbit {
    /// Image cell of C_{1,1} for every group element, in enumeration order.
    pub images: Vec<(GroupElement, CellIndex)>,
    pub orbit: BTreeSet<CellIndex>,
    pub stabilizer: Vec<GroupElement>,
}

impl CellOrbit {
    pub fn all_even(&self) -> bool {
        self.orbit.iter().all(CellIndex::parity_even)
    }
}

fn match_vertex(x: &Vec4, family: &[SpherePoint]) -> Result<usize, GroupError> {
    let mut best = (f64::INFINITY, 0);
    for (idx, p) in family.iter().enumerate() {
        let d = (x - p.vector()).norm();
        if d < best.0 {
            best = (d, idx);
        }
    }
    if best.0 > CELL_MATCH_TOL {
        return Err(GroupError::VertexMatch(best.0));
    }
    Ok(best.1 + 1)
}

/// Given two 1-based indices of adjacent vertices on a circle with `n`
/// vertices, the cell index `i` with {i, i+1} equal to the pair.
fn lower_of_adjacent(a: usize, b: usize, n: usize) -> Result<usize, GroupError> {
    if b == a % n + 1 {
        Ok(a)
    } else if a == b % n + 1 {
        Ok(b)
    } else {
        Err(GroupError::CellMismatch(format!(
            "indices {a} and {b} are not adjacent modulo {n}"
        )))
    }
}

/// Image cell of C_{1,1} under `g`, identified by matching the images of
/// P₁, P₂, Q₁, Q₂ against the Lawson vertex families.
pub fn image_of_base_cell(g: &GroupElement) -> Result<CellIndex, GroupError> {
    let params = g.params();
    let verts = lawson_vertices(&params);
    let mat = g.to_matrix();
    let img = |p: &SpherePoint| mat * p.vector();
    let p1 = img(verts.p(1));
    let p2 = img(verts.p(2));
    let q1 = img(verts.q(1));
    let q2 = img(verts.q(2));
    // The group preserves C₁ and C₂ setwise, so P-images must be P vertices.
    let ip1 = match_vertex(&p1, &verts.p)?;
    let ip2 = match_vertex(&p2, &verts.p)?;
    let jq1 = match_vertex(&q1, &verts.q)?;
    let jq2 = match_vertex(&q2, &verts.q)?;
    let i = lower_of_adjacent(ip1, ip2, verts.p.len())?;
    let j = lower_of_adjacent(jq1, jq2, verts.q.len())?;
    Ok(CellIndex { i, j })
}

/// Orbit and stabilizer of C_{1,1}, computed from the group matrices.
pub fn cell_orbit(params: &LawsonParams) -> Result<CellOrbit, GroupError> {
    let mut images = Vec::with_capacity(params.group_order());
    let mut orbit = BTreeSet::new();
    let mut stabilizer = Vec::new();
    let base = CellIndex { i: 1, j: 1 };
    for g in enumerate_group(params) {
        let c = image_of_base_cell(&g)?;
        if c == base {
            stabilizer.push(g);
        }
        orbit.insert(c);
        images.push((g, c));
    }
    Ok(CellOrbit {
        images,
        orbit,
        stabilizer,
    })
}

/// The closed-form image cell observed for the matrices:
/// ε = 0 sends C_{1,1} to C_{1-2ℓ, 1-2j}; ε = 1 sends it to C_{2ℓ, 2j}
/// (indices modulo 2m+2 and 2k+2).
pub fn image_cell_formula(g: &GroupElement) -> CellIndex {
    let (l, j) = (g.ell() as i64, g.j() as i64);
    if g.eps() == 0 {
        CellIndex::new(&g.params(), 1 - 2 * l, 1 - 2 * j)
    } else {
        CellIndex::new(&g.params(), 2 * l, 2 * j)
    }
}

/// Angle of `(s, c)` measured from the `c` axis, in [0, 2π).
fn angle_from(c: f64, s: f64) -> f64 {
    let a = s.atan2(c);
    if a < 0.0 {
        a + 2.0 * PI
    } else if a >= 2.0 * PI {
        0.0
    } else {
        a
    }
}

/// The cell containing `x`: the angle of (x₃, x₄) measured from e₄ toward e₃
/// selects i, the angle of (x₁, x₂) measured from e₂ toward e₁ selects j,
/// both with half-open intervals [(i-1)β, iβ).
///
/// Points within 1e-9 of C₁ or C₂ have an undefined angle in one factor; they
/// are rejected unless `allow_boundary`, in which case the degenerate angle
/// is taken as 0.
pub fn cell_of_point(
    x: &SpherePoint,
    params: &LawsonParams,
    allow_boundary: bool,
) -> Result<CellIndex, GroupError> {
    let v = x.vector();
    let rz = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let rw = (v[2] * v[2] + v[3] * v[3]).sqrt();
    let degenerate = rz.min(rw);
    if degenerate < 1e-9 && !allow_boundary {
        return Err(GroupError::BoundaryDegenerate(degenerate));
    }
    let ap = if rw < 1e-300 {
        0.0
    } else {
        angle_from(v[3], v[2])
    };
    let aq = if rz < 1e-300 {
        0.0
    } else {
        angle_from(v[1], v[0])
    };
    let ni = 2 * params.m() + 2;
    let nj = 2 * params.k() + 2;
    let i = ((ap / params.beta()).floor() as usize).min(ni - 1) + 1;
    let j = ((aq / params.theta()).floor() as usize).min(nj - 1) + 1;
    Ok(CellIndex { i, j })
}

/// Writes the full multiplication table as CSV rows `g,h,g*h`, each element
/// printed as its normal-form triple.
pub fn write_multiplication_table<W: Write>(
    params: &LawsonParams,
    out: &mut W,
) -> std::io::Result<()> {
    let elems = enumerate_group(params);
    writeln!(out, "g,h,product")?;
    for g in &elems {
        for h in &elems {
            let p = multiply(g, h).expect("same context");
            writeln!(out, "\"{g}\",\"{h}\",\"{p}\"")?;
        }
    }
    Ok(())
}
