//! Piecewise-linear finite elements for the Laplace–Beltrami operator.
//!
//! Sign convention: the geometer's `Δφ + λφ = 0` corresponds to the
//! generalized problem `L φ = λ M φ` with `L` the positive semi-definite
//! cotangent stiffness matrix, so eigenvalues are non-negative.

use crate::mesh::{triangle_area, TriMesh};
use crate::sparse::{CsrMatrix, EnvelopeCholesky, SparseError};
use crate::sphere::Vec4;
use serde::{Deserialize, Serialize};

/// Faces with an angle below this are reported as badly conditioned.
pub const MIN_ANGLE_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassScheme {
    /// Diagonal, one third of the incident triangle areas per vertex.
    Lumped,
    /// Full P1 mass matrix.
    Consistent,
}

impl MassScheme {
    pub fn name(&self) -> &'static str {
        match self {
            MassScheme::Lumped => "lumped",
            MassScheme::Consistent => "consistent",
        }
    }
}

#[derive(Debug, Clone)]
pub enum MassMatrix {
    Lumped(Vec<f64>),
    Consistent(CsrMatrix),
}

impl MassMatrix {
    pub fn dim(&self) -> usize {
        match self {
            MassMatrix::Lumped(d) => d.len(),
            MassMatrix::Consistent(m) => m.dim(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MassMatrix::Lumped(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            MassMatrix::Consistent(m) => m.mul_vec(x),
        }
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::sparse::dot(x, &self.apply(y))
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Total mass `1ᵀ M 1`.
    pub fn total(&self) -> f64 {
        match self {
            MassMatrix::Lumped(d) => d.iter().sum(),
            MassMatrix::Consistent(m) => (0..m.dim())
                .map(|r| m.row(r).map(|(_, v)| v).sum::<f64>())
                .sum(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            MassMatrix::Lumped(d) => CsrMatrix::diagonal_from(d),
            MassMatrix::Consistent(m) => m.clone(),
        }
    }
}

/// Applies `M⁻¹`, exactly for the lumped scheme and through a Cholesky
/// factorization for the consistent one.
pub enum MassInverse {
    Lumped(Vec<f64>),
    Consistent(EnvelopeCholesky),
}

impl MassInverse {
    pub fn new(mass: &MassMatrix) -> Result<Self, SparseError> {
        Ok(match mass {
            MassMatrix::Lumped(d) => MassInverse::Lumped(d.clone()),
            MassMatrix::Consistent(m) => MassInverse::Consistent(EnvelopeCholesky::factor(m)?),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MassInverse::Lumped(d) => x.iter().zip(d).map(|(a, b)| a / b).collect(),
            MassInverse::Consistent(c) => c.solve(x),
        }
    }

    /// `‖r‖_{M⁻¹} = sqrt(rᵀ M⁻¹ r)`.
    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        crate::sparse::dot(r, &self.apply(r)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct FemPair {
    pub stiffness: CsrMatrix,
    pub mass: MassMatrix,
    pub scheme: MassScheme,
    /// Faces with an angle below [`MIN_ANGLE_DEG`].
    pub poorly_conditioned: Vec<usize>,
}

impl FemPair {
    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.stiffness.row(r).map(|(_, v)| v).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

fn cot(at: &Vec4, p: &Vec4, q: &Vec4) -> f64 {
    let u = p - at;
    let v = q - at;
    let dot = u.dot(&v);
    let cross = (u.norm_squared() * v.norm_squared() - dot * dot)
        .max(0.0)
        .sqrt();
    dot / cross
}

/// Cotangent stiffness triplets for the given faces.
pub fn cotan_triplets(vertices: &[Vec4], faces: &[[usize; 3]]) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::with_capacity(faces.len() * 9);
    for f in faces {
        for c in 0..3 {
            let (i, j, o) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
            let w = 0.5 * cot(&vertices[o], &vertices[i], &vertices[j]);
            t.push((i, j, -w));
            t.push((j, i, -w));
            t.push((i, i, w));
            t.push((j, j, w));
        }
    }
    t
}

pub fn cotan_stiffness(vertices: &[Vec4], faces: &[[usize; 3]]) -> CsrMatrix {
    CsrMatrix::from_triplets(vertices.len(), &cotan_triplets(vertices, faces))
}

pub fn consistent_mass(vertices: &[Vec4], faces: &[[usize; 3]]) -> CsrMatrix {
    let mut t = Vec::with_capacity(faces.len() * 9);
    for f in faces {
        let a = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
        for r in 0..3 {
            for c in 0..3 {
                t.push((f[r], f[c], if r == c { a / 6.0 } else { a / 12.0 }));
            }
        }
    }
    CsrMatrix::from_triplets(vertices.len(), &t)
}

fn min_angle_deg(a: &Vec4, b: &Vec4, c: &Vec4) -> f64 {
    let ang = |at: &Vec4, p: &Vec4, q: &Vec4| {
        let u = p - at;
        let v = q - at;
        (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos()
    };
    ang(a, b, c)
        .min(ang(b, c, a))
        .min(ang(c, a, b))
        .to_degrees()
}

/// Stiffness and mass matrices of a (closed) triangle mesh.
pub fn build_fem(mesh: &TriMesh, scheme: MassScheme) -> FemPair {
    let stiffness = cotan_stiffness(&mesh.vertices, &mesh.faces);
    let mass = match scheme {
        MassScheme::Lumped => MassMatrix::Lumped(mesh.vertex_areas()),
        MassScheme::Consistent => {
            MassMatrix::Consistent(consistent_mass(&mesh.vertices, &mesh.faces))
        }
    };
    let poorly_conditioned = mesh
        .faces
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            min_angle_deg(
                &mesh.vertices[f[0]],
                &mesh.vertices[f[1]],
                &mesh.vertices[f[2]],
            ) < MIN_ANGLE_DEG
        })
        .map(|(i, _)| i)
        .collect();
    FemPair {
        stiffness,
        mass,
        scheme,
        poorly_conditioned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> TriMesh {
        let s = 1.0 / 3f64.sqrt();
        let v = vec![
            Vec4::new(s, s, s, 0.0),
            Vec4::new(s, -s, -s, 0.0),
            Vec4::new(-s, s, -s, 0.0),
            Vec4::new(-s, -s, s, 0.0),
        ];
        TriMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap()
    }

    #[test]
    fn stiffness_is_symmetric_with_zero_row_sums() {
        let mesh = tetra();
        let fem = build_fem(&mesh, MassScheme::Lumped);
        assert!(fem.stiffness.max_asymmetry() < 1e-15);
        assert!(fem.max_row_sum() < 1e-12);
        assert!((fem.mass.total() - mesh.total_area()).abs() < 1e-12);
        let fem = build_fem(&mesh, MassScheme::Consistent);
        assert!((fem.mass.total() - mesh.total_area()).abs() < 1e-12);
        assert!(fem.poorly_conditioned.is_empty());
    }

    #[test]
    fn cotan_form_equals_dirichlet_energy() {
        // For a linear function the energy equals |grad|² times the area.
        let v = vec![
            Vec4::new(0.0, 0.0, 0.0, 0.0),
            Vec4::new(2.0, 0.0, 0.0, 0.0),
            Vec4::new(0.3, 1.5, 0.0, 0.0),
        ];
        let l = cotan_stiffness(&v, &[[0, 1, 2]]);
        let f: Vec<f64> = v.iter().map(|p| 3.0 * p[0] - p[1]).collect();
        let area = triangle_area(&v[0], &v[1], &v[2]);
        assert!((l.quadratic_form(&f) - 10.0 * area).abs() < 1e-12);
    }

    #[test]
    fn mass_inverse_dual_norm() {
        let mesh = tetra();
        let fem = build_fem(&mesh, MassScheme::Consistent);
        let inv = MassInverse::new(&fem.mass).unwrap();
        let x = vec![1.0, -2.0, 0.5, 0.25];
        let mx = fem.mass.apply(&x);
        // ‖Mx‖_{M⁻¹} = ‖x‖_M
        assert!((inv.dual_norm(&mx) - fem.mass.norm(&x)).abs() < 1e-12);
    }
}
