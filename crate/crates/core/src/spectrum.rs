//! Lowest eigenpairs of `L φ = λ M φ` by shift-invert block Lanczos with
//! full reorthogonalization and thick restarts, plus the residual checks
//! built on top of it.

use crate::assembly::AssembledSurface;
use crate::fem::{FemPair, MassInverse, MassMatrix};
use crate::group::GroupElement;
use crate::sparse::{dot, EnvelopeCholesky, SparseError};
use crate::sphere::Vec4;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// |λ| at or below this is the constant mode.
pub const ZERO_MODE_TOL: f64 = 1e-6;
/// |λ₀| above this (and above [`ZERO_MODE_TOL`]) is an outright failure.
pub const ZERO_MODE_WARN: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("requested {count} eigenpairs of a {dim}-dimensional problem")]
    BadCount { count: usize, dim: usize },
    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,
    #[error("factorization failed: {0}")]
    Factorization(#[from] SparseError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// M-normalized eigenvector.
    pub phi: Vec<f64>,
    /// `‖Lφ − λMφ‖_{M⁻¹}`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenOptions {
    pub tol: f64,
    pub block: usize,
    /// Basis size before a restart, as a multiple of the requested count
    /// plus blocks.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// `K = L + shift·M` is factored.
    pub shift: f64,
    pub seed: u64,
}

impl EigenOptions {
    pub fn for_count(count: usize) -> Self {
        let block = 8;
        Self {
            tol: 1e-8,
            block,
            max_basis: (2 * count + 3 * block).max(count + 4 * block),
            max_restarts: 60,
            shift: 1.0,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResult {
    pub pairs: Vec<EigenPair>,
    pub converged: bool,
    pub restarts: usize,
    pub operator_applications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMode {
    /// |λ₀| ≤ 1e-6.
    Constant,
    /// 1e-6 < |λ₀| ≤ 1e-2: mesh-quality warning.
    Suspect,
    Missing,
}

pub fn classify_zero_mode(lambda0: f64) -> ZeroMode {
    let a = lambda0.abs();
    if a <= ZERO_MODE_TOL {
        ZeroMode::Constant
    } else if a <= ZERO_MODE_WARN {
        ZeroMode::Suspect
    } else {
        ZeroMode::Missing
    }
}

struct Problem<'a> {
    fem: &'a FemPair,
    chol: EnvelopeCholesky,
    shift: f64,
    applications: usize,
}

impl Problem<'_> {
    /// `T x = K⁻¹ M x`, self-adjoint in the M inner product.
    fn apply(&mut self, x: &[f64]) -> Vec<f64> {
        self.applications += 1;
        self.chol.solve(&self.fem.mass.apply(x))
    }
}

fn m_dot(mass: &MassMatrix, x: &[f64], y: &[f64]) -> f64 {
    mass.inner(x, y)
}

/// M-orthogonalizes `cols` against `basis` (twice) and among themselves;
/// columns that collapse are dropped.
fn orthonormalize(mass: &MassMatrix, basis: &[Vec<f64>], cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut c in cols {
        let start = m_dot(mass, &c, &c).sqrt();
        for _ in 0..2 {
            for b in basis.iter().chain(out.iter()) {
                let mb = mass.apply(b);
                let h = dot(&c, &mb);
                for (ci, bi) in c.iter_mut().zip(b) {
                    *ci -= h * bi;
                }
            }
        }
        let norm = m_dot(mass, &c, &c).sqrt();
        if norm > 1e-10 * start && norm > 0.0 {
            for ci in c.iter_mut() {
                *ci /= norm;
            }
            out.push(c);
        }
    }
    out
}

fn residual_norm(fem: &FemPair, inverse: &MassInverse, phi: &[f64], lambda: f64) -> f64 {
    let lphi = fem.stiffness.mul_vec(phi);
    let mphi = fem.mass.apply(phi);
    let r: Vec<f64> = lphi
        .iter()
        .zip(&mphi)
        .map(|(a, b)| a - lambda * b)
        .collect();
    inverse.dual_norm(&r)
}

/// The `count` smallest eigenpairs, ascending. On non-convergence the best
/// available pairs are returned with `converged = false`.
pub fn lowest_eigenpairs(
    fem: &FemPair,
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenResult, SpectrumError> {
    let n = fem.dim();
    if count == 0 || count + opts.block >= n {
        return Err(SpectrumError::BadCount { count, dim: n });
    }
    let k = fem
        .stiffness
        .linear_combination(1.0, &fem.mass.to_csr(), opts.shift);
    let mut problem = Problem {
        fem,
        chol: EnvelopeCholesky::factor(&k)?,
        shift: opts.shift,
        applications: 0,
    };
    let inverse = MassInverse::new(&fem.mass)?;
    let block = opts.block.max(1);
    let keep = (count + block).min(opts.max_basis.saturating_sub(block));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    // Basis columns with their images under T, and the pending block.
    let mut v: Vec<Vec<f64>> = Vec::new();
    let mut w: Vec<Vec<f64>> = Vec::new();
    let mut pending = orthonormalize(&fem.mass, &[], start);
    let mut restarts = 0;
    let mut best: Vec<EigenPair>;
    loop {
        while v.len() < opts.max_basis && !pending.is_empty() {
            let images: Vec<Vec<f64>> = pending.iter().map(|p| problem.apply(p)).collect();
            v.append(&mut pending);
            w.extend(images.iter().cloned());
            let tail = &w[w.len() - images.len()..];
            pending = orthonormalize(&fem.mass, &v, tail.to_vec());
        }
        let q = v.len();
        let mut h = DMatrix::zeros(q, q);
        let mw: Vec<Vec<f64>> = w.iter().map(|c| fem.mass.apply(c)).collect();
        for i in 0..q {
            for j in 0..=i {
                let x = 0.5 * (dot(&v[i], &mw[j]) + dot(&v[j], &mw[i]));
                h[(i, j)] = x;
                h[(j, i)] = x;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let combine = |cols: &[Vec<f64>], s: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (c, col) in cols.iter().enumerate() {
                let coef = eig.eigenvectors[(c, s)];
                if coef != 0.0 {
                    for (o, x) in out.iter_mut().zip(col) {
                        *o += coef * x;
                    }
                }
            }
            out
        };
        let take = keep.min(q);
        let ritz: Vec<Vec<f64>> = order[..take].iter().map(|&s| combine(&v, s)).collect();
        let ritz_w: Vec<Vec<f64>> = order[..take].iter().map(|&s| combine(&w, s)).collect();
        best = ritz
            .iter()
            .zip(&order[..take])
            .take(count)
            .map(|(phi, &s)| {
                let mu = eig.eigenvalues[s];
                let lambda = 1.0 / mu - problem.shift;
                let residual = residual_norm(fem, &inverse, phi, lambda);
                EigenPair {
                    lambda,
                    phi: phi.clone(),
                    residual,
                }
            })
            .collect();
        let done = best.len() == count && best.iter().all(|p| p.residual <= opts.tol);
        if done || restarts >= opts.max_restarts || pending.is_empty() {
            break;
        }
        restarts += 1;
        v = ritz;
        w = ritz_w;
        pending = orthonormalize(&fem.mass, &v, pending);
        if pending.is_empty() {
            let extra: Vec<Vec<f64>> = (0..block)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            pending = orthonormalize(&fem.mass, &v, extra);
        }
    }
    best.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    for pair in best.iter_mut() {
        normalize_sign(&mut pair.phi);
    }
    let converged = best.len() == count && best.iter().all(|p| p.residual <= opts.tol);
    Ok(EigenResult {
        pairs: best,
        converged,
        restarts,
        operator_applications: problem.applications,
    })
}

/// Fixes the sign so that the entry of largest magnitude (lowest index on
/// ties) is positive.
fn normalize_sign(phi: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in phi.iter().enumerate() {
        if x.abs() > phi[idx].abs() {
            idx = i;
        }
    }
    if phi.get(idx).is_some_and(|x| *x < 0.0) {
        for x in phi.iter_mut() {
            *x = -*x;
        }
    }
}

pub fn rayleigh_quotient(fem: &FemPair, phi: &[f64]) -> Result<f64, SpectrumError> {
    let den = fem.mass.inner(phi, phi);
    if den <= 0.0 || phi.iter().all(|x| *x == 0.0) {
        return Err(SpectrumError::ZeroVector);
    }
    Ok(fem.stiffness.quadratic_form(phi) / den)
}

/// `‖L f − λ M f‖_{M⁻¹} / ‖f‖_M`.
pub fn eigen_residual(fem: &FemPair, f: &[f64], lambda: f64) -> Result<f64, SpectrumError> {
    let inverse = MassInverse::new(&fem.mass)?;
    let norm = fem.mass.norm(f);
    if norm <= 0.0 {
        return Err(SpectrumError::ZeroVector);
    }
    Ok(residual_norm(fem, &inverse, f, lambda) / norm)
}

/// `‖L f_v − 2 M f_v‖_{M⁻¹} / ‖2 M f_v‖_{M⁻¹}` for the four coordinate
/// functions `f_v = ⟨X, e_v⟩`.
pub fn takahashi_residual(vertices: &[Vec4], fem: &FemPair) -> Result<[f64; 4], SpectrumError> {
    let mut out = [0.0; 4];
    for (c, slot) in out.iter_mut().enumerate() {
        let f: Vec<f64> = vertices.iter().map(|x| x[c]).collect();
        *slot = eigen_residual(fem, &f, 2.0)? / 2.0;
    }
    Ok(out)
}

/// Groups sorted eigenvalues whose consecutive gaps are at most `gap`;
/// returns (mean, size) per cluster.
pub fn clusters(lambdas: &[f64], gap: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &l in lambdas {
        match out.last_mut() {
            Some(c) if l - c[c.len() - 1] <= gap => c.push(l),
            _ => out.push(vec![l]),
        }
    }
    out.iter()
        .map(|c| (c.iter().sum::<f64>() / c.len() as f64, c.len()))
        .collect()
}

/// Largest relative M-norm distance of `φ∘g` from the span of `basis`
/// (M-orthonormal columns), over basis vectors and the given elements.
pub fn projection_defect(
    surface: &AssembledSurface,
    mass: &MassMatrix,
    basis: &[Vec<f64>],
    elements: &[GroupElement],
) -> f64 {
    let mb: Vec<Vec<f64>> = basis.iter().map(|b| mass.apply(b)).collect();
    let mut worst = 0.0f64;
    for g in elements {
        for phi in basis {
            let mut moved = surface.pullback(g, phi);
            let norm = mass.norm(&moved);
            for (b, m) in basis.iter().zip(&mb) {
                let c = dot(&moved, m);
                for (x, y) in moved.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
            if norm > 0.0 {
                worst = worst.max(mass.norm(&moved) / norm);
            }
        }
    }
    worst
}
