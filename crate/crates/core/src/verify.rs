//! Exhaustive property checks on the reflection group and its cell action.

use crate::group::{
    cell_orbit, enumerate_group, generators, image_cell_formula, multiply, rotation_subgroup,
    CellIndex, GroupElement,
};
use crate::sphere::LawsonParams;
use nalgebra::Matrix4;
use serde::Serialize;

pub const MATRIX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// First failing case, if any.
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub m: usize,
    pub k: usize,
    pub order: usize,
    pub expected_order: usize,
    pub orbit_size: usize,
    pub stabilizer_size: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl GroupReport {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

fn check(name: &'static str, failure: Option<String>) -> Check {
    Check {
        name,
        passed: failure.is_none(),
        counterexample: failure,
    }
}

fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn pairs(elems: &[GroupElement]) -> impl Iterator<Item = (&GroupElement, &GroupElement)> {
    elems
        .iter()
        .flat_map(move |g| elems.iter().map(move |h| (g, h)))
}

pub fn verify_group(params: &LawsonParams) -> GroupReport {
    let elems = enumerate_group(params);
    let mats: Vec<Matrix4<f64>> = elems.iter().map(|g| g.to_matrix()).collect();
    let order = params.group_order();
    let mut checks = Vec::new();

    checks.push(check(
        "order",
        (elems.len() != order).then(|| format!("{} elements, expected {order}", elems.len())),
    ));
    checks.push(check(
        "identity_present",
        (!elems.iter().any(|g| g.is_identity())).then(|| "(0,0,0) missing".to_string()),
    ));
    checks.push(check(
        "orthogonal",
        elems.iter().zip(&mats).find_map(|(g, a)| {
            let d = max_abs(&(a.transpose() * a - Matrix4::identity()));
            (d > MATRIX_TOL).then(|| format!("{g}: |AᵀA − I| = {d:e}"))
        }),
    ));
    checks.push(check(
        "distinct_matrices",
        (0..elems.len()).find_map(|i| {
            (0..i).find_map(|j| {
                (max_abs(&(mats[i] - mats[j])) < 1e-9)
                    .then(|| format!("{} and {} coincide", elems[i], elems[j]))
            })
        }),
    ));
    checks.push(check(
        "normal_form_bijective",
        (0..order).find_map(|i| {
            let g = GroupElement::from_index(*params, i);
            (g.index() != i || elems[i] != g)
                .then(|| format!("index {i} maps to {g} at {}", g.index()))
        }),
    ));
    checks.push(check(
        "multiplication_closure",
        pairs(&elems).find_map(|(g, h)| {
            let p = match multiply(g, h) {
                Ok(p) => p,
                Err(e) => return Some(format!("{g}·{h}: {e}")),
            };
            let d = max_abs(&(p.to_matrix() - g.to_matrix() * h.to_matrix()));
            (d > MATRIX_TOL || !elems.contains(&p))
                .then(|| format!("{g}·{h} = {p}, matrix error {d:e}"))
        }),
    ));
    checks.push(check(
        "inverses",
        elems.iter().find_map(|g| {
            let inv = g.inverse();
            let ok = multiply(g, &inv).is_ok_and(|p| p.is_identity());
            (!ok).then(|| format!("{g}·{inv} is not the identity"))
        }),
    ));
    let aa = GroupElement::new(*params, 1, 0, 0);
    checks.push(check(
        "conjugation_inverts_rotations",
        rotation_subgroup(params).iter().find_map(|h| {
            let c = multiply(&aa, h).and_then(|x| multiply(&x, &aa));
            let d = max_abs(
                &(aa.to_matrix() * h.to_matrix() * aa.to_matrix() - h.inverse().to_matrix()),
            );
            (c != Ok(h.inverse()) || d > MATRIX_TOL).then(|| format!("(A,A){h}(A,A) ≠ {h}⁻¹"))
        }),
    ));
    checks.push(check(
        "generator_matrices",
        generators(params).iter().find_map(|g| {
            let d = max_abs(&(g.matrix - g.circle.reflection_matrix()));
            (d > MATRIX_TOL)
                .then(|| format!("γ{}: deviation {d:e} from the geodesic reflection", g.edge))
        }),
    ));

    let (orbit_size, stabilizer_size) = match cell_orbit(params) {
        Ok(orbit) => {
            let expected: Vec<CellIndex> = (1..=2 * params.m() + 2)
                .flat_map(|i| (1..=2 * params.k() + 2).map(move |j| CellIndex { i, j }))
                .filter(CellIndex::parity_even)
                .collect();
            let got: Vec<CellIndex> = orbit.orbit.iter().copied().collect();
            checks.push(check(
                "cell_orbit_even",
                (got != expected).then(|| {
                    format!(
                        "orbit has {} cells, {} even cells exist",
                        got.len(),
                        expected.len()
                    )
                }),
            ));
            checks.push(check(
                "cell_stabilizer_trivial",
                (orbit.stabilizer.len() != 1 || !orbit.stabilizer[0].is_identity()).then(|| {
                    format!(
                        "stabilizer {:?}",
                        orbit
                            .stabilizer
                            .iter()
                            .map(|g| g.to_string())
                            .collect::<Vec<_>>()
                    )
                }),
            ));
            checks.push(check(
                "cell_formula",
                orbit.images.iter().find_map(|(g, c)| {
                    let f = image_cell_formula(g);
                    (f != *c).then(|| format!("{g}: matrices give {c:?}, formula {f:?}"))
                }),
            ));
            (orbit.orbit.len(), orbit.stabilizer.len())
        }
        Err(e) => {
            checks.push(check("cell_orbit_even", Some(e.to_string())));
            (0, 0)
        }
    };

    let passed = checks.iter().all(|c| c.passed);
    GroupReport {
        m: params.m(),
        k: params.k(),
        order: elems.len(),
        expected_order: order,
        orbit_size,
        stabilizer_size,
        checks,
        passed,
    }
}
