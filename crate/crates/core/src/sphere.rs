//! Points, great circles, geodesics and geodesic reflections on the unit
//! three-sphere, together with the Lawson vertex sets and the fundamental
//! geodesic quadrilateral.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub type Vec4 = Vector4<f64>;

/// Absolute tolerance used by exact-formula checks.
pub const EXACT_TOL: f64 = 1e-10;
/// Inputs within this distance of valid are repaired instead of rejected.
pub const REPAIR_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("vector has zero length and cannot be projected to the sphere")]
    ZeroVector,
    #[error("vector norm {0} is not 1 within tolerance")]
    NotUnit(f64),
    #[error("tangent is not orthogonal to the base point (inner product {0})")]
    NotTangent(f64),
    #[error("great circle frame is not orthonormal (inner product {0})")]
    NotOrthonormal(f64),
    #[error("points are antipodal or coincident; no unique great circle")]
    DegenerateCircle,
    #[error("invalid Lawson parameters m={m}, k={k}: both must be >= 1")]
    InvalidParams { m: usize, k: usize },
}

/// A unit vector of R^4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint(Vec4);

impl SpherePoint {
    /// Radially projects `v` onto the sphere.
    pub fn normalize(v: Vec4) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !n.is_finite() || n <= 0.0 {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Self(v / n))
    }

    /// Accepts `v` if it is unit within `REPAIR_TOL`, renormalizing it.
    pub fn from_unit(v: Vec4) -> Result<Self, GeometryError> {
        let n = v.norm();
        if (n - 1.0).abs() > REPAIR_TOL {
            return Err(GeometryError::NotUnit(n));
        }
        Ok(Self(v / n))
    }

    pub fn from_coords(x: [f64; 4]) -> Result<Self, GeometryError> {
        Self::from_unit(Vec4::from(x))
    }

    /// The standard basis vector e_i, with `i` in 1..=4.
    pub fn basis(i: usize) -> Self {
        assert!((1..=4).contains(&i), "basis index must be in 1..=4");
        let mut v = Vec4::zeros();
        v[i - 1] = 1.0;
        Self(v)
    }

    pub fn vector(&self) -> &Vec4 {
        &self.0
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn antipode(&self) -> Self {
        Self(-self.0)
    }
}

impl From<SpherePoint> for Vec4 {
    fn from(p: SpherePoint) -> Vec4 {
        p.0
    }
}

/// Great circle `span{u, v} ∩ S³` with an orthonormal frame of its plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreatCircle {
    u: SpherePoint,
    v: SpherePoint,
}

impl GreatCircle {
    pub fn new(u: SpherePoint, v: SpherePoint) -> Result<Self, GeometryError> {
        let d = u.dot(&v);
        if d.abs() > 1e-12 {
            return Err(GeometryError::NotOrthonormal(d));
        }
        Ok(Self { u, v })
    }

    /// The great circle through two distinct, non-antipodal points.
    pub fn through(a: &SpherePoint, b: &SpherePoint) -> Result<Self, GeometryError> {
        let w = b.vector() - a.vector() * a.dot(b);
        if w.norm() < 1e-12 {
            return Err(GeometryError::DegenerateCircle);
        }
        Ok(Self {
            u: *a,
            v: SpherePoint::normalize(w)?,
        })
    }

    pub fn frame(&self) -> (&SpherePoint, &SpherePoint) {
        (&self.u, &self.v)
    }

    /// Orthogonal projection onto the plane of the circle.
    pub fn project_plane(&self, x: &Vec4) -> Vec4 {
        self.u.0 * x.dot(&self.u.0) + self.v.0 * x.dot(&self.v.0)
    }

    /// Distance (ambient) from `x` to the plane of the circle.
    pub fn plane_distance(&self, x: &Vec4) -> f64 {
        (x - self.project_plane(x)).norm()
    }

    /// Nearest point of the circle to `x`; `None` when `x` is orthogonal to
    /// the whole plane.
    pub fn closest_point(&self, x: &Vec4) -> Option<Vec4> {
        let p = self.project_plane(x);
        let n = p.norm();
        (n > 1e-300).then(|| p / n)
    }

    /// Unit tangent of the circle at a point of the circle.
    pub fn tangent_at(&self, x: &Vec4) -> Vec4 {
        let a = x.dot(&self.u.0);
        let b = x.dot(&self.v.0);
        let t = self.v.0 * a - self.u.0 * b;
        let n = t.norm();
        if n > 0.0 {
            t / n
        } else {
            t
        }
    }

    /// Matrix of the geodesic reflection across this circle.
    pub fn reflection_matrix(&self) -> nalgebra::Matrix4<f64> {
        let u = self.u.0;
        let v = self.v.0;
        (u * u.transpose() + v * v.transpose()) * 2.0 - nalgebra::Matrix4::identity()
    }
}

/// Parameters of the Lawson surface ξ_{m,k}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LawsonParams {
    m: usize,
    k: usize,
}

impl LawsonParams {
    pub fn new(m: usize, k: usize) -> Result<Self, GeometryError> {
        if m == 0 || k == 0 {
            return Err(GeometryError::InvalidParams { m, k });
        }
        Ok(Self { m, k })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Angular spacing of the P vertices on C₁.
    pub fn beta(&self) -> f64 {
        PI / (self.m + 1) as f64
    }

    /// Angular spacing of the Q vertices on C₂.
    pub fn theta(&self) -> f64 {
        PI / (self.k + 1) as f64
    }

    /// Both m and k even: the regime where λ₁ = 2 is the headline claim.
    pub fn both_even(&self) -> bool {
        self.m.is_multiple_of(2) && self.k.is_multiple_of(2)
    }

    pub fn genus(&self) -> usize {
        self.m * self.k
    }

    pub fn euler_characteristic(&self) -> i64 {
        2 - 2 * (self.m * self.k) as i64
    }

    pub fn group_order(&self) -> usize {
        2 * (self.m + 1) * (self.k + 1)
    }
}

/// Minimizing geodesic arc between two points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicArc {
    pub a: SpherePoint,
    pub b: SpherePoint,
    pub length: f64,
    pub parent: GreatCircle,
}

impl GeodesicArc {
    pub fn new(a: SpherePoint, b: SpherePoint) -> Result<Self, GeometryError> {
        let parent = GreatCircle::through(&a, &b)?;
        Ok(Self {
            a,
            b,
            length: sphere_distance(&a, &b),
            parent,
        })
    }

    /// Point at fraction `s ∈ [0, 1]` of the arc, measured from `a`.
    pub fn point_at(&self, s: f64) -> SpherePoint {
        slerp(&self.a, &self.b, s)
    }

    /// Arc-length coordinate of the projection of `x` onto the arc's circle,
    /// measured from `a` in the direction of `b`.
    pub fn coordinate_of(&self, x: &Vec4) -> f64 {
        let (u, v) = self.parent.frame();
        x.dot(v.vector()).atan2(x.dot(u.vector()))
    }
}

/// Point at distance `t` along the unit-speed geodesic from `p` with initial
/// direction `v`.
pub fn geodesic_point(p: &SpherePoint, v: &Vec4, t: f64) -> Result<SpherePoint, GeometryError> {
    let inner = p.vector().dot(v);
    if inner.abs() > REPAIR_TOL {
        return Err(GeometryError::NotTangent(inner));
    }
    let nv = v.norm();
    if (nv - 1.0).abs() > REPAIR_TOL {
        return Err(GeometryError::NotUnit(nv));
    }
    // Gram-Schmidt repair of accumulated drift.
    let w = v - p.vector() * inner;
    let w = w / w.norm();
    SpherePoint::normalize(p.vector() * t.cos() + w * t.sin())
}

/// Geodesic reflection `2 proj(x) - x` across a great circle.
pub fn reflect(gamma: &GreatCircle, x: &SpherePoint) -> SpherePoint {
    let y = gamma.project_plane(x.vector()) * 2.0 - x.vector();
    // Exact isometry; renormalize only to shed rounding.
    SpherePoint(y / y.norm())
}

/// Round-sphere distance, with the inner product clamped into [-1, 1].
pub fn sphere_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    x.dot(y).clamp(-1.0, 1.0).acos()
}

/// Spherical linear interpolation along the minimizing arc.
pub fn slerp(a: &SpherePoint, b: &SpherePoint, s: f64) -> SpherePoint {
    let omega = sphere_distance(a, b);
    if omega < 1e-15 {
        return *a;
    }
    let so = omega.sin();
    let wa = ((1.0 - s) * omega).sin() / so;
    let wb = (s * omega).sin() / so;
    SpherePoint::normalize(a.vector() * wa + b.vector() * wb)
        .expect("slerp of non-antipodal points")
}

/// The equally spaced vertices `P_i` (on C₁) and `Q_j` (on C₂), stored
/// 0-based; the accessors take the 1-based indices used in the construction
/// and reduce them cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawsonVertices {
    pub p: Vec<SpherePoint>,
    pub q: Vec<SpherePoint>,
}

impl LawsonVertices {
    pub fn p(&self, i: i64) -> &SpherePoint {
        &self.p[(i - 1).rem_euclid(self.p.len() as i64) as usize]
    }

    pub fn q(&self, j: i64) -> &SpherePoint {
        &self.q[(j - 1).rem_euclid(self.q.len() as i64) as usize]
    }
}

pub fn lawson_vertices(params: &LawsonParams) -> LawsonVertices {
    let beta = params.beta();
    let theta = params.theta();
    let p = (0..2 * params.m() + 2)
        .map(|i| {
            let a = i as f64 * beta;
            SpherePoint(Vec4::new(0.0, 0.0, a.sin(), a.cos()))
        })
        .collect();
    let q = (0..2 * params.k() + 2)
        .map(|j| {
            let a = j as f64 * theta;
            SpherePoint(Vec4::new(a.sin(), a.cos(), 0.0, 0.0))
        })
        .collect();
    LawsonVertices { p, q }
}

/// The four corners P₁, Q₁, P₂, Q₂ of Γ_{m,k}, in cyclic order.
pub fn quadrilateral_corners(params: &LawsonParams) -> [SpherePoint; 4] {
    let v = lawson_vertices(params);
    [*v.p(1), *v.q(1), *v.p(2), *v.q(2)]
}

/// Arcs γ₁ = P₁Q₁, γ₂ = Q₁P₂, γ₃ = P₂Q₂, γ₄ = Q₂P₁.
pub fn fundamental_quadrilateral(params: &LawsonParams) -> [GeodesicArc; 4] {
    let c = quadrilateral_corners(params);
    std::array::from_fn(|i| {
        GeodesicArc::new(c[i], c[(i + 1) % 4]).expect("quadrilateral corners are orthogonal pairs")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng) -> SpherePoint {
        loop {
            let v = Vec4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if v.norm() > 0.1 {
                return SpherePoint::normalize(v).unwrap();
            }
        }
    }

    fn random_circle(rng: &mut ChaCha8Rng) -> GreatCircle {
        let a = random_point(rng);
        let b = random_point(rng);
        GreatCircle::through(&a, &b).unwrap()
    }

    #[test]
    fn geodesic_point_examples() {
        let params = LawsonParams::new(2, 3).unwrap();
        let beta = params.beta();
        let e4 = SpherePoint::basis(4);
        let e3 = SpherePoint::basis(3);
        let p2 = geodesic_point(&e4, e3.vector(), beta).unwrap();
        let expected = Vec4::new(0.0, 0.0, beta.sin(), beta.cos());
        assert!((p2.vector() - expected).norm() < 1e-12);
        assert!((p2.vector() - lawson_vertices(&params).p(2).vector()).norm() < 1e-12);

        let same = geodesic_point(&e4, e3.vector(), 0.0).unwrap();
        assert_eq!(same, e4);

        let e1 = SpherePoint::basis(1);
        let e2 = SpherePoint::basis(2);
        let q = geodesic_point(&e2, e1.vector(), PI / 2.0).unwrap();
        assert!((q.vector() - e1.vector()).norm() < 1e-12);
    }

    #[test]
    fn geodesic_point_validates_tangent() {
        let e4 = SpherePoint::basis(4);
        let bad = Vec4::new(0.0, 0.0, 1.0, 0.1);
        assert!(matches!(
            geodesic_point(&e4, &bad, 0.3),
            Err(GeometryError::NotTangent(_))
        ));
        let long = Vec4::new(0.0, 0.0, 1.1, 0.0);
        assert!(matches!(
            geodesic_point(&e4, &long, 0.3),
            Err(GeometryError::NotUnit(_))
        ));
        // Drift below the repair tolerance is absorbed.
        let drift = Vec4::new(0.0, 0.0, 1.0 + 1e-10, 1e-10);
        let x = geodesic_point(&e4, &drift, 0.7).unwrap();
        assert!((x.vector().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflect_across_gamma1_and_gamma2() {
        let params = LawsonParams::new(2, 2).unwrap();
        let beta = params.beta();
        let g1 = GreatCircle::new(SpherePoint::basis(2), SpherePoint::basis(4)).unwrap();
        let x = SpherePoint::normalize(Vec4::new(0.1, 0.2, 0.3, 0.4)).unwrap();
        let y = reflect(&g1, &x);
        let xv = x.vector();
        let want = Vec4::new(-xv[0], xv[1], -xv[2], xv[3]);
        assert!((y.vector() - want).norm() < 1e-15);

        let on = SpherePoint::normalize(Vec4::new(0.0, 0.6, 0.0, 0.8)).unwrap();
        assert!((reflect(&g1, &on).vector() - on.vector()).norm() < 1e-15);

        let w = SpherePoint::from_coords([0.0, 0.0, beta.sin(), beta.cos()]).unwrap();
        let g2 = GreatCircle::new(SpherePoint::basis(2), w).unwrap();
        let r = reflect(&g2, &SpherePoint::basis(4));
        let want = Vec4::new(0.0, 0.0, (2.0 * beta).sin(), (2.0 * beta).cos());
        assert!((r.vector() - want).norm() < 1e-12);
    }

    #[test]
    fn reflect_is_involutive_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let g = random_circle(&mut rng);
            let x = random_point(&mut rng);
            let y = random_point(&mut rng);
            let rx = reflect(&g, &x);
            let rr = reflect(&g, &rx);
            assert!((rr.vector() - x.vector()).norm() < 1e-10);
            let d0 = sphere_distance(&x, &y);
            let d1 = sphere_distance(&rx, &reflect(&g, &y));
            assert!((d0 - d1).abs() < 1e-10);
        }
    }

    #[test]
    fn geodesic_distance_matches_parameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let p = random_point(&mut rng);
            let r = random_point(&mut rng);
            let w = r.vector() - p.vector() * p.dot(&r);
            let v = w / w.norm();
            let t = rng.random_range(0.0..PI);
            let x = geodesic_point(&p, &v, t).unwrap();
            assert!((sphere_distance(&p, &x) - t).abs() < 1e-10);
        }
    }

    #[test]
    fn distances_between_lawson_vertices() {
        for (m, k) in [(1, 1), (2, 2), (3, 1), (2, 4)] {
            let params = LawsonParams::new(m, k).unwrap();
            let v = lawson_vertices(&params);
            assert_eq!(v.p.len(), 2 * m + 2);
            assert_eq!(v.q.len(), 2 * k + 2);
            for i in 1..=(2 * m + 2) as i64 {
                let d = sphere_distance(v.p(i), v.p(i + 1));
                assert!((d - params.beta()).abs() < 1e-10);
            }
            for j in 1..=(2 * k + 2) as i64 {
                let d = sphere_distance(v.q(j), v.q(j + 1));
                assert!((d - params.theta()).abs() < 1e-10);
            }
            for p in &v.p {
                for q in &v.q {
                    assert!(p.dot(q).abs() < 1e-15);
                    assert!((sphere_distance(p, q) - PI / 2.0).abs() < 1e-12);
                }
            }
            assert!((sphere_distance(v.p(1), v.p(2)) - params.beta()).abs() < 1e-12);
        }
        let v = lawson_vertices(&LawsonParams::new(1, 1).unwrap());
        assert!((v.p(2).vector() - SpherePoint::basis(3).vector()).norm() < 1e-15);
    }

    #[test]
    fn quadrilateral_is_closed_with_right_lengths() {
        let params = LawsonParams::new(2, 3).unwrap();
        let arcs = fundamental_quadrilateral(&params);
        let c = quadrilateral_corners(&params);
        let v = lawson_vertices(&params);
        assert_eq!(c, [*v.p(1), *v.q(1), *v.p(2), *v.q(2)]);
        for i in 0..4 {
            assert!((arcs[i].length - PI / 2.0).abs() < 1e-12);
            assert_eq!(arcs[i].b, arcs[(i + 1) % 4].a);
            assert_eq!(arcs[i].a, c[i]);
        }
    }

    #[test]
    fn distance_is_clamped() {
        let x = SpherePoint::basis(1);
        assert_eq!(sphere_distance(&x, &x), 0.0);
        assert!((sphere_distance(&x, &x.antipode()) - PI).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(LawsonParams::new(0, 2).is_err());
        let p = LawsonParams::new(2, 4).unwrap();
        assert!(p.both_even());
        assert_eq!(p.group_order(), 30);
        assert!(!LawsonParams::new(1, 2).unwrap().both_even());
        assert!(LawsonParams::new(1, 1).unwrap().beta() <= PI / 2.0);
    }
}
