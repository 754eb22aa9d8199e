//! Discrete Plateau problem for the fundamental quadrilateral: a triangulated
//! disk with vertices on S³ whose total area is minimized with the four
//! corners fixed. Each face is measured as the geodesic triangle on S³
//! through its corners, so boundary edges lie exactly on Γ.

use crate::fem::cotan_triplets;
use crate::mesh::{
    spherical_area_and_gradient, total_spherical_area, MeshError, TriMesh, VertexTag,
};
use crate::sparse::{dot, CsrMatrix, EnvelopeCholesky};
use crate::sphere::{
    fundamental_quadrilateral, quadrilateral_corners, slerp, GeodesicArc, LawsonParams,
    SpherePoint, Vec4,
};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Faces below this area trigger the edge-flip pass.
pub const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlateauError {
    #[error("grid resolution must be at least 2 (got {0})")]
    Resolution(usize),
    #[error("mesh has no Lawson parameters attached; boundary arcs are unknown")]
    MissingParams,
    #[error("solver diverged: non-finite vertex {vertex} at iteration {iteration}")]
    Diverged { vertex: usize, iteration: usize },
    #[error("mesh quality: {0}")]
    MeshQuality(#[from] MeshError),
    #[error("invalid solver options: {0}")]
    Options(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepRule {
    /// Always take this step length along the descent direction.
    Fixed(f64),
    /// Backtracking (halving) from the initial step; only area-decreasing
    /// steps that satisfy the Armijo condition are accepted.
    LineSearch { initial: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// Constrained gradient scaled by inverse vertex area.
    Gradient,
    /// Constrained gradient smoothed by the inverse cotangent stiffness of
    /// the initial mesh (a Sobolev gradient).
    Sobolev,
    /// Limited-memory BFGS on top of the Sobolev metric.
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub step: StepRule,
    pub direction: Direction,
    pub residual_tol: f64,
    pub boundary_tol: f64,
    /// Let γ-tagged vertices move along their arcs. With flat triangles this
    /// lets boundary vertices drift toward the corners, shortening the chord
    /// polygon, so the default holds them at their initial arc positions.
    pub slide_boundary: bool,
}

impl SolverOptions {
    /// Defaults: residual 1e-6, boundary 1e-8, 50·n² iterations.
    pub fn for_resolution(n: usize) -> Self {
        Self {
            max_iterations: (50 * n * n).max(1),
            step: StepRule::LineSearch { initial: 1.0 },
            direction: Direction::Lbfgs { memory: 12 },
            residual_tol: 1e-6,
            boundary_tol: 1e-8,
            slide_boundary: false,
        }
    }

    pub fn validate(&self) -> Result<(), PlateauError> {
        if self.max_iterations == 0 {
            return Err(PlateauError::Options("max_iterations must be >= 1".into()));
        }
        if [self.residual_tol, self.boundary_tol]
            .iter()
            .any(|t| t.is_nan() || *t <= 0.0)
        {
            return Err(PlateauError::Options("tolerances must be positive".into()));
        }
        let step = match self.step {
            StepRule::Fixed(s) => s,
            StepRule::LineSearch { initial } => initial,
        };
        if step.is_nan() || step <= 0.0 {
            return Err(PlateauError::Options("step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Line search could not find an acceptable step.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub mesh: TriMesh,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    pub residual: f64,
    pub area: f64,
    pub initial_area: f64,
    /// Accepted-step area values, first entry the initial area.
    pub area_history: Vec<f64>,
    pub flips: usize,
}

/// Discrete mean curvature: the area gradient at each interior vertex,
/// projected onto the surface normal inside T_xS³ and divided by the
/// barycentric vertex area. Boundary entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub per_vertex: Vec<f64>,
    pub max_interior: f64,
    /// Max over interior vertices of the full projection onto T_xS³,
    /// in-surface part included.
    pub max_ambient: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.max_interior
    }
}

/// The (n+1)×(n+1) grid disk spanning Γ_{m,k}. Grid coordinates (a, b)
/// run along γ₁ (P₁→Q₁) and γ₄ reversed (P₁→Q₂); points are slerped along
/// the opposite edges γ₁ and γ₃ and then transversally. Each grid cell is
/// split along its shorter diagonal.
pub fn init_disk_mesh(params: &LawsonParams, n: usize) -> Result<TriMesh, PlateauError> {
    if n < 2 {
        return Err(PlateauError::Resolution(n));
    }
    let [p1, q1, p2, q2] = quadrilateral_corners(params);
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    let mut tags = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let a = i as f64 / n as f64;
            let b = j as f64 / n as f64;
            let bottom = slerp(&p1, &q1, a);
            let top = slerp(&q2, &p2, a);
            let mut x = *slerp(&bottom, &top, b).vector();
            let tag = match (i, j) {
                (0, 0) => VertexTag::Corner(0),
                (i, 0) if i == n => VertexTag::Corner(1),
                (i, j) if i == n && j == n => VertexTag::Corner(2),
                (0, j) if j == n => VertexTag::Corner(3),
                (_, 0) => VertexTag::Arc(0),
                (i, _) if i == n => VertexTag::Arc(1),
                (_, j) if j == n => VertexTag::Arc(2),
                (0, _) => VertexTag::Arc(3),
                _ => VertexTag::Interior,
            };
            if let VertexTag::Corner(c) = tag {
                x = *[p1, q1, p2, q2][c as usize].vector();
            }
            vertices.push(x);
            tags.push(tag);
        }
    }
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            let d_main = (vertices[v00] - vertices[v11]).norm();
            let d_anti = (vertices[v10] - vertices[v01]).norm();
            if d_anti < d_main * (1.0 - 1e-9) {
                faces.push([v00, v10, v01]);
                faces.push([v10, v11, v01]);
            } else {
                faces.push([v00, v10, v11]);
                faces.push([v00, v11, v01]);
            }
        }
    }
    Ok(TriMesh {
        vertices,
        faces,
        tags,
        resolution: n,
        params: Some(*params),
    })
}

/// The exact fundamental patch of ξ_{1,1}: the square of the Clifford torus
/// `x₁x₂ = x₃x₄` spanned by e₄, e₂, e₃, e₁, sampled on the uniform
/// (n+1)×(n+1) grid of its flat coordinates.
pub fn clifford_patch(n: usize) -> Result<TriMesh, PlateauError> {
    if n < 2 {
        return Err(PlateauError::Resolution(n));
    }
    let params = LawsonParams::new(1, 1).expect("valid parameters");
    let mut mesh = init_disk_mesh(&params, n)?;
    for j in 0..=n {
        for i in 0..=n {
            let a = i as f64 / n as f64;
            let b = j as f64 / n as f64;
            let s = -PI / 2.0 + (a + b) * PI / 2.0;
            let t = PI / 2.0 + (a - b) * PI / 2.0;
            let x = Vec4::new(
                (s.cos() + t.cos()) / 2.0,
                (s.cos() - t.cos()) / 2.0,
                (s.sin() + t.sin()) / 2.0,
                (t.sin() - s.sin()) / 2.0,
            );
            let v = j * (n + 1) + i;
            if !matches!(mesh.tags[v], VertexTag::Corner(_)) {
                mesh.vertices[v] = x / x.norm();
            }
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    mesh.faces.clear();
    for j in 0..n {
        for i in 0..n {
            mesh.faces
                .push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            mesh.faces
                .push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Ok(mesh)
}

/// The vector `n` with `n·w = det[a, b, c, w]` for all `w`.
fn cross3(a: &Vec4, b: &Vec4, c: &Vec4) -> Vec4 {
    let m = |i: usize, j: usize, k: usize| {
        a[i] * (b[j] * c[k] - b[k] * c[j]) - a[j] * (b[i] * c[k] - b[k] * c[i])
            + a[k] * (b[i] * c[j] - b[j] * c[i])
    };
    Vec4::new(-m(1, 2, 3), m(0, 2, 3), -m(0, 1, 3), m(0, 1, 2))
}

/// Unit surface normal inside T_xS³ at every vertex, from the oriented
/// faces around it. Zero where the faces cancel.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vec4> {
    let mut acc = vec![Vec4::zeros(); mesh.vertex_count()];
    for f in &mesh.faces {
        for c in 0..3 {
            let (v, p, q) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
            let x = &mesh.vertices[v];
            acc[v] += cross3(x, &(mesh.vertices[p] - x), &(mesh.vertices[q] - x));
        }
    }
    acc.iter()
        .zip(&mesh.vertices)
        .map(|(n, x)| {
            let n = n - x * n.dot(x);
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec4::zeros()
            }
        })
        .collect()
}

struct Constraints {
    arcs: [GeodesicArc; 4],
    slide: bool,
}

impl Constraints {
    fn new(mesh: &TriMesh, slide: bool) -> Result<Self, PlateauError> {
        let params = mesh.params.ok_or(PlateauError::MissingParams)?;
        Ok(Self {
            arcs: fundamental_quadrilateral(&params),
            slide,
        })
    }

    /// The single direction each vertex may move in: the surface normal for
    /// interior vertices, the arc tangent for sliding boundary vertices,
    /// zero otherwise.
    fn directions(&self, mesh: &TriMesh) -> Vec<Vec4> {
        let normals = vertex_normals(mesh);
        mesh.tags
            .iter()
            .zip(&mesh.vertices)
            .zip(normals)
            .map(|((&tag, x), n)| match tag {
                VertexTag::Interior => n,
                VertexTag::Arc(a) if self.slide => self.arcs[a as usize].parent.tangent_at(x),
                _ => Vec4::zeros(),
            })
            .collect()
    }

    /// Maps a moved point back onto its constraint set; `None` if a sliding
    /// vertex left its arc.
    fn retract(&self, tag: VertexTag, old: &Vec4, y: &Vec4) -> Option<Vec4> {
        match tag {
            VertexTag::Interior => {
                let n = y.norm();
                (n > 0.0 && n.is_finite()).then(|| y / n)
            }
            VertexTag::Arc(_) if !self.slide => Some(*old),
            VertexTag::Arc(a) => {
                let arc = &self.arcs[a as usize];
                let p = arc.parent.closest_point(y)?;
                let s = arc.coordinate_of(&p);
                (s > 0.0 && s < arc.length).then_some(p)
            }
            VertexTag::Corner(_) => Some(*old),
        }
    }
}

/// Area gradient along each vertex's admissible direction.
fn reduced_gradient(grad: &[Vec4], dirs: &[Vec4]) -> Vec<f64> {
    grad.iter().zip(dirs).map(|(g, d)| g.dot(d)).collect()
}

fn scaled_by_area(values: &[f64], areas: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(areas)
        .map(|(v, &a)| if a > 0.0 { v.abs() / a } else { 0.0 })
        .collect()
}

pub fn mean_curvature_residual(mesh: &TriMesh) -> ResidualReport {
    let (_, grad) = spherical_area_and_gradient(&mesh.vertices, &mesh.faces);
    let normals = vertex_normals(mesh);
    let areas = mesh.vertex_areas();
    let mut per_vertex = vec![0.0; mesh.vertex_count()];
    let mut max_interior = 0.0f64;
    let mut max_ambient = 0.0f64;
    for v in 0..mesh.vertex_count() {
        let interior = mesh.tags.get(v).is_none_or(|t| *t == VertexTag::Interior);
        if !interior || areas[v] <= 0.0 {
            continue;
        }
        let x = &mesh.vertices[v];
        let g = grad[v] - x * grad[v].dot(x);
        per_vertex[v] = g.dot(&normals[v]).abs() / areas[v];
        max_interior = max_interior.max(per_vertex[v]);
        max_ambient = max_ambient.max(g.norm() / areas[v]);
    }
    ResidualReport {
        per_vertex,
        max_interior,
        max_ambient,
    }
}

/// Cotangent stiffness restricted to the movable vertices, used as the
/// inner product for descent directions.
struct Metric {
    free: Vec<usize>,
    chol: EnvelopeCholesky,
}

impl Metric {
    fn new(mesh: &TriMesh, dirs: &[Vec4]) -> Option<Self> {
        let free: Vec<usize> = (0..mesh.vertex_count())
            .filter(|&v| dirs[v] != Vec4::zeros())
            .collect();
        let full = CsrMatrix::from_triplets(
            mesh.vertex_count(),
            &cotan_triplets(&mesh.vertices, &mesh.faces),
        );
        let chol = EnvelopeCholesky::factor(&full.principal_submatrix(&free)).ok()?;
        Some(Self { free, chol })
    }

    /// `K⁻¹ g` on the free vertices, zero elsewhere.
    fn solve(&self, g: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = self.free.iter().map(|&v| g[v]).collect();
        let sol = self.chol.solve(&rhs);
        let mut d = vec![0.0; g.len()];
        for (slot, &v) in self.free.iter().enumerate() {
            d[v] = sol[slot];
        }
        d
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

struct Search {
    metric: Option<Metric>,
    /// (s, y, 1/(s·y)) pairs, oldest first.
    history: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

impl Search {
    fn preconditioned(&mut self, mesh: &TriMesh, dirs: &[Vec4], q: &[f64]) -> Option<Vec<f64>> {
        if self.metric.is_none() {
            self.metric = Metric::new(mesh, dirs);
        }
        Some(self.metric.as_ref()?.solve(q))
    }

    /// Two-loop recursion with the stiffness metric as initial inverse
    /// Hessian.
    fn lbfgs(&mut self, mesh: &TriMesh, dirs: &[Vec4], g: &[f64]) -> Option<Vec<f64>> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.history.len());
        for (s, y, rho) in self.history.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(&mut q, -a, y);
            alphas.push(a);
        }
        let mut r = self.preconditioned(mesh, dirs, &q)?;
        for ((s, y, rho), a) in self.history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &r);
            axpy(&mut r, a - b, s);
        }
        Some(r.iter().map(|v| -v).collect())
    }

    /// A descent direction and whether it is already scaled like a Newton
    /// step.
    fn direction(
        &mut self,
        kind: Direction,
        mesh: &TriMesh,
        dirs: &[Vec4],
        g: &[f64],
    ) -> (Vec<f64>, bool) {
        let candidate = match kind {
            Direction::Gradient => None,
            Direction::Sobolev => self
                .preconditioned(mesh, dirs, g)
                .map(|d| d.iter().map(|v| -v).collect()),
            Direction::Lbfgs { .. } => self.lbfgs(mesh, dirs, g),
        };
        if let Some(d) = candidate {
            if dot(g, &d) < 0.0 {
                return (d, true);
            }
        }
        self.history.clear();
        let areas = mesh.vertex_areas();
        let plain = g
            .iter()
            .zip(&areas)
            .map(|(gv, &av)| if av > 0.0 { -gv / av } else { 0.0 })
            .collect();
        (plain, false)
    }
}

/// Constrained area minimization. Interior vertices move along their
/// surface normals inside S³ and are renormalized; boundary vertices stay
/// on their arcs; corners are frozen.
pub fn minimize_area(mesh: &TriMesh, opts: &SolverOptions) -> Result<SolveReport, PlateauError> {
    opts.validate()?;
    let cons = Constraints::new(mesh, opts.slide_boundary)?;
    let mut mesh = mesh.clone();
    let mut flips = 0;
    if !mesh.degenerate_faces(DEGENERATE_AREA).is_empty() {
        flips += mesh.flip_degenerate(DEGENERATE_AREA)?;
    }
    let initial_area = total_spherical_area(&mesh.vertices, &mesh.faces);
    let mut area_history = vec![initial_area];
    let mut iterations = 0;
    let initial_step = match opts.step {
        StepRule::Fixed(s) => s,
        StepRule::LineSearch { initial } => initial,
    };
    let mut grad_step = initial_step;
    let mut search = Search {
        metric: None,
        history: Vec::new(),
    };
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let (stop, mut residual, mut area);
    loop {
        let (a, grad) = spherical_area_and_gradient(&mesh.vertices, &mesh.faces);
        area = a;
        let dirs = cons.directions(&mesh);
        let g = reduced_gradient(&grad, &dirs);
        let areas = mesh.vertex_areas();
        residual = scaled_by_area(&g, &areas).into_iter().fold(0.0, f64::max);
        if residual <= opts.residual_tol {
            stop = StopReason::Converged;
            break;
        }
        if iterations >= opts.max_iterations {
            stop = StopReason::MaxIterations;
            break;
        }
        if let (Direction::Lbfgs { memory }, Some((s, g0))) = (opts.direction, previous.take()) {
            let y: Vec<f64> = g.iter().zip(&g0).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                search.history.push((s, y, 1.0 / sy));
                if search.history.len() > memory {
                    search.history.remove(0);
                }
            }
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let kind = if attempt == 0 {
                opts.direction
            } else {
                Direction::Gradient
            };
            let (step, scaled) = search.direction(kind, &mesh, &dirs, &g);
            let slope = dot(&g, &step);
            let trial = |t: f64| -> Option<Vec<Vec4>> {
                (0..mesh.vertex_count())
                    .map(|v| {
                        let x = &mesh.vertices[v];
                        cons.retract(mesh.tags[v], x, &(x + dirs[v] * (step[v] * t)))
                    })
                    .collect()
            };
            accepted = match opts.step {
                StepRule::Fixed(s) => trial(s).map(|v| (v, s, step.clone(), scaled)),
                StepRule::LineSearch { initial } => {
                    let mut t = if scaled { initial } else { grad_step };
                    let mut found = None;
                    while t > 1e-16 * initial {
                        if let Some(v) = trial(t) {
                            let new_area = total_spherical_area(&v, &mesh.faces);
                            if accept_step(&mesh, &cons, &v, area, new_area, t, slope, &step) {
                                found = Some((v, t, step.clone(), scaled));
                                break;
                            }
                        }
                        t *= 0.5;
                    }
                    found
                }
            };
            if accepted.is_some() || !scaled {
                break;
            }
            search.history.clear();
        }
        let Some((new_vertices, t, step, scaled)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        if !scaled {
            grad_step = (2.0 * t).min(1e6);
        }
        if let Some(bad) = new_vertices
            .iter()
            .position(|x| !x.iter().all(|c| c.is_finite()))
        {
            return Err(PlateauError::Diverged {
                vertex: bad,
                iteration: iterations,
            });
        }
        mesh.vertices = new_vertices;
        previous = Some((step.iter().map(|v| v * t).collect(), g));
        if !mesh.degenerate_faces(DEGENERATE_AREA).is_empty() {
            flips += mesh.flip_degenerate(DEGENERATE_AREA)?;
            search.metric = None;
            search.history.clear();
            previous = None;
        }
        iterations += 1;
        area_history.push(total_spherical_area(&mesh.vertices, &mesh.faces));
    }
    Ok(SolveReport {
        mesh,
        converged: stop == StopReason::Converged,
        stop,
        iterations,
        residual,
        area,
        initial_area,
        area_history,
        flips,
    })
}

/// Armijo sufficient decrease; once area differences reach rounding level,
/// a non-increasing step is accepted if the directional derivative at the
/// trial point shows the step did not overshoot.
#[allow(clippy::too_many_arguments)]
fn accept_step(
    mesh: &TriMesh,
    cons: &Constraints,
    trial: &[Vec4],
    area: f64,
    new_area: f64,
    t: f64,
    slope: f64,
    step: &[f64],
) -> bool {
    if new_area < area && new_area <= area + 1e-4 * t * slope {
        return true;
    }
    if new_area > area || (area - new_area).max(-t * slope) > 1e3 * f64::EPSILON * area {
        return false;
    }
    let moved = TriMesh {
        vertices: trial.to_vec(),
        ..mesh.clone()
    };
    let (_, grad) = spherical_area_and_gradient(&moved.vertices, &moved.faces);
    let g = reduced_gradient(&grad, &cons.directions(&moved));
    let end_slope = dot(&g, step);
    end_slope >= 0.9 * slope && end_slope <= -(1.0 - 2e-4) * slope
}

/// Max distance of γ-tagged vertices from the plane of their great circle.
pub fn boundary_deviation(mesh: &TriMesh) -> f64 {
    let Some(params) = mesh.params else {
        return 0.0;
    };
    let arcs = fundamental_quadrilateral(&params);
    mesh.vertices
        .iter()
        .zip(&mesh.tags)
        .map(|(x, tag)| match tag {
            VertexTag::Arc(a) => arcs[*a as usize].parent.plane_distance(x),
            _ => 0.0,
        })
        .fold(0.0, f64::max)
}

/// The corner positions P₁, Q₁, P₂, Q₂ a patch must reproduce exactly.
pub fn expected_corners(params: &LawsonParams) -> [SpherePoint; 4] {
    quadrilateral_corners(params)
}
