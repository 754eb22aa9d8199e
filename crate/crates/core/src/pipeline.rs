//! The three commands: group verification, surface build and spectrum,
//! each writing its artifacts under the configured output directory.

use crate::assembly::{
    assemble, embeddedness_diagnostic, AssembledSurface, AssemblyError, EmbeddednessReport,
    TopologyReport,
};
use crate::config::{ConfigError, RunConfig};
use crate::fem::{build_fem, FemPair};
use crate::io::{save_obj, save_off, IoError, MeshFile, MeshHeader};
use crate::nodal::{
    coordinate_function, equator_separation_check, nodal_domains, obstruction_classifier,
    symmetry_signature, EquatorCheck, NodalError, Obstruction, Signature,
};
use crate::plateau::{
    init_disk_mesh, minimize_area, PlateauError, SolveReport, SolverOptions, StopReason,
};
use crate::report::{spectrum_csv, spectrum_svg};
use crate::spectrum::{
    classify_zero_mode, clusters, lowest_eigenpairs, projection_defect, takahashi_residual,
    EigenOptions, EigenPair, SpectrumError, ZeroMode,
};
use crate::sphere::{GeometryError, LawsonParams, Vec4};
use crate::verify::{verify_group, GroupReport};
use serde::Serialize;
use std::path::Path;
use thiserror::Error;

/// Eigenvalues within this of the previous one share a cluster.
pub const CLUSTER_GAP: f64 = 0.02;
/// Half-width of the window around 2 whose eigenvectors must span a
/// G-invariant space.
pub const TWO_WINDOW: f64 = 0.1;
pub const PROJECTION_TOL: f64 = 1e-3;
pub const COURANT_MAX_INDEX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitStatus {
    Pass = 0,
    Group = 1,
    Solver = 2,
    Topology = 3,
    Eigen = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("parameters: {0}")]
    Params(#[from] GeometryError),
    #[error("output: {0}")]
    Io(#[from] IoError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plateau solver: {0}")]
    Plateau(#[from] PlateauError),
    #[error("assembly: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("eigensolver: {0}")]
    Spectrum(#[from] SpectrumError),
    #[error("nodal analysis: {0}")]
    Nodal(#[from] NodalError),
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(IoError::Io(e))
    }
}

impl PipelineError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            PipelineError::Plateau(_) => ExitStatus::Solver,
            PipelineError::Assembly(_) => ExitStatus::Topology,
            PipelineError::Spectrum(_) | PipelineError::Nodal(_) => ExitStatus::Eigen,
            _ => ExitStatus::Group,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn params_of(cfg: &RunConfig) -> Result<LawsonParams, PipelineError> {
    cfg.validate()?;
    Ok(LawsonParams::new(cfg.m, cfg.k)?)
}

pub fn cmd_group_verify(cfg: &RunConfig) -> Result<(ExitStatus, GroupReport), PipelineError> {
    let params = params_of(cfg)?;
    let report = verify_group(&params);
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("group.json"), &report)?;
    let status = if report.passed {
        ExitStatus::Pass
    } else {
        ExitStatus::Group
    };
    Ok((status, report))
}

pub struct Built {
    pub solve: SolveReport,
    pub surface: AssembledSurface,
}

pub fn solver_options(cfg: &RunConfig) -> SolverOptions {
    let mut opts = SolverOptions::for_resolution(cfg.n);
    opts.residual_tol = cfg.solver_tol;
    opts.slide_boundary = cfg.slide_boundary;
    if cfg.max_iterations > 0 {
        opts.max_iterations = cfg.max_iterations;
    }
    opts
}

/// Plateau solve and assembly, without writing anything.
pub fn build_surface(cfg: &RunConfig) -> Result<Built, PipelineError> {
    let params = params_of(cfg)?;
    let init = init_disk_mesh(&params, cfg.n)?;
    let solve = minimize_area(&init, &solver_options(cfg))?;
    let surface = assemble(&solve.mesh, cfg.weld_tol)?;
    Ok(Built { solve, surface })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildSummary {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    pub residual: f64,
    pub patch_area: f64,
    #[serde(flatten)]
    pub topology: TopologyReport,
    pub expected_chi: i64,
    pub expected_genus: usize,
    pub genus_ok: bool,
    pub embeddedness: EmbeddednessReport,
}

fn header(cfg: &RunConfig, solve: &SolveReport) -> MeshHeader {
    MeshHeader {
        m: cfg.m,
        k: cfg.k,
        n: cfg.n,
        iteration: solve.iterations,
        residual: solve.residual,
    }
}

pub fn cmd_build(cfg: &RunConfig) -> Result<(ExitStatus, BuildSummary), PipelineError> {
    let built = build_surface(cfg)?;
    let params = built.surface.params;
    let topology = built.surface.topology();
    let summary = BuildSummary {
        m: cfg.m,
        k: cfg.k,
        n: cfg.n,
        converged: built.solve.converged,
        stop: built.solve.stop,
        iterations: built.solve.iterations,
        residual: built.solve.residual,
        patch_area: built.solve.area,
        genus_ok: topology.chi == params.euler_characteristic()
            && topology.genus == params.genus() as i64,
        topology,
        expected_chi: params.euler_characteristic(),
        expected_genus: params.genus(),
        embeddedness: embeddedness_diagnostic(&built.surface.mesh),
    };
    std::fs::create_dir_all(&cfg.out)?;
    let head = header(cfg, &built.solve);
    save_off(
        &cfg.out.join("patch.off"),
        &MeshFile::new(built.solve.mesh.clone()).with_header(head),
    )?;
    let surface_file = MeshFile::new(built.surface.mesh.clone()).with_header(head);
    save_off(&cfg.out.join("surface.off"), &surface_file)?;
    save_obj(&cfg.out.join("surface.obj"), &surface_file)?;
    write_json(&cfg.out.join("topology.json"), &summary)?;
    let status = if !summary.converged {
        ExitStatus::Solver
    } else if !summary.genus_ok {
        ExitStatus::Topology
    } else {
        ExitStatus::Pass
    };
    Ok((status, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signatures {
    pub g1: Signature,
    pub g2: Signature,
    pub g3: Signature,
    pub g4: Signature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalEntry {
    pub index: usize,
    pub lambda: f64,
    pub domain_count: usize,
    pub courant_bound: usize,
    pub signature: Signatures,
    /// Present for G-invariant eigenfunctions only.
    pub obstruction: Option<Obstruction>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub mean: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub mass: &'static str,
    pub seed: u64,
    pub vertices: usize,
    pub converged: bool,
    pub restarts: usize,
    pub lambdas: Vec<f64>,
    pub max_residual: f64,
    pub zero_mode: ZeroMode,
    pub lambda1: f64,
    pub lambda_band: [f64; 2],
    pub lambda1_in_band: bool,
    /// λ₁ > 1 = n/2 for a surface (n = 2).
    pub lambda1_above_one: bool,
    pub clusters: Vec<Cluster>,
    /// Size of the cluster nearest 2, reported as observed.
    pub two_cluster_size: usize,
    pub projection_defect: Option<f64>,
    pub eigenspace_invariant: bool,
    pub takahashi: [f64; 4],
    pub phi1_domains: usize,
    pub courant_ok: bool,
    pub classifier_consistent: bool,
    pub equators: Vec<EquatorCheck>,
    pub passed: bool,
}

pub struct SpectrumRun {
    pub built: Built,
    pub fem: FemPair,
    pub summary: SpectrumSummary,
    pub nodal: Vec<NodalEntry>,
    pub pairs: Vec<EigenPair>,
}

/// Build, eigensolve and analyze, without writing anything.
pub fn analyze_spectrum(cfg: &RunConfig) -> Result<SpectrumRun, PipelineError> {
    let built = build_surface(cfg)?;
    let surface = &built.surface;
    let fem = build_fem(&surface.mesh, cfg.mass);
    let mut opts = EigenOptions::for_count(cfg.eigen_count);
    opts.tol = cfg.eigen_tol;
    opts.seed = cfg.seed;
    let result = lowest_eigenpairs(&fem, cfg.eigen_count, &opts)?;
    let lambdas: Vec<f64> = result.pairs.iter().map(|p| p.lambda).collect();
    let lambda0 = lambdas[0];
    let lambda1 = lambdas.get(1).copied().unwrap_or(f64::NAN);

    let clustered: Vec<Cluster> = clusters(&lambdas, CLUSTER_GAP)
        .into_iter()
        .map(|(mean, size)| Cluster { mean, size })
        .collect();
    let two_cluster_size = clustered
        .iter()
        .filter(|c| (c.mean - 2.0).abs() < TWO_WINDOW)
        .map(|c| c.size)
        .sum();
    let near_two: Vec<Vec<f64>> = result
        .pairs
        .iter()
        .filter(|p| (p.lambda - 2.0).abs() < TWO_WINDOW)
        .map(|p| p.phi.clone())
        .collect();
    let defect = (!near_two.is_empty())
        .then(|| projection_defect(surface, &fem.mass, &near_two, &surface.elements));

    let mut nodal = Vec::with_capacity(result.pairs.len());
    for (index, pair) in result.pairs.iter().enumerate() {
        let domains = nodal_domains(surface, &pair.phi)?;
        let sig = symmetry_signature(surface, &fem.mass, &pair.phi)?;
        let obstruction = if sig.invariant() {
            Some(obstruction_classifier(surface, &fem.mass, &pair.phi)?)
        } else {
            None
        };
        nodal.push(NodalEntry {
            index,
            lambda: pair.lambda,
            domain_count: domains.count,
            courant_bound: index + 1,
            signature: Signatures {
                g1: sig.signs[0],
                g2: sig.signs[1],
                g3: sig.signs[2],
                g4: sig.signs[3],
            },
            obstruction,
        });
    }
    let courant_ok = nodal
        .iter()
        .filter(|e| e.index <= COURANT_MAX_INDEX)
        .all(|e| e.domain_count <= e.courant_bound);
    let classifier_consistent = nodal
        .iter()
        .filter_map(|e| e.obstruction.as_ref())
        .all(|o| o.consistent);
    let phi1_domains = nodal.get(1).map_or(0, |e| e.domain_count);

    let mut equators = Vec::with_capacity(4);
    for c in 0..4 {
        let mut v = Vec4::zeros();
        v[c] = 1.0;
        equators.push(equator_separation_check(surface, &v)?);
    }
    let takahashi = takahashi_residual(&surface.mesh.vertices, &fem)?;
    let zero_mode = classify_zero_mode(lambda0);
    let lambda1_in_band = lambda1 >= cfg.lambda_min && lambda1 <= cfg.lambda_max;
    let passed = result.converged
        && zero_mode == ZeroMode::Constant
        && courant_ok
        && lambda1_in_band
        && phi1_domains == 2;
    let summary = SpectrumSummary {
        m: cfg.m,
        k: cfg.k,
        n: cfg.n,
        mass: cfg.mass.name(),
        seed: cfg.seed,
        vertices: surface.mesh.vertex_count(),
        converged: result.converged,
        restarts: result.restarts,
        max_residual: result.pairs.iter().map(|p| p.residual).fold(0.0, f64::max),
        lambdas,
        zero_mode,
        lambda1,
        lambda_band: [cfg.lambda_min, cfg.lambda_max],
        lambda1_in_band,
        lambda1_above_one: lambda1 > 1.0,
        clusters: clustered,
        two_cluster_size,
        projection_defect: defect,
        eigenspace_invariant: defect.is_some_and(|d| d <= PROJECTION_TOL),
        takahashi,
        phi1_domains,
        courant_ok,
        classifier_consistent,
        equators,
        passed,
    };
    Ok(SpectrumRun {
        built,
        fem,
        summary,
        nodal,
        pairs: result.pairs,
    })
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<(ExitStatus, SpectrumSummary), PipelineError> {
    let run = analyze_spectrum(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("spectrum.csv"), spectrum_csv(&run.pairs))?;
    write_json(&cfg.out.join("spectrum.json"), &run.summary)?;
    write_json(&cfg.out.join("nodal.json"), &run.nodal)?;
    let title = format!("ξ({},{}) n={} lowest eigenvalues", cfg.m, cfg.k, cfg.n);
    std::fs::write(
        cfg.out.join("spectrum.svg"),
        spectrum_svg(&run.summary.lambdas, 2.0, 12, &title),
    )?;

    let surface = &run.built.surface;
    let mut file = MeshFile::new(surface.mesh.clone()).with_header(header(cfg, &run.built.solve));
    for (i, pair) in run.pairs.iter().enumerate() {
        file = file.with_field(&format!("phi_{i}"), pair.phi.clone());
    }
    if let Some(pair) = run.pairs.get(1) {
        let labels = nodal_domains(surface, &pair.phi)?
            .labels
            .iter()
            .map(|l| l.map_or(0.0, |x| (x + 1) as f64))
            .collect();
        file = file.with_field("domains_1", labels);
    }
    for c in 0..4 {
        let mut v = Vec4::zeros();
        v[c] = 1.0;
        file = file.with_field(&format!("x{}", c + 1), coordinate_function(surface, &v));
    }
    save_off(&cfg.out.join("eigenvectors.off"), &file)?;
    let status = if run.summary.passed {
        ExitStatus::Pass
    } else {
        ExitStatus::Eigen
    };
    Ok((status, run.summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, k: usize, n: usize, out: &Path) -> RunConfig {
        RunConfig {
            m,
            k,
            n,
            eigen_count: 8,
            out: out.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn group_verify_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let (status, report) = cmd_group_verify(&cfg(2, 2, 4, dir.path())).unwrap();
        assert_eq!(status, ExitStatus::Pass);
        assert_eq!(report.order, 18);
        assert!(dir.path().join("group.json").exists());
    }

    #[test]
    fn build_one_one() {
        let dir = tempfile::tempdir().unwrap();
        let (status, s) = cmd_build(&cfg(1, 1, 8, dir.path())).unwrap();
        assert_eq!(status, ExitStatus::Pass);
        assert_eq!((s.topology.chi, s.topology.genus), (0, 1));
        let area = 2.0 * std::f64::consts::PI.powi(2);
        assert!((s.topology.area - area).abs() < 0.02 * area);
        for f in ["patch.off", "surface.off", "surface.obj", "topology.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let json: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("topology.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(json["genus"], 1);
        assert_eq!(json["V"], s.topology.v);
    }

    #[test]
    fn solver_failure_maps_to_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(2, 2, 8, dir.path());
        c.max_iterations = 1;
        c.solver_tol = 1e-14;
        let (status, s) = cmd_build(&c).unwrap();
        assert!(!s.converged);
        assert_eq!(status, ExitStatus::Solver);
        assert_eq!(
            PipelineError::Plateau(PlateauError::Resolution(0)).exit_status(),
            ExitStatus::Solver
        );
    }

    #[test]
    fn spectrum_small_two_two() {
        let dir = tempfile::tempdir().unwrap();
        let (status, s) = cmd_spectrum(&cfg(2, 2, 8, dir.path())).unwrap();
        assert_eq!(status, ExitStatus::Pass, "{s:?}");
        assert_eq!(s.phi1_domains, 2);
        for f in [
            "spectrum.csv",
            "spectrum.json",
            "nodal.json",
            "spectrum.svg",
            "eigenvectors.off",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
        assert_eq!(csv.lines().count(), 9);
    }
}
