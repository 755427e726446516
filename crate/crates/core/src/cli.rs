//! JSON run configurations and the runner behind the `blockmono` binary.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::discretization::{verify_ordered_pair, BlockSystem};
use crate::error::{Error, Result};
use crate::init::{
    gas_liquid_initials, lower_zero, upper_constant, upper_from_bound, GasLiquidParams, InitialPair,
};
use crate::mesh::{max_norm_diff, Mesh};
use crate::models::linear_problem;
use crate::monotone::{compare_lockstep, run_monotone, Method, MonotoneRun, SolverConfig};
use crate::problem::{
    check_sector_conditions, CBound, Convection, ProblemSpec, ScalarField, SectorSample, SignClass,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Upper limit on `nx` and `ny` accepted from a config file.
pub const MAX_MESH_DIM: usize = 4096;

/// Lattice size per node for the sampled derivative checks before a run.
const SECTOR_SAMPLES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `a + bx x + by y + bxy x y`.
    Bilinear {
        a: f64,
        #[serde(default)]
        bx: f64,
        #[serde(default)]
        by: f64,
        #[serde(default)]
        bxy: f64,
    },
}

impl FieldSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            FieldSpec::Constant { value } => value,
            FieldSpec::Bilinear { a, bx, by, bxy } => a + bx * x + by * y + bxy * x * y,
        }
    }

    pub fn field(&self) -> ScalarField {
        let spec = *self;
        Arc::new(move |x, y| spec.eval(x, y))
    }

    fn is_finite(&self) -> bool {
        match *self {
            FieldSpec::Constant { value } => value.is_finite(),
            FieldSpec::Bilinear { a, bx, by, bxy } => {
                [a, bx, by, bxy].iter().all(|v| v.is_finite())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvectionSpec {
    pub field: FieldSpec,
    /// Declared sign class; inferred from the mesh values when absent.
    #[serde(default)]
    pub sign: Option<SignClass>,
}

impl ConvectionSpec {
    fn build(&self, mesh: &Mesh) -> Convection {
        let field = self.field.field();
        let sign = self.sign.unwrap_or_else(|| {
            let vals: Vec<f64> = mesh
                .nodes()
                .map(|(i, j)| field(mesh.x(i), mesh.y(j)))
                .collect();
            if vals.iter().all(|v| *v >= 0.0) {
                SignClass::Nonnegative
            } else if vals.iter().all(|v| *v <= 0.0) {
                SignClass::Nonpositive
            } else {
                SignClass::Mixed
            }
        });
        Convection::new(field, sign)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasLiquidConfig {
    pub sigma1: f64,
    pub k1: f64,
    pub rho1: f64,
    pub eps: [f64; 2],
    pub convection: [ConvectionSpec; 2],
    pub g1star: FieldSpec,
    pub g2: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub eps: [f64; 2],
    pub convection: [ConvectionSpec; 2],
    pub boundary: [FieldSpec; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", deny_unknown_fields)]
pub enum ModelConfig {
    #[serde(rename = "gas-liquid")]
    GasLiquid(GasLiquidConfig),
    #[serde(rename = "linear")]
    Linear(LinearConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMethod {
    Jacobi,
    GsLeft,
    GsRight,
    Compare,
}

impl RunMethod {
    fn name(&self) -> &'static str {
        match self {
            RunMethod::Jacobi => "jacobi",
            RunMethod::GsLeft => "gs_left",
            RunMethod::GsRight => "gs_right",
            RunMethod::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    /// Zero lower solution, upper solution from `L U = M`.
    Bounded { m: [f64; 2] },
    /// Zero lower solution, constant upper solution `K`.
    Constant { k: [f64; 2] },
    /// Linear-solve pair of the gas-liquid model.
    GasLiquid,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub mesh: MeshConfig,
    pub method: RunMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub init: InitConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_eps(eps: &[f64; 2]) -> Result<()> {
    if eps.iter().all(|e| e.is_finite() && *e > 0.0) {
        Ok(())
    } else {
        Err(config_err(format!("eps must be positive, got {eps:?}")))
    }
}

impl RunConfig {
    /// Structural checks that do not need a mesh or a solve.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let MeshConfig { nx, ny } = self.mesh;
        if !(2..=MAX_MESH_DIM).contains(&nx) || !(2..=MAX_MESH_DIM).contains(&ny) {
            return Err(config_err(format!(
                "mesh nx = {nx}, ny = {ny} must lie in 2..={MAX_MESH_DIM}"
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(config_err(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(config_err("max_iter must be at least 1"));
        }
        let fields: Vec<&FieldSpec> = match &self.model {
            ModelConfig::GasLiquid(g) => {
                check_eps(&g.eps)?;
                for (name, v) in [("sigma1", g.sigma1), ("k1", g.k1), ("rho1", g.rho1)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(config_err(format!("{name} must be positive, got {v}")));
                    }
                }
                vec![
                    &g.convection[0].field,
                    &g.convection[1].field,
                    &g.g1star,
                    &g.g2,
                ]
            }
            ModelConfig::Linear(l) => {
                check_eps(&l.eps)?;
                vec![
                    &l.convection[0].field,
                    &l.convection[1].field,
                    &l.boundary[0],
                    &l.boundary[1],
                ]
            }
        };
        if !fields.iter().all(|f| f.is_finite()) {
            return Err(config_err("field coefficients must be finite"));
        }
        match (&self.model, &self.init) {
            (ModelConfig::GasLiquid(_), InitConfig::Bounded { .. }) => {
                return Err(config_err(
                    "init 'bounded' is not available for the gas-liquid model",
                ))
            }
            (ModelConfig::Linear(_), InitConfig::GasLiquid) => {
                return Err(config_err(
                    "init 'gas_liquid' requires the gas-liquid model",
                ))
            }
            _ => {}
        }
        match self.init {
            InitConfig::Bounded { m } if !m.iter().all(|v| v.is_finite() && *v >= 0.0) => Err(
                config_err(format!("bound m must be nonnegative, got {m:?}")),
            ),
            InitConfig::Constant { k } if !k.iter().all(|v| v.is_finite()) => {
                Err(config_err(format!("constant k must be finite, got {k:?}")))
            }
            _ => Ok(()),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let method = match self.method {
            RunMethod::Jacobi | RunMethod::Compare => Method::Jacobi,
            RunMethod::GsLeft => Method::GsLeft,
            RunMethod::GsRight => Method::GsRight,
        };
        SolverConfig {
            method,
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverConfig::default()
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Problem, block system and ordered initial pair described by `cfg`.
pub fn build_setup(cfg: &RunConfig) -> Result<InitialPair> {
    let mesh = Mesh::new(cfg.mesh.nx, cfg.mesh.ny)?;
    match &cfg.model {
        ModelConfig::GasLiquid(g) => {
            let gp = GasLiquidParams {
                sigma1: g.sigma1,
                k1: g.k1,
                rho1: g.rho1,
                eps: g.eps,
                convection: [g.convection[0].build(&mesh), g.convection[1].build(&mesh)],
                g1star: g.g1star.field(),
                g2: g.g2.field(),
            };
            match cfg.init {
                InitConfig::GasLiquid => gas_liquid_initials(&gp, &mesh),
                InitConfig::Constant { k } => {
                    gp.validate(&mesh)?;
                    let problem =
                        gp.problem(CBound::constant([gp.sigma1 * k[1], gp.sigma2() * gp.rho1]));
                    constant_pair(&mesh, problem, k)
                }
                InitConfig::Bounded { .. } => Err(config_err("init 'bounded' not available")),
            }
        }
        ModelConfig::Linear(l) => {
            let problem = linear_problem(
                l.eps,
                [l.convection[0].build(&mesh), l.convection[1].build(&mesh)],
                [l.boundary[0].field(), l.boundary[1].field()],
            );
            match cfg.init {
                InitConfig::Bounded { m } => {
                    let system = BlockSystem::new(&mesh, &problem)?;
                    let lower = lower_zero(&system, &problem)?;
                    let upper = upper_from_bound(&system, &problem, m)?;
                    Ok(InitialPair {
                        problem,
                        system,
                        lower,
                        upper,
                    })
                }
                InitConfig::Constant { k } => constant_pair(&mesh, problem, k),
                InitConfig::GasLiquid => Err(config_err("init 'gas_liquid' not available")),
            }
        }
    }
}

fn constant_pair(mesh: &Mesh, problem: ProblemSpec, k: [f64; 2]) -> Result<InitialPair> {
    let system = BlockSystem::new(mesh, &problem)?;
    let lower = lower_zero(&system, &problem)?;
    let upper = upper_constant(&system, &problem, k)?;
    Ok(InitialPair {
        problem,
        system,
        lower,
        upper,
    })
}

/// Ordered-pair and sampled sector checks run before iterating.
pub fn check_setup(setup: &InitialPair) -> Result<()> {
    setup.problem.validate(setup.system.mesh())?;
    let slack = setup.system.default_residual_slack();
    let report = verify_ordered_pair(
        &setup.system,
        &setup.problem,
        &setup.lower,
        &setup.upper,
        slack,
    )?;
    if !report.passed() {
        return Err(Error::Precondition {
            reason: "initial pair is not an ordered upper/lower pair".into(),
            nodes: report.nodes(),
        });
    }
    let sector = SectorSample::new(setup.lower.clone(), setup.upper.clone())?;
    let report = check_sector_conditions(&setup.problem, &sector, SECTOR_SAMPLES)?;
    if !report.passed() {
        return Err(Error::Precondition {
            reason: "derivative conditions fail in the sector".into(),
            nodes: report.violations.iter().map(|v| v.node).collect(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_znorm: f64,
    pub final_residual: f64,
    pub max_minus_min_norm: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub iters_jacobi: Option<usize>,
    pub iters_gs: Option<usize>,
    pub sandwich_ok: bool,
}

/// Result of a completed run; files have been written to `output_dir`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub comparison: Option<Comparison>,
    pub output_dir: PathBuf,
    /// Process exit status: 0 success, 2 sandwich failure, 3 not converged.
    pub exit_code: i32,
}

/// Process exit status for an error raised before or during a run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io(_) | Error::Json(_) | Error::DimensionTooSmall { .. } => 1,
        Error::LinearNonConvergence { .. } | Error::NewtonNonConvergence { .. } => 3,
        _ => 2,
    }
}

fn write_solution(dir: &Path, run: &MonotoneRun) -> Result<()> {
    let s = &run.solution;
    for alpha in 0..2 {
        s.maximal
            .save_component_csv(alpha, &dir.join(format!("maximal_{}.csv", alpha + 1)))?;
        s.minimal
            .save_component_csv(alpha, &dir.join(format!("minimal_{}.csv", alpha + 1)))?;
    }
    run.trace.save_csv(&dir.join("trace_upper.csv"))?;
    run.trace.save_csv(&dir.join("trace_lower.csv"))?;
    Ok(())
}

fn summarize(method: &str, run: &MonotoneRun, wall_ms: f64) -> Result<Summary> {
    let last = run.trace.last();
    Ok(Summary {
        method: method.to_string(),
        iterations: run.solution.iterations,
        converged: run.solution.converged,
        final_znorm: last.map_or(f64::NAN, |s| s.znorm_upper.max(s.znorm_lower)),
        final_residual: last.map_or(f64::NAN, |s| s.res_upper.max(s.res_lower)),
        max_minus_min_norm: max_norm_diff(&run.solution.maximal, &run.solution.minimal)?,
        wall_ms,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs the configured experiment and writes its output files.
///
/// `out` overrides `cfg.output_dir`; with neither set the current directory
/// is used.
pub fn run_from_config(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let setup = build_setup(cfg)?;
    check_setup(&setup)?;
    std::fs::create_dir_all(&dir)?;

    let solver = cfg.solver_config();
    let start = Instant::now();
    let InitialPair {
        problem,
        system,
        lower,
        upper,
    } = &setup;
    if cfg.method == RunMethod::Compare {
        let report = compare_lockstep(system, problem, &solver, lower, upper)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        write_solution(&dir, &report.gs)?;
        report
            .jacobi
            .trace
            .save_csv(&dir.join("trace_jacobi.csv"))?;
        report.gs.trace.save_csv(&dir.join("trace_gs.csv"))?;
        let comparison = Comparison {
            iters_jacobi: report.iters_jacobi,
            iters_gs: report.iters_gs,
            sandwich_ok: report.sandwich_ok,
        };
        write_json(&dir.join("comparison.json"), &comparison)?;
        let summary = summarize(cfg.method.name(), &report.gs, wall_ms)?;
        write_json(&dir.join("summary.json"), &summary)?;
        let exit_code = if !report.sandwich_ok {
            2
        } else if report.iters_jacobi.is_none() || report.iters_gs.is_none() {
            3
        } else {
            0
        };
        return Ok(RunOutcome {
            summary,
            comparison: Some(comparison),
            output_dir: dir,
            exit_code,
        });
    }

    let run = run_monotone(system, problem, &solver, lower, upper)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    write_solution(&dir, &run)?;
    let summary = summarize(cfg.method.name(), &run, wall_ms)?;
    write_json(&dir.join("summary.json"), &summary)?;
    let exit_code = if summary.converged { 0 } else { 3 };
    Ok(RunOutcome {
        summary,
        comparison: None,
        output_dir: dir,
        exit_code,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAS_LIQUID: &str = r#"{
        "schema_version": 1,
        "model": {"name": "gas-liquid", "params": {
            "sigma1": 1.0, "k1": 1.0, "rho1": 1.0, "eps": [1.0, 1.0],
            "convection": [{"field": {"kind": "constant", "value": 0.0}},
                           {"field": {"kind": "constant", "value": 0.0}}],
            "g1star": {"kind": "constant", "value": 0.0},
            "g2": {"kind": "constant", "value": 1.0}
        }},
        "mesh": {"nx": 5, "ny": 5},
        "method": "gs_left",
        "init": {"kind": "gas_liquid"}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = parse_config(GAS_LIQUID).unwrap();
        assert_eq!(cfg.tol, 1e-10);
        assert_eq!(cfg.max_iter, 100_000);
        assert_eq!(cfg.method, RunMethod::GsLeft);
        assert!(cfg.output_dir.is_none());
    }

    #[test]
    fn roundtrips_through_json() {
        let cfg = parse_config(GAS_LIQUID).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let bad = GAS_LIQUID.replace("\"method\"", "\"tolerance\": 1, \"method\"");
        assert!(matches!(parse_config(&bad), Err(Error::Config(_))));
        let bad = GAS_LIQUID.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(parse_config(&bad), Err(Error::Config(_))));
        let bad = GAS_LIQUID.replace("gas-liquid", "brusselator");
        assert!(matches!(parse_config(&bad), Err(Error::Config(_))));
        let bad = GAS_LIQUID.replace("\"nx\": 5", "\"nx\": 1");
        assert!(matches!(parse_config(&bad), Err(Error::Config(_))));
        let bad = GAS_LIQUID.replace(
            "{\"kind\": \"gas_liquid\"}",
            "{\"kind\": \"bounded\", \"m\": [1, 1]}",
        );
        assert!(matches!(parse_config(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn bilinear_field() {
        let f = FieldSpec::Bilinear {
            a: 1.0,
            bx: 2.0,
            by: 3.0,
            bxy: 4.0,
        };
        assert_eq!(f.eval(0.5, 0.25), 1.0 + 1.0 + 0.75 + 0.5);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(
            exit_code(&Error::Precondition {
                reason: "x".into(),
                nodes: vec![]
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::DirectionIncompatible {
                sweep: "left",
                required: "nonnegative"
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::LinearNonConvergence {
                iterations: 1,
                residual: 1.0
            }),
            3
        );
    }
}
