//! Block monotone Jacobi and Gauss-Seidel iterations.
//!
//! Each step solves, column by column, `(A_i + C_i) Z_i = -K_i(U^(n-1)) + coupling`
//! and sets `U^(n) = U^(n-1) + Z`. Started from an ordered upper solution the
//! iterates decrease monotonically; started from a lower solution they
//! increase. The Jacobi coupling term is zero, so columns are independent.
//! Gauss-Seidel adds `L_i Z_{i-1}` (left sweep) or `R_i Z_{i+1}` (right sweep)
//! using the correction already computed for the neighbouring line.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::BlockSystem;
use crate::error::{Error, NodeRef, Result, Sequence};
use crate::linalg::{thomas_solve, Tridiagonal};
use crate::mesh::{first_order_violation, max_norm_diff, GridPair};
use crate::problem::{ProblemSpec, SignClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Jacobi,
    GsLeft,
    GsRight,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Jacobi => "jacobi",
            Method::GsLeft => "gs_left",
            Method::GsRight => "gs_right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Stop once `max(||Z_upper||, ||Z_lower||) <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Check `lower^(n-1) <= lower^(n) <= upper^(n) <= upper^(n-1)` every step.
    pub enforce_monotone: bool,
    pub ordering_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Jacobi,
            tol: 1e-10,
            max_iter: 100_000,
            enforce_monotone: true,
            ordering_slack: 1e-11,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        SolverConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.ordering_slack >= 0.0) {
            return Err(Error::Config("ordering_slack must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub n: usize,
    pub znorm_upper: f64,
    pub znorm_lower: f64,
    pub res_upper: f64,
    pub res_lower: f64,
    pub millis: f64,
}

/// Per-step record of both sequences.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&TraceStep> {
        self.steps.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,znorm_upper,znorm_lower,res_upper,res_lower,millis")?;
        for s in &self.steps {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.3}",
                s.n, s.znorm_upper, s.znorm_lower, s.res_upper, s.res_lower, s.millis
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair {
    pub maximal: GridPair,
    pub minimal: GridPair,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MonotoneRun {
    pub solution: SolutionPair,
    pub trace: IterationTrace,
}

/// True when every component's convection admits the given sweep: declared
/// nonnegative for a left sweep, nonpositive for a right sweep, or zero at
/// every node.
pub fn sweep_admissible(sys: &BlockSystem, p: &ProblemSpec, dir: SweepDirection) -> bool {
    let required = match dir {
        SweepDirection::Left => SignClass::Nonnegative,
        SweepDirection::Right => SignClass::Nonpositive,
    };
    p.convection
        .iter()
        .all(|c| c.sign == required || c.vanishes_on(sys.mesh()))
}

fn check_direction(sys: &BlockSystem, p: &ProblemSpec, dir: SweepDirection) -> Result<()> {
    if sweep_admissible(sys, p, dir) {
        return Ok(());
    }
    Err(match dir {
        SweepDirection::Left => Error::DirectionIncompatible {
            sweep: "left",
            required: "nonnegative",
        },
        SweepDirection::Right => Error::DirectionIncompatible {
            sweep: "right",
            required: "nonpositive",
        },
    })
}

/// Sweep direction for Gauss-Seidel: left when admissible, otherwise right.
pub fn gs_direction(sys: &BlockSystem, p: &ProblemSpec) -> Result<SweepDirection> {
    if sweep_admissible(sys, p, SweepDirection::Left) {
        Ok(SweepDirection::Left)
    } else {
        check_direction(sys, p, SweepDirection::Right)?;
        Ok(SweepDirection::Right)
    }
}

type Columns = Vec<[Vec<f64>; 2]>;

/// `A_i + C_i` for every column, built once per run.
struct LineOperator<'a> {
    sys: &'a BlockSystem,
    p: &'a ProblemSpec,
    shifted: [Vec<Tridiagonal>; 2],
}

impl<'a> LineOperator<'a> {
    fn new(sys: &'a BlockSystem, p: &'a ProblemSpec, c: &GridPair) -> Result<Self> {
        c.check_mesh(sys.mesh())?;
        let nx = sys.mesh().nx();
        let shifted = [0, 1].map(|alpha| {
            (1..nx)
                .map(|i| sys.column(alpha, i).a.shifted(c.interior_column(alpha, i)))
                .collect()
        });
        Ok(LineOperator { sys, p, shifted })
    }

    fn nx(&self) -> usize {
        self.sys.mesh().nx()
    }

    /// `K_i(u)` for every interior column, evaluated concurrently.
    fn residuals(&self, u: &GridPair) -> Result<Columns> {
        (1..self.nx())
            .into_par_iter()
            .map(|i| self.sys.column_residuals(self.p, u, i))
            .collect()
    }

    fn jacobi_corrections(&self, k: &Columns) -> Result<Columns> {
        k.par_iter()
            .enumerate()
            .map(|(c, kc)| {
                let solve = |alpha: usize| {
                    let rhs: Vec<f64> = kc[alpha].iter().map(|v| -v).collect();
                    thomas_solve(&self.shifted[alpha][c], &rhs)
                };
                Ok([solve(0)?, solve(1)?])
            })
            .collect()
    }

    fn gs_corrections(&self, k: &Columns, dir: SweepDirection) -> Result<Columns> {
        let nx = self.nx();
        let mut z: Columns = vec![[Vec::new(), Vec::new()]; nx - 1];
        let order: Box<dyn Iterator<Item = usize>> = match dir {
            SweepDirection::Left => Box::new(1..nx),
            SweepDirection::Right => Box::new((1..nx).rev()),
        };
        for i in order {
            for alpha in 0..2 {
                let block = self.sys.column(alpha, i);
                let mut rhs: Vec<f64> = k[i - 1][alpha].iter().map(|v| -v).collect();
                match dir {
                    SweepDirection::Left if i > 1 => {
                        for ((r, l), zp) in rhs.iter_mut().zip(&block.left).zip(&z[i - 2][alpha]) {
                            *r += l * zp;
                        }
                    }
                    SweepDirection::Right if i + 1 < nx => {
                        for ((r, c), zn) in rhs.iter_mut().zip(&block.right).zip(&z[i][alpha]) {
                            *r += c * zn;
                        }
                    }
                    _ => {}
                }
                z[i - 1][alpha] = thomas_solve(&self.shifted[alpha][i - 1], &rhs)?;
            }
        }
        Ok(z)
    }

    fn apply(&self, u_prev: &GridPair, z: &Columns, is_first: bool) -> GridPair {
        let mut next = u_prev.clone();
        for (c, zc) in z.iter().enumerate() {
            for alpha in 0..2 {
                for (v, dz) in next
                    .interior_column_mut(alpha, c + 1)
                    .iter_mut()
                    .zip(&zc[alpha])
                {
                    *v += dz;
                }
            }
        }
        if is_first {
            let mesh = *u_prev.mesh();
            let g = self.sys.boundary();
            for alpha in 0..2 {
                for (i, j) in mesh.boundary_nodes() {
                    next.set(alpha, i, j, g.get(alpha, i, j));
                }
            }
        }
        next
    }

    fn step(
        &self,
        method: Method,
        u_prev: &GridPair,
        k: &Columns,
        is_first: bool,
    ) -> Result<GridPair> {
        let z = match method {
            Method::Jacobi => self.jacobi_corrections(k)?,
            Method::GsLeft => self.gs_corrections(k, SweepDirection::Left)?,
            Method::GsRight => self.gs_corrections(k, SweepDirection::Right)?,
        };
        Ok(self.apply(u_prev, &z, is_first))
    }
}

fn max_abs_columns(k: &Columns) -> f64 {
    k.iter()
        .flat_map(|c| c.iter())
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// One block Jacobi step from `u_prev`; `c` holds `c_alpha` at the nodes.
///
/// On the first step the boundary of the result is set to `g`; afterwards it
/// is left unchanged.
pub fn jacobi_step(
    sys: &BlockSystem,
    p: &ProblemSpec,
    c: &GridPair,
    u_prev: &GridPair,
    is_first: bool,
) -> Result<GridPair> {
    u_prev.check_mesh(sys.mesh())?;
    let op = LineOperator::new(sys, p, c)?;
    let k = op.residuals(u_prev)?;
    op.step(Method::Jacobi, u_prev, &k, is_first)
}

/// One block Gauss-Seidel step sweeping in `direction`.
pub fn gs_step(
    sys: &BlockSystem,
    p: &ProblemSpec,
    c: &GridPair,
    u_prev: &GridPair,
    direction: SweepDirection,
    is_first: bool,
) -> Result<GridPair> {
    u_prev.check_mesh(sys.mesh())?;
    check_direction(sys, p, direction)?;
    let op = LineOperator::new(sys, p, c)?;
    let k = op.residuals(u_prev)?;
    let method = match direction {
        SweepDirection::Left => Method::GsLeft,
        SweepDirection::Right => Method::GsRight,
    };
    op.step(method, u_prev, &k, is_first)
}

fn check_method(sys: &BlockSystem, p: &ProblemSpec, method: Method) -> Result<()> {
    match method {
        Method::Jacobi => Ok(()),
        Method::GsLeft => check_direction(sys, p, SweepDirection::Left),
        Method::GsRight => check_direction(sys, p, SweepDirection::Right),
    }
}

/// One monotone sequence advanced step by step, caching `K(U^(n))`.
struct SequenceState {
    current: GridPair,
    k: Columns,
    znorm: f64,
}

impl SequenceState {
    fn new(op: &LineOperator<'_>, start: &GridPair) -> Result<Self> {
        Ok(SequenceState {
            current: start.clone(),
            k: op.residuals(start)?,
            znorm: f64::INFINITY,
        })
    }

    /// Advances one step and returns the previous iterate.
    fn advance(
        &mut self,
        op: &LineOperator<'_>,
        method: Method,
        is_first: bool,
    ) -> Result<GridPair> {
        let next = op.step(method, &self.current, &self.k, is_first)?;
        self.znorm = max_norm_diff(&next, &self.current)?;
        self.k = op.residuals(&next)?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn residual_norm(&self) -> f64 {
        max_abs_columns(&self.k)
    }
}

fn ordering_error(
    step: usize,
    sequence: Sequence,
    hit: (usize, usize, usize, f64),
    what: &str,
) -> Error {
    let (alpha, i, j, excess) = hit;
    Error::MonotonicityViolation {
        step,
        sequence,
        node: NodeRef {
            component: alpha + 1,
            i,
            j,
        },
        detail: format!("{what} by {excess:e}"),
    }
}

/// `lower_prev <= lower <= upper <= upper_prev` within `slack`.
fn check_monotone_step(
    step: usize,
    lower_prev: &GridPair,
    lower: &GridPair,
    upper: &GridPair,
    upper_prev: &GridPair,
    slack: f64,
) -> Result<()> {
    if let Some(hit) = first_order_violation(lower_prev, lower, slack)? {
        return Err(ordering_error(
            step,
            Sequence::Lower,
            hit,
            "lower iterate decreased",
        ));
    }
    if let Some(hit) = first_order_violation(upper, upper_prev, slack)? {
        return Err(ordering_error(
            step,
            Sequence::Upper,
            hit,
            "upper iterate increased",
        ));
    }
    if let Some(hit) = first_order_violation(lower, upper, slack)? {
        return Err(ordering_error(
            step,
            Sequence::Lower,
            hit,
            "lower iterate exceeds upper",
        ));
    }
    Ok(())
}

/// Runs the upper sequence from `upper0` and the lower one from `lower0`
/// until both step norms are within `cfg.tol`.
///
/// `(lower0, upper0)` should be ordered upper and lower solutions (see
/// [`crate::discretization::verify_ordered_pair`]); `C` is built from
/// `p.cbound`. Running out of iterations is not an error: the result comes
/// back with `converged = false`.
pub fn run_monotone(
    sys: &BlockSystem,
    p: &ProblemSpec,
    cfg: &SolverConfig,
    lower0: &GridPair,
    upper0: &GridPair,
) -> Result<MonotoneRun> {
    cfg.validate()?;
    lower0.check_mesh(sys.mesh())?;
    upper0.check_mesh(sys.mesh())?;
    check_method(sys, p, cfg.method)?;
    let c = p.cbound_grid(sys.mesh())?;
    let op = LineOperator::new(sys, p, &c)?;

    let start = Instant::now();
    let mut upper = SequenceState::new(&op, upper0)?;
    let mut lower = SequenceState::new(&op, lower0)?;
    let mut trace = IterationTrace::default();
    let mut converged = false;
    let mut n = 0;
    while n < cfg.max_iter {
        n += 1;
        let upper_prev = upper.advance(&op, cfg.method, n == 1)?;
        let lower_prev = lower.advance(&op, cfg.method, n == 1)?;
        if cfg.enforce_monotone {
            check_monotone_step(
                n,
                &lower_prev,
                &lower.current,
                &upper.current,
                &upper_prev,
                cfg.ordering_slack,
            )?;
        }
        trace.steps.push(TraceStep {
            n,
            znorm_upper: upper.znorm,
            znorm_lower: lower.znorm,
            res_upper: upper.residual_norm(),
            res_lower: lower.residual_norm(),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        if upper.znorm.max(lower.znorm) <= cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(MonotoneRun {
        solution: SolutionPair {
            maximal: upper.current,
            minimal: lower.current,
            iterations: n,
            converged,
        },
        trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichFailure {
    pub step: usize,
    pub node: NodeRef,
    pub detail: String,
}

/// Result of a lockstep Jacobi / Gauss-Seidel run.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub direction: SweepDirection,
    /// Step at which each method first met the tolerance, if it did.
    pub iters_jacobi: Option<usize>,
    pub iters_gs: Option<usize>,
    /// Number of lockstep steps over which the sandwich was checked.
    pub steps_checked: usize,
    pub sandwich_ok: bool,
    pub violation: Option<SandwichFailure>,
    pub jacobi: MonotoneRun,
    pub gs: MonotoneRun,
}

impl ComparisonReport {
    /// Gauss-Seidel converged and needed no more steps than Jacobi.
    pub fn gs_not_slower(&self) -> bool {
        match (self.iters_gs, self.iters_jacobi) {
            (Some(gs), Some(j)) => gs <= j,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

struct MethodRun {
    method: Method,
    upper: SequenceState,
    lower: SequenceState,
    trace: IterationTrace,
    converged_at: Option<usize>,
    solution: Option<(GridPair, GridPair)>,
}

impl MethodRun {
    fn new(
        op: &LineOperator<'_>,
        method: Method,
        lower0: &GridPair,
        upper0: &GridPair,
    ) -> Result<Self> {
        Ok(MethodRun {
            method,
            upper: SequenceState::new(op, upper0)?,
            lower: SequenceState::new(op, lower0)?,
            trace: IterationTrace::default(),
            converged_at: None,
            solution: None,
        })
    }

    fn advance(
        &mut self,
        op: &LineOperator<'_>,
        n: usize,
        cfg: &SolverConfig,
        start: Instant,
    ) -> Result<()> {
        let upper_prev = self.upper.advance(op, self.method, n == 1)?;
        let lower_prev = self.lower.advance(op, self.method, n == 1)?;
        if cfg.enforce_monotone {
            check_monotone_step(
                n,
                &lower_prev,
                &self.lower.current,
                &self.upper.current,
                &upper_prev,
                cfg.ordering_slack,
            )?;
        }
        if self.converged_at.is_none() {
            self.trace.steps.push(TraceStep {
                n,
                znorm_upper: self.upper.znorm,
                znorm_lower: self.lower.znorm,
                res_upper: self.upper.residual_norm(),
                res_lower: self.lower.residual_norm(),
                millis: start.elapsed().as_secs_f64() * 1e3,
            });
            if self.upper.znorm.max(self.lower.znorm) <= cfg.tol {
                self.converged_at = Some(n);
                self.solution = Some((self.upper.current.clone(), self.lower.current.clone()));
            }
        }
        Ok(())
    }

    fn finish(self, steps: usize) -> MonotoneRun {
        let (maximal, minimal) = self
            .solution
            .unwrap_or((self.upper.current, self.lower.current));
        MonotoneRun {
            solution: SolutionPair {
                maximal,
                minimal,
                iterations: self.converged_at.unwrap_or(steps),
                converged: self.converged_at.is_some(),
            },
            trace: self.trace,
        }
    }
}

fn sandwich_violation(
    n: usize,
    j: &MethodRun,
    gs: &MethodRun,
    slack: f64,
) -> Result<Option<SandwichFailure>> {
    let checks = [
        (
            &j.lower.current,
            &gs.lower.current,
            "Jacobi lower exceeds Gauss-Seidel lower",
        ),
        (
            &gs.lower.current,
            &gs.upper.current,
            "Gauss-Seidel lower exceeds Gauss-Seidel upper",
        ),
        (
            &gs.upper.current,
            &j.upper.current,
            "Gauss-Seidel upper exceeds Jacobi upper",
        ),
    ];
    for (a, b, what) in checks {
        if let Some((alpha, i, jj, excess)) = first_order_violation(a, b, slack)? {
            let node = NodeRef {
                component: alpha + 1,
                i,
                j: jj,
            };
            return Ok(Some(SandwichFailure {
                step: n,
                node,
                detail: format!("{what} by {excess:e}"),
            }));
        }
    }
    Ok(None)
}

/// Runs Jacobi and Gauss-Seidel in lockstep from the same initial pair and
/// checks `J_lower <= GS_lower <= GS_upper <= J_upper` at every step.
///
/// Both methods keep stepping until both have converged (or `max_iter` is
/// hit), so the sandwich is checked over the whole slower run. A violated
/// sandwich is reported in the result rather than returned as an error.
pub fn compare_lockstep(
    sys: &BlockSystem,
    p: &ProblemSpec,
    cfg_base: &SolverConfig,
    lower0: &GridPair,
    upper0: &GridPair,
) -> Result<ComparisonReport> {
    cfg_base.validate()?;
    lower0.check_mesh(sys.mesh())?;
    upper0.check_mesh(sys.mesh())?;
    let direction = gs_direction(sys, p)?;
    let gs_method = match direction {
        SweepDirection::Left => Method::GsLeft,
        SweepDirection::Right => Method::GsRight,
    };
    let c = p.cbound_grid(sys.mesh())?;
    let op = LineOperator::new(sys, p, &c)?;
    let start = Instant::now();
    let mut jac = MethodRun::new(&op, Method::Jacobi, lower0, upper0)?;
    let mut gs = MethodRun::new(&op, gs_method, lower0, upper0)?;
    let mut violation = None;
    let mut n = 0;
    while n < cfg_base.max_iter && (jac.converged_at.is_none() || gs.converged_at.is_none()) {
        n += 1;
        jac.advance(&op, n, cfg_base, start)?;
        gs.advance(&op, n, cfg_base, start)?;
        if let Some(v) = sandwich_violation(n, &jac, &gs, cfg_base.ordering_slack)? {
            violation = Some(v);
            break;
        }
    }
    Ok(ComparisonReport {
        direction,
        iters_jacobi: jac.converged_at,
        iters_gs: gs.converged_at,
        steps_checked: n,
        sandwich_ok: violation.is_none(),
        violation,
        jacobi: jac.finish(n),
        gs: gs.finish(n),
    })
}

/// Strict form of [`compare_lockstep`]: a sandwich violation or Gauss-Seidel
/// needing more steps than Jacobi is an error.
pub fn compare_methods(
    sys: &BlockSystem,
    p: &ProblemSpec,
    cfg_base: &SolverConfig,
    lower0: &GridPair,
    upper0: &GridPair,
) -> Result<ComparisonReport> {
    let report = compare_lockstep(sys, p, cfg_base, lower0, upper0)?;
    if let Some(v) = &report.violation {
        return Err(Error::SandwichViolation {
            step: v.step,
            node: v.node,
            detail: v.detail.clone(),
        });
    }
    if !report.gs_not_slower() {
        return Err(Error::ComparisonOrder {
            iters_jacobi: report.iters_jacobi.unwrap_or(report.steps_checked),
            iters_gs: report.iters_gs.unwrap_or(report.steps_checked),
        });
    }
    Ok(report)
}
