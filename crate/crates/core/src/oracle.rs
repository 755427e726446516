//! Damped Newton solve of the full nonlinear scheme with a dense Jacobian.
//!
//! Reference solver for small meshes. It uses the assembled stencil and the
//! boundary grid of a [`BlockSystem`] but none of the line or sweep code.

use crate::discretization::BlockSystem;
use crate::error::{Error, Result};
use crate::mesh::GridPair;
use crate::problem::ProblemSpec;

/// Largest unknown count the dense oracle accepts (two components on a 17 x 17 mesh).
pub const MAX_UNKNOWNS: usize = 2 * 16 * 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Target for the max-norm of the full-scheme residual.
    pub tol: f64,
    pub max_newton: usize,
    /// Initial step factor in `(0, 1]`.
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-12,
            max_newton: 50,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub solution: GridPair,
    pub steps: usize,
    pub residual: f64,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Gaussian elimination with partial pivoting. Consumes `a`.
pub fn lu_solve(mut a: DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if rhs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: (n, 1),
            got: (rhs.len(), 1),
        });
    }
    let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut b = rhs.to_vec();
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|r| (r, a.get(r, k).abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if !(pmax > scale * 1e-14) || !pmax.is_finite() {
            return Err(Error::SingularJacobian { pivot: k });
        }
        if p != k {
            for c in 0..n {
                a.data.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let piv = a.get(k, k);
        for r in k + 1..n {
            let m = a.get(r, k) / piv;
            if m == 0.0 {
                continue;
            }
            for c in k + 1..n {
                let v = a.get(k, c);
                a.add(r, c, -m * v);
            }
            a.set(r, k, 0.0);
            b[r] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a.get(k, c) * x[c]).sum();
        x[k] = (b[k] - s) / a.get(k, k);
    }
    Ok(x)
}

/// Unknown numbering: component-major, then interior nodes in mesh order.
struct Layout {
    nx: usize,
    ny: usize,
}

impl Layout {
    fn per_component(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    fn len(&self) -> usize {
        2 * self.per_component()
    }

    fn idx(&self, alpha: usize, i: usize, j: usize) -> usize {
        alpha * self.per_component() + (i - 1) * (self.ny - 1) + (j - 1)
    }

    fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && i < self.nx && j > 0 && j < self.ny
    }
}

/// Full-scheme residual at every interior node, reading neighbour values
/// directly from `u` (whose boundary must hold `g`).
pub fn full_residual(sys: &BlockSystem, p: &ProblemSpec, u: &GridPair) -> Result<GridPair> {
    u.check_mesh(sys.mesh())?;
    let mesh = *sys.mesh();
    let s = sys.stencil();
    let mut out = GridPair::zeros(&mesh);
    for (i, j) in mesh.interior_nodes() {
        let f = p.reaction_at(mesh.x(i), mesh.y(j), u.node(i, j));
        for alpha in 0..2 {
            let v = s.d.get(alpha, i, j) * u.get(alpha, i, j)
                - s.l.get(alpha, i, j) * u.get(alpha, i - 1, j)
                - s.r.get(alpha, i, j) * u.get(alpha, i + 1, j)
                - s.b.get(alpha, i, j) * u.get(alpha, i, j - 1)
                - s.t.get(alpha, i, j) * u.get(alpha, i, j + 1)
                + f[alpha];
            out.set(alpha, i, j, v);
        }
    }
    if !out.all_finite() {
        return Err(Error::InvalidProblem(
            "non-finite residual in Newton oracle".into(),
        ));
    }
    Ok(out)
}

/// Jacobian of [`full_residual`] with respect to the interior unknowns.
pub fn full_jacobian(sys: &BlockSystem, p: &ProblemSpec, u: &GridPair) -> Result<DenseMatrix> {
    let mesh = *sys.mesh();
    let lay = Layout {
        nx: mesh.nx(),
        ny: mesh.ny(),
    };
    if lay.len() > MAX_UNKNOWNS {
        return Err(Error::InvalidProblem(format!(
            "Newton oracle limited to {MAX_UNKNOWNS} unknowns, mesh has {}",
            lay.len()
        )));
    }
    let s = sys.stencil();
    let mut jac = DenseMatrix::zeros(lay.len());
    for (i, j) in mesh.interior_nodes() {
        let fj = p.reaction.jacobian(mesh.x(i), mesh.y(j), u.node(i, j));
        for alpha in 0..2 {
            let row = lay.idx(alpha, i, j);
            jac.add(row, row, s.d.get(alpha, i, j));
            let nbrs = [
                (i - 1, j, s.l.get(alpha, i, j)),
                (i + 1, j, s.r.get(alpha, i, j)),
                (i, j - 1, s.b.get(alpha, i, j)),
                (i, j + 1, s.t.get(alpha, i, j)),
            ];
            for (ni, nj, coef) in nbrs {
                if lay.is_interior(ni, nj) {
                    jac.add(row, lay.idx(alpha, ni, nj), -coef);
                }
            }
            for beta in 0..2 {
                jac.add(row, lay.idx(beta, i, j), fj[alpha][beta]);
            }
        }
    }
    Ok(jac)
}

fn gather(lay: &Layout, k: &GridPair) -> Vec<f64> {
    let mut out = vec![0.0; lay.len()];
    for alpha in 0..2 {
        for i in 1..lay.nx {
            for j in 1..lay.ny {
                out[lay.idx(alpha, i, j)] = k.get(alpha, i, j);
            }
        }
    }
    out
}

/// `(lower + upper) / 2`, the default Newton start.
pub fn midpoint(lower: &GridPair, upper: &GridPair) -> Result<GridPair> {
    lower.check_same_mesh(upper)?;
    Ok(lower.map(|alpha, i, j, v| 0.5 * (v + upper.get(alpha, i, j))))
}

/// Damped Newton iteration from `start`; the boundary of `start` is reset to `g`.
///
/// Stops once the residual max-norm is below `cfg.tol`, or below the
/// roundoff level `32 eps ||d|| ||U||` of the stencil when that is larger.
pub fn newton_solve(
    sys: &BlockSystem,
    p: &ProblemSpec,
    start: &GridPair,
    cfg: NewtonConfig,
) -> Result<NewtonResult> {
    if !(cfg.tol > 0.0) || !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::InvalidProblem(format!(
            "invalid Newton config {cfg:?}"
        )));
    }
    start.check_mesh(sys.mesh())?;
    let mesh = *sys.mesh();
    let lay = Layout {
        nx: mesh.nx(),
        ny: mesh.ny(),
    };
    let mut u = start.clone();
    for alpha in 0..2 {
        for (i, j) in mesh.boundary_nodes() {
            u.set(alpha, i, j, sys.boundary().get(alpha, i, j));
        }
    }
    let diag_norm = sys.stencil().d.max_abs();
    let target = |u: &GridPair| {
        let floor = 8.0 * f64::EPSILON * diag_norm * u.max_abs() * 4.0;
        cfg.tol.max(floor)
    };
    let mut k = full_residual(sys, p, &u)?;
    let mut norm = k.max_abs();
    let mut steps = 0;
    while norm > target(&u) {
        if steps == cfg.max_newton {
            return Err(Error::NewtonNonConvergence {
                steps,
                residual: norm,
            });
        }
        steps += 1;
        let jac = full_jacobian(sys, p, &u)?;
        let rhs: Vec<f64> = gather(&lay, &k).iter().map(|v| -v).collect();
        let delta = lu_solve(jac, &rhs)?;

        let mut lambda = cfg.damping;
        loop {
            let mut trial = u.clone();
            for alpha in 0..2 {
                for (i, j) in mesh.interior_nodes() {
                    let v = trial.get(alpha, i, j) + lambda * delta[lay.idx(alpha, i, j)];
                    trial.set(alpha, i, j, v);
                }
            }
            let kt = full_residual(sys, p, &trial);
            if let Ok(kt) = kt {
                let nt = kt.max_abs();
                if nt < norm || lambda < 1e-10 {
                    u = trial;
                    k = kt;
                    norm = nt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::NewtonNonConvergence {
                    steps,
                    residual: norm,
                });
            }
        }
    }
    Ok(NewtonResult {
        solution: u,
        steps,
        residual: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{solve_linear, LinearOptions};
    use crate::mesh::Mesh;
    use crate::models::{linear_problem, GasLiquidReaction};
    use crate::problem::{constant_field, CBound, Convection};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    #[test]
    fn lu_solves_small_system() {
        let mut a = DenseMatrix::zeros(3);
        let rows = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a.set(r, c, *v);
            }
        }
        let x = lu_solve(a.clone(), &[5.0, 3.0, 6.0]).unwrap();
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([5.0, 3.0, 6.0]) {
            assert!((b - e).abs() < 1e-14);
        }
    }

    #[test]
    fn lu_detects_singular() {
        let mut a = DenseMatrix::zeros(2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 2.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 4.0);
        assert!(matches!(
            lu_solve(a, &[1.0, 2.0]),
            Err(Error::SingularJacobian { .. })
        ));
    }

    fn linear_setup(n: usize) -> (BlockSystem, ProblemSpec) {
        let mesh = Mesh::new(n, n).unwrap();
        let p = linear_problem(
            [1.0, 0.5],
            [Convection::constant(1.0), Convection::constant(-2.0)],
            [Arc::new(|x, y| x + y * y), Arc::new(|x, y| (x * y).sin())],
        );
        (BlockSystem::new(&mesh, &p).unwrap(), p)
    }

    #[test]
    fn agrees_with_linear_solver() {
        let (sys, p) = linear_setup(9);
        let mesh = *sys.mesh();
        let z = GridPair::zeros(&mesh);
        let w = solve_linear(&sys, &z, &z, LinearOptions::for_system(&sys)).unwrap();
        let s = newton_solve(&sys, &p, &z, NewtonConfig::default()).unwrap();
        assert!(crate::mesh::max_norm_diff(&w, &s.solution).unwrap() < 1e-10);
    }

    #[test]
    fn exact_start_takes_no_steps() {
        let (sys, p) = linear_setup(5);
        let z = GridPair::zeros(sys.mesh());
        let s = newton_solve(&sys, &p, &z, NewtonConfig::default()).unwrap();
        let again = newton_solve(&sys, &p, &s.solution, NewtonConfig::default()).unwrap();
        assert_eq!(again.steps, 0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mesh = Mesh::new(5, 4).unwrap();
        let p = ProblemSpec {
            eps: [1.0, 2.0],
            convection: [Convection::constant(0.5), Convection::zero()],
            reaction: Arc::new(GasLiquidReaction::new(2.0, 1.5, 1.0)),
            cbound: CBound::zero(),
            boundary: [constant_field(0.3), constant_field(0.7)],
        };
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut u = sys.boundary().clone();
        for alpha in 0..2 {
            for (i, j) in mesh.interior_nodes() {
                u.set(alpha, i, j, rng.random_range(0.0..1.0));
            }
        }
        let lay = Layout { nx: 5, ny: 4 };
        let jac = full_jacobian(&sys, &p, &u).unwrap();
        for beta in 0..2 {
            for (i, j) in mesh.interior_nodes() {
                let col = lay.idx(beta, i, j);
                let h = 1e-6;
                let mut up = u.clone();
                let mut dn = u.clone();
                up.set(beta, i, j, u.get(beta, i, j) + h);
                dn.set(beta, i, j, u.get(beta, i, j) - h);
                let kp = full_residual(&sys, &p, &up).unwrap();
                let km = full_residual(&sys, &p, &dn).unwrap();
                for alpha in 0..2 {
                    for (a, b) in mesh.interior_nodes() {
                        let fd = (kp.get(alpha, a, b) - km.get(alpha, a, b)) / (2.0 * h);
                        let an = jac.get(lay.idx(alpha, a, b), col);
                        assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{fd} vs {an}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_large_mesh() {
        let (sys, p) = linear_setup(18);
        let z = GridPair::zeros(sys.mesh());
        assert!(newton_solve(&sys, &p, &z, NewtonConfig::default()).is_err());
    }
}
