//! Tridiagonal direct solves and the line Gauss-Seidel solver for the linear
//! scheme `(L + c*) W = Phi`, `W = g` on the boundary.

use crate::discretization::BlockSystem;
use crate::error::{Error, Result};
use crate::mesh::GridPair;

/// Tridiagonal matrix in three-array form; `sub[0]` and `sup[n - 1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Self {
        assert_eq!(sub.len(), diag.len());
        assert_eq!(sup.len(), diag.len());
        Tridiagonal { sub, diag, sup }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `self + diag(c)`.
    pub fn shifted(&self, c: &[f64]) -> Tridiagonal {
        let mut out = self.clone();
        for (d, c) in out.diag.iter_mut().zip(c) {
            *d += c;
        }
        out
    }

    /// `out += self * x`.
    pub fn apply_add(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for k in 0..n {
            let mut v = self.diag[k] * x[k];
            if k > 0 {
                v += self.sub[k] * x[k - 1];
            }
            if k + 1 < n {
                v += self.sup[k] * x[k + 1];
            }
            out[k] += v;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_add(x, &mut out);
        out
    }

    /// Positive diagonal, nonpositive off-diagonals and strict row dominance.
    pub fn is_strict_m_matrix(&self) -> bool {
        let n = self.len();
        (0..n).all(|k| {
            let lo = if k > 0 { self.sub[k] } else { 0.0 };
            let hi = if k + 1 < n { self.sup[k] } else { 0.0 };
            self.diag[k] > 0.0 && lo <= 0.0 && hi <= 0.0 && self.diag[k] > lo.abs() + hi.abs()
        })
    }
}

/// Thomas algorithm. Fails only on a zero (or non-finite) pivot.
pub fn thomas_solve(m: &Tridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.len();
    assert_eq!(rhs.len(), n, "rhs length must match matrix order");
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = m.diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::ZeroPivot { row: 0 });
    }
    c[0] = if n > 1 { m.sup[0] / pivot } else { 0.0 };
    x[0] = rhs[0] / pivot;
    for k in 1..n {
        pivot = m.diag[k] - m.sub[k] * c[k - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: k });
        }
        if k + 1 < n {
            c[k] = m.sup[k] / pivot;
        }
        x[k] = (rhs[k] - m.sub[k] * x[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        x[k] -= c[k] * x[k + 1];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl LinearOptions {
    /// `tol = 1e-12`, `max_iter = 100 (nx + ny)`.
    pub fn for_system(sys: &BlockSystem) -> Self {
        let mesh = sys.mesh();
        LinearOptions {
            tol: 1e-12,
            max_iter: 100 * (mesh.nx() + mesh.ny()),
        }
    }
}

/// Solves `(A_i + C*_i) W_i - L_i W_{i-1} - R_i W_{i+1} = Phi_i + G*_i` for all
/// interior columns by left-to-right block Gauss-Seidel line sweeps.
///
/// Only the interior values of `cstar` and `phi` are read. The returned grid
/// carries `g` on the boundary. Sweeps stop once the max column residual is
/// below `tol`, or below the roundoff level of the operator when that is
/// larger.
pub fn solve_linear(
    sys: &BlockSystem,
    cstar: &GridPair,
    phi: &GridPair,
    opts: LinearOptions,
) -> Result<GridPair> {
    let mesh = *sys.mesh();
    cstar.check_mesh(&mesh)?;
    phi.check_mesh(&mesh)?;
    let nx = mesh.nx();
    for alpha in 0..2 {
        for (i, j) in mesh.interior_nodes() {
            let c = cstar.get(alpha, i, j);
            if !(c >= 0.0) {
                return Err(Error::InvalidProblem(format!(
                    "c* must be nonnegative, got {c} at ({i}, {j})"
                )));
            }
        }
    }
    let shifted: [Vec<Tridiagonal>; 2] = [0, 1].map(|alpha| {
        (1..nx)
            .map(|i| {
                sys.column(alpha, i)
                    .a
                    .shifted(cstar.interior_column(alpha, i))
            })
            .collect()
    });
    let loads: [Vec<Vec<f64>>; 2] = [0, 1].map(|alpha| {
        (1..nx)
            .map(|i| {
                phi.interior_column(alpha, i)
                    .iter()
                    .zip(&sys.column(alpha, i).gstar)
                    .map(|(p, g)| p + g)
                    .collect()
            })
            .collect()
    });
    let load_norm = loads
        .iter()
        .flatten()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let diag_norm = shifted
        .iter()
        .flatten()
        .flat_map(|m| m.diag.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut w = sys.boundary().clone();
    let mut res = f64::INFINITY;
    for _sweep in 0..opts.max_iter {
        for alpha in 0..2 {
            for i in 1..nx {
                let block = sys.column(alpha, i);
                let mut rhs = loads[alpha][i - 1].clone();
                add_neighbours(&mut rhs, block, &w, alpha, i, nx);
                let sol = thomas_solve(&shifted[alpha][i - 1], &rhs)?;
                w.interior_column_mut(alpha, i).copy_from_slice(&sol);
            }
        }
        res = linear_residual(sys, &shifted, &loads, &w);
        let floor = 8.0 * f64::EPSILON * (diag_norm * w.max_abs() + load_norm);
        if res <= opts.tol.max(floor) {
            return Ok(w);
        }
    }
    Err(Error::LinearNonConvergence {
        iterations: opts.max_iter,
        residual: res,
    })
}

/// `rhs += L_i W_{i-1} + R_i W_{i+1}` over interior neighbours.
fn add_neighbours(
    rhs: &mut [f64],
    block: &crate::discretization::ColumnBlock,
    w: &GridPair,
    alpha: usize,
    i: usize,
    nx: usize,
) {
    if i > 1 {
        for ((r, l), v) in rhs
            .iter_mut()
            .zip(&block.left)
            .zip(w.interior_column(alpha, i - 1))
        {
            *r += l * v;
        }
    }
    if i + 1 < nx {
        for ((r, c), v) in rhs
            .iter_mut()
            .zip(&block.right)
            .zip(w.interior_column(alpha, i + 1))
        {
            *r += c * v;
        }
    }
}

fn linear_residual(
    sys: &BlockSystem,
    shifted: &[Vec<Tridiagonal>; 2],
    loads: &[Vec<Vec<f64>>; 2],
    w: &GridPair,
) -> f64 {
    let nx = sys.mesh().nx();
    let mut res = 0.0_f64;
    for alpha in 0..2 {
        for i in 1..nx {
            let block = sys.column(alpha, i);
            let mut rhs = loads[alpha][i - 1].clone();
            add_neighbours(&mut rhs, block, w, alpha, i, nx);
            let aw = shifted[alpha][i - 1].apply(w.interior_column(alpha, i));
            for (a, r) in aw.iter().zip(&rhs) {
                res = res.max((a - r).abs());
            }
        }
    }
    res
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::Mesh;
    use crate::models::linear_problem;
    use crate::problem::{constant_field, Convection};

    #[test]
    fn thomas_row_sum_example() {
        let m = Tridiagonal::new(vec![-1.0; 3], vec![2.0; 3], vec![-1.0; 3]);
        let x = thomas_solve(&m, &[1.0, 0.0, 1.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn thomas_identity() {
        let m = Tridiagonal::new(vec![0.0; 4], vec![1.0; 4], vec![0.0; 4]);
        let rhs = [3.0, -1.5, 0.25, 8.0];
        assert_eq!(thomas_solve(&m, &rhs).unwrap(), rhs.to_vec());
    }

    #[test]
    fn thomas_single_row_and_empty() {
        let m = Tridiagonal::new(vec![9.0], vec![4.0], vec![9.0]);
        assert_eq!(thomas_solve(&m, &[2.0]).unwrap(), vec![0.5]);
        let e = Tridiagonal::new(vec![], vec![], vec![]);
        assert!(thomas_solve(&e, &[]).unwrap().is_empty());
    }

    #[test]
    fn thomas_zero_pivot() {
        let m = Tridiagonal::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]);
        assert!(matches!(
            thomas_solve(&m, &[1.0, 1.0]),
            Err(Error::ZeroPivot { row: 1 })
        ));
        let m = Tridiagonal::new(vec![0.0], vec![0.0], vec![0.0]);
        assert!(matches!(
            thomas_solve(&m, &[1.0]),
            Err(Error::ZeroPivot { row: 0 })
        ));
    }

    fn system(v: f64, g: crate::problem::ScalarField, n: usize) -> BlockSystem {
        let mesh = Mesh::new(n, n).unwrap();
        let p = linear_problem(
            [1.0, 1.0],
            [Convection::constant(v), Convection::constant(v)],
            [g.clone(), g],
        );
        BlockSystem::new(&mesh, &p).unwrap()
    }

    #[test]
    fn constants_are_reproduced() {
        let sys = system(2.0, constant_field(1.0), 8);
        let mesh = *sys.mesh();
        let z = GridPair::zeros(&mesh);
        let w = solve_linear(&sys, &z, &z, LinearOptions::for_system(&sys)).unwrap();
        for v in w.component(0).iter().chain(w.component(1)) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_boundary_is_harmonic() {
        let sys = system(0.0, Arc::new(|x, _| x), 7);
        let mesh = *sys.mesh();
        let z = GridPair::zeros(&mesh);
        let w = solve_linear(&sys, &z, &z, LinearOptions::for_system(&sys)).unwrap();
        for alpha in 0..2 {
            for (i, j) in mesh.nodes() {
                assert!((w.get(alpha, i, j) - mesh.x(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounded_by_source_over_c() {
        let sys = system(0.5, constant_field(0.0), 9);
        let mesh = *sys.mesh();
        let c = GridPair::constant(&mesh, [1.0, 1.0]);
        let m = 2.5;
        let phi = GridPair::constant(&mesh, [m, m]);
        let w = solve_linear(&sys, &c, &phi, LinearOptions::for_system(&sys)).unwrap();
        for v in w.component(0).iter().chain(w.component(1)) {
            assert!(*v >= 0.0 && *v <= m);
        }
    }

    #[test]
    fn nonconvergence_reports_residual() {
        let sys = system(0.0, constant_field(1.0), 16);
        let mesh = *sys.mesh();
        let z = GridPair::zeros(&mesh);
        let opts = LinearOptions {
            tol: 1e-12,
            max_iter: 2,
        };
        match solve_linear(&sys, &z, &z, opts) {
            Err(Error::LinearNonConvergence {
                iterations: 2,
                residual,
            }) => assert!(residual > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_cstar() {
        let sys = system(0.0, constant_field(1.0), 4);
        let mesh = *sys.mesh();
        let c = GridPair::constant(&mesh, [-1.0, 0.0]);
        let z = GridPair::zeros(&mesh);
        assert!(solve_linear(&sys, &c, &z, LinearOptions::for_system(&sys)).is_err());
    }
}
