//! Upwinded five-point scheme, its block-tridiagonal form, residuals and
//! upper/lower solution checks.
//!
//! At an interior node the scheme reads
//!
//! ```text
//! d U_ij - l U_{i-1,j} - r U_{i+1,j} - b U_{i,j-1} - t U_{i,j+1} = -f(U_ij) + G*_ij
//! ```
//!
//! and per interior column `i` it becomes
//! `A_i U_i - L_i U_{i-1} - R_i U_{i+1} = -F_i(U_i) + G*_i`, where every
//! coefficient that touches a boundary node is folded into `G*`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, NodeRef, Result};
use crate::linalg::Tridiagonal;
use crate::mesh::{GridPair, Mesh};
use crate::problem::{ProblemSpec, ScalarField};

/// Five-point coefficients at every interior node (zero on the boundary).
#[derive(Debug, Clone)]
pub struct StencilCoefficients {
    pub l: GridPair,
    pub r: GridPair,
    pub b: GridPair,
    pub t: GridPair,
    pub d: GridPair,
}

/// Upwinded coefficients: backward differences where `v >= 0`, forward where `v < 0`.
pub fn assemble_stencil(mesh: &Mesh, p: &ProblemSpec) -> Result<StencilCoefficients> {
    let mut l = GridPair::zeros(mesh);
    let mut r = GridPair::zeros(mesh);
    let mut b = GridPair::zeros(mesh);
    let mut t = GridPair::zeros(mesh);
    let mut d = GridPair::zeros(mesh);
    let (hx, hy) = (mesh.hx(), mesh.hy());
    for alpha in 0..2 {
        let eps = p.eps[alpha];
        let dx = eps / (hx * hx);
        let dy = eps / (hy * hy);
        for (i, j) in mesh.interior_nodes() {
            let v = p.convection[alpha].eval(mesh.x(i), mesh.y(j));
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    what: "v",
                    node: NodeRef {
                        component: alpha + 1,
                        i,
                        j,
                    },
                    value: v,
                });
            }
            let (cl, cr, cb, ct) = if v >= 0.0 {
                (dx + v / hx, dx, dy + v / hy, dy)
            } else {
                let w = -v;
                (dx, dx + w / hx, dy, dy + w / hy)
            };
            l.set(alpha, i, j, cl);
            r.set(alpha, i, j, cr);
            b.set(alpha, i, j, cb);
            t.set(alpha, i, j, ct);
            d.set(alpha, i, j, cl + cr + cb + ct);
        }
    }
    Ok(StencilCoefficients { l, r, b, t, d })
}

/// One line block: `A_i`, the couplings `L_i`, `R_i` and the boundary load `G*_i`.
#[derive(Debug, Clone)]
pub struct ColumnBlock {
    pub a: Tridiagonal,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub gstar: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    mesh: Mesh,
    stencil: StencilCoefficients,
    boundary: GridPair,
    // columns[alpha][i - 1] for i = 1..nx
    columns: [Vec<ColumnBlock>; 2],
    gstar_norm: f64,
}

/// Builds the block form from assembled coefficients and boundary data `g`.
pub fn assemble_block_system(
    mesh: &Mesh,
    coeffs: &StencilCoefficients,
    g: &[ScalarField; 2],
) -> BlockSystem {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let mut boundary = GridPair::zeros(mesh);
    for alpha in 0..2 {
        for (i, j) in mesh.boundary_nodes() {
            boundary.set(alpha, i, j, g[alpha](mesh.x(i), mesh.y(j)));
        }
    }
    let n = ny - 1;
    let mut gstar_norm = 0.0_f64;
    let columns = [0, 1].map(|alpha| {
        (1..nx)
            .map(|i| {
                let mut sub = vec![0.0; n];
                let mut diag = vec![0.0; n];
                let mut sup = vec![0.0; n];
                let mut left = vec![0.0; n];
                let mut right = vec![0.0; n];
                let mut gstar = vec![0.0; n];
                for j in 1..ny {
                    let k = j - 1;
                    let (cl, cr) = (coeffs.l.get(alpha, i, j), coeffs.r.get(alpha, i, j));
                    let (cb, ct) = (coeffs.b.get(alpha, i, j), coeffs.t.get(alpha, i, j));
                    diag[k] = coeffs.d.get(alpha, i, j);
                    left[k] = cl;
                    right[k] = cr;
                    let mut load = 0.0;
                    if j > 1 {
                        sub[k] = -cb;
                    } else {
                        load += cb * boundary.get(alpha, i, 0);
                    }
                    if j < ny - 1 {
                        sup[k] = -ct;
                    } else {
                        load += ct * boundary.get(alpha, i, ny);
                    }
                    if i == 1 {
                        load += cl * boundary.get(alpha, 0, j);
                    }
                    if i == nx - 1 {
                        load += cr * boundary.get(alpha, nx, j);
                    }
                    gstar[k] = load;
                    gstar_norm = gstar_norm.max(load.abs());
                }
                ColumnBlock {
                    a: Tridiagonal::new(sub, diag, sup),
                    left,
                    right,
                    gstar,
                }
            })
            .collect::<Vec<_>>()
    });
    BlockSystem {
        mesh: *mesh,
        stencil: coeffs.clone(),
        boundary,
        columns,
        gstar_norm,
    }
}

impl BlockSystem {
    /// Assembles the stencil for `p` and its block form in one go.
    pub fn new(mesh: &Mesh, p: &ProblemSpec) -> Result<Self> {
        let coeffs = assemble_stencil(mesh, p)?;
        Ok(assemble_block_system(mesh, &coeffs, &p.boundary))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn stencil(&self) -> &StencilCoefficients {
        &self.stencil
    }

    /// Boundary data `g` on boundary nodes, zero at interior nodes.
    pub fn boundary(&self) -> &GridPair {
        &self.boundary
    }

    /// Block of interior column `i` (1 <= i <= nx - 1).
    pub fn column(&self, alpha: usize, i: usize) -> &ColumnBlock {
        &self.columns[alpha][i - 1]
    }

    /// `||G*||_inf` over both components and all columns.
    pub fn gstar_norm(&self) -> f64 {
        self.gstar_norm
    }

    /// Default slack for residual sign checks: `1e-10 (1 + ||G*||)`.
    pub fn default_residual_slack(&self) -> f64 {
        1e-10 * (1.0 + self.gstar_norm)
    }

    /// `K_i(U)` for both components of interior column `i`.
    ///
    /// Neighbour columns enter only when they are interior; boundary values of
    /// `u` are never read because `G*` carries `g` instead.
    pub fn column_residuals(
        &self,
        p: &ProblemSpec,
        u: &GridPair,
        i: usize,
    ) -> Result<[Vec<f64>; 2]> {
        let mesh = &self.mesh;
        let (nx, ny) = (mesh.nx(), mesh.ny());
        let x = mesh.x(i);
        let mut out = [vec![0.0; ny - 1], vec![0.0; ny - 1]];
        for j in 1..ny {
            let f = p.reaction_at(x, mesh.y(j), u.node(i, j));
            for alpha in 0..2 {
                if !f[alpha].is_finite() {
                    return Err(Error::Evaluation {
                        what: "f",
                        node: NodeRef {
                            component: alpha + 1,
                            i,
                            j,
                        },
                        value: f[alpha],
                    });
                }
                out[alpha][j - 1] = f[alpha];
            }
        }
        for (alpha, k_out) in out.iter_mut().enumerate() {
            let block = self.column(alpha, i);
            let own = u.interior_column(alpha, i);
            block.a.apply_add(own, k_out);
            if i > 1 {
                let prev = u.interior_column(alpha, i - 1);
                for (k, v) in k_out.iter_mut().enumerate() {
                    *v -= block.left[k] * prev[k];
                }
            }
            if i < nx - 1 {
                let next = u.interior_column(alpha, i + 1);
                for (k, v) in k_out.iter_mut().enumerate() {
                    *v -= block.right[k] * next[k];
                }
            }
            for (v, g) in k_out.iter_mut().zip(&block.gstar) {
                *v -= g;
            }
        }
        Ok(out)
    }
}

/// Residual `K(U)` of the block equations at every interior node; zero on
/// the boundary.
pub fn residual(sys: &BlockSystem, p: &ProblemSpec, u: &GridPair) -> Result<GridPair> {
    u.check_mesh(&sys.mesh)?;
    let nx = sys.mesh.nx();
    let cols: Vec<[Vec<f64>; 2]> = (1..nx)
        .into_par_iter()
        .map(|i| sys.column_residuals(p, u, i))
        .collect::<Result<_>>()?;
    let mut out = GridPair::zeros(&sys.mesh);
    for (i, col) in (1..nx).zip(cols) {
        for (alpha, k) in col.iter().enumerate() {
            out.interior_column_mut(alpha, i).copy_from_slice(k);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeValue {
    pub node: NodeRef,
    pub value: f64,
}

/// Outcome of [`verify_ordered_pair`]; empty lists mean the check passed.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PairReport {
    /// Nodes where `lower > upper + slack`.
    pub ordering: Vec<NodeValue>,
    /// Interior nodes where `K(upper) < -slack`.
    pub upper_residual: Vec<NodeValue>,
    /// Interior nodes where `K(lower) > slack`.
    pub lower_residual: Vec<NodeValue>,
    /// Boundary nodes where `lower <= g <= upper` fails by more than `slack`.
    pub boundary: Vec<NodeValue>,
}

impl PairReport {
    pub fn passed(&self) -> bool {
        self.ordering.is_empty()
            && self.upper_residual.is_empty()
            && self.lower_residual.is_empty()
            && self.boundary.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.ordering.len()
            + self.upper_residual.len()
            + self.lower_residual.len()
            + self.boundary.len()
    }

    pub fn nodes(&self) -> Vec<NodeRef> {
        self.ordering
            .iter()
            .chain(&self.upper_residual)
            .chain(&self.lower_residual)
            .chain(&self.boundary)
            .map(|nv| nv.node)
            .collect()
    }
}

/// Checks that `(lower, upper)` are ordered lower and upper solutions.
pub fn verify_ordered_pair(
    sys: &BlockSystem,
    p: &ProblemSpec,
    lower: &GridPair,
    upper: &GridPair,
    slack: f64,
) -> Result<PairReport> {
    lower.check_mesh(&sys.mesh)?;
    upper.check_mesh(&sys.mesh)?;
    let mesh = sys.mesh;
    let mut report = PairReport::default();
    for alpha in 0..2 {
        for (i, j) in mesh.nodes() {
            let (lo, hi) = (lower.get(alpha, i, j), upper.get(alpha, i, j));
            if !(lo <= hi + slack) {
                report.ordering.push(NodeValue {
                    node: NodeRef {
                        component: alpha + 1,
                        i,
                        j,
                    },
                    value: lo - hi,
                });
            }
        }
        for (i, j) in mesh.boundary_nodes() {
            let g = sys.boundary.get(alpha, i, j);
            let (lo, hi) = (lower.get(alpha, i, j), upper.get(alpha, i, j));
            if !(lo <= g + slack && g <= hi + slack) {
                report.boundary.push(NodeValue {
                    node: NodeRef {
                        component: alpha + 1,
                        i,
                        j,
                    },
                    value: g,
                });
            }
        }
    }
    let ku = residual(sys, p, upper)?;
    let kl = residual(sys, p, lower)?;
    for alpha in 0..2 {
        for (i, j) in mesh.interior_nodes() {
            let node = NodeRef {
                component: alpha + 1,
                i,
                j,
            };
            let vu = ku.get(alpha, i, j);
            if !(vu >= -slack) {
                report.upper_residual.push(NodeValue { node, value: vu });
            }
            let vl = kl.get(alpha, i, j);
            if !(vl <= slack) {
                report.lower_residual.push(NodeValue { node, value: vl });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::models::{linear_problem, GasLiquidReaction};
    use crate::problem::{constant_field, CBound, Convection};

    fn linear(v: f64, g: f64) -> ProblemSpec {
        linear_problem(
            [1.0, 1.0],
            [Convection::constant(v), Convection::constant(v)],
            [constant_field(g), constant_field(g)],
        )
    }

    #[test]
    fn stencil_examples_quarter_mesh() {
        let mesh = Mesh::new(4, 4).unwrap();
        for (v, expect) in [
            (1.0, [20.0, 16.0, 20.0, 16.0, 72.0]),
            (0.0, [16.0, 16.0, 16.0, 16.0, 64.0]),
            (-1.0, [16.0, 20.0, 16.0, 20.0, 72.0]),
        ] {
            let s = assemble_stencil(&mesh, &linear(v, 0.0)).unwrap();
            for alpha in 0..2 {
                for (i, j) in mesh.interior_nodes() {
                    let got = [
                        s.l.get(alpha, i, j),
                        s.r.get(alpha, i, j),
                        s.b.get(alpha, i, j),
                        s.t.get(alpha, i, j),
                        s.d.get(alpha, i, j),
                    ];
                    assert_eq!(got, expect, "v = {v}");
                }
            }
        }
    }

    #[test]
    fn row_sums_pure_diffusion() {
        let mesh = Mesh::new(4, 4).unwrap();
        let sys = BlockSystem::new(&mesh, &linear(0.0, 0.0)).unwrap();
        for i in 1..4 {
            let a = &sys.column(0, i).a;
            // only row k = 1 (j = 2) has both neighbours inside the column
            let row = a.sub[1] + a.diag[1] + a.sup[1];
            assert_eq!(row, 32.0);
            assert_eq!(a.diag[0] + a.sup[0], 48.0);
        }
    }

    #[test]
    fn single_column_folds_couplings() {
        let mesh = Mesh::new(2, 4).unwrap();
        let p = linear(0.0, 3.0);
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        let col = sys.column(0, 1);
        let (lx, ly) = (4.0, 16.0);
        // G* = (l + r) * 3 plus b or t on the end rows
        assert_eq!(
            col.gstar,
            vec![(2.0 * lx + ly) * 3.0, 2.0 * lx * 3.0, (2.0 * lx + ly) * 3.0]
        );
        // A alone applied to the constant reproduces G*
        let mut out = vec![0.0; 3];
        col.a.apply_add(&[3.0, 3.0, 3.0], &mut out);
        assert_eq!(out, col.gstar);
    }

    #[test]
    fn residual_vanishes_on_constant_solution() {
        let mesh = Mesh::new(5, 4).unwrap();
        let p = linear(0.7, 3.0);
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        let u = GridPair::constant(&mesh, [3.0, 3.0]);
        let k = residual(&sys, &p, &u).unwrap();
        assert!(k.max_abs() <= 1e-12 * sys.gstar_norm());
    }

    #[test]
    fn residual_ignores_boundary_values_of_u() {
        let mesh = Mesh::new(4, 4).unwrap();
        let p = linear(0.0, 1.0);
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        let a = GridPair::constant(&mesh, [1.0, 1.0]);
        let mut b = a.clone();
        for (i, j) in mesh.boundary_nodes() {
            b.set(0, i, j, -7.0);
        }
        assert_eq!(
            residual(&sys, &p, &a).unwrap(),
            residual(&sys, &p, &b).unwrap()
        );
    }

    #[test]
    fn linear_functions_are_consistent() {
        // L(x + y) = v * 2 for constant v >= 0 with backward differences.
        let mesh = Mesh::new(6, 5).unwrap();
        let v = 1.75;
        let p = linear_problem(
            [0.3, 2.0],
            [Convection::constant(v), Convection::constant(v)],
            [Arc::new(|x, y| x + y), Arc::new(|x, y| x + y)],
        );
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        let u = GridPair::from_fn(&mesh, |_, x, y| x + y);
        let k = residual(&sys, &p, &u).unwrap();
        for alpha in 0..2 {
            for (i, j) in mesh.interior_nodes() {
                assert!((k.get(alpha, i, j) - 2.0 * v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn verify_gas_liquid_style_pair() {
        let mesh = Mesh::new(4, 4).unwrap();
        let p = ProblemSpec {
            eps: [1.0, 1.0],
            convection: [Convection::zero(), Convection::zero()],
            reaction: Arc::new(GasLiquidReaction::new(1.0, 1.0, 1.0)),
            cbound: CBound::constant([1.0, 1.0]),
            boundary: [constant_field(0.0), constant_field(1.0)],
        };
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        let lower = GridPair::zeros(&mesh);
        let upper = GridPair::constant(&mesh, [1.0, 1.0]);
        let rep = verify_ordered_pair(&sys, &p, &lower, &upper, 1e-12).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let swapped = verify_ordered_pair(&sys, &p, &upper, &lower, 1e-12).unwrap();
        assert!(!swapped.passed());
        assert!(!swapped.ordering.is_empty());
    }

    #[test]
    fn exact_solution_is_both_upper_and_lower() {
        let mesh = Mesh::new(4, 4).unwrap();
        let p = linear(0.0, 2.0);
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        let u = GridPair::constant(&mesh, [2.0, 2.0]);
        assert!(verify_ordered_pair(&sys, &p, &u, &u, 0.0).unwrap().passed());
    }
}
