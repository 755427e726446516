//! Constructions of ordered initial lower and upper solutions.
//!
//! * [`lower_zero`]: `0` is a lower solution when `f(., 0) <= 0` and `g >= 0`.
//! * [`upper_from_bound`]: solve `L U = M` when `f >= -M` for `u >= 0`.
//! * [`upper_constant`]: a constant `K` with `f(., K) >= 0` and `g <= K`.
//! * [`gas_liquid_initials`]: the `(W_1, 0)` / `(rho_1, W_2)` pair of the
//!   gas-liquid model together with its derivative bounds.

use std::sync::Arc;

use crate::discretization::{residual, BlockSystem};
use crate::error::{Error, NodeRef, Result};
use crate::linalg::{solve_linear, LinearOptions};
use crate::mesh::{GridPair, Mesh};
use crate::models::GasLiquidReaction;
use crate::problem::{CBound, Convection, ProblemSpec, ScalarField};

/// Linear solves inside the constructions always use this tolerance.
pub const INIT_LINEAR_TOL: f64 = 1e-12;

fn linear_options(sys: &BlockSystem) -> LinearOptions {
    LinearOptions {
        tol: INIT_LINEAR_TOL,
        ..LinearOptions::for_system(sys)
    }
}

fn precondition(reason: impl Into<String>, nodes: Vec<NodeRef>) -> Result<()> {
    if nodes.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition {
            reason: reason.into(),
            nodes,
        })
    }
}

/// Boundary nodes where `pred(alpha, g_alpha)` fails.
fn boundary_offenders(sys: &BlockSystem, mut pred: impl FnMut(usize, f64) -> bool) -> Vec<NodeRef> {
    let mesh = sys.mesh();
    let mut out = Vec::new();
    for alpha in 0..2 {
        for (i, j) in mesh.boundary_nodes() {
            if !pred(alpha, sys.boundary().get(alpha, i, j)) {
                out.push(NodeRef {
                    component: alpha + 1,
                    i,
                    j,
                });
            }
        }
    }
    out
}

/// Nodes where `pred(alpha, f_alpha(x, y, u))` fails.
fn reaction_offenders(
    p: &ProblemSpec,
    mesh: &Mesh,
    u: [f64; 2],
    mut pred: impl FnMut(usize, f64) -> bool,
) -> Vec<NodeRef> {
    let mut out = Vec::new();
    for (i, j) in mesh.nodes() {
        let f = p.reaction_at(mesh.x(i), mesh.y(j), u);
        for alpha in 0..2 {
            if !pred(alpha, f[alpha]) {
                out.push(NodeRef {
                    component: alpha + 1,
                    i,
                    j,
                });
            }
        }
    }
    out
}

fn interior_sign_offenders(k: &GridPair, mut ok: impl FnMut(f64) -> bool) -> Vec<NodeRef> {
    let mesh = *k.mesh();
    let mut out = Vec::new();
    for alpha in 0..2 {
        for (i, j) in mesh.interior_nodes() {
            if !ok(k.get(alpha, i, j)) {
                out.push(NodeRef {
                    component: alpha + 1,
                    i,
                    j,
                });
            }
        }
    }
    out
}

/// The zero grid, after checking `f(x, y, 0, 0) <= 0` at every node and
/// `g >= 0` on the boundary.
pub fn lower_zero(sys: &BlockSystem, p: &ProblemSpec) -> Result<GridPair> {
    let mesh = *sys.mesh();
    precondition(
        "f(x, y, 0, 0) > 0",
        reaction_offenders(p, &mesh, [0.0, 0.0], |_, f| f <= 0.0),
    )?;
    precondition(
        "g < 0 on the boundary",
        boundary_offenders(sys, |_, g| g >= 0.0),
    )?;
    let zero = GridPair::zeros(&mesh);
    let slack = sys.default_residual_slack();
    let k = residual(sys, p, &zero)?;
    precondition(
        "zero grid is not a lower solution",
        interior_sign_offenders(&k, |v| v <= slack),
    )?;
    Ok(zero)
}

/// Upper solution `U` with `L U = M` and `U = g` on the boundary.
///
/// The premise `f(x, y, u) >= -M` for `u >= 0` cannot be verified in full; it
/// is spot-checked at every interior node on a 5 x 5 lattice of `u` values
/// spanning `[0, max U_1] x [0, max U_2]`.
pub fn upper_from_bound(sys: &BlockSystem, p: &ProblemSpec, m: [f64; 2]) -> Result<GridPair> {
    if !m.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::InvalidProblem(format!(
            "bound M = {m:?} must be nonnegative"
        )));
    }
    let mesh = *sys.mesh();
    let zero = GridPair::zeros(&mesh);
    let phi = GridPair::constant(&mesh, m);
    let upper = solve_linear(sys, &zero, &phi, linear_options(sys))?;

    let umax = [upper.max_abs_component(0), upper.max_abs_component(1)];
    const LATTICE: usize = 5;
    let mut offenders = Vec::new();
    for (i, j) in mesh.interior_nodes() {
        let (x, y) = (mesh.x(i), mesh.y(j));
        let mut bad = [false; 2];
        for a in 0..LATTICE {
            for b in 0..LATTICE {
                let u = [
                    umax[0] * a as f64 / (LATTICE - 1) as f64,
                    umax[1] * b as f64 / (LATTICE - 1) as f64,
                ];
                let f = p.reaction_at(x, y, u);
                for alpha in 0..2 {
                    bad[alpha] |= !(f[alpha] >= -m[alpha]);
                }
            }
        }
        for alpha in 0..2 {
            if bad[alpha] {
                offenders.push(NodeRef {
                    component: alpha + 1,
                    i,
                    j,
                });
            }
        }
    }
    precondition("f(x, y, u) < -M at a sampled u >= 0", offenders)?;

    let slack = sys.default_residual_slack();
    let mut negative = Vec::new();
    for alpha in 0..2 {
        for (i, j) in mesh.nodes() {
            if upper.get(alpha, i, j) < -slack {
                negative.push(NodeRef {
                    component: alpha + 1,
                    i,
                    j,
                });
            }
        }
    }
    precondition("bounded upper solution is negative", negative)?;
    let k = residual(sys, p, &upper)?;
    precondition(
        "bounded construction is not an upper solution",
        interior_sign_offenders(&k, |v| v >= -slack),
    )?;
    Ok(upper)
}

/// The constant grid `K`, after checking `f(x, y, K) >= 0` at every node and
/// `g <= K` on the boundary.
pub fn upper_constant(sys: &BlockSystem, p: &ProblemSpec, k: [f64; 2]) -> Result<GridPair> {
    if !k.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidProblem(format!("K = {k:?} must be finite")));
    }
    let mesh = *sys.mesh();
    precondition(
        "f(x, y, K) < 0",
        reaction_offenders(p, &mesh, k, |_, f| f >= 0.0),
    )?;
    precondition(
        "g > K on the boundary",
        boundary_offenders(sys, |alpha, g| g <= k[alpha]),
    )?;
    Ok(GridPair::constant(&mesh, k))
}

/// Parameters of the gas-liquid interaction model.
#[derive(Clone)]
pub struct GasLiquidParams {
    pub sigma1: f64,
    /// `sigma_2 = k_1 sigma_1`.
    pub k1: f64,
    pub rho1: f64,
    pub eps: [f64; 2],
    pub convection: [Convection; 2],
    /// Boundary data of `u_1 = rho_1 - z_1`.
    pub g1star: ScalarField,
    pub g2: ScalarField,
}

impl std::fmt::Debug for GasLiquidParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GasLiquidParams")
            .field("sigma1", &self.sigma1)
            .field("k1", &self.k1)
            .field("rho1", &self.rho1)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl GasLiquidParams {
    pub fn reaction(&self) -> GasLiquidReaction {
        GasLiquidReaction::new(self.sigma1, self.k1, self.rho1)
    }

    pub fn sigma2(&self) -> f64 {
        self.k1 * self.sigma1
    }

    /// The problem with the given derivative bounds.
    pub fn problem(&self, cbound: CBound) -> ProblemSpec {
        ProblemSpec {
            eps: self.eps,
            convection: self.convection.clone(),
            reaction: Arc::new(self.reaction()),
            cbound,
            boundary: [self.g1star.clone(), self.g2.clone()],
        }
    }

    /// Positive rate constants and shift, `0 <= g_1* <= rho_1` and `g_2 >= 0`
    /// at the boundary nodes of `mesh`.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        for (name, v) in [
            ("sigma1", self.sigma1),
            ("k1", self.k1),
            ("rho1", self.rho1),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        let mut bad = Vec::new();
        for (i, j) in mesh.boundary_nodes() {
            let (x, y) = (mesh.x(i), mesh.y(j));
            let g1 = (self.g1star)(x, y);
            if !(g1 >= 0.0 && g1 <= self.rho1) {
                bad.push(NodeRef { component: 1, i, j });
            }
            if !((self.g2)(x, y) >= 0.0) {
                bad.push(NodeRef { component: 2, i, j });
            }
        }
        precondition("gas-liquid boundary data outside [0, rho1] x [0, inf)", bad)
    }
}

/// A problem together with an ordered initial pair for it.
#[derive(Debug, Clone)]
pub struct InitialPair {
    pub problem: ProblemSpec,
    pub system: BlockSystem,
    pub lower: GridPair,
    pub upper: GridPair,
}

/// Solves `L W = 0` with boundary `(g_1*, g_2)` and returns lower `(W_1, 0)`,
/// upper `(rho_1, W_2)` and the bounds `c_1 = sigma_1 W_2`, `c_2 = sigma_2 rho_1`
/// stored as a grid in the returned problem.
pub fn gas_liquid_initials(gp: &GasLiquidParams, mesh: &Mesh) -> Result<InitialPair> {
    gp.validate(mesh)?;
    let linear = gp.problem(CBound::zero());
    let system = BlockSystem::new(mesh, &linear)?;
    let zero = GridPair::zeros(mesh);
    let w = solve_linear(&system, &zero, &zero, linear_options(&system))?;

    let slack = system.default_residual_slack();
    let mut bad = Vec::new();
    for (i, j) in mesh.nodes() {
        if w.get(0, i, j) > gp.rho1 + slack {
            bad.push(NodeRef { component: 1, i, j });
        }
        if w.get(1, i, j) < -slack {
            bad.push(NodeRef { component: 2, i, j });
        }
    }
    precondition("linear solutions violate rho1 >= W1, W2 >= 0", bad)?;

    let mut lower = w.clone();
    let mut upper = w.clone();
    let mut c = GridPair::zeros(mesh);
    let sigma2 = gp.sigma2();
    for (i, j) in mesh.nodes() {
        lower.set(1, i, j, 0.0);
        upper.set(0, i, j, gp.rho1);
        c.set(0, i, j, gp.sigma1 * w.get(1, i, j).max(0.0));
        c.set(1, i, j, sigma2 * gp.rho1);
    }
    Ok(InitialPair {
        problem: gp.problem(CBound::Grid(c)),
        system,
        lower,
        upper,
    })
}

/// Zero lower solution and the constant upper solution `K = (rho_1, max g_2)`
/// with `c_1 = sigma_1 K_2`, `c_2 = sigma_2 rho_1`.
pub fn gas_liquid_constant_pair(gp: &GasLiquidParams, mesh: &Mesh) -> Result<InitialPair> {
    gp.validate(mesh)?;
    let g2max = mesh
        .boundary_nodes()
        .map(|(i, j)| (gp.g2)(mesh.x(i), mesh.y(j)))
        .fold(0.0_f64, f64::max);
    let k = [gp.rho1, g2max];
    let problem = gp.problem(CBound::constant([gp.sigma1 * k[1], gp.sigma2() * gp.rho1]));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::verify_ordered_pair;
    use crate::models::linear_problem;
    use crate::problem::constant_field;

    fn gas_liquid(g1: ScalarField, g2: ScalarField, rho1: f64) -> GasLiquidParams {
        GasLiquidParams {
            sigma1: 1.0,
            k1: 1.0,
            rho1,
            eps: [1.0, 1.0],
            convection: [Convection::zero(), Convection::zero()],
            g1star: g1,
            g2,
        }
    }

    #[test]
    fn gas_liquid_constant_boundary() {
        let mesh = Mesh::new(6, 6).unwrap();
        let gp = gas_liquid(constant_field(0.0), constant_field(1.0), 1.0);
        let init = gas_liquid_initials(&gp, &mesh).unwrap();
        for (i, j) in mesh.nodes() {
            assert!(init.lower.get(0, i, j).abs() < 1e-12);
            assert_eq!(init.lower.get(1, i, j), 0.0);
            assert_eq!(init.upper.get(0, i, j), 1.0);
            assert!((init.upper.get(1, i, j) - 1.0).abs() < 1e-12);
            assert!((init.problem.cbound_at(&mesh, 0, i, j).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(init.problem.cbound_at(&mesh, 1, i, j).unwrap(), 1.0);
        }
    }

    #[test]
    fn gas_liquid_maximum_principle_bounds() {
        let mesh = Mesh::new(8, 8).unwrap();
        let gp = gas_liquid(Arc::new(|x, y| x * y), Arc::new(|x, _| 1.0 + x), 2.0);
        let init = gas_liquid_initials(&gp, &mesh).unwrap();
        for (i, j) in mesh.nodes() {
            let w1 = init.lower.get(0, i, j);
            let w2 = init.upper.get(1, i, j);
            assert!((-1e-12..=1.0 + 1e-12).contains(&w1));
            assert!((1.0 - 1e-12..=2.0 + 1e-12).contains(&w2));
        }
        let rep = verify_ordered_pair(&init.system, &init.problem, &init.lower, &init.upper, 1e-10)
            .unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn gas_liquid_rejects_small_rho() {
        let mesh = Mesh::new(4, 4).unwrap();
        let gp = gas_liquid(Arc::new(|x, y| 2.0 * x * y), constant_field(1.0), 1.0);
        assert!(matches!(
            gas_liquid_initials(&gp, &mesh),
            Err(Error::Precondition { .. })
        ));
    }

    fn linear(g: [f64; 2]) -> (ProblemSpec, BlockSystem) {
        let mesh = Mesh::new(6, 6).unwrap();
        let p = linear_problem(
            [1.0, 1.0],
            [Convection::zero(), Convection::zero()],
            [constant_field(g[0]), constant_field(g[1])],
        );
        let sys = BlockSystem::new(&mesh, &p).unwrap();
        (p, sys)
    }

    #[test]
    fn lower_zero_accepts_and_rejects() {
        let (p, sys) = linear([0.0, 0.5]);
        assert_eq!(lower_zero(&sys, &p).unwrap().max_abs(), 0.0);

        let mut q = p.clone();
        q.reaction = Arc::new(|_: f64, _: f64, _: [f64; 2]| [1.0, 0.0]);
        let err = lower_zero(&sys, &q).unwrap_err();
        assert!(
            matches!(err, Error::Precondition { ref nodes, .. } if nodes.iter().all(|n| n.component == 1))
        );

        let mut q = p.clone();
        q.boundary[1] = Arc::new(|x, _| if x > 0.5 { -0.1 } else { 0.0 });
        let sys_q = BlockSystem::new(sys.mesh(), &q).unwrap();
        assert!(matches!(
            lower_zero(&sys_q, &q),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn upper_from_bound_examples() {
        let (p, sys) = linear([0.0, 0.0]);
        let u = upper_from_bound(&sys, &p, [0.0, 0.0]).unwrap();
        assert!(u.max_abs() < 1e-14);
        let u = upper_from_bound(&sys, &p, [1.0, 1.0]).unwrap();
        assert!(u.component(0).iter().all(|v| *v >= 0.0));
        assert!(u.max_abs() > 0.0);
        let l = lower_zero(&sys, &p).unwrap();
        assert!(crate::mesh::pointwise_leq(&l, &u, 0.0).unwrap());
    }

    #[test]
    fn upper_from_bound_rejects_unbounded_reaction() {
        let (mut p, _) = linear([0.0, 0.0]);
        p.reaction = Arc::new(|_: f64, _: f64, u: [f64; 2]| [-10.0 * u[0] - 2.0, 0.0]);
        let sys = BlockSystem::new(&Mesh::new(6, 6).unwrap(), &p).unwrap();
        assert!(matches!(
            upper_from_bound(&sys, &p, [1.0, 1.0]),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn upper_constant_examples() {
        let (p, sys) = linear([0.5, 2.0]);
        let u = upper_constant(&sys, &p, [1.0, 2.0]).unwrap();
        assert_eq!(u.get(1, 3, 3), 2.0);
        assert!(upper_constant(&sys, &p, [1.0, 1.5]).is_err());

        let mut q = p.clone();
        q.reaction = Arc::new(|_: f64, _: f64, u: [f64; 2]| [u[0] - 5.0, 0.0]);
        assert!(matches!(
            upper_constant(&sys, &q, [1.0, 2.0]),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn gas_liquid_constant_pair_canonical_k() {
        let mesh = Mesh::new(6, 6).unwrap();
        let gp = gas_liquid(Arc::new(|x, y| x * y), Arc::new(|x, _| 1.0 + x), 2.0);
        let init = gas_liquid_constant_pair(&gp, &mesh).unwrap();
        assert_eq!(init.upper.get(0, 2, 2), 2.0);
        assert_eq!(init.upper.get(1, 2, 2), 2.0);
        let f = gp.reaction().eval_at_k();
        assert_eq!(f, [0.0, 0.0]);
    }

    trait AtK {
        fn eval_at_k(&self) -> [f64; 2];
    }

    impl AtK for GasLiquidReaction {
        fn eval_at_k(&self) -> [f64; 2] {
            use crate::problem::Reaction;
            self.eval(0.0, 0.0, [self.rho1, 2.0])
        }
    }
}
