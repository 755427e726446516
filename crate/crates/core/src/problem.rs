//! Problem definition: diffusion constants, convection fields, the reaction
//! pair with its derivative bounds `c_alpha`, boundary data, and the
//! monotone operator `Gamma(U) = c U - f(U)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, NodeRef, Result};
use crate::mesh::{GridPair, Mesh};

/// Scalar function of position.
pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub fn constant_field(value: f64) -> ScalarField {
    Arc::new(move |_, _| value)
}

/// Step used for central-difference derivative estimates of `f`.
pub fn fd_step(u: f64) -> f64 {
    1e-6 * (1.0 + u.abs())
}

/// Tolerance on sampled derivative conditions.
pub const TOL_DERIV: f64 = 1e-6;

/// Reaction pair `f = (f_1, f_2)` evaluated at a node.
///
/// Implementations must be pure; the engines evaluate columns concurrently.
pub trait Reaction: Send + Sync {
    fn eval(&self, x: f64, y: f64, u: [f64; 2]) -> [f64; 2];

    /// `jac[alpha][beta] = d f_alpha / d u_beta`. Defaults to central differences.
    fn jacobian(&self, x: f64, y: f64, u: [f64; 2]) -> [[f64; 2]; 2] {
        let mut jac = [[0.0; 2]; 2];
        for beta in 0..2 {
            let h = fd_step(u[beta]);
            let mut up = u;
            let mut dn = u;
            up[beta] += h;
            dn[beta] -= h;
            let fp = self.eval(x, y, up);
            let fm = self.eval(x, y, dn);
            for alpha in 0..2 {
                jac[alpha][beta] = (fp[alpha] - fm[alpha]) / (2.0 * h);
            }
        }
        jac
    }
}

impl<F> Reaction for F
where
    F: Fn(f64, f64, [f64; 2]) -> [f64; 2] + Send + Sync,
{
    fn eval(&self, x: f64, y: f64, u: [f64; 2]) -> [f64; 2] {
        self(x, y, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignClass {
    Nonnegative,
    Nonpositive,
    Mixed,
}

impl fmt::Display for SignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SignClass::Nonnegative => "nonnegative",
            SignClass::Nonpositive => "nonpositive",
            SignClass::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// Convection coefficient `v_alpha(x, y)` with its declared sign class.
#[derive(Clone)]
pub struct Convection {
    pub field: ScalarField,
    pub sign: SignClass,
}

impl Convection {
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(v: f64) -> Self {
        let sign = if v >= 0.0 {
            SignClass::Nonnegative
        } else {
            SignClass::Nonpositive
        };
        Convection {
            field: constant_field(v),
            sign,
        }
    }

    pub fn new(field: ScalarField, sign: SignClass) -> Self {
        Convection { field, sign }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.field)(x, y)
    }

    /// True when `v` vanishes at every mesh node.
    pub fn vanishes_on(&self, mesh: &Mesh) -> bool {
        mesh.nodes()
            .all(|(i, j)| self.eval(mesh.x(i), mesh.y(j)) == 0.0)
    }
}

impl fmt::Debug for Convection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Convection")
            .field("sign", &self.sign)
            .finish()
    }
}

/// Upper bounds `c_alpha(x, y) >= d f_alpha / d u_alpha` on the working sector.
#[derive(Clone)]
pub enum CBound {
    Fields([ScalarField; 2]),
    /// Values sampled on a specific mesh; only usable with that mesh.
    Grid(GridPair),
}

impl CBound {
    pub fn constant(c: [f64; 2]) -> Self {
        CBound::Fields([constant_field(c[0]), constant_field(c[1])])
    }

    pub fn zero() -> Self {
        Self::constant([0.0, 0.0])
    }
}

impl fmt::Debug for CBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CBound::Fields(_) => f.write_str("CBound::Fields"),
            CBound::Grid(_) => f.write_str("CBound::Grid"),
        }
    }
}

/// A solvable problem instance.
#[derive(Clone)]
pub struct ProblemSpec {
    pub eps: [f64; 2],
    pub convection: [Convection; 2],
    pub reaction: Arc<dyn Reaction>,
    pub cbound: CBound,
    pub boundary: [ScalarField; 2],
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("eps", &self.eps)
            .field("convection", &self.convection)
            .field("cbound", &self.cbound)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn reaction_at(&self, x: f64, y: f64, u: [f64; 2]) -> [f64; 2] {
        self.reaction.eval(x, y, u)
    }

    /// `c_alpha` at mesh node `(i, j)`, checked finite.
    pub fn cbound_at(&self, mesh: &Mesh, alpha: usize, i: usize, j: usize) -> Result<f64> {
        let value = match &self.cbound {
            CBound::Fields(c) => c[alpha](mesh.x(i), mesh.y(j)),
            CBound::Grid(g) => {
                g.check_mesh(mesh)?;
                g.get(alpha, i, j)
            }
        };
        if !value.is_finite() {
            return Err(Error::Evaluation {
                what: "c",
                node: NodeRef {
                    component: alpha + 1,
                    i,
                    j,
                },
                value,
            });
        }
        Ok(value)
    }

    /// `c_alpha` sampled at every node: the diagonal matrices `C_i` of the engines.
    pub fn cbound_grid(&self, mesh: &Mesh) -> Result<GridPair> {
        let mut c = GridPair::zeros(mesh);
        for alpha in 0..2 {
            for (i, j) in mesh.nodes() {
                c.set(alpha, i, j, self.cbound_at(mesh, alpha, i, j)?);
            }
        }
        Ok(c)
    }

    pub fn boundary_at(&self, alpha: usize, x: f64, y: f64) -> f64 {
        (self.boundary[alpha])(x, y)
    }

    /// Checks `eps > 0`, `c >= 0` at every node and the declared convection
    /// sign classes against the sampled `v`.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        for (alpha, &e) in self.eps.iter().enumerate() {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "eps_{} = {e} must be positive and finite",
                    alpha + 1
                )));
            }
        }
        for alpha in 0..2 {
            let conv = &self.convection[alpha];
            for (i, j) in mesh.nodes() {
                let c = self.cbound_at(mesh, alpha, i, j)?;
                if c < 0.0 {
                    return Err(Error::InvalidProblem(format!(
                        "c_{} = {c} < 0 at node ({i}, {j})",
                        alpha + 1
                    )));
                }
                let v = conv.eval(mesh.x(i), mesh.y(j));
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
                let consistent = match conv.sign {
                    SignClass::Nonnegative => v >= 0.0,
                    SignClass::Nonpositive => v <= 0.0,
                    SignClass::Mixed => true,
                };
                if !consistent {
                    return Err(Error::InvalidProblem(format!(
                        "v_{} = {v} at node ({i}, {j}) contradicts declared sign class {}",
                        alpha + 1,
                        conv.sign
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `Gamma_alpha(U) = c_alpha U_alpha - f_alpha(U)` at every node.
pub fn gamma(p: &ProblemSpec, u: &GridPair) -> Result<GridPair> {
    let mesh = *u.mesh();
    let mut out = GridPair::zeros(&mesh);
    for (i, j) in mesh.nodes() {
        let (x, y) = (mesh.x(i), mesh.y(j));
        let un = u.node(i, j);
        let f = p.reaction_at(x, y, un);
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
            let c = p.cbound_at(&mesh, alpha, i, j)?;
            out.set(alpha, i, j, c * un[alpha] - f[alpha]);
        }
    }
    Ok(out)
}

/// An ordered pair of grids delimiting the sector `<lower, upper>`.
#[derive(Debug, Clone)]
pub struct SectorSample {
    lower: GridPair,
    upper: GridPair,
}

impl SectorSample {
    pub fn new(lower: GridPair, upper: GridPair) -> Result<Self> {
        if let Some((alpha, i, j, excess)) =
            crate::mesh::first_order_violation(&lower, &upper, 0.0)?
        {
            return Err(Error::Precondition {
                reason: format!("sector lower exceeds upper by {excess:e}"),
                nodes: vec![NodeRef {
                    component: alpha + 1,
                    i,
                    j,
                }],
            });
        }
        Ok(SectorSample { lower, upper })
    }

    pub fn lower(&self) -> &GridPair {
        &self.lower
    }

    pub fn upper(&self) -> &GridPair {
        &self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorViolationKind {
    /// `d f_alpha / d u_alpha > c_alpha + tol`.
    CBound,
    /// `-d f_alpha / d u_other < -tol`.
    Quasimonotone,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorViolation {
    pub kind: SectorViolationKind,
    pub node: NodeRef,
    pub u: [f64; 2],
    pub derivative: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SectorReport {
    pub samples: usize,
    pub violations: Vec<SectorViolation>,
}

impl SectorReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `samples_per_node^2` points of the sector at every node and checks
/// the derivative bound and quasimonotonicity with central differences.
pub fn check_sector_conditions(
    p: &ProblemSpec,
    s: &SectorSample,
    samples_per_node: usize,
) -> Result<SectorReport> {
    let k = samples_per_node.max(2);
    let mesh = *s.lower.mesh();
    let mut report = SectorReport::default();
    let lerp = |a: f64, b: f64, t: usize| a + (b - a) * t as f64 / (k - 1) as f64;
    for (i, j) in mesh.nodes() {
        let (x, y) = (mesh.x(i), mesh.y(j));
        let lo = s.lower.node(i, j);
        let hi = s.upper.node(i, j);
        let c = [p.cbound_at(&mesh, 0, i, j)?, p.cbound_at(&mesh, 1, i, j)?];
        for t0 in 0..k {
            for t1 in 0..k {
                let u = [lerp(lo[0], hi[0], t0), lerp(lo[1], hi[1], t1)];
                let jac = central_jacobian(p, x, y, u, (i, j))?;
                report.samples += 1;
                for alpha in 0..2 {
                    let other = 1 - alpha;
                    let node = NodeRef {
                        component: alpha + 1,
                        i,
                        j,
                    };
                    let own = jac[alpha][alpha];
                    if own > c[alpha] + TOL_DERIV {
                        report.violations.push(SectorViolation {
                            kind: SectorViolationKind::CBound,
                            node,
                            u,
                            derivative: own,
                            bound: c[alpha],
                        });
                    }
                    let cross = -jac[alpha][other];
                    if cross < -TOL_DERIV {
                        report.violations.push(SectorViolation {
                            kind: SectorViolationKind::Quasimonotone,
                            node,
                            u,
                            derivative: cross,
                            bound: 0.0,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

fn central_jacobian(
    p: &ProblemSpec,
    x: f64,
    y: f64,
    u: [f64; 2],
    (i, j): (usize, usize),
) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for beta in 0..2 {
        let h = fd_step(u[beta]);
        let mut up = u;
        let mut dn = u;
        up[beta] += h;
        dn[beta] -= h;
        let fp = p.reaction_at(x, y, up);
        let fm = p.reaction_at(x, y, dn);
        for alpha in 0..2 {
            let d = (fp[alpha] - fm[alpha]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::Evaluation {
                    what: "f",
                    node: NodeRef {
                        component: alpha + 1,
                        i,
                        j,
                    },
                    value: d,
                });
            }
            jac[alpha][beta] = d;
        }
    }
    Ok(jac)
}
