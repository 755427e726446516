//! Block monotone iterations for coupled nonlinear elliptic
//! convection-diffusion systems on the unit square.
//!
//! A two-component system `-eps_a lap u_a + v_a . grad u_a + f_a(x, y, u) = 0`
//! with Dirichlet data is discretized by an upwinded five-point scheme. The
//! maximal and minimal discrete solutions are computed by monotone block
//! Jacobi or block Gauss-Seidel line iterations started from an ordered pair
//! of upper and lower solutions.
//!
//! ```
//! use blockmono::init::{gas_liquid_initials, GasLiquidParams};
//! use blockmono::monotone::{run_monotone, Method, SolverConfig};
//! use blockmono::problem::{constant_field, Convection};
//! use blockmono::Mesh;
//!
//! let gp = GasLiquidParams {
//!     sigma1: 1.0,
//!     k1: 1.0,
//!     rho1: 1.0,
//!     eps: [1.0, 1.0],
//!     convection: [Convection::zero(), Convection::zero()],
//!     g1star: constant_field(0.0),
//!     g2: constant_field(1.0),
//! };
//! let mesh = Mesh::new(9, 9).unwrap();
//! let init = gas_liquid_initials(&gp, &mesh).unwrap();
//! let cfg = SolverConfig::with_method(Method::GsLeft);
//! let run = run_monotone(&init.system, &init.problem, &cfg, &init.lower, &init.upper).unwrap();
//! assert!(run.solution.converged);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod discretization;
pub mod error;
pub mod init;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod monotone;
pub mod oracle;
pub mod problem;

pub use discretization::BlockSystem;
pub use error::{Error, Result};
pub use mesh::{GridPair, Mesh};
pub use monotone::{Method, SolverConfig};
pub use problem::ProblemSpec;
