//! Minimum-norm approximate controls and optimal actuator placement for the
//! degenerate parabolic equation
//!
//! ```text
//! y_t - (x^alpha y_x)_x + a(x) y = chi_(tau,T)(t) sqrt(beta(x)) u(x, t)   on (0, 1) x (0, T)
//! ```
//!
//! with `alpha in (0, 2)`, `y(1) = 0`, and at `x = 0` either `y = 0`
//! (`alpha < 1`) or zero weighted flux (`alpha >= 1`).
//!
//! * [`grid`], [`operator`], [`solver`]: finite-volume space discretisation,
//!   implicit-Euler forward and adjoint solvers.
//! * [`dual`]: the minimum-norm control for fixed `(y0, beta)` through its
//!   convex dual functional.
//! * [`density`], [`game`]: actuator densities, the placement game between a
//!   density and the adjoint terminal data, its double-oracle solution and
//!   level-set rounding.
//! * [`oracle`]: direct brute-force reference solvers used to cross-check the
//!   above.

// `!(x > 0.0)` guards reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod dual;
pub mod error;
pub mod game;
pub mod grid;
pub mod model;
pub mod operator;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod solver;

pub use density::ActuatorDensity;
pub use error::{Error, Result};
pub use grid::{CoefficientSpec, Field, SpatialGrid, TimeGrid};
pub use model::Model;
pub use operator::DiscreteOperator;
pub use solver::{ControlSignal, Propagator, Trajectory};
