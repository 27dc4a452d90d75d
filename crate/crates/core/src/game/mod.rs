//! The worst-initial-state placement game.
//!
//! For a density `beta` and adjoint terminal data `eta` the payoff is
//!
//! ```text
//! J(beta, eta) = 1/2 <beta, G(eta)>_{Omega_1} - ||phi(0; eta)|| - <y_d, eta> + eps0 ||eta||,
//! ```
//!
//! the dual functional with the initial state replaced by its worst case over
//! the unit ball. `Phi(beta) = inf_{||eta|| <= delta0} J(beta, eta)` is concave
//! (J is affine in `beta`), and the placement problem is `sup_beta Phi(beta)`.
//!
//! [`GameInstance`] caches the two linear maps the payoff needs as dense
//! matrices assembled from the time-stepping solver itself: the terminal
//! observation `P eta = phi(0; eta)` and, per `Omega_1` cell, the quadratic form
//! `eta -> G(eta)_i`.

mod double_oracle;
mod inner;
mod matrix_game;
mod mixture;
mod observability;
mod outer;

pub use double_oracle::{double_oracle, DoubleOracleOptions, GameResult, RoundRecord};
pub use inner::{inner_inf, InnerOptions, InnerResult};
pub use matrix_game::{restricted_game_value, MatrixGameOptions, MatrixGameSolution};
pub use mixture::{best_response_beta, mixture_h_field, DiracMixture};
pub use observability::{
    compute_delta0, estimate_c_lambda, find_yhat0, measure_bound, observability_ratio,
    sample_density, sample_direction, BallSpec, CLambdaEstimate,
};
pub use outer::{outer_sup, OuterOptions, OuterResult};

use nalgebra::{DMatrix, DVector};

use crate::density::ActuatorDensity;
use crate::dual::compute_g;
use crate::error::{Error, Result};
use crate::grid::{Field, SpatialGrid};
use crate::model::Model;
use crate::par;

/// Payoff data for one `(model, y_d, eps0, lambda)`.
#[derive(Debug, Clone)]
pub struct GameInstance<'a> {
    model: &'a Model,
    y_d: Field,
    eps0: f64,
    lambda: f64,
    /// `P`, with `P eta = phi(0; eta)`
    observation: DMatrix<f64>,
    /// `G(eta)_i = eta^T cell_forms[i] eta` for the `Omega_1` cells
    cell_forms: Vec<DMatrix<f64>>,
}

impl<'a> GameInstance<'a> {
    pub fn new(model: &'a Model, y_d: Field, eps0: f64, lambda: f64) -> Result<Self> {
        if !(eps0 > 0.0) {
            return Err(Error::NonPositiveEps(eps0));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::LambdaOutOfRange(lambda));
        }
        let n = model.grid.n();
        if y_d.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: y_d.len(),
            });
        }
        if !y_d.is_finite() {
            return Err(Error::NonFinite("target state"));
        }
        let columns = par::map_range(n, |j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            model.prop.free_terminal(&e).into_inner()
        });
        let observation = DMatrix::from_fn(n, n, |i, j| columns[j][i]);

        let tg = &model.tg;
        let steps = tg.n_steps();
        let window = tg.window();
        let dt = tg.dt();
        let cells: Vec<usize> = model.grid.omega1().collect();
        let cell_forms = par::map(&cells, |&i| {
            // phi^k_i = (R^{N-k} eta)_i = <R^{N-k} e_i, eta> since R is symmetric
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let traj = model.prop.solve_forward(&e, None);
            let rows = DMatrix::from_fn(n, window.len(), |r, c| {
                traj.at(steps - (window.start + c))[r]
            });
            (&rows * rows.transpose()) * dt
        });
        Ok(Self {
            model,
            y_d,
            eps0,
            lambda,
            observation,
            cell_forms,
        })
    }

    pub fn model(&self) -> &'a Model {
        self.model
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.model.grid
    }

    pub fn y_d(&self) -> &Field {
        &self.y_d
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Target mass `lambda |Omega_1|`.
    pub fn mass(&self) -> f64 {
        self.lambda * self.model.grid.omega1_measure()
    }

    pub fn observation_matrix(&self) -> &DMatrix<f64> {
        &self.observation
    }

    /// `phi(0; eta)`.
    pub fn observe(&self, eta: &[f64]) -> Field {
        let v = &self.observation * DVector::from_column_slice(eta);
        Field(v.as_slice().to_vec())
    }

    /// `G(eta)` on the `Omega_1` cells.
    pub fn g_omega1(&self, eta: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(eta);
        self.cell_forms
            .iter()
            .map(|f| v.dot(&(f * &v)).max(0.0))
            .collect()
    }

    /// Matrix of `Lambda_beta` in cell values: `Sum_i beta_i cell_form_i`.
    pub fn gramian_matrix(&self, beta: &[f64]) -> DMatrix<f64> {
        let n = self.model.grid.n();
        let mut out = DMatrix::zeros(n, n);
        for (b, f) in beta.iter().zip(&self.cell_forms) {
            if *b != 0.0 {
                out += f * *b;
            }
        }
        out
    }

    /// The `beta`-independent part `-||P eta|| - <y_d, eta> + eps0 ||eta||`.
    pub fn offset_value(&self, eta: &[f64]) -> f64 {
        let g = &self.model.grid;
        -g.norm(&self.observe(eta)) - g.inner(&self.y_d, eta) + self.eps0 * g.norm(eta)
    }

    /// `J(beta, eta)` from a precomputed `G(eta)|_{Omega_1}`.
    pub fn value_from_parts(&self, beta: &[f64], g_omega1: &[f64], offset: f64) -> f64 {
        0.5 * self.model.grid.inner_omega1(beta, g_omega1) + offset
    }

    /// `J(beta, eta)`.
    pub fn value(&self, beta: &ActuatorDensity, eta: &[f64]) -> f64 {
        self.value_from_parts(beta.values(), &self.g_omega1(eta), self.offset_value(eta))
    }

    /// `J(beta, eta)` recomputed by time stepping, without the cached matrices.
    pub fn value_direct(&self, beta: &ActuatorDensity, eta: &[f64]) -> f64 {
        let g = &self.model.grid;
        let full = compute_g(self.model, eta);
        let phi0 = self.model.prop.solve_adjoint(eta);
        0.5 * g.inner_omega1(beta.values(), &full[g.omega1()])
            - g.norm(phi0.first())
            - g.inner(&self.y_d, eta)
            + self.eps0 * g.norm(eta)
    }

    /// Gradient of `J(beta, .)` with `||v||` replaced by `sqrt(||v||^2 + sigma^2)`
    /// in the two norm terms.
    pub fn gradient(&self, beta: &ActuatorDensity, eta: &[f64], sigma: f64) -> Field {
        let g = &self.model.grid;
        let v = DVector::from_column_slice(eta);
        let mut out = self.gramian_matrix(beta.values()) * &v;
        let pv = &self.observation * &v;
        let p_norm = (g.dx() * pv.norm_squared() + sigma * sigma).sqrt();
        if p_norm > 0.0 {
            out -= self.observation.transpose() * pv / p_norm;
        }
        let e_norm = (g.norm(eta).powi(2) + sigma * sigma).sqrt();
        for i in 0..eta.len() {
            out[i] -= self.y_d[i];
            if e_norm > 0.0 {
                out[i] += self.eps0 * eta[i] / e_norm;
            }
        }
        Field(out.as_slice().to_vec())
    }

    /// `sup_beta` of the affine map `beta -> 1/2 <beta, h>_{Omega_1}` by the bathtub rule.
    pub fn bathtub(&self, h: &[f64]) -> Result<(ActuatorDensity, f64)> {
        let grid = &self.model.grid;
        let (values, c) = crate::density::bathtub(h, grid.omega1_widths(), self.mass());
        Ok((ActuatorDensity::new(grid, values, self.lambda)?, c))
    }
}
