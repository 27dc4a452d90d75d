//! Minimum-norm approximate control for a fixed initial state and density.
//!
//! For terminal data `eta` the dual functional is
//!
//! ```text
//! J(eta) = 1/2 <beta, G(eta)> + <y0, phi(0; eta)> - <y_d, eta> + eps0 ||eta||,
//! G(eta)(x) = int_tau^T phi(x, t; eta)^2 dt.
//! ```
//!
//! Its quadratic part is `1/2 <eta, Lambda eta>` with the controllability
//! Gramian `Lambda eta = y(T; 0, beta; sqrt(beta) phi(.; eta))`, and its linear
//! part is `<y(T; y0; 0) - y_d, eta>`. The minimiser `eta*` gives the optimal
//! control `u* = sqrt(beta) phi(.; eta*)` on `(tau, T)` and `min J = -N^2 / 2`.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};
use serde::Serialize;

use crate::density::ActuatorDensity;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::Model;
use crate::solver::ControlSignal;

/// `G(eta)(x_i) = Sum_{k in window} dt phi^k_i^2` on every cell.
pub fn compute_g(model: &Model, eta: &[f64]) -> Field {
    let phi = model.prop.solve_adjoint(eta);
    let dt = model.tg.dt();
    let mut g = vec![0.0; model.grid.n()];
    for k in model.tg.window() {
        for (gi, p) in g.iter_mut().zip(phi.at(k)) {
            *gi += dt * p * p;
        }
    }
    Field(g)
}

/// `Lambda_beta eta`: adjoint solve from `eta`, then a forward solve from zero
/// driven by `beta phi` on the window.
pub fn gramian_apply(model: &Model, beta: &ActuatorDensity, eta: &[f64]) -> Field {
    let phi = model.prop.solve_adjoint(eta);
    let b = beta.full();
    let window = model.tg.window();
    let zero = vec![0.0; model.grid.n()];
    let traj = model.prop.integrate(&zero, |k, buf| {
        if window.contains(&k) {
            for ((s, bi), p) in buf.iter_mut().zip(&b).zip(phi.at(k)) {
                *s = bi * p;
            }
            true
        } else {
            false
        }
    });
    Field(traj.last().to_vec())
}

/// `u*(x, t_k) = sqrt(beta(x)) phi(x, t_k; eta)` on the window steps.
pub fn extract_control(model: &Model, beta: &ActuatorDensity, eta: &[f64]) -> ControlSignal {
    let phi = model.prop.solve_adjoint(eta);
    let sb = beta.full_sqrt();
    ControlSignal::from_fn(&model.grid, &model.tg, |k, i| sb[i] * phi.at(k)[i])
}

/// Outcome of [`DualProblem::minimize`].
#[derive(Debug, Clone, Serialize)]
pub struct DualSolveReport {
    pub eta_star: Field,
    /// `V = min J`.
    pub value: f64,
    /// Minimum control norm `N = ||u*||`.
    pub min_norm: f64,
    /// `|N^2 + 2V|`.
    pub duality_residual: f64,
    /// Norm of the Euler-Lagrange defect; `0` when `eta* = 0` is certified.
    pub el_residual: f64,
    /// `||y(T; y0, beta; u*) - y_d||` from a forward solve with `u*`.
    pub terminal_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `false` when the free evolution already lands within `eps0`.
    pub assumption_h: bool,
}

/// Options for the accelerated proximal-gradient solver.
#[derive(Debug, Clone, Copy)]
pub struct DualSolverOptions {
    /// Stop when the gradient-map norm is below `tol * max(1, ||y_d||)`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DualSolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: 50_000,
        }
    }
}

/// The dual functional for fixed `(beta, y0, y_d, eps0)`.
#[derive(Debug, Clone)]
pub struct DualProblem<'a> {
    model: &'a Model,
    beta: ActuatorDensity,
    y0: Field,
    y_d: Field,
    eps0: f64,
    /// `y(T; y0; 0) - y_d`
    offset: Field,
}

impl<'a> DualProblem<'a> {
    pub fn new(
        model: &'a Model,
        beta: ActuatorDensity,
        y0: Field,
        y_d: Field,
        eps0: f64,
    ) -> Result<Self> {
        if !(eps0 > 0.0) {
            return Err(Error::NonPositiveEps(eps0));
        }
        let n = model.grid.n();
        for f in [&y0, &y_d] {
            if f.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: f.len(),
                });
            }
            if !f.is_finite() {
                return Err(Error::NonFinite("dual problem data"));
            }
        }
        let offset = model.prop.free_terminal(&y0).sub(&y_d);
        Ok(Self {
            model,
            beta,
            y0,
            y_d,
            eps0,
            offset,
        })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn beta(&self) -> &ActuatorDensity {
        &self.beta
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    fn norm(&self, v: &[f64]) -> f64 {
        self.model.grid.norm(v)
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.model.grid.inner(a, b)
    }

    /// `||y(T; y0; 0) - y_d||`.
    pub fn free_residual(&self) -> f64 {
        self.norm(&self.offset)
    }

    /// Whether the free evolution misses the target ball (non-trivial problem).
    pub fn assumption_h(&self) -> bool {
        self.free_residual() > self.eps0
    }

    /// `J_eps0(eta)` evaluated term by term from the adjoint trajectory.
    pub fn value(&self, eta: &[f64]) -> f64 {
        let g = compute_g(self.model, eta);
        let phi0 = self.model.prop.solve_adjoint(eta);
        0.5 * self.model.grid.inner_omega1(self.beta.values(), &g)
            + self.inner(&self.y0, phi0.first())
            - self.inner(&self.y_d, eta)
            + self.eps0 * self.norm(eta)
    }

    /// `Lambda eta + y(T; y0; 0) - y_d + eps0 eta / ||eta||`; at `eta = 0` the
    /// norm term is dropped (minimum-norm subgradient selection).
    pub fn gradient(&self, eta: &[f64]) -> Field {
        let mut g = gramian_apply(self.model, &self.beta, eta);
        g.add_scaled(1.0, &self.offset);
        let r = self.norm(eta);
        if r > 0.0 {
            g.add_scaled(self.eps0 / r, eta);
        }
        g
    }

    /// Norm of the Euler-Lagrange defect at `eta* != 0`.
    pub fn el_residual(&self, eta_star: &[f64]) -> Result<f64> {
        if self.norm(eta_star) == 0.0 {
            return Err(Error::DegenerateMinimizer);
        }
        Ok(self.norm(&self.gradient(eta_star)))
    }

    /// `||y(T; y0, beta; u) - y_d||`.
    pub fn terminal_residual(&self, u: &ControlSignal) -> f64 {
        let traj = self
            .model
            .prop
            .solve_forward(&self.y0, Some((&self.beta, u)));
        self.norm(&Field(traj.last().to_vec()).sub(&self.y_d))
    }

    /// Terminal state `y(T; y0, beta; u)`.
    pub fn terminal_state(&self, u: &ControlSignal) -> Field {
        let traj = self
            .model
            .prop
            .solve_forward(&self.y0, Some((&self.beta, u)));
        Field(traj.last().to_vec())
    }

    /// Radial proximal map of `t ||.||`.
    fn prox(&self, v: &mut Field, t: f64) {
        let r = self.norm(v);
        let s = if r > t { 1.0 - t / r } else { 0.0 };
        v.iter_mut().for_each(|x| *x *= s);
    }

    /// Accelerated proximal gradient (FISTA) with backtracking on the
    /// Lipschitz estimate and function-value restart.
    pub fn minimize(&self, opts: DualSolverOptions) -> DualSolveReport {
        let n = self.model.grid.n();
        let scale = self.norm(&self.y_d).max(1.0);
        if !self.assumption_h() {
            // 0 lies in the subdifferential at 0: ||offset|| <= eps0.
            return self.report(Field::zeros(n), 0, true, false);
        }
        let lambda_apply = |v: &[f64]| gramian_apply(self.model, &self.beta, v);
        let objective = |x: &[f64], lx: &[f64]| {
            0.5 * self.inner(x, lx) + self.inner(&self.offset, x) + self.eps0 * self.norm(x)
        };

        let mut x = Field::zeros(n);
        let mut lx = Field::zeros(n);
        let mut x_prev = x.clone();
        let mut lx_prev = lx.clone();
        let mut f_x = 0.0f64;
        let mut t = 1.0f64;
        let mut lip = 1.0f64;
        let mut converged = false;
        let mut iters = 0;
        let mut checkpoint = 0.0;

        while iters < opts.max_iters {
            iters += 1;
            if iters % 500 == 0 {
                // no progress beyond roundoff over the last window
                if checkpoint - f_x <= 1e-14 * f_x.abs() {
                    break;
                }
                checkpoint = f_x;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_next;
            let y = x.add(&x.sub(&x_prev).scaled(mom));
            let ly = lx.add(&lx.sub(&lx_prev).scaled(mom));
            let grad = ly.add(&self.offset);

            lip *= 0.9;
            let (x_new, d, ld) = loop {
                let mut cand = y.sub(&grad.scaled(1.0 / lip));
                self.prox(&mut cand, self.eps0 / lip);
                let d = cand.sub(&y);
                let ld = lambda_apply(&d);
                let curv = self.inner(&d, &ld);
                let dd = self.inner(&d, &d);
                if curv <= lip * dd * (1.0 + 1e-12) || dd == 0.0 {
                    break (cand, d, ld);
                }
                lip = (2.0 * lip).max(curv / dd);
            };
            let gmap = lip * self.norm(&d);
            let mut lx_new = ly.add(&ld);
            if iters % 64 == 0 {
                lx_new = lambda_apply(&x_new);
            }
            let f_new = objective(&x_new, &lx_new);

            if f_new > f_x {
                // restart momentum from the better point
                t = 1.0;
                x_prev = x.clone();
                lx_prev = lx.clone();
                if gmap <= opts.tol * scale {
                    converged = true;
                    break;
                }
                continue;
            }
            x_prev = std::mem::replace(&mut x, x_new);
            lx_prev = std::mem::replace(&mut lx, lx_new);
            f_x = f_new;
            t = t_next;
            if gmap <= opts.tol * scale {
                converged = true;
                break;
            }
        }
        if self.norm(&x) > 0.0 {
            // Away from 0 the functional is smooth; finish on the stationarity
            // system, which is far better conditioned than the gradient map
            // once J is flat to roundoff.
            if let Some(eta) = self.polish(&x) {
                // fresh values on both sides; the tracked Lambda x drifts
                let f_apg = objective(&x, &lambda_apply(&x));
                let f_pol = objective(&eta, &lambda_apply(&eta));
                if f_pol <= f_apg + 1e-12 * f_apg.abs() {
                    let res = self.norm(&self.gradient(&eta));
                    converged |= res <= opts.tol * scale;
                    x = eta;
                }
            }
        }
        self.report(x, iters, converged, true)
    }

    /// `-(Lambda + mu I)^{-1} offset`: closed form through the spectral model
    /// when available, refined against the matrix-free operator, otherwise
    /// conjugate gradients from `start`.
    fn shifted_solve(&self, mu: f64, start: &Field, spectral: Option<&SpectralModel>) -> Field {
        let apply = |v: &[f64]| {
            let mut out = gramian_apply(self.model, &self.beta, v);
            out.add_scaled(mu, v);
            out
        };
        let rhs = self.offset.scaled(-1.0);
        if let Some(sm) = spectral {
            let mut x = sm.solve(mu, &rhs);
            for _ in 0..2 {
                let r = rhs.sub(&apply(&x));
                x = x.add(&sm.solve(mu, &r));
            }
            return x;
        }
        let mut x = start.clone();
        let mut r = rhs.sub(&apply(&x));
        let mut p = r.clone();
        let mut rr = self.inner(&r, &r);
        let stop = (1e-15 * self.norm(&rhs)).powi(2);
        for _ in 0..(20 * x.len()).max(200) {
            if rr <= stop {
                break;
            }
            let ap = apply(&p);
            let pap = self.inner(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let a = rr / pap;
            x.add_scaled(a, &p);
            r.add_scaled(-a, &ap);
            let rr_new = self.inner(&r, &r);
            p = r.add(&p.scaled(rr_new / rr));
            rr = rr_new;
        }
        x
    }

    /// Secant search in `log mu` for `mu ||eta(mu)|| = eps0`, where
    /// `eta(mu) = -(Lambda + mu I)^{-1} offset`; the left side increases in `mu`.
    fn polish(&self, warm: &Field) -> Option<Field> {
        let target = self.eps0.ln();
        let spectral = (self.model.grid.n() <= SPECTRAL_MAX_CELLS)
            .then(|| SpectralModel::new(self.model, &self.beta));
        let eval = |s: f64, start: &Field| {
            let eta = self.shifted_solve(s.exp(), start, spectral.as_ref());
            let g = (s.exp() * self.norm(&eta)).ln() - target;
            (g, eta)
        };
        let mut s0 = (self.eps0 / self.norm(warm)).ln();
        let (mut g0, eta0) = eval(s0, warm);
        let mut s1 = s0 - g0.signum() * 0.05;
        let (mut g1, mut eta1) = eval(s1, &eta0);
        for _ in 0..80 {
            if !g1.is_finite() {
                return None;
            }
            if g1.abs() <= 1e-15 {
                break;
            }
            let slope = (g1 - g0) / (s1 - s0);
            let mut step = if slope > 0.0 {
                -g1 / slope
            } else {
                -g1.signum() * 0.5
            };
            step = step.clamp(-2.0, 2.0);
            if step.abs() < 1e-16 * s1.abs().max(1.0) {
                break;
            }
            let s2 = s1 + step;
            let (g2, eta2) = eval(s2, &eta1);
            (s0, g0) = (s1, g1);
            (s1, g1, eta1) = (s2, g2, eta2);
        }
        eta1.is_finite().then_some(eta1)
    }

    fn report(&self, eta: Field, iterations: usize, converged: bool, h: bool) -> DualSolveReport {
        let u = extract_control(self.model, &self.beta, &eta);
        let n_sq = u.norm_sq(&self.model.grid, &self.model.tg);
        let value = if h { self.value(&eta) } else { 0.0 };
        let el = self.el_residual(&eta).unwrap_or(0.0);
        DualSolveReport {
            value,
            min_norm: n_sq.sqrt(),
            duality_residual: (n_sq + 2.0 * value).abs(),
            el_residual: el,
            terminal_residual: self.terminal_residual(&u),
            iterations,
            converged,
            assumption_h: h,
            eta_star: eta,
        }
    }
}

/// Largest grid for which the polish stage materialises `Lambda`.
const SPECTRAL_MAX_CELLS: usize = 512;

/// Eigendecomposition of `Lambda_beta` in coordinates where the quadrature
/// inner product is Euclidean.
struct SpectralModel {
    eig: SymmetricEigen<f64, Dyn>,
    sqrt_w: Vec<f64>,
}

impl SpectralModel {
    fn new(model: &Model, beta: &ActuatorDensity) -> Self {
        let n = model.grid.n();
        let sqrt_w: Vec<f64> = model.grid.widths().iter().map(|w| w.sqrt()).collect();
        let cols = crate::par::map_range(n, |j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            gramian_apply(model, beta, &e)
        });
        let mut a = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * cols[j][i] / sqrt_w[j]);
        a = (&a + a.transpose()) * 0.5;
        let mut eig = SymmetricEigen::new(a);
        eig.eigenvalues.iter_mut().for_each(|d| *d = d.max(0.0));
        Self { eig, sqrt_w }
    }

    /// `(Lambda + mu I)^{-1} rhs`.
    fn solve(&self, mu: f64, rhs: &[f64]) -> Field {
        let z = DVector::from_iterator(rhs.len(), rhs.iter().zip(&self.sqrt_w).map(|(r, s)| r * s));
        let mut c = self.eig.eigenvectors.transpose() * z;
        for (ci, d) in c.iter_mut().zip(self.eig.eigenvalues.iter()) {
            *ci /= d + mu;
        }
        let x = &self.eig.eigenvectors * c;
        Field(x.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect())
    }
}

/// Standalone form of [`DualProblem::assumption_h`].
pub fn check_assumption_h(model: &Model, y0: &[f64], y_d: &[f64], eps0: f64) -> bool {
    let free = model.prop.free_terminal(y0);
    model.grid.norm(&free.sub(y_d)) > eps0
}
