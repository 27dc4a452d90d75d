//! Implicit-Euler propagation of the state equation and its adjoint.
//!
//! One step reads `(I - dt M) y^{k+1} = y^k + dt s_k`, where `s_k` is the
//! source active on the step from `t_k` to `t_{k+1}`. The adjoint is the same
//! recurrence run from the terminal datum and read backwards, so
//! `phi^j = R^{N-j} eta` with `R = (I - dt M)^{-1}`. Pairing controls on step
//! `k` with `phi^k` (left end point) makes the discrete duality identity
//! `<y^N, eta> = <y_0, phi^0> + Sum_k dt <sqrt(beta) u_k, phi^k>` exact.

use serde::Serialize;

use crate::density::ActuatorDensity;
use crate::error::{Error, Result};
use crate::grid::{Field, SpatialGrid, TimeGrid};
use crate::operator::{DiscreteOperator, ImplicitStep};

/// States at every time node `t_0, ..., t_N`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    data: Vec<f64>,
}

impl Trajectory {
    /// Number of time nodes (`n_steps + 1`).
    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn field_at(&self, k: usize) -> Field {
        Field(self.at(k).to_vec())
    }

    pub fn last(&self) -> &[f64] {
        self.at(self.len() - 1)
    }

    pub fn first(&self) -> &[f64] {
        self.at(0)
    }

    fn reversed(self) -> Self {
        let n = self.n;
        let mut data = Vec::with_capacity(self.data.len());
        for chunk in self.data.chunks_exact(n).rev() {
            data.extend_from_slice(chunk);
        }
        Self { n, data }
    }
}

/// Space-time control values on the window steps `tau_step..n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSignal {
    n: usize,
    first_step: usize,
    values: Vec<f64>,
}

impl ControlSignal {
    pub fn zeros(grid: &SpatialGrid, tg: &TimeGrid) -> Self {
        Self {
            n: grid.n(),
            first_step: tg.tau_step(),
            values: vec![0.0; grid.n() * tg.window_len()],
        }
    }

    /// Builds a signal from `f(k, i)` evaluated on window step `k`, cell `i`.
    pub fn from_fn(
        grid: &SpatialGrid,
        tg: &TimeGrid,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * tg.window_len());
        for k in tg.window() {
            for i in 0..n {
                values.push(f(k, i));
            }
        }
        Self {
            n,
            first_step: tg.tau_step(),
            values,
        }
    }

    pub fn from_values(grid: &SpatialGrid, tg: &TimeGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n() * tg.window_len();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control signal"));
        }
        Ok(Self {
            n: grid.n(),
            first_step: tg.tau_step(),
            values,
        })
    }

    /// Values on step `k`; `None` outside the window.
    pub fn at(&self, k: usize) -> Option<&[f64]> {
        let j = k.checked_sub(self.first_step)?;
        self.values.get(j * self.n..(j + 1) * self.n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_step(&self) -> usize {
        self.first_step
    }

    /// `||u||^2_{L^2(Omega x (tau, T))}` with the left-end-point rule.
    pub fn norm_sq(&self, grid: &SpatialGrid, tg: &TimeGrid) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v * v).sum();
        sum * grid.dx() * tg.dt()
    }

    /// `Sum_k dt <u_k, v_k>` over the window.
    pub fn inner(&self, other: &ControlSignal, grid: &SpatialGrid, tg: &TimeGrid) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        sum * grid.dx() * tg.dt()
    }
}

/// Forward and adjoint solver for a fixed operator and time grid.
#[derive(Debug, Clone)]
pub struct Propagator {
    tg: TimeGrid,
    step: ImplicitStep,
    n: usize,
}

impl Propagator {
    pub fn new(op: &DiscreteOperator, tg: TimeGrid) -> Result<Self> {
        let step = ImplicitStep::new(op, tg.dt())?;
        Ok(Self {
            tg,
            step,
            n: op.n(),
        })
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tg
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Runs the recurrence from `y0`. `source(k, buf)` may write `s_k` into the
    /// zeroed buffer `buf` and returns whether it did.
    pub fn integrate<F>(&self, y0: &[f64], mut source: F) -> Trajectory
    where
        F: FnMut(usize, &mut [f64]) -> bool,
    {
        let n = self.n;
        assert_eq!(y0.len(), n, "initial state length does not match grid");
        let steps = self.tg.n_steps();
        let dt = self.tg.dt();
        let mut data = Vec::with_capacity(n * (steps + 1));
        data.extend_from_slice(y0);
        let mut buf = vec![0.0; n];
        let mut next = vec![0.0; n];
        for k in 0..steps {
            next.copy_from_slice(&data[k * n..(k + 1) * n]);
            buf.iter_mut().for_each(|b| *b = 0.0);
            if source(k, &mut buf) {
                for (y, s) in next.iter_mut().zip(&buf) {
                    *y += dt * s;
                }
            }
            self.step.solve_in_place(&mut next);
            data.extend_from_slice(&next);
        }
        Trajectory { n, data }
    }

    /// Terminal state of the source-free recurrence, without storing the path.
    pub fn free_terminal(&self, y0: &[f64]) -> Field {
        let mut y = y0.to_vec();
        for _ in 0..self.tg.n_steps() {
            self.step.solve_in_place(&mut y);
        }
        Field(y)
    }

    /// State trajectory `y(.; y0, beta; u)`. The control acts through
    /// `sqrt(beta)` (extended by zero off `Omega_1`) on the window steps.
    pub fn solve_forward(
        &self,
        y0: &[f64],
        control: Option<(&ActuatorDensity, &ControlSignal)>,
    ) -> Trajectory {
        match control {
            None => self.integrate(y0, |_, _| false),
            Some((beta, u)) => {
                let sqrt_beta = beta.full_sqrt();
                self.integrate(y0, |k, buf| match u.at(k) {
                    Some(uk) => {
                        for ((b, s), v) in buf.iter_mut().zip(&sqrt_beta).zip(uk) {
                            *b = s * v;
                        }
                        true
                    }
                    None => false,
                })
            }
        }
    }

    /// Adjoint trajectory `phi(.; eta)`, indexed by time node (`at(0)` is
    /// `phi(0)`, `at(N)` is `eta`). Runs the forward recurrence from `eta` and
    /// reverses it, so `solve_adjoint(eta).at(0) == solve_forward(eta, None).last()`
    /// bit for bit.
    pub fn solve_adjoint(&self, eta: &[f64]) -> Trajectory {
        self.solve_forward(eta, None).reversed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CoefficientSpec;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(
        n: usize,
        steps: usize,
        alpha: f64,
    ) -> (SpatialGrid, TimeGrid, DiscreteOperator, Propagator) {
        let g = SpatialGrid::new(n, alpha, 0.5).unwrap();
        let tg = TimeGrid::new(0.5, 0.125, steps).unwrap();
        let op = DiscreteOperator::assemble(&g, &CoefficientSpec::Zero).unwrap();
        let p = Propagator::new(&op, tg).unwrap();
        (g, tg, op, p)
    }

    #[test]
    fn free_decay_is_monotone() {
        let (g, _, _, p) = setup(32, 64, 0.5);
        let y0 = g.sample(|x| (3.0 * x).sin() + 0.2);
        let traj = p.solve_forward(&y0, None);
        let norms: Vec<f64> = (0..traj.len()).map(|k| g.norm(traj.at(k))).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn zero_in_zero_out() {
        let (g, _, _, p) = setup(16, 16, 1.5);
        let traj = p.solve_forward(&g.zeros(), None);
        assert!((0..traj.len()).all(|k| traj.at(k).iter().all(|v| *v == 0.0)));
        let adj = p.solve_adjoint(&g.zeros());
        assert!(adj.first().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn first_mode_decays_exponentially() {
        let (g, tg, op, p) = setup(128, 1024, 0.5);
        let eig = SymmetricEigen::new(-op.to_dense());
        let (imin, lambda1) =
            eig.eigenvalues
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
                );
        let y0: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
        let y_t = p.free_terminal(&y0);
        let ratio = g.norm(&y_t) / g.norm(&y0);
        let expected = (-lambda1 * tg.horizon()).exp();
        assert!(
            (ratio - expected).abs() / expected < 0.02,
            "{ratio} vs {expected}"
        );
    }

    #[test]
    fn adjoint_is_reversed_forward() {
        let (g, _, _, p) = setup(24, 40, 0.75);
        let eta = g.sample(|x| x * (1.0 - x));
        let adj = p.solve_adjoint(&eta);
        let fwd = p.solve_forward(&eta, None);
        assert_eq!(adj.first(), fwd.last());
        assert_eq!(adj.last(), &eta[..]);
        assert!(g.norm(adj.first()) <= g.norm(&eta));
    }

    #[test]
    fn duality_identity_holds_to_roundoff() {
        let (g, tg, _, p) = setup(64, 256, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = g.omega1_len();
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let beta = ActuatorDensity::project(&g, &raw, 0.4).unwrap();
        let y0 = Field((0..64).map(|_| rng.random_range(-1.0..1.0)).collect());
        let eta = Field((0..64).map(|_| rng.random_range(-1.0..1.0)).collect());
        let u = ControlSignal::from_fn(&g, &tg, |_, _| rng.random_range(-1.0..1.0));
        let y = p.solve_forward(&y0, Some((&beta, &u)));
        let phi = p.solve_adjoint(&eta);
        let sb = beta.full_sqrt();
        let mut pairing = 0.0;
        for k in tg.window() {
            let uk = u.at(k).unwrap();
            let weighted: Vec<f64> = uk.iter().zip(&sb).map(|(a, b)| a * b).collect();
            pairing += tg.dt() * g.inner(&weighted, phi.at(k));
        }
        let lhs = pairing + g.inner(&y0, phi.first());
        let rhs = g.inner(y.last(), &eta);
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} vs {rhs}");
    }
}
