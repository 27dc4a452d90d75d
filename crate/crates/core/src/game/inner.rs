//! `Phi(beta) = inf_{||eta|| <= delta0} J(beta, eta)` by multi-start DC descent.
//!
//! `J(beta, .)` is a convex function minus `||P eta||`. Each step replaces the
//! concave part by its supporting hyperplane at the current iterate and
//! minimises the convex majorant
//!
//! ```text
//! 1/2 <eta, Lambda eta> - <b, eta> + eps0 ||eta||   over ||eta|| <= delta0
//! ```
//!
//! exactly: with `Lambda = Q D Q^T` the minimiser is `(Lambda + theta I)^{-1} b`
//! for the scalar `theta` solving `theta ||(Lambda + theta)^{-1} b|| = eps0`, or
//! `||(Lambda + theta)^{-1} b|| = delta0` when the ball is active. The value never
//! increases along the iteration.
//!
//! All linear algebra is done in `z = sqrt(dx) eta`, where the quadrature
//! norm is the Euclidean one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{BallSpec, GameInstance};
use crate::density::ActuatorDensity;
use crate::grid::Field;
use crate::par;
use crate::rng::task_rng;

#[derive(Debug, Clone, Copy)]
pub struct InnerOptions {
    /// Number of random starts, on top of `0`, the leading singular
    /// directions of `P` (both signs) and any caller-supplied starts.
    pub n_starts: usize,
    pub seed: u64,
    /// Relative decrease below which a DC run stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            n_starts: 8,
            seed: 0,
            tol: 1e-12,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InnerResult {
    pub eta: Field,
    pub value: f64,
    /// Value reached from each start, in start order.
    pub start_values: Vec<f64>,
    pub iterations: usize,
}

/// Exact solver of the convex majorant for a fixed `Lambda`.
pub(crate) struct Majorant {
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    eps: f64,
    radius: f64,
}

impl Majorant {
    pub(crate) fn new(lambda: DMatrix<f64>, eps: f64, radius: f64) -> Self {
        let mut eig = SymmetricEigen::new(lambda);
        eig.eigenvalues.iter_mut().for_each(|d| *d = d.max(0.0));
        Self { eig, eps, radius }
    }

    /// `argmin 1/2 z^T Lambda z - b^T z + eps |z|` over `|z| <= radius`.
    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let bt = self.eig.eigenvectors.transpose() * b;
        if bt.norm() <= self.eps {
            return DVector::zeros(b.len());
        }
        let d = &self.eig.eigenvalues;
        let r = |theta: f64| -> f64 {
            bt.iter()
                .zip(d.iter())
                .map(|(b, d)| (b / (d + theta)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        // theta r(theta) increases from its theta -> 0 limit to |b| > eps
        let free = bisect_log(|t| t * r(t) - self.eps, self.eps / bt.norm());
        let theta = match free {
            Some(t) if r(t) <= self.radius => t,
            // ball active: r(theta) = radius with theta >= eps / radius
            _ => {
                let lo = self.eps / self.radius;
                bisect_log(|t| self.radius - r(t), lo).unwrap_or(lo).max(lo)
            }
        };
        let coef = DVector::from_iterator(
            bt.len(),
            bt.iter().zip(d.iter()).map(|(b, d)| b / (d + theta)),
        );
        &self.eig.eigenvectors * coef
    }
}

/// Root of an increasing function of `theta > 0`, searched in `log theta`
/// starting from `guess`. `None` if no sign change is found.
fn bisect_log(f: impl Fn(f64) -> f64, guess: f64) -> Option<f64> {
    let mut lo = guess.max(1e-300);
    let mut hi = lo;
    let mut tries = 0;
    while f(lo) > 0.0 {
        lo *= 1e-2;
        tries += 1;
        if lo < 1e-300 || tries > 200 {
            return None;
        }
    }
    tries = 0;
    while f(hi) < 0.0 {
        hi *= 1e2;
        tries += 1;
        if !hi.is_finite() || tries > 200 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Some((lo * hi).sqrt())
}

/// Best-found minimiser of `J(beta, .)` over the ball. `extra_starts` (for
/// instance adjoint data found for nearby densities) are used as additional
/// starting points after projection onto the ball.
pub fn inner_inf(
    inst: &GameInstance,
    beta: &ActuatorDensity,
    ball: &BallSpec,
    opts: &InnerOptions,
    extra_starts: &[Field],
) -> InnerResult {
    let g = inst.grid();
    let n = g.n();
    let sdx = g.dx().sqrt();
    let p = inst.observation_matrix();
    let sigma = 1e-9 * ball.delta0;
    let majorant = Majorant::new(inst.gramian_matrix(beta.values()), inst.eps0(), ball.delta0);
    let yd_z = DVector::from_column_slice(inst.y_d()) * sdx;
    let ptp = p.transpose() * p;

    let value_z = |z: &DVector<f64>| -> f64 {
        let eta: Vec<f64> = z.iter().map(|v| v / sdx).collect();
        inst.value(beta, &eta)
    };

    // starting directions in z coordinates
    let mut starts: Vec<DVector<f64>> = vec![DVector::zeros(n)];
    let svd = nalgebra::SVD::new(p.clone(), false, true);
    let vt = svd.v_t.as_ref().expect("right singular vectors");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    for &k in order.iter().take(3.min(n)) {
        let v = vt.row(k).transpose();
        starts.push(v.clone());
        starts.push(-v);
    }
    for s in 0..opts.n_starts {
        let mut rng = task_rng(opts.seed, "inner-start", s as u64);
        let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if s % 2 == 1 {
            // smoothed: a few passes of a three-point average
            for _ in 0..n / 4 {
                let w = v.clone();
                for i in 0..n {
                    let l = if i > 0 { w[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { w[i + 1] } else { 0.0 };
                    v[i] = 0.25 * l + 0.5 * w[i] + 0.25 * r;
                }
            }
        }
        starts.push(v);
    }
    for e in extra_starts {
        let mut z = DVector::from_column_slice(e) * sdx;
        let r = z.norm();
        if r > ball.delta0 {
            z *= ball.delta0 / r;
        }
        starts.push(z);
    }

    let runs = par::map(&starts, |z0| {
        let mut z = z0.clone();
        // scale random directions into the ball; the DC step only sees the direction
        if z.norm() > ball.delta0 {
            z *= ball.delta0 / z.norm();
        }
        let mut val = value_z(&z);
        let mut iters = 0;
        for _ in 0..opts.max_iters {
            iters += 1;
            let pz = p * &z;
            let denom = (pz.norm_squared() + sigma * sigma).sqrt();
            let mut b = yd_z.clone();
            if denom > 0.0 {
                b += &ptp * &z / denom;
            }
            let next = majorant.solve(&b);
            let next_val = value_z(&next);
            if next_val > val {
                break;
            }
            let drop = val - next_val;
            z = next;
            val = next_val;
            if drop <= opts.tol * val.abs().max(1e-300) {
                break;
            }
        }
        (z, val, iters)
    });

    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 < runs[best].1 {
            best = i;
        }
    }
    let start_values = runs.iter().map(|r| r.1).collect();
    let iterations = runs.iter().map(|r| r.2).sum();
    let (z, value, _) = &runs[best];
    InnerResult {
        eta: Field(z.iter().map(|v| v / sdx).collect()),
        value: *value,
        start_values,
        iterations,
    }
}
