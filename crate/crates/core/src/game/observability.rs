//! Radius of the adjoint ball: an empirical observability constant, a
//! preimage of the target under the free evolution, and the resulting `delta0`.

use nalgebra::{DVector, SVD};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::GameInstance;
use crate::density::ActuatorDensity;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::par;
use crate::rng::{task_rng, TaskRng};

/// The admissible set `||eta|| <= delta0` for the adjoint player.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallSpec {
    pub delta0: f64,
    pub c_lambda_hat: f64,
    /// Initial state whose free evolution lands within `eps0 / 2` of `y_d`.
    pub yhat0: Field,
}

impl BallSpec {
    pub fn new(delta0: f64, c_lambda_hat: f64, yhat0: Field) -> Result<Self> {
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ball radius delta0 = {delta0} must be positive and finite"
            )));
        }
        Ok(Self {
            delta0,
            c_lambda_hat,
            yhat0,
        })
    }

    /// Builds the ball from the instance: `yhat0` by [`find_yhat0`], the
    /// constant by [`estimate_c_lambda`], and `delta0` by [`compute_delta0`].
    pub fn build(inst: &GameInstance, n_samples: usize, seed: u64) -> Result<Self> {
        let yhat0 = find_yhat0(inst, inst.y_d(), inst.eps0())?;
        let est = estimate_c_lambda(inst, n_samples, seed)?;
        let g = inst.grid();
        let delta0 = compute_delta0(est.c_lambda_hat, inst.eps0(), g.norm(&yhat0));
        Self::new(delta0, est.c_lambda_hat, yhat0)
    }
}

/// `C (1 + ||yhat0||)^2 / eps0`.
pub fn compute_delta0(c_lambda_hat: f64, eps0: f64, yhat0_norm: f64) -> f64 {
    c_lambda_hat * (1.0 + yhat0_norm).powi(2) / eps0
}

/// `(2 lambda - sqrt(2 lambda)) / (2 - sqrt(2 lambda)) |Omega_1|`, a lower bound on
/// `|{beta >= sqrt(lambda / 2)}|` for feasible `beta`. Non-positive for `lambda <= 1/2`.
pub fn measure_bound(lambda: f64, omega1_measure: f64) -> f64 {
    let s = (2.0 * lambda).sqrt();
    (2.0 * lambda - s) / (2.0 - s) * omega1_measure
}

/// Tikhonov preimage `z` of `y_d` under the free evolution over `[0, T]`, with
/// `gamma = 1, 0.1, 0.01, ...` until `||F z - y_d|| < eps0 / 2`, certified by a
/// forward solve.
pub fn find_yhat0(inst: &GameInstance, y_d: &[f64], eps0: f64) -> Result<Field> {
    if !(eps0 > 0.0) {
        return Err(Error::NonPositiveEps(eps0));
    }
    let model = inst.model();
    let g = &model.grid;
    let target = 0.5 * eps0;
    let zero_res = g.norm(y_d);
    if zero_res < target {
        return Ok(g.zeros());
    }
    let svd = SVD::new(inst.observation_matrix().clone(), true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let proj = u.transpose() * DVector::from_column_slice(y_d);
    let mut best = zero_res;
    let mut gamma = 1.0f64;
    while gamma >= 1e-14 {
        let coef = DVector::from_iterator(
            proj.len(),
            proj.iter()
                .zip(svd.singular_values.iter())
                .map(|(p, s)| s * p / (s * s + gamma)),
        );
        let z = Field((vt.transpose() * coef).as_slice().to_vec());
        let res = g.norm(&model.prop.free_terminal(&z).sub(y_d));
        best = best.min(res);
        if res < target {
            return Ok(z);
        }
        gamma *= 0.1;
    }
    Err(Error::RangeUnreachable {
        residual: best,
        target,
    })
}

/// `||phi(0; eta)||^2 / <beta, G(eta)>`, denominator floored at `1e-300`.
pub fn observability_ratio(inst: &GameInstance, beta: &ActuatorDensity, eta: &[f64]) -> f64 {
    let g = inst.grid();
    let num = g.norm(&inst.observe(eta)).powi(2);
    let den = g.inner_omega1(beta.values(), &inst.g_omega1(eta));
    num / den.max(1e-300)
}

/// Unit-norm adjoint data of three kinds, cycling with `kind`: white noise,
/// a smooth random sine series, and the image of white noise under the
/// terminal observation map.
pub fn sample_direction(inst: &GameInstance, rng: &mut TaskRng, kind: usize) -> Field {
    let g = inst.grid();
    let n = g.n();
    let white = |rng: &mut TaskRng| -> Field {
        Field(
            (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    };
    let raw = match kind % 3 {
        0 => white(rng),
        1 => {
            let modes = 6;
            let coef: Vec<f64> = (1..=modes)
                .map(|k| rng.sample::<f64, _>(StandardNormal) / k as f64)
                .collect();
            g.sample(|x| {
                coef.iter()
                    .enumerate()
                    .map(|(k, c)| c * (std::f64::consts::PI * (k + 1) as f64 * x).sin())
                    .sum()
            })
        }
        _ => inst.observe(&white(rng)),
    };
    let r = g.norm(&raw);
    if r > 0.0 {
        raw.scaled(1.0 / r)
    } else {
        g.sample(|_| 1.0)
    }
}

/// Feasible density, alternating between the projection of a uniform random
/// vector and the bathtub maximiser of one (at most one fractional cell).
pub fn sample_density(
    inst: &GameInstance,
    rng: &mut TaskRng,
    kind: usize,
) -> Result<ActuatorDensity> {
    let g = inst.grid();
    let raw: Vec<f64> = (0..g.omega1_len()).map(|_| rng.random()).collect();
    if kind.is_multiple_of(2) {
        ActuatorDensity::project(g, &raw, inst.lambda())
    } else {
        Ok(inst.bathtub(&raw)?.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CLambdaEstimate {
    /// Twice the largest sampled ratio.
    pub c_lambda_hat: f64,
    pub max_ratio: f64,
    pub samples: usize,
    /// Draws whose observation energy `<beta, G(eta)>` fell below `1e-300`.
    pub degenerate: usize,
}

/// Empirical constant in `||phi(0; eta)||^2 <= C <beta, G(eta)>` from random
/// unit `eta` and feasible `beta`, with a safety factor of two.
pub fn estimate_c_lambda(
    inst: &GameInstance,
    n_samples: usize,
    seed: u64,
) -> Result<CLambdaEstimate> {
    let ratios = par::map_range(n_samples, |s| -> Result<(f64, bool)> {
        let mut rng = task_rng(seed, "c-lambda", s as u64);
        let eta = sample_direction(inst, &mut rng, s);
        let beta = sample_density(inst, &mut rng, s / 3)?;
        let den = inst
            .grid()
            .inner_omega1(beta.values(), &inst.g_omega1(&eta));
        Ok((observability_ratio(inst, &beta, &eta), den <= 1e-300))
    });
    let mut max_ratio = 0.0f64;
    let mut degenerate = 0;
    for r in ratios {
        let (ratio, deg) = r?;
        if deg {
            degenerate += 1;
        } else {
            max_ratio = max_ratio.max(ratio);
        }
    }
    if degenerate == n_samples {
        return Err(Error::DegenerateObservability);
    }
    Ok(CLambdaEstimate {
        c_lambda_hat: 2.0 * max_ratio,
        max_ratio,
        samples: n_samples,
        degenerate,
    })
}
