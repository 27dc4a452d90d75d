//! Projected supergradient ascent on the concave `Phi(beta)`, finished by
//! cutting planes.
//!
//! Every inner minimiser `eta_k` gives an affine majorant `J(., eta_k)` of
//! `Phi`. After the ascent the model `min_k J(beta, eta_k)` is maximised
//! exactly over the admissible densities as a linear program, the inner problem is solved at the
//! model maximiser and the new cut is added, until the model and the best
//! `Phi` agree.

use serde::Serialize;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{inner_inf, BallSpec, GameInstance, InnerOptions};
use crate::density::ActuatorDensity;
use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy)]
pub struct OuterOptions {
    pub max_iters: usize,
    /// Cutting-plane rounds after the ascent.
    pub cut_rounds: usize,
    /// Stop when the projected step moves `beta` by less than this (max norm).
    pub tol: f64,
    pub inner: InnerOptions,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            cut_rounds: 60,
            tol: 1e-10,
            inner: InnerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterResult {
    /// Best iterate by `Phi` value.
    pub beta: ActuatorDensity,
    /// `Phi(beta)` as found by the inner solver.
    pub value: f64,
    /// Inner minimiser at `beta`.
    pub eta: Field,
    /// `Phi` at every iterate, ascent then cutting planes.
    pub history: Vec<f64>,
    /// Maximum of the cutting-plane model, an upper bound on `sup Phi`.
    pub model_bound: f64,
}

struct Cut {
    g: Vec<f64>,
    offset: f64,
}

impl Cut {
    fn new(inst: &GameInstance, eta: &Field) -> Self {
        Self {
            g: inst.g_omega1(eta),
            offset: inst.offset_value(eta),
        }
    }

    fn value(&self, inst: &GameInstance, beta: &[f64]) -> f64 {
        inst.value_from_parts(beta, &self.g, self.offset)
    }
}

/// `argmax_beta min_k J(beta, eta_k)` and the maximum, as a linear program
/// in `(beta, t)`: maximise `t` subject to `t <= J(beta, eta_k)` for every cut.
fn maximize_model(inst: &GameInstance, cuts: &[Cut]) -> Result<(ActuatorDensity, f64)> {
    let g = inst.grid();
    let w = g.omega1_widths();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let vars: Vec<_> = w.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    for c in cuts {
        // row scaled to unit size; the solver's tolerances are absolute
        let coef: Vec<f64> = c.g.iter().zip(w).map(|(g, w)| -0.5 * g * w).collect();
        let scale = coef
            .iter()
            .fold(c.offset.abs().max(1.0), |m, v| m.max(v.abs()));
        let mut row: Vec<_> = vec![(t, 1.0 / scale)];
        row.extend(vars.iter().zip(&coef).map(|(v, a)| (*v, a / scale)));
        lp.add_constraint(row.as_slice(), ComparisonOp::Le, c.offset / scale);
    }
    let mass_row: Vec<_> = vars.iter().cloned().zip(w.iter().cloned()).collect();
    lp.add_constraint(mass_row.as_slice(), ComparisonOp::Eq, inst.mass());
    let sol = lp
        .solve()
        .map_err(|e| Error::LinearProgram(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::LinearProgram("interrupted".into()))?;
    let raw: Vec<f64> = vars.iter().map(|v| sol.var_value(*v)).collect();
    let beta = ActuatorDensity::project(g, &raw, inst.lambda())?;
    let model = cuts
        .iter()
        .map(|c| c.value(inst, beta.values()))
        .fold(f64::INFINITY, f64::min);
    // the projection can only move a solver-accurate point by rounding
    Ok((beta, model.max(sol.var_value(t))))
}

/// `beta_{k+1} = proj(beta_k + s_k G(eta_k) / 2)` with `s_k = s_0 / sqrt(k)` and
/// `s_0 = 0.5 / max(spread of G(eta_0) / 2 over Omega_1, 1e-12)`, so the first
/// step can move the density by one half between the extreme cells. The inner solve
/// at each iterate is warm-started from the previous minimiser.
pub fn outer_sup(
    inst: &GameInstance,
    ball: &BallSpec,
    init_beta: &ActuatorDensity,
    opts: &OuterOptions,
) -> Result<OuterResult> {
    let g = inst.grid();
    let mut beta = init_beta.clone();
    let mut warm: Vec<Field> = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(ActuatorDensity, f64, Field)> = None;
    let mut step0 = None;
    let mut cuts = Vec::new();
    for k in 1..=opts.max_iters.max(1) {
        let mut inner_opts = opts.inner;
        inner_opts.seed = crate::rng::derive_seed(opts.inner.seed, "outer", k as u64);
        let r = inner_inf(inst, &beta, ball, &inner_opts, &warm);
        history.push(r.value);
        cuts.push(Cut::new(inst, &r.eta));
        if best.as_ref().is_none_or(|b| r.value > b.1) {
            best = Some((beta.clone(), r.value, r.eta.clone()));
        }
        let sup: Vec<f64> = inst.g_omega1(&r.eta).iter().map(|v| 0.5 * v).collect();
        let s0 = *step0.get_or_insert_with(|| {
            // the projection absorbs constant shifts, so scale by the spread
            let hi = sup.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = sup.iter().cloned().fold(f64::INFINITY, f64::min);
            0.5 / (hi - lo).max(1e-12)
        });
        let step = s0 / (k as f64).sqrt();
        let raw: Vec<f64> = beta
            .values()
            .iter()
            .zip(&sup)
            .map(|(b, s)| b + step * s)
            .collect();
        let next = ActuatorDensity::project(g, &raw, inst.lambda())?;
        let moved = next
            .values()
            .iter()
            .zip(beta.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        warm = vec![r.eta];
        beta = next;
        if moved <= opts.tol {
            break;
        }
    }
    let (mut beta, mut value, mut eta) = best.expect("at least one iterate");

    let mut model_bound = f64::INFINITY;
    for k in 0..opts.cut_rounds {
        let (cand, bound) = maximize_model(inst, &cuts)?;
        model_bound = model_bound.min(bound);
        if model_bound - value <= opts.tol * value.abs().max(1.0) {
            break;
        }
        let mut inner_opts = opts.inner;
        inner_opts.seed = crate::rng::derive_seed(opts.inner.seed, "outer-cut", k as u64);
        let r = inner_inf(inst, &cand, ball, &inner_opts, &[eta.clone()]);
        history.push(r.value);
        cuts.push(Cut::new(inst, &r.eta));
        if r.value > value {
            beta = cand;
            value = r.value;
            eta = r.eta;
        }
    }
    Ok(OuterResult {
        beta,
        value,
        eta,
        history,
        model_bound,
    })
}
