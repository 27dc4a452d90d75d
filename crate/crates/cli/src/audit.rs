//! Invariant audits run by `verify`.
//!
//! Each audit checks one identity or inequality of the discretised model on
//! the configured instance and reports the measured defect against a pinned
//! tolerance. Audits are independent and run through the parallel map; the
//! placement game is solved once beforehand and shared.

use rand::Rng;
use rand_distr::StandardNormal;

use degen_actuator::dual::{
    extract_control, gramian_apply, DualProblem, DualSolveReport, DualSolverOptions,
};
use degen_actuator::game::{inner_inf, BallSpec, GameInstance, GameResult, InnerOptions};
use degen_actuator::oracle::{lowrank_inner_oracle, oracle_min_norm};
use degen_actuator::rng::{task_rng, TaskRng};
use degen_actuator::{
    par, ActuatorDensity, CoefficientSpec, ControlSignal, Field, Model, SpatialGrid, TimeGrid,
};

use crate::config::{ExperimentConfig, FieldSpec, InitialState};
use crate::record::AuditRecord;

const SYMMETRY_TOL: f64 = 1e-12;
const ADJOINT_TOL: f64 = 1e-9;
const GRAMIAN_TOL: f64 = 1e-10;
const DUALITY_TOL: f64 = 1e-8;
const ADMISSIBLE_SLACK: f64 = 1e-6;
const EL_FACTOR: f64 = 10.0;
const ALIGNMENT_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-4;
const MASS_TOL: f64 = 1e-10;
const BATHTUB_TOL: f64 = 1e-12;
const AFFINE_TOL: f64 = 1e-12;
const WEAK_DUALITY_TOL: f64 = 1e-9;
const SCALING_TOL: f64 = 1e-6;
const SCALING_FACTOR: f64 = 3.0;
const LOWRANK_TOL: f64 = 1e-3;
const LOWRANK_NET: usize = 2000;

/// Shared inputs of the audits.
pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub model: &'a Model,
    pub y0: Field,
    pub y_d: Field,
    pub beta: ActuatorDensity,
    pub seed: u64,
    pub dual: DualSolveReport,
    pub game: Result<(BallSpec, GameResult), String>,
}

impl Context<'_> {
    fn rng(&self, label: &str) -> TaskRng {
        task_rng(self.seed, label, 0)
    }

    fn dual_options(&self) -> DualSolverOptions {
        DualSolverOptions {
            tol: self.cfg.solver.tol,
            max_iters: self.cfg.solver.max_iters,
        }
    }

    fn inner_options(&self) -> InnerOptions {
        InnerOptions {
            n_starts: self.cfg.solver.n_starts,
            seed: degen_actuator::rng::derive_seed(self.seed, "audit-inner", 0),
            tol: self.cfg.solver.inner_tol,
            max_iters: self.cfg.solver.inner_max_iters,
        }
    }

    fn random_field(&self, rng: &mut TaskRng) -> Field {
        Field(
            (0..self.model.grid.n())
                .map(|_| rng.sample(StandardNormal))
                .collect(),
        )
    }

    fn random_density(&self, rng: &mut TaskRng) -> Result<ActuatorDensity, String> {
        let g = &self.model.grid;
        let raw: Vec<f64> = (0..g.omega1_len()).map(|_| rng.random()).collect();
        ActuatorDensity::project(g, &raw, self.cfg.problem.lambda).map_err(|e| e.to_string())
    }

    /// The dense oracles are exponential or cubic in the grid, so they run
    /// on a coarse copy of the instance.
    fn oracle_model(&self) -> Result<Model, String> {
        let (g, t, v) = (&self.cfg.grid, &self.cfg.time, &self.cfg.verify);
        let grid =
            SpatialGrid::new(v.oracle_n, g.alpha, g.epsilon_cut).map_err(|e| e.to_string())?;
        let tg = TimeGrid::new(t.horizon, t.tau, v.oracle_steps).map_err(|e| e.to_string())?;
        let a = match &self.cfg.problem.a {
            CoefficientSpec::Sampled { .. } => CoefficientSpec::Zero,
            other => other.clone(),
        };
        Model::new(grid, tg, &a).map_err(|e| e.to_string())
    }
}

/// Resamples a field specification on another grid; per-cell values do not
/// transfer and fall back to `fallback`.
fn resample(spec: &FieldSpec, grid: &SpatialGrid, fallback: Field) -> Field {
    match spec {
        FieldSpec::Values { .. } => fallback,
        other => other.sample(grid, "resampled").unwrap_or(fallback),
    }
}

/// The fixed initial state used by the audits: the configured one, or a
/// unit bump in worst-case mode.
pub fn audit_initial_state(cfg: &ExperimentConfig, grid: &SpatialGrid) -> Field {
    match &cfg.problem.y0 {
        InitialState::Field(f) => f
            .sample(grid, "problem.y0")
            .unwrap_or_else(|_| default_bump(grid)),
        InitialState::Mode(_) => default_bump(grid),
    }
}

fn default_bump(grid: &SpatialGrid) -> Field {
    let f = grid.sample(|x| (-((x - 0.4) / 0.1).powi(2)).exp());
    f.scaled(1.0 / grid.norm(&f))
}

type Audit = fn(&Context) -> AuditRecord;

struct Check {
    name: &'static str,
    anchor: &'static str,
    tolerance: f64,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    fn at_most(&self, measured: f64, detail: String) -> AuditRecord {
        AuditRecord {
            name: self.name,
            anchor: self.anchor,
            passed: measured <= self.tolerance,
            measured,
            tolerance: self.tolerance,
            detail,
        }
    }

    fn failed(&self, detail: String) -> AuditRecord {
        AuditRecord {
            name: self.name,
            anchor: self.anchor,
            passed: false,
            measured: f64::NAN,
            tolerance: self.tolerance,
            detail,
        }
    }

    fn run(&self, f: impl FnOnce() -> Result<(f64, String), String>) -> AuditRecord {
        match f() {
            Ok((m, d)) => self.at_most(m, d),
            Err(e) => self.failed(e),
        }
    }
}

fn operator_symmetry(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "operator_symmetry",
        anchor: "<A v, w> = <v, A w> for the weighted grid inner product",
        tolerance: SYMMETRY_TOL,
    };
    let g = &cx.model.grid;
    let op = &cx.model.op;
    let dense = op.to_dense();
    let norm = (0..g.n())
        .map(|i| dense.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut rng = cx.rng("audit-symmetry");
    let mut worst = 0.0f64;
    for _ in 0..cx.cfg.verify.samples {
        let v = cx.random_field(&mut rng);
        let w = cx.random_field(&mut rng);
        let lhs = g.inner(&op.apply(&v), &w);
        let rhs = g.inner(&v, &op.apply(&w));
        worst = worst.max((lhs - rhs).abs() / (g.norm(&v) * g.norm(&w) * norm));
    }
    let asym = (0..g.n().saturating_sub(1))
        .map(|i| (op.upper()[i] - op.lower()[i]).abs())
        .fold(0.0f64, f64::max);
    check.at_most(
        worst,
        format!(
            "{} random pairs; largest entry asymmetry {asym:.3e}",
            cx.cfg.verify.samples
        ),
    )
}

fn operator_dissipative(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "operator_dissipative",
        anchor: "<A v, v> <= 0",
        tolerance: SYMMETRY_TOL,
    };
    let g = &cx.model.grid;
    let dense = cx.model.op.to_dense();
    let norm = (0..g.n())
        .map(|i| dense.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut rng = cx.rng("audit-dissipative");
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cx.cfg.verify.samples {
        let v = cx.random_field(&mut rng);
        worst = worst.max(g.inner(&cx.model.op.apply(&v), &v) / (g.norm(&v).powi(2) * norm));
    }
    check.at_most(
        worst,
        format!(
            "largest normalised <A v, v> over {} draws",
            cx.cfg.verify.samples
        ),
    )
}

fn adjoint_identity(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "adjoint_identity",
        anchor: "<y(T), eta> = <y0, phi(0)> + int_tau^T <sqrt(beta) u, phi> dt",
        tolerance: ADJOINT_TOL,
    };
    check.run(|| {
        let m = cx.model;
        let mut rng = cx.rng("audit-adjoint");
        let mut worst = 0.0f64;
        for _ in 0..cx.cfg.verify.samples.min(20) {
            let beta = cx.random_density(&mut rng)?;
            let y0 = cx.random_field(&mut rng);
            let eta = cx.random_field(&mut rng);
            let u = ControlSignal::from_fn(&m.grid, &m.tg, |_, _| rng.sample(StandardNormal));
            let y = m.prop.solve_forward(&y0, Some((&beta, &u)));
            let free = m.grid.inner(&y0, m.prop.solve_adjoint(&eta).first());
            let forced = u.inner(&extract_control(m, &beta, &eta), &m.grid, &m.tg);
            let lhs = m.grid.inner(y.last(), &eta);
            let scale = free.abs() + forced.abs();
            worst = worst.max((lhs - free - forced).abs() / scale.max(1e-300));
        }
        Ok((
            worst,
            "relative defect over random (beta, y0, eta, u)".into(),
        ))
    })
}

fn gramian_pairing(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "gramian_pairing",
        anchor: "<Lambda_beta eta, zeta> = <eta, Lambda_beta zeta>, <Lambda_beta eta, eta> = <beta, G(eta)>",
        tolerance: GRAMIAN_TOL,
    };
    check.run(|| {
        let m = cx.model;
        let g = &m.grid;
        let mut rng = cx.rng("audit-gramian");
        let mut worst = 0.0f64;
        for _ in 0..cx.cfg.verify.samples.min(20) {
            let beta = cx.random_density(&mut rng)?;
            let eta = cx.random_field(&mut rng);
            let zeta = cx.random_field(&mut rng);
            let le = gramian_apply(m, &beta, &eta);
            let lz = gramian_apply(m, &beta, &zeta);
            let scale = g.norm(&le) * g.norm(&zeta) + g.norm(&lz) * g.norm(&eta);
            worst = worst.max((g.inner(&le, &zeta) - g.inner(&eta, &lz)).abs() / scale.max(1e-300));
            let energy = g.inner(&le, &eta);
            let gfield = degen_actuator::dual::compute_g(m, &eta);
            let paired = g.inner_omega1(beta.values(), &gfield[g.omega1()]);
            worst = worst.max((energy - paired).abs() / energy.abs().max(1e-300));
        }
        Ok((
            worst,
            "relative defect of symmetry and energy pairing".into(),
        ))
    })
}

fn duality(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "duality",
        anchor: "V = -N^2 / 2",
        tolerance: DUALITY_TOL,
    };
    let r = &cx.dual;
    let measured = r.duality_residual / (r.min_norm * r.min_norm).max(1.0);
    let mut rec = check.at_most(
        measured,
        format!(
            "N = {:.10e}, V = {:.10e}, converged {}",
            r.min_norm, r.value, r.converged
        ),
    );
    rec.passed &= r.converged;
    rec
}

fn admissibility(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "admissibility",
        anchor: "||y(T; u*) - y_d|| <= eps0",
        tolerance: ADMISSIBLE_SLACK,
    };
    let eps0 = cx.cfg.problem.eps0;
    let r = &cx.dual;
    check.at_most(
        r.terminal_residual / eps0 - 1.0,
        format!(
            "terminal residual {:.10e}, eps0 {eps0}",
            r.terminal_residual
        ),
    )
}

fn euler_lagrange(cx: &Context) -> AuditRecord {
    let tol = EL_FACTOR * cx.cfg.solver.tol;
    let check = Check {
        name: "euler_lagrange",
        anchor: "Lambda_beta eta* + y(T; 0) - y_d + eps0 eta* / ||eta*|| = 0",
        tolerance: tol,
    };
    let r = &cx.dual;
    if !r.assumption_h {
        return check.at_most(0.0, "free evolution already within eps0; eta* = 0".into());
    }
    check.at_most(
        r.el_residual,
        format!(
            "residual norm at the minimiser, {} iterations",
            r.iterations
        ),
    )
}

fn alignment(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "alignment",
        anchor: "<y(T; u*) - y_d, eta*> = -eps0 ||eta*||",
        tolerance: ALIGNMENT_TOL,
    };
    check.run(|| {
        let m = cx.model;
        let r = &cx.dual;
        let norm = m.grid.norm(&r.eta_star);
        if norm == 0.0 {
            return Ok((0.0, "eta* = 0".into()));
        }
        let p = DualProblem::new(
            m,
            cx.beta.clone(),
            cx.y0.clone(),
            cx.y_d.clone(),
            cx.cfg.problem.eps0,
        )
        .map_err(|e| e.to_string())?;
        let u = extract_control(m, &cx.beta, &r.eta_star);
        let lhs = m
            .grid
            .inner(&p.terminal_state(&u).sub(&cx.y_d), &r.eta_star);
        let rhs = -cx.cfg.problem.eps0 * norm;
        Ok((
            (lhs - rhs).abs() / rhs.abs(),
            format!("lhs {lhs:.10e}, rhs {rhs:.10e}"),
        ))
    })
}

fn min_norm_oracle(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "min_norm_oracle",
        anchor: "N = min { ||u|| : ||y(T; u) - y_d|| <= eps0 }",
        tolerance: ORACLE_TOL,
    };
    check.run(|| {
        let m = cx.oracle_model()?;
        let g = &m.grid;
        let y0 = match &cx.cfg.problem.y0 {
            InitialState::Field(f) => resample(f, g, default_bump(g)),
            InitialState::Mode(_) => default_bump(g),
        };
        let y_d = resample(&cx.cfg.problem.y_d, g, g.zeros());
        let beta = ActuatorDensity::uniform(g, cx.cfg.problem.lambda).map_err(|e| e.to_string())?;
        let eps0 = cx.cfg.problem.eps0;
        let o = oracle_min_norm(&m, &beta, &y0, &y_d, eps0).map_err(|e| e.to_string())?;
        let p = DualProblem::new(&m, beta, y0, y_d, eps0).map_err(|e| e.to_string())?;
        let r = p.minimize(cx.dual_options());
        if !r.converged {
            return Err("dual solver did not converge on the oracle grid".into());
        }
        let err = (r.min_norm - o.norm).abs() / o.norm.max(1e-300);
        let err = if o.norm == 0.0 { r.min_norm } else { err };
        Ok((
            err,
            format!(
                "{} cells, {} steps: dual {:.10e}, oracle {:.10e}",
                g.n(),
                m.tg.n_steps(),
                r.min_norm,
                o.norm
            ),
        ))
    })
}

fn scaling_law(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "scaling_law",
        anchor: "N(mu y0, mu y_d, mu eps0) = mu N(y0, y_d, eps0)",
        tolerance: SCALING_TOL,
    };
    check.run(|| {
        let mu = SCALING_FACTOR;
        let eps0 = cx.cfg.problem.eps0;
        let p = DualProblem::new(
            cx.model,
            cx.beta.clone(),
            cx.y0.scaled(mu),
            cx.y_d.scaled(mu),
            mu * eps0,
        )
        .map_err(|e| e.to_string())?;
        let r = p.minimize(cx.dual_options());
        if !(r.converged && cx.dual.converged) {
            return Err("dual solver did not converge".into());
        }
        let base = cx.dual.min_norm;
        let err = if base == 0.0 {
            r.min_norm
        } else {
            (r.min_norm - mu * base).abs() / (mu * base)
        };
        Ok((
            err,
            format!("mu = {mu}: {:.10e} vs {:.10e}", r.min_norm, mu * base),
        ))
    })
}

fn projection(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "projection",
        anchor: "0 <= beta <= 1, Sum w beta = lambda |Omega_1|, proj(proj(v)) = proj(v)",
        tolerance: MASS_TOL,
    };
    check.run(|| {
        let g = &cx.model.grid;
        let lambda = cx.cfg.problem.lambda;
        let mut rng = cx.rng("audit-projection");
        let mut worst = 0.0f64;
        for _ in 0..cx.cfg.verify.samples {
            let raw: Vec<f64> = (0..g.omega1_len())
                .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let b = ActuatorDensity::project(g, &raw, lambda).map_err(|e| e.to_string())?;
            let mass: f64 = b
                .values()
                .iter()
                .zip(g.omega1_widths())
                .map(|(b, w)| b * w)
                .sum();
            worst = worst.max((mass - lambda * g.omega1_measure()).abs());
            let again =
                ActuatorDensity::project(g, b.values(), lambda).map_err(|e| e.to_string())?;
            let moved = again
                .values()
                .iter()
                .zip(b.values())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            worst = worst.max(moved);
        }
        Ok((
            worst,
            "mass defect and idempotence over random inputs".into(),
        ))
    })
}

fn bathtub(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "bathtub",
        anchor: "beta* = 1 on {H > c}, 0 on {H < c}, maximises <beta, H> over admissible densities",
        tolerance: BATHTUB_TOL,
    };
    check.run(|| {
        let g = &cx.model.grid;
        let inst = GameInstance::new(
            cx.model,
            cx.y_d.clone(),
            cx.cfg.problem.eps0,
            cx.cfg.problem.lambda,
        )
        .map_err(|e| e.to_string())?;
        let mut rng = cx.rng("audit-bathtub");
        let mut worst = f64::NEG_INFINITY;
        let mut fractional = 0;
        for _ in 0..cx.cfg.verify.samples.min(20) {
            let h: Vec<f64> = (0..g.omega1_len())
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let (best, _) = inst.bathtub(&h).map_err(|e| e.to_string())?;
            fractional = fractional.max(best.fractional_cells());
            let top = g.inner_omega1(best.values(), &h);
            for _ in 0..50 {
                let other = cx.random_density(&mut rng)?;
                let v = g.inner_omega1(other.values(), &h);
                worst = worst.max((v - top) / top.abs().max(1.0));
            }
        }
        if fractional > 1 {
            return Err(format!(
                "{fractional} fractional cells in a bathtub maximiser"
            ));
        }
        Ok((
            worst.max(0.0),
            "largest relative excess of a random density".into(),
        ))
    })
}

fn payoff_affinity(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "payoff_affinity",
        anchor: "J(t b1 + (1 - t) b2, eta) = t J(b1, eta) + (1 - t) J(b2, eta)",
        tolerance: AFFINE_TOL,
    };
    check.run(|| {
        let g = &cx.model.grid;
        let inst = GameInstance::new(
            cx.model,
            cx.y_d.clone(),
            cx.cfg.problem.eps0,
            cx.cfg.problem.lambda,
        )
        .map_err(|e| e.to_string())?;
        let mut rng = cx.rng("audit-affinity");
        let mut worst = 0.0f64;
        for _ in 0..cx.cfg.verify.samples.min(20) {
            let b1 = cx.random_density(&mut rng)?;
            let b2 = cx.random_density(&mut rng)?;
            let t: f64 = rng.random();
            let bt = ActuatorDensity::combine(g, &[(t, &b1), (1.0 - t, &b2)])
                .map_err(|e| e.to_string())?;
            let eta = cx.random_field(&mut rng);
            let (j1, j2, jt) = (
                inst.value(&b1, &eta),
                inst.value(&b2, &eta),
                inst.value(&bt, &eta),
            );
            worst =
                worst.max((jt - t * j1 - (1.0 - t) * j2).abs() / j1.abs().max(j2.abs()).max(1.0));
        }
        Ok((worst, "relative defect over random pairs".into()))
    })
}

fn game_weak_duality(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "game_weak_duality",
        anchor: "V- <= V+ in every double-oracle round",
        tolerance: WEAK_DUALITY_TOL,
    };
    check.run(|| {
        let (_, r) = cx.game.as_ref().map_err(|e| e.clone())?;
        let worst = r
            .rounds
            .iter()
            .map(|k| (k.v_minus - k.v_plus) / k.v_plus.abs().max(1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((
            worst.max(0.0),
            format!(
                "{} rounds, V- = {:.6e}, V+ = {:.6e}, converged {}",
                r.rounds.len(),
                r.v_minus,
                r.v_plus,
                r.converged
            ),
        ))
    })
}

fn level_set_size(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "level_set_size",
        anchor: "|omega*| = round(lambda |Omega_1| / dx) cells, up to one",
        tolerance: 1.0,
    };
    check.run(|| {
        let (_, r) = cx.game.as_ref().map_err(|e| e.clone())?;
        let g = &cx.model.grid;
        let selected = r.omega_star.iter().filter(|&&b| b).count() as f64;
        let target = (cx.cfg.problem.lambda * g.omega1_measure() / g.dx()).round();
        Ok((
            (selected - target).abs(),
            format!("{selected} cells selected, target {target}"),
        ))
    })
}

fn lowrank_oracle(cx: &Context) -> AuditRecord {
    let check = Check {
        name: "lowrank_oracle",
        anchor: "inf over the ball <= inf over the leading eigen-directions",
        tolerance: LOWRANK_TOL,
    };
    check.run(|| {
        let m = cx.oracle_model()?;
        let g = &m.grid;
        let y_d = resample(&cx.cfg.problem.y_d, g, g.zeros());
        let inst = GameInstance::new(&m, y_d, cx.cfg.problem.eps0, cx.cfg.problem.lambda)
            .map_err(|e| e.to_string())?;
        let ball = BallSpec::build(&inst, cx.cfg.solver.c_lambda_samples, cx.seed)
            .map_err(|e| e.to_string())?;
        let beta = ActuatorDensity::uniform(g, cx.cfg.problem.lambda).map_err(|e| e.to_string())?;
        let inner = inner_inf(&inst, &beta, &ball, &cx.inner_options(), &[]);
        let lr =
            lowrank_inner_oracle(&inst, &beta, &ball, 2, LOWRANK_NET).map_err(|e| e.to_string())?;
        Ok((
            (inner.value - lr).max(0.0),
            format!("inner {:.10e}, rank-2 search {lr:.10e}", inner.value),
        ))
    })
}

const AUDITS: [Audit; 16] = [
    operator_symmetry,
    operator_dissipative,
    adjoint_identity,
    gramian_pairing,
    duality,
    admissibility,
    euler_lagrange,
    alignment,
    min_norm_oracle,
    scaling_law,
    projection,
    bathtub,
    payoff_affinity,
    game_weak_duality,
    level_set_size,
    lowrank_oracle,
];

/// All audits, in a fixed order.
pub fn run_all(cx: &Context) -> Vec<AuditRecord> {
    par::map(&AUDITS, |a| a(cx))
}
