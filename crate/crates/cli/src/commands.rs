//! The four pipelines behind the subcommands. Each fills a [`RunRecord`],
//! writes its dumps and returns the process exit code.

use anyhow::Result;

use degen_actuator::dual::{compute_g, extract_control, DualProblem, DualSolverOptions};
use degen_actuator::game::{
    compute_delta0, double_oracle, estimate_c_lambda, find_yhat0, inner_inf, observability_ratio,
    outer_sup, BallSpec, DoubleOracleOptions, GameInstance, InnerOptions, OuterOptions,
};
use degen_actuator::{ActuatorDensity, Error, Model};

use crate::audit::{self, Context};
use crate::config::{ConfigError, ExperimentConfig, InitialState};
use crate::record::{OutputDir, RunRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

fn dual_options(cfg: &ExperimentConfig) -> DualSolverOptions {
    DualSolverOptions {
        tol: cfg.solver.tol,
        max_iters: cfg.solver.max_iters,
    }
}

fn inner_options(cfg: &ExperimentConfig, seed: u64) -> InnerOptions {
    InnerOptions {
        n_starts: cfg.solver.n_starts,
        seed,
        tol: cfg.solver.inner_tol,
        max_iters: cfg.solver.inner_max_iters,
    }
}

fn require_worst_case(cfg: &ExperimentConfig, command: &str) -> Result<(), ConfigError> {
    match cfg.problem.y0 {
        InitialState::Mode(_) => Ok(()),
        InitialState::Field(_) => Err(ConfigError(format!(
            "{command} optimises over all unit initial states; set problem.y0 to \"worst-case\""
        ))),
    }
}

/// Instance-level failures of the target are configuration problems.
fn instance_error(e: Error) -> anyhow::Error {
    match e {
        Error::RangeUnreachable { .. }
        | Error::InfeasibleAtResolution { .. }
        | Error::LengthMismatch { .. } => ConfigError(format!("problem.y_d: {e}")).into(),
        other => other.into(),
    }
}

/// `yhat0`, the observability constant and the ball radius, recorded as they
/// are computed.
fn build_ball(
    inst: &GameInstance,
    cfg: &ExperimentConfig,
    rec: &mut RunRecord,
) -> Result<BallSpec> {
    let g = inst.grid();
    let yhat0 = find_yhat0(inst, inst.y_d(), inst.eps0()).map_err(instance_error)?;
    let seed = rec.seeds.task("c-lambda");
    let est = estimate_c_lambda(inst, cfg.solver.c_lambda_samples, seed)?;
    let delta0 = compute_delta0(est.c_lambda_hat, inst.eps0(), g.norm(&yhat0));
    rec.output("yhat0_norm", g.norm(&yhat0));
    rec.output("c_lambda_hat", est.c_lambda_hat);
    rec.output("delta0", delta0);
    rec.diagnostic("c_lambda_max_ratio", est.max_ratio);
    rec.diagnostic("c_lambda_samples", est.samples);
    rec.diagnostic("c_lambda_degenerate_samples", est.degenerate);
    Ok(BallSpec::new(delta0, est.c_lambda_hat, yhat0)?)
}

pub fn solve_control(
    cfg: &ExperimentConfig,
    model: &Model,
    rec: &mut RunRecord,
    out: &OutputDir,
) -> Result<i32> {
    let g = &model.grid;
    let y0 = cfg.y0(g)?.ok_or_else(|| {
        ConfigError("solve-control needs an explicit problem.y0 field, not \"worst-case\"".into())
    })?;
    let y_d = cfg.y_d(g)?;
    let beta = cfg.beta(g)?;
    let p = DualProblem::new(model, beta.clone(), y0, y_d.clone(), cfg.problem.eps0)
        .map_err(ConfigError::from)?;
    let r = p.minimize(dual_options(cfg));

    rec.output("min_norm", r.min_norm);
    rec.output("dual_value", r.value);
    rec.output("duality_residual", r.duality_residual);
    rec.output("el_residual", r.el_residual);
    rec.output("terminal_residual", r.terminal_residual);
    rec.output("assumption_h", r.assumption_h);
    rec.output("free_residual", p.free_residual());
    rec.output("lambda", beta.lambda());
    let eta_norm = g.norm(&r.eta_star);
    rec.output("eta_norm", eta_norm);
    let u = extract_control(model, &beta, &r.eta_star);
    let terminal = p.terminal_state(&u);
    if eta_norm > 0.0 {
        let lhs = g.inner(&terminal.sub(&y_d), &r.eta_star);
        rec.output(
            "alignment_residual",
            (lhs + cfg.problem.eps0 * eta_norm).abs(),
        );
    }
    rec.diagnostic("iterations", r.iterations);
    rec.diagnostic("converged", r.converged);

    out.field(rec, "eta_star", g, &r.eta_star)?;
    out.field(rec, "terminal_state", g, &terminal)?;
    out.field(rec, "beta", g, &beta.full())?;
    // time-integrated control energy per cell: beta_i G_i(eta*)
    let energy: Vec<f64> = compute_g(model, &r.eta_star)
        .iter()
        .zip(beta.full())
        .map(|(gi, b)| gi * b)
        .collect();
    out.field(rec, "control_energy", g, &energy)?;

    if !r.converged {
        rec.warnings.push(format!(
            "dual solver stopped after {} iterations without converging",
            r.iterations
        ));
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

pub fn optimize_actuator(
    cfg: &ExperimentConfig,
    model: &Model,
    rec: &mut RunRecord,
    out: &OutputDir,
) -> Result<i32> {
    require_worst_case(cfg, "optimize-actuator")?;
    let g = &model.grid;
    let inst = GameInstance::new(model, cfg.y_d(g)?, cfg.problem.eps0, cfg.problem.lambda)
        .map_err(instance_error)?;
    let ball = build_ball(&inst, cfg, rec)?;

    let outer_opts = OuterOptions {
        max_iters: cfg.solver.outer_iters,
        cut_rounds: cfg.solver.cut_rounds,
        inner: inner_options(cfg, rec.seeds.task("outer")),
        ..Default::default()
    };
    let init = ActuatorDensity::uniform(g, cfg.problem.lambda)?;
    let outer = outer_sup(&inst, &ball, &init, &outer_opts)?;
    rec.output("outer_value", outer.value);
    rec.output("outer_model_bound", outer.model_bound);
    rec.diagnostic("outer_evaluations", outer.history.len());

    let do_opts = DoubleOracleOptions {
        max_rounds: cfg.solver.max_rounds,
        gap_rel: cfg.solver.gap_rel,
        gap_abs: cfg.solver.gap_abs,
        inner: inner_options(cfg, rec.seeds.task("double-oracle")),
        ..Default::default()
    };
    let game = double_oracle(&inst, &ball, &outer.beta, &do_opts)?;
    rec.output("v_minus", game.v_minus);
    rec.output("v_plus", game.v_plus);
    rec.output("gap", game.gap);
    rec.output("level_threshold", game.level_threshold);
    rec.output("level_set_threshold", game.level_set.threshold);
    rec.output("level_set_width", game.level_set.selected_width);
    rec.output("level_set_mismatch", game.level_set.mismatch);
    rec.output("level_set_degenerate", game.level_set.degenerate);
    rec.output(
        "omega_star_cells",
        game.omega_star.iter().filter(|&&b| b).count(),
    );
    rec.output("fractional_cells", game.fractional_cells);
    rec.output("weak_duality", game.v_minus <= game.v_plus);
    rec.diagnostic("rounds", &game.rounds);
    rec.diagnostic("converged", game.converged);

    let target = cfg
        .solver
        .gap_abs
        .max(cfg.solver.gap_rel * game.v_minus.abs());
    let gap_warning = !game.converged || game.gap > target;
    rec.output("gap_warning", gap_warning);
    if gap_warning {
        rec.warnings.push(format!(
            "duality gap {:.3e} above target {target:.3e} after {} rounds",
            game.gap,
            game.rounds.len()
        ));
    }

    out.field(rec, "beta_star", g, &game.beta_star.full())?;
    out.field(rec, "beta_mixed", g, &game.beta_mixed.full())?;
    out.field(rec, "beta_outer", g, &outer.beta.full())?;
    out.mask(rec, "omega_star", g, &game.omega_star)?;
    out.omega1_field(rec, "h_field", g, &game.h_field, 0.0)?;
    out.field(rec, "yhat0", g, &ball.yhat0)?;
    Ok(EXIT_OK)
}

pub fn game_value(
    cfg: &ExperimentConfig,
    model: &Model,
    rec: &mut RunRecord,
    out: &OutputDir,
) -> Result<i32> {
    let g = &model.grid;
    if let InitialState::Field(_) = cfg.problem.y0 {
        rec.warnings.push(
            "problem.y0 is ignored: the game value is taken over all unit initial states".into(),
        );
    }
    let inst = GameInstance::new(model, cfg.y_d(g)?, cfg.problem.eps0, cfg.problem.lambda)
        .map_err(instance_error)?;
    let beta = cfg.beta(g)?;
    if (beta.lambda() - cfg.problem.lambda).abs() > 1e-12 {
        return Err(ConfigError(format!(
            "problem.beta has volume fraction {} but problem.lambda = {}",
            beta.lambda(),
            cfg.problem.lambda
        ))
        .into());
    }
    let ball = build_ball(&inst, cfg, rec)?;
    let r = inner_inf(
        &inst,
        &beta,
        &ball,
        &inner_options(cfg, rec.seeds.task("inner")),
        &[],
    );
    let eta_norm = g.norm(&r.eta);
    rec.output("phi_value", r.value);
    rec.output("eta_norm", eta_norm);
    rec.output("ball_binding", eta_norm >= ball.delta0 * (1.0 - 1e-9));
    if eta_norm > 0.0 {
        rec.output(
            "observability_ratio",
            observability_ratio(&inst, &beta, &r.eta),
        );
    }
    rec.diagnostic("start_values", &r.start_values);
    rec.diagnostic("iterations", r.iterations);
    out.field(rec, "eta_hat", g, &r.eta)?;
    out.omega1_field(rec, "g_field", g, &inst.g_omega1(&r.eta), 0.0)?;
    out.field(rec, "beta", g, &beta.full())?;
    Ok(EXIT_OK)
}

pub fn verify(
    cfg: &ExperimentConfig,
    model: &Model,
    rec: &mut RunRecord,
    out: &OutputDir,
) -> Result<i32> {
    let g = &model.grid;
    let y0 = audit::audit_initial_state(cfg, g);
    let y_d = cfg.y_d(g)?;
    let beta = ActuatorDensity::uniform(g, cfg.problem.lambda)?;
    let dual = DualProblem::new(
        model,
        beta.clone(),
        y0.clone(),
        y_d.clone(),
        cfg.problem.eps0,
    )
    .map_err(ConfigError::from)?
    .minimize(dual_options(cfg));
    let audit_seed = rec.seeds.task("audit");
    let game = (|| -> Result<_, String> {
        let inst = GameInstance::new(model, y_d.clone(), cfg.problem.eps0, cfg.problem.lambda)
            .map_err(|e| e.to_string())?;
        let ball = BallSpec::build(&inst, cfg.solver.c_lambda_samples, audit_seed)
            .map_err(|e| e.to_string())?;
        let opts = DoubleOracleOptions {
            max_rounds: cfg.solver.max_rounds,
            gap_rel: cfg.solver.gap_rel,
            gap_abs: cfg.solver.gap_abs,
            inner: inner_options(cfg, audit_seed),
            ..Default::default()
        };
        let init = ActuatorDensity::uniform(g, cfg.problem.lambda).map_err(|e| e.to_string())?;
        let r = double_oracle(&inst, &ball, &init, &opts).map_err(|e| e.to_string())?;
        Ok((ball, r))
    })();
    if let Ok((_, r)) = &game {
        out.mask(rec, "omega_star", g, &r.omega_star)?;
    }
    out.field(rec, "eta_star", g, &dual.eta_star)?;
    let cx = Context {
        cfg,
        model,
        y0,
        y_d,
        beta,
        seed: audit_seed,
        dual,
        game,
    };
    rec.audits = audit::run_all(&cx);
    let failed: Vec<&str> = rec
        .audits
        .iter()
        .filter(|a| !a.passed)
        .map(|a| a.name)
        .collect();
    rec.output("audits_passed", rec.audits.len() - failed.len());
    rec.output("audits_failed", failed.len());
    for a in &rec.audits {
        rec.outputs
            .insert(format!("audit.{}", a.name), serde_json::json!(a.measured));
    }
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        rec.warnings
            .push(format!("failed audits: {}", failed.join(", ")));
        Ok(EXIT_VERIFY_FAILED)
    }
}
