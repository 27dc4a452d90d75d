//! Mixed-strategy value of the placement game by a double-oracle loop.
//!
//! Finite strategy sets of densities and adjoint data are grown by best
//! responses to the equilibrium of the restricted matrix game. Every round
//! gives two one-sided values:
//!
//! * `V+ = min_rounds sup_beta J~(beta, q)`, exact through the bathtub rule;
//! * `V- = max_rounds min(Phi(beta_bar), min_{eta in E} J(beta_bar, eta))` with
//!   `beta_bar = Sum p_j beta_j`, using the best inner value found.
//!
//! Because the second term ranges over the current adjoint set, `V- <= V+`
//! holds by construction at every round.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    inner_inf, restricted_game_value, BallSpec, DiracMixture, GameInstance, InnerOptions,
    MatrixGameOptions,
};
use crate::density::{extract_level_set, ActuatorDensity, LevelSet};
use crate::error::Result;
use crate::grid::Field;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy)]
pub struct DoubleOracleOptions {
    pub max_rounds: usize,
    /// Stop once `V+ - V- <= max(gap_abs, gap_rel |V-|)`.
    pub gap_rel: f64,
    pub gap_abs: f64,
    /// Minimal improvement for a best response to enter its strategy set.
    pub improve_tol: f64,
    pub inner: InnerOptions,
    pub matrix: MatrixGameOptions,
}

impl Default for DoubleOracleOptions {
    fn default() -> Self {
        Self {
            max_rounds: 40,
            gap_rel: 0.05,
            gap_abs: 1e-6,
            improve_tol: 1e-12,
            inner: InnerOptions::default(),
            matrix: MatrixGameOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub v_minus: f64,
    pub v_plus: f64,
    pub restricted_value: f64,
    pub n_densities: usize,
    pub n_adjoints: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GameResult {
    /// Bathtub best response to `h_star` (at most one fractional cell).
    pub beta_star: ActuatorDensity,
    /// The averaged density `Sum p_j beta_j` certifying `v_minus`.
    pub beta_mixed: ActuatorDensity,
    pub h_star: DiracMixture,
    pub v_minus: f64,
    pub v_plus: f64,
    pub gap: f64,
    /// Bathtub threshold of `beta_star`.
    pub level_threshold: f64,
    /// `H_{h_star}` on the `Omega_1` cells.
    pub h_field: Field,
    pub level_set: LevelSet,
    pub omega_star: Vec<bool>,
    pub fractional_cells: usize,
    pub rounds: Vec<RoundRecord>,
    pub converged: bool,
}

struct AdjointAtom {
    eta: Field,
    g: Vec<f64>,
    offset: f64,
}

impl AdjointAtom {
    fn new(inst: &GameInstance, eta: Field) -> Self {
        Self {
            g: inst.g_omega1(&eta),
            offset: inst.offset_value(&eta),
            eta,
        }
    }

    fn value(&self, inst: &GameInstance, beta: &[f64]) -> f64 {
        inst.value_from_parts(beta, &self.g, self.offset)
    }
}

fn h_field(atoms: &[AdjointAtom], q: &[f64], m: usize) -> Vec<f64> {
    let mut h = vec![0.0; m];
    for (a, w) in atoms.iter().zip(q) {
        for (o, g) in h.iter_mut().zip(&a.g) {
            *o += w * g;
        }
    }
    h
}

fn same_density(a: &ActuatorDensity, b: &ActuatorDensity) -> bool {
    a.values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| (x - y).abs() <= 1e-12)
}

pub fn double_oracle(
    inst: &GameInstance,
    ball: &BallSpec,
    init_beta: &ActuatorDensity,
    opts: &DoubleOracleOptions,
) -> Result<GameResult> {
    let g = inst.grid();
    let m = g.omega1_len();
    let inner_at = |beta: &ActuatorDensity, round: usize, extra: &[Field]| {
        let mut o = opts.inner;
        o.seed = derive_seed(opts.inner.seed, "double-oracle", round as u64);
        inner_inf(inst, beta, ball, &o, extra)
    };

    let mut betas = vec![init_beta.clone()];
    let first = inner_at(init_beta, 0, &[]);
    let mut atoms = vec![AdjointAtom::new(inst, first.eta)];
    // averaged densities with their inner values
    let mut certified: Vec<(ActuatorDensity, f64)> = vec![(init_beta.clone(), first.value)];

    let mut v_plus = f64::INFINITY;
    let mut best_q: Vec<f64> = vec![1.0];
    let mut best_q_atoms = 1;
    let mut v_minus = f64::NEG_INFINITY;
    let mut best_mixed = init_beta.clone();
    let mut rounds = Vec::new();
    let mut converged = false;

    for round in 1..=opts.max_rounds.max(1) {
        let payoff = DMatrix::from_fn(betas.len(), atoms.len(), |j, k| {
            atoms[k].value(inst, betas[j].values())
        });
        let sol = restricted_game_value(&payoff, &opts.matrix);

        // density best response to q
        let h = h_field(&atoms, &sol.q, m);
        let half: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
        let (beta_br, _) = inst.bathtub(&half)?;
        let vp: f64 = atoms
            .iter()
            .zip(&sol.q)
            .map(|(a, w)| w * a.value(inst, beta_br.values()))
            .sum();
        if vp < v_plus {
            v_plus = vp;
            best_q = sol.q.clone();
            best_q_atoms = atoms.len();
        }

        // adjoint best response to the averaged density
        let parts: Vec<(f64, &ActuatorDensity)> = sol.p.iter().cloned().zip(betas.iter()).collect();
        let beta_bar = ActuatorDensity::combine(g, &parts)?;
        let extra: Vec<Field> = atoms.iter().map(|a| a.eta.clone()).collect();
        let resp = inner_at(&beta_bar, round, &extra);
        let restricted_min = atoms
            .iter()
            .map(|a| a.value(inst, beta_bar.values()))
            .fold(f64::INFINITY, f64::min);
        let add_eta =
            resp.value < restricted_min - opts.improve_tol * restricted_min.abs().max(1.0);
        if add_eta {
            atoms.push(AdjointAtom::new(inst, resp.eta));
        }
        certified.push((beta_bar, resp.value));

        let add_beta = vp > sol.upper + opts.improve_tol * vp.abs().max(1.0)
            && !betas.iter().any(|b| same_density(b, &beta_br));
        if add_beta {
            betas.push(beta_br);
        }

        // re-certify every averaged density against the grown adjoint set
        v_minus = f64::NEG_INFINITY;
        for (b, phi) in &certified {
            let floor = atoms
                .iter()
                .map(|a| a.value(inst, b.values()))
                .fold(*phi, f64::min);
            if floor > v_minus {
                v_minus = floor;
                best_mixed = b.clone();
            }
        }

        rounds.push(RoundRecord {
            round,
            v_minus,
            v_plus,
            restricted_value: sol.value,
            n_densities: betas.len(),
            n_adjoints: atoms.len(),
        });
        let gap = v_plus - v_minus;
        if gap <= opts.gap_abs.max(opts.gap_rel * v_minus.abs()) {
            converged = true;
            break;
        }
        if !add_eta && !add_beta {
            break;
        }
    }

    let h_atoms: Vec<(f64, Field)> = best_q
        .iter()
        .zip(&atoms[..best_q_atoms])
        .map(|(w, a)| (*w, a.eta.clone()))
        .collect();
    let total: f64 = h_atoms.iter().map(|(w, _)| w).sum();
    let h_atoms = h_atoms.into_iter().map(|(w, e)| (w / total, e)).collect();
    let h_star = DiracMixture::new(inst, h_atoms, ball.delta0)?;
    let h = Field(h_field(&atoms[..best_q_atoms], &best_q, m));
    let half: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
    let (beta_star, level_threshold) = inst.bathtub(&half)?;
    let level_set = extract_level_set(&h, g.omega1_widths(), inst.mass());
    Ok(GameResult {
        fractional_cells: beta_star.fractional_cells(),
        omega_star: level_set.mask.clone(),
        beta_star,
        beta_mixed: best_mixed,
        h_star,
        gap: v_plus - v_minus,
        v_minus,
        v_plus,
        level_threshold,
        h_field: h,
        level_set,
        rounds,
        converged,
    })
}
