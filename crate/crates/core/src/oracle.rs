//! Brute-force reference solvers. They reuse the time stepping of
//! [`crate::solver`] (materialised into dense matrices) but none of the
//! optimisation code, so agreement with the main solvers isolates optimiser
//! error. All are size-capped and meant for tests and audits.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::Serialize;

use crate::density::ActuatorDensity;
use crate::error::{Error, Result};
use crate::game::{inner_inf, BallSpec, GameInstance, InnerOptions};
use crate::grid::{Field, SpatialGrid};
use crate::model::Model;
use crate::par;
use crate::solver::ControlSignal;

/// `y(T; y0, beta; u) = K u + b` with `u` stacked step-major over the window.
#[derive(Debug, Clone)]
pub struct DenseControlOperator {
    pub k: DMatrix<f64>,
    /// Free terminal state `y(T; y0; 0)`.
    pub offset: Field,
}

impl DenseControlOperator {
    /// Largest control dimension `n * window_len` accepted.
    pub const MAX_CONTROLS: usize = 4096;

    pub fn new(model: &Model, beta: &ActuatorDensity, y0: &[f64]) -> Result<Self> {
        let n = model.grid.n();
        let tg = &model.tg;
        let w = tg.window_len();
        if n * w > Self::MAX_CONTROLS {
            return Err(Error::InvalidArgument(format!(
                "dense control operator too large: {} controls (cap {})",
                n * w,
                Self::MAX_CONTROLS
            )));
        }
        let steps = tg.n_steps();
        let dt = tg.dt();
        let sb = beta.full_sqrt();
        // a source s on step k reaches the terminal time as dt R^{N-k} s
        let trajs = par::map_range(n, |i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            model.prop.solve_forward(&e, None)
        });
        let mut k = DMatrix::zeros(n, n * w);
        for (c, step) in tg.window().enumerate() {
            for i in 0..n {
                if sb[i] == 0.0 {
                    continue;
                }
                let col = trajs[i].at(steps - step);
                for r in 0..n {
                    k[(r, c * n + i)] = dt * sb[i] * col[r];
                }
            }
        }
        Ok(Self {
            k,
            offset: model.prop.free_terminal(y0),
        })
    }

    pub fn apply(&self, u: &ControlSignal) -> Field {
        let v = &self.k * DVector::from_column_slice(u.values());
        Field(
            v.iter()
                .zip(self.offset.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinNormOracle {
    /// `min ||u||` subject to `||K u + b - y_d|| <= eps0`.
    pub norm: f64,
    pub gamma: f64,
    pub residual: f64,
    /// `(gamma, residual)` along the bisection.
    pub trace: Vec<(f64, f64)>,
}

/// Minimum-norm control by bisection on the Tikhonov parameter, computed
/// from the SVD of the dense control operator.
pub fn oracle_min_norm(
    model: &Model,
    beta: &ActuatorDensity,
    y0: &[f64],
    y_d: &[f64],
    eps0: f64,
) -> Result<MinNormOracle> {
    let op = DenseControlOperator::new(model, beta, y0)?;
    let g = &model.grid;
    let miss = Field(y_d.to_vec()).sub(&op.offset);
    if g.norm(&miss) <= eps0 {
        return Ok(MinNormOracle {
            norm: 0.0,
            gamma: f64::INFINITY,
            residual: g.norm(&miss),
            trace: Vec::new(),
        });
    }
    // orthonormal coordinates: u~ = sqrt(dx dt) u, r~ = sqrt(dx) r
    let dt = model.tg.dt();
    let kt = &op.k / dt.sqrt();
    let c = DVector::from_column_slice(&miss) * g.dx().sqrt();
    let svd = SVD::new(kt, true, false);
    let u = svd.u.as_ref().expect("left singular vectors");
    let proj = u.transpose() * &c;
    let perp_sq = (c.norm_squared() - proj.norm_squared()).max(0.0);
    let s = &svd.singular_values;
    let residual = |gamma: f64| -> f64 {
        let inside: f64 = proj
            .iter()
            .zip(s.iter())
            .map(|(p, s)| (gamma * p / (s * s + gamma)).powi(2))
            .sum();
        (inside + perp_sq).sqrt()
    };
    let norm_at = |gamma: f64| -> f64 {
        proj.iter()
            .zip(s.iter())
            .map(|(p, s)| (s * p / (s * s + gamma)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (mut lo, mut hi) = (1e-14f64, 1e14f64);
    let floor = residual(lo);
    if floor > eps0 {
        return Err(Error::InfeasibleAtResolution { floor, eps0 });
    }
    let mut trace = vec![(lo, floor), (hi, residual(hi))];
    let mut gamma = lo;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let r = residual(mid);
        trace.push((mid, r));
        if r > eps0 {
            hi = mid;
        } else {
            lo = mid;
            gamma = mid;
            if r >= eps0 * (1.0 - 1e-8) {
                break;
            }
        }
    }
    Ok(MinNormOracle {
        norm: norm_at(gamma),
        gamma,
        residual: residual(gamma),
        trace,
    })
}

/// How [`oracle_best_actuator`] scores a mask.
#[derive(Debug, Clone)]
pub enum ActuatorScore {
    /// `Phi(chi_mask)` from the inner solver, i.e. the worst case over the
    /// unit ball of initial states.
    WorstCase { ball: BallSpec, inner: InnerOptions },
    /// `-max_{y0} N(y0, chi_mask)^2 / 2` over a finite set, with `N` from
    /// [`oracle_min_norm`].
    InitialStates(Vec<Field>),
}

#[derive(Debug, Clone, Serialize)]
pub struct Enumeration {
    pub best_mask: Vec<bool>,
    /// Largest score; scores are game values `-N^2 / 2`, higher is better.
    pub best_value: f64,
    /// Every mask with its score, in lexicographic enumeration order.
    pub scores: Vec<(Vec<bool>, f64)>,
}

impl Enumeration {
    /// Fraction of masks scoring strictly better than `value`.
    pub fn rank_fraction(&self, value: f64) -> f64 {
        let better = self.scores.iter().filter(|(_, s)| *s > value).count();
        better as f64 / self.scores.len() as f64
    }
}

pub fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All `k`-subsets of `0..m` as masks, lexicographic in the index lists.
pub fn masks(m: usize, k: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut mask = vec![false; m];
        for &i in &idx {
            mask[i] = true;
        }
        out.push(mask);
        // advance to the next combination
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == m - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exhaustive search over binary actuators with `k_cells` of the `Omega_1`
/// cells. Rejects `C(m, k) > budget`.
pub fn oracle_best_actuator(
    inst: &GameInstance,
    k_cells: usize,
    score: &ActuatorScore,
    budget: u128,
) -> Result<Enumeration> {
    let g = inst.grid();
    let m = g.omega1_len();
    if k_cells == 0 || k_cells > m {
        return Err(Error::InvalidArgument(format!(
            "k_cells = {k_cells} must lie in 1..={m}"
        )));
    }
    let count = binomial(m, k_cells);
    if count > budget {
        return Err(Error::BudgetExceeded {
            m,
            k: k_cells,
            count,
            budget,
        });
    }
    let all = masks(m, k_cells);
    let scores = par::map(&all, |mask| -> Result<f64> {
        let beta = ActuatorDensity::from_mask(g, mask)?;
        match score {
            ActuatorScore::WorstCase { ball, inner } => {
                Ok(inner_inf(inst, &beta, ball, inner, &[]).value)
            }
            ActuatorScore::InitialStates(states) => {
                let mut worst = 0.0f64;
                for y0 in states {
                    let r = oracle_min_norm(inst.model(), &beta, y0, inst.y_d(), inst.eps0())?;
                    worst = worst.max(r.norm);
                }
                Ok(-0.5 * worst * worst)
            }
        }
    });
    let mut out = Vec::with_capacity(all.len());
    for (mask, s) in all.into_iter().zip(scores) {
        out.push((mask, s?));
    }
    let (best_mask, best_value) = out
        .iter()
        .fold((None, f64::NEG_INFINITY), |acc, (mask, s)| {
            if *s > acc.1 {
                (Some(mask.clone()), *s)
            } else {
                acc
            }
        });
    Ok(Enumeration {
        best_mask: best_mask.expect("at least one mask"),
        best_value,
        scores: out,
    })
}

/// `inf J(beta, .)` over `span{v_1..v_rank} ∩ {||eta|| <= delta0}`, where `v_j` are
/// the leading eigenvectors of `Lambda_beta`. Directions are taken from a net
/// (`net_points` on the circle for rank 2, a `net_points x net_points`
/// latitude-longitude grid for rank 3) and the radius is minimised exactly:
/// along a unit direction `d`, `J(s d) = a s^2 / 2 - b s` with
/// `a = <d, Lambda d>`, `b = ||P d|| + <y_d, d> - eps0`.
pub fn lowrank_inner_oracle(
    inst: &GameInstance,
    beta: &ActuatorDensity,
    ball: &BallSpec,
    rank: usize,
    net_points: usize,
) -> Result<f64> {
    if !(1..=3).contains(&rank) {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} must be 1, 2 or 3"
        )));
    }
    let g = inst.grid();
    let n = g.n();
    let eig = SymmetricEigen::new(inst.gramian_matrix(beta.values()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    // basis in cell values, unit in the quadrature norm
    let basis: Vec<DVector<f64>> = order[..rank.min(n)]
        .iter()
        .map(|&k| eig.eigenvectors.column(k) / g.dx().sqrt())
        .collect();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    match rank {
        1 => {
            dirs.push(vec![1.0]);
            dirs.push(vec![-1.0]);
        }
        2 => {
            for k in 0..net_points.max(4) {
                let t = 2.0 * std::f64::consts::PI * k as f64 / net_points.max(4) as f64;
                dirs.push(vec![t.cos(), t.sin()]);
            }
        }
        _ => {
            let np = net_points.max(4);
            for a in 0..np {
                let theta = std::f64::consts::PI * (a as f64 + 0.5) / np as f64;
                for b in 0..np {
                    let psi = 2.0 * std::f64::consts::PI * b as f64 / np as f64;
                    dirs.push(vec![
                        theta.sin() * psi.cos(),
                        theta.sin() * psi.sin(),
                        theta.cos(),
                    ]);
                }
            }
        }
    }
    let values = par::map(&dirs, |c| {
        let mut d = DVector::zeros(n);
        for (ck, v) in c.iter().zip(&basis) {
            d += v * *ck;
        }
        let a = g.inner_omega1(beta.values(), &inst.g_omega1(d.as_slice()));
        let b =
            g.norm(&inst.observe(d.as_slice())) + g.inner(inst.y_d(), d.as_slice()) - inst.eps0();
        if b <= 0.0 {
            return 0.0;
        }
        let s = if a > 0.0 {
            (b / a).min(ball.delta0)
        } else {
            ball.delta0
        };
        0.5 * a * s * s - b * s
    });
    Ok(values.into_iter().fold(0.0, f64::min))
}

/// Central-difference gradient of `f` in the quadrature inner product
/// (partial derivatives divided by the cell width).
pub fn fd_gradient(grid: &SpatialGrid, f: impl Fn(&[f64]) -> f64, eta: &[f64], step: f64) -> Field {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut x = eta.to_vec();
    let mut out = vec![0.0; eta.len()];
    for i in 0..eta.len() {
        let orig = x[i];
        x[i] = orig + step;
        let fp = f(&x);
        x[i] = orig - step;
        let fm = f(&x);
        x[i] = orig;
        out[i] = (fp - fm) / (2.0 * step) / grid.widths()[i];
    }
    Field(out)
}

/// Value of a small zero-sum game (row player maximises) by support
/// enumeration: every pair of equal-size supports is tested for an
/// equalising equilibrium. Intended for nondegenerate games up to about 6x6.
pub fn matrix_game_value_exact(payoff: &DMatrix<f64>) -> Option<f64> {
    let (r, c) = payoff.shape();
    let subsets = |len: usize, s: usize| -> Vec<Vec<usize>> {
        masks(len, s)
            .into_iter()
            .map(|m| (0..len).filter(|&i| m[i]).collect())
            .collect()
    };
    // equalise the opponent on `cols` with weights on `rows`
    let equalise = |rows: &[usize], cols: &[usize], transpose: bool| -> Option<(Vec<f64>, f64)> {
        let s = rows.len();
        let mut a = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (e, &k) in cols.iter().enumerate() {
            for (j, &row) in rows.iter().enumerate() {
                a[(e, j)] = if transpose {
                    payoff[(k, row)]
                } else {
                    payoff[(row, k)]
                };
            }
            a[(e, s)] = -1.0;
        }
        for j in 0..s {
            a[(s, j)] = 1.0;
        }
        rhs[s] = 1.0;
        let sol = a.lu().solve(&rhs)?;
        let w: Vec<f64> = sol.iter().take(s).cloned().collect();
        if w.iter().any(|v| *v < -1e-12) {
            return None;
        }
        Some((w, sol[s]))
    };
    for s in 1..=r.min(c) {
        for rows in subsets(r, s) {
            for cols in subsets(c, s) {
                let Some((p, v)) = equalise(&rows, &cols, false) else {
                    continue;
                };
                let Some((q, v2)) = equalise(&cols, &rows, true) else {
                    continue;
                };
                if (v - v2).abs() > 1e-9 * v.abs().max(1.0) {
                    continue;
                }
                let col_ok = (0..c).all(|k| {
                    let pay: f64 = rows.iter().zip(&p).map(|(&j, w)| w * payoff[(j, k)]).sum();
                    pay >= v - 1e-9
                });
                let row_ok = (0..r).all(|j| {
                    let pay: f64 = cols.iter().zip(&q).map(|(&k, w)| w * payoff[(j, k)]).sum();
                    pay <= v + 1e-9
                });
                if col_ok && row_ok {
                    return Some(v);
                }
            }
        }
    }
    None
}
