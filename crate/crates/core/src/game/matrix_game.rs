//! Finite zero-sum games by optimistic multiplicative-weights self-play.
//!
//! The row player maximises `p^T M q`, the column player minimises it. Any
//! pair of strategies certifies `min_k (p^T M)_k <= value <= max_j (M q)_j`;
//! the best bound seen from either the running averages or the last
//! iterates is kept for each side.

use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct MatrixGameOptions {
    pub max_rounds: usize,
    /// Stop once the certified interval is shorter than this.
    pub gap_tol: f64,
}

impl Default for MatrixGameOptions {
    fn default() -> Self {
        Self {
            max_rounds: 10_000,
            gap_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixGameSolution {
    /// Row (maximiser) strategy.
    pub p: Vec<f64>,
    /// Column (minimiser) strategy.
    pub q: Vec<f64>,
    /// Midpoint of the certified interval.
    pub value: f64,
    /// `min_k (p^T M)_k`, guaranteed to the row player.
    pub lower: f64,
    /// `max_j (M q)_j`, conceded by the column player.
    pub upper: f64,
    pub rounds: usize,
}

impl MatrixGameSolution {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

fn softmax(scores: &[f64], out: &mut [f64]) {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - m).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

fn bounds(payoff: &DMatrix<f64>, p: &[f64], q: &[f64]) -> (f64, f64) {
    let (r, c) = payoff.shape();
    let lower = (0..c)
        .map(|k| (0..r).map(|j| p[j] * payoff[(j, k)]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let upper = (0..r)
        .map(|j| (0..c).map(|k| payoff[(j, k)] * q[k]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    (lower, upper)
}

/// Mixed equilibrium of the finite game with payoff matrix `payoff`.
pub fn restricted_game_value(
    payoff: &DMatrix<f64>,
    opts: &MatrixGameOptions,
) -> MatrixGameSolution {
    let (r, c) = payoff.shape();
    assert!(r > 0 && c > 0, "empty payoff matrix");
    let max = payoff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = payoff.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    let uniform = |k: usize| vec![1.0 / k as f64; k];
    if range <= 0.0 || r == 1 && c == 1 {
        let (lower, upper) = bounds(payoff, &uniform(r), &uniform(c));
        return MatrixGameSolution {
            p: uniform(r),
            q: uniform(c),
            value: 0.5 * (lower + upper),
            lower,
            upper,
            rounds: 0,
        };
    }
    let rate = 0.5 / range;
    let mut row_score = vec![0.0; r];
    let mut col_score = vec![0.0; c];
    let mut row_last = vec![0.0; r];
    let mut col_last = vec![0.0; c];
    let mut p = uniform(r);
    let mut q = uniform(c);
    let mut p_avg = vec![0.0; r];
    let mut q_avg = vec![0.0; c];
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best_pq = (p.clone(), q.clone());
    let mut rounds = 0;
    let mut tmp_r = vec![0.0; r];
    let mut tmp_c = vec![0.0; c];
    for t in 1..=opts.max_rounds {
        rounds = t;
        // payoff vectors against the current opponent
        let row_pay: Vec<f64> = (0..r)
            .map(|j| (0..c).map(|k| payoff[(j, k)] * q[k]).sum())
            .collect();
        let col_pay: Vec<f64> = (0..c)
            .map(|k| (0..r).map(|j| p[j] * payoff[(j, k)]).sum())
            .collect();
        row_score
            .iter_mut()
            .zip(&row_pay)
            .for_each(|(s, p)| *s += p);
        row_last.copy_from_slice(&row_pay);
        for k in 0..c {
            col_score[k] -= col_pay[k];
            col_last[k] = -col_pay[k];
        }
        for j in 0..r {
            p_avg[j] += (p[j] - p_avg[j]) / t as f64;
        }
        for k in 0..c {
            q_avg[k] += (q[k] - q_avg[k]) / t as f64;
        }
        // optimistic step: count the latest payoff twice
        for j in 0..r {
            tmp_r[j] = rate * (row_score[j] + row_last[j]);
        }
        for k in 0..c {
            tmp_c[k] = rate * (col_score[k] + col_last[k]);
        }
        softmax(&tmp_r, &mut p);
        softmax(&tmp_c, &mut q);

        if t % 16 == 0 || t == opts.max_rounds {
            // averages converge in general, the optimistic last iterate often faster
            for (pc, qc) in [(&p_avg, &q_avg), (&p, &q)] {
                let (lo, up) = bounds(payoff, pc, qc);
                if lo > best.0 {
                    best.0 = lo;
                    best_pq.0 = pc.clone();
                }
                if up < best.1 {
                    best.1 = up;
                    best_pq.1 = qc.clone();
                }
            }
            if best.1 - best.0 <= opts.gap_tol {
                break;
            }
        }
    }
    MatrixGameSolution {
        p: best_pq.0,
        q: best_pq.1,
        value: 0.5 * (best.0 + best.1),
        lower: best.0,
        upper: best.1,
        rounds,
    }
}
