//! Relaxed actuator densities on `Omega_1` and the three finite-dimensional
//! problems posed over them: Euclidean projection onto the capped simplex,
//! the bathtub maximiser of a linear functional, and rounding to an upper
//! level set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

const MASS_TOL: f64 = 1e-10;

/// `beta in [0, 1]` on the `Omega_1` cells with `Sum w_i beta_i = lambda |Omega_1|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActuatorDensity {
    values: Vec<f64>,
    lambda: f64,
    offset: usize,
    n: usize,
}

impl ActuatorDensity {
    pub fn new(grid: &SpatialGrid, values: Vec<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let m = grid.omega1_len();
        if values.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::InfeasibleDensity(format!(
                "value {v} outside [0, 1]"
            )));
        }
        let mass: f64 = values
            .iter()
            .zip(grid.omega1_widths())
            .map(|(b, w)| b * w)
            .sum();
        let target = lambda * grid.omega1_measure();
        if (mass - target).abs() > MASS_TOL {
            return Err(Error::InfeasibleDensity(format!(
                "mass {mass} differs from lambda |Omega_1| = {target}"
            )));
        }
        Ok(Self {
            values,
            lambda,
            offset: grid.omega1().start,
            n: grid.n(),
        })
    }

    /// The constant density `beta = lambda`.
    pub fn uniform(grid: &SpatialGrid, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Self::new(grid, vec![lambda; grid.omega1_len()], lambda)
    }

    /// Binary density of a cell mask over `Omega_1`; `lambda` is the selected
    /// fraction of `|Omega_1|`. The full mask is accepted with `lambda = 1`.
    pub fn from_mask(grid: &SpatialGrid, mask: &[bool]) -> Result<Self> {
        if mask.len() != grid.omega1_len() {
            return Err(Error::LengthMismatch {
                expected: grid.omega1_len(),
                got: mask.len(),
            });
        }
        let values: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mass: f64 = values
            .iter()
            .zip(grid.omega1_widths())
            .map(|(b, w)| b * w)
            .sum();
        let lambda = mass / grid.omega1_measure();
        if mask.iter().all(|&b| b) {
            // the full mask is the one admissible binary density at lambda = 1
            return Ok(Self {
                values,
                lambda: 1.0,
                offset: grid.omega1().start,
                n: grid.n(),
            });
        }
        Self::new(grid, values, lambda)
    }

    /// Euclidean projection of `raw` onto the feasible set with fraction `lambda`.
    pub fn project(grid: &SpatialGrid, raw: &[f64], lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let target = lambda * grid.omega1_measure();
        let (values, _) = project_capped_simplex(raw, grid.omega1_widths(), target)?;
        Self::new(grid, values, lambda)
    }

    /// Convex combination `Sum c_j beta_j`; all inputs must share `lambda`.
    pub fn combine(grid: &SpatialGrid, parts: &[(f64, &ActuatorDensity)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty combination".into()))?;
        let lambda = first.1.lambda;
        let mut values = vec![0.0; grid.omega1_len()];
        let total: f64 = parts.iter().map(|(c, _)| c).sum();
        for (c, b) in parts {
            for (v, x) in values.iter_mut().zip(&b.values) {
                *v += c / total * x;
            }
        }
        for v in values.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(grid, values, lambda)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Extension by zero to all `n` cells.
    pub fn full(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        out[self.offset..self.offset + self.values.len()].copy_from_slice(&self.values);
        out
    }

    /// `sqrt(beta)` extended by zero.
    pub fn full_sqrt(&self) -> Vec<f64> {
        let mut out = self.full();
        for v in out.iter_mut() {
            *v = v.sqrt();
        }
        out
    }

    /// Number of cells with `0 < beta < 1` (up to `1e-12`).
    pub fn fractional_cells(&self) -> usize {
        self.values
            .iter()
            .filter(|&&v| v > 1e-12 && v < 1.0 - 1e-12)
            .count()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

/// Projection of `v` onto `{0 <= b <= 1, Sum w_i b_i = mass}` in the
/// `w`-weighted Euclidean norm. Returns the projection and the shift `nu` with
/// `b_i = clip(v_i - nu, 0, 1)`.
pub fn project_capped_simplex(v: &[f64], widths: &[f64], mass: f64) -> Result<(Vec<f64>, f64)> {
    let total: f64 = widths.iter().sum();
    if !(mass >= 0.0 && mass <= total * (1.0 + 1e-12)) {
        return Err(Error::InfeasibleDensity(format!(
            "target mass {mass} outside [0, {total}]"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    let mass_at = |nu: f64| -> f64 {
        v.iter()
            .zip(widths)
            .map(|(x, w)| w * (x - nu).clamp(0.0, 1.0))
            .sum()
    };
    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    // mass_at(lo) = total >= mass, mass_at(hi) = 0 <= mass
    let (mut lo, mut hi) = (vmin - 1.0, vmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mass_at(mid);
        if (m - mass).abs() <= 1e-12 * total.max(1e-300) {
            lo = mid;
            hi = mid;
            break;
        }
        if m > mass {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    let mut nu = 0.5 * (lo + hi);
    // Exact shift for the active set found by bisection.
    let (mut free_w, mut free_wv, mut upper_w) = (0.0, 0.0, 0.0);
    for (x, w) in v.iter().zip(widths) {
        let d = x - nu;
        if d >= 1.0 {
            upper_w += w;
        } else if d > 0.0 {
            free_w += w;
            free_wv += w * x;
        }
    }
    if free_w > 0.0 {
        let exact = (free_wv + upper_w - mass) / free_w;
        let consistent = v.iter().all(|x| {
            let (a, b) = (x - nu, x - exact);
            (a >= 1.0) == (b >= 1.0) && (a > 0.0) == (b > 0.0)
        });
        if consistent {
            nu = exact;
        }
    }
    let out = v.iter().map(|x| (x - nu).clamp(0.0, 1.0)).collect();
    Ok((out, nu))
}

/// Maximiser of `b -> Sum w_i b_i phi_i` over `{0 <= b <= 1, Sum w_i b_i = mass}`.
///
/// Cells are filled in decreasing order of `phi` (ties by ascending index);
/// at most one cell ends up fractional. Returns the density and the
/// threshold `c`, the value of `phi` on the last (possibly partial) cell.
pub fn bathtub(phi: &[f64], widths: &[f64], mass: f64) -> (Vec<f64>, f64) {
    let order = descending_order(phi);
    let mut beta = vec![0.0; phi.len()];
    let mut remaining = mass;
    let mut threshold = order.first().map_or(0.0, |&i| phi[i]);
    for &i in &order {
        if remaining <= 1e-15 * mass.max(1.0) {
            break;
        }
        let w = widths[i];
        threshold = phi[i];
        if remaining >= w * (1.0 - 1e-12) {
            beta[i] = 1.0;
            remaining -= w;
        } else {
            beta[i] = remaining / w;
            remaining = 0.0;
        }
    }
    (beta, threshold)
}

/// Indices sorted by decreasing value; ties keep ascending index order.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Binary upper level set of `h` whose width is nearest to `mass`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSet {
    pub mask: Vec<bool>,
    pub threshold: f64,
    pub selected_width: f64,
    /// `|selected_width - mass|`
    pub mismatch: f64,
    /// `h` is constant or tied across the threshold, so the set is not unique.
    pub degenerate: bool,
}

pub fn extract_level_set(h: &[f64], widths: &[f64], mass: f64) -> LevelSet {
    let order = descending_order(h);
    let mut best_k = 0;
    let mut best_err = mass.abs();
    let mut cum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cum += widths[i];
        let err = (cum - mass).abs();
        if err < best_err - 1e-15 {
            best_err = err;
            best_k = k + 1;
        }
    }
    let mut mask = vec![false; h.len()];
    for &i in &order[..best_k] {
        mask[i] = true;
    }
    let threshold = if best_k > 0 {
        h[order[best_k - 1]]
    } else {
        f64::INFINITY
    };
    let hmax = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let hmin = h.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = hmax.abs().max(hmin.abs()).max(f64::MIN_POSITIVE);
    let constant = hmax - hmin <= 1e-14 * scale;
    let tied = best_k > 0 && best_k < h.len() && h[order[best_k]] == threshold;
    let selected_width = order[..best_k].iter().map(|&i| widths[i]).sum();
    LevelSet {
        mask,
        threshold,
        selected_width,
        mismatch: best_err,
        degenerate: constant || tied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let w = [0.25; 4];
        let v = [0.5, 0.25, 0.75, 0.5];
        let (b, _) = project_capped_simplex(&v, &w, 0.5).unwrap();
        for (x, y) in b.iter().zip(&v) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_hand_example() {
        let (b, nu) = project_capped_simplex(&[2.0, -1.0, 0.0], &[1.0; 3], 1.0).unwrap();
        assert_eq!(b, vec![1.0, 0.0, 0.0]);
        // every nu in [0, 1] realises the same projection
        assert!((-1e-12..=1.0 + 1e-12).contains(&nu));
    }

    #[test]
    fn projection_rejects_infeasible_mass() {
        assert!(project_capped_simplex(&[0.0; 3], &[1.0; 3], 3.5).is_err());
    }

    #[test]
    fn bathtub_examples() {
        let (b, c) = bathtub(&[3.0, 1.0, 2.0], &[1.0; 3], 1.0);
        assert_eq!(b, vec![1.0, 0.0, 0.0]);
        assert_eq!(c, 3.0);
        let third = 1.0 / 3.0;
        let (b, c) = bathtub(&[3.0, 1.0, 2.0], &[third; 3], 0.5);
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1] == 0.0 && (b[2] - 0.5).abs() < 1e-12);
        assert_eq!(c, 2.0);
    }

    #[test]
    fn bathtub_breaks_ties_by_index() {
        let (b, _) = bathtub(&[1.0, 1.0, 1.0, 1.0], &[1.0; 4], 2.0);
        assert_eq!(b, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn level_set_of_decreasing_field() {
        let h = [5.0, 4.0, 3.0, 2.0, 1.0];
        let ls = extract_level_set(&h, &[0.2; 5], 0.4);
        assert_eq!(ls.mask, vec![true, true, false, false, false]);
        assert_eq!(ls.threshold, 4.0);
        assert!(!ls.degenerate);
        assert!(ls.mismatch < 1e-12);
    }

    #[test]
    fn constant_field_is_flagged() {
        let ls = extract_level_set(&[2.0; 4], &[0.25; 4], 0.5);
        assert!(ls.degenerate);
        assert_eq!(ls.mask, vec![true, true, false, false]);
    }

    #[test]
    fn level_set_matches_integral_bathtub() {
        let h = [0.3, 2.0, 1.1, -0.4, 0.9, 1.7];
        let w = [1.0 / 6.0; 6];
        let (b, _) = bathtub(&h, &w, 0.5);
        let ls = extract_level_set(&h, &w, 0.5);
        for (bi, mi) in b.iter().zip(&ls.mask) {
            assert_eq!(*bi == 1.0, *mi);
        }
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(
            v in proptest::collection::vec(-3.0f64..3.0, 2..20),
            frac in 0.05f64..0.95,
        ) {
            let w = vec![1.0 / v.len() as f64; v.len()];
            let mass = frac;
            let (p, _) = project_capped_simplex(&v, &w, mass).unwrap();
            let m: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
            prop_assert!((m - mass).abs() < 1e-10);
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
            let (pp, _) = project_capped_simplex(&p, &w, mass).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn bathtub_has_at_most_one_fractional_cell(
            phi in proptest::collection::vec(-5.0f64..5.0, 2..24),
            frac in 0.05f64..0.95,
        ) {
            let w = vec![1.0 / phi.len() as f64; phi.len()];
            let (b, _) = bathtub(&phi, &w, frac);
            let fractional = b.iter().filter(|&&x| x > 1e-12 && x < 1.0 - 1e-12).count();
            prop_assert!(fractional <= 1);
            let m: f64 = b.iter().zip(&w).map(|(a, c)| a * c).sum();
            prop_assert!((m - frac).abs() < 1e-12);
        }
    }
}
