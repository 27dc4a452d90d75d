//! Finite mixed strategies of the adjoint player and the density best response.

use serde::Serialize;

use super::GameInstance;
use crate::density::ActuatorDensity;
use crate::error::{Error, Result};
use crate::grid::Field;

/// `h = Sum_k w_k delta_{eta_k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracMixture {
    atoms: Vec<(f64, Field)>,
}

impl DiracMixture {
    /// Weights must be nonnegative and sum to one within `1e-12`; every atom
    /// must lie in the ball of radius `delta0` up to a relative `1e-9`.
    pub fn new(inst: &GameInstance, atoms: Vec<(f64, Field)>, delta0: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument(
                "mixture needs at least one atom".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if atoms.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights must be nonnegative and sum to 1 (sum {total})"
            )));
        }
        let g = inst.grid();
        for (_, eta) in &atoms {
            if eta.len() != g.n() {
                return Err(Error::LengthMismatch {
                    expected: g.n(),
                    got: eta.len(),
                });
            }
            if g.norm(eta) > delta0 * (1.0 + 1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "atom of norm {} outside the ball of radius {delta0}",
                    g.norm(eta)
                )));
            }
        }
        Ok(Self { atoms })
    }

    pub fn dirac(inst: &GameInstance, eta: Field, delta0: f64) -> Result<Self> {
        Self::new(inst, vec![(1.0, eta)], delta0)
    }

    pub fn atoms(&self) -> &[(f64, Field)] {
        &self.atoms
    }

    /// `J~(beta, h) = Sum_k w_k J(beta, eta_k)`.
    pub fn payoff(&self, inst: &GameInstance, beta: &ActuatorDensity) -> f64 {
        self.atoms
            .iter()
            .map(|(w, eta)| w * inst.value(beta, eta))
            .sum()
    }
}

/// `H_h = Sum_k w_k G(eta_k)` on the `Omega_1` cells.
pub fn mixture_h_field(inst: &GameInstance, h: &DiracMixture) -> Field {
    let mut out = vec![0.0; inst.grid().omega1_len()];
    for (w, eta) in h.atoms() {
        for (o, g) in out.iter_mut().zip(inst.g_omega1(eta)) {
            *o += w * g;
        }
    }
    Field(out)
}

/// `argmax_beta J~(beta, h)`: the bathtub maximiser of `1/2 H_h`, with its
/// threshold.
pub fn best_response_beta(inst: &GameInstance, h: &DiracMixture) -> Result<(ActuatorDensity, f64)> {
    let half = mixture_h_field(inst, h).scaled(0.5);
    inst.bathtub(&half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::observability::sample_density;
    use crate::game::tests::small_model;
    use crate::rng::task_rng;
    use rand::Rng;

    #[test]
    fn exchange_identity_and_best_response() {
        let m = small_model(16, 32, 0.5, 0.5);
        let inst = GameInstance::new(&m, m.grid.sample(|x| 0.1 * x), 0.05, 0.4).unwrap();
        let mut rng = task_rng(5, "mixture-test", 0);
        let mut atoms = Vec::new();
        let ws: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let total: f64 = ws.iter().sum();
        for w in &ws {
            let eta = Field((0..16).map(|_| rng.random_range(-1.0..1.0)).collect());
            atoms.push((w / total, eta));
        }
        let h = DiracMixture::new(&inst, atoms.clone(), 100.0).unwrap();
        let hf = mixture_h_field(&inst, &h);
        assert!(hf.iter().all(|v| *v >= 0.0));
        let (br, _) = best_response_beta(&inst, &h).unwrap();
        assert!(br.fractional_cells() <= 1);
        let br_val = h.payoff(&inst, &br);
        for s in 0..200 {
            let beta = sample_density(&inst, &mut rng, s).unwrap();
            let lhs = m.grid.inner_omega1(beta.values(), &hf);
            let rhs: f64 = atoms
                .iter()
                .map(|(w, e)| w * m.grid.inner_omega1(beta.values(), &inst.g_omega1(e)))
                .sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            assert!(h.payoff(&inst, &beta) <= br_val + 1e-12);
        }
        // single atom: H = G(eta)
        let single = DiracMixture::dirac(&inst, atoms[0].1.clone(), 100.0).unwrap();
        assert_eq!(
            mixture_h_field(&inst, &single).0,
            inst.g_omega1(&atoms[0].1)
        );
    }

    #[test]
    fn rejects_bad_weights() {
        let m = small_model(16, 32, 0.5, 0.5);
        let inst = GameInstance::new(&m, m.grid.zeros(), 0.05, 0.4).unwrap();
        let e = m.grid.zeros();
        assert!(DiracMixture::new(&inst, vec![(0.5, e.clone()), (0.4, e.clone())], 1.0).is_err());
        assert!(DiracMixture::new(&inst, vec![(1.5, e.clone()), (-0.5, e.clone())], 1.0).is_err());
        let big = m.grid.sample(|_| 10.0);
        assert!(DiracMixture::dirac(&inst, big, 1.0).is_err());
    }
}
