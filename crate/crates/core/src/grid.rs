//! Space and time discretisation of `Omega = (0, 1)` and `(0, T)`.
//!
//! The spatial grid is uniform and cell centred. Every quadrature in the crate
//! uses the cell widths as weights, so `inner` is the discrete `L^2(Omega)`
//! scalar product and `Sum w_i = 1`.

use std::ops::{Deref, DerefMut, Range};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centred grid on `(0, 1)` with the control subregion
/// `Omega_1 = (epsilon_cut, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    n: usize,
    alpha: f64,
    epsilon_cut: f64,
    centers: Vec<f64>,
    widths: Vec<f64>,
    omega1: Range<usize>,
}

impl SpatialGrid {
    pub fn new(n: usize, alpha: f64, epsilon_cut: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::TooFewCells(n));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        if !(epsilon_cut > 0.0 && epsilon_cut < 1.0) {
            return Err(Error::EpsilonOutOfRange(epsilon_cut));
        }
        let dx = 1.0 / n as f64;
        let centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
        let widths = vec![dx; n];
        let first = centers
            .iter()
            .position(|&c| c >= epsilon_cut)
            .ok_or(Error::EmptyControlRegion(epsilon_cut))?;
        Ok(Self {
            n,
            alpha,
            epsilon_cut,
            centers,
            widths,
            omega1: first..n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon_cut(&self) -> f64 {
        self.epsilon_cut
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Common cell width `1/n`.
    pub fn dx(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Face coordinate `x_{i+1/2}` for `i = -1 ..= n-1` given as face index `0..=n`.
    pub fn face(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Indices of the cells whose centre lies in `Omega_1`.
    pub fn omega1(&self) -> Range<usize> {
        self.omega1.clone()
    }

    pub fn omega1_len(&self) -> usize {
        self.omega1.len()
    }

    /// Discrete measure `|Omega_1|`, the summed width of the `Omega_1` cells.
    pub fn omega1_measure(&self) -> f64 {
        self.widths[self.omega1.clone()].iter().sum()
    }

    /// Widths of the `Omega_1` cells, in order.
    pub fn omega1_widths(&self) -> &[f64] {
        &self.widths[self.omega1.clone()]
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.n)
    }

    /// Samples `f` at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.centers.iter().map(|&x| f(x)).collect())
    }

    /// Quadrature inner product `Sum w_i f_i g_i`.
    ///
    /// Panics when the lengths differ from `n`; see [`SpatialGrid::try_inner`].
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        assert_eq!(f.len(), self.n, "field length does not match grid");
        assert_eq!(g.len(), self.n, "field length does not match grid");
        // Uniform weights: factor them out of the sum.
        self.dx() * dot(f, g)
    }

    pub fn try_inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        for len in [f.len(), g.len()] {
            if len != self.n {
                return Err(Error::LengthMismatch {
                    expected: self.n,
                    got: len,
                });
            }
        }
        Ok(self.inner(f, g))
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Inner product over `Omega_1` between a vector indexed by `Omega_1`
    /// cells and `f`, which is either a full-length field or already
    /// restricted to `Omega_1` (the two lengths never coincide).
    pub fn inner_omega1(&self, beta: &[f64], f: &[f64]) -> f64 {
        assert_eq!(beta.len(), self.omega1_len());
        let w = self.omega1_widths();
        let f1 = if f.len() == self.n() {
            &f[self.omega1.clone()]
        } else {
            assert_eq!(f.len(), self.omega1_len());
            f
        };
        beta.iter()
            .zip(f1)
            .zip(w)
            .map(|((b, v), w)| b * v * w)
            .sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A grid function: one value per cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field(self.0.iter().map(|v| v * s).collect())
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &[f64]) {
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &[f64]) -> Field {
        Field(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &[f64]) -> Field {
        Field(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Uniform time grid on `[0, T]` with the control window `(tau, T)`.
///
/// `tau` is rounded to the nearest step boundary; the requested value is kept
/// for the record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    tau: f64,
    tau_requested: f64,
    n_steps: usize,
    tau_step: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, tau: f64, n_steps: usize) -> Result<Self> {
        let bad = Error::InvalidTimeWindow {
            horizon,
            tau,
            n_steps,
        };
        if !(horizon > 0.0 && horizon.is_finite()) || !(tau > 0.0 && tau < horizon) || n_steps < 2 {
            return Err(bad);
        }
        let dt = horizon / n_steps as f64;
        let tau_step = (tau / dt).round() as usize;
        if tau_step == 0 || tau_step >= n_steps {
            return Err(bad);
        }
        Ok(Self {
            horizon,
            tau: tau_step as f64 * dt,
            tau_requested: tau,
            n_steps,
            tau_step,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Effective window start, a multiple of `dt`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_requested(&self) -> f64 {
        self.tau_requested
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Step index of `tau`.
    pub fn tau_step(&self) -> usize {
        self.tau_step
    }

    /// Steps `k` (from `t_k` to `t_{k+1}`) that lie inside `(tau, T)`.
    pub fn window(&self) -> Range<usize> {
        self.tau_step..self.n_steps
    }

    pub fn window_len(&self) -> usize {
        self.n_steps - self.tau_step
    }
}

/// The potential `a(x)` of the state equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    #[default]
    Zero,
    /// `a(x) = Sum c_k x^k`.
    Polynomial { coefficients: Vec<f64> },
    /// One value per cell centre.
    Sampled { values: Vec<f64> },
}

impl CoefficientSpec {
    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        let values = match self {
            CoefficientSpec::Zero => vec![0.0; grid.n()],
            CoefficientSpec::Polynomial { coefficients } => grid
                .centers()
                .iter()
                .map(|&x| coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c))
                .collect(),
            CoefficientSpec::Sampled { values } => {
                if values.len() != grid.n() {
                    return Err(Error::LengthMismatch {
                        expected: grid.n(),
                        got: values.len(),
                    });
                }
                values.clone()
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential a(x)"));
        }
        Ok(values)
    }
}
