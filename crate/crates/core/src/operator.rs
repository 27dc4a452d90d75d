//! Finite-volume discretisation of `v -> (x^alpha v_x)_x - a(x) v`.
//!
//! Interior face fluxes are `x_f^alpha (v_{i+1} - v_i) / dx`. At `x = 1` the
//! Dirichlet condition uses a ghost value over half a cell. At `x = 0`:
//!
//! * `alpha >= 1`: the face factor `0^alpha` vanishes, giving zero weighted flux;
//! * `alpha < 1`: Dirichlet `v(0) = 0` with the two-point transmissibility of
//!   the half cell `[0, dx/2]`, `1 / int_0^{dx/2} x^{-alpha} dx`.
//!
//! The grid is uniform, so symmetry of the matrix is symmetry with respect to
//! the quadrature inner product.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CoefficientSpec, SpatialGrid};

/// Left boundary condition selected by `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LeftBoundary {
    /// `v(0) = 0`, for `alpha in (0, 1)`.
    Dirichlet,
    /// `(x^alpha v_x)(0) = 0`, for `alpha in [1, 2)`.
    ZeroFlux,
}

impl LeftBoundary {
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha < 1.0 {
            LeftBoundary::Dirichlet
        } else {
            LeftBoundary::ZeroFlux
        }
    }
}

/// Tridiagonal matrix representing `A - a` on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    diag: Vec<f64>,
    /// `lower[i] = M[i+1][i]`
    lower: Vec<f64>,
    /// `upper[i] = M[i][i+1]`
    upper: Vec<f64>,
    left: LeftBoundary,
    potential: Vec<f64>,
}

impl DiscreteOperator {
    pub fn assemble(grid: &SpatialGrid, a: &CoefficientSpec) -> Result<Self> {
        let potential = a.sample(grid)?;
        let n = grid.n();
        let alpha = grid.alpha();
        let dx = grid.dx();
        let inv_dx2 = 1.0 / (dx * dx);
        let left = LeftBoundary::for_alpha(alpha);

        // Face coefficients k_j / dx^2 at faces j = 1..n-1.
        let interior: Vec<f64> = (1..n).map(|j| grid.face(j).powf(alpha) * inv_dx2).collect();

        let mut diag = vec![0.0; n];
        for (j, k) in interior.iter().enumerate() {
            diag[j] -= k;
            diag[j + 1] -= k;
        }
        // Left face at x = 0.
        if left == LeftBoundary::Dirichlet {
            let half = 0.5 * dx;
            let transmissibility = (1.0 - alpha) / half.powf(1.0 - alpha);
            diag[0] -= transmissibility / dx;
        }
        // Right face at x = 1: ghost value -v_{n-1}, distance dx/2, 1^alpha = 1.
        diag[n - 1] -= 2.0 * inv_dx2;

        for (d, p) in diag.iter_mut().zip(&potential) {
            *d -= p;
        }
        Ok(Self {
            diag,
            lower: interior.clone(),
            upper: interior,
            left,
            potential,
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn left_boundary(&self) -> LeftBoundary {
        self.left
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Sampled potential `a(x_i)`.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Flux coefficient of the face at `x = 0` (zero for `alpha >= 1`).
    pub fn left_face_coefficient(&self, grid: &SpatialGrid) -> f64 {
        match self.left {
            LeftBoundary::ZeroFlux => 0.0f64.powf(grid.alpha()),
            LeftBoundary::Dirichlet => {
                let half = 0.5 * grid.dx();
                (1.0 - grid.alpha()) / half.powf(1.0 - grid.alpha())
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.lower[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * v[i + 1];
            }
            out[i] = s;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.lower[i];
                m[(i, i + 1)] = self.upper[i];
            }
        }
        m
    }

    /// Perturbs one super-diagonal entry. Only used to check that the
    /// symmetry audit detects a broken assembly.
    #[doc(hidden)]
    pub fn break_symmetry_for_testing(&mut self, delta: f64) {
        let mid = self.upper.len() / 2;
        self.upper[mid] += delta;
    }
}

/// LU factors of the tridiagonal matrix `I - dt M` (Thomas algorithm).
#[derive(Debug, Clone)]
pub(crate) struct ImplicitStep {
    /// modified super-diagonal `c'_i`
    c_prime: Vec<f64>,
    /// `1 / (b_i - a_i c'_{i-1})`
    inv_pivot: Vec<f64>,
    /// sub-diagonal of `I - dt M`
    sub: Vec<f64>,
}

impl ImplicitStep {
    pub(crate) fn new(op: &DiscreteOperator, dt: f64) -> Result<Self> {
        let n = op.n();
        let b: Vec<f64> = op.diag.iter().map(|d| 1.0 - dt * d).collect();
        let sub: Vec<f64> = op.lower.iter().map(|l| -dt * l).collect();
        let sup: Vec<f64> = op.upper.iter().map(|u| -dt * u).collect();
        let mut c_prime = vec![0.0; n.saturating_sub(1)];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let pivot = if i == 0 {
                b[0]
            } else {
                b[i] - sub[i - 1] * prev_c
            };
            if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                return Err(Error::SingularSystem(i));
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                prev_c = sup[i] * inv_pivot[i];
                c_prime[i] = prev_c;
            }
        }
        Ok(Self {
            c_prime,
            inv_pivot,
            sub,
        })
    }

    /// Overwrites `rhs` with `(I - dt M)^{-1} rhs`.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}
