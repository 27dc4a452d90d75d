//! JSON experiment configuration.
//!
//! Every section has defaults, so `{}` is a valid configuration. Unknown keys
//! are rejected to catch typos. Parameter ranges of the model are checked when
//! the document is parsed, before any computation starts.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use degen_actuator::{ActuatorDensity, CoefficientSpec, Field, Model, SpatialGrid, TimeGrid};

/// A configuration problem; maps to exit code 4.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<degen_actuator::Error> for ConfigError {
    fn from(e: degen_actuator::Error) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Number of cells.
    pub n: usize,
    pub alpha: f64,
    /// Left end of the control region `Omega_1 = (epsilon_cut, 1)`.
    pub epsilon_cut: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 32,
            alpha: 0.5,
            epsilon_cut: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// Final time `T`.
    #[serde(alias = "T")]
    pub horizon: f64,
    /// Start of the control window `(tau, T)`.
    pub tau: f64,
    pub n_steps: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            horizon: 0.5,
            tau: 0.125,
            n_steps: 128,
        }
    }
}

/// A function on `(0, 1)` sampled at the cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// `amplitude * exp(-((x - center) / width)^2)`
    Bump {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// `amplitude * sin(mode * pi * x)`
    Sine {
        mode: f64,
        amplitude: f64,
    },
    /// `Sum c_k x^k`
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// One value per cell.
    Values {
        values: Vec<f64>,
    },
}

impl FieldSpec {
    pub fn sample(&self, grid: &SpatialGrid, name: &str) -> Result<Field, ConfigError> {
        let f = match self {
            FieldSpec::Zero => grid.zeros(),
            FieldSpec::Bump {
                center,
                width,
                amplitude,
            } => {
                if !(*width > 0.0) {
                    return Err(ConfigError(format!(
                        "{name}: bump width {width} must be positive"
                    )));
                }
                grid.sample(|x| amplitude * (-((x - center) / width).powi(2)).exp())
            }
            FieldSpec::Sine { mode, amplitude } => {
                grid.sample(|x| amplitude * (mode * std::f64::consts::PI * x).sin())
            }
            FieldSpec::Polynomial { coefficients } => {
                grid.sample(|x| coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c))
            }
            FieldSpec::Values { values } => {
                if values.len() != grid.n() {
                    return Err(ConfigError(format!(
                        "{name}: {} values given for a grid of {} cells",
                        values.len(),
                        grid.n()
                    )));
                }
                Field(values.clone())
            }
        };
        if !f.is_finite() {
            return Err(ConfigError(format!("{name}: non-finite values")));
        }
        Ok(f)
    }
}

/// The initial state: a fixed field, or the string `"worst-case"` for the
/// placement problem over all unit initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Mode(String),
    Field(FieldSpec),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Mode(WORST_CASE.into())
    }
}

pub const WORST_CASE: &str = "worst-case";

/// An actuator density on the control region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `beta = lambda` on every cell.
    #[default]
    Uniform,
    /// 0/1 per control-region cell; the volume fraction follows from the mask.
    Mask { cells: Vec<u8> },
    /// Indicator of the control-region cells with centre in `[from, to]`.
    Interval { from: f64, to: f64 },
    /// Values in `[0, 1]` per control-region cell with mass `lambda |Omega_1|`.
    Values { values: Vec<f64> },
}

impl DensitySpec {
    pub fn build(&self, grid: &SpatialGrid, lambda: f64) -> Result<ActuatorDensity, ConfigError> {
        let m = grid.omega1_len();
        let beta = match self {
            DensitySpec::Uniform => ActuatorDensity::uniform(grid, lambda)?,
            DensitySpec::Mask { cells } => {
                if cells.len() != m {
                    return Err(ConfigError(format!(
                        "problem.beta: mask has {} cells, the control region has {m}",
                        cells.len()
                    )));
                }
                if cells.iter().any(|&c| c > 1) {
                    return Err(ConfigError(
                        "problem.beta: mask entries must be 0 or 1".into(),
                    ));
                }
                let mask: Vec<bool> = cells.iter().map(|&c| c == 1).collect();
                ActuatorDensity::from_mask(grid, &mask)?
            }
            DensitySpec::Interval { from, to } => {
                let mask: Vec<bool> = grid.centers()[grid.omega1()]
                    .iter()
                    .map(|x| x >= from && x <= to)
                    .collect();
                ActuatorDensity::from_mask(grid, &mask)?
            }
            DensitySpec::Values { values } => ActuatorDensity::new(grid, values.clone(), lambda)?,
        };
        Ok(beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Volume fraction of the control region available to the actuator.
    pub lambda: f64,
    /// Terminal tolerance `||y(T) - y_d|| <= eps0`.
    pub eps0: f64,
    pub y_d: FieldSpec,
    pub y0: InitialState,
    /// Potential `a(x)`.
    pub a: CoefficientSpec,
    /// Actuator density for `solve-control` and `game-value`.
    pub beta: DensitySpec,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            lambda: 0.4,
            eps0: 0.05,
            y_d: FieldSpec::Zero,
            y0: InitialState::default(),
            a: CoefficientSpec::Zero,
            beta: DensitySpec::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Root seed; every randomised task derives its own stream from it.
    pub seed: u64,
    /// Dual solver: gradient-map tolerance relative to `max(1, ||y_d||)`.
    pub tol: f64,
    pub max_iters: usize,
    /// Random starts of the inner minimisation.
    pub n_starts: usize,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Draws of the observability-constant estimate.
    pub c_lambda_samples: usize,
    /// Projected ascent iterations and cutting-plane rounds of the outer problem.
    pub outer_iters: usize,
    pub cut_rounds: usize,
    /// Double-oracle budget and stopping gap.
    pub max_rounds: usize,
    pub gap_rel: f64,
    pub gap_abs: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tol: 1e-7,
            max_iters: 50_000,
            n_starts: 8,
            inner_tol: 1e-12,
            inner_max_iters: 2000,
            c_lambda_samples: 200,
            outer_iters: 200,
            cut_rounds: 60,
            max_rounds: 40,
            gap_rel: 0.05,
            gap_abs: 1e-6,
        }
    }
}

/// Sizes of the `verify` audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random pairs for the operator and Gramian identities.
    pub samples: usize,
    /// Grid of the dense brute-force cross-checks.
    pub oracle_n: usize,
    pub oracle_steps: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: 50,
            oracle_n: 8,
            oracle_steps: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub verify: VerifyConfig,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg()))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Model constraints first, each message names the violated inequality.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (g, t, p) = (&self.grid, &self.time, &self.problem);
        check(g.alpha > 0.0 && g.alpha < 2.0, || {
            format!(
                "grid.alpha = {}: the degeneracy exponent must satisfy 0 < alpha < 2",
                g.alpha
            )
        })?;
        check(t.horizon > 0.0 && t.horizon.is_finite(), || {
            format!(
                "time.horizon = {}: the final time must satisfy T > 0",
                t.horizon
            )
        })?;
        check(t.tau > 0.0 && t.tau < t.horizon, || {
            format!(
                "time.tau = {}: the control window (tau, T) needs 0 < tau < T = {}",
                t.tau, t.horizon
            )
        })?;
        check(p.lambda > 0.0 && p.lambda < 1.0, || {
            format!(
                "problem.lambda = {}: the volume fraction must satisfy 0 < lambda < 1",
                p.lambda
            )
        })?;
        check(p.eps0 > 0.0 && p.eps0.is_finite(), || {
            format!(
                "problem.eps0 = {}: the terminal tolerance must satisfy eps0 > 0",
                p.eps0
            )
        })?;
        check(g.epsilon_cut > 0.0 && g.epsilon_cut < 1.0, || {
            format!(
                "grid.epsilon_cut = {}: the control region (epsilon, 1) needs 0 < epsilon < 1",
                g.epsilon_cut
            )
        })?;
        if let InitialState::Mode(m) = &p.y0 {
            check(m == WORST_CASE, || {
                format!("problem.y0 = {m:?}: expected a field specification or \"{WORST_CASE}\"")
            })?;
        }
        let s = &self.solver;
        check(s.tol > 0.0 && s.inner_tol > 0.0, || {
            "solver tolerances must be positive".into()
        })?;
        check(s.gap_rel >= 0.0 && s.gap_abs >= 0.0, || {
            "solver gap targets must be non-negative".into()
        })?;
        check(s.c_lambda_samples > 0, || {
            "solver.c_lambda_samples must be positive".into()
        })?;
        // discretisation checks: cell count, control region, window resolution
        self.spatial_grid()?;
        self.time_grid()?;
        Ok(())
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid, ConfigError> {
        Ok(SpatialGrid::new(
            self.grid.n,
            self.grid.alpha,
            self.grid.epsilon_cut,
        )?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ConfigError> {
        Ok(TimeGrid::new(
            self.time.horizon,
            self.time.tau,
            self.time.n_steps,
        )?)
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        Ok(Model::new(
            self.spatial_grid()?,
            self.time_grid()?,
            &self.problem.a,
        )?)
    }

    pub fn y_d(&self, grid: &SpatialGrid) -> Result<Field, ConfigError> {
        self.problem.y_d.sample(grid, "problem.y_d")
    }

    /// The fixed initial state, or `None` in worst-case mode.
    pub fn y0(&self, grid: &SpatialGrid) -> Result<Option<Field>, ConfigError> {
        match &self.problem.y0 {
            InitialState::Mode(_) => Ok(None),
            InitialState::Field(f) => f.sample(grid, "problem.y0").map(Some),
        }
    }

    pub fn beta(&self, grid: &SpatialGrid) -> Result<ActuatorDensity, ConfigError> {
        self.problem.beta.build(grid, self.problem.lambda)
    }

    /// Canonical JSON used for hashing and for the run record.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }
}
