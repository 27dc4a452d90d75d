//! Cross-checks of the optimisers against the brute-force references.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use degen_actuator::density::extract_level_set;
use degen_actuator::dual::{DualProblem, DualSolverOptions};
use degen_actuator::game::{
    inner_inf, outer_sup, restricted_game_value, BallSpec, GameInstance, InnerOptions,
    MatrixGameOptions, OuterOptions,
};
use degen_actuator::oracle::{
    lowrank_inner_oracle, matrix_game_value_exact, oracle_best_actuator, oracle_min_norm,
    ActuatorScore,
};
use degen_actuator::{ActuatorDensity, CoefficientSpec, Field, Model, SpatialGrid, TimeGrid};

fn model(n: usize, steps: usize, alpha: f64, eps_cut: f64) -> Model {
    let g = SpatialGrid::new(n, alpha, eps_cut).unwrap();
    let tg = TimeGrid::new(0.5, 0.125, steps).unwrap();
    Model::new(g, tg, &CoefficientSpec::Zero).unwrap()
}

#[test]
fn min_norm_oracle_matches_dual_solver_on_small_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for s in 0..6 {
        let alpha = [0.3, 0.9, 1.4][s % 3];
        let m = model(8, 32, alpha, 0.5);
        let c: f64 = rng.random_range(0.2..0.8);
        let y0 = m.grid.sample(|x| (-((x - c) / 0.2).powi(2)).exp());
        let y_d = m.grid.sample(|x| 0.2 * x);
        let raw: Vec<f64> = (0..m.grid.omega1_len()).map(|_| rng.random()).collect();
        let beta = ActuatorDensity::project(&m.grid, &raw, 0.5).unwrap();
        let o = oracle_min_norm(&m, &beta, &y0, &y_d, 0.05).unwrap();
        // the residual is non-decreasing in gamma along the trace
        let mut trace = o.trace.clone();
        trace.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(trace.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12)));
        let p = DualProblem::new(&m, beta, y0, y_d, 0.05).unwrap();
        let r = p.minimize(DualSolverOptions::default());
        assert!(r.converged);
        assert!(
            (r.min_norm - o.norm).abs() <= 1e-4 * o.norm,
            "{} vs {}",
            r.min_norm,
            o.norm
        );
    }
}

#[test]
fn min_norm_oracle_returns_zero_without_assumption_h() {
    let m = model(8, 32, 0.5, 0.5);
    let y0 = m.grid.sample(|x| x * (1.0 - x));
    let y_d = m.prop.free_terminal(&y0);
    let beta = ActuatorDensity::uniform(&m.grid, 0.5).unwrap();
    assert_eq!(
        oracle_min_norm(&m, &beta, &y0, &y_d, 0.05).unwrap().norm,
        0.0
    );
}

#[test]
fn lowrank_search_never_beats_the_inner_solver() {
    let m = model(8, 32, 0.5, 0.5);
    for amp in [0.0, 0.02] {
        let inst = GameInstance::new(&m, m.grid.sample(|x| amp * x), 0.05, 0.5).unwrap();
        let ball = BallSpec::build(&inst, 200, 1).unwrap();
        let beta = ActuatorDensity::uniform(&m.grid, 0.5).unwrap();
        let inner = inner_inf(&inst, &beta, &ball, &InnerOptions::default(), &[]);
        // rank 2 with a 10^4-point net
        let lr = lowrank_inner_oracle(&inst, &beta, &ball, 2, 10_000).unwrap();
        assert!(
            inner.value <= lr + 1e-3,
            "inner {} low-rank {lr}",
            inner.value
        );
        for rank in [1, 3] {
            let lr = lowrank_inner_oracle(&inst, &beta, &ball, rank, 60).unwrap();
            assert!(lr <= 0.0);
            assert!(inner.value <= lr + 1e-3);
        }
    }
}

#[test]
fn lowrank_rank_one_is_sign_symmetric_without_target() {
    let m = model(8, 32, 1.5, 0.5);
    let inst = GameInstance::new(&m, m.grid.zeros(), 0.05, 0.5).unwrap();
    let beta = ActuatorDensity::uniform(&m.grid, 0.5).unwrap();
    let eta = m.grid.sample(|x| (3.0 * x).sin());
    assert_eq!(
        inst.value(&beta, &eta),
        inst.value(&beta, &eta.scaled(-1.0))
    );
    // both signs of the leading direction reach the same radial minimum
    let ball = BallSpec::new(1e3, 1.0, m.grid.zeros()).unwrap();
    let r1 = lowrank_inner_oracle(&inst, &beta, &ball, 1, 1).unwrap();
    assert!(r1 < 0.0);
}

#[test]
fn lowrank_rank_is_capped() {
    let m = model(8, 32, 0.5, 0.5);
    let inst = GameInstance::new(&m, m.grid.zeros(), 0.05, 0.5).unwrap();
    let beta = ActuatorDensity::uniform(&m.grid, 0.5).unwrap();
    let ball = BallSpec::new(1e3, 1.0, m.grid.zeros()).unwrap();
    assert!(lowrank_inner_oracle(&inst, &beta, &ball, 4, 10).is_err());
    assert!(lowrank_inner_oracle(&inst, &beta, &ball, 0, 10).is_err());
}

#[test]
fn full_mask_is_the_only_candidate() {
    let m = model(16, 32, 0.5, 0.75);
    let inst = GameInstance::new(&m, m.grid.zeros(), 0.05, 0.5).unwrap();
    let ball = BallSpec::build(&inst, 100, 2).unwrap();
    let k = m.grid.omega1_len();
    let score = ActuatorScore::WorstCase {
        ball,
        inner: InnerOptions::default(),
    };
    let en = oracle_best_actuator(&inst, k, &score, 10).unwrap();
    assert_eq!(en.scores.len(), 1);
    assert!(en.best_mask.iter().all(|&b| b));
}

#[test]
fn enumeration_respects_budget() {
    let m = model(16, 32, 0.5, 0.375);
    let inst = GameInstance::new(&m, m.grid.zeros(), 0.05, 0.4).unwrap();
    let score = ActuatorScore::InitialStates(vec![m.grid.sample(|x| x)]);
    assert!(oracle_best_actuator(&inst, 4, &score, 100).is_err());
}

#[test]
fn outer_level_set_is_near_the_top_of_the_enumeration() {
    for alpha in [0.5, 1.5] {
        let m = model(16, 64, alpha, 0.375);
        let inst = GameInstance::new(&m, m.grid.zeros(), 0.05, 0.4).unwrap();
        let ball = BallSpec::build(&inst, 200, 1).unwrap();
        let score = ActuatorScore::WorstCase {
            ball: ball.clone(),
            inner: InnerOptions::default(),
        };
        let en = oracle_best_actuator(&inst, 4, &score, 100_000).unwrap();
        assert_eq!(en.scores.len(), 210);
        let init = ActuatorDensity::uniform(&m.grid, 0.4).unwrap();
        let o = outer_sup(&inst, &ball, &init, &OuterOptions::default()).unwrap();
        assert!(o.value <= o.model_bound + 1e-9 * o.value.abs().max(1.0));
        let h = inst.g_omega1(&o.eta);
        let ls = extract_level_set(&h, m.grid.omega1_widths(), inst.mass());
        let value = en
            .scores
            .iter()
            .find(|(mask, _)| *mask == ls.mask)
            .map(|s| s.1)
            .expect("level set has four cells");
        assert!(
            en.rank_fraction(value) <= 0.05,
            "alpha {alpha}: rank {}",
            en.rank_fraction(value)
        );
    }
}

#[test]
fn restricted_game_matches_support_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let opts = MatrixGameOptions::default();
    for _ in 0..20 {
        let a = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let exact = matrix_game_value_exact(&a).expect("nondegenerate random game");
        let s = restricted_game_value(&a, &opts);
        assert!((s.value - exact).abs() <= 1e-3, "{} vs {exact}", s.value);
        assert!(s.lower <= exact + 1e-12 && exact <= s.upper + 1e-12);
    }
}

#[test]
fn dense_operator_fidelity_on_random_controls() {
    use degen_actuator::oracle::DenseControlOperator;
    use degen_actuator::ControlSignal;
    let m = model(8, 32, 1.2, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let beta = ActuatorDensity::uniform(&m.grid, 0.5).unwrap();
    let y0 = Field((0..8).map(|_| rng.random_range(-1.0..1.0)).collect());
    let op = DenseControlOperator::new(&m, &beta, &y0).unwrap();
    for _ in 0..50 {
        let u = ControlSignal::from_fn(&m.grid, &m.tg, |_, _| rng.random_range(-1.0..1.0));
        let direct = m.prop.solve_forward(&y0, Some((&beta, &u)));
        let dense = op.apply(&u);
        let scale = m.grid.norm(direct.last()).max(1.0);
        assert!(m.grid.norm(&dense.sub(direct.last())) <= 1e-12 * scale);
    }
}
