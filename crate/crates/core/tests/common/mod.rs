#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdmpc_core::numerics::{solve_dare, Matrix, Riccati};
use tdmpc_core::{build_condensed, BoxSet, CondensedQp, LtiModel, PgmConfig};

pub struct Instance {
    pub model: LtiModel<f64>,
    pub q: Matrix<f64>,
    pub r: Matrix<f64>,
    pub riccati: Riccati<f64>,
    pub qp: CondensedQp<f64>,
    pub cfg: PgmConfig<f64>,
}

pub fn pendulum_model() -> LtiModel<f64> {
    LtiModel::from_continuous(
        Matrix::from_rows(&[[0.0, 1.0], [14.7, 0.0]]).unwrap(),
        Matrix::from_rows(&[[0.0], [30.0]]).unwrap(),
        0.1,
    )
    .unwrap()
}

pub fn instance(
    model: LtiModel<f64>,
    q: Matrix<f64>,
    r: Matrix<f64>,
    input_box: BoxSet<f64>,
    horizon: usize,
) -> Instance {
    let riccati = solve_dare(model.a(), model.b(), &q, &r).unwrap();
    let qp = build_condensed(&model, &q, &r, &riccati.p, &input_box, horizon).unwrap();
    let cfg = PgmConfig::for_qp(&qp);
    Instance { model, q, r, riccati, qp, cfg }
}

pub fn pendulum(horizon: usize) -> Instance {
    instance(pendulum_model(), Matrix::identity(2), Matrix::identity(1), BoxSet::symmetric(1.0, 1).unwrap(), horizon)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn random_spd(rng: &mut impl Rng, n: usize) -> Matrix<f64> {
    let g = random_matrix(rng, n, n, 1.0);
    &(&g * &g.transpose()) + &Matrix::identity(n).scale(0.5)
}

/// Random instance whose `A` has spectral norm below 1.1.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=2);
    let horizon = rng.random_range(1..=10);
    let raw = random_matrix(&mut rng, n, n, 1.0);
    let norm = tdmpc_core::numerics::spectral_norm(&raw);
    let a = raw.scale(rng.random_range(0.3..1.1) / norm.max(1e-9));
    let b = random_matrix(&mut rng, n, m, 1.0);
    let q = random_spd(&mut rng, n);
    let r = random_spd(&mut rng, m);
    let lower: Vec<f64> = (0..m).map(|_| -rng.random_range(0.2..2.0)).collect();
    let upper: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
    instance(LtiModel::new(a, b).unwrap(), q, r, BoxSet::new(lower, upper).unwrap(), horizon)
}

/// Explicit state rollout of the finite-horizon objective.
pub fn rollout_cost(inst: &Instance, x: &[f64], nu: &[f64]) -> f64 {
    let m = inst.model.input_dim();
    let mut xk = x.to_vec();
    let mut total = 0.0;
    for u in nu.chunks(m) {
        total += inst.q.quad_form(&xk) + inst.r.quad_form(u);
        xk = inst.model.step(&xk, u).unwrap();
    }
    total + inst.riccati.p.quad_form(&xk)
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_feasible(rng: &mut impl Rng, qp: &CondensedQp<f64>) -> Vec<f64> {
    qp.feasible.lower().iter().zip(qp.feasible.upper()).map(|(&l, &u)| rng.random_range(l..u)).collect()
}

pub const X0: [f64; 2] = [-std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_3];
