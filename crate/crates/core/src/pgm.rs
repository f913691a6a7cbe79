//! Projected gradient operator `𝒯(x, ν) = Π_𝒩[ν − s(Hν + Gx)]`, its compositions,
//! and a high-accuracy solver for `μ*(x)`.

use crate::condensed::CondensedQp;
use crate::error::{Error, Result};
use crate::numerics::{spd_solve, vector, Matrix};
use crate::plant::ConvexSet;
use crate::scalar::Real;

const POLISH_EVERY: usize = 25;

/// Scaling of the gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `ν − α·2(Hν + Gx)`: full gradient of `J_N`, certified rate `η`.
    #[default]
    FullGradient,
    /// `ν − α(Hν + Gx)`: gradient of `J_N / 2`, certified rate `(1 + η)/2`.
    HalfGradient,
}

impl StepRule {
    pub fn name(self) -> &'static str {
        match self {
            StepRule::FullGradient => "full",
            StepRule::HalfGradient => "half",
        }
    }
}

impl std::str::FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(StepRule::FullGradient),
            "half" => Ok(StepRule::HalfGradient),
            other => Err(Error::InvalidArgument(format!("unknown step rule '{other}' (expected full|half)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PgmConfig<T: Real> {
    /// `1/(λ⁺(H) + λ⁻(H))`.
    pub alpha: T,
    /// `(λ⁺(H) − λ⁻(H))/(λ⁺(H) + λ⁻(H))`.
    pub eta: T,
    pub rule: StepRule,
    pub tol_benchmark: T,
    pub iter_cap: usize,
}

impl<T: Real> PgmConfig<T> {
    pub fn for_qp(qp: &CondensedQp<T>) -> Self {
        let (lo, hi) = qp.h_extremes;
        Self {
            alpha: T::one() / (hi + lo),
            eta: ((hi - lo) / (hi + lo)).max(T::zero()),
            rule: StepRule::FullGradient,
            tol_benchmark: T::tol(1e-12),
            iter_cap: 1_000_000,
        }
    }

    pub fn with_rule(mut self, rule: StepRule) -> Self {
        self.rule = rule;
        self
    }

    /// Multiplier applied to `Hν + Gx`.
    pub fn step_size(&self) -> T {
        match self.rule {
            StepRule::FullGradient => self.alpha + self.alpha,
            StepRule::HalfGradient => self.alpha,
        }
    }

    /// Certified contraction factor of `𝒯` towards `μ*(x)`.
    pub fn rate(&self) -> T {
        match self.rule {
            StepRule::FullGradient => self.eta,
            StepRule::HalfGradient => (T::one() + self.eta) * T::lit(0.5),
        }
    }

    /// The same operator with the optimal step size.
    fn optimal(&self) -> Self {
        Self { rule: StepRule::FullGradient, ..*self }
    }
}

pub fn project<T: Real>(qp: &CondensedQp<T>, nu: &[T]) -> Vec<T> {
    qp.feasible.project(nu)
}

fn step_unchecked<T: Real>(qp: &CondensedQp<T>, s: T, x: &[T], nu: &[T], out: &mut Vec<T>) {
    let g = qp.half_grad(x, nu);
    out.clear();
    out.extend(nu.iter().zip(&g).map(|(&v, &gi)| v - s * gi));
    qp.feasible.project_in_place(out);
}

fn check_dims<T: Real>(qp: &CondensedQp<T>, x: &[T], nu: &[T]) -> Result<()> {
    if x.len() != qp.n {
        return Err(Error::dims("pgm: x", qp.n, x.len()));
    }
    if nu.len() != qp.dim() {
        return Err(Error::dims("pgm: ν", qp.dim(), nu.len()));
    }
    Ok(())
}

/// One application of `𝒯(x, ν)`.
pub fn pgm_step<T: Real>(qp: &CondensedQp<T>, cfg: &PgmConfig<T>, x: &[T], nu: &[T]) -> Result<Vec<T>> {
    check_dims(qp, x, nu)?;
    let mut out = Vec::with_capacity(nu.len());
    step_unchecked(qp, cfg.step_size(), x, nu, &mut out);
    Ok(out)
}

/// `𝒯^ℓ(x, ν)`; `ℓ = 0` returns `ν`.
pub fn pgm_iterate<T: Real>(qp: &CondensedQp<T>, cfg: &PgmConfig<T>, x: &[T], nu: &[T], ell: usize) -> Result<Vec<T>> {
    check_dims(qp, x, nu)?;
    let s = cfg.step_size();
    let mut cur = nu.to_vec();
    let mut next = Vec::with_capacity(nu.len());
    for _ in 0..ell {
        step_unchecked(qp, s, x, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `‖ν − 𝒯(x, ν)‖` under the optimal step.
pub fn fixed_point_residual<T: Real>(qp: &CondensedQp<T>, cfg: &PgmConfig<T>, x: &[T], nu: &[T]) -> Result<T> {
    let next = pgm_step(qp, &cfg.optimal(), x, nu)?;
    Ok(vector::dist(nu, &next))
}

#[derive(Debug, Clone)]
pub struct BenchmarkSolution<T> {
    pub nu: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

/// `μ*(x)` to fixed-point residual `tol_benchmark·(1 + ‖ν‖)`.
pub fn solve_benchmark<T: Real>(qp: &CondensedQp<T>, cfg: &PgmConfig<T>, x: &[T]) -> Result<Vec<T>> {
    let start = project(qp, &qp.unconstrained_minimizer(x)?);
    Ok(solve_benchmark_from(qp, cfg, x, &start)?.nu)
}

/// Benchmark solve from a given feasible starting point.
///
/// Runs the optimally stepped PGM and, every few iterations, solves the
/// equality-constrained subproblem on the current free set exactly. A
/// candidate is accepted only if it meets the residual tolerance.
pub fn solve_benchmark_from<T: Real>(
    qp: &CondensedQp<T>,
    cfg: &PgmConfig<T>,
    x: &[T],
    start: &[T],
) -> Result<BenchmarkSolution<T>> {
    check_dims(qp, x, start)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("benchmark state"));
    }
    let opt = cfg.optimal();
    let s = opt.step_size();
    let tol = cfg.tol_benchmark;
    let accept = |nu: &[T], next: &[T]| vector::dist(nu, next) <= tol * (T::one() + vector::norm(nu));

    let mut cur = project(qp, start);
    let mut next = Vec::with_capacity(cur.len());
    let mut residual = T::infinity();
    for it in 0..=cfg.iter_cap {
        step_unchecked(qp, s, x, &cur, &mut next);
        residual = vector::dist(&cur, &next);
        if accept(&cur, &next) {
            return Ok(BenchmarkSolution { nu: cur, iterations: it, residual });
        }
        if it % POLISH_EVERY == 0 {
            if let Some(candidate) = polish(qp, x, &cur) {
                let mut check = Vec::with_capacity(candidate.len());
                step_unchecked(qp, s, x, &candidate, &mut check);
                if accept(&candidate, &check) {
                    let residual = vector::dist(&candidate, &check);
                    return Ok(BenchmarkSolution { nu: candidate, iterations: it, residual });
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Err(Error::NoConvergence {
        what: "benchmark PGM solve",
        iterations: cfg.iter_cap,
        residual: residual.to_f64_lossy(),
        history: Vec::new(),
    })
}

/// Exact minimiser with the coordinates currently on a bound held fixed.
fn polish<T: Real>(qp: &CondensedQp<T>, x: &[T], nu: &[T]) -> Option<Vec<T>> {
    let (lo, up) = (qp.feasible.lower(), qp.feasible.upper());
    let free: Vec<usize> = (0..nu.len()).filter(|&i| nu[i] > lo[i] && nu[i] < up[i]).collect();
    if free.is_empty() {
        return Some(nu.to_vec());
    }
    let gx = qp.g.matvec(x);
    let mut h_ff = Matrix::zeros(free.len(), free.len());
    let mut rhs = Vec::with_capacity(free.len());
    for (a, &i) in free.iter().enumerate() {
        let mut r = -gx[i];
        for j in 0..nu.len() {
            if free.binary_search(&j).is_err() {
                r = r - qp.h[(i, j)] * nu[j];
            }
        }
        rhs.push(r);
        for (b, &j) in free.iter().enumerate() {
            h_ff[(a, b)] = qp.h[(i, j)];
        }
    }
    let sol = spd_solve(&h_ff, &Matrix::column(&rhs), "H_FF").ok()?;
    let mut out = nu.to_vec();
    for (a, &i) in free.iter().enumerate() {
        out[i] = sol.as_slice()[a];
    }
    if !qp.feasible.contains(&out, T::zero()) {
        return None;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condensed::build_condensed;
    use crate::plant::{BoxSet, LtiModel};
    use approx::assert_abs_diff_eq;

    fn scalar_qp(box_radius: f64, horizon: usize) -> CondensedQp<f64> {
        let model = LtiModel::new(Matrix::from_diag(&[1.1]), Matrix::from_diag(&[0.5])).unwrap();
        let one = Matrix::identity(1);
        build_condensed(&model, &one, &one, &one.scale(2.0), &BoxSet::symmetric(box_radius, 1).unwrap(), horizon)
            .unwrap()
    }

    /// Hand-made QP with `H = [2]`, `G = [1]`, box `[−1, 1]`.
    fn one_dim_qp() -> CondensedQp<f64> {
        let mut qp = scalar_qp(1.0, 1);
        qp.h = Matrix::from_diag(&[2.0]);
        qp.g = Matrix::from_diag(&[1.0]);
        qp.h_extremes = (2.0, 2.0);
        qp
    }

    #[test]
    fn projection_clamps_and_is_idempotent() {
        let qp = scalar_qp(1.0, 1);
        assert_eq!(project(&qp, &[2.5]), vec![1.0]);
        assert_eq!(project(&qp, &[0.3]), vec![0.3]);
    }

    #[test]
    fn one_dimensional_boundary_solution() {
        let qp = one_dim_qp();
        let cfg = PgmConfig::for_qp(&qp);
        assert_eq!(cfg.eta, 0.0);
        let nu = pgm_iterate(&qp, &cfg, &[10.0], &[0.7], 20).unwrap();
        assert_abs_diff_eq!(nu[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(solve_benchmark(&qp, &cfg, &[10.0]).unwrap()[0], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_iterations_is_identity_and_one_is_a_step() {
        let qp = scalar_qp(1.0, 3);
        let cfg = PgmConfig::for_qp(&qp);
        let nu = [0.2, -0.4, 0.9];
        assert_eq!(pgm_iterate(&qp, &cfg, &[1.0], &nu, 0).unwrap(), nu.to_vec());
        assert_eq!(pgm_iterate(&qp, &cfg, &[1.0], &nu, 1).unwrap(), pgm_step(&qp, &cfg, &[1.0], &nu).unwrap());
    }

    #[test]
    fn benchmark_matches_linear_solve_when_box_inactive() {
        let qp = scalar_qp(1e6, 4);
        let cfg = PgmConfig::for_qp(&qp);
        let x = [3.0];
        let exact = qp.unconstrained_minimizer(&x).unwrap();
        let got = solve_benchmark_from(&qp, &cfg, &x, &[0.0; 4]).unwrap();
        assert!(vector::dist(&exact, &got.nu) < 1e-8);
        assert_eq!(solve_benchmark(&qp, &cfg, &[0.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn benchmark_is_a_fixed_point() {
        let qp = scalar_qp(0.4, 5);
        let cfg = PgmConfig::for_qp(&qp);
        let x = [2.0];
        let mu = solve_benchmark(&qp, &cfg, &x).unwrap();
        let again = pgm_step(&qp, &cfg, &x, &mu).unwrap();
        assert!(vector::dist(&mu, &again) <= 1e-12 * (1.0 + vector::norm(&mu)));
        let half = cfg.with_rule(StepRule::HalfGradient);
        let again = pgm_step(&qp, &half, &x, &mu).unwrap();
        assert!(vector::dist(&mu, &again) <= 1e-12 * (1.0 + vector::norm(&mu)));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let qp = scalar_qp(0.4, 5);
        let mut cfg = PgmConfig::for_qp(&qp);
        cfg.iter_cap = 0;
        cfg.tol_benchmark = 0.0;
        match solve_benchmark_from(&qp, &cfg, &[2.0], &[0.4; 5]) {
            Err(Error::NoConvergence { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn rates_per_rule() {
        let qp = scalar_qp(1.0, 3);
        let cfg = PgmConfig::for_qp(&qp);
        assert_eq!(cfg.rate(), cfg.eta);
        assert_abs_diff_eq!(cfg.with_rule(StepRule::HalfGradient).rate(), (1.0 + cfg.eta) / 2.0);
        assert_eq!("half".parse::<StepRule>().unwrap(), StepRule::HalfGradient);
        assert!("x".parse::<StepRule>().is_err());
    }
}
