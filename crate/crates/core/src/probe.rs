//! Empirical checks of the stability theory: E-δISS constant fitting,
//! contraction and Lipschitz audits, and the finite-horizon converse
//! Lyapunov construction.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::certificates::{psi, EdissConstants};
use crate::condensed::CondensedQp;
use crate::error::{Error, Result};
use crate::gap::rate_power;
use crate::numerics::{mat_sqrt, vector, Matrix};
use crate::pgm::{pgm_iterate, solve_benchmark, PgmConfig};
use crate::plant::LtiModel;
use crate::scalar::Real;

const RHO_CEILING: f64 = 1.0 - 1e-6;
const CHECK_SLACK: f64 = 1e-9;
const MAX_REJECTIONS: usize = 100_000;

/// Autonomous closed loop `x⁺ = f(x)` on a domain `𝒟`.
pub trait ClosedLoopMap<T: Real> {
    fn dim(&self) -> usize;
    fn step(&self, x: &[T]) -> Result<Vec<T>>;
    fn in_domain(&self, _x: &[T]) -> Result<bool> {
        Ok(true)
    }
}

/// `x⁺ = Ax`.
#[derive(Debug, Clone)]
pub struct LinearMap<T: Real>(pub Matrix<T>);

impl<T: Real> ClosedLoopMap<T> for LinearMap<T> {
    fn dim(&self) -> usize {
        self.0.rows()
    }

    fn step(&self, x: &[T]) -> Result<Vec<T>> {
        self.0.try_matvec(x)
    }
}

/// `x⁺ = Ax + B̄μ*(x)` on `{ψ ≤ radius}`.
#[derive(Debug, Clone)]
pub struct BenchmarkLoop<'a, T: Real> {
    pub model: &'a LtiModel<T>,
    pub qp: &'a CondensedQp<T>,
    pub cfg: &'a PgmConfig<T>,
    pub radius: T,
}

impl<T: Real> ClosedLoopMap<T> for BenchmarkLoop<'_, T> {
    fn dim(&self) -> usize {
        self.model.state_dim()
    }

    fn step(&self, x: &[T]) -> Result<Vec<T>> {
        let mu = solve_benchmark(self.qp, self.cfg, x)?;
        self.model.step(x, &self.qp.first_input(&mu))
    }

    fn in_domain(&self, x: &[T]) -> Result<bool> {
        let (p, _) = psi(self.qp, self.cfg, x)?;
        Ok(p <= self.radius * (T::one() + T::tol(CHECK_SLACK)))
    }
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n).map(|_| T::lit(StandardNormal.sample(rng))).collect()
}

/// Uniform point of the unit ball.
fn unit_ball<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    loop {
        let g: Vec<T> = gaussian(rng, n);
        let norm = vector::norm(&g);
        if norm > T::zero() {
            let u: f64 = rng.random();
            let radius = T::lit(u.powf(1.0 / n as f64));
            return vector::scale(&g, radius / norm);
        }
    }
}

/// Random vector with norm uniform in `[0, radius]` and uniform direction.
fn ball_shell<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, radius: T) -> Vec<T> {
    let g: Vec<T> = gaussian(rng, n);
    let norm = vector::norm(&g);
    if norm <= T::zero() {
        return vec![T::zero(); n];
    }
    let u: f64 = rng.random();
    vector::scale(&g, radius * T::lit(u) / norm)
}

/// Rejection sampler for `{x : ψ(x) ≤ radius}` from the ellipsoid `‖x‖_P ≤ radius`.
#[derive(Debug, Clone)]
pub struct LevelSetSampler<'a, T: Real> {
    qp: &'a CondensedQp<T>,
    cfg: &'a PgmConfig<T>,
    radius: T,
    p_inv_sqrt: Matrix<T>,
}

impl<'a, T: Real> LevelSetSampler<'a, T> {
    pub fn new(qp: &'a CondensedQp<T>, cfg: &'a PgmConfig<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidArgument(format!("sampling radius must be positive, got {radius}")));
        }
        Ok(Self { qp, cfg, radius, p_inv_sqrt: mat_sqrt(&qp.p, "P")?.inv_sqrt })
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        for _ in 0..MAX_REJECTIONS {
            let z = unit_ball(rng, self.qp.n);
            let x = vector::scale(&self.p_inv_sqrt.matvec(&z), self.radius);
            if psi(self.qp, self.cfg, &x)?.0 <= self.radius {
                return Ok(x);
            }
        }
        Err(Error::NoConvergence {
            what: "level-set rejection sampling",
            iterations: MAX_REJECTIONS,
            residual: f64::NAN,
            history: Vec::new(),
        })
    }

    pub fn sample_many<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<Vec<T>>> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

fn trajectory<T: Real, F: ClosedLoopMap<T>>(
    f: &F,
    x0: &[T],
    disturbances: &[Vec<T>],
    horizon: usize,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(x0.to_vec());
    for k in 0..horizon {
        let mut next = f.step(&out[k])?;
        if let Some(w) = disturbances.get(k) {
            next = vector::add(&next, w);
        }
        out.push(next);
    }
    Ok(out)
}

fn all_in_domain<T: Real, F: ClosedLoopMap<T>>(f: &F, xs: &[Vec<T>]) -> Result<bool> {
    for x in xs {
        if !f.in_domain(x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Conservative fit of `r_k ≤ c ρ^k` over ratio sequences with `r_0 = 1`.
///
/// `ρ = max r_k^{1/k}` over `k ≥ 1`. If transient growth pushes that to 1,
/// `ρ` is instead the worst decay rate `(r_k / r_{k₀})^{1/(k−k₀)}` after
/// `k₀ = H/2`. Either way `c = max r_k / ρ^k`. Returns `(c, ρ, used_tail)`.
pub fn geometric_sup_fit<T: Real>(ratios: &[Vec<T>]) -> Result<(T, T, bool)> {
    let mut rho = T::zero();
    for r in ratios {
        for (k, &v) in r.iter().enumerate().skip(1) {
            if v > T::zero() {
                rho = rho.max(v.powf(T::one() / T::of_usize(k)));
            }
        }
    }
    let ceiling = T::lit(RHO_CEILING);
    let mut used_tail = false;
    if rho >= ceiling {
        used_tail = true;
        rho = T::zero();
        for r in ratios {
            let k0 = r.len() / 2;
            let base = r.get(k0).copied().unwrap_or(T::zero());
            if base <= T::zero() {
                continue;
            }
            for (k, &v) in r.iter().enumerate().skip(k0 + 1) {
                rho = rho.max((v / base).powf(T::one() / T::of_usize(k - k0)));
            }
        }
    }
    if !(rho < ceiling) {
        return Err(Error::EmpiricalViolation {
            check: "geometric decay fit: closed loop not empirically incrementally stable".into(),
            worst: rho.to_f64_lossy(),
            limit: RHO_CEILING,
        });
    }
    let rho = rho.max(T::min_positive_value());
    let mut c = T::zero();
    for r in ratios {
        for (k, &v) in r.iter().enumerate() {
            c = c.max(v / rho.powi(k as i32));
        }
    }
    Ok((c, rho, used_tail))
}

#[derive(Debug, Clone, Copy)]
pub struct EdissSpec<T> {
    pub pairs: usize,
    pub horizon: usize,
    pub r_w: T,
    pub holdout: usize,
}

#[derive(Debug, Clone)]
pub struct EdissFit<T> {
    pub constants: EdissConstants<T>,
    pub r_w: T,
    pub fit_samples: usize,
    pub holdout_samples: usize,
    /// Pairs discarded because a trajectory left the domain.
    pub discarded: usize,
    pub used_tail_fit: bool,
    pub holdout_violations: usize,
    /// Largest `lhs / rhs` of the full inequality on the holdout set.
    pub holdout_worst_ratio: T,
}

impl<T: Real> EdissFit<T> {
    pub fn to_report(&self) -> String {
        let c = &self.constants;
        format!(
            "c0_empirical = {}\nc_w_empirical = {}\nrho_empirical = {}\nr_w = {}\nfit_samples = {}\nholdout_samples = {}\ndiscarded = {}\ntail_fit = {}\nholdout_violations = {}\nholdout_worst_ratio = {}\n",
            c.c0, c.c_w, c.rho, self.r_w, self.fit_samples, self.holdout_samples, self.discarded,
            self.used_tail_fit, self.holdout_violations, self.holdout_worst_ratio
        )
    }
}

fn deviation<T: Real>(x: &[Vec<T>], y: &[Vec<T>]) -> Vec<T> {
    x.iter().zip(y).map(|(a, b)| vector::dist(a, b)).collect()
}

/// Right-hand side of the E-δISS inequality at every `k`.
fn ediss_rhs<T: Real>(c: &EdissConstants<T>, e0: T, w_norms: &[T], horizon: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut conv = T::zero();
    for k in 0..=horizon {
        if k > 0 {
            conv = conv * c.rho + w_norms.get(k - 1).copied().unwrap_or(T::zero());
        }
        out.push(c.c0 * c.rho.powi(k as i32) * e0 + c.c_w * conv);
    }
    out
}

/// Fits `(c₀, c_w, ρ)` by sup-fits over sampled pairs, then re-verifies the
/// full inequality on a fresh holdout set with per-step disturbances.
pub fn fit_ediss<T: Real, F, S, R>(f: &F, mut sample: S, rng: &mut R, spec: &EdissSpec<T>) -> Result<EdissFit<T>>
where
    F: ClosedLoopMap<T>,
    S: FnMut(&mut R) -> Result<Vec<T>>,
    R: Rng,
{
    let n = f.dim();
    let h = spec.horizon.max(1);
    let mut discarded = 0usize;
    let zero_w: Vec<Vec<T>> = Vec::new();

    // Homogeneous phase: independent starts and near pairs.
    let mut ratios = Vec::new();
    for i in 0..spec.pairs {
        let x0 = sample(rng)?;
        let y0 = if i % 2 == 0 { sample(rng)? } else { vector::add(&x0, &ball_shell(rng, n, spec.r_w)) };
        let e0 = vector::dist(&x0, &y0);
        if e0 <= T::zero() || !f.in_domain(&y0)? {
            discarded += 1;
            continue;
        }
        let xs = trajectory(f, &x0, &zero_w, h)?;
        let ys = trajectory(f, &y0, &zero_w, h)?;
        ratios.push(deviation(&xs, &ys).into_iter().map(|d| d / e0).collect::<Vec<T>>());
    }
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("fit_ediss: no usable homogeneous pairs".into()));
    }
    let (c0, rho, used_tail) = geometric_sup_fit(&ratios)?;

    // Forced phase: identical starts, one pulse.
    let mut c_w = T::zero();
    for _ in 0..spec.pairs {
        let x0 = sample(rng)?;
        let pulse_at = rng.random_range(0..h);
        let w = ball_shell(rng, n, spec.r_w);
        let w_norm = vector::norm(&w);
        if w_norm <= T::zero() {
            continue;
        }
        let mut ws = vec![vec![T::zero(); n]; h];
        ws[pulse_at] = w;
        let xs = trajectory(f, &x0, &zero_w, h)?;
        let ys = trajectory(f, &x0, &ws, h)?;
        if !all_in_domain(f, &ys)? {
            discarded += 1;
            continue;
        }
        for (k, d) in deviation(&xs, &ys).into_iter().enumerate().skip(pulse_at + 1) {
            c_w = c_w.max(d / (rho.powi((k - pulse_at - 1) as i32) * w_norm));
        }
    }

    // Mixed phase: raise c_w where the combined inequality is still short.
    let mut constants = EdissConstants { c0, c_w, rho };
    for _ in 0..spec.pairs {
        let Some((e, e0, w_norms)) = disturbed_pair(f, &mut sample, rng, spec, h, &mut discarded)? else {
            continue;
        };
        let mut conv = T::zero();
        for k in 1..=h {
            conv = conv * rho + w_norms[k - 1];
            let homogeneous = c0 * rho.powi(k as i32) * e0;
            if conv > T::zero() && e[k] > homogeneous + constants.c_w * conv {
                constants.c_w = (e[k] - homogeneous) / conv;
            }
        }
    }
    // Small safety margin against rounding in the re-evaluation.
    constants.c0 = constants.c0 * (T::one() + T::tol(1e-12));
    constants.c_w = constants.c_w * (T::one() + T::tol(1e-12));

    // Holdout sweep.
    let mut violations = 0usize;
    let mut worst = T::zero();
    let mut holdout_samples = 0usize;
    for _ in 0..spec.holdout {
        let Some((e, e0, w_norms)) = disturbed_pair(f, &mut sample, rng, spec, h, &mut discarded)? else {
            continue;
        };
        holdout_samples += 1;
        let rhs = ediss_rhs(&constants, e0, &w_norms, h);
        for (lhs, rhs) in e.iter().zip(&rhs) {
            if *lhs > T::zero() {
                let ratio = *lhs / *rhs;
                worst = worst.max(ratio);
                if ratio > T::one() + T::tol(CHECK_SLACK) {
                    violations += 1;
                }
            }
        }
    }
    Ok(EdissFit {
        constants,
        r_w: spec.r_w,
        fit_samples: ratios.len(),
        holdout_samples,
        discarded,
        used_tail_fit: used_tail,
        holdout_violations: violations,
        holdout_worst_ratio: worst,
    })
}

type PairDeviation<T> = (Vec<T>, T, Vec<T>);

/// Nominal `x` against `y` with per-step disturbances of norm at most `r_w`.
fn disturbed_pair<T: Real, F, S, R>(
    f: &F,
    sample: &mut S,
    rng: &mut R,
    spec: &EdissSpec<T>,
    h: usize,
    discarded: &mut usize,
) -> Result<Option<PairDeviation<T>>>
where
    F: ClosedLoopMap<T>,
    S: FnMut(&mut R) -> Result<Vec<T>>,
    R: Rng,
{
    let n = f.dim();
    let x0 = sample(rng)?;
    let y0 = if rng.random::<bool>() { sample(rng)? } else { vector::add(&x0, &ball_shell(rng, n, spec.r_w)) };
    let ws: Vec<Vec<T>> = (0..h).map(|_| ball_shell(rng, n, spec.r_w)).collect();
    let xs = trajectory(f, &x0, &[], h)?;
    let ys = trajectory(f, &y0, &ws, h)?;
    if !all_in_domain(f, &ys)? {
        *discarded += 1;
        return Ok(None);
    }
    let w_norms = ws.iter().map(|w| vector::norm(w)).collect();
    Ok(Some((deviation(&xs, &ys), vector::dist(&x0, &y0), w_norms)))
}

#[derive(Debug, Clone)]
pub struct ContractionAudit<T> {
    pub samples: usize,
    pub worst_ratio: T,
    /// `(x, ν, ℓ)` attaining the worst ratio.
    pub witness: Option<(Vec<T>, Vec<T>, usize)>,
    pub ell_max: usize,
}

impl<T: Real> ContractionAudit<T> {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= T::one() + T::tol(CHECK_SLACK)
    }

    pub fn check(&self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let (x, nu, ell) = self.witness.clone().unwrap_or_default();
        Err(Error::EmpiricalViolation {
            check: format!("PGM contraction (witness x = {x:?}, ν = {nu:?}, ℓ = {ell})"),
            worst: self.worst_ratio.to_f64_lossy(),
            limit: 1.0 + CHECK_SLACK,
        })
    }
}

/// Largest `ℓ` audited: at most 50 and small enough that `rate^ℓ ≥ 1e-4`,
/// which keeps the ratio above the benchmark's solve accuracy.
pub fn audit_ell_max<T: Real>(rate: T) -> usize {
    if rate <= T::zero() {
        return 1;
    }
    let cap = (T::lit(1e-4).ln() / rate.ln()).floor().to_usize().unwrap_or(50);
    cap.clamp(1, 50)
}

/// `max ‖𝒯^ℓ(x, ν) − μ*(x)‖ / (rate^ℓ ‖ν − μ*(x)‖ + 1e-300)` over samples.
pub fn audit_contraction<T: Real, R: Rng>(
    qp: &CondensedQp<T>,
    cfg: &PgmConfig<T>,
    states: &[Vec<T>],
    rng: &mut R,
) -> Result<ContractionAudit<T>> {
    let rate = cfg.rate();
    let ell_max = audit_ell_max(rate);
    let (lo, up) = (qp.feasible.lower(), qp.feasible.upper());
    let guard = T::lit(1e-300).max(T::min_positive_value());
    let mut worst = T::zero();
    let mut witness = None;
    for x in states {
        let nu: Vec<T> = lo.iter().zip(up).map(|(&l, &u)| l + (u - l) * T::lit(rng.random::<f64>())).collect();
        let ell = rng.random_range(1..=ell_max);
        let mu = solve_benchmark(qp, cfg, x)?;
        let it = pgm_iterate(qp, cfg, x, &nu, ell)?;
        let num = vector::dist(&it, &mu);
        let den = rate_power(rate, ell) * vector::dist(&nu, &mu) + guard;
        let ratio = num / den;
        if ratio > worst || witness.is_none() {
            worst = worst.max(ratio);
            witness = Some((x.clone(), nu, ell));
        }
    }
    Ok(ContractionAudit { samples: states.len(), worst_ratio: worst, witness, ell_max })
}

/// `max ‖μ*(x) − μ*(y)‖ / ‖x − y‖` over the given pairs.
pub fn audit_lipschitz<T: Real>(qp: &CondensedQp<T>, cfg: &PgmConfig<T>, pairs: &[(Vec<T>, Vec<T>)]) -> Result<T> {
    let mut worst = T::zero();
    for (x, y) in pairs {
        let d = vector::dist(x, y);
        if d <= T::zero() {
            continue;
        }
        let mx = solve_benchmark(qp, cfg, x)?;
        let my = solve_benchmark(qp, cfg, y)?;
        worst = worst.max(vector::dist(&mx, &my) / d);
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct LyapunovReport<T> {
    pub n_v: usize,
    /// Fitted `‖φ_k(ξ)‖ ≤ d‖ξ‖λ^k`.
    pub d: T,
    pub lambda: T,
    pub c2: T,
    pub beta_sq: T,
    pub samples: usize,
    /// `min (V − ‖ξ‖²)/‖ξ‖²`.
    pub lower_margin: T,
    /// `min (c₂‖ξ‖² − V)/‖ξ‖²`.
    pub upper_margin: T,
    /// `min (β²V(ξ) − V(f(ξ)))/‖ξ‖²`.
    pub decrease_margin: T,
}

impl<T: Real> LyapunovReport<T> {
    pub fn passed(&self) -> bool {
        let slack = -T::tol(CHECK_SLACK);
        self.lower_margin >= slack && self.upper_margin >= slack && self.decrease_margin >= slack
    }

    pub fn to_report(&self) -> String {
        format!(
            "N_V = {}\nd = {}\nlambda = {}\nc1 = 1\nc2 = {}\nbeta_sq = {}\nsamples = {}\nlower_margin = {}\nupper_margin = {}\ndecrease_margin = {}\npassed = {}\n",
            self.n_v, self.d, self.lambda, self.c2, self.beta_sq, self.samples,
            self.lower_margin, self.upper_margin, self.decrease_margin, self.passed()
        )
    }
}

/// `V(ξ) = Σ_{k<N_V} ‖φ_k(ξ)‖²` checked against `‖ξ‖² ≤ V ≤ c₂‖ξ‖²` and
/// `V(f(ξ)) ≤ β²V(ξ)`, with `(d, λ)` fitted over `decay_horizon` steps.
pub fn lyapunov_finite_horizon<T: Real, F: ClosedLoopMap<T>>(
    f: &F,
    n_v: usize,
    decay_horizon: usize,
    samples: &[Vec<T>],
) -> Result<LyapunovReport<T>> {
    if n_v == 0 {
        return Err(Error::InvalidArgument("N_V must be at least 1".into()));
    }
    let fit = DecayFit::collect(f, decay_horizon.max(n_v), samples)?;
    fit.check(n_v, samples.len())
}

/// As [`lyapunov_finite_horizon`], with `N_V` the smallest value giving
/// `d²λ^{2N_V} ≤ 1/2`, capped at `decay_horizon`.
pub fn lyapunov_auto<T: Real, F: ClosedLoopMap<T>>(
    f: &F,
    decay_horizon: usize,
    samples: &[Vec<T>],
) -> Result<LyapunovReport<T>> {
    let horizon = decay_horizon.max(1);
    let fit = DecayFit::collect(f, horizon, samples)?;
    let mut n_v = 1;
    while n_v < horizon && fit.d * fit.d * fit.lambda.powi(2 * n_v as i32) > T::lit(0.5) {
        n_v += 1;
    }
    fit.check(n_v, samples.len())
}

struct DecayFit<T> {
    trajs: Vec<Vec<Vec<T>>>,
    d: T,
    lambda: T,
}

impl<T: Real> DecayFit<T> {
    fn collect<F: ClosedLoopMap<T>>(f: &F, horizon: usize, samples: &[Vec<T>]) -> Result<Self> {
        let mut trajs = Vec::new();
        let mut ratios = Vec::new();
        for xi in samples {
            let nx = vector::norm(xi);
            let tr = trajectory(f, xi, &[], horizon)?;
            if nx > T::zero() {
                ratios.push(tr.iter().map(|x| vector::norm(x) / nx).collect::<Vec<T>>());
            }
            trajs.push(tr);
        }
        let (d, lambda) = if ratios.is_empty() {
            (T::one(), T::lit(0.5))
        } else {
            let (d, lambda, _) = geometric_sup_fit(&ratios)?;
            (d, lambda)
        };
        Ok(Self { trajs, d, lambda })
    }

    fn check(&self, n_v: usize, samples: usize) -> Result<LyapunovReport<T>> {
        let (d, lambda) = (self.d, self.lambda);
        let tail = d * d * lambda.powi(2 * n_v as i32);
        if tail >= T::one() {
            let need = ((d * d).ln() / (-T::lit(2.0) * lambda.ln()))
                .floor()
                .to_usize()
                .unwrap_or(usize::MAX)
                .saturating_add(1);
            return Err(Error::InvalidArgument(format!(
                "N_V = {n_v} too small: d²λ^(2N_V) = {tail} ≥ 1 (d = {d}, λ = {lambda}); need N_V ≥ {need}"
            )));
        }
        let c2 = d * d / (T::one() - lambda * lambda);
        let beta_sq = T::one() - (T::one() - tail) / c2;
        let mut lower = T::infinity();
        let mut upper = T::infinity();
        let mut decrease = T::infinity();
        for tr in &self.trajs {
            let n2 = vector::dot(&tr[0], &tr[0]);
            if n2 <= T::zero() || tr.len() <= n_v {
                continue;
            }
            let sq: Vec<T> = tr.iter().map(|x| vector::dot(x, x)).collect();
            let v: T = sq[..n_v].iter().copied().sum();
            let v_next: T = sq[1..=n_v].iter().copied().sum();
            lower = lower.min((v - n2) / n2);
            upper = upper.min((c2 * n2 - v) / n2);
            decrease = decrease.min((beta_sq * v - v_next) / n2);
        }
        Ok(LyapunovReport {
            n_v,
            d,
            lambda,
            c2,
            beta_sq,
            samples,
            lower_margin: lower,
            upper_margin: upper,
            decrease_margin: decrease,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_map() -> LinearMap<f64> {
        LinearMap(Matrix::from_diag(&[0.5]))
    }

    #[test]
    fn linear_contraction_fit_recovers_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = EdissSpec { pairs: 50, horizon: 20, r_w: 0.1, holdout: 50 };
        let sample = |r: &mut ChaCha8Rng| Ok(vec![r.random_range(-1.0..1.0)]);
        let fit = fit_ediss(&half_map(), sample, &mut rng, &spec).unwrap();
        assert!(fit.constants.rho <= 0.5 + 1e-9, "{}", fit.constants.rho);
        assert_abs_diff_eq!(fit.constants.c0, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.constants.c_w, 1.0, epsilon = 1e-6);
        assert_eq!(fit.holdout_violations, 0);
    }

    #[test]
    fn identical_pair_has_zero_deviation() {
        let f = half_map();
        let xs = trajectory(&f, &[0.3], &[], 5).unwrap();
        let ys = trajectory(&f, &[0.3], &[], 5).unwrap();
        assert!(deviation(&xs, &ys).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn unstable_map_is_rejected() {
        let f = LinearMap(Matrix::from_diag(&[1.05]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = EdissSpec { pairs: 10, horizon: 10, r_w: 0.1, holdout: 0 };
        let sample = |r: &mut ChaCha8Rng| Ok(vec![r.random_range(-1.0..1.0)]);
        assert!(matches!(fit_ediss(&f, sample, &mut rng, &spec), Err(Error::EmpiricalViolation { .. })));
    }

    #[test]
    fn transient_growth_uses_tail_fit() {
        // Nilpotent-plus-decay block has ‖x_1‖ > ‖x_0‖ for some starts.
        let a = Matrix::from_rows(&[[0.5, 3.0], [0.0, 0.5]]).unwrap();
        let mut ratios = Vec::new();
        let f = LinearMap(a);
        for x0 in [[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] {
            let tr = trajectory(&f, &x0, &[], 40).unwrap();
            let n0 = vector::norm(&x0);
            ratios.push(tr.iter().map(|x| vector::norm(x) / n0).collect::<Vec<f64>>());
        }
        let (c, rho, tail) = geometric_sup_fit(&ratios).unwrap();
        assert!(tail);
        assert!(rho < 1.0);
        for r in &ratios {
            for (k, v) in r.iter().enumerate() {
                assert!(*v <= c * rho.powi(k as i32) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn scalar_lyapunov_construction() {
        let rep = lyapunov_finite_horizon(&half_map(), 2, 10, &[vec![1.0], vec![-2.0]]).unwrap();
        assert_abs_diff_eq!(rep.d, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.lambda, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.c2, 4.0 / 3.0, epsilon = 1e-12);
        // V = 1.25ξ²
        assert_abs_diff_eq!(rep.lower_margin, 0.25, epsilon = 1e-12);
        assert!(rep.passed());
        let auto = lyapunov_auto(&half_map(), 10, &[vec![1.0], vec![-2.0]]).unwrap();
        assert_eq!(auto.n_v, 1);
        assert!(auto.passed());
        let zero = lyapunov_finite_horizon(&half_map(), 2, 10, &[vec![0.0]]).unwrap();
        assert!(zero.lower_margin.is_infinite());
    }

    #[test]
    fn lyapunov_rejects_short_horizon() {
        let a = Matrix::from_rows(&[[0.9, 2.0], [0.0, 0.9]]).unwrap();
        let err = lyapunov_finite_horizon(&LinearMap(a), 1, 60, &[vec![0.0, 1.0]]).unwrap_err();
        match err {
            Error::InvalidArgument(msg) => assert!(msg.contains("need N_V")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn audit_ell_cap() {
        assert_eq!(audit_ell_max(0.99), 50);
        assert_eq!(audit_ell_max(0.1), 4);
        assert_eq!(audit_ell_max(0.0), 1);
    }
}
