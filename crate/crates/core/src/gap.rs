//! Suboptimality-gap analysis over recorded runs.
//!
//! Indexing: `Δ` and the slice of `η̃` paired with it run over `k = 1..T−1`;
//! `η̃_0` multiplies `‖δu₀‖` only. Slices named `delta` and `a` store index
//! `k` at position `k − 1`.

use crate::closed_loop::{cost_jt, ClosedLoopRun};
use crate::error::{Error, Result};
use crate::numerics::{vector, Matrix};
use crate::scalar::Real;

/// Per-step rates and the derived convergence-rate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector<T> {
    /// `η_0..η_{T−1}`.
    pub rates: Vec<T>,
    /// `η̃_0..η̃_{T−1}`.
    pub tilde: Vec<T>,
}

impl<T: Real> RateVector<T> {
    /// `‖(η̃_1, …, η̃_{T−1})‖₂`.
    pub fn eta_bar(&self) -> T {
        vector::norm(self.tilde.get(1..).unwrap_or(&[]))
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// `η̃_k = Σ_{i=k}^{T−1} Π_{j=k}^{i} η_j` by the backward recursion.
pub fn eta_tilde<T: Real>(rates: &[T]) -> Result<RateVector<T>> {
    for (index, &r) in rates.iter().enumerate() {
        if !(r >= T::zero() && r < T::one()) {
            return Err(Error::RateOutOfRange { index, rate: r.to_f64_lossy() });
        }
    }
    let mut tilde = vec![T::zero(); rates.len()];
    let mut next = T::zero();
    for k in (0..rates.len()).rev() {
        next = rates[k] * (T::one() + next);
        tilde[k] = next;
    }
    Ok(RateVector { rates: rates.to_vec(), tilde })
}

/// `η^{ℓ_k}`; `ℓ_k` large enough underflows to exactly 0.
pub fn rate_power<T: Real>(eta: T, ell: usize) -> T {
    if ell <= i32::MAX as usize {
        eta.powi(ell as i32)
    } else {
        eta.powf(T::of_usize(ell))
    }
}

/// [`eta_tilde`] of the rates `η^{ℓ_k}`.
pub fn eta_tilde_mpc<T: Real>(eta: T, ells: &[usize]) -> Result<RateVector<T>> {
    if !(eta >= T::zero() && eta < T::one()) {
        return Err(Error::RateOutOfRange { index: 0, rate: eta.to_f64_lossy() });
    }
    if let Some(k) = ells.iter().position(|&l| l == 0) {
        return Err(Error::InvalidArgument(format!("ℓ_{k} = 0, need ℓ_k ≥ 1")));
    }
    let rates: Vec<T> = ells.iter().map(|&l| rate_power(eta, l)).collect();
    eta_tilde(&rates)
}

/// `J_T(x₀, μ) − J_T(x₀, μ*)`.
pub fn empirical_gap<T: Real>(
    sub: &ClosedLoopRun<T>,
    bench: &ClosedLoopRun<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    p: &Matrix<T>,
) -> Result<T> {
    if sub.len() != bench.len() {
        return Err(Error::dims("empirical_gap: run length T", bench.len(), sub.len()));
    }
    let gap = vector::dist(&sub.states[0], &bench.states[0]);
    let scale = T::one() + vector::norm(&bench.states[0]);
    if gap > T::tol(1e-12) * scale {
        return Err(Error::InvalidArgument(format!("empirical_gap: initial states differ by {gap}")));
    }
    Ok(cost_jt(sub, q, r, p) - cost_jt(bench, q, r, p))
}

fn check_lengths<T: Real>(delta: &[T], a: Option<&[T]>, rv: &RateVector<T>) -> Result<()> {
    let want = rv.len().saturating_sub(1);
    if delta.len() != want {
        return Err(Error::dims("gap: Δ length (T − 1)", want, delta.len()));
    }
    if let Some(a) = a {
        if a.len() != want {
            return Err(Error::dims("gap: a length (T − 1)", want, a.len()));
        }
    }
    Ok(())
}

/// `Σ_{k=1}^{T−1} Δ_k η̃_k`.
pub fn path_rate_product<T: Real>(delta: &[T], rv: &RateVector<T>) -> Result<T> {
    check_lengths(delta, None, rv)?;
    Ok(vector::dot(delta, &rv.tilde[1.min(rv.len())..]))
}

/// `η̃_0‖δu₀‖ + (a + LΔ)ᵀη̃`, the bound on `Σ_k ‖d_k‖` and the
/// constant-free complexity of the general gap bound.
pub fn input_error_bound<T: Real>(l: T, delta: &[T], a: Option<&[T]>, rv: &RateVector<T>, delta_u0: T) -> Result<T> {
    check_lengths(delta, a, rv)?;
    if rv.is_empty() {
        return Ok(T::zero());
    }
    let inner: T = (1..rv.len()).map(|k| (a.map_or(T::zero(), |a| a[k - 1]) + l * delta[k - 1]) * rv.tilde[k]).sum();
    Ok(rv.tilde[0] * delta_u0 + inner)
}

/// `M̄(η̃_0‖δu₀‖ + (a + LΔ)ᵀη̃)` for any policy meeting the contraction rates.
pub fn general_gap_bound<T: Real>(
    m_bar: T,
    l: T,
    delta: &[T],
    a: Option<&[T]>,
    rv: &RateVector<T>,
    delta_u0: T,
) -> Result<T> {
    Ok(m_bar * input_error_bound(l, delta, a, rv, delta_u0)?)
}

/// `η/(1 − η)·(S_T + ‖a‖₁)`.
pub fn constant_rate_complexity<T: Real>(eta: T, s_t: T, a_l1: T) -> Result<T> {
    if !(eta >= T::zero() && eta < T::one()) {
        return Err(Error::RateOutOfRange { index: 0, rate: eta.to_f64_lossy() });
    }
    Ok(eta / (T::one() - eta) * (s_t + a_l1))
}

/// The general bound with `a = 0` and rates `η^{ℓ_k}`.
pub fn mpc_gap_bound<T: Real>(m_bar: T, l: T, eta: T, ells: &[usize], delta: &[T], delta_u0: T) -> Result<T> {
    let rv = eta_tilde_mpc(eta, ells)?;
    general_gap_bound(m_bar, l, delta, None, &rv, delta_u0)
}

/// Gap analysis of one suboptimal run against the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport<T> {
    /// Constant `ℓ`, when the schedule is constant.
    pub ell: Option<usize>,
    /// Per-step rate for a constant schedule (`rate^ℓ`).
    pub step_rate: Option<T>,
    pub r_t: T,
    pub j_t_benchmark: T,
    pub j_t_suboptimal: T,
    pub s_t: T,
    pub s_t2: T,
    pub delta: Vec<T>,
    pub rates: RateVector<T>,
    /// `Δᵀη̃` over `k = 1..T−1`.
    pub path_rate_product: T,
    /// `η̃_0‖δu₀‖ + LΔᵀη̃`.
    pub complexity_general: T,
    /// `r/(1 − r)·S_T` with the constant step rate `r`.
    pub complexity_cor1: Option<T>,
    pub bound_thm8: Option<T>,
    pub measured_input_error: T,
    pub delta_u0: T,
    pub stable: bool,
    pub compute_time_s: f64,
}

impl<T: Real> GapReport<T> {
    #[allow(clippy::too_many_arguments)]
    /// `rate` is the certified contraction factor of the operator used in `sub`.
    pub fn evaluate(
        sub: &ClosedLoopRun<T>,
        bench: &ClosedLoopRun<T>,
        q: &Matrix<T>,
        r: &Matrix<T>,
        p: &Matrix<T>,
        rate: T,
        l: T,
        m_bar: Option<T>,
    ) -> Result<Self> {
        let ells =
            sub.ells.as_ref().ok_or_else(|| Error::InvalidArgument("gap report needs a suboptimal run".into()))?;
        let stable = sub.is_stable() && sub.len() == bench.len();
        let steps = sub.len();
        let bench_prefix = truncate(bench, steps);
        let r_t = empirical_gap(sub, &bench_prefix, q, r, p)?;
        let j_b = cost_jt(&bench_prefix, q, r, p);
        let pv = sub.path_vectors();
        let delta = if steps == 0 { Vec::new() } else { pv.delta.clone() };
        let rv = eta_tilde_mpc(rate, ells)?;
        let du0 = sub.delta_u0.unwrap_or(T::zero());
        let prod = path_rate_product(&delta, &rv)?;
        let general = input_error_bound(l, &delta, None, &rv, du0)?;
        let constant = ells.windows(2).all(|w| w[0] == w[1]).then(|| ells.first().copied()).flatten();
        let step_rate = constant.map(|e| rate_power(rate, e));
        let complexity_cor1 = match step_rate {
            Some(sr) => Some(constant_rate_complexity(sr, pv.s_t, T::zero())?),
            None => None,
        };
        let bound_thm8 = m_bar.map(|mb| mb * general);
        let measured = sub.d_norms.as_ref().map_or(T::zero(), |d| vector::norm1(d));
        Ok(Self {
            ell: constant,
            step_rate,
            r_t,
            j_t_benchmark: j_b,
            j_t_suboptimal: j_b + r_t,
            s_t: pv.s_t,
            s_t2: pv.s_t2,
            delta,
            rates: rv,
            path_rate_product: prod,
            complexity_general: general,
            complexity_cor1,
            bound_thm8,
            measured_input_error: measured,
            delta_u0: du0,
            stable,
            compute_time_s: sub.total_solve_time(),
        })
    }

    /// `ell,eta_pow_ell,R_T_empirical,complexity_cor1,bound_thm8,S_T,S_T2,compute_time_s,stable_flag`.
    pub fn csv_header() -> &'static str {
        "ell,eta_pow_ell,R_T_empirical,complexity_cor1,bound_thm8,S_T,S_T2,compute_time_s,stable_flag"
    }

    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.ell.map(|e| e.to_string()).unwrap_or_default(),
            opt(self.step_rate),
            self.r_t.to_string(),
            opt(self.complexity_cor1),
            opt(self.bound_thm8),
            self.s_t.to_string(),
            self.s_t2.to_string(),
            self.compute_time_s.to_string(),
            u8::from(self.stable).to_string(),
        ]
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<T>| v.map_or_else(|| "n/a".to_string(), |x| x.to_string());
        let mut s = String::new();
        s += &format!("ell = {}\n", self.ell.map_or_else(|| "varying".to_string(), |e| e.to_string()));
        s += &format!("step_rate = {}\n", opt(self.step_rate));
        s += &format!("R_T = {}\n", self.r_t);
        s += &format!("J_T_benchmark = {}\n", self.j_t_benchmark);
        s += &format!("J_T_suboptimal = {}\n", self.j_t_suboptimal);
        s += &format!("S_T = {}\n", self.s_t);
        s += &format!("S_T2 = {}\n", self.s_t2);
        s += &format!("eta_bar = {}\n", self.rates.eta_bar());
        s += &format!("delta_dot_eta_tilde = {}\n", self.path_rate_product);
        s += &format!("complexity_general = {}\n", self.complexity_general);
        s += &format!("complexity_cor1 = {}\n", opt(self.complexity_cor1));
        s += &format!(
            "bound_thm8 = {}\n",
            self.bound_thm8.map_or_else(|| "pending probe".to_string(), |x| x.to_string())
        );
        s += &format!("sum_norm_d = {}\n", self.measured_input_error);
        s += &format!("delta_u0 = {}\n", self.delta_u0);
        s += &format!("stable = {}\n", self.stable);
        s
    }
}

fn truncate<T: Real>(run: &ClosedLoopRun<T>, steps: usize) -> ClosedLoopRun<T> {
    if run.len() == steps {
        return run.clone();
    }
    let mut out = run.clone();
    out.states.truncate(steps + 1);
    out.applied.truncate(steps);
    out.inputs.truncate(steps.min(out.inputs.len()));
    out.solve_times.truncate(steps);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn brute_force(rates: &[f64]) -> Vec<f64> {
        let t = rates.len();
        (0..t).map(|k| (k..t).map(|i| rates[k..=i].iter().product::<f64>()).sum()).collect()
    }

    #[test]
    fn constant_half_rate() {
        let rv = eta_tilde(&[0.5; 4]).unwrap();
        assert_eq!(rv.tilde, vec![0.9375, 0.875, 0.75, 0.5]);
        assert_eq!(eta_tilde(&[0.0; 3]).unwrap().tilde, vec![0.0; 3]);
        assert_eq!(rv.tilde, brute_force(&[0.5; 4]));
    }

    #[test]
    fn rejects_rates_outside_unit_interval() {
        assert!(matches!(eta_tilde(&[0.5, 1.0]), Err(Error::RateOutOfRange { index: 1, .. })));
        assert!(eta_tilde(&[-0.1]).is_err());
        assert!(eta_tilde_mpc(0.5, &[1, 0]).is_err());
    }

    #[test]
    fn mpc_reduction_and_tail_nulling() {
        let rv = eta_tilde_mpc(0.8, &[3; 5]).unwrap();
        let e = 0.8f64.powi(3);
        for (k, &v) in rv.tilde.iter().enumerate() {
            let closed = e * (1.0 - e.powi((5 - k) as i32)) / (1.0 - e);
            assert_abs_diff_eq!(v, closed, epsilon = 1e-14);
        }
        let rv = eta_tilde_mpc(0.9, &[2, 2, 100_000, 100_000]).unwrap();
        assert_eq!(&rv.tilde[2..], &[0.0, 0.0]);
    }

    #[test]
    fn three_step_hand_example() {
        // T = 3, all rates 0.5: η̃ = (0.875, 0.75, 0.5).
        // Δ = (Δ_1, Δ_2) = (1, 2), a = (1, 1), L = 1, ‖δu₀‖ = 1, M̄ = 1:
        // 0.875·1 + (1 + 1)·0.75 + (1 + 2)·0.5 = 3.875
        let rv = eta_tilde(&[0.5; 3]).unwrap();
        assert_abs_diff_eq!(rv.tilde[0], 0.875);
        let b = general_gap_bound(1.0, 1.0, &[1.0, 2.0], Some(&[1.0, 1.0]), &rv, 1.0).unwrap();
        assert_abs_diff_eq!(b, 3.875, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_bounds() {
        let rv = eta_tilde(&[0.0; 4]).unwrap();
        assert_eq!(general_gap_bound(5.0, 2.0, &[1.0; 3], None, &rv, 3.0).unwrap(), 0.0);
        let rv = eta_tilde(&[0.3; 4]).unwrap();
        let b = general_gap_bound(5.0, 2.0, &[0.0; 3], None, &rv, 3.0).unwrap();
        assert_abs_diff_eq!(b, 5.0 * rv.tilde[0] * 3.0, epsilon = 1e-14);
        assert!(general_gap_bound(1.0, 1.0, &[0.0; 2], None, &rv, 0.0).is_err());
    }

    #[test]
    fn complexity_arithmetic() {
        assert_eq!(constant_rate_complexity(0.0, 5.0, 1.0).unwrap(), 0.0);
        assert_eq!(constant_rate_complexity(0.5, 3.0, 0.0).unwrap(), 3.0);
        assert!(constant_rate_complexity(1.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn mpc_bound_specialises_general_bound() {
        let ells: [usize; 4] = [1, 4, 2, 7];
        let delta = [0.3, 0.1, 0.05];
        let rates: Vec<f64> = ells.iter().map(|&l| 0.7f64.powi(l as i32)).collect();
        let rv = eta_tilde(&rates).unwrap();
        let g = general_gap_bound(3.0, 1.5, &delta, None, &rv, 0.4).unwrap();
        let m = mpc_gap_bound(3.0, 1.5, 0.7, &ells, &delta, 0.4).unwrap();
        assert_abs_diff_eq!(g, m, epsilon = 1e-15);
        let far = mpc_gap_bound(3.0, 1.5, 0.7, &[1_000_000; 4], &delta, 0.4).unwrap();
        assert_eq!(far, 0.0);
    }
}
