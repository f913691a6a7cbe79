//! Certified constants for the optimal and time-distributed MPC loops.

use crate::condensed::CondensedQp;
use crate::error::{Error, Result};
use crate::numerics::{
    mat_sqrt, spd_solve, spectral_norm, sym_eig_pd, vector, weighted_extremes, weighted_spectrum, Matrix,
};
use crate::pgm::{solve_benchmark, PgmConfig};
use crate::plant::LtiModel;
use crate::scalar::Real;

const C_CAP: f64 = 1e12;
const BETA_FLOOR: f64 = 1e-12;

/// Fitted E-δISS constants of the benchmark closed loop (empirical).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdissConstants<T> {
    pub c0: T,
    pub c_w: T,
    pub rho: T,
}

/// `‖H^{-1/2}‖·‖H^{-1/2}G‖`.
pub fn lipschitz_l<T: Real>(qp: &CondensedQp<T>) -> Result<T> {
    let roots = mat_sqrt(&qp.h, "H")?;
    Ok(spectral_norm(&roots.inv_sqrt) * spectral_norm(&(&roots.inv_sqrt * &qp.g)))
}

/// `sqrt(max(1e-12, 1 − λ_W⁻(Q)))`.
pub fn decay_beta<T: Real>(qp: &CondensedQp<T>) -> Result<T> {
    let (lo, _) = weighted_extremes(&qp.q, &qp.w)?;
    Ok((T::one() - lo).max(T::lit(BETA_FLOOR)).sqrt())
}

/// Largest `c` with `‖x‖²_P ≤ c ⟹ −Kx ∈ 𝒰`, capped at `1e12`.
pub fn terminal_level_c<T: Real>(p: &Matrix<T>, k: &Matrix<T>, lower: &[T], upper: &[T]) -> Result<T> {
    if k.cols() != p.rows() || k.rows() != lower.len() || lower.len() != upper.len() {
        return Err(Error::dims(
            "terminal_level_c",
            format!("K {}x{}", lower.len(), p.rows()),
            format!("K {}x{}", k.rows(), k.cols()),
        ));
    }
    let pinv_kt = spd_solve(p, &k.transpose(), "P")?;
    let cap = T::lit(C_CAP);
    let mut c = cap;
    for i in 0..k.rows() {
        let s: T = (0..p.rows()).map(|j| k[(i, j)] * pinv_kt[(j, i)]).sum();
        if s > T::zero() {
            let u = lower[i].abs().min(upper[i]);
            c = c.min(u * u / s);
        }
    }
    Ok(c)
}

/// `(ω, σ, κ)` coupling the plant and the optimiser.
pub fn interconnection_constants<T: Real>(qp: &CondensedQp<T>, model: &LtiModel<T>) -> Result<(T, T, T)> {
    let h_roots = mat_sqrt(&qp.h, "H")?;
    let h_is = spectral_norm(&h_roots.inv_sqrt);
    let hg = &h_roots.inv_sqrt * &qp.g;
    let gb = &qp.g * &qp.b_bar;
    let omega = T::one() + h_is * spectral_norm(&(&hg * &qp.b_bar));
    let w_roots = mat_sqrt(&qp.w, "W")?;
    let sigma = spectral_norm(&(&w_roots.sqrt * &qp.b_bar));

    let p_roots = mat_sqrt(&qp.p, "P")?;
    let a_minus_i = model.a() - &Matrix::identity(qp.n);
    let first = h_is * spectral_norm(&(&(&hg * &a_minus_i) * &p_roots.inv_sqrt));
    let (_, lam_gb) = weighted_spectrum(&gb, &qp.h)?;
    let (_, lam_w) = weighted_extremes(&qp.w, &qp.p)?;
    let slack = T::tol(1e-10) * lam_w.abs().max(T::one());
    if lam_w < T::one() - slack {
        return Err(Error::InvalidArgument(format!(
            "λ_P⁺(W) = {lam_w} < 1: W and P are inconsistent with ‖x‖_P ≤ ψ(x) ≤ ‖x‖_W"
        )));
    }
    let second = h_is * (lam_gb.max(T::zero()) * (lam_w - T::one()).max(T::zero())).sqrt();
    Ok((omega, sigma, first + second))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauStar<T> {
    /// Coupling weight; `+∞` when the infimum is only approached.
    pub tau: T,
    pub epsilon: T,
    /// `ε < 1`.
    pub certified: bool,
}

/// `ε(τ) = max{β + τκe, (σ + τωe)/τ}` with `e = η^ℓ`.
pub fn epsilon_of_tau<T: Real>(beta: T, kappa: T, sigma: T, omega: T, e: T, tau: T) -> T {
    (beta + tau * kappa * e).max((sigma + tau * omega * e) / tau)
}

/// Minimiser of `ε(τ)` over `τ > 0` for a given `e = η^ℓ`.
pub fn tau_star<T: Real>(beta: T, kappa: T, sigma: T, omega: T, e: T) -> TauStar<T> {
    let a = kappa * e;
    let b = beta - omega * e;
    let (tau, epsilon) = if sigma <= T::zero() {
        (T::zero(), beta.max(omega * e))
    } else if a > T::zero() {
        let disc = (b * b + T::lit(4.0) * a * sigma).sqrt();
        let tau = if b >= T::zero() { T::lit(2.0) * sigma / (b + disc) } else { (disc - b) / (a + a) };
        (tau, epsilon_of_tau(beta, kappa, sigma, omega, e, tau))
    } else if b > T::zero() {
        let tau = sigma / b;
        (tau, epsilon_of_tau(beta, kappa, sigma, omega, e, tau))
    } else {
        (T::infinity(), beta.max(omega * e))
    };
    TauStar { tau, epsilon, certified: epsilon < T::one() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllStar<T> {
    pub value: T,
    /// `max(1, ⌈value⌉)`.
    pub iterations: usize,
}

/// Minimum iteration count for the time-distributed stability certificate.
pub fn ell_star<T: Real>(beta: T, kappa: T, sigma: T, omega: T, eta: T) -> Result<EllStar<T>> {
    if !(eta >= T::zero() && eta < T::one()) {
        return Err(Error::RateOutOfRange { index: 0, rate: eta.to_f64_lossy() });
    }
    if eta == T::zero() {
        return Ok(EllStar { value: T::one(), iterations: 1 });
    }
    let value = ((T::one() - beta).ln() - (sigma * kappa + omega * (T::one() - beta)).ln()) / eta.ln();
    let iterations =
        if value.is_finite() { value.ceil().max(T::one()).to_usize().unwrap_or(usize::MAX) } else { usize::MAX };
    Ok(EllStar { value, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCostConstants<T> {
    pub x_m: T,
    pub u_m: T,
    pub m_x: T,
    pub m_u: T,
    /// `None` until fitted E-δISS constants are supplied.
    pub m_bar: Option<T>,
}

/// `M_x = 2x_m max(‖Q‖, ‖P‖)`, `M_u = 2u_m‖R‖`, and `M̄` when `(c_w, ρ)` are known.
pub fn stage_cost_lipschitz<T: Real>(
    qp: &CondensedQp<T>,
    r_n: T,
    l: T,
    l_u: T,
    ediss: Option<&EdissConstants<T>>,
) -> Result<StageCostConstants<T>> {
    let p_roots = mat_sqrt(&qp.p, "P")?;
    let x_m = r_n * spectral_norm(&p_roots.inv_sqrt);
    let u_m = qp.feasible.half_diameter();
    let m_x = T::lit(2.0) * x_m * spectral_norm(&qp.q).max(spectral_norm(&qp.p));
    let m_u = T::lit(2.0) * u_m * spectral_norm(&qp.r);
    let m_bar = ediss.map(|e| m_bar(m_u, m_x, l, l_u, e));
    Ok(StageCostConstants { x_m, u_m, m_x, m_u, m_bar })
}

/// `M_u + c_w L_u (M_u L + M_x)/(1 − ρ)`.
pub fn m_bar<T: Real>(m_u: T, m_x: T, l: T, l_u: T, e: &EdissConstants<T>) -> T {
    m_u + e.c_w * l_u * (m_u * l + m_x) / (T::one() - e.rho)
}

/// `ψ(x) = sqrt(J_N*(x))` together with `μ*(x)`.
pub fn psi<T: Real>(qp: &CondensedQp<T>, cfg: &PgmConfig<T>, x: &[T]) -> Result<(T, Vec<T>)> {
    let mu = solve_benchmark(qp, cfg, x)?;
    let j = qp.cost(x, &mu)?;
    Ok((j.max(T::zero()).sqrt(), mu))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership<T> {
    pub psi: T,
    /// `‖z − μ*(x)‖`.
    pub input_error: T,
    pub in_gamma: bool,
    pub in_sigma: bool,
}

/// Tests `x ∈ Γ_N` and `(x, z) ∈ Σ_N`.
pub fn roa_membership<T: Real>(
    qp: &CondensedQp<T>,
    cfg: &PgmConfig<T>,
    certs: &Certificates<T>,
    x: &[T],
    z: &[T],
) -> Result<Membership<T>> {
    let (psi, mu) = psi(qp, cfg, x)?;
    if z.len() != mu.len() {
        return Err(Error::dims("roa_membership: z", mu.len(), z.len()));
    }
    let input_error = vector::dist(z, &mu);
    let in_gamma = psi <= certs.r_n;
    let in_sigma = in_gamma && input_error <= certs.sigma_radius();
    Ok(Membership { psi, input_error, in_gamma, in_sigma })
}

/// Worst `ψ(f(x))/ψ(x)` over `samples`; errors if it exceeds `β`.
pub fn verify_decay_beta<T: Real>(
    qp: &CondensedQp<T>,
    cfg: &PgmConfig<T>,
    model: &LtiModel<T>,
    beta: T,
    samples: &[Vec<T>],
) -> Result<T> {
    let mut worst = T::zero();
    for x in samples {
        let (px, mu) = psi(qp, cfg, x)?;
        if px <= T::zero() {
            continue;
        }
        let next = model.step(x, &qp.first_input(&mu))?;
        let (pn, _) = psi(qp, cfg, &next)?;
        worst = worst.max(pn / px);
    }
    if worst > beta * (T::one() + T::tol(1e-9)) {
        return Err(Error::EmpiricalViolation {
            check: "ψ-decay".into(),
            worst: worst.to_f64_lossy(),
            limit: beta.to_f64_lossy(),
        });
    }
    Ok(worst)
}

/// All constants for one instance.
#[derive(Debug, Clone)]
pub struct Certificates<T: Real> {
    pub lambda_h: (T, T),
    pub alpha: T,
    /// `(λ⁺ − λ⁻)/(λ⁺ + λ⁻)` of `H`.
    pub eta: T,
    /// Contraction factor of the configured operator; used in every bound.
    pub rate: T,
    pub step_rule: &'static str,
    pub l: T,
    pub beta: T,
    pub c: T,
    pub d: T,
    pub r_n: T,
    pub omega: T,
    pub sigma: T,
    pub kappa: T,
    pub ell_star: EllStar<T>,
    pub l_u: T,
    pub stage: StageCostConstants<T>,
    pub ediss: Option<EdissConstants<T>>,
    pub norm_p_inv_sqrt: T,
    pub norm_w_inv_sqrt: T,
}

impl<T: Real> Certificates<T> {
    /// `k` is the terminal LQR gain (law `u = −Kx`) paired with `qp.p`.
    pub fn compute(model: &LtiModel<T>, qp: &CondensedQp<T>, cfg: &PgmConfig<T>, k: &Matrix<T>) -> Result<Self> {
        let l = lipschitz_l(qp)?;
        let beta = decay_beta(qp)?;
        let c = terminal_level_c(&qp.p, k, qp.input_box.lower(), qp.input_box.upper())?;
        let q_eig = sym_eig_pd(&qp.q, "Q")?;
        let p_eig = sym_eig_pd(&qp.p, "P")?;
        let d = c * q_eig.min() / p_eig.max();
        let r_n = (T::of_usize(qp.horizon) * d + c).sqrt();
        let (omega, sigma, kappa) = interconnection_constants(qp, model)?;
        let rate = cfg.rate();
        let ell_star = ell_star(beta, kappa, sigma, omega, rate)?;
        let l_u = spectral_norm(model.b());
        let stage = stage_cost_lipschitz(qp, r_n, l, l_u, None)?;
        let w_eig = sym_eig_pd(&qp.w, "W")?;
        Ok(Self {
            lambda_h: qp.h_extremes,
            alpha: cfg.alpha,
            eta: cfg.eta,
            rate,
            step_rule: cfg.rule.name(),
            l,
            beta,
            c,
            d,
            r_n,
            omega,
            sigma,
            kappa,
            ell_star,
            l_u,
            stage,
            ediss: None,
            norm_p_inv_sqrt: T::one() / p_eig.min().sqrt(),
            norm_w_inv_sqrt: T::one() / w_eig.min().sqrt(),
        })
    }

    /// Attaches fitted E-δISS constants and fills in `M̄`.
    pub fn with_ediss(mut self, e: EdissConstants<T>) -> Self {
        self.stage.m_bar = Some(m_bar(self.stage.m_u, self.stage.m_x, self.l, self.l_u, &e));
        self.ediss = Some(e);
        self
    }

    /// `(1 − β) r_N / σ`.
    pub fn sigma_radius(&self) -> T {
        (T::one() - self.beta) * self.r_n / self.sigma
    }

    pub fn tau_star(&self, ell: usize) -> TauStar<T> {
        tau_star(self.beta, self.kappa, self.sigma, self.omega, self.rate.powi(ell as i32))
    }

    /// `h‖P^{-1/2}‖‖x₀‖_W Π ε_i` for `ℓ_0..ℓ_k`, with `τ` optimised at `ℓ_0`.
    ///
    /// Returns `None` when some `ε_i ≥ 1`.
    pub fn state_bound(&self, w: &Matrix<T>, x0: &[T], ells: &[usize]) -> Option<T> {
        let first = *ells.first()?;
        let ts = self.tau_star(first);
        if !ts.tau.is_finite() {
            return None;
        }
        let h = T::one() + ts.tau * self.rate.powi(first as i32) * self.l * self.norm_w_inv_sqrt;
        let mut prod = T::one();
        for &ell in ells {
            let eps = epsilon_of_tau(self.beta, self.kappa, self.sigma, self.omega, self.rate.powi(ell as i32), ts.tau);
            if eps >= T::one() {
                return None;
            }
            prod = prod * eps;
        }
        Some(h * self.norm_p_inv_sqrt * w.quad_form(x0).sqrt() * prod)
    }

    /// Flat `key = value` report, one constant per line.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("lambda_min_H", self.lambda_h.0.to_string());
        put("lambda_max_H", self.lambda_h.1.to_string());
        put("alpha", self.alpha.to_string());
        put("eta", self.eta.to_string());
        put("step_rule", self.step_rule.to_string());
        put("rate", self.rate.to_string());
        put("L", self.l.to_string());
        put("beta", self.beta.to_string());
        put("c", self.c.to_string());
        put("d", self.d.to_string());
        put("r_N", self.r_n.to_string());
        put("omega", self.omega.to_string());
        put("sigma", self.sigma.to_string());
        put("kappa", self.kappa.to_string());
        put("ell_star", self.ell_star.value.to_string());
        put("ell_star_ceil", self.ell_star.iterations.to_string());
        put("L_u", self.l_u.to_string());
        put("x_m", self.stage.x_m.to_string());
        put("u_m", self.stage.u_m.to_string());
        put("M_x", self.stage.m_x.to_string());
        put("M_u", self.stage.m_u.to_string());
        match &self.ediss {
            Some(e) => {
                put("c0_empirical", e.c0.to_string());
                put("c_w_empirical", e.c_w.to_string());
                put("rho_empirical", e.rho.to_string());
            }
            None => {
                put("c0_empirical", "pending probe".into());
                put("c_w_empirical", "pending probe".into());
                put("rho_empirical", "pending probe".into());
            }
        }
        put("M_bar", self.stage.m_bar.map_or_else(|| "pending probe".to_string(), |v| v.to_string()));
        out
    }
}
