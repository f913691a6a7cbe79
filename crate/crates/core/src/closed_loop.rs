//! Benchmark and time-distributed closed loops.

use std::io::{Read, Write};
use std::time::Instant;

use crate::condensed::CondensedQp;
use crate::error::{Error, Result};
use crate::numerics::{vector, Matrix};
use crate::pgm::{pgm_iterate, solve_benchmark, PgmConfig};
use crate::plant::{ConvexSet, LtiModel};
use crate::scalar::Real;

const DIVERGENCE_FACTOR: f64 = 1e6;

/// Per-step iteration counts `ℓ_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum IterationSchedule {
    Constant(usize),
    PerStep(Vec<usize>),
}

impl IterationSchedule {
    pub fn at(&self, k: usize) -> usize {
        match self {
            IterationSchedule::Constant(l) => *l,
            IterationSchedule::PerStep(v) => v[k],
        }
    }

    pub fn expand(&self, horizon: usize) -> Result<Vec<usize>> {
        let v: Vec<usize> = match self {
            IterationSchedule::Constant(l) => vec![*l; horizon],
            IterationSchedule::PerStep(v) => {
                if v.len() < horizon {
                    return Err(Error::dims("iteration schedule length", horizon, v.len()));
                }
                v[..horizon].to_vec()
            }
        };
        if let Some(k) = v.iter().position(|&l| l == 0) {
            return Err(Error::InvalidArgument(format!("iteration schedule: ℓ_{k} = 0, need ℓ_k ≥ 1")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// Divergence guard tripped after computing `x_{step+1}`.
    Diverged {
        step: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Record wall-clock controller time; zeros otherwise.
    pub timing: bool,
    /// Controller evaluations averaged per step when timing.
    pub repeats: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { timing: true, repeats: 1 }
    }
}

/// Time-indexed record of one closed-loop run of length `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun<T: Real> {
    /// `x_0..x_T`.
    pub states: Vec<Vec<T>>,
    /// Full input vectors `u_k^μ` (or `μ*(x_k)`), `k < T`; empty for ingested files.
    pub inputs: Vec<Vec<T>>,
    /// First blocks `S u_k`.
    pub applied: Vec<Vec<T>>,
    /// `‖d_k‖ = ‖u_k^μ − μ*(x_k)‖`; suboptimal runs only.
    pub d_norms: Option<Vec<T>>,
    /// `‖u_{k−1}^μ − μ*(x_k)‖` with `u_{−1}^μ = ν_init`.
    pub warm_errors: Option<Vec<T>>,
    /// `‖ν_init − μ*(x_0)‖`.
    pub delta_u0: Option<T>,
    pub solve_times: Vec<f64>,
    pub ells: Option<Vec<usize>>,
    pub status: RunStatus,
}

impl<T: Real> ClosedLoopRun<T> {
    /// Number of applied inputs.
    pub fn len(&self) -> usize {
        self.applied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.applied.is_empty()
    }

    pub fn is_suboptimal(&self) -> bool {
        self.d_norms.is_some()
    }

    pub fn is_stable(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn total_solve_time(&self) -> f64 {
        self.solve_times.iter().sum()
    }

    /// Path vector over `x_0..x_{T−1}`.
    pub fn path_vectors(&self) -> PathVectors<T> {
        path_vectors(&self.states[..self.len().max(1)])
    }
}

/// `x*_{k+1} = Ax*_k + B̄μ*(x*_k)`.
pub fn run_benchmark<T: Real>(
    model: &LtiModel<T>,
    qp: &CondensedQp<T>,
    cfg: &PgmConfig<T>,
    x0: &[T],
    horizon: usize,
) -> Result<ClosedLoopRun<T>> {
    check_start(model, x0, horizon)?;
    let mut states = vec![x0.to_vec()];
    let mut inputs = Vec::with_capacity(horizon);
    let mut applied = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let x = &states[k];
        let mu = solve_benchmark(qp, cfg, x).map_err(|e| Error::at_step(k, e))?;
        let u = qp.first_input(&mu);
        let next = model.step(x, &u)?;
        inputs.push(mu);
        applied.push(u);
        states.push(next);
    }
    Ok(ClosedLoopRun {
        states,
        inputs,
        applied,
        d_norms: None,
        warm_errors: None,
        delta_u0: None,
        solve_times: vec![0.0; horizon],
        ells: None,
        status: RunStatus::Completed,
    })
}

/// `u_k^μ = 𝒯^{ℓ_k}(x_k, u_{k−1}^μ)`, `x_{k+1} = Ax_k + BSu_k^μ`.
///
/// `μ*(x_k)` is solved at every visited state to record `d_k`; that solve is
/// not included in the timings.
#[allow(clippy::too_many_arguments)]
pub fn run_tdmpc<T: Real>(
    model: &LtiModel<T>,
    qp: &CondensedQp<T>,
    cfg: &PgmConfig<T>,
    x0: &[T],
    nu_init: &[T],
    schedule: &IterationSchedule,
    horizon: usize,
    opts: RunOptions,
) -> Result<ClosedLoopRun<T>> {
    check_start(model, x0, horizon)?;
    if nu_init.len() != qp.dim() {
        return Err(Error::dims("run_tdmpc: ν_init", qp.dim(), nu_init.len()));
    }
    if !qp.feasible.contains(nu_init, T::zero()) {
        return Err(Error::InvalidArgument("run_tdmpc: ν_init outside 𝒰^N".into()));
    }
    let ells = schedule.expand(horizon)?;
    let guard = T::lit(DIVERGENCE_FACTOR) * (T::one() + vector::norm(x0));
    let repeats = opts.repeats.max(1);

    let mut states = vec![x0.to_vec()];
    let mut inputs = Vec::with_capacity(horizon);
    let mut applied = Vec::with_capacity(horizon);
    let mut d_norms = Vec::with_capacity(horizon);
    let mut warm_errors = Vec::with_capacity(horizon);
    let mut solve_times = Vec::with_capacity(horizon);
    let mut delta_u0 = T::zero();
    let mut status = RunStatus::Completed;
    let mut prev = nu_init.to_vec();
    for (k, &ell) in ells.iter().enumerate() {
        let x = states[k].clone();
        let (u, elapsed) = if opts.timing {
            let start = Instant::now();
            let mut u = Vec::new();
            for _ in 0..repeats {
                u = pgm_iterate(qp, cfg, &x, &prev, ell)?;
            }
            (u, start.elapsed().as_secs_f64() / repeats as f64)
        } else {
            (pgm_iterate(qp, cfg, &x, &prev, ell)?, 0.0)
        };
        let mu = solve_benchmark(qp, cfg, &x).map_err(|e| Error::at_step(k, e))?;
        let warm = vector::dist(&prev, &mu);
        if k == 0 {
            delta_u0 = warm;
        }
        warm_errors.push(warm);
        d_norms.push(vector::dist(&u, &mu));
        let ua = qp.first_input(&u);
        let next = model.step(&x, &ua)?;
        let diverged = !next.iter().all(|v| v.is_finite()) || vector::norm(&next) > guard;
        solve_times.push(elapsed);
        applied.push(ua);
        inputs.push(u.clone());
        states.push(next);
        prev = u;
        if diverged {
            status = RunStatus::Diverged { step: k };
            break;
        }
    }
    let steps = applied.len();
    Ok(ClosedLoopRun {
        states,
        inputs,
        applied,
        d_norms: Some(d_norms),
        warm_errors: Some(warm_errors),
        delta_u0: Some(delta_u0),
        solve_times,
        ells: Some(ells[..steps].to_vec()),
        status,
    })
}

fn check_start<T: Real>(model: &LtiModel<T>, x0: &[T], horizon: usize) -> Result<()> {
    if x0.len() != model.state_dim() {
        return Err(Error::dims("closed loop: x0", model.state_dim(), x0.len()));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("closed loop: x0"));
    }
    if horizon < 1 {
        return Err(Error::InvalidArgument("closed loop: T must be at least 1".into()));
    }
    Ok(())
}

/// `‖x_T‖²_P + Σ_{k<T} ‖x_k‖²_Q + ‖u_k‖²_R` over the applied inputs.
pub fn cost_jt<T: Real>(run: &ClosedLoopRun<T>, q: &Matrix<T>, r: &Matrix<T>, p: &Matrix<T>) -> T {
    let steps = run.len();
    let stage: T = (0..steps).map(|k| q.quad_form(&run.states[k]) + r.quad_form(&run.applied[k])).sum();
    stage + p.quad_form(&run.states[steps])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathVectors<T> {
    /// `Δ_k = ‖x_k − x_{k−1}‖`, stored at index `k − 1`.
    pub delta: Vec<T>,
    /// `‖Δ‖₁`.
    pub s_t: T,
    /// `‖Δ‖₂`.
    pub s_t2: T,
}

/// Consecutive displacements of a state sequence.
pub fn path_vectors<T: Real>(states: &[Vec<T>]) -> PathVectors<T> {
    let delta: Vec<T> = states.windows(2).map(|w| vector::dist(&w[1], &w[0])).collect();
    PathVectors { s_t: vector::norm1(&delta), s_t2: vector::norm(&delta), delta }
}

fn fmt_opt<T: Real>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `k, x_1..x_n, u_applied_1..u_m, norm_d_k, solve_time_s`.
///
/// Row `T` carries the terminal state with empty input columns.
pub fn write_run_csv<T: Real, W: Write>(run: &ClosedLoopRun<T>, out: W) -> Result<()> {
    let n = run.states[0].len();
    let m = run.applied.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_applied_{i}")));
    header.push("norm_d_k".into());
    header.push("solve_time_s".into());
    let io = |e: csv::Error| Error::Trajectory(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (k, x) in run.states.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        if k < run.len() {
            row.extend(run.applied[k].iter().map(|v| v.to_string()));
            row.push(fmt_opt(run.d_norms.as_ref().map(|d| d[k])));
            row.push(run.solve_times[k].to_string());
        } else {
            row.extend(std::iter::repeat_n(String::new(), m + 2));
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Trajectory(e.to_string()))?;
    Ok(())
}

/// Reads a trajectory written by [`write_run_csv`] or produced externally.
///
/// Full input vectors are not part of the schema, so `inputs` is empty.
pub fn read_run_csv<T: Real, R: Read>(input: R) -> Result<ClosedLoopRun<T>> {
    let mut rd = csv::Reader::from_reader(input);
    let bad = |msg: String| Error::Trajectory(msg);
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let n = cols.iter().filter(|c| c.starts_with("x_")).count();
    let m = cols.iter().filter(|c| c.starts_with("u_applied_")).count();
    let expected = 1 + n + m + 2;
    if n == 0
        || cols.len() != expected
        || cols[0] != "k"
        || cols[expected - 2] != "norm_d_k"
        || cols[expected - 1] != "solve_time_s"
    {
        return Err(bad(format!("unexpected header: {}", cols.join(","))));
    }
    let parse = |s: &str, line: usize| -> Result<Option<T>> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s.parse().map_err(|_| bad(format!("line {line}: cannot parse '{s}'")))?;
        T::from_f64(v).map(Some).ok_or_else(|| bad(format!("line {line}: value out of range")))
    };
    let mut states = Vec::new();
    let mut applied = Vec::new();
    let mut d_norms = Vec::new();
    let mut times = Vec::new();
    let mut terminal_seen = false;
    for (idx, rec) in rd.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != expected {
            return Err(bad(format!("line {line}: expected {expected} fields, found {}", rec.len())));
        }
        if terminal_seen {
            return Err(bad(format!("line {line}: rows after the terminal state")));
        }
        let x = (1..=n)
            .map(|i| parse(&rec[i], line)?.ok_or_else(|| bad(format!("line {line}: missing state"))))
            .collect::<Result<Vec<T>>>()?;
        states.push(x);
        let u: Vec<Option<T>> = (0..m).map(|i| parse(&rec[1 + n + i], line)).collect::<Result<_>>()?;
        if u.iter().all(Option::is_none) {
            terminal_seen = true;
            continue;
        }
        applied.push(
            u.into_iter()
                .map(|v| v.ok_or_else(|| bad(format!("line {line}: partial input"))))
                .collect::<Result<Vec<T>>>()?,
        );
        d_norms.push(parse(&rec[1 + n + m], line)?);
        times.push(parse(&rec[2 + n + m], line)?.map_or(0.0, |t| t.to_f64_lossy()));
    }
    if states.len() != applied.len() + 1 {
        return Err(bad("trajectory must end with a terminal-state row".into()));
    }
    let d_norms = if d_norms.iter().all(Option::is_some) && !d_norms.is_empty() {
        Some(d_norms.into_iter().flatten().collect())
    } else {
        None
    };
    Ok(ClosedLoopRun {
        states,
        inputs: Vec::new(),
        applied,
        d_norms,
        warm_errors: None,
        delta_u0: None,
        solve_times: times,
        ells: None,
        status: RunStatus::Completed,
    })
}
