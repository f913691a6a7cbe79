//! The five verbs: `constants`, `sweep`, `probe`, `run`, `calibrate-N`.
//!
//! Each has a pure part returning structured results and a `cmd_*` wrapper
//! that writes files under the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tdmpc_core::certificates::{psi, roa_membership, verify_decay_beta, Membership};
use tdmpc_core::closed_loop::{run_benchmark, run_tdmpc, write_run_csv};
use tdmpc_core::numerics::{solve_dare, Matrix, Riccati};
use tdmpc_core::probe::{
    audit_contraction, audit_lipschitz, fit_ediss, lyapunov_auto, lyapunov_finite_horizon, BenchmarkLoop,
    ContractionAudit, EdissFit, EdissSpec, LevelSetSampler, LyapunovReport,
};
use tdmpc_core::{
    build_condensed, BoxSet, Certificates, ClosedLoopRun, CondensedQp, EdissConstants, GapReport, IterationSchedule,
    LtiModel, PgmConfig, RunOptions,
};

use crate::config::{ExperimentConfig, ModelSource, RawConfig};
use crate::error::CliError;
use crate::svg::{LogPlot, Series};

pub const CONSTANTS_FILE: &str = "constants.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_SVG: &str = "sweep.svg";
pub const BENCHMARK_FILE: &str = "run_benchmark.csv";
pub const PROBE_REPORT: &str = "probe_report.txt";
pub const EDISS_FILE: &str = "ediss.txt";
pub const CALIBRATE_FILE: &str = "calibrate_N.csv";
pub const CALIBRATED_CONFIG: &str = "calibrated.cfg";

/// Output-side switches that do not belong to the experiment itself.
#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub out_dir: PathBuf,
    pub svg: bool,
    pub timing: bool,
}

impl OutputOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), svg: false, timing: true }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Everything derived from a config before any simulation.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub model: LtiModel<f64>,
    pub riccati: Riccati<f64>,
    pub qp: CondensedQp<f64>,
    pub pgm: PgmConfig<f64>,
    pub certs: Certificates<f64>,
}

impl Setup {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let model = match &config.model {
            ModelSource::Continuous { a_c, b_c, ts } => LtiModel::from_continuous(a_c.clone(), b_c.clone(), *ts)?,
            ModelSource::Discrete { a, b } => LtiModel::new(a.clone(), b.clone())?,
        };
        let input_box = BoxSet::new(config.u_min.clone(), config.u_max.clone())
            .map_err(|e| CliError::Config(format!("input box: {e}")))?;
        let riccati = solve_dare(model.a(), model.b(), &config.q, &config.r)?;
        let qp = build_condensed(&model, &config.q, &config.r, &riccati.p, &input_box, config.horizon)?;
        let mut pgm = PgmConfig::for_qp(&qp).with_rule(config.step_rule);
        if let Some(t) = config.tol_benchmark {
            pgm.tol_benchmark = t;
        }
        if let Some(c) = config.iter_cap {
            pgm.iter_cap = c;
        }
        let certs = Certificates::compute(&model, &qp, &pgm, &riccati.k)?;
        Ok(Self { config, model, riccati, qp, pgm, certs })
    }

    fn run_options(&self, timing: bool) -> RunOptions {
        RunOptions { timing, repeats: self.config.repeats }
    }

    pub fn benchmark(&self) -> Result<ClosedLoopRun<f64>, CliError> {
        Ok(run_benchmark(&self.model, &self.qp, &self.pgm, &self.config.x0, self.config.steps)?)
    }

    pub fn tdmpc(&self, ell: usize, timing: bool) -> Result<ClosedLoopRun<f64>, CliError> {
        let nu0 = vec![0.0; self.qp.dim()];
        Ok(run_tdmpc(
            &self.model,
            &self.qp,
            &self.pgm,
            &self.config.x0,
            &nu0,
            &IterationSchedule::Constant(ell),
            self.config.steps,
            self.run_options(timing),
        )?)
    }

    /// Whether `(x₀, ν_init = 0)` lies in the certified region `Σ_N`.
    pub fn initial_membership(&self) -> Result<Membership<f64>, CliError> {
        let nu0 = vec![0.0; self.qp.dim()];
        Ok(roa_membership(&self.qp, &self.pgm, &self.certs, &self.config.x0, &nu0)?)
    }

    /// `"inside certified ROA"` or `"outside certified ROA"` for the configured start.
    pub fn roa_label(&self) -> Result<&'static str, CliError> {
        Ok(if self.initial_membership()?.in_sigma { "inside certified ROA" } else { "outside certified ROA" })
    }

    /// Sampling radius for the probe: `max(r_N, ψ(x₀))` unless configured.
    pub fn probe_radius(&self) -> Result<f64, CliError> {
        match self.config.probe.radius {
            Some(r) => Ok(r),
            None => Ok(self.certs.r_n.max(psi(&self.qp, &self.pgm, &self.config.x0)?.0)),
        }
    }
}

// ---------------------------------------------------------------- constants

pub fn read_ediss(path: &Path) -> Result<Option<EdissConstants<f64>>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw = RawConfig::parse(&text, &path.display().to_string())?;
    Ok(Some(EdissConstants {
        c0: raw.scalar("c0_empirical")?,
        c_w: raw.scalar("c_w_empirical")?,
        rho: raw.scalar("rho_empirical")?,
    }))
}

/// Certificates, with fitted E-δISS constants attached when a previous
/// `probe` left them in the output directory.
pub fn constants(setup: &Setup, out: &OutputOptions) -> Result<Certificates<f64>, CliError> {
    let certs = setup.certs.clone();
    Ok(match read_ediss(&out.path(EDISS_FILE))? {
        Some(e) => certs.with_ediss(e),
        None => certs,
    })
}

pub fn cmd_constants(setup: &Setup, out: &OutputOptions) -> Result<PathBuf, CliError> {
    let certs = constants(setup, out)?;
    let mut text = format!("N = {}\n", setup.config.horizon);
    text += &certs.to_report();
    out.write(CONSTANTS_FILE, text.as_bytes())
}

// -------------------------------------------------------------------- sweep

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub benchmark: ClosedLoopRun<f64>,
    pub rows: Vec<GapReport<f64>>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(GapReport::<f64>::csv_header());
        s.push('\n');
        for row in &self.rows {
            s += &row.csv_fields().join(",");
            s.push('\n');
        }
        s
    }

    pub fn row(&self, ell: usize) -> Option<&GapReport<f64>> {
        self.rows.iter().find(|r| r.ell == Some(ell))
    }
}

/// One suboptimal run per `ℓ`, in parallel; rows keep the order of `ells`.
pub fn sweep(setup: &Setup, ells: &[usize], m_bar: Option<f64>, timing: bool) -> Result<SweepResult, CliError> {
    if ells.is_empty() {
        return Err(CliError::Config("sweep needs a nonempty `ells` list".into()));
    }
    let bench = setup.benchmark()?;
    let cfg = &setup.config;
    let rows = ells
        .par_iter()
        .map(|&ell| {
            let sub = setup.tdmpc(ell, timing)?;
            Ok(GapReport::evaluate(
                &sub,
                &bench,
                &cfg.q,
                &cfg.r,
                &setup.riccati.p,
                setup.pgm.rate(),
                setup.certs.l,
                m_bar,
            )?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SweepResult { benchmark: bench, rows })
}

pub fn sweep_plot(result: &SweepResult, timing: bool) -> LogPlot {
    let x = |r: &GapReport<f64>| if timing { r.compute_time_s } else { r.ell.unwrap_or(0) as f64 };
    let mut series = vec![
        Series { name: "R_T empirical".into(), points: result.rows.iter().map(|r| (x(r), r.r_t)).collect() },
        Series {
            name: "complexity".into(),
            points: result.rows.iter().filter_map(|r| Some((x(r), r.complexity_cor1?))).collect(),
        },
    ];
    if result.rows.iter().any(|r| r.bound_thm8.is_some()) {
        series.push(Series {
            name: "full bound".into(),
            points: result.rows.iter().filter_map(|r| Some((x(r), r.bound_thm8?))).collect(),
        });
    }
    LogPlot {
        title: "Suboptimality gap".into(),
        x_label: if timing { "compute time [s]".into() } else { "iterations per step".into() },
        y_label: "gap".into(),
        series,
    }
}

pub fn cmd_sweep(setup: &Setup, out: &OutputOptions) -> Result<SweepResult, CliError> {
    let m_bar = constants(setup, out)?.stage.m_bar;
    let result = sweep(setup, &setup.config.ells, m_bar, out.timing)?;
    out.write(SWEEP_FILE, result.to_csv().as_bytes())?;
    out.write(BENCHMARK_FILE, &run_csv(&result.benchmark)?)?;
    if out.svg {
        out.write(SWEEP_SVG, sweep_plot(&result, out.timing).render().as_bytes())?;
    }
    Ok(result)
}

// -------------------------------------------------------------------- probe

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub radius: f64,
    pub ediss: EdissFit<f64>,
    pub contraction: ContractionAudit<f64>,
    pub lipschitz_worst: f64,
    pub lipschitz_pairs: usize,
    pub decay_worst: f64,
    pub decay_samples: usize,
    pub lyapunov: Result<LyapunovReport<f64>, String>,
    pub l: f64,
    pub beta: f64,
}

impl ProbeOutcome {
    pub fn ediss_passed(&self) -> bool {
        self.ediss.constants.rho < 1.0 && self.ediss.holdout_violations == 0
    }

    pub fn lipschitz_passed(&self) -> bool {
        self.lipschitz_worst <= self.l
    }

    pub fn decay_passed(&self) -> bool {
        self.decay_worst <= self.beta * (1.0 + 1e-9)
    }

    pub fn lyapunov_passed(&self) -> bool {
        self.lyapunov.as_ref().is_ok_and(|r| r.passed())
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if !self.ediss_passed() {
            f.push("ediss");
        }
        if !self.contraction.passed() {
            f.push("contraction");
        }
        if !self.lipschitz_passed() {
            f.push("lipschitz");
        }
        if !self.decay_passed() {
            f.push("psi_decay");
        }
        if !self.lyapunov_passed() {
            f.push("lyapunov");
        }
        f
    }

    pub fn to_report(&self) -> String {
        let pass = |b: bool| if b { "pass" } else { "FAIL" };
        let mut s = format!("probe_radius = {}\n", self.radius);
        s += &format!("ediss_check = {}\n", pass(self.ediss_passed()));
        s += &self.ediss.to_report();
        s += &format!("contraction_check = {}\n", pass(self.contraction.passed()));
        s += &format!("contraction_samples = {}\n", self.contraction.samples);
        s += &format!("contraction_ell_max = {}\n", self.contraction.ell_max);
        s += &format!("contraction_worst_ratio = {}\n", self.contraction.worst_ratio);
        s += &format!("lipschitz_check = {}\n", pass(self.lipschitz_passed()));
        s += &format!("lipschitz_pairs = {}\n", self.lipschitz_pairs);
        s += &format!("lipschitz_worst = {}\n", self.lipschitz_worst);
        s += &format!("L = {}\n", self.l);
        s += &format!("psi_decay_check = {}\n", pass(self.decay_passed()));
        s += &format!("psi_decay_samples = {}\n", self.decay_samples);
        s += &format!("psi_decay_worst_ratio = {}\n", self.decay_worst);
        s += &format!("beta = {}\n", self.beta);
        s += &format!("lyapunov_check = {}\n", pass(self.lyapunov_passed()));
        match &self.lyapunov {
            Ok(r) => s += &r.to_report(),
            Err(e) => s += &format!("lyapunov_error = {e}\n"),
        }
        s
    }
}

/// Runs every empirical check with a generator seeded from `seed`.
pub fn probe(setup: &Setup, seed: u64) -> Result<ProbeOutcome, CliError> {
    let settings = &setup.config.probe;
    let (qp, pgm, certs) = (&setup.qp, &setup.pgm, &setup.certs);
    let radius = setup.probe_radius()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let wide = LevelSetSampler::new(qp, pgm, radius)?;
    let gamma = LevelSetSampler::new(qp, pgm, certs.r_n)?;
    let closed = BenchmarkLoop { model: &setup.model, qp, cfg: pgm, radius };

    let r_w = settings.r_w.unwrap_or(0.01 * certs.r_n * certs.norm_p_inv_sqrt);
    let spec = EdissSpec { pairs: settings.pairs, horizon: settings.horizon, r_w, holdout: settings.holdout };
    let ediss = fit_ediss(&closed, |r: &mut ChaCha8Rng| wide.sample(r), &mut rng, &spec)?;

    let states = wide.sample_many(&mut rng, settings.contraction_samples)?;
    let contraction = audit_contraction(qp, pgm, &states, &mut rng)?;

    let pts = gamma.sample_many(&mut rng, 2 * settings.lipschitz_pairs)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = pts.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
    let lipschitz_worst = audit_lipschitz(qp, pgm, &pairs)?;

    let xs = gamma.sample_many(&mut rng, settings.decay_samples)?;
    let decay_worst = match verify_decay_beta(qp, pgm, &setup.model, certs.beta, &xs) {
        Ok(w) => w,
        Err(tdmpc_core::Error::EmpiricalViolation { worst, .. }) => worst,
        Err(e) => return Err(e.into()),
    };

    let ly_samples = gamma.sample_many(&mut rng, settings.lyapunov_samples)?;
    let gamma_loop = BenchmarkLoop { radius: certs.r_n, ..closed.clone() };
    let lyapunov = match settings.lyapunov_n_v {
        Some(n_v) => lyapunov_finite_horizon(&gamma_loop, n_v, settings.horizon, &ly_samples),
        None => lyapunov_auto(&gamma_loop, settings.horizon, &ly_samples),
    }
    .map_err(|e| e.to_string());

    Ok(ProbeOutcome {
        radius,
        ediss,
        contraction,
        lipschitz_worst,
        lipschitz_pairs: pairs.len(),
        decay_worst,
        decay_samples: xs.len(),
        lyapunov,
        l: certs.l,
        beta: certs.beta,
    })
}

/// Writes the report and the fitted constants; a failed check still writes
/// both files before returning [`CliError::Check`].
pub fn cmd_probe(setup: &Setup, out: &OutputOptions) -> Result<ProbeOutcome, CliError> {
    let outcome = probe(setup, setup.config.seed)?;
    out.write(PROBE_REPORT, outcome.to_report().as_bytes())?;
    out.write(EDISS_FILE, outcome.ediss.to_report().as_bytes())?;
    let failures = outcome.failures();
    if failures.is_empty() {
        Ok(outcome)
    } else {
        Err(CliError::Check(format!("probe checks failed: {}", failures.join(", "))))
    }
}

// ---------------------------------------------------------------------- run

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunTarget {
    Benchmark,
    Iterations(usize),
}

impl std::str::FromStr for RunTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "benchmark" => Ok(RunTarget::Benchmark),
            other => match other.parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("expected `benchmark` or a positive iteration count, found `{other}`")),
                Ok(n) => Ok(RunTarget::Iterations(n)),
            },
        }
    }
}

impl RunTarget {
    pub fn file_name(self) -> String {
        match self {
            RunTarget::Benchmark => BENCHMARK_FILE.to_string(),
            RunTarget::Iterations(ell) => format!("run_ell{ell}.csv"),
        }
    }
}

fn run_csv(run: &ClosedLoopRun<f64>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_run_csv(run, &mut buf)?;
    Ok(buf)
}

pub fn run(setup: &Setup, target: RunTarget, timing: bool) -> Result<ClosedLoopRun<f64>, CliError> {
    match target {
        RunTarget::Benchmark => setup.benchmark(),
        RunTarget::Iterations(ell) => setup.tdmpc(ell, timing),
    }
}

pub fn cmd_run(
    setup: &Setup,
    target: RunTarget,
    out: &OutputOptions,
) -> Result<(ClosedLoopRun<f64>, PathBuf), CliError> {
    let run = run(setup, target, out.timing)?;
    let path = out.write(&target.file_name(), &run_csv(&run)?)?;
    Ok((run, path))
}

// -------------------------------------------------------------- calibrate-N

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub horizon: usize,
    pub eta: f64,
    pub eta_pow: f64,
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub ell: usize,
    pub rows: Vec<CalibrationRow>,
    /// First horizon whose `η^ℓ` lands in the window.
    pub selected: Option<usize>,
}

impl Calibration {
    pub fn to_csv(&self) -> String {
        let mut s = format!("N,eta,eta_pow_{}\n", self.ell);
        for r in &self.rows {
            s += &format!("{},{},{}\n", r.horizon, r.eta, r.eta_pow);
        }
        s
    }
}

fn eta_for_horizon(
    config: &ExperimentConfig,
    model: &LtiModel<f64>,
    p: &Matrix<f64>,
    horizon: usize,
) -> Result<f64, CliError> {
    let input_box = BoxSet::new(config.u_min.clone(), config.u_max.clone())
        .map_err(|e| CliError::Config(format!("input box: {e}")))?;
    let qp = build_condensed(model, &config.q, &config.r, p, &input_box, horizon)?;
    Ok(PgmConfig::for_qp(&qp).eta)
}

/// Scans `N = 1, 2, …` until the PGM parameter `η` satisfies
/// `low ≤ η^ℓ ≤ high`.
pub fn calibrate(setup: &Setup) -> Result<Calibration, CliError> {
    let cfg = &setup.config;
    let cal = &cfg.calibrate;
    let mut rows = Vec::new();
    let mut selected = None;
    for horizon in 1..=cal.max_n {
        let eta = eta_for_horizon(cfg, &setup.model, &setup.riccati.p, horizon)?;
        let eta_pow = eta.powi(cal.ell as i32);
        rows.push(CalibrationRow { horizon, eta, eta_pow });
        if (cal.low..=cal.high).contains(&eta_pow) {
            selected = Some(horizon);
            break;
        }
    }
    Ok(Calibration { ell: cal.ell, rows, selected })
}

pub fn cmd_calibrate(setup: &Setup, out: &OutputOptions) -> Result<Calibration, CliError> {
    let cal = calibrate(setup)?;
    out.write(CALIBRATE_FILE, cal.to_csv().as_bytes())?;
    match cal.selected {
        Some(n) => {
            let mut cfg = setup.config.clone();
            cfg.horizon = n;
            out.write(CALIBRATED_CONFIG, cfg.to_text().as_bytes())?;
            Ok(cal)
        }
        None => Err(CliError::Check(format!(
            "no N ≤ {} puts η^{} in [{}, {}]",
            setup.config.calibrate.max_n, cal.ell, setup.config.calibrate.low, setup.config.calibrate.high
        ))),
    }
}
