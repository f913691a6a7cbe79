//! Experiment configuration: a flat `key = value` format with optional
//! `[section]` headers that prefix the keys below them (`[probe]` +
//! `pairs` becomes `probe.pairs`).
//!
//! Values are scalar expressions (`-pi/4`, `1e-12`, `2*(3+1)`), bracketed
//! matrices with `;` between rows (`[0, 1; 14.7, 0]`), `logspace(a, b, n)`
//! for integer sweeps, or bare words.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tdmpc_core::numerics::Matrix;
use tdmpc_core::StepRule;

use crate::error::CliError;

pub const PENDULUM_PRESET: &str = "\
# Inverted pendulum linearised about the upright position.
A_c = [0, 1; 14.7, 0]
B_c = [0; 30]
Ts = 0.1
Q = [1, 0; 0, 1]
R = [1]
N = 10
T = 30
x0 = [-pi/4, pi/3]
u_min = [-1]
u_max = [1]
ells = logspace(1, 5000, 30)
step_rule = half
tol_benchmark = 1e-12
seed = 2024

[probe]
pairs = 200
horizon = 60
holdout = 100
contraction_samples = 1000
lipschitz_pairs = 500
decay_samples = 500
lyapunov_samples = 200

[calibrate]
ell = 6
low = 0.91
high = 0.93
max_N = 40
";

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Continuous { a_c: Matrix<f64>, b_c: Matrix<f64>, ts: f64 },
    Discrete { a: Matrix<f64>, b: Matrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSettings {
    pub pairs: usize,
    pub horizon: usize,
    pub holdout: usize,
    /// `None` means `0.01 r_N ‖P^{-1/2}‖`.
    pub r_w: Option<f64>,
    /// `None` means `max(r_N, ψ(x₀))`.
    pub radius: Option<f64>,
    pub contraction_samples: usize,
    pub lipschitz_pairs: usize,
    pub decay_samples: usize,
    pub lyapunov_samples: usize,
    /// `None` picks the smallest admissible value from a preliminary fit.
    pub lyapunov_n_v: Option<usize>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            pairs: 200,
            horizon: 60,
            holdout: 100,
            r_w: None,
            radius: None,
            contraction_samples: 1000,
            lipschitz_pairs: 500,
            decay_samples: 500,
            lyapunov_samples: 200,
            lyapunov_n_v: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateSettings {
    pub ell: usize,
    pub low: f64,
    pub high: f64,
    pub max_n: usize,
}

impl Default for CalibrateSettings {
    fn default() -> Self {
        Self { ell: 6, low: 0.91, high: 0.93, max_n: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub q: Matrix<f64>,
    pub r: Matrix<f64>,
    pub horizon: usize,
    pub steps: usize,
    pub x0: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub ells: Vec<usize>,
    pub step_rule: StepRule,
    pub tol_benchmark: Option<f64>,
    pub iter_cap: Option<usize>,
    pub seed: u64,
    pub repeats: usize,
    pub out_dir: PathBuf,
    pub probe: ProbeSettings,
    pub calibrate: CalibrateSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Matrix(Matrix<f64>),
    Ints(Vec<usize>),
    Word(String),
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    raw: String,
}

/// Raw key/value table with source line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    origin: String,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                if let Some(name) = rest.strip_suffix(']') {
                    if !name.contains([',', ';']) {
                        section = name.trim().to_string();
                        continue;
                    }
                }
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::config(origin, Some(lineno), format!("expected `key = value`, found `{line}`")));
            };
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(CliError::config(origin, Some(lineno), format!("invalid key `{k}`")));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            let entry = Entry { line: lineno, raw: v.trim().to_string() };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(CliError::config(
                    origin,
                    Some(lineno),
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
        }
        Ok(Self { entries, origin: origin.to_string() })
    }

    /// Applies a `key=value` override; the key must use the dotted form.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let Some((k, v)) = assignment.split_once('=') else {
            return Err(CliError::config("--set", None, format!("expected key=value, found `{assignment}`")));
        };
        self.entries.insert(k.trim().to_string(), Entry { line: 0, raw: v.trim().to_string() });
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> CliError {
        let line = self.entries.get(key).map(|e| e.line).filter(|&l| l > 0);
        CliError::config(&self.origin, line, format!("`{key}`: {}", msg.into()))
    }

    fn value(&self, key: &str) -> Result<Option<Value>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => parse_value(&e.raw).map(Some).map_err(|m| self.err(key, m)),
        }
    }

    fn require(&self, key: &str) -> Result<Value, CliError> {
        self.value(key)?.ok_or_else(|| CliError::config(&self.origin, None, format!("missing required key `{key}`")))
    }

    pub fn matrix(&self, key: &str) -> Result<Matrix<f64>, CliError> {
        match self.require(key)? {
            Value::Matrix(m) => Ok(m),
            Value::Scalar(s) => Ok(Matrix::from_diag(&[s])),
            other => Err(self.err(key, format!("expected a matrix, found {other:?}"))),
        }
    }

    pub fn vector(&self, key: &str) -> Result<Vec<f64>, CliError> {
        match self.require(key)? {
            Value::Matrix(m) if m.rows() == 1 || m.cols() == 1 => Ok(m.as_slice().to_vec()),
            Value::Scalar(s) => Ok(vec![s]),
            Value::Ints(v) => Ok(v.into_iter().map(|i| i as f64).collect()),
            other => Err(self.err(key, format!("expected a vector, found {other:?}"))),
        }
    }

    pub fn scalar_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.value(key)? {
            None => Ok(None),
            Some(Value::Word(w)) if w == "auto" => Ok(None),
            Some(Value::Scalar(s)) => Ok(Some(s)),
            Some(other) => Err(self.err(key, format!("expected a number, found {other:?}"))),
        }
    }

    pub fn scalar(&self, key: &str) -> Result<f64, CliError> {
        self.scalar_opt(key)?
            .ok_or_else(|| CliError::config(&self.origin, None, format!("missing required key `{key}`")))
    }

    pub fn count_opt(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.scalar_opt(key)? {
            None => Ok(None),
            Some(s) if s >= 0.0 && s.fract() == 0.0 && s < 1e15 => Ok(Some(s as usize)),
            Some(s) => Err(self.err(key, format!("expected a nonnegative integer, found {s}"))),
        }
    }

    pub fn count(&self, key: &str) -> Result<usize, CliError> {
        self.count_opt(key)?
            .ok_or_else(|| CliError::config(&self.origin, None, format!("missing required key `{key}`")))
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.count_opt(key)?.unwrap_or(default))
    }

    pub fn ints(&self, key: &str) -> Result<Vec<usize>, CliError> {
        match self.require(key)? {
            Value::Ints(v) => Ok(v),
            Value::Scalar(_) | Value::Matrix(_) => {
                let v = self.vector(key)?;
                v.iter()
                    .map(|&s| {
                        (s >= 0.0 && s.fract() == 0.0)
                            .then_some(s as usize)
                            .ok_or_else(|| self.err(key, format!("expected integers, found {s}")))
                    })
                    .collect()
            }
            other => Err(self.err(key, format!("expected an integer list, found {other:?}"))),
        }
    }

    pub fn word(&self, key: &str) -> Result<Option<String>, CliError> {
        Ok(self.entries.get(key).map(|e| e.raw.clone()))
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let model = if raw.contains("A") || raw.contains("B") {
            if raw.contains("A_c") {
                return Err(raw.err("A", "give either A, B or A_c, B_c, Ts, not both"));
            }
            ModelSource::Discrete { a: raw.matrix("A")?, b: raw.matrix("B")? }
        } else {
            ModelSource::Continuous { a_c: raw.matrix("A_c")?, b_c: raw.matrix("B_c")?, ts: raw.scalar("Ts")? }
        };
        let step_rule = match raw.word("step_rule")? {
            None => StepRule::default(),
            Some(w) => w.parse().map_err(|e: tdmpc_core::Error| raw.err("step_rule", e.to_string()))?,
        };
        let defaults = ProbeSettings::default();
        let probe = ProbeSettings {
            pairs: raw.count_or("probe.pairs", defaults.pairs)?,
            horizon: raw.count_or("probe.horizon", defaults.horizon)?,
            holdout: raw.count_or("probe.holdout", defaults.holdout)?,
            r_w: raw.scalar_opt("probe.r_w")?,
            radius: raw.scalar_opt("probe.radius")?,
            contraction_samples: raw.count_or("probe.contraction_samples", defaults.contraction_samples)?,
            lipschitz_pairs: raw.count_or("probe.lipschitz_pairs", defaults.lipschitz_pairs)?,
            decay_samples: raw.count_or("probe.decay_samples", defaults.decay_samples)?,
            lyapunov_samples: raw.count_or("probe.lyapunov_samples", defaults.lyapunov_samples)?,
            lyapunov_n_v: raw.count_opt("probe.lyapunov_N_V")?,
        };
        let cal = CalibrateSettings::default();
        let calibrate = CalibrateSettings {
            ell: raw.count_or("calibrate.ell", cal.ell)?,
            low: raw.scalar_opt("calibrate.low")?.unwrap_or(cal.low),
            high: raw.scalar_opt("calibrate.high")?.unwrap_or(cal.high),
            max_n: raw.count_or("calibrate.max_N", cal.max_n)?,
        };
        let cfg = Self {
            model,
            q: raw.matrix("Q")?,
            r: raw.matrix("R")?,
            horizon: raw.count("N")?,
            steps: raw.count("T")?,
            x0: raw.vector("x0")?,
            u_min: raw.vector("u_min")?,
            u_max: raw.vector("u_max")?,
            ells: if raw.contains("ells") { raw.ints("ells")? } else { Vec::new() },
            step_rule,
            tol_benchmark: raw.scalar_opt("tol_benchmark")?,
            iter_cap: raw.count_opt("iter_cap")?,
            seed: raw.count_or("seed", 0)? as u64,
            repeats: raw.count_or("repeats", 1)?,
            out_dir: PathBuf::from(raw.word("out")?.unwrap_or_else(|| "out".into())),
            probe,
            calibrate,
        };
        cfg.validate(raw)?;
        Ok(cfg)
    }

    fn validate(&self, raw: &RawConfig) -> Result<(), CliError> {
        let (n, m) = match &self.model {
            ModelSource::Continuous { a_c, b_c, .. } => (a_c.rows(), b_c.cols()),
            ModelSource::Discrete { a, b } => (a.rows(), b.cols()),
        };
        let (a_key, b_key) = match self.model {
            ModelSource::Continuous { .. } => ("A_c", "B_c"),
            ModelSource::Discrete { .. } => ("A", "B"),
        };
        let (a, b) = match &self.model {
            ModelSource::Continuous { a_c, b_c, .. } => (a_c, b_c),
            ModelSource::Discrete { a, b } => (a, b),
        };
        if !a.is_square() {
            return Err(raw.err(a_key, format!("must be square, is {}x{}", a.rows(), a.cols())));
        }
        if b.rows() != n {
            return Err(raw.err(b_key, format!("needs {n} rows, has {}", b.rows())));
        }
        let shape = |key: &str, mtx: &Matrix<f64>, d: usize| {
            if mtx.rows() != d || mtx.cols() != d {
                Err(raw.err(key, format!("must be {d}x{d}, is {}x{}", mtx.rows(), mtx.cols())))
            } else {
                Ok(())
            }
        };
        shape("Q", &self.q, n)?;
        shape("R", &self.r, m)?;
        let len = |key: &str, v: &[f64], d: usize| {
            if v.len() != d {
                Err(raw.err(key, format!("needs {d} entries, has {}", v.len())))
            } else {
                Ok(())
            }
        };
        len("x0", &self.x0, n)?;
        len("u_min", &self.u_min, m)?;
        len("u_max", &self.u_max, m)?;
        if self.horizon == 0 {
            return Err(raw.err("N", "horizon must be at least 1"));
        }
        if self.ells.contains(&0) {
            return Err(raw.err("ells", "iteration counts must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(raw.err("repeats", "must be at least 1"));
        }
        if !(0.0 < self.calibrate.low && self.calibrate.low < self.calibrate.high && self.calibrate.high < 1.0) {
            return Err(raw.err("calibrate.low", "need 0 < low < high < 1"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(RawConfig, Self), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(&path.display().to_string(), None, format!("cannot read: {e}")))?;
        let raw = RawConfig::parse(&text, &path.display().to_string())?;
        let cfg = Self::from_raw(&raw)?;
        Ok((raw, cfg))
    }

    pub fn preset(name: &str) -> Result<RawConfig, CliError> {
        match name {
            "pendulum" => RawConfig::parse(PENDULUM_PRESET, "preset pendulum"),
            other => Err(CliError::config("--preset", None, format!("unknown preset `{other}` (known: pendulum)"))),
        }
    }

    pub fn pendulum() -> Self {
        Self::from_raw(&Self::preset("pendulum").expect("preset parses")).expect("preset is valid")
    }

    /// Serialises back to the text format; `from_raw(parse(to_text()))` is the identity.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.model {
            ModelSource::Continuous { a_c, b_c, ts } => {
                let _ = writeln!(s, "A_c = {}", fmt_matrix(a_c));
                let _ = writeln!(s, "B_c = {}", fmt_matrix(b_c));
                let _ = writeln!(s, "Ts = {ts:?}");
            }
            ModelSource::Discrete { a, b } => {
                let _ = writeln!(s, "A = {}", fmt_matrix(a));
                let _ = writeln!(s, "B = {}", fmt_matrix(b));
            }
        }
        let _ = writeln!(s, "Q = {}", fmt_matrix(&self.q));
        let _ = writeln!(s, "R = {}", fmt_matrix(&self.r));
        let _ = writeln!(s, "N = {}", self.horizon);
        let _ = writeln!(s, "T = {}", self.steps);
        let _ = writeln!(s, "x0 = {}", fmt_list(&self.x0));
        let _ = writeln!(s, "u_min = {}", fmt_list(&self.u_min));
        let _ = writeln!(s, "u_max = {}", fmt_list(&self.u_max));
        if !self.ells.is_empty() {
            let ells: Vec<String> = self.ells.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "ells = [{}]", ells.join(", "));
        }
        let _ = writeln!(s, "step_rule = {}", self.step_rule.name());
        if let Some(t) = self.tol_benchmark {
            let _ = writeln!(s, "tol_benchmark = {t:?}");
        }
        if let Some(c) = self.iter_cap {
            let _ = writeln!(s, "iter_cap = {c}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "repeats = {}", self.repeats);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let p = &self.probe;
        let _ = writeln!(s, "\n[probe]");
        let _ = writeln!(s, "pairs = {}", p.pairs);
        let _ = writeln!(s, "horizon = {}", p.horizon);
        let _ = writeln!(s, "holdout = {}", p.holdout);
        if let Some(r) = p.r_w {
            let _ = writeln!(s, "r_w = {r:?}");
        }
        if let Some(r) = p.radius {
            let _ = writeln!(s, "radius = {r:?}");
        }
        let _ = writeln!(s, "contraction_samples = {}", p.contraction_samples);
        let _ = writeln!(s, "lipschitz_pairs = {}", p.lipschitz_pairs);
        let _ = writeln!(s, "decay_samples = {}", p.decay_samples);
        let _ = writeln!(s, "lyapunov_samples = {}", p.lyapunov_samples);
        if let Some(nv) = p.lyapunov_n_v {
            let _ = writeln!(s, "lyapunov_N_V = {nv}");
        }
        let c = &self.calibrate;
        let _ = writeln!(s, "\n[calibrate]");
        let _ = writeln!(s, "ell = {}", c.ell);
        let _ = writeln!(s, "low = {:?}", c.low);
        let _ = writeln!(s, "high = {:?}", c.high);
        let _ = writeln!(s, "max_N = {}", c.max_n);
        s
    }
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix(m: &Matrix<f64>) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| format!("{:?}", m[(i, j)])).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

/// `n` strictly increasing integers near `10^x` for `x` evenly spaced in
/// `[log10 a, log10 b]`; where rounding collides, the later point moves up by one.
pub fn logspace_ints(a: f64, b: f64, n: usize) -> Result<Vec<usize>, String> {
    if !(a >= 1.0 && b >= a && n >= 1) {
        return Err(format!("logspace needs 1 ≤ a ≤ b and n ≥ 1, got ({a}, {b}, {n})"));
    }
    let (la, lb) = (a.log10(), b.log10());
    let mut out: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        let v = 10f64.powf(la + t * (lb - la)).round() as usize;
        out.push(match out.last() {
            Some(&prev) if v <= prev => prev + 1,
            _ => v,
        });
    }
    if out.last() > Some(&(b.round() as usize)) {
        return Err(format!("logspace({a}, {b}, {n}) has fewer than {n} distinct integers"));
    }
    Ok(out)
}

pub fn parse_value(raw: &str) -> Result<Value, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    if let Some(inner) = s.strip_prefix("logspace(").and_then(|r| r.strip_suffix(')')) {
        let args: Vec<&str> = inner.split(',').collect();
        if args.len() != 3 {
            return Err("logspace takes three arguments".into());
        }
        let a = eval_expr(args[0])?;
        let b = eval_expr(args[1])?;
        let n = eval_expr(args[2])?;
        if n.fract() != 0.0 || n < 1.0 {
            return Err(format!("logspace count must be a positive integer, got {n}"));
        }
        return logspace_ints(a, b, n as usize).map(Value::Ints);
    }
    if let Some(inner) = s.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or("unterminated `[`")?;
        return parse_matrix(inner).map(Value::Matrix);
    }
    match eval_expr(s) {
        Ok(v) => Ok(Value::Scalar(v)),
        Err(e) => {
            if s.chars().all(|c| c.is_alphanumeric() || "_-./".contains(c))
                && !s.starts_with(|c: char| c.is_ascii_digit())
            {
                Ok(Value::Word(s.to_string()))
            } else {
                Err(e)
            }
        }
    }
}

fn parse_matrix(inner: &str) -> Result<Matrix<f64>, String> {
    let (inner, explicit_row) = match inner.trim_end().strip_suffix(';') {
        Some(rest) => (rest, true),
        None => (inner, false),
    };
    let rows: Vec<Vec<f64>> = inner
        .split(';')
        .map(|row| row.split(',').map(eval_expr).collect::<Result<Vec<f64>, String>>())
        .collect::<Result<_, _>>()?;
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err("matrix rows have different lengths".into());
    }
    // A single row written with commas is a column vector unless it ends in `;`.
    let (r, c, data) =
        if rows.len() == 1 && !explicit_row { (cols, 1, rows.concat()) } else { (rows.len(), cols, rows.concat()) };
    Matrix::new(r, c, data).map_err(|e| e.to_string())
}

/// Evaluates `+ - * /`, parentheses, unary minus, numeric literals and `pi`.
pub fn eval_expr(src: &str) -> Result<f64, String> {
    let mut p = ExprParser { s: src.as_bytes(), pos: 0 };
    let v = p.sum()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(format!("unexpected `{}` in `{}`", &src[p.pos..], src.trim()));
    }
    if !v.is_finite() {
        return Err(format!("`{}` is not finite", src.trim()));
    }
    Ok(v)
}

struct ExprParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            v = if op == b'+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            v = if op == b'*' { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err("missing `)`".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                match &self.s[start..self.pos] {
                    b"pi" => Ok(std::f64::consts::PI),
                    other => Err(format!("unknown name `{}`", String::from_utf8_lossy(other))),
                }
            }
            Some(_) => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let c = self.s[self.pos];
                    let exp_sign =
                        (c == b'-' || c == b'+') && self.pos > start && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let tok = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                tok.parse::<f64>().map_err(|_| {
                    if tok.is_empty() {
                        format!("unexpected `{}`", self.s[start] as char)
                    } else {
                        format!("invalid number `{tok}`")
                    }
                })
            }
            None => Err("unexpected end of expression".into()),
        }
    }
}
