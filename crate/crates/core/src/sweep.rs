//! Randomized parameter sweeps: free-dynamics non-Markovianity against the
//! optimized entanglement of each addressing mode, written as CSV.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cavity::{CavityParams, DEFAULT_STEPS};
use crate::control::{aligned_steps, optimize_cavity, optimize_spinstar, CavityProblem, SpinStarProblem};
use crate::error::{Error, Result};
use crate::nm::{cavity_nm, spinstar_nm, Regime, CAVITY_GRID_POINTS, MARKOVIAN_THRESHOLD, SPINSTAR_GRID_POINTS};
use crate::optimize::{LocalMethod, OptimizerConfig};
use crate::pulse::{AddressingMode, CAVITY_SEGMENTS, SPINSTAR_SEGMENTS};
use crate::spinstar::{SpinStarParams, MAX_SPINS, MIN_SPINS};

/// Upper end of the nm window used by the summary statistics.
pub const SUMMARY_NM_MAX: f64 = 0.3;

/// Default amplitude bound for cavity pulses.
pub const CAVITY_BOUND: f64 = 2.0;
pub const SPINSTAR_BOUND: f64 = 5.0;

pub const CSV_HEADER: [&str; 15] = [
    "point_index",
    "model",
    "alpha1",
    "alpha2",
    "A",
    "n_spins",
    "T",
    "nm",
    "regime",
    "conc_free",
    "conc_opt_SA",
    "conc_opt_DA",
    "conc_opt_GA",
    "seeds",
    "evals_total",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Cavity,
    SpinStar,
}

impl Model {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Cavity => "cavity",
            Self::SpinStar => "spinstar",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cavity" => Ok(Self::Cavity),
            "spinstar" | "spin_star" | "spin-star" => Ok(Self::SpinStar),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// Closed interval `[lo, hi]` for a sampled parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(Error::Config(format!("empty range for {name}: [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: Model,
    pub modes: Vec<AddressingMode>,
    /// Defaults to 1 for the cavity and 10 for the spin star.
    pub horizon: Option<f64>,
    pub n_points: usize,
    pub gamma0: f64,
    pub lambda: f64,
    pub omega0: f64,
    pub alpha1: Range,
    pub alpha2: Range,
    pub coupling: Range,
    pub n_min: usize,
    pub n_max: usize,
    /// Defaults to 16 for the cavity and 250 for the spin star.
    pub segments: Option<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    /// Defaults to ±2 for the cavity and ±5 for the spin star.
    pub bounds: Option<Range>,
    pub out: PathBuf,
    pub steps: usize,
    pub grid_points: Option<usize>,
    pub max_evals: usize,
    pub method: LocalMethod,
    /// Worker threads; 0 lets the runtime decide.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let cavity = CavityParams::default();
        let optimizer = OptimizerConfig::default();
        Self {
            model: Model::Cavity,
            modes: AddressingMode::ALL.to_vec(),
            horizon: None,
            n_points: 100,
            gamma0: cavity.gamma0,
            lambda: cavity.lambda,
            omega0: cavity.omega0,
            alpha1: Range::new(0.0, std::f64::consts::FRAC_1_SQRT_2),
            alpha2: Range::new(0.0, 0.2),
            coupling: Range::new(0.0, 0.2),
            n_min: MIN_SPINS,
            n_max: MAX_SPINS,
            segments: None,
            seeds: optimizer.seeds,
            master_seed: 0,
            bounds: None,
            out: PathBuf::from("sweep.csv"),
            steps: DEFAULT_STEPS,
            grid_points: None,
            max_evals: optimizer.max_evals,
            method: optimizer.method,
            workers: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn parse_modes(value: &str) -> Result<Vec<AddressingMode>> {
    if value.trim().eq_ignore_ascii_case("all") {
        return Ok(AddressingMode::ALL.to_vec());
    }
    let mut modes = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<AddressingMode>>>()?;
    modes.sort();
    modes.dedup();
    Ok(modes)
}

fn parse_bounds(value: &str) -> Result<Range> {
    let parts: Vec<&str> = value.split(',').collect();
    match parts.as_slice() {
        [b] => {
            let b: f64 = parse("bounds", b)?;
            Ok(Range::new(-b.abs(), b.abs()))
        }
        [lo, hi] => Ok(Range::new(parse("bounds", lo)?, parse("bounds", hi)?)),
        _ => Err(Error::Config(format!("bounds must be 'b' or 'lo,hi', got '{value}'"))),
    }
}

impl SweepConfig {
    /// Parses flat `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&fs::read_to_string(path)?)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = value.parse()?,
            "mode" | "modes" => self.modes = parse_modes(value)?,
            "T" | "horizon" => self.horizon = Some(parse(key, value)?),
            "n_points" => self.n_points = parse(key, value)?,
            "gamma0" => self.gamma0 = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "omega0" => self.omega0 = parse(key, value)?,
            "alpha1_min" => self.alpha1.lo = parse(key, value)?,
            "alpha1_max" => self.alpha1.hi = parse(key, value)?,
            "alpha2_min" => self.alpha2.lo = parse(key, value)?,
            "alpha2_max" => self.alpha2.hi = parse(key, value)?,
            "A_min" => self.coupling.lo = parse(key, value)?,
            "A_max" => self.coupling.hi = parse(key, value)?,
            "alpha1" => {
                let v = parse(key, value)?;
                self.alpha1 = Range::new(v, v);
            }
            "alpha2" => {
                let v = parse(key, value)?;
                self.alpha2 = Range::new(v, v);
            }
            "A" => {
                let v = parse(key, value)?;
                self.coupling = Range::new(v, v);
            }
            "N" => {
                let v = parse(key, value)?;
                self.n_min = v;
                self.n_max = v;
            }
            "N_min" => self.n_min = parse(key, value)?,
            "N_max" => self.n_max = parse(key, value)?,
            "segments" => self.segments = Some(parse(key, value)?),
            "seeds" => self.seeds = parse(key, value)?,
            "master_seed" => self.master_seed = parse(key, value)?,
            "bounds" => self.bounds = Some(parse_bounds(value)?),
            "out" => self.out = PathBuf::from(value),
            "steps" => self.steps = parse(key, value)?,
            "grid_points" => self.grid_points = Some(parse(key, value)?),
            "max_evals" => self.max_evals = parse(key, value)?,
            "method" => {
                self.method = match value.to_ascii_lowercase().as_str() {
                    "nelder_mead" | "nelder-mead" | "nm" => LocalMethod::NelderMead,
                    "gradient" | "gradient_ascent" => LocalMethod::GradientAscent,
                    other => return Err(Error::Config(format!("unknown method '{other}'"))),
                }
            }
            "workers" => self.workers = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(match self.model {
            Model::Cavity => 1.0,
            Model::SpinStar => 10.0,
        })
    }

    pub fn segments(&self) -> usize {
        self.segments.unwrap_or(match self.model {
            Model::Cavity => CAVITY_SEGMENTS,
            Model::SpinStar => SPINSTAR_SEGMENTS,
        })
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points.unwrap_or(match self.model {
            Model::Cavity => CAVITY_GRID_POINTS,
            Model::SpinStar => SPINSTAR_GRID_POINTS,
        })
    }

    pub fn bounds(&self) -> Range {
        self.bounds.unwrap_or(match self.model {
            Model::Cavity => Range::new(-CAVITY_BOUND, CAVITY_BOUND),
            Model::SpinStar => Range::new(-SPINSTAR_BOUND, SPINSTAR_BOUND),
        })
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        let bounds = self.bounds();
        OptimizerConfig {
            method: self.method,
            seeds: self.seeds,
            lower: bounds.lo,
            upper: bounds.hi,
            max_evals: self.max_evals,
            ..OptimizerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.horizon();
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("T must be positive, got {h}")));
        }
        if self.segments() == 0 {
            return Err(Error::Config("segments must be positive".into()));
        }
        self.bounds().validate("bounds")?;
        self.optimizer().validate()?;
        match self.model {
            Model::Cavity => {
                self.alpha1.validate("alpha1")?;
                self.alpha2.validate("alpha2")?;
                CavityParams::new(self.gamma0, self.lambda, self.omega0, self.alpha1.lo, self.alpha2.lo)?;
            }
            Model::SpinStar => {
                self.coupling.validate("A")?;
                if self.n_min > self.n_max {
                    return Err(Error::Config(format!("empty range for N: [{}, {}]", self.n_min, self.n_max)));
                }
                SpinStarParams::new(self.n_min, self.coupling.lo, self.omega0)?;
                SpinStarParams::new(self.n_max, self.coupling.hi, self.omega0)?;
            }
        }
        Ok(())
    }
}

/// Physical parameters of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointParams {
    Cavity(CavityParams),
    SpinStar(SpinStarParams),
}

/// Random stream for point `index`: its parameters first, then one
/// optimizer seed per addressing mode.
fn point_stream(config: &SweepConfig, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_params(rng: &mut ChaCha8Rng, config: &SweepConfig) -> PointParams {
    match config.model {
        Model::Cavity => PointParams::Cavity(CavityParams {
            gamma0: config.gamma0,
            lambda: config.lambda,
            omega0: config.omega0,
            alpha1: config.alpha1.sample(rng),
            alpha2: config.alpha2.sample(rng),
        }),
        Model::SpinStar => {
            let coupling = config.coupling.sample(rng);
            let n_total = rng.gen_range(config.n_min..=config.n_max);
            PointParams::SpinStar(SpinStarParams {
                n_total,
                coupling,
                omega0: config.omega0,
            })
        }
    }
}

/// Deterministic draw of point `index` for `config`.
pub fn sample_point(config: &SweepConfig, index: usize) -> Result<PointParams> {
    config.validate()?;
    Ok(draw_params(&mut point_stream(config, index), config))
}

fn mode_seeds(config: &SweepConfig, index: usize) -> [u64; 3] {
    let mut rng = point_stream(config, index);
    draw_params(&mut rng, config);
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

fn mode_slot(mode: AddressingMode) -> usize {
    match mode {
        AddressingMode::Single => 0,
        AddressingMode::Double => 1,
        AddressingMode::Global => 2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub point_index: usize,
    pub params: PointParams,
    pub horizon: f64,
    pub nm: f64,
    pub regime: Regime,
    pub conc_free: f64,
    /// Indexed SA, DA, GA; `None` for modes not requested.
    pub conc_opt: [Option<f64>; 3],
    pub best_seed: [Option<usize>; 3],
    pub seeds: usize,
    pub evals_total: usize,
    pub wall_time: f64,
}

impl SweepRecord {
    pub fn conc_opt(&self, mode: AddressingMode) -> Option<f64> {
        self.conc_opt[mode_slot(mode)]
    }
}

/// Free-dynamics measure plus one optimization per requested mode.
pub fn run_point(index: usize, params: &PointParams, config: &SweepConfig) -> Result<SweepRecord> {
    let start = Instant::now();
    let horizon = config.horizon();
    let segments = config.segments();
    let optimizer = config.optimizer();
    let seeds = mode_seeds(config, index);
    let mut conc_opt = [None; 3];
    let mut best_seed = [None; 3];
    let mut evals_total = 0;
    let (nm, conc_free) = match params {
        PointParams::Cavity(p) => {
            let nm = cavity_nm(p, horizon, config.grid_points())?;
            let mut free = None;
            for &mode in &config.modes {
                let mut problem = CavityProblem::new(*p, mode, horizon, segments)?;
                problem.steps = aligned_steps(segments, config.steps);
                if free.is_none() {
                    free = Some(problem.free_concurrence()?);
                }
                let r = optimize_cavity(&problem, &optimizer, seeds[mode_slot(mode)])?;
                conc_opt[mode_slot(mode)] = Some(r.concurrence);
                best_seed[mode_slot(mode)] = Some(r.outcome.best_seed);
                evals_total += r.outcome.evaluations;
            }
            let free = match free {
                Some(f) => f,
                None => CavityProblem::new(*p, AddressingMode::Single, horizon, segments)?.free_concurrence()?,
            };
            (nm, free)
        }
        PointParams::SpinStar(p) => {
            let nm = spinstar_nm(p, horizon, config.grid_points())?;
            let free = SpinStarProblem::new(p, AddressingMode::Single, horizon, segments)?.free_concurrence()?;
            for &mode in &config.modes {
                let problem = SpinStarProblem::new(p, mode, horizon, segments)?;
                let r = optimize_spinstar(&problem, &optimizer, seeds[mode_slot(mode)])?;
                conc_opt[mode_slot(mode)] = Some(r.concurrence);
                best_seed[mode_slot(mode)] = Some(r.outcome.best_seed);
                evals_total += r.outcome.evaluations;
            }
            (nm, free)
        }
    };
    Ok(SweepRecord {
        point_index: index,
        params: *params,
        horizon,
        nm: nm.value,
        regime: nm.regime,
        conc_free,
        conc_opt,
        best_seed,
        seeds: config.seeds,
        evals_total,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros dropped.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exp}")
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn csv_row(point_index: usize, model: Model, params: Option<&PointParams>, record: Option<&SweepRecord>) -> Vec<String> {
    let (a1, a2, a, n) = match params {
        Some(PointParams::Cavity(p)) => (Some(p.alpha1), Some(p.alpha2), None, None),
        Some(PointParams::SpinStar(p)) => (None, None, Some(p.coupling), Some(p.n_total)),
        None => (None, None, None, None),
    };
    let mut row = vec![
        point_index.to_string(),
        model.tag().to_string(),
        opt_float(a1),
        opt_float(a2),
        opt_float(a),
        n.map(|n| n.to_string()).unwrap_or_default(),
    ];
    match record {
        Some(r) => {
            row.push(format_float(r.horizon));
            row.push(format_float(r.nm));
            row.push(r.regime.to_string());
            row.push(format_float(r.conc_free));
            row.extend(r.conc_opt.iter().map(|c| opt_float(*c)));
            row.push(r.seeds.to_string());
            row.push(r.evals_total.to_string());
        }
        None => {
            row.extend(std::iter::repeat_n(String::new(), 2));
            row.push("error".into());
            row.extend(std::iter::repeat_n(String::new(), 6));
        }
    }
    row
}

/// Outcome of one sweep point: the record, or the error that stopped it.
#[derive(Debug)]
pub struct PointOutcome {
    pub point_index: usize,
    pub params: Option<PointParams>,
    pub result: Result<SweepRecord>,
}

pub fn write_csv<W: Write>(writer: W, model: Model, outcomes: &[PointOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for o in outcomes {
        w.write_record(csv_row(o.point_index, model, o.params.as_ref(), o.result.as_ref().ok()))?;
    }
    w.flush()?;
    Ok(())
}

/// Spearman rank correlation with average ranks for ties; `None` below two
/// points or when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: AddressingMode,
    /// Points with `nm` inside the summary window.
    pub n_points: usize,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub model: Model,
    pub modes: Vec<ModeSummary>,
    pub markovian_points: usize,
    /// Largest `conc_opt(SA) − conc_free` among Markovian points.
    pub markovian_max_gain: Option<f64>,
    pub failures: usize,
}

/// Upper end of the summary window; the spin star keeps every non-Markovian point.
pub fn window_max(model: Model) -> f64 {
    match model {
        Model::Cavity => SUMMARY_NM_MAX,
        Model::SpinStar => f64::INFINITY,
    }
}

/// Records with `nm` in the open window `(MARKOVIAN_THRESHOLD, window_max(model))`.
pub fn in_window(model: Model, records: &[SweepRecord]) -> impl Iterator<Item = &SweepRecord> {
    let hi = window_max(model);
    records
        .iter()
        .filter(move |r| r.nm > MARKOVIAN_THRESHOLD && r.nm < hi)
}

pub fn summarize(model: Model, modes: &[AddressingMode], records: &[SweepRecord], failures: usize) -> SweepSummary {
    let modes = modes
        .iter()
        .map(|&mode| {
            let (x, y): (Vec<f64>, Vec<f64>) = in_window(model, records)
                .filter_map(|r| r.conc_opt(mode).map(|c| (r.nm, c)))
                .unzip();
            ModeSummary {
                mode,
                n_points: x.len(),
                spearman: spearman(&x, &y),
            }
        })
        .collect();
    let markovian: Vec<&SweepRecord> = records.iter().filter(|r| r.regime == Regime::Markovian).collect();
    let markovian_max_gain = markovian
        .iter()
        .filter_map(|r| r.conc_opt(AddressingMode::Single).map(|c| c - r.conc_free))
        .reduce(f64::max);
    SweepSummary {
        model,
        modes,
        markovian_points: markovian.len(),
        markovian_max_gain,
        failures,
    }
}

impl SweepSummary {
    /// Monotonicity thresholds per mode: `(label, passed)`.
    pub fn check(&self) -> Vec<(String, bool)> {
        let tracking = match self.model {
            Model::Cavity => 0.95,
            Model::SpinStar => 0.9,
        };
        self.modes
            .iter()
            .map(|m| {
                let rho = m.spearman.unwrap_or(f64::NAN);
                match m.mode {
                    AddressingMode::Global => (format!("spearman GA {rho:.3} <= 0.8"), rho <= 0.8),
                    mode => (format!("spearman {mode} {rho:.3} >= {tracking}"), rho >= tracking),
                }
            })
            .chain(std::iter::once((format!("{} failed points", self.failures), self.failures == 0)))
            .collect()
    }
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {}", self.model)?;
        for m in &self.modes {
            match m.spearman {
                Some(rho) => writeln!(f, "{}: spearman(nm, conc_opt) = {rho:.4} over {} points", m.mode, m.n_points)?,
                None => writeln!(f, "{}: spearman undefined over {} points", m.mode, m.n_points)?,
            }
        }
        write!(f, "markovian points: {}", self.markovian_points)?;
        if let Some(g) = self.markovian_max_gain {
            write!(f, ", max SA gain {g:.4}")?;
        }
        write!(f, "\nfailed points: {}", self.failures)
    }
}

pub struct SweepReport {
    pub outcomes: Vec<PointOutcome>,
    pub summary: SweepSummary,
}

impl SweepReport {
    pub fn records(&self) -> Vec<SweepRecord> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok().cloned()).collect()
    }
}

/// Runs every point, in parallel up to `workers`, and returns outcomes in index order.
pub fn run_points(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let work = || {
        (0..config.n_points)
            .into_par_iter()
            .map(|index| {
                let params = sample_point(config, index);
                match params {
                    Ok(p) => PointOutcome {
                        point_index: index,
                        params: Some(p),
                        result: run_point(index, &p, config),
                    },
                    Err(e) => PointOutcome {
                        point_index: index,
                        params: None,
                        result: Err(e),
                    },
                }
            })
            .collect::<Vec<_>>()
    };
    let outcomes = if config.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(work)
    };
    let records: Vec<SweepRecord> = outcomes.iter().filter_map(|o| o.result.as_ref().ok().cloned()).collect();
    let failures = outcomes.len() - records.len();
    let summary = summarize(config.model, &config.modes, &records, failures);
    Ok(SweepReport { outcomes, summary })
}

/// [`run_points`] followed by writing the CSV to `config.out`.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    let report = run_points(config)?;
    let file = fs::File::create(&config.out)?;
    write_csv(std::io::BufWriter::new(file), config.model, &report.outcomes)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(format_float(123456.5), "123456.5");
        assert_eq!(format_float(-2.5e13), "-2.5e13");
        assert_eq!(format_float(1e-5), "0.00001");
    }

    #[test]
    fn config_parsing() {
        let cfg = SweepConfig::parse_str(
            "# comment\nmodel = spinstar\nmode = SA, GA\nT=5\nN_min=3\nN_max = 6\nbounds = -2,3\nseeds=4 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.model, Model::SpinStar);
        assert_eq!(cfg.modes, vec![AddressingMode::Single, AddressingMode::Global]);
        assert_eq!(cfg.horizon(), 5.0);
        assert_eq!((cfg.n_min, cfg.n_max), (3, 6));
        assert_eq!(cfg.bounds(), Range::new(-2.0, 3.0));
        assert_eq!(cfg.seeds, 4);
        assert_eq!(cfg.segments(), SPINSTAR_SEGMENTS);
        assert!(SweepConfig::parse_str("bogus = 1").is_err());
        assert!(SweepConfig::parse_str("seeds = many").is_err());
        assert!(SweepConfig::parse_str("no equals sign").is_err());
        assert_eq!(SweepConfig::parse_str("bounds = 7").unwrap().bounds(), Range::new(-7.0, 7.0));
    }

    #[test]
    fn model_defaults() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.horizon(), 1.0);
        assert_eq!(cfg.segments(), 16);
        assert_eq!(cfg.grid_points(), CAVITY_GRID_POINTS);
    }

    #[test]
    fn degenerate_ranges_are_fixed() {
        let cfg = SweepConfig::parse_str("alpha1 = 0.3\nalpha2 = 0.1").unwrap();
        for i in 0..5 {
            let PointParams::Cavity(p) = sample_point(&cfg, i).unwrap() else {
                panic!("cavity expected")
            };
            assert_eq!((p.alpha1, p.alpha2), (0.3, 0.1));
        }
    }

    #[test]
    fn empty_range_is_rejected() {
        let cfg = SweepConfig::parse_str("alpha1_min = 0.5\nalpha1_max = 0.4").unwrap();
        assert!(sample_point(&cfg, 0).is_err());
        let cfg = SweepConfig::parse_str("model = spinstar\nN_min = 6\nN_max = 4").unwrap();
        assert!(sample_point(&cfg, 0).is_err());
    }

    #[test]
    fn cavity_draws_stay_in_range() {
        let cfg = SweepConfig::default();
        for i in 0..10_000 {
            let PointParams::Cavity(p) = sample_point(&cfg, i).unwrap() else {
                panic!("cavity expected")
            };
            assert!(p.alpha1 >= 0.0 && p.alpha1 < std::f64::consts::FRAC_1_SQRT_2);
            assert!(p.alpha2 >= 0.0 && p.alpha2 < 0.2);
        }
    }

    #[test]
    fn spin_counts_cover_the_range() {
        let cfg = SweepConfig::parse_str("model = spinstar").unwrap();
        let mut seen = [false; MAX_SPINS + 1];
        for i in 0..500 {
            let PointParams::SpinStar(p) = sample_point(&cfg, i).unwrap() else {
                panic!("spin star expected")
            };
            seen[p.n_total] = true;
            assert!((0.0..0.2).contains(&p.coupling));
        }
        assert!(seen[MIN_SPINS..].iter().all(|&s| s));
    }

    #[test]
    fn sampling_is_reproducible() {
        let cfg = SweepConfig {
            master_seed: 99,
            ..SweepConfig::default()
        };
        let other = SweepConfig {
            master_seed: 100,
            ..SweepConfig::default()
        };
        assert_eq!(sample_point(&cfg, 3).unwrap(), sample_point(&cfg, 3).unwrap());
        assert_ne!(sample_point(&cfg, 3).unwrap(), sample_point(&cfg, 4).unwrap());
        assert_ne!(sample_point(&cfg, 3).unwrap(), sample_point(&other, 3).unwrap());
        assert_eq!(mode_seeds(&cfg, 3), mode_seeds(&cfg, 3));
    }

    #[test]
    fn spearman_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), None);
        assert_eq!(spearman(&[1.0], &[1.0]), None);
        // ties: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((rho - 0.9486832980505138).abs() < 1e-12);
    }

    #[test]
    fn frozen_cavity_point() {
        let cfg = SweepConfig::parse_str("lambda = 0\nseeds = 2\nmax_evals = 100\nn_points = 1").unwrap();
        let p = sample_point(&cfg, 0).unwrap();
        let r = run_point(0, &p, &cfg).unwrap();
        assert_eq!(r.nm, 0.0);
        assert_eq!(r.regime, Regime::Markovian);
        assert!(r.conc_free < 1e-12);
        for c in r.conc_opt {
            assert!(c.unwrap() < 1e-12);
        }
    }

    #[test]
    fn empty_sweep_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("empty.csv");
        let cfg = SweepConfig {
            n_points: 0,
            out: out.clone(),
            ..SweepConfig::default()
        };
        let report = run_sweep(&cfg).unwrap();
        assert!(report.outcomes.is_empty());
        assert!(report.summary.modes.iter().all(|m| m.n_points == 0 && m.spearman.is_none()));
        assert_eq!(fs::read_to_string(out).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn failed_points_keep_their_row() {
        let outcomes = vec![PointOutcome {
            point_index: 0,
            params: None,
            result: Err(Error::InvalidParameter("x".into())),
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, Model::Cavity, &outcomes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row.split(',').count(), CSV_HEADER.len());
        assert!(row.contains("error"));
    }
}
