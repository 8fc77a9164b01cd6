//! Deterministic multi-start maximization of black-box objectives on a box.
//!
//! The local method is a bounded Nelder–Mead simplex with dimension-adaptive
//! coefficients; trial points are projected onto the box. When the simplex
//! collapses it is rebuilt around the incumbent, until a rebuild stops
//! paying off or the evaluation budget runs out. A projected
//! finite-difference gradient ascent is available as an alternative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalMethod {
    NelderMead,
    GradientAscent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: LocalMethod,
    /// Number of starts; start 0 is always the zero vector.
    pub seeds: usize,
    pub lower: f64,
    pub upper: f64,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Simplex diameter (max-norm) below which the simplex counts as collapsed.
    pub diameter_tol: f64,
    /// Initial simplex edge as a fraction of `upper - lower`.
    pub initial_step: f64,
    /// Rebuilds of a collapsed simplex before giving up.
    pub max_restarts: usize,
    /// Central-difference step for [`LocalMethod::GradientAscent`].
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: LocalMethod::NelderMead,
            seeds: 10,
            lower: -5.0,
            upper: 5.0,
            max_evals: 5000,
            diameter_tol: 1e-6,
            initial_step: 0.1,
            max_restarts: 4,
            fd_step: 1e-5,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower <= self.upper) {
            return Err(Error::InvalidParameter(format!(
                "bounds [{}, {}] must be finite and ordered",
                self.lower, self.upper
            )));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidParameter("evaluation budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationOutcome {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub best_seed: usize,
    pub per_seed_values: Vec<f64>,
    pub evaluations: usize,
}

/// Counts evaluations and rejects non-finite values.
struct Counted<'a, F> {
    f: &'a F,
    evals: usize,
}

impl<F: Fn(&[f64]) -> Result<f64>> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective {
                value: v,
                point: x.to_vec(),
            });
        }
        Ok(v)
    }
}

fn clamp_into(x: &mut [f64], lo: f64, hi: f64) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

fn simplex_around(x0: &[f64], edge: f64, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut pts = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut p = x0.to_vec();
        p[i] = if p[i] + edge <= hi { p[i] + edge } else { p[i] - edge };
        p[i] = p[i].clamp(lo, hi);
        pts.push(p);
    }
    pts
}

fn diameter(pts: &[Vec<f64>]) -> f64 {
    let best = &pts[0];
    pts[1..]
        .iter()
        .flat_map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Bounded Nelder–Mead maximization of `f` from `x0`.
pub fn nelder_mead<F>(f: &F, x0: &[f64], config: &OptimizerConfig) -> Result<LocalResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let (lo, hi) = (config.lower, config.upper);
    let mut obj = Counted { f, evals: 0 };
    let mut start = x0.to_vec();
    clamp_into(&mut start, lo, hi);
    if n == 0 {
        let value = obj.eval(&start)?;
        return Ok(LocalResult {
            point: start,
            value,
            evaluations: obj.evals,
        });
    }

    let nf = n as f64;
    // Gao & Han adaptive coefficients
    let (reflect, expand, contract, shrink) = if n > 1 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let edge = (config.initial_step * (hi - lo)).max(f64::EPSILON);

    // simplex stores minimization values (−f)
    let mut pts = simplex_around(&start, edge, lo, hi);
    let mut vals = Vec::with_capacity(n + 1);
    for p in &pts {
        vals.push(-obj.eval(p)?);
    }
    let mut restarts = 0;
    let mut value_at_restart = f64::INFINITY;

    loop {
        // sort ascending by value; ties keep insertion order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        if obj.evals >= config.max_evals {
            break;
        }
        if diameter(&pts) < config.diameter_tol {
            let improved = vals[0] < value_at_restart - 1e-12 * (1.0 + vals[0].abs());
            if restarts >= config.max_restarts || !improved {
                break;
            }
            restarts += 1;
            value_at_restart = vals[0];
            let best = pts[0].clone();
            pts = simplex_around(&best, edge, lo, hi);
            vals = vec![vals[0]];
            for p in &pts[1..] {
                vals.push(-obj.eval(p)?);
            }
            continue;
        }

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect();
            clamp_into(&mut x, lo, hi);
            x
        };

        let xr = along(reflect);
        let fr = -obj.eval(&xr)?;
        if fr < vals[0] {
            let xe = along(reflect * expand);
            let fe = -obj.eval(&xe)?;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(reflect * contract);
            let fc = -obj.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-contract);
            let fc = -obj.eval(&xc)?;
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, p)| b + shrink * (p - b)).collect();
            vals[i] = -obj.eval(&shrunk)?;
            pts[i] = shrunk;
        }
    }

    Ok(LocalResult {
        point: pts[0].clone(),
        value: -vals[0],
        evaluations: obj.evals,
    })
}

/// Projected gradient ascent with central differences and backtracking.
pub fn gradient_ascent<F>(f: &F, x0: &[f64], config: &OptimizerConfig) -> Result<LocalResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let (lo, hi) = (config.lower, config.upper);
    let mut obj = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    clamp_into(&mut x, lo, hi);
    let mut fx = obj.eval(&x)?;
    let mut step = config.initial_step * (hi - lo);
    let h = config.fd_step;

    while obj.evals + 2 * x.len() < config.max_evals && step > config.diameter_tol {
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            let orig = x[i];
            x[i] = (orig + h).min(hi);
            let up = obj.eval(&x)?;
            let dx_up = x[i] - orig;
            x[i] = (orig - h).max(lo);
            let down = obj.eval(&x)?;
            let dx_down = orig - x[i];
            x[i] = orig;
            let span = dx_up + dx_down;
            grad[i] = if span > 0.0 { (up - down) / span } else { 0.0 };
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let mut accepted = false;
        while step > config.diameter_tol && obj.evals < config.max_evals {
            let mut trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + step * g / norm).collect();
            clamp_into(&mut trial, lo, hi);
            let ft = obj.eval(&trial)?;
            if ft > fx {
                x = trial;
                fx = ft;
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(LocalResult {
        point: x,
        value: fx,
        evaluations: obj.evals,
    })
}

/// Starting point for start `seed`: zeros (clamped) for seed 0, otherwise
/// uniform draws from a per-seed ChaCha stream.
pub fn starting_point(seed: usize, n_params: usize, config: &OptimizerConfig, rng_seed: u64) -> Vec<f64> {
    if seed == 0 {
        return vec![0.0f64.clamp(config.lower, config.upper); n_params];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(seed as u64);
    (0..n_params)
        .map(|_| {
            if config.upper > config.lower {
                rng.gen_range(config.lower..=config.upper)
            } else {
                config.lower
            }
        })
        .collect()
}

/// Runs one local optimization per start and keeps the best.
pub fn optimize_multistart<F>(
    objective: &F,
    n_params: usize,
    config: &OptimizerConfig,
    rng_seed: u64,
) -> Result<OptimizationOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    config.validate()?;
    let runs: Vec<LocalResult> = (0..config.seeds)
        .into_par_iter()
        .map(|seed| {
            let x0 = starting_point(seed, n_params, config, rng_seed);
            match config.method {
                LocalMethod::NelderMead => nelder_mead(objective, &x0, config),
                LocalMethod::GradientAscent => gradient_ascent(objective, &x0, config),
            }
        })
        .collect::<Result<_>>()?;

    let mut best_seed = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[best_seed].value {
            best_seed = i;
        }
    }
    Ok(OptimizationOutcome {
        best_point: runs[best_seed].point.clone(),
        best_value: runs[best_seed].value,
        best_seed,
        per_seed_values: runs.iter().map(|r| r.value).collect(),
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(x: &[f64]) -> Result<f64> {
        Ok(-(x[0] - 0.3).powi(2))
    }

    fn rosenbrock(x: &[f64]) -> Result<f64> {
        Ok(-((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)))
    }

    #[test]
    fn quadratic_bowl_in_one_dimension() {
        let out = optimize_multistart(&bowl, 1, &OptimizerConfig::default(), 42).unwrap();
        assert!(out.best_value > -1e-10);
        assert!((out.best_point[0] - 0.3).abs() < 1e-5);
        assert_eq!(out.per_seed_values.len(), 10);
    }

    #[test]
    fn rosenbrock_valley() {
        let cfg = OptimizerConfig {
            diameter_tol: 1e-9,
            ..OptimizerConfig::default()
        };
        let r = nelder_mead(&rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-4 && (r.point[1] - 1.0).abs() < 1e-4, "{:?}", r.point);
    }

    #[test]
    fn bounds_are_respected() {
        // unconstrained maximum at 7 lies outside the box
        let f = |x: &[f64]| Ok(-(x[0] - 7.0).powi(2) - (x[1] + 9.0).powi(2));
        let out = optimize_multistart(&f, 2, &OptimizerConfig::default(), 1).unwrap();
        assert!((out.best_point[0] - 5.0).abs() < 1e-6);
        assert!((out.best_point[1] + 5.0).abs() < 1e-6);
    }

    #[test]
    fn replay_is_bit_identical() {
        let f = |x: &[f64]| Ok((x[0] * 1.3).sin() * (x[1] - 0.2).cos() - 0.01 * x[2] * x[2]);
        let cfg = OptimizerConfig::default();
        let a = optimize_multistart(&f, 3, &cfg, 99).unwrap();
        let b = optimize_multistart(&f, 3, &cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = optimize_multistart(&f, 3, &cfg, 100).unwrap();
        assert_ne!(a.per_seed_values, c.per_seed_values);
    }

    #[test]
    fn best_dominates_every_start_and_the_zero_baseline() {
        let f = |x: &[f64]| Ok(x.iter().enumerate().map(|(i, v)| ((i + 1) as f64 * v).cos()).sum::<f64>());
        let out = optimize_multistart(&f, 4, &OptimizerConfig::default(), 5).unwrap();
        assert!(out.per_seed_values.iter().all(|&v| out.best_value >= v));
        assert!(out.best_value >= f(&[0.0; 4]).unwrap());
        assert_eq!(out.best_value, out.per_seed_values[out.best_seed]);
    }

    #[test]
    fn non_finite_objective_reports_point() {
        let f = |x: &[f64]| Ok(if x[0] > 1.0 { f64::NAN } else { x[0] });
        let err = optimize_multistart(&f, 1, &OptimizerConfig::default(), 0).unwrap_err();
        match err {
            Error::NonFiniteObjective { point, .. } => assert!(point[0] > 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn budget_is_honoured() {
        let cfg = OptimizerConfig {
            max_evals: 60,
            ..OptimizerConfig::default()
        };
        let f = |x: &[f64]| Ok(x.iter().map(|v| v.sin()).sum::<f64>());
        let r = nelder_mead(&f, &[1.0; 8], &cfg).unwrap();
        // one iteration may overshoot by at most a shrink step
        assert!(r.evaluations <= 60 + 8 + 2);
    }

    #[test]
    fn gradient_ascent_finds_bowl() {
        let cfg = OptimizerConfig {
            method: LocalMethod::GradientAscent,
            ..OptimizerConfig::default()
        };
        let out = optimize_multistart(&bowl, 1, &cfg, 3).unwrap();
        assert!((out.best_point[0] - 0.3).abs() < 1e-5);
    }

    #[test]
    fn starting_points_are_in_bounds_and_seed_zero_is_zero() {
        let cfg = OptimizerConfig::default();
        assert!(starting_point(0, 5, &cfg, 1).iter().all(|&v| v == 0.0));
        for s in 1..20 {
            assert!(starting_point(s, 16, &cfg, 7).iter().all(|v| (-5.0..=5.0).contains(v)));
        }
        assert_ne!(starting_point(1, 4, &cfg, 7), starting_point(2, 4, &cfg, 7));
        assert!(OptimizerConfig { seeds: 0, ..cfg.clone() }.validate().is_err());
        assert!(OptimizerConfig { lower: 1.0, upper: 0.0, ..cfg }.validate().is_err());
    }
}
