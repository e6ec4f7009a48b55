//! Monte Carlo harness for the stochastic attack processes and the greedy
//! nearest-out experiment.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::attack::{greedy_step, limited_control_strategy, GreedyAttackState, GreedyConfig};
use crate::bounds::{BoundParams, MixModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::{fmt_f64, CsvWriter};
use crate::learner::{radius_from_quantile, update_finite, Cooldown, ProtectedLearnerState, StepOutcome, UpdateRule};
use crate::linalg::{self, dot};
use crate::model::{AttackContext, CentroidState, Point};
use crate::rng::{gaussian_vec, uniform_in_ball, uniform_on_sphere, unit_vector, RandomSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Axiom6,
    Axiom7,
    GreedyGaussian,
    FpSensitivity,
    NuSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnocuousSource {
    UniformBall,
    UniformCircle,
    /// Points supplied in [`SimConfig::empirical_points`], centered and
    /// rescaled so the farthest lies on the source radius.
    CorpusEmbedding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: SimModel,
    pub nu: f64,
    pub alpha: f64,
    pub n: u64,
    pub iterations: u64,
    pub repetitions: usize,
    pub dim: usize,
    pub seed: u64,
    pub innocuous: InnocuousSource,
    /// Radius of the innocuous support; at most the learner radius 1.
    pub innocuous_radius: f64,
    pub eps_second_moment: f64,
    pub holdout_size: usize,
    pub cooldown: Cooldown,
    /// Target false-positive rate used to calibrate radii.
    pub fp_target: f64,
    pub nu_grid: Vec<f64>,
    pub d_crit: f64,
    #[serde(skip)]
    pub empirical_points: Vec<Vec<f64>>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            model: SimModel::Axiom6,
            nu: 0.05,
            alpha: 0.0,
            n: 1000,
            iterations: 50_000,
            repetitions: 10,
            dim: 2,
            seed: 42,
            innocuous: InnocuousSource::UniformCircle,
            innocuous_radius: 1.0,
            eps_second_moment: 1.0,
            holdout_size: 500,
            cooldown: Cooldown::Permanent,
            fp_target: 0.001,
            nu_grid: vec![0.05, 0.10, 0.14, 0.16],
            d_crit: 0.18,
            empirical_points: Vec::new(),
            execution: Execution::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::param("repetitions", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if self.n < 1 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::param("nu", format!("{} not in [0, 1]", self.nu)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::param("alpha", format!("{} not in [0, 1)", self.alpha)));
        }
        if !(self.innocuous_radius > 0.0 && self.innocuous_radius <= 1.0) {
            return Err(Error::param("innocuous_radius", format!("{} not in (0, 1]", self.innocuous_radius)));
        }
        if !(0.0..=1.0).contains(&self.eps_second_moment) {
            return Err(Error::param("eps_second_moment", "must lie in [0, 1]"));
        }
        if !(self.fp_target > 0.0 && self.fp_target < 1.0) {
            return Err(Error::param("fp_target", "must lie in (0, 1)"));
        }
        if self.holdout_size == 0 {
            return Err(Error::param("holdout_size", "must be at least 1"));
        }
        if self.nu_grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("nu_grid", "entries must lie in [0, 1]"));
        }
        if self.innocuous == InnocuousSource::CorpusEmbedding {
            if self.empirical_points.is_empty() {
                return Err(Error::Empty("empirical innocuous points"));
            }
            if self.empirical_points.iter().any(|p| p.len() != self.dim) {
                return Err(Error::param("empirical_points", "dimension differs from dim"));
            }
        }
        Ok(())
    }

    /// Logging stride `ceil(iterations / 1000)`.
    pub fn stride(&self) -> u64 {
        self.iterations.div_ceil(1000)
    }

    /// Logged iterations: 0, stride, 2 stride, ..., and the last one.
    pub fn logged_steps(&self) -> Vec<u64> {
        let s = self.stride();
        let mut v: Vec<u64> = (0..=self.iterations).step_by(s as usize).collect();
        if *v.last().expect("nonempty") != self.iterations {
            v.push(self.iterations);
        }
        v
    }

    fn mix(&self, nu: f64) -> MixModel {
        MixModel {
            nu,
            alpha: self.alpha,
            n: self.n,
            eps_second_moment: self.eps_second_moment,
        }
    }
}

/// Draws innocuous points for one repetition.
struct Innocuous {
    kind: InnocuousSource,
    dim: usize,
    radius: f64,
    pool: Vec<Vec<f64>>,
}

impl Innocuous {
    fn new(cfg: &SimConfig) -> Self {
        let mut pool = Vec::new();
        if cfg.innocuous == InnocuousSource::CorpusEmbedding {
            let m = cfg.empirical_points.len() as f64;
            let mut mean = vec![0.0; cfg.dim];
            for p in &cfg.empirical_points {
                linalg::axpy(1.0 / m, p, &mut mean);
            }
            let centered: Vec<Vec<f64>> = cfg.empirical_points.iter().map(|p| linalg::sub(p, &mean)).collect();
            let reach = centered.iter().map(|p| linalg::norm(p)).fold(0.0, f64::max);
            let s = if reach > 0.0 { cfg.innocuous_radius / reach } else { 0.0 };
            pool = centered
                .into_iter()
                .map(|p| p.into_iter().map(|v| v * s).collect())
                .collect();
        }
        Self {
            kind: cfg.innocuous,
            dim: cfg.dim,
            radius: cfg.innocuous_radius,
            pool,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            InnocuousSource::UniformBall => uniform_in_ball(rng, self.dim, self.radius),
            InnocuousSource::UniformCircle => uniform_on_sphere(rng, self.dim, self.radius),
            InnocuousSource::CorpusEmbedding => self.pool[rng.random_range(0..self.pool.len())].clone(),
        }
    }
}

/// Aggregated displacement process over repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub iteration: Vec<u64>,
    pub mean_d: Vec<f64>,
    pub std_d: Vec<f64>,
    /// Expectation (or its upper bound for the protected process).
    pub bound_e: Vec<f64>,
    /// Lower expectation bound; equal to `bound_e` where only one exists.
    pub bound_e_lower: Vec<f64>,
    pub bound_var: Vec<f64>,
    /// Mean holdout false-positive rate; NaN where not tracked.
    pub fp_rate: Vec<f64>,
    /// Number of repetitions that reset in the interval ending at this step.
    pub reset_flag: Vec<u32>,
    pub repetitions: usize,
}

pub const TRACE_HEADER: [&str; 7] = ["iteration", "mean_D", "std_D", "bound_E", "bound_Var", "fp_rate", "reset_flag"];

impl Trace {
    pub fn len(&self) -> usize {
        self.iteration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iteration.is_empty()
    }

    /// Standard error of the mean at logged position `k`.
    pub fn se(&self, k: usize) -> f64 {
        self.std_d[k] / (self.repetitions as f64).sqrt()
    }

    /// Average of the mean trace over logged steps at or after `from`.
    pub fn tail_mean(&self, from: u64) -> f64 {
        let tail: Vec<f64> = self
            .iteration
            .iter()
            .zip(&self.mean_d)
            .filter(|(i, _)| **i >= from)
            .map(|(_, m)| *m)
            .collect();
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<W> {
        let mut w = CsvWriter::new(out, &TRACE_HEADER)?;
        for k in 0..self.len() {
            w.row(&[
                self.iteration[k].to_string(),
                fmt_f64(self.mean_d[k]),
                fmt_f64(self.std_d[k]),
                fmt_f64(self.bound_e[k]),
                fmt_f64(self.bound_var[k]),
                fmt_f64(self.fp_rate[k]),
                self.reset_flag[k].to_string(),
            ])?;
        }
        w.into_inner()
    }
}

/// Outcome of one repetition at the logged steps.
#[derive(Clone, Debug, Default)]
struct RepRun {
    d: Vec<f64>,
    fp: Vec<f64>,
    resets: Vec<u32>,
    max_d: f64,
    max_fp: f64,
    every_step: Vec<f64>,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (m, 0.0);
    }
    let v = xs.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn aggregate(cfg: &SimConfig, runs: &[RepRun], bounds: impl Fn(u64) -> (f64, f64, f64)) -> Trace {
    let steps = cfg.logged_steps();
    let mut t = Trace {
        iteration: steps.clone(),
        mean_d: Vec::with_capacity(steps.len()),
        std_d: Vec::with_capacity(steps.len()),
        bound_e: Vec::with_capacity(steps.len()),
        bound_e_lower: Vec::with_capacity(steps.len()),
        bound_var: Vec::with_capacity(steps.len()),
        fp_rate: Vec::with_capacity(steps.len()),
        reset_flag: Vec::with_capacity(steps.len()),
        repetitions: runs.len(),
    };
    for (k, &i) in steps.iter().enumerate() {
        let (m, s) = mean_std(runs.iter().map(|r| r.d[k]));
        t.mean_d.push(m);
        t.std_d.push(s);
        let (e, el, v) = bounds(i);
        t.bound_e.push(e);
        t.bound_e_lower.push(el);
        t.bound_var.push(v);
        let fp = if runs[0].fp.is_empty() {
            f64::NAN
        } else {
            runs.iter().map(|r| r.fp[k]).sum::<f64>() / runs.len() as f64
        };
        t.fp_rate.push(fp);
        t.reset_flag.push(runs.iter().map(|r| r.resets.get(k).copied().unwrap_or(0)).sum());
    }
    t
}

/// Limited-control moments for any `nu` in `[0, 1]`.
fn limited_bounds(cfg: &SimConfig, nu: f64, i: u64) -> (f64, f64, f64) {
    if nu >= 1.0 {
        let e = i as f64 / cfg.n as f64;
        return (e, e, 0.0);
    }
    let m = cfg.mix(nu);
    let p = BoundParams::limited(i, &m);
    let k = nu / (1.0 - nu);
    let e = (1.0 - p.c) * k;
    (e, e, p.gamma * k * k + p.delta)
}

fn protected_bounds(cfg: &SimConfig, i: u64) -> (f64, f64, f64) {
    let m = cfg.mix(cfg.nu);
    let (nu, a) = (m.nu, m.alpha);
    let p = BoundParams::protected(i, &m);
    let up = (1.0 - p.c) * (nu + a * (1.0 - nu)) / ((1.0 - nu) * (1.0 - a));
    let low = (1.0 - p.c) * nu / (1.0 - nu);
    let var = p.gamma * nu * nu / ((1.0 - a).powi(2) * (1.0 - nu).powi(2)) + p.rho + p.delta;
    (up, low, var)
}

fn direction(cfg: &SimConfig) -> Vec<f64> {
    let mut a = vec![0.0; cfg.dim];
    a[0] = 1.0;
    a
}

/// One run of the limited-control process at traffic fraction `nu`.
fn limited_rep(cfg: &SimConfig, nu: f64, source: RandomSource, keep_every_step: bool) -> Result<RepRun> {
    let mut rng = source.rng();
    let innocuous = Innocuous::new(cfg);
    let origin = Point::zeros(cfg.dim);
    let ctx = AttackContext::from_direction(Point::new(direction(cfg))?, origin.clone())?;
    let mut state = CentroidState::new(origin, 1.0, cfg.n as usize)?;
    let steps = cfg.logged_steps();
    let mut run = RepRun::default();
    let mut next = 0usize;
    for i in 0..=cfg.iterations {
        let d = dot(&state.center, &ctx.direction);
        run.max_d = run.max_d.max(d);
        if keep_every_step {
            run.every_step.push(d);
        }
        if next < steps.len() && steps[next] == i {
            run.d.push(d);
            next += 1;
        }
        if i == cfg.iterations {
            break;
        }
        let x = if rng.random_bool(nu) {
            limited_control_strategy(&state.center, &ctx)?.into_inner()
        } else {
            innocuous.draw(&mut rng)
        };
        update_finite(&mut state, &x, UpdateRule::AverageOut, &mut rng)?;
    }
    Ok(run)
}

/// Limited-control process (every innocuous point accepted).
pub fn run_axiom6(cfg: &SimConfig) -> Result<Trace> {
    cfg.validate()?;
    let root = RandomSource::new(cfg.seed);
    let runs: Vec<RepRun> = cfg
        .execution
        .map(cfg.repetitions, |k| limited_rep(cfg, cfg.nu, root.stream(k as u64), false))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(aggregate(cfg, &runs, |i| limited_bounds(cfg, cfg.nu, i)))
}

fn protected_rep(cfg: &SimConfig, nu: f64, source: RandomSource, learner_radius: Option<f64>) -> Result<RepRun> {
    let mut rng = source.rng();
    let innocuous = Innocuous::new(cfg);
    let holdout: Vec<Point> = (0..cfg.holdout_size)
        .map(|_| Point::new(innocuous.draw(&mut rng)))
        .collect::<Result<_>>()?;
    let origin = Point::zeros(cfg.dim);
    let radius = match learner_radius {
        Some(r) => r,
        None => 1.0,
    };
    let ctx = AttackContext::from_direction(Point::new(direction(cfg))?, origin.clone())?;
    let state = CentroidState::new(origin, radius, cfg.n as usize)?;
    let mut p = ProtectedLearnerState::new(state, cfg.alpha, holdout)?.with_cooldown(cfg.cooldown);
    let steps = cfg.logged_steps();
    let mut run = RepRun::default();
    let mut next = 0usize;
    let mut resets_since = 0u32;
    for i in 0..=cfg.iterations {
        if next < steps.len() && steps[next] == i {
            let d = dot(&p.state.center, &ctx.direction) / radius;
            let fp = p.fp_rate();
            run.d.push(d);
            run.fp.push(fp);
            run.resets.push(resets_since);
            run.max_fp = run.max_fp.max(fp);
            resets_since = 0;
            next += 1;
        }
        run.max_d = run.max_d.max(dot(&p.state.center, &ctx.direction) / radius);
        if i == cfg.iterations {
            break;
        }
        let adversarial = rng.random_bool(nu);
        let x = if adversarial {
            // f(X) = X + r a keeps the point on the boundary of the ball
            let mut x = p.state.center.as_slice().to_vec();
            linalg::axpy(radius, &ctx.direction, &mut x);
            x
        } else {
            innocuous.draw(&mut rng)
        };
        if p.step(&x, adversarial)? == StepOutcome::Reset {
            resets_since += 1;
        }
    }
    Ok(run)
}

/// Protected process: innocuous points gated by the radius, reset on an
/// estimated false-positive rate above alpha.
pub fn run_axiom7(cfg: &SimConfig) -> Result<Trace> {
    cfg.validate()?;
    if !(cfg.nu > 0.0 && cfg.nu < 1.0) {
        return Err(Error::param("nu", "protected bounds need nu in (0, 1)"));
    }
    let root = RandomSource::new(cfg.seed);
    let runs: Vec<RepRun> = cfg
        .execution
        .map(cfg.repetitions, |k| protected_rep(cfg, cfg.nu, root.stream(k as u64), None))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(aggregate(cfg, &runs, |i| protected_bounds(cfg, i)))
}

/// Least-squares line through `(x, y)` with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::param("fit", "need at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("fit", "x values are constant"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyRun {
    /// Mean displacement over repetitions after each iteration (index 0 is
    /// the untouched learner).
    pub mean_d: Vec<f64>,
    pub std_d: Vec<f64>,
    pub fit: LinearFit,
    /// Smallest per-repetition R² after burn-in.
    pub min_rep_r_squared: f64,
    pub max_representer_residual: f64,
    pub radius: f64,
    pub overrides: u64,
    pub stalled_repetitions: usize,
    pub trace: Trace,
}

/// Radius whose Gaussian false-positive rate is `fp`.
pub fn gaussian_radius(d: usize, fp: f64) -> Result<f64> {
    let chi = ChiSquared::new(d as f64).map_err(|e| Error::param("dim", e.to_string()))?;
    Ok(chi.inverse_cdf(1.0 - fp).sqrt())
}

fn greedy_rep(cfg: &SimConfig, source: RandomSource, radius: f64, gcfg: &GreedyConfig) -> Result<(Vec<f64>, f64, u64, bool)> {
    let mut rng = source.rng();
    let n = cfg.n as usize;
    let pts: Vec<Point> = (0..n)
        .map(|_| Point::new(gaussian_vec(&mut rng, cfg.dim)))
        .collect::<Result<_>>()?;
    let mut state = CentroidState::with_working_set(pts, radius)?;
    let ctx = AttackContext::from_direction(Point::new(unit_vector(&mut rng, cfg.dim))?, state.center.clone())?;
    let mut gs = GreedyAttackState::new();
    let mut d = Vec::with_capacity(cfg.iterations as usize + 1);
    d.push(0.0);
    let mut stalled = false;
    for _ in 0..cfg.iterations {
        match greedy_step(&mut state, &ctx, &mut gs, gcfg) {
            Ok(row) => d.push(row.displacement),
            Err(Error::Stalled) => {
                stalled = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    // a stalled run keeps its last displacement
    while d.len() < cfg.iterations as usize + 1 {
        let last = *d.last().expect("nonempty");
        d.push(last);
    }
    let res = gs.representer_residuals.iter().cloned().fold(0.0, f64::max);
    Ok((d, res, gs.overrides, stalled))
}

/// Greedy nearest-out attack on Gaussian data. The slope is fitted on the
/// mean trace after discarding the first 10% of iterations.
pub fn run_greedy_gaussian(cfg: &SimConfig, gcfg: &GreedyConfig) -> Result<GreedyRun> {
    cfg.validate()?;
    if cfg.dim < 2 {
        return Err(Error::param("dim", "greedy experiment needs d >= 2"));
    }
    let radius = gaussian_radius(cfg.dim, cfg.fp_target)?;
    let root = RandomSource::new(cfg.seed);
    let reps: Vec<_> = cfg
        .execution
        .map(cfg.repetitions, |k| greedy_rep(cfg, root.stream(k as u64), radius, gcfg))
        .into_iter()
        .collect::<Result<_>>()?;
    let len = cfg.iterations as usize + 1;
    let mut mean_d = vec![0.0; len];
    let mut std_d = vec![0.0; len];
    for i in 0..len {
        let (m, s) = mean_std(reps.iter().map(|r| r.0[i]));
        mean_d[i] = m;
        std_d[i] = s;
    }
    let burn = (cfg.iterations as usize) / 10;
    let xs: Vec<f64> = (burn..len).map(|i| i as f64).collect();
    let fit = fit_line(&xs, &mean_d[burn..])?;
    let mut min_r2 = f64::INFINITY;
    for r in &reps {
        min_r2 = min_r2.min(fit_line(&xs, &r.0[burn..])?.r_squared);
    }
    let runs: Vec<RepRun> = reps
        .iter()
        .map(|r| RepRun {
            d: cfg.logged_steps().iter().map(|&i| r.0[i as usize]).collect(),
            ..Default::default()
        })
        .collect();
    let trace = aggregate(cfg, &runs, |_| (f64::NAN, f64::NAN, f64::NAN));
    Ok(GreedyRun {
        mean_d,
        std_d,
        fit,
        min_rep_r_squared: min_r2,
        max_representer_residual: reps.iter().map(|r| r.1).fold(0.0, f64::max),
        radius,
        overrides: reps.iter().map(|r| r.2).sum(),
        stalled_repetitions: reps.iter().filter(|r| r.3).count(),
        trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpPoint {
    pub nu: f64,
    pub max_fp: f64,
}

/// Largest holdout false-positive rate over all logged iterations and
/// repetitions, per traffic fraction. The radius is calibrated on `n`
/// innocuous training points for `fp_target`, and the learner never resets.
pub fn run_fp_sensitivity(cfg: &SimConfig) -> Result<Vec<FpPoint>> {
    cfg.validate()?;
    let root = RandomSource::new(cfg.seed);
    let mut calib_rng = root.stream(u64::MAX).rng();
    let innocuous = Innocuous::new(cfg);
    let train: Vec<Point> = (0..cfg.n.max(cfg.holdout_size as u64))
        .map(|_| Point::new(innocuous.draw(&mut calib_rng)))
        .collect::<Result<_>>()?;
    let radius = radius_from_quantile(&train, &vec![0.0; cfg.dim], cfg.fp_target)?;
    let mut cfg = cfg.clone();
    // never reset: the curve reports how far the rate would climb
    cfg.alpha = 1.0 - f64::EPSILON;
    cfg.alpha = cfg.alpha.min(0.999_999_999);
    let mut out = Vec::with_capacity(cfg.nu_grid.len());
    for (g, &nu) in cfg.nu_grid.iter().enumerate() {
        let src = root.stream(g as u64);
        let runs: Vec<RepRun> = cfg
            .execution
            .map(cfg.repetitions, |k| protected_rep(&cfg, nu, src.stream(k as u64), Some(radius)))
            .into_iter()
            .collect::<Result<_>>()?;
        out.push(FpPoint {
            nu,
            max_fp: runs.iter().map(|r| r.max_fp).fold(0.0, f64::max),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub nu: f64,
    /// Whether the mean displacement over repetitions ever reached `d_crit`.
    pub reached: bool,
    pub first_reached: Option<u64>,
    pub final_d: f64,
    /// Fraction of repetitions that individually reached `d_crit`.
    pub rep_fraction: f64,
}

/// Limited-control runs over `nu_grid`, checking whether the mean
/// displacement reaches `d_crit` within the iteration budget.
pub fn run_nu_sweep(cfg: &SimConfig) -> Result<Vec<SweepOutcome>> {
    cfg.validate()?;
    if cfg.nu_grid.is_empty() {
        return Err(Error::Empty("nu grid"));
    }
    let root = RandomSource::new(cfg.seed);
    let mut out = Vec::with_capacity(cfg.nu_grid.len());
    for (g, &nu) in cfg.nu_grid.iter().enumerate() {
        let src = root.stream(g as u64);
        let runs: Vec<RepRun> = cfg
            .execution
            .map(cfg.repetitions, |k| limited_rep(cfg, nu, src.stream(k as u64), true))
            .into_iter()
            .collect::<Result<_>>()?;
        let reps = runs.len() as f64;
        let mut first = None;
        let mut final_d = 0.0;
        for i in 0..=cfg.iterations as usize {
            let m = runs.iter().map(|r| r.every_step[i]).sum::<f64>() / reps;
            if first.is_none() && m >= cfg.d_crit {
                first = Some(i as u64);
            }
            final_d = m;
        }
        out.push(SweepOutcome {
            nu,
            reached: first.is_some(),
            first_reached: first,
            final_d,
            rep_fraction: runs.iter().filter(|r| r.max_d >= cfg.d_crit).count() as f64 / reps,
        });
    }
    Ok(out)
}

/// Pass/fail of the bound-versus-simulation comparisons on a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// Logged steps where |mean - E| > 3 SE.
    pub mean_outside_3se: usize,
    /// Logged steps where mean > E (upper bound) + 3 SE.
    pub mean_above_bound_3se: usize,
    /// Logged steps where mean > E (upper bound), no slack.
    pub mean_above_bound: usize,
    /// Logged steps where mean < lower bound - 3 SE.
    pub mean_below_lower_3se: usize,
    /// Logged steps where the sample variance exceeds bound + 3 SE.
    pub variance_violations: usize,
    pub logged: usize,
}

impl DominanceReport {
    pub fn of(trace: &Trace) -> Self {
        let r = trace.repetitions as f64;
        let mut rep = DominanceReport {
            mean_outside_3se: 0,
            mean_above_bound_3se: 0,
            mean_above_bound: 0,
            mean_below_lower_3se: 0,
            variance_violations: 0,
            logged: trace.len(),
        };
        for k in 0..trace.len() {
            let se = trace.se(k);
            let m = trace.mean_d[k];
            if (m - trace.bound_e[k]).abs() > 3.0 * se {
                rep.mean_outside_3se += 1;
            }
            if m > trace.bound_e[k] + 3.0 * se {
                rep.mean_above_bound_3se += 1;
            }
            if m > trace.bound_e[k] {
                rep.mean_above_bound += 1;
            }
            if m < trace.bound_e_lower[k] - 3.0 * se {
                rep.mean_below_lower_3se += 1;
            }
            let var = trace.std_d[k] * trace.std_d[k];
            let var_se = if r > 1.0 { var * (2.0 / (r - 1.0)).sqrt() } else { 0.0 };
            if var > trace.bound_var[k] + 3.0 * var_se {
                rep.variance_violations += 1;
            }
        }
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(model: SimModel) -> SimConfig {
        SimConfig {
            model,
            n: 50,
            iterations: 2000,
            repetitions: 4,
            ..Default::default()
        }
    }

    #[test]
    fn logged_steps_cover_range() {
        let mut c = small(SimModel::Axiom6);
        c.iterations = 2500;
        let s = c.logged_steps();
        assert_eq!(c.stride(), 3);
        assert_eq!(s[0], 0);
        assert_eq!(*s.last().unwrap(), 2500);
        assert!(s.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 3));
    }

    #[test]
    fn nu_one_is_exact_progress() {
        let mut c = small(SimModel::Axiom6);
        c.nu = 1.0;
        let t = run_axiom6(&c).unwrap();
        for k in 0..t.len() {
            assert!((t.mean_d[k] - t.iteration[k] as f64 / 50.0).abs() < 1e-9);
            assert!(t.std_d[k] < 1e-12);
        }
    }

    #[test]
    fn nu_zero_stays_centered() {
        let mut c = small(SimModel::Axiom6);
        c.nu = 0.0;
        c.repetitions = 20;
        let t = run_axiom6(&c).unwrap();
        let bad = (1..t.len()).filter(|&k| t.mean_d[k].abs() > 4.0 * t.se(k)).count();
        assert!(bad <= t.len() / 50, "{bad}");
    }

    #[test]
    fn replay_is_bit_identical() {
        let c = small(SimModel::Axiom6);
        let a = run_axiom6(&c).unwrap();
        let b = run_axiom6(&SimConfig {
            execution: Execution::Sequential,
            ..c.clone()
        })
        .unwrap();
        assert_eq!(a.mean_d, b.mean_d);
        assert_eq!(a.std_d, b.std_d);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn resets_zero_the_logged_displacement() {
        // strong attacker, small window: the holdout leaves the ball quickly
        let mut c = small(SimModel::Axiom7);
        c.nu = 0.5;
        c.n = 5;
        c.alpha = 0.05;
        c.iterations = 300;
        c.innocuous = InnocuousSource::UniformBall;
        c.cooldown = Cooldown::Steps(3);
        c.holdout_size = 100;
        let root = RandomSource::new(c.seed);
        let run = protected_rep(&c, c.nu, root.stream(0), None).unwrap();
        let total: u32 = run.resets.iter().sum();
        assert!(total > 0);
        for (k, &r) in run.resets.iter().enumerate() {
            if r > 0 {
                assert_eq!(run.d[k], 0.0);
            }
        }
        let t = run_axiom7(&c).unwrap();
        assert!(t.reset_flag.iter().sum::<u32>() > 0);
    }

    #[test]
    fn protected_matches_limited_when_gate_inactive() {
        let mut c = small(SimModel::Axiom7);
        c.nu = 0.02;
        c.alpha = 0.5;
        c.innocuous_radius = 0.5;
        c.repetitions = 8;
        let p = run_axiom7(&c).unwrap();
        assert_eq!(p.reset_flag.iter().sum::<u32>(), 0);
        let l = run_axiom6(&SimConfig {
            model: SimModel::Axiom6,
            ..c.clone()
        })
        .unwrap();
        for k in 0..p.len() {
            let se = (p.se(k).powi(2) + l.se(k).powi(2)).sqrt();
            assert!((p.mean_d[k] - l.mean_d[k]).abs() <= 5.0 * se + 1e-12);
        }
    }

    #[test]
    fn fit_line_examples() {
        let f = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gaussian_radius_matches_chi_square() {
        // d = 2: chi-square tail is exp(-r^2/2)
        let r = gaussian_radius(2, 0.001).unwrap();
        assert!(((-r * r / 2.0).exp() - 0.001).abs() < 1e-12);
    }

    #[test]
    fn greedy_small_run() {
        let c = SimConfig {
            model: SimModel::GreedyGaussian,
            n: 20,
            dim: 3,
            iterations: 60,
            repetitions: 2,
            ..Default::default()
        };
        let g = run_greedy_gaussian(&c, &GreedyConfig::default()).unwrap();
        assert_eq!(g.mean_d.len(), 61);
        assert!(g.fit.slope > 0.0);
        assert!(g.mean_d.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn sweep_and_fp_shapes() {
        let mut c = small(SimModel::NuSweep);
        c.nu_grid = vec![0.0, 0.5];
        c.d_crit = 0.3;
        let s = run_nu_sweep(&c).unwrap();
        assert!(!s[0].reached && s[1].reached);
        c.innocuous = InnocuousSource::UniformBall;
        c.holdout_size = 200;
        let f = run_fp_sensitivity(&c).unwrap();
        assert_eq!(f.len(), 2);
        assert!(f[1].max_fp >= f[0].max_fp);
    }
}
