//! Path integration of the Itô SDE
//!
//! ```text
//! dn1 = n1 (-c1 + c2 alpha (N - n1)) dt + sigma alpha (N - n1) n1 dB
//! ```
//!
//! on a uniform grid, with Euler–Maruyama (default) or Milstein steps.
//! The exact solution never leaves `(0, N)`; a discrete step that does is
//! projected back to `boundary_epsilon` (or `N - boundary_epsilon`) and
//! counted in [`Path::clamp_count`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InitPolicy, Scenario};
use crate::rng::path_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
    Milstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub t_end: f64,
    pub n_steps: usize,
    pub scheme: Scheme,
    pub master_seed: u64,
    /// Projection margin in vehicles; `None` means `1e-9 * N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_epsilon: Option<f64>,
}

impl Default for SimConfig {
    /// 30,000 steps over `[0, 30]`.
    fn default() -> Self {
        Self {
            t_end: 30.0,
            n_steps: 30_000,
            scheme: Scheme::EulerMaruyama,
            master_seed: 0,
            boundary_epsilon: None,
        }
    }
}

impl SimConfig {
    /// Grid with the default step `dt = 1e-3` reaching `t_end`.
    pub fn with_horizon(t_end: f64) -> Self {
        Self {
            t_end,
            n_steps: (t_end * 1000.0).round().max(1.0) as usize,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    /// Time of grid point `i`; exact at both ends.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            self.t_end * i as f64 / self.n_steps as f64
        }
    }

    pub fn epsilon(&self, scenario: &Scenario) -> f64 {
        self.boundary_epsilon.unwrap_or(1e-9 * scenario.n_total)
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::param("t_end", format!("must be finite and > 0, got {}", self.t_end)));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be >= 1"));
        }
        let eps = self.epsilon(scenario);
        if !(eps > 0.0 && eps < 0.5 * scenario.n_total) {
            return Err(Error::param(
                "boundary_epsilon",
                format!("must lie in (0, N/2) = (0, {}), got {eps}", 0.5 * scenario.n_total),
            ));
        }
        Ok(())
    }
}

/// Drift coefficient `x (-c1 + c2 alpha (N - x))`.
pub fn drift(scenario: &Scenario, x: f64) -> f64 {
    let p = &scenario.params;
    x * (-p.c1 + p.c2 * scenario.alpha() * (scenario.n_total - x))
}

/// Diffusion coefficient `sigma alpha (N - x) x`.
pub fn diffusion(scenario: &Scenario, x: f64) -> f64 {
    scenario.params.sigma * scenario.alpha() * (scenario.n_total - x) * x
}

/// `d/dx` of [`diffusion`]: `sigma alpha (N - 2x)`.
pub fn diffusion_derivative(scenario: &Scenario, x: f64) -> f64 {
    scenario.params.sigma * scenario.alpha() * (scenario.n_total - 2.0 * x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub clamp_count: u64,
    /// Master seed of the stream.
    pub seed: u64,
    /// Stream index within the master seed.
    pub index: u64,
}

impl Path {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }
}

/// Lazily integrated trajectory, yielding `n1` at grid points `0..=n_steps`.
///
/// Experiments that only need a value at one grid time use
/// `Stepper::nth` so the full path never has to be stored.
#[derive(Debug, Clone)]
pub struct Stepper {
    c1: f64,
    c2_alpha: f64,
    sigma_alpha: f64,
    n: f64,
    dt: f64,
    sqrt_dt: f64,
    scheme: Scheme,
    lo: f64,
    hi: f64,
    x: f64,
    step: usize,
    n_steps: usize,
    clamps: u64,
    rng: ChaCha8Rng,
}

impl Stepper {
    /// Stepper for stream `index`, starting from `n1_0`.
    pub fn new(scenario: &Scenario, config: &SimConfig, index: u64, n1_0: f64) -> Result<Self> {
        Self::with_rng(scenario, config, path_stream(config.master_seed, index), n1_0)
    }

    /// Stepper for ensemble member `index`: the initial value is drawn from
    /// the path's own stream according to `scenario.init`.
    pub fn for_member(scenario: &Scenario, config: &SimConfig, index: u64) -> Result<Self> {
        let mut rng = path_stream(config.master_seed, index);
        let n1_0 = draw_initial(scenario, &mut rng);
        Self::with_rng(scenario, config, rng, n1_0)
    }

    fn with_rng(scenario: &Scenario, config: &SimConfig, rng: ChaCha8Rng, n1_0: f64) -> Result<Self> {
        scenario.validate()?;
        config.validate(scenario)?;
        if !(n1_0 > 0.0 && n1_0 < scenario.n_total) {
            return Err(Error::OutOfDomain {
                what: "n1_0",
                value: n1_0,
                domain: format!("(0, {})", scenario.n_total),
            });
        }
        let p = &scenario.params;
        let alpha = scenario.alpha();
        let eps = config.epsilon(scenario);
        let dt = config.dt();
        Ok(Self {
            c1: p.c1,
            c2_alpha: p.c2 * alpha,
            sigma_alpha: p.sigma * alpha,
            n: scenario.n_total,
            dt,
            sqrt_dt: dt.sqrt(),
            scheme: config.scheme,
            lo: eps,
            hi: scenario.n_total - eps,
            x: n1_0,
            step: 0,
            n_steps: config.n_steps,
            clamps: 0,
            rng,
        })
    }

    pub fn clamp_count(&self) -> u64 {
        self.clamps
    }

    /// Grid index of the value the next call to `next` returns.
    pub fn position(&self) -> usize {
        self.step
    }

    fn advance(&mut self) {
        let x = self.x;
        let gap = self.n - x;
        let f = x * (-self.c1 + self.c2_alpha * gap);
        let g = self.sigma_alpha * gap * x;
        let z: f64 = if self.sigma_alpha == 0.0 {
            0.0
        } else {
            self.rng.sample(StandardNormal)
        };
        let mut next = x + f * self.dt + g * self.sqrt_dt * z;
        if self.scheme == Scheme::Milstein {
            let dg = self.sigma_alpha * (self.n - 2.0 * x);
            next += 0.5 * g * dg * (z * z - 1.0) * self.dt;
        }
        if !(next > 0.0) {
            next = self.lo;
            self.clamps += 1;
        } else if next >= self.n {
            next = self.hi;
            self.clamps += 1;
        }
        self.x = next;
    }
}

impl Iterator for Stepper {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.step > self.n_steps {
            return None;
        }
        if self.step > 0 {
            self.advance();
        }
        self.step += 1;
        Some(self.x)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n_steps + 1 - self.step.min(self.n_steps + 1);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Stepper {}

/// Initial value for a path per `scenario.init`, drawn from `rng` when random.
pub fn draw_initial(scenario: &Scenario, rng: &mut ChaCha8Rng) -> f64 {
    match scenario.init {
        InitPolicy::FixedValue { value } => value,
        InitPolicy::UniformDraw { .. } => {
            let (lo, hi) = scenario
                .uniform_init_bounds()
                .expect("uniform policy always has bounds");
            rng.random_range(lo..hi)
        }
    }
}

fn collect_path(stepper: Stepper, config: &SimConfig, index: u64) -> Result<Path> {
    let times: Vec<f64> = (0..=config.n_steps).map(|i| config.time(i)).collect();
    let mut stepper = stepper;
    let values: Vec<f64> = stepper.by_ref().collect();
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Runtime(format!("path {index} produced non-finite value {bad}")));
    }
    Ok(Path {
        times,
        values,
        clamp_count: stepper.clamp_count(),
        seed: config.master_seed,
        index,
    })
}

/// Single path from a given start on stream `(config.master_seed, index)`.
pub fn simulate_path(scenario: &Scenario, config: &SimConfig, n1_0: f64, index: u64) -> Result<Path> {
    let stepper = Stepper::new(scenario, config, index, n1_0)?;
    collect_path(stepper, config, index)
}

/// `n_paths` paths in parallel on the current rayon pool, ordered by index.
pub fn simulate_ensemble(scenario: &Scenario, config: &SimConfig, n_paths: usize) -> Result<Vec<Path>> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be >= 1"));
    }
    scenario.validate()?;
    config.validate(scenario)?;
    let results: Vec<Result<Path>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| Stepper::for_member(scenario, config, i).and_then(|s| collect_path(s, config, i)))
        .collect();
    let mut paths = Vec::with_capacity(n_paths);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => paths.push(p),
            Err(e) => failures.push((i, Box::new(e))),
        }
    }
    if failures.is_empty() {
        Ok(paths)
    } else {
        Err(Error::Ensemble { failures })
    }
}

/// Run `f` on a dedicated pool of `workers` threads (`0` = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
