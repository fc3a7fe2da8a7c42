//! Model parameters and the deterministic two-speed-state model.
//!
//! With `N = n1 + n2` conserved the rate equations reduce to
//! `dn1/dt = n1 (a - b n1)` where `a = c2 alpha N - c1`, `b = c2 alpha` and
//! `alpha = 1 / (N_max - N)`. Vehicle counts are real numbers throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven structural constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Slow -> fast transition rate.
    pub c1: f64,
    /// Fast -> slow transition rate.
    pub c2: f64,
    /// Slow speed.
    pub v1: f64,
    /// Fast speed.
    pub v2: f64,
    /// Noise intensity.
    pub sigma: f64,
    /// Maximum occupancy.
    pub n_max: f64,
    /// Road length `L`.
    pub road_length: f64,
}

impl Default for ModelParams {
    /// The reference operating point used throughout the experiments.
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 3.0,
            v1: 10.0,
            v2: 60.0,
            sigma: 1.0,
            n_max: 200.0,
            road_length: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("v1", self.v1),
            ("v2", self.v2),
            ("sigma", self.sigma),
            ("n_max", self.n_max),
            ("road_length", self.road_length),
        ];
        for (field, v) in all {
            if !v.is_finite() {
                return Err(Error::param(field, format!("must be finite, got {v}")));
            }
        }
        if self.c1 <= 0.0 {
            return Err(Error::param("c1", format!("must be > 0, got {}", self.c1)));
        }
        if self.c2 <= 0.0 {
            return Err(Error::param("c2", format!("must be > 0, got {}", self.c2)));
        }
        if self.v1 < 0.0 {
            return Err(Error::param("v1", format!("must be >= 0, got {}", self.v1)));
        }
        if self.v1 >= self.v2 {
            return Err(Error::param(
                "v2",
                format!("must exceed v1 = {}, got {}", self.v1, self.v2),
            ));
        }
        if self.sigma < 0.0 {
            return Err(Error::param(
                "sigma",
                format!("must be >= 0, got {}", self.sigma),
            ));
        }
        if self.n_max <= 0.0 {
            return Err(Error::param(
                "n_max",
                format!("must be > 0, got {}", self.n_max),
            ));
        }
        if self.road_length <= 0.0 {
            return Err(Error::param(
                "road_length",
                format!("must be > 0, got {}", self.road_length),
            ));
        }
        Ok(())
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Deterministic free-flow bound `N_c = c1 N_max / (c1 + c2)`.
    pub fn critical_n(&self) -> f64 {
        critical_n(self)
    }
}

/// How the initial occupation `n1(0)` of each path is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitPolicy {
    /// Every path starts from the same value in `(0, N)`.
    FixedValue { value: f64 },
    /// Draw from `U(lo, hi)`, truncated to the admissible interval `(0, N)`.
    /// A missing `hi` means `N`.
    UniformDraw {
        lo: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
}

impl Default for InitPolicy {
    fn default() -> Self {
        InitPolicy::UniformDraw { lo: 1.0, hi: None }
    }
}

/// A model instance at fixed total vehicle count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub n_total: f64,
    pub n_cut: Option<f64>,
    pub init: InitPolicy,
}

impl Scenario {
    pub fn new(params: ModelParams, n_total: f64) -> Result<Self> {
        let s = Self {
            params,
            n_total,
            n_cut: None,
            init: InitPolicy::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_n_cut(mut self, n_cut: f64) -> Result<Self> {
        self.n_cut = Some(n_cut);
        self.validate()?;
        Ok(self)
    }

    pub fn with_init(mut self, init: InitPolicy) -> Result<Self> {
        self.init = init;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.n_total;
        if !n.is_finite() || n <= 0.0 || n >= self.params.n_max {
            return Err(Error::param(
                "n_total",
                format!(
                    "must satisfy 0 < N < N_max = {}, got N = {n}",
                    self.params.n_max
                ),
            ));
        }
        if let Some(cut) = self.n_cut {
            if !cut.is_finite() || cut < n || cut >= self.params.n_max {
                return Err(Error::param(
                    "n_cut",
                    format!(
                        "must satisfy N = {n} <= N_cut < N_max = {}, got {cut}",
                        self.params.n_max
                    ),
                ));
            }
        }
        match self.init {
            InitPolicy::FixedValue { value } => {
                if !(value > 0.0 && value < n) {
                    return Err(Error::param(
                        "init.value",
                        format!("must lie in (0, {n}), got {value}"),
                    ));
                }
            }
            InitPolicy::UniformDraw { lo, hi } => {
                if lo.is_nan() || lo < 0.0 || hi.is_some_and(|h| h.is_nan() || lo >= h) {
                    return Err(Error::param(
                        "init",
                        format!("uniform draw needs 0 <= lo < hi, got lo = {lo}, hi = {hi:?}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `alpha = 1 / (N_max - N)`.
    pub fn alpha(&self) -> f64 {
        1.0 / (self.params.n_max - self.n_total)
    }

    /// Linear growth rate `a = c2 alpha N - c1` of the reduced ODE at `n1 = 0`.
    pub fn growth_rate(&self) -> f64 {
        self.params.c2 * self.alpha() * self.n_total - self.params.c1
    }

    /// Deterministic congestion attractor `N - (c1/c2)(N_max - N)`.
    ///
    /// Negative below `N_c`; callers that need a physical value use
    /// [`deterministic_steady_state`].
    pub fn n1_attractor(&self) -> f64 {
        let p = &self.params;
        self.n_total - p.c1 / p.c2 * (p.n_max - self.n_total)
    }

    /// Interval `[lo, hi)` from which a uniform initial value is drawn.
    ///
    /// The requested bounds are intersected with `(0, N)`; if nothing is
    /// left (e.g. `U(1, N)` with `N <= 1`) the interval falls back to
    /// `[N/2, N)`.
    pub fn uniform_init_bounds(&self) -> Option<(f64, f64)> {
        match self.init {
            InitPolicy::UniformDraw { lo, hi } => {
                let n = self.n_total;
                let hi = hi.unwrap_or(n).min(n);
                let lo = if lo > 0.0 { lo } else { f64::MIN_POSITIVE };
                if lo < hi {
                    Some((lo, hi))
                } else {
                    Some((0.5 * n, n))
                }
            }
            InitPolicy::FixedValue { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteadyKind {
    FreeFlow,
    Congestion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicSteadyState {
    pub n1_star: f64,
    pub kind: SteadyKind,
}

pub fn critical_n(params: &ModelParams) -> f64 {
    params.c1 * params.n_max / (params.c1 + params.c2)
}

/// Attractor of the reduced ODE. `N = N_c` counts as free flow.
pub fn deterministic_steady_state(scenario: &Scenario) -> Result<DeterministicSteadyState> {
    scenario.validate()?;
    if scenario.n_total <= critical_n(&scenario.params) {
        Ok(DeterministicSteadyState {
            n1_star: 0.0,
            kind: SteadyKind::FreeFlow,
        })
    } else {
        Ok(DeterministicSteadyState {
            n1_star: scenario.n1_attractor(),
            kind: SteadyKind::Congestion,
        })
    }
}

/// Closed-form solution of `dn1/dt = n1 (a - b n1)` from `n1(0) = n1_0`.
pub fn deterministic_trajectory(scenario: &Scenario, n1_0: f64, t: f64) -> Result<f64> {
    scenario.validate()?;
    if !(n1_0 > 0.0 && n1_0 < scenario.n_total) {
        return Err(Error::OutOfDomain {
            what: "n1_0",
            value: n1_0,
            domain: format!("(0, {})", scenario.n_total),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::OutOfDomain {
            what: "t",
            value: t,
            domain: "[0, inf)".into(),
        });
    }
    Ok(logistic(scenario.growth_rate(), scenario.params.c2 * scenario.alpha(), n1_0, t))
}

/// Logistic solution, arranged so neither branch overflows for large `|a t|`.
fn logistic(a: f64, b: f64, x0: f64, t: f64) -> f64 {
    if a == 0.0 {
        x0 / (1.0 + b * x0 * t)
    } else if a > 0.0 {
        let decay = (-a * t).exp();
        a / (b + (a / x0 - b) * decay)
    } else {
        let decay = (a * t).exp();
        a * x0 * decay / (a - b * x0 + b * x0 * decay)
    }
}

/// Right-hand side of the reduced ODE.
pub fn deterministic_rate(scenario: &Scenario, n1: f64) -> f64 {
    n1 * (scenario.growth_rate() - scenario.params.c2 * scenario.alpha() * n1)
}

/// Flow `q = (n1 v1 + (N - n1) v2) / L`.
pub fn flow(params: &ModelParams, n1: f64, n_total: f64) -> Result<f64> {
    if !(n1 >= 0.0 && n1 <= n_total) {
        return Err(Error::OutOfDomain {
            what: "n1",
            value: n1,
            domain: format!("[0, {n_total}]"),
        });
    }
    Ok(flow_unchecked(params, n1, n_total))
}

#[inline]
pub(crate) fn flow_unchecked(params: &ModelParams, n1: f64, n_total: f64) -> f64 {
    (n1 * params.v1 + (n_total - n1) * params.v2) / params.road_length
}

/// One point of a flow/concentration curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: f64,
    pub q: f64,
}

/// Piecewise-linear deterministic fundamental diagram on the given grid of `N`.
pub fn deterministic_diagram(params: &ModelParams, n_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    params.validate()?;
    let n_c = critical_n(params);
    let k_c = n_c / params.road_length;
    let q_c = k_c * params.v2;
    let slope = params.v1 - params.c1 / params.c2 * (params.v2 - params.v1);
    n_grid
        .iter()
        .map(|&n| {
            if !(n > 0.0 && n < params.n_max) {
                return Err(Error::OutOfDomain {
                    what: "N",
                    value: n,
                    domain: format!("(0, {})", params.n_max),
                });
            }
            let k = n / params.road_length;
            let q = if n <= n_c {
                k * params.v2
            } else {
                q_c + slope * (k - k_c)
            };
            Ok(CurvePoint { k, q })
        })
        .collect()
}

/// Integer grid `1, 2, ..., floor(upper)`, clipped below `N_max`.
pub fn integer_grid(upper: f64, n_max: f64) -> Vec<f64> {
    (1..)
        .map(|i| i as f64)
        .take_while(|&n| n <= upper && n < n_max)
        .collect()
}
