//! Simulated fundamental diagrams and parameter-grid scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moments::combo_config;
use super::sample_step;
use super::stats::{mean, variance};
use crate::error::{Error, Result};
use crate::model::{critical_n, deterministic_diagram, flow, InitPolicy, ModelParams, Scenario};
use crate::sde::{SimConfig, Stepper};

/// Fraction of the free-flow speed a sample must reach to count as free flow.
pub const FREE_FLOW_SPEED_FRACTION: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagramConfig {
    pub sims_per_n: usize,
    pub time_window: (f64, f64),
    /// Largest admissible `N`; `None` means the largest grid value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cut: Option<f64>,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        Self {
            sims_per_n: 20,
            time_window: (25.0, 27.0),
            n_cut: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSample {
    pub q: f64,
    pub sim_index: usize,
    pub sample_time: f64,
    pub is_free_flow: bool,
    /// Average speed `q L / N`.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramPoint {
    pub n: f64,
    pub k: f64,
    pub samples: Vec<FlowSample>,
    pub q_mean: f64,
    pub q_var: f64,
    pub q_det: f64,
    pub free_flow_fraction: f64,
    pub mean_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramScan {
    pub params: ModelParams,
    pub points: Vec<DiagramPoint>,
    pub n_cut: f64,
    pub n_s: f64,
    pub warnings: Vec<String>,
}

impl DiagramScan {
    pub fn samples(&self) -> impl Iterator<Item = (&DiagramPoint, &FlowSample)> {
        self.points.iter().flat_map(|p| p.samples.iter().map(move |s| (p, s)))
    }
}

pub fn fundamental_diagram_scan(
    params: &ModelParams,
    n_grid: &[f64],
    scan: &DiagramConfig,
    config: &SimConfig,
) -> Result<DiagramScan> {
    params.validate()?;
    if n_grid.is_empty() || scan.sims_per_n == 0 {
        return Err(Error::param("diagram", "need a non-empty grid and sims_per_n >= 1"));
    }
    let grid_max = n_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_cut = scan.n_cut.unwrap_or(grid_max);
    if !(n_cut > 0.0 && n_cut < params.n_max) {
        return Err(Error::OutOfDomain {
            what: "n_cut",
            value: n_cut,
            domain: format!("(0, {})", params.n_max),
        });
    }
    if let Some(&bad) = n_grid.iter().find(|&&n| !(n > 0.0 && n <= n_cut)) {
        return Err(Error::OutOfDomain {
            what: "N",
            value: bad,
            domain: format!("(0, {n_cut}]"),
        });
    }
    let det = deterministic_diagram(params, n_grid)?;
    let scenarios: Vec<Scenario> = n_grid
        .iter()
        .map(|&n| {
            Scenario::new(*params, n)?
                .with_n_cut(n_cut)?
                .with_init(InitPolicy::UniformDraw { lo: 1.0, hi: None })
        })
        .collect::<Result<_>>()?;
    for s in &scenarios {
        config.validate(s)?;
    }

    let sims = scan.sims_per_n;
    let raw: Vec<(f64, f64)> = (0..n_grid.len() * sims)
        .into_par_iter()
        .map(|task| {
            let (point, sim) = (task / sims, task % sims);
            let cfg = combo_config(config, point);
            let step = sample_step(&cfg, scan.time_window, sim as u64)?;
            let n1 = Stepper::for_member(&scenarios[point], &cfg, sim as u64)?
                .nth(step)
                .ok_or_else(|| Error::Runtime(format!("grid index {step} past the end")))?;
            Ok((flow(params, n1, n_grid[point])?, cfg.time(step)))
        })
        .collect::<Result<_>>()?;

    let points = n_grid
        .iter()
        .zip(&det)
        .enumerate()
        .map(|(i, (&n, curve))| {
            let k = curve.k;
            let samples: Vec<FlowSample> = raw[i * sims..(i + 1) * sims]
                .iter()
                .enumerate()
                .map(|(sim_index, &(q, sample_time))| FlowSample {
                    q,
                    sim_index,
                    sample_time,
                    is_free_flow: q >= FREE_FLOW_SPEED_FRACTION * k * params.v2,
                    speed: q / k,
                })
                .collect();
            let qs: Vec<f64> = samples.iter().map(|s| s.q).collect();
            let speeds: Vec<f64> = samples.iter().map(|s| s.speed).collect();
            DiagramPoint {
                n,
                k,
                q_mean: mean(&qs),
                q_var: variance(&qs),
                q_det: curve.q,
                free_flow_fraction: samples.iter().filter(|s| s.is_free_flow).count() as f64 / sims as f64,
                mean_speed: mean(&speeds),
                samples,
            }
        })
        .collect();

    let n_s = stochastic_bound(params);
    let mut warnings = Vec::new();
    if n_cut >= n_s {
        warnings.push(format!(
            "N_cut = {n_cut} is not below N_s = {n_s:.4}; noise-driven decay towards free flow is not excluded on the congested branch"
        ));
    }
    Ok(DiagramScan {
        params: *params,
        points,
        n_cut,
        n_s,
        warnings,
    })
}

/// `N_s = c2 N_max / (sigma^2 + c2)`.
fn stochastic_bound(p: &ModelParams) -> f64 {
    p.c2 * p.n_max / (p.sigma * p.sigma + p.c2)
}

/// Flow drop between the best free-flow sample and the congested samples
/// around it: `max q(free flow) - mean q(congested, |N - N*| <= half_width)`.
pub fn capacity_drop(scan: &DiagramScan, half_width: f64) -> Option<f64> {
    let (best_point, best) = scan
        .samples()
        .filter(|(_, s)| s.is_free_flow)
        .max_by(|a, b| a.1.q.total_cmp(&b.1.q))?;
    let congested: Vec<f64> = scan
        .samples()
        .filter(|(p, s)| !s.is_free_flow && (p.n - best_point.n).abs() <= half_width)
        .map(|(_, s)| s.q)
        .collect();
    (!congested.is_empty()).then(|| best.q - mean(&congested))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridScanConfig {
    /// Deterministic free-flow bound held fixed across cells.
    pub n_c: f64,
    pub c1_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    /// Neighbourhood half-width in vehicles for the capacity-drop metric.
    pub drop_half_width: f64,
}

impl Default for GridScanConfig {
    fn default() -> Self {
        Self {
            n_c: 50.0,
            c1_values: vec![0.5, 1.0, 2.0, 4.0],
            sigma_values: vec![0.0, 0.5, 1.0, 1.5],
            drop_half_width: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub c1: f64,
    pub c2: f64,
    pub sigma: f64,
    pub capacity_drop: Option<f64>,
    /// `sigma^2 <= c2^2 / c1`.
    pub sig_cond1: bool,
    /// `N_cut < N_s`.
    pub sig_cond2: bool,
    pub scan: DiagramScan,
}

/// `c2` that places the deterministic free-flow bound at `n_c`.
pub fn c2_for_critical(c1: f64, n_c: f64, n_max: f64) -> f64 {
    c1 * (n_max - n_c) / n_c
}

/// One diagram scan per `(c1, sigma)` cell, rows ordered by `c1` then `sigma`.
pub fn parameter_grid_scan(
    base: &ModelParams,
    grid: &GridScanConfig,
    n_grid: &[f64],
    scan: &DiagramConfig,
    config: &SimConfig,
) -> Result<Vec<GridCell>> {
    if !(grid.n_c > 0.0 && grid.n_c < base.n_max) {
        return Err(Error::OutOfDomain {
            what: "n_c",
            value: grid.n_c,
            domain: format!("(0, {})", base.n_max),
        });
    }
    let mut cells = Vec::with_capacity(grid.c1_values.len() * grid.sigma_values.len());
    for &c1 in &grid.c1_values {
        for &sigma in &grid.sigma_values {
            let c2 = c2_for_critical(c1, grid.n_c, base.n_max);
            let params = ModelParams { c1, c2, sigma, ..*base };
            let scan = fundamental_diagram_scan(&params, n_grid, scan, config)?;
            debug_assert!((critical_n(&params) - grid.n_c).abs() < 1e-9 * grid.n_c);
            cells.push(GridCell {
                c1,
                c2,
                sigma,
                capacity_drop: capacity_drop(&scan, grid.drop_half_width),
                sig_cond1: sigma * sigma <= c2 * c2 / c1,
                sig_cond2: scan.n_cut < scan.n_s,
                scan,
            });
        }
    }
    Ok(cells)
}
