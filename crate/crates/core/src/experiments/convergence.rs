//! Time to reach the free-flow state.
//!
//! A path has converged at `t_s` when `n1(t) < exp(-epsilon t)` first holds at
//! `t_s` and keeps holding at every grid point up to `3 t_s`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moments::combo_config;
use super::sampler::ParamSampler;
use super::stats::mean;
use crate::analysis;
use crate::error::Result;
use crate::rng::{derive_seed, path_stream, tags};
use crate::sde::{Path, SimConfig, Stepper};

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub t_s: Option<f64>,
    pub converged: bool,
    pub epsilon: f64,
    /// `3 t_s` ran past the end of the path; convergence was only checked to `t_end`.
    pub truncated: bool,
}

pub fn detect_convergence(path: &Path, epsilon: f64) -> ConvergenceResult {
    detect_in_series(&path.times, &path.values, epsilon)
}

pub fn detect_in_series(times: &[f64], values: &[f64], epsilon: f64) -> ConvergenceResult {
    let len = values.len();
    let not_found = ConvergenceResult {
        t_s: None,
        converged: false,
        epsilon,
        truncated: false,
    };
    if len == 0 {
        return not_found;
    }
    let t_end = times[len - 1];
    // first_fail[i]: first index >= i where the inequality fails (len if none)
    let mut first_fail = vec![len; len + 1];
    for i in (0..len).rev() {
        first_fail[i] = if values[i] < (-epsilon * times[i]).exp() {
            first_fail[i + 1]
        } else {
            i
        };
    }
    for i in 0..len {
        if first_fail[i] != len && first_fail[i] == i {
            continue;
        }
        let horizon = 3.0 * times[i];
        if horizon <= t_end {
            let last = times.partition_point(|&t| t <= horizon) - 1;
            if first_fail[i] > last {
                return ConvergenceResult {
                    t_s: Some(times[i]),
                    converged: true,
                    epsilon,
                    truncated: false,
                };
            }
        } else if first_fail[i] == len {
            return ConvergenceResult {
                t_s: Some(times[i]),
                converged: true,
                epsilon,
                truncated: true,
            };
        }
    }
    not_found
}

/// Which theorem's hypotheses the sampled combinations must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `R0s < 1` and `sigma^2 < c2/(alpha N)`.
    FreeFlow,
    /// `sigma^2 > max(c2/(alpha N), c2^2/(2 c1))`.
    NonphysicalDecay,
}

impl Region {
    /// Membership with a relative exclusion zone `margin` around each boundary.
    pub fn contains(self, s: &crate::model::Scenario, margin: f64) -> bool {
        let th = match analysis::thresholds(s) {
            Ok(t) => t,
            Err(_) => return false,
        };
        let s2 = s.params.sigma * s.params.sigma;
        match self {
            Region::FreeFlow => th.r0s < 1.0 - margin && s2 < (1.0 - margin) * th.sigma_sq_freeflow_cap,
            Region::NonphysicalDecay => {
                s2 > (1.0 + margin) * th.sigma_sq_freeflow_cap.max(th.sigma_sq_decay_cap)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub combo_id: usize,
    pub n: f64,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub r0: f64,
    pub r0s: f64,
    /// Mean `t_s` over converged runs.
    pub mean_t_s: Option<f64>,
    pub n_converged: usize,
    pub n_not_converged: usize,
    pub n_truncated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceMapConfig {
    pub n_combos: usize,
    pub sims_per_combo: usize,
    pub epsilon: f64,
    pub region: Region,
    /// Relative exclusion zone around the region boundary.
    pub margin: f64,
}

impl Default for ConvergenceMapConfig {
    fn default() -> Self {
        Self {
            n_combos: 50,
            sims_per_combo: 10,
            epsilon: DEFAULT_EPSILON,
            region: Region::FreeFlow,
            margin: 0.05,
        }
    }
}

/// Mean convergence time per random parameter combination in `region`.
pub fn convergence_time_map(
    sampler: &ParamSampler,
    map: &ConvergenceMapConfig,
    config: &SimConfig,
) -> Result<Vec<ConvergenceRow>> {
    let mut rng = path_stream(derive_seed(config.master_seed, &[tags::COMBOS]), 0);
    let (combos, _) = sampler.draw_accepted(&mut rng, map.n_combos, 10_000 * map.n_combos.max(1), |s| {
        map.region.contains(s, map.margin)
    })?;
    for s in &combos {
        config.validate(s)?;
    }

    let sims = map.sims_per_combo;
    let results: Vec<Result<ConvergenceResult>> = (0..combos.len() * sims)
        .into_par_iter()
        .map(|task| {
            let (combo, sim) = (task / sims, task % sims);
            let cfg = combo_config(config, combo);
            let values: Vec<f64> = Stepper::for_member(&combos[combo], &cfg, sim as u64)?.collect();
            let times: Vec<f64> = (0..values.len()).map(|i| cfg.time(i)).collect();
            Ok(detect_in_series(&times, &values, map.epsilon))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(combos
        .iter()
        .enumerate()
        .map(|(combo_id, s)| {
            let runs = &results[combo_id * sims..(combo_id + 1) * sims];
            let t: Vec<f64> = runs.iter().filter_map(|r| r.t_s).collect();
            ConvergenceRow {
                combo_id,
                n: s.n_total,
                sigma: s.params.sigma,
                c1: s.params.c1,
                c2: s.params.c2,
                r0: analysis::r0(s),
                r0s: analysis::r0s(s),
                mean_t_s: (!t.is_empty()).then(|| mean(&t)),
                n_converged: t.len(),
                n_not_converged: sims - t.len(),
                n_truncated: runs.iter().filter(|r| r.truncated).count(),
            }
        })
        .collect())
}

/// Empirical CDF of the per-combination mean convergence times.
pub fn cumulative_distribution(rows: &[ConvergenceRow]) -> Vec<(f64, f64)> {
    let mut t: Vec<f64> = rows.iter().filter_map(|r| r.mean_t_s).collect();
    t.sort_by(f64::total_cmp);
    let n = t.len() as f64;
    t.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n)).collect()
}
