//! Simulated versus closed-form stationary moments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::ParamSampler;
use super::stats::{mean, variance, SummaryStats};
use super::{sample_step, window_indices};
use crate::analysis::{self, StationaryMoments};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, path_stream, tags};
use crate::sde::{SimConfig, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentStudyConfig {
    pub n_combos: usize,
    pub sims_per_combo: usize,
    pub time_window: (f64, f64),
    /// Combos with `R0s` below this are redrawn, keeping clear of `R0s = 1`.
    pub min_r0s: f64,
}

impl Default for MomentStudyConfig {
    fn default() -> Self {
        Self {
            n_combos: 50,
            sims_per_combo: 100,
            time_window: (29.0, 29.5),
            min_r0s: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRatioRow {
    pub combo_id: usize,
    pub n: f64,
    pub sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub r0s: f64,
    pub mu_theory: f64,
    pub mu_sim: f64,
    pub ratio_mean: f64,
    pub gamma_theory: f64,
    pub gamma_sim: f64,
    pub ratio_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRatioStudy {
    pub rows: Vec<MomentRatioRow>,
    pub ratio_mean_stats: SummaryStats,
    pub ratio_var_stats: SummaryStats,
    /// Draws rejected for `R0s < min_r0s` or invalid closed-form moments.
    pub rejected_draws: usize,
}

fn accept(study: &MomentStudyConfig, s: &crate::model::Scenario) -> bool {
    analysis::r0s(s) >= study.min_r0s && analysis::stationary_moments(s).is_ok()
}

pub fn moment_ratio_study(
    sampler: &ParamSampler,
    study: &MomentStudyConfig,
    config: &SimConfig,
) -> Result<MomentRatioStudy> {
    if study.n_combos == 0 || study.sims_per_combo < 2 {
        return Err(Error::param("moments", "need n_combos >= 1 and sims_per_combo >= 2"));
    }
    if !(study.min_r0s > 1.0) {
        return Err(Error::param("moments.min_r0s", format!("must be > 1, got {}", study.min_r0s)));
    }
    window_indices(config, study.time_window)?;
    let mut rng = path_stream(derive_seed(config.master_seed, &[tags::COMBOS]), 0);
    let (combos, rejected_draws) =
        sampler.draw_accepted(&mut rng, study.n_combos, 10_000 * study.n_combos, |s| accept(study, s))?;

    let sims = study.sims_per_combo;
    let samples: Vec<f64> = (0..combos.len() * sims)
        .into_par_iter()
        .map(|task| {
            let (combo, sim) = (task / sims, task % sims);
            let cfg = combo_config(config, combo);
            let step = sample_step(&cfg, study.time_window, sim as u64)?;
            Stepper::for_member(&combos[combo], &cfg, sim as u64)?
                .nth(step)
                .ok_or_else(|| Error::Runtime(format!("grid index {step} past the end")))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<MomentRatioRow> = combos
        .iter()
        .enumerate()
        .map(|(combo_id, s)| {
            let StationaryMoments { mu, gamma, .. } = analysis::stationary_moments(s)?;
            let xs = &samples[combo_id * sims..(combo_id + 1) * sims];
            let (mu_sim, gamma_sim) = (mean(xs), variance(xs));
            Ok(MomentRatioRow {
                combo_id,
                n: s.n_total,
                sigma: s.params.sigma,
                c1: s.params.c1,
                c2: s.params.c2,
                r0s: analysis::r0s(s),
                mu_theory: mu,
                mu_sim,
                ratio_mean: mu_sim / mu,
                gamma_theory: gamma,
                gamma_sim,
                ratio_var: gamma_sim / gamma,
            })
        })
        .collect::<Result<_>>()?;
    let stats = |f: fn(&MomentRatioRow) -> f64| {
        SummaryStats::of(&rows.iter().map(f).collect::<Vec<_>>()).expect("at least one combo")
    };
    Ok(MomentRatioStudy {
        ratio_mean_stats: stats(|r| r.ratio_mean),
        ratio_var_stats: stats(|r| r.ratio_var),
        rows,
        rejected_draws,
    })
}

/// Per-combination master seed, so combos never share dynamics streams.
pub(crate) fn combo_config(config: &SimConfig, combo: usize) -> SimConfig {
    SimConfig {
        master_seed: derive_seed(config.master_seed, &[tags::PATHS, combo as u64]),
        ..*config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_is_close_and_reproducible() {
        let study = MomentStudyConfig { n_combos: 4, sims_per_combo: 40, ..Default::default() };
        let cfg = SimConfig::default().with_seed(21);
        let a = moment_ratio_study(&ParamSampler::default(), &study, &cfg).unwrap();
        let b = moment_ratio_study(&ParamSampler::default(), &study, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 4);
        for r in &a.rows {
            assert!(r.r0s >= 1.5);
            assert!((r.ratio_mean - 1.0).abs() < 0.1, "{r:?}");
        }
    }

    #[test]
    fn near_deterministic_combo_matches_mean_exactly() {
        let sampler = ParamSampler { sigma_lo: 0.0, sigma_hi: 1e-6, ..Default::default() };
        let study = MomentStudyConfig { n_combos: 3, sims_per_combo: 5, ..Default::default() };
        let res = moment_ratio_study(&sampler, &study, &SimConfig::default()).unwrap();
        for r in &res.rows {
            assert!((r.ratio_mean - 1.0).abs() < 1e-3, "{r:?}");
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let cfg = SimConfig::default();
        let bad = MomentStudyConfig { min_r0s: 0.9, ..Default::default() };
        assert!(moment_ratio_study(&ParamSampler::default(), &bad, &cfg).is_err());
        let bad = MomentStudyConfig { time_window: (29.0, 31.0), ..Default::default() };
        assert!(moment_ratio_study(&ParamSampler::default(), &bad, &cfg).is_err());
    }
}
