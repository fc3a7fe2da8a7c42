//! Numerical studies built on the SDE engine.
//!
//! Every study is a pure function of its inputs and the master seed held in
//! the [`SimConfig`]. Sub-streams are separated with [`crate::rng::derive_seed`]
//! and results are assembled by index, so the worker count never changes a
//! value.

pub mod ci;
pub mod convergence;
pub mod crossings;
pub mod diagram;
pub mod moments;
pub mod sampler;
pub mod stats;
pub mod sweep;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, path_stream, tags};
use crate::sde::SimConfig;

pub use ci::{ci_table, CiRow, CiTable, DEFAULT_LEVELS};
pub use convergence::{convergence_time_map, detect_convergence, ConvergenceResult, ConvergenceRow, Region};
pub use crossings::{count_crossings, crossing_study, CrossingStudy};
pub use diagram::{fundamental_diagram_scan, parameter_grid_scan, DiagramPoint, DiagramScan, GridCell};
pub use moments::{moment_ratio_study, MomentRatioRow, MomentRatioStudy};
pub use sampler::ParamSampler;
pub use stats::SummaryStats;

/// Grid indices whose times fall inside `[lo, hi]`.
pub fn window_indices(config: &SimConfig, (lo, hi): (f64, f64)) -> Result<(usize, usize)> {
    let dt = config.dt();
    if !(lo <= hi) || lo < 0.0 {
        return Err(Error::param("time_window", format!("invalid window [{lo}, {hi}]")));
    }
    let first = ((lo / dt) - 1e-9).ceil().max(0.0) as usize;
    let last = (((hi / dt) + 1e-9).floor() as usize).min(config.n_steps);
    if first > last || hi > config.t_end + 1e-9 * config.t_end {
        return Err(Error::param(
            "time_window",
            format!("[{lo}, {hi}] is not inside the grid [0, {}]", config.t_end),
        ));
    }
    Ok((first, last))
}

/// Uniform random grid index inside `window` for member `index`, drawn from
/// the sampling-time stream so the dynamics streams stay untouched.
pub fn sample_step(config: &SimConfig, window: (f64, f64), index: u64) -> Result<usize> {
    let (first, last) = window_indices(config, window)?;
    let mut rng = path_stream(derive_seed(config.master_seed, &[tags::SAMPLE_TIME]), index);
    Ok(rng.random_range(first..=last))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_indices_cover_the_window() {
        let cfg = SimConfig::default();
        assert_eq!(window_indices(&cfg, (29.0, 29.5)).unwrap(), (29_000, 29_500));
        assert_eq!(window_indices(&cfg, (25.0, 25.0)).unwrap(), (25_000, 25_000));
        assert!(window_indices(&cfg, (29.0, 31.0)).is_err());
        assert!(window_indices(&cfg, (5.0, 4.0)).is_err());
    }

    #[test]
    fn sample_steps_are_reproducible() {
        let cfg = SimConfig::default().with_seed(4);
        let a: Vec<_> = (0..20).map(|i| sample_step(&cfg, (25.0, 27.0), i).unwrap()).collect();
        let b: Vec<_> = (0..20).map(|i| sample_step(&cfg, (25.0, 27.0), i).unwrap()).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|&s| (25_000..=27_000).contains(&s)));
    }
}
