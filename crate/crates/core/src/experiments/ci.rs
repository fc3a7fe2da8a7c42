//! Student-t interval tables for `n1` sampled inside a time window.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::stats::{mean, quantile_sorted, sorted, variance};
use super::{sample_step, window_indices};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::sde::{SimConfig, Stepper};

pub const DEFAULT_LEVELS: [f64; 8] = [0.50, 0.75, 0.85, 0.90, 0.95, 0.99, 0.995, 0.999];
pub const DEFAULT_SAMPLE_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiRow {
    pub level: f64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub amplitude: f64,
}

impl CiRow {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiTable {
    pub levels: Vec<f64>,
    /// Intervals `mean +- t s / sqrt(n)`.
    pub rows: Vec<CiRow>,
    /// Same half-widths centred on the sample `p`-quantile instead of the mean.
    pub percentile_rows: Vec<CiRow>,
    pub sample_size: usize,
    pub time_window: (f64, f64),
    pub mean: f64,
    pub std_dev: f64,
    /// All samples identical; every interval has zero amplitude.
    pub degenerate: bool,
    pub samples: Vec<f64>,
}

/// Two-sided t quantile `t_{(1+p)/2, df}`.
pub fn t_quantile(level: f64, df: usize) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param("level", format!("must lie in (0, 1), got {level}")));
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Runtime(format!("t distribution: {e}")))?;
    Ok(dist.inverse_cdf(0.5 * (1.0 + level)))
}

/// Interval table for an arbitrary sample.
pub fn ci_from_samples(samples: Vec<f64>, levels: &[f64], time_window: (f64, f64)) -> Result<CiTable> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::param("sample_size", format!("must be >= 2, got {n}")));
    }
    let m = mean(&samples);
    let s = variance(&samples).sqrt();
    let degenerate = samples.iter().all(|&x| x == samples[0]);
    let sd = if degenerate { 0.0 } else { s };
    let se = sd / (n as f64).sqrt();
    let ordered = sorted(&samples);
    let mut rows = Vec::with_capacity(levels.len());
    let mut percentile_rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let half = t_quantile(level, n - 1)? * se;
        rows.push(row(level, m, half));
        percentile_rows.push(row(level, quantile_sorted(&ordered, level), half));
    }
    Ok(CiTable {
        levels: levels.to_vec(),
        rows,
        percentile_rows,
        sample_size: n,
        time_window,
        mean: m,
        std_dev: sd,
        degenerate,
        samples,
    })
}

fn row(level: f64, point: f64, half: f64) -> CiRow {
    CiRow {
        level,
        point,
        lower: point - half,
        upper: point + half,
        amplitude: 2.0 * half,
    }
}

/// Sample `n1` once per run at a uniform random grid time inside
/// `time_window`, then tabulate intervals at each level.
pub fn ci_table(
    scenario: &Scenario,
    config: &SimConfig,
    time_window: (f64, f64),
    sample_size: usize,
    levels: &[f64],
) -> Result<CiTable> {
    if sample_size < 2 {
        return Err(Error::param("sample_size", format!("must be >= 2, got {sample_size}")));
    }
    scenario.validate()?;
    config.validate(scenario)?;
    window_indices(config, time_window)?;
    let samples: Vec<f64> = (0..sample_size as u64)
        .into_par_iter()
        .map(|i| {
            let step = sample_step(config, time_window, i)?;
            let mut stepper = Stepper::for_member(scenario, config, i)?;
            stepper
                .nth(step)
                .ok_or_else(|| Error::Runtime(format!("grid index {step} past the end")))
        })
        .collect::<Result<Vec<_>>>()?;
    ci_from_samples(samples, levels, time_window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitPolicy, ModelParams};
    use crate::rng::path_stream;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn t_quantiles_match_tables() {
        // df = 99 reference values
        assert!((t_quantile(0.95, 99).unwrap() - 1.984217).abs() < 1e-5);
        assert!((t_quantile(0.50, 99).unwrap() - 0.676976).abs() < 1e-5);
        assert!((t_quantile(0.999, 99).unwrap() - 3.391529).abs() < 1e-5);
        // df = 1 is Cauchy: tan(pi (p/2))
        let c = (std::f64::consts::PI * 0.45).tan();
        assert!((t_quantile(0.90, 1).unwrap() - c).abs() < 1e-8);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let t = ci_from_samples(vec![3.0; 10], &DEFAULT_LEVELS, (0.0, 1.0)).unwrap();
        assert!(t.degenerate);
        for r in t.rows.iter().chain(&t.percentile_rows) {
            assert_eq!(r.amplitude, 0.0);
            assert_eq!(r.lower, 3.0);
            assert_eq!(r.upper, 3.0);
        }
    }

    #[test]
    fn rows_are_ordered_and_widen_with_level() {
        let t = ci_from_samples((1..=20).map(f64::from).collect(), &DEFAULT_LEVELS, (0.0, 1.0)).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].amplitude > w[0].amplitude);
        }
        for r in t.rows.iter().chain(&t.percentile_rows) {
            assert!(r.lower <= r.point && r.point <= r.upper);
            assert!((r.amplitude - (r.upper - r.lower)).abs() < 1e-12);
        }
        assert_eq!(t.rows[0].point, 10.5);
    }

    #[test]
    fn too_small_sample_is_rejected() {
        assert!(ci_from_samples(vec![1.0], &DEFAULT_LEVELS, (0.0, 1.0)).is_err());
        assert!(ci_from_samples(vec![1.0, 2.0], &[1.0], (0.0, 1.0)).is_err());
    }

    #[test]
    fn coverage_is_calibrated_on_normal_data() {
        let dist = Normal::new(5.0, 2.0).unwrap();
        let reps = 1000;
        let mut hits = vec![0usize; DEFAULT_LEVELS.len()];
        for r in 0..reps {
            let mut rng = path_stream(77, r);
            let xs: Vec<f64> = (0..30).map(|_| dist.sample(&mut rng)).collect();
            let t = ci_from_samples(xs, &DEFAULT_LEVELS, (0.0, 1.0)).unwrap();
            for (h, row) in hits.iter_mut().zip(&t.rows) {
                *h += usize::from(row.contains(5.0));
            }
        }
        for (&level, &h) in DEFAULT_LEVELS.iter().zip(&hits) {
            let coverage = h as f64 / reps as f64;
            assert!((coverage - level).abs() <= 0.05, "level {level}: coverage {coverage}");
        }
    }

    #[test]
    fn simulated_table_is_reproducible() {
        let s = Scenario::new(ModelParams::default().with_sigma(0.5), 40.0)
            .unwrap()
            .with_init(InitPolicy::UniformDraw { lo: 1.0, hi: None })
            .unwrap();
        let cfg = SimConfig::with_horizon(15.0).with_seed(3);
        let a = ci_table(&s, &cfg, (12.5, 14.5), 20, &DEFAULT_LEVELS).unwrap();
        let b = ci_table(&s, &cfg, (12.5, 14.5), 20, &DEFAULT_LEVELS).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|&x| x > 0.0 && x < 40.0));
        assert!(ci_table(&s, &cfg, (12.5, 16.0), 20, &DEFAULT_LEVELS).is_err());
    }
}
