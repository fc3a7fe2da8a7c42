//! Level-crossing counts of simulated paths.

use rayon::prelude::*;
use serde::Serialize;

use super::stats::median;
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::sde::{SimConfig, Stepper};

/// Cumulative number of crossings of `level` at each grid point.
///
/// A crossing is a change in the sign of `x - level` relative to the last
/// nonzero sign seen. Passing through an exact hit counts once; touching the
/// level and returning to the same side counts zero.
pub fn count_crossings(values: &[f64], level: f64) -> Vec<u32> {
    let mut out = Vec::with_capacity(values.len());
    let mut last_sign = 0.0;
    let mut count = 0;
    for &x in values {
        let d = x - level;
        if d != 0.0 {
            let sign = d.signum();
            if last_sign != 0.0 && sign != last_sign {
                count += 1;
            }
            last_sign = sign;
        }
        out.push(count);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingStudy {
    pub level: f64,
    pub times: Vec<f64>,
    /// `counts[path][j]` is the cumulative count at `times[j]`.
    pub counts: Vec<Vec<u32>>,
    /// Ensemble median of the cumulative count at each time.
    pub median_counts: Vec<f64>,
}

impl CrossingStudy {
    /// Ensemble median at the reporting time closest to `t`.
    pub fn median_at(&self, t: f64) -> f64 {
        let j = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(j, _)| j)
            .expect("study has reporting times");
        self.median_counts[j]
    }

    pub fn totals(&self) -> Vec<u32> {
        self.counts.iter().map(|c| *c.last().expect("non-empty")).collect()
    }
}

/// Count crossings of `level` over `n_paths` ensemble members, reporting the
/// cumulative count every `report_every` grid steps and at the final step.
pub fn crossing_study(
    scenario: &Scenario,
    config: &SimConfig,
    level: f64,
    n_paths: usize,
    report_every: usize,
) -> Result<CrossingStudy> {
    if !(level > 0.0 && level < scenario.n_total) {
        return Err(Error::OutOfDomain {
            what: "level",
            value: level,
            domain: format!("(0, {})", scenario.n_total),
        });
    }
    if n_paths == 0 || report_every == 0 {
        return Err(Error::param("crossings", "n_paths and report_every must be >= 1"));
    }
    config.validate(scenario)?;
    let mut report: Vec<usize> = (0..=config.n_steps).step_by(report_every).collect();
    if *report.last().expect("step 0 is always reported") != config.n_steps {
        report.push(config.n_steps);
    }
    let counts: Vec<Vec<u32>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let values: Vec<f64> = Stepper::for_member(scenario, config, i)?.collect();
            let cumulative = count_crossings(&values, level);
            Ok(report.iter().map(|&k| cumulative[k]).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let median_counts = (0..report.len())
        .map(|j| median(&counts.iter().map(|c| f64::from(c[j])).collect::<Vec<_>>()))
        .collect();
    Ok(CrossingStudy {
        level,
        times: report.iter().map(|&k| config.time(k)).collect(),
        counts,
        median_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    #[test]
    fn constant_path_has_no_crossings() {
        assert_eq!(count_crossings(&[5.0; 10], 3.0), vec![0; 10]);
    }

    #[test]
    fn sawtooth_crosses_exactly_k_times() {
        for k in 1..8 {
            let v: Vec<f64> = (0..=k).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect();
            assert_eq!(*count_crossings(&v, 2.0).last().unwrap(), k as u32);
        }
    }

    #[test]
    fn exact_hits() {
        // through the level via an exact hit: once
        assert_eq!(count_crossings(&[1.0, 2.0, 3.0], 2.0), vec![0, 0, 1]);
        // touch and return: none
        assert_eq!(count_crossings(&[1.0, 2.0, 2.0, 1.0], 2.0), vec![0; 4]);
        // starting on the level
        assert_eq!(count_crossings(&[2.0, 3.0, 1.0], 2.0), vec![0, 0, 1]);
    }

    proptest! {
        #[test]
        fn parity_and_monotonicity(v in prop::collection::vec(prop_oneof![Just(2.0), 0.0..4.0f64], 1..200)) {
            let level = 2.0;
            let c = count_crossings(&v, level);
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
            let first = v.iter().find(|&&x| x != level);
            let last = v.iter().rev().find(|&&x| x != level);
            if let (Some(a), Some(b)) = (first, last) {
                let same_side = (a - level).signum() == (b - level).signum();
                prop_assert_eq!(c.last().unwrap().is_multiple_of(2), same_side);
            } else {
                prop_assert_eq!(*c.last().unwrap(), 0);
            }
        }
    }

    #[test]
    fn study_reports_on_the_requested_grid() {
        let s = Scenario::new(ModelParams::default(), 150.0).unwrap();
        let level = analysis::xi(&s).unwrap();
        let cfg = SimConfig::with_horizon(2.0).with_seed(9);
        let st = crossing_study(&s, &cfg, level, 4, 700).unwrap();
        assert_eq!(st.times, vec![0.0, 0.7, 1.4, 2.0]);
        assert_eq!(st.counts.len(), 4);
        assert!(st.counts.iter().all(|c| c[0] == 0 && c.windows(2).all(|w| w[0] <= w[1])));
        assert_eq!(st.median_at(1.9), st.median_counts[3]);
        assert!(crossing_study(&s, &cfg, 150.0, 4, 10).is_err());
    }
}
