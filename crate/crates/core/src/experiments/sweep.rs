//! Sensitivity sweeps: rerun a study over a list of settings.

use rayon::prelude::*;
use serde::Serialize;

use super::diagram::{fundamental_diagram_scan, DiagramConfig, DiagramScan};
use crate::error::Result;
use crate::model::ModelParams;
use crate::sde::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry<V, R> {
    pub value: V,
    pub result: R,
}

/// Evaluate `study` at every value, in parallel, returning results in input order.
///
/// `study` receives the index of the value so it can derive its own seeds.
pub fn sweep<V, R, F>(values: &[V], study: F) -> Result<Vec<SweepEntry<V, R>>>
where
    V: Clone + Sync + Send,
    R: Send,
    F: Fn(usize, &V) -> Result<R> + Sync,
{
    values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            Ok(SweepEntry {
                value: v.clone(),
                result: study(i, v)?,
            })
        })
        .collect()
}

/// Diagram scans with the sampling window moved across `windows`; the
/// dynamics streams are shared so only the sampling time differs.
pub fn time_instant_sweep(
    params: &ModelParams,
    n_grid: &[f64],
    scan: &DiagramConfig,
    windows: &[(f64, f64)],
    config: &SimConfig,
) -> Result<Vec<SweepEntry<(f64, f64), DiagramScan>>> {
    sweep(windows, |_, &time_window| {
        fundamental_diagram_scan(params, n_grid, &DiagramConfig { time_window, ..*scan }, config)
    })
}

/// Diagram scans at each noise amplitude with every other parameter fixed.
pub fn sigma_sweep(
    params: &ModelParams,
    n_grid: &[f64],
    scan: &DiagramConfig,
    sigmas: &[f64],
    config: &SimConfig,
) -> Result<Vec<SweepEntry<f64, DiagramScan>>> {
    sweep(sigmas, |_, &sigma| {
        fundamental_diagram_scan(&params.with_sigma(sigma), n_grid, scan, config)
    })
}
