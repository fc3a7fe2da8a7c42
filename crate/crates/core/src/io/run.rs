//! Execute a validated [`RunConfig`] and write its result files.

use serde::Serialize;

use super::config::{Command, RunConfig};
use super::output::{self, fmt_f64, Manifest, OutputDir, Table};
use super::svg;
use crate::analysis::{self, RegimeReport};
use crate::error::Result;
use crate::experiments::ci::ci_table;
use crate::experiments::convergence::convergence_time_map;
use crate::experiments::crossings::crossing_study;
use crate::experiments::diagram::{fundamental_diagram_scan, parameter_grid_scan, GridCell};
use crate::experiments::moments::moment_ratio_study;
use crate::experiments::stats::SummaryStats;
use crate::sde::{simulate_ensemble, SimConfig};

pub fn execute(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let mut out = OutputDir::create(&config.output_dir)?;
    match config.command {
        Command::Simulate => simulate(config, &mut out)?,
        Command::Diagram => diagram(config, &mut out)?,
        Command::Scan => scan(config, &mut out)?,
        Command::Validate => validate(config, &mut out)?,
        Command::Moments => moments(config, &mut out)?,
        Command::Crossings => crossings(config, &mut out)?,
    }
    out.finish(config)
}

fn regime(config: &RunConfig, out: &mut OutputDir) -> Result<RegimeReport> {
    let report = analysis::classify_regime(&config.scenario()?)?;
    out.write_json("regime.json", &report)?;
    Ok(report)
}

fn simulate(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    regime(config, out)?;
    let paths = simulate_ensemble(&config.scenario()?, &config.sim, config.paths)?;
    out.write_table(&output::paths_table(&paths, config.path_stride))?;
    let mut finals = Table::new("final_values", &["path", "n1_0", "n1_final", "clamp_count"]);
    for p in &paths {
        finals.push(vec![
            p.index.to_string(),
            fmt_f64(p.values[0]),
            fmt_f64(p.final_value()),
            p.clamp_count.to_string(),
        ]);
    }
    out.write_table(&finals)
}

fn diagram(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let scan = fundamental_diagram_scan(&config.model, &config.diagram_grid(), &config.diagram_config(), &config.sim)?;
    out.write_table(&output::diagram_table(&scan))?;
    out.write_table(&output::diagram_summary_table(&scan))?;
    out.write_table(&output::speed_table(&scan))?;
    #[derive(Serialize)]
    struct Report<'a> {
        n_cut: f64,
        n_s: f64,
        warnings: &'a [String],
    }
    out.write_json(
        "diagram_report.json",
        &Report {
            n_cut: scan.n_cut,
            n_s: scan.n_s,
            warnings: &scan.warnings,
        },
    )?;
    if config.emit_svg {
        let title = format!("sigma = {}, c1 = {}, c2 = {}", config.model.sigma, config.model.c1, config.model.c2);
        out.write_text("diagram.svg", &svg::render_diagram(&scan, &title))?;
    }
    Ok(())
}

fn grid_points_table(cells: &[GridCell]) -> Table {
    let mut t = Table::new(
        "grid_points",
        &["c1", "sigma", "n", "k", "q_mean", "q_var", "q_det", "free_flow_fraction"],
    );
    for c in cells {
        for p in &c.scan.points {
            t.push(vec![
                fmt_f64(c.c1),
                fmt_f64(c.sigma),
                fmt_f64(p.n),
                fmt_f64(p.k),
                fmt_f64(p.q_mean),
                fmt_f64(p.q_var),
                fmt_f64(p.q_det),
                fmt_f64(p.free_flow_fraction),
            ]);
        }
    }
    t
}

fn scan(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let cells = parameter_grid_scan(
        &config.model,
        &config.grid,
        &config.diagram_grid(),
        &config.diagram_config(),
        &config.sim,
    )?;
    out.write_table(&output::grid_table(&cells))?;
    out.write_table(&grid_points_table(&cells))?;
    if config.emit_svg {
        for (i, c) in cells.iter().enumerate() {
            let title = format!("c1 = {}, c2 = {:.4}, sigma = {}", c.c1, c.c2, c.sigma);
            out.write_text(&format!("grid_{i:02}.svg"), &svg::render_diagram(&c.scan, &title))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MomentSummary {
    ratio_mean: SummaryStats,
    ratio_var: SummaryStats,
    rejected_draws: usize,
}

fn moments(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let study = moment_ratio_study(&config.sampler(), &config.moments, &config.sim)?;
    out.write_table(&output::moment_ratio_table(&study))?;
    out.write_json(
        "moment_summary.json",
        &MomentSummary {
            ratio_mean: study.ratio_mean_stats,
            ratio_var: study.ratio_var_stats,
            rejected_draws: study.rejected_draws,
        },
    )
}

/// Grid with the configured step reaching the latest interval window.
fn ci_horizon(config: &RunConfig) -> SimConfig {
    let dt = config.sim.dt();
    let hi = config.ci.windows.iter().map(|w| w.1).fold(0.0, f64::max);
    let n_steps = (hi / dt).ceil().max(1.0) as usize;
    SimConfig {
        t_end: n_steps as f64 * dt,
        n_steps,
        ..config.sim
    }
}

fn validate(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    regime(config, out)?;
    let scenario = config.scenario()?;
    let ci_sim = ci_horizon(config);
    let tables = config
        .ci
        .windows
        .iter()
        .map(|&w| ci_table(&scenario, &ci_sim, w, config.ci.sample_size, &config.ci.levels))
        .collect::<Result<Vec<_>>>()?;
    out.write_table(&output::ci_csv(&tables))?;
    let rows = convergence_time_map(&config.sampler(), &config.convergence, &config.sim)?;
    out.write_table(&output::convergence_table(&rows))?;
    moments(config, out)
}

fn crossings(config: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let scenario = config.scenario()?;
    let level = match config.crossings.level {
        Some(l) => l,
        None => analysis::xi(&scenario)?,
    };
    let study = crossing_study(&scenario, &config.sim, level, config.paths, config.crossings.report_every)?;
    out.write_table(&output::crossings_table(&study))?;
    #[derive(Serialize)]
    struct Report {
        level: f64,
        final_median: f64,
    }
    out.write_json(
        "crossings_report.json",
        &Report {
            level,
            final_median: *study.median_counts.last().expect("non-empty"),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(command: Command, dir: &std::path::Path) -> RunConfig {
        let mut c = RunConfig {
            command,
            output_dir: dir.to_path_buf(),
            paths: 3,
            n_grid: Some(vec![20.0, 60.0, 120.0]),
            emit_svg: true,
            ..Default::default()
        };
        c.sim = SimConfig::with_horizon(30.0).with_seed(1);
        c.diagram.sims_per_n = 2;
        c.grid.c1_values = vec![1.0];
        c.grid.sigma_values = vec![0.0, 1.0];
        c.moments.n_combos = 2;
        c.moments.sims_per_combo = 4;
        c.convergence.n_combos = 2;
        c.convergence.sims_per_combo = 2;
        c.ci.windows = vec![(1.0, 2.0)];
        c.ci.sample_size = 4;
        c
    }

    #[test]
    fn every_command_writes_its_files() {
        let expected: [(Command, &[&str]); 6] = [
            (Command::Simulate, &["regime.json", "paths.csv", "final_values.csv"]),
            (Command::Diagram, &["diagram.csv", "diagram_summary.csv", "speed.csv", "diagram_report.json", "diagram.svg"]),
            (Command::Scan, &["grid.csv", "grid_points.csv", "grid_00.svg", "grid_01.svg"]),
            (Command::Validate, &["regime.json", "ci.csv", "convergence.csv", "moment_ratios.csv", "moment_summary.json"]),
            (Command::Moments, &["moment_ratios.csv", "moment_summary.json"]),
            (Command::Crossings, &["crossings.csv", "crossings_report.json"]),
        ];
        for (command, files) in expected {
            let tmp = tempfile::tempdir().unwrap();
            let m = execute(&small(command, tmp.path())).unwrap();
            let names: Vec<&str> = m.files.iter().map(|f| f.name.as_str()).collect();
            assert_eq!(names, files, "{command:?}");
            assert!(tmp.path().join("manifest.json").exists());
        }
    }

    #[test]
    fn diagram_header_is_fixed() {
        let tmp = tempfile::tempdir().unwrap();
        execute(&small(Command::Diagram, tmp.path())).unwrap();
        let text = std::fs::read_to_string(tmp.path().join("diagram.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "k,q_sample,sim_index,sample_time,is_free_flow");
        assert_eq!(text.lines().count(), 1 + 3 * 2);
    }
}
