//! Run configuration: JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ci::{DEFAULT_LEVELS, DEFAULT_SAMPLE_SIZE};
use crate::experiments::convergence::ConvergenceMapConfig;
use crate::experiments::diagram::{DiagramConfig, GridScanConfig};
use crate::experiments::moments::MomentStudyConfig;
use crate::experiments::ParamSampler;
use crate::model::{integer_grid, InitPolicy, ModelParams, Scenario};
use crate::sde::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Path ensemble for one scenario plus its closed-form report.
    #[default]
    Simulate,
    /// Simulated fundamental diagram over a grid of `N`.
    Diagram,
    /// Diagram scans over a `(c1, sigma)` grid at fixed `N_c`.
    Scan,
    /// Regime report, interval tables, convergence map and moment ratios.
    Validate,
    /// Simulated versus closed-form stationary moments.
    Moments,
    /// Level-crossing counts at the crossing level.
    Crossings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_total: f64,
    /// `null` disables the cut; a missing key keeps the default of 150.
    pub n_cut: Option<f64>,
    pub init: InitPolicy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_total: 150.0,
            n_cut: Some(150.0),
            init: InitPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossingConfig {
    /// Level to count; absent means the scenario's crossing level `xi`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub report_every: usize,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self {
            level: None,
            report_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CiConfig {
    pub windows: Vec<(f64, f64)>,
    pub sample_size: usize,
    pub levels: Vec<f64>,
}

impl Default for CiConfig {
    fn default() -> Self {
        Self {
            windows: vec![(12.5, 14.5), (97.5, 99.5)],
            sample_size: DEFAULT_SAMPLE_SIZE,
            levels: DEFAULT_LEVELS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelParams,
    pub scenario: ScenarioConfig,
    pub sim: SimConfig,
    /// Ensemble size for `simulate` and `crossings`.
    pub paths: usize,
    /// Grid of `N` for diagram scans; absent means `1, 2, ..., N_cut`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<f64>>,
    pub diagram: DiagramConfig,
    pub grid: GridScanConfig,
    pub sampler: ParamSampler,
    pub moments: MomentStudyConfig,
    pub convergence: ConvergenceMapConfig,
    pub crossings: CrossingConfig,
    pub ci: CiConfig,
    /// Path samples written per path by `simulate` (every k-th grid point).
    pub path_stride: usize,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::default(),
            model: ModelParams::default(),
            scenario: ScenarioConfig::default(),
            sim: SimConfig::default(),
            paths: 20,
            n_grid: None,
            diagram: DiagramConfig::default(),
            grid: GridScanConfig::default(),
            sampler: ParamSampler::default(),
            moments: MomentStudyConfig::default(),
            convergence: ConvergenceMapConfig::default(),
            crossings: CrossingConfig::default(),
            ci: CiConfig::default(),
            path_stride: 100,
            output_dir: PathBuf::from("out"),
            emit_svg: false,
        }
    }
}

/// Values given on the command line; each one replaces the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub n_total: Option<f64>,
    pub n_max: Option<f64>,
    pub n_cut: Option<f64>,
    pub t_end: Option<f64>,
    pub steps: Option<usize>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: bool,
}

impl RunConfig {
    /// Parse a JSON document. An empty document yields the defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(c) = o.command {
            self.command = c;
        }
        if let Some(seed) = o.seed {
            self.sim.master_seed = seed;
        }
        if let Some(v) = o.sigma {
            self.model.sigma = v;
        }
        if let Some(v) = o.c1 {
            self.model.c1 = v;
        }
        if let Some(v) = o.c2 {
            self.model.c2 = v;
        }
        if let Some(v) = o.n_total {
            self.scenario.n_total = v;
        }
        if let Some(v) = o.n_max {
            self.model.n_max = v;
        }
        if let Some(v) = o.n_cut {
            match o.command.unwrap_or(self.command) {
                Command::Diagram | Command::Scan => self.diagram.n_cut = Some(v),
                _ => self.scenario.n_cut = Some(v),
            }
        }
        if let Some(v) = o.t_end {
            // keep the step size unless the step count is also given
            if o.steps.is_none() && v.is_finite() && v > 0.0 {
                self.sim.n_steps = (v / self.sim.dt()).round().max(1.0) as usize;
            }
            self.sim.t_end = v;
        }
        if let Some(v) = o.steps {
            self.sim.n_steps = v;
        }
        if let Some(n) = o.paths {
            match o.command.unwrap_or(self.command) {
                Command::Simulate | Command::Crossings => self.paths = n,
                Command::Diagram | Command::Scan => self.diagram.sims_per_n = n,
                Command::Moments => self.moments.sims_per_combo = n,
                Command::Validate => {
                    self.ci.sample_size = n;
                    self.moments.sims_per_combo = n;
                }
            }
        }
        if let Some(dir) = &o.out {
            self.output_dir = dir.clone();
        }
        if o.svg {
            self.emit_svg = true;
        }
    }

    /// The configured single scenario, validated.
    pub fn scenario(&self) -> Result<Scenario> {
        let s = Scenario {
            params: self.model,
            n_total: self.scenario.n_total,
            n_cut: self.scenario.n_cut,
            init: self.scenario.init,
        };
        s.validate()?;
        Ok(s)
    }

    /// Sampler whose fixed constants follow `model`.
    pub fn sampler(&self) -> ParamSampler {
        ParamSampler {
            base: self.model,
            ..self.sampler
        }
    }

    pub fn diagram_grid(&self) -> Vec<f64> {
        match &self.n_grid {
            Some(g) => g.clone(),
            None => {
                let upper = self.diagram.n_cut.or(self.scenario.n_cut).unwrap_or(self.scenario.n_total);
                integer_grid(upper, self.model.n_max)
            }
        }
    }

    /// Diagram settings with the cut taken from the scenario when unset.
    pub fn diagram_config(&self) -> DiagramConfig {
        DiagramConfig {
            n_cut: self.diagram.n_cut.or(self.scenario.n_cut),
            ..self.diagram
        }
    }

    /// Check every invariant the selected command depends on.
    pub fn validate(&self) -> Result<()> {
        let scenario = self.scenario()?;
        self.sim.validate(&scenario)?;
        if self.paths == 0 {
            return Err(Error::param("paths", "must be >= 1"));
        }
        if self.path_stride == 0 {
            return Err(Error::param("path_stride", "must be >= 1"));
        }
        match self.command {
            Command::Simulate => {}
            Command::Crossings => {
                if let Some(level) = self.crossings.level {
                    if !(level > 0.0 && level < scenario.n_total) {
                        return Err(Error::param(
                            "crossings.level",
                            format!("must lie in (0, N = {}), got {level}", scenario.n_total),
                        ));
                    }
                }
                if self.crossings.report_every == 0 {
                    return Err(Error::param("crossings.report_every", "must be >= 1"));
                }
            }
            Command::Diagram | Command::Scan => {
                let grid = self.diagram_grid();
                if grid.is_empty() {
                    return Err(Error::param("n_grid", "must not be empty"));
                }
                if self.diagram.sims_per_n == 0 {
                    return Err(Error::param("diagram.sims_per_n", "must be >= 1"));
                }
                let cut = self.diagram_config().n_cut.unwrap_or(f64::INFINITY).min(self.model.n_max);
                if let Some(&n) = grid.iter().find(|&&n| !(n > 0.0 && n <= cut && n < self.model.n_max)) {
                    return Err(Error::param(
                        "n_grid",
                        format!("values must satisfy 0 < N <= N_cut and N < N_max, got {n}"),
                    ));
                }
                if self.command == Command::Scan
                    && (self.grid.c1_values.is_empty() || self.grid.sigma_values.is_empty())
                {
                    return Err(Error::param("grid", "c1_values and sigma_values must not be empty"));
                }
            }
            Command::Moments | Command::Validate => {
                self.sampler().validate()?;
                if self.moments.sims_per_combo < 2 {
                    return Err(Error::param("moments.sims_per_combo", "must be >= 2"));
                }
                if self.command == Command::Validate && self.ci.sample_size < 2 {
                    return Err(Error::param("ci.sample_size", "must be >= 2"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_reference_defaults() {
        let c = RunConfig::from_json_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), c);
        let m = c.model;
        assert_eq!((m.c1, m.c2, m.v1, m.v2, m.sigma, m.n_max, m.road_length), (1.0, 3.0, 10.0, 60.0, 1.0, 200.0, 1.0));
        assert_eq!(c.scenario.n_cut, Some(150.0));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = RunConfig::from_json_str(r#"{"model": {"c3": 1.0}}"#).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "model.c3");
                assert!(message.contains("c3"), "{message}");
            }
            e => panic!("{e}"),
        }
        let err = RunConfig::from_json_str(r#"{"sim": {"t_end": "long"}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "sim.t_end"), "{err}");
        assert!(RunConfig::from_json_str("{").unwrap_err().is_config_error());
    }

    #[test]
    fn flags_override_file_values() {
        let mut c = RunConfig::from_json_str(r#"{"model": {"sigma": 0.3}, "sim": {"master_seed": 4}}"#).unwrap();
        c.apply(&Overrides { sigma: Some(0.0), seed: Some(9), ..Default::default() });
        assert_eq!(c.model.sigma, 0.0);
        assert_eq!(c.sim.master_seed, 9);
        c.validate().unwrap();
        c.apply(&Overrides { t_end: Some(100.0), ..Default::default() });
        assert_eq!((c.sim.t_end, c.sim.n_steps), (100.0, 100_000));
        c.apply(&Overrides { t_end: Some(10.0), steps: Some(500), ..Default::default() });
        assert_eq!((c.sim.t_end, c.sim.n_steps), (10.0, 500));
    }

    #[test]
    fn total_above_capacity_names_the_invariant() {
        let mut c = RunConfig::default();
        c.apply(&Overrides { n_total: Some(250.0), n_max: Some(200.0), ..Default::default() });
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("N < N_max"), "{msg}");
    }

    #[test]
    fn paths_flag_targets_the_command() {
        let mut c = RunConfig { command: Command::Diagram, ..Default::default() };
        c.apply(&Overrides { paths: Some(7), ..Default::default() });
        assert_eq!(c.diagram.sims_per_n, 7);
        assert_eq!(c.paths, 20);
    }

    #[test]
    fn default_grid_runs_to_the_cut() {
        let g = RunConfig::default().diagram_grid();
        assert_eq!(g.len(), 150);
        assert_eq!((g[0], g[149]), (1.0, 150.0));
    }

    #[test]
    fn bad_grid_is_rejected() {
        let c = RunConfig {
            command: Command::Diagram,
            n_grid: Some(vec![10.0, 160.0]),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            0.1..5.0f64,
            0.1..5.0f64,
            0.0..2.0f64,
            1.0..199.0f64,
            any::<u64>(),
            prop::option::of(prop::collection::vec(1.0..150.0f64, 1..5)),
            prop_oneof![Just(Command::Simulate), Just(Command::Diagram), Just(Command::Validate)],
            any::<bool>(),
            prop::option::of(0.0..1.0f64),
        )
            .prop_map(|(c1, c2, sigma, n, seed, grid, command, svg, hi)| {
                let mut c = RunConfig {
                    command,
                    ..Default::default()
                };
                c.model.c1 = c1;
                c.model.c2 = c2;
                c.model.sigma = sigma;
                c.scenario.n_total = n;
                c.scenario.n_cut = None;
                c.scenario.init = match hi {
                    Some(h) => InitPolicy::UniformDraw { lo: 0.0, hi: Some(h * n + 1.0) },
                    None => InitPolicy::FixedValue { value: n / 3.0 },
                };
                c.sim.master_seed = seed;
                c.n_grid = grid;
                c.emit_svg = svg;
                c
            })
    }

    proptest! {
        #[test]
        fn json_round_trip(c in arb_config()) {
            let back = RunConfig::from_json_str(&c.to_json()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
