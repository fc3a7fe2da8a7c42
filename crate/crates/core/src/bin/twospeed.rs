use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use twospeed::io::{execute, Command, Overrides, RunConfig};
use twospeed::sde::with_workers;
use twospeed::Error;

/// Simulate and analyse the stochastic two-speed traffic model.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    command: Command,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    n_total: Option<f64>,
    #[arg(long)]
    n_max: Option<f64>,
    #[arg(long)]
    n_cut: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Ensemble size of the selected command.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
    /// Worker threads (0 = one per core). Results do not depend on this.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Config {
                path: path.display().to_string(),
                message: source.to_string(),
            },
            e => e,
        })?,
        None => RunConfig::default(),
    };
    config.apply(&Overrides {
        command: Some(cli.command),
        seed: cli.seed,
        sigma: cli.sigma,
        c1: cli.c1,
        c2: cli.c2,
        n_total: cli.n_total,
        n_max: cli.n_max,
        n_cut: cli.n_cut,
        t_end: cli.t_end,
        steps: cli.steps,
        paths: cli.paths,
        out: cli.out,
        svg: cli.svg,
    });
    config.validate()?;
    if cli.print_config {
        println!("{}", config.to_json());
        return Ok(());
    }
    let manifest = with_workers(cli.workers, || execute(&config))??;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, config.output_dir.join(&f.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
