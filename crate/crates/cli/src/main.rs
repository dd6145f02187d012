mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use quasirank::perturbation::DEFAULT_EPS_GRID;
use quasirank::spectral::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use quasirank::{Error, ErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Decompose,
    Rank,
    Compare,
    Perturb,
    Simulate,
    GenAlbum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureName {
    #[value(name = "pagerank")]
    Pagerank,
    #[value(name = "pagerank_escc")]
    PagerankEscc,
    #[value(name = "pi_hat")]
    PiHat,
    #[value(name = "pi_bar")]
    PiBar,
    #[value(name = "pi_tilde")]
    PiTilde,
    #[value(name = "pi_check")]
    PiCheck,
}

/// Quasi-stationarity centrality for reducible web graphs.
#[derive(Debug, Parser)]
#[command(name = "quasirank", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// Edge list (`source target` per line). For gen-album, an optional JSON spec.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 0.85)]
    damping: f64,

    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,

    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,

    #[arg(long, default_value_t = 7)]
    seed: u64,

    #[arg(long, value_enum, value_delimiter = ',')]
    measures: Option<Vec<MeasureName>>,

    #[arg(long, value_delimiter = ',', default_value = "0.5,0.85,0.95,0.99,0.999")]
    c_grid: Vec<f64>,

    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,

    /// Walk horizons for simulate.
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    horizon: Vec<usize>,

    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,

    #[arg(long, default_value_t = 20)]
    top_k: usize,

    /// Start node label for simulate; defaults to the first ESCC node.
    #[arg(long)]
    start: Option<String>,

    /// Multiplies every exit probability of the ESCC block before compare.
    #[arg(long, default_value_t = 1.0)]
    exit_scale: f64,
}

/// Validated run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub measures: Vec<MeasureName>,
    pub c_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub horizons: Vec<usize>,
    pub samples: u64,
    pub top_k: usize,
    pub start: Option<String>,
    pub exit_scale: f64,
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

fn open_unit(name: &str, x: f64) -> quasirank::Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} {x} outside (0, 1)")))
    }
}

impl RunConfig {
    fn from_cli(cli: Cli) -> quasirank::Result<(Command, Self)> {
        open_unit("damping", cli.damping)?;
        open_unit("tol", cli.tol)?;
        if cli.max_iter == 0 {
            return Err(invalid("max-iter must be at least 1".into()));
        }
        for &c in &cli.c_grid {
            open_unit("c-grid value", c)?;
        }
        let eps_grid = cli.eps_grid.unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
        for &e in &eps_grid {
            open_unit("eps-grid value", e)?;
        }
        if cli.horizon.is_empty() || cli.horizon.contains(&0) {
            return Err(invalid("horizons must be at least 1".into()));
        }
        if cli.samples == 0 {
            return Err(invalid("samples must be at least 1".into()));
        }
        if cli.top_k == 0 {
            return Err(invalid("top-k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&cli.exit_scale) {
            return Err(invalid(format!("exit-scale {} outside [0, 1]", cli.exit_scale)));
        }
        if cli.input.is_none() && cli.command != Command::GenAlbum {
            return Err(invalid("--input is required".into()));
        }
        let measures = cli.measures.unwrap_or_else(|| {
            vec![
                MeasureName::Pagerank,
                MeasureName::PagerankEscc,
                MeasureName::PiHat,
                MeasureName::PiBar,
                MeasureName::PiTilde,
                MeasureName::PiCheck,
            ]
        });
        Ok((
            cli.command,
            RunConfig {
                input: cli.input,
                out: cli.out,
                damping: cli.damping,
                tol: cli.tol,
                max_iter: cli.max_iter,
                seed: cli.seed,
                measures,
                c_grid: cli.c_grid,
                eps_grid,
                horizons: cli.horizon,
                samples: cli.samples,
                top_k: cli.top_k,
                start: cli.start,
                exit_scale: cli.exit_scale,
            },
        ))
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Parse => 2,
        ErrorKind::Validation => 3,
        ErrorKind::Convergence => 4,
        ErrorKind::Statistical => 5,
    }
}

fn run(cli: Cli) -> quasirank::Result<()> {
    let (command, cfg) = RunConfig::from_cli(cli)?;
    let batch = match command {
        Command::Decompose => commands::decompose(&cfg)?,
        Command::Rank => commands::rank(&cfg)?,
        Command::Compare => commands::compare(&cfg)?,
        Command::Perturb => commands::perturb(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::GenAlbum => commands::gen_album(&cfg)?,
    };
    for path in batch.commit(&cfg.out)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
