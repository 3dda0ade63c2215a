use std::path::PathBuf;
use std::process::ExitCode;

use cac_cli::config::DatasetSpec;
use cac_cli::{cmd_baseline, cmd_cluster, cmd_kernel, cmd_serve, CliError, GridSpec, OracleMode, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cac", version, about = "Cautious active clustering with localized Hermite kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the active clustering loop and write report, assignments and score curve.
    Cluster(Overrides),
    /// Dump the density on a grid (and optionally the kernel matrix).
    Kernel {
        #[command(flatten)]
        overrides: Overrides,
        /// One `lo:hi:count` range per coordinate, comma separated.
        #[arg(long)]
        grid: GridSpec,
        #[arg(long)]
        matrix: bool,
    },
    /// Hermite vs Gaussian-KDE support memberships at the same threshold.
    Baseline {
        #[command(flatten)]
        overrides: Overrides,
        /// KDE bandwidth; defaults to the kernel sigma.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Run the loop with labels supplied over HTTP.
    Serve {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        port: Option<u16>,
        /// Stop serving once the run has finished.
        #[arg(long)]
        exit_when_done: bool,
    },
}

#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Use a generator instead of the configured dataset.
    #[arg(long, conflicts_with = "data")]
    generator: Option<String>,
    #[arg(long, requires = "generator")]
    points: Option<usize>,
    #[arg(long, requires = "generator")]
    param: Option<f64>,
    /// Use a CSV file instead of the configured dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    n_start: Option<f64>,
    #[arg(long)]
    n_max: Option<f64>,
    /// Sets both n_start and n_max.
    #[arg(long, conflicts_with_all = ["n_start", "n_max"])]
    n: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    /// truth, replay:PATH or interactive[:PORT]
    #[arg(long)]
    oracle: Option<OracleMode>,
}

impl Overrides {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let dataset = match (self.generator, self.data) {
            (Some(name), _) => Some(DatasetSpec::Generator {
                name,
                points: self.points.unwrap_or(1000),
                param: self.param,
            }),
            (None, Some(path)) => Some(DatasetSpec::File {
                path,
                labels: Default::default(),
                pca_dim: None,
            }),
            (None, None) => None,
        };
        let mut cfg = match (&self.config, dataset) {
            (Some(path), d) => {
                let mut cfg = RunConfig::load(path)?;
                if let Some(d) = d {
                    cfg.dataset = d;
                }
                cfg
            }
            (None, Some(d)) => RunConfig::new(d),
            (None, None) => return Err(CliError::Config("give --config, --generator or --data".into())),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.output {
            cfg.output = v;
        }
        if let Some(n) = self.n {
            cfg.schedule.n_start = n;
            cfg.schedule.n_max = n;
        }
        if let Some(v) = self.n_start {
            cfg.schedule.n_start = v;
        }
        if let Some(v) = self.n_max {
            cfg.schedule.n_max = v;
        }
        if let Some(v) = self.theta {
            cfg.schedule.theta_init = v;
        }
        if let Some(v) = self.sigma {
            cfg.kernel.sigma = v;
        }
        if let Some(v) = self.budget {
            cfg.schedule.query_budget = Some(v);
        }
        if let Some(v) = self.oracle {
            cfg.oracle = v;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Cluster(o) => {
            let cfg = o.resolve()?;
            let report = cmd_cluster(&cfg)?;
            println!("{} queries; outputs in {}", report.query_count(), cfg.output.display());
        }
        Command::Kernel { overrides, grid, matrix } => {
            let path = cmd_kernel(&overrides.resolve()?, &grid, matrix)?;
            println!("wrote {}", path.display());
        }
        Command::Baseline { overrides, bandwidth } => {
            let s = cmd_baseline(&overrides.resolve()?, bandwidth)?;
            println!("hermite members {}, kde members {} of {}", s.hermite_members, s.kde_members, s.points);
        }
        Command::Serve {
            overrides,
            port,
            exit_when_done,
        } => {
            let mut cfg = overrides.resolve()?;
            if let Some(port) = port {
                cfg.oracle = OracleMode::Interactive { port };
            } else if !matches!(cfg.oracle, OracleMode::Interactive { .. }) {
                cfg.oracle = OracleMode::Interactive { port: 8080 };
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Protocol(e.to_string()))?;
            let report = rt.block_on(cmd_serve(&cfg, exit_when_done, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
            println!("{} queries; outputs in {}", report.query_count(), cfg.output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cac: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
