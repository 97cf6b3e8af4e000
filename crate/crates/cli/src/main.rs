use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tm_cli::commands::partial_report;
use tm_cli::output::{write_json, write_text};
use tm_cli::{cmd_analyze, cmd_eigs, cmd_nondim, cmd_simulate, CliError, Config};

#[derive(Parser)]
#[command(name = "tm", version, about = "GTPase membrane model: Turing analysis and surface simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled experiment configuration (fig2, fig3-a2-double, ...).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides [output] dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mesh_level: Option<u32>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Steady state, condition table and Turing band as JSON.
    Analyze(Common),
    /// Time integration with VTK, CSV and JSON output.
    Simulate(Common),
    /// Dimensionless parameters from a [dimensional] section.
    Nondim(Common),
    /// Smallest Laplace–Beltrami eigenvalues of the configured mesh as CSV.
    Eigs {
        #[command(flatten)]
        common: Common,
        /// Number of eigenvalues.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Relative gap that separates clusters.
        #[arg(long, default_value_t = 0.05)]
        cluster_tol: f64,
    },
    /// Print the expanded configuration of a preset.
    Preset { name: String },
}

impl Common {
    fn resolve(&self) -> Result<Config, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => Config::load(path)?,
            (None, Some(name)) => Config::preset(name)?,
            (None, None) => Config::default(),
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(level) = self.mesh_level {
            cfg.mesh.level = level;
            cfg.mesh.path = None;
        }
        if let Some(dt) = self.dt {
            cfg.run.dt = dt;
        }
        if let Some(t_end) = self.t_end {
            cfg.run.t_end = t_end;
        }
        Ok(cfg)
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report types serialise"));
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze(common) => {
            let cfg = common.resolve()?;
            match cmd_analyze(&cfg) {
                Ok(report) => {
                    if common.out.is_some() {
                        write_json(&cfg.output.dir.join("analysis.json"), &report)?;
                    }
                    print_json(&report);
                    Ok(())
                }
                Err(e) => {
                    if let Some(partial) = partial_report(&cfg, &e) {
                        print_json(&partial);
                    }
                    Err(e)
                }
            }
        }
        Command::Simulate(common) => {
            let cfg = common.resolve()?;
            let outcome = cmd_simulate(&cfg, common.preset.as_deref(), &cfg.output.dir)?;
            print_json(&outcome.summary);
            Ok(())
        }
        Command::Nondim(common) => {
            let cfg = common.resolve()?;
            print_json(&cmd_nondim(&cfg)?);
            Ok(())
        }
        Command::Eigs { common, k, cluster_tol } => {
            let cfg = common.resolve()?;
            let table = cmd_eigs(&cfg, k, cluster_tol)?;
            if common.out.is_some() {
                write_text(&cfg.output.dir.join("eigenvalues.csv"), &table.values_csv())?;
                write_text(&cfg.output.dir.join("clusters.csv"), &table.clusters_csv())?;
            }
            print!("{}", table.clusters_csv());
            Ok(())
        }
        Command::Preset { name } => {
            print!("{}", Config::preset(&name)?.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("TM_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("TM_THREADS ignored: {e}");
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
