use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrlab_cli::run::worst_failure;
use lrlab_cli::{exit, parse_config, run_bounds, run_commutator, run_evolve, run_reproduce, ExperimentConfig, Figure, RunReport};

#[derive(Parser)]
#[command(name = "lrlab", version, about = "Lieb-Robinson bounds against exact spin-chain dynamics")]
struct Cli {
    /// Experiment config (TOML). `reproduce` falls back to the built-in preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel curves and time grids.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Recorded in the report; nothing is random yet.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured bounds and their arrival times.
    Bounds,
    /// Switch the tip on and track <S^z_j>(t) at the observed sites.
    Evolve,
    /// Exact commutator norm between `bounds.from` and `bounds.to`, next to the bounds.
    Commutator,
    /// Re-run one of the figure presets.
    Reproduce {
        figure: Figure,
    },
    /// Check a config and print the values it resolves to.
    ValidateConfig,
}

fn load(path: Option<&PathBuf>, fallback: Option<&str>) -> Result<ExperimentConfig, i32> {
    let text = match (path, fallback) {
        (Some(p), _) => match fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return Err(exit::CONFIG);
            }
        },
        (None, Some(preset)) => preset.to_string(),
        (None, None) => {
            eprintln!("error: --config is required for this command");
            return Err(exit::CONFIG);
        }
    };
    parse_config(&text).map_err(|e| {
        match path {
            Some(p) => eprintln!("error: {}: {e}", p.display()),
            None => eprintln!("error: {e}"),
        }
        exit::CONFIG
    })
}

fn finish(mut report: RunReport, cli: &Cli, out: &std::path::Path, name: &str) -> i32 {
    report.seed = cli.seed;
    report.threads = cli.threads;
    print!("{}", report.summary());
    let path = out.join(format!("{name}.json"));
    if let Err(e) = report.write(&path) {
        eprintln!("error: {}: {e}", path.display());
        return exit::OTHER;
    }
    println!("report: {}", path.display());
    worst_failure(&report).map_or(exit::OK, |f| f.exit_code())
}

fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return exit::OTHER;
        }
    }
    let fallback = match &cli.command {
        Command::Reproduce { figure } => Some(figure.preset_text()),
        _ => None,
    };
    let cfg = match load(cli.config.as_ref(), fallback) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match &cli.command {
        Command::Bounds => finish(run_bounds(&cfg, &out), cli, &out, "bounds"),
        Command::Evolve => finish(run_evolve(&cfg, &out), cli, &out, "evolve"),
        Command::Commutator => finish(run_commutator(&cfg, &out), cli, &out, "commutator"),
        Command::Reproduce { figure } => {
            let report = run_reproduce(*figure, &cfg, &out);
            finish(report, cli, &out, figure.name())
        }
        Command::ValidateConfig => {
            print!("{}", lrlab_cli::render_config(&cfg));
            for d in &cfg.defaults_applied {
                println!("# default applied: {d}");
            }
            exit::OK
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    ExitCode::from(run(&cli) as u8)
}
