//! `amfmcmc`: batch runner for adaptive multi-fidelity MCMC.

use std::path::PathBuf;
use std::process::ExitCode;

use amf_core::io::{execute, read_file, DiagConfig, FigureConfig, IoError, Mode, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amfmcmc", version, about = "Adaptive multi-fidelity MCMC batch runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write its CSV tables and manifest.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration. Optional for `diag` (with --traces) and `figure` (with --figure).
    #[arg(long)]
    config: Option<PathBuf>,
    /// exact-mcmc, surrogate-mcmc, amf, agp, fit-gp, diag or figure; overrides the file.
    #[arg(long)]
    mode: Option<String>,
    /// Root seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the file.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "AMF_THREADS")]
    threads: Option<usize>,
    /// Trace CSV for `diag`.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Figure name for `figure`: fig1, fig6, fig9 or example2-bimodal.
    #[arg(long)]
    figure: Option<String>,
}

fn resolve(args: &RunArgs) -> Result<RunConfig, IoError> {
    let mode: Option<Mode> = args.mode.as_deref().map(str::parse).transpose()?;
    let mut cfg = match (&args.config, mode) {
        (Some(path), _) => {
            let text = read_file(path)?;
            let mut cfg = RunConfig::parse_unvalidated(&text)?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            cfg
        }
        (None, Some(m)) => RunConfig::new(m),
        (None, None) => return Err(IoError::Config("give --config or --mode".into())),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(t) = &args.traces {
        cfg.diag = Some(DiagConfig { traces: t.clone() });
    }
    if let Some(f) = &args.figure {
        cfg.figure = Some(FigureConfig { name: f.clone() });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(e: &IoError) -> ExitCode {
    let kind = match e {
        IoError::Config(_) => "config",
        IoError::Parse(_) => "parse",
        IoError::Input(_) => "input",
        IoError::Version { .. } => "version",
        IoError::Numerical { .. } => "numerical",
        IoError::File { .. } => "file",
    };
    let snapshot = match e {
        IoError::Numerical { snapshot: Some(p), .. } => Some(p.display().to_string()),
        _ => None,
    };
    let msg = serde_json::json!({
        "error": kind,
        "message": e.to_string(),
        "exit_code": e.exit_code(),
        "snapshot": snapshot,
    });
    eprintln!("{msg}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(&IoError::Config(format!("--threads {n}: {e}")));
        }
    }
    let result = resolve(&args).and_then(|cfg| execute(&cfg));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", outcome.output_dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
