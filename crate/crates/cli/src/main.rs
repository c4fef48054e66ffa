use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dispwig::pipeline::{self, AnalysisOptions, ReportOptions, RunConfig, VmaxMode};
use dispwig::{par, Error};

#[derive(Parser)]
#[command(
    name = "dispwig",
    version,
    about = "Displaced-state photon counting: simulate, analyze, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic run directory from a config file.
    Simulate(Common),
    /// Calibrate, recover phases and reconstruct the Wigner function.
    Analyze(Common),
    /// Write plot-data files and print a summary of an analyzed run.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory. Overrides `output.run_dir` from the config.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Worker threads for the data-parallel stages.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Calibrate once and reuse the gain for every setting.
    #[arg(long)]
    global_gamma: bool,
    /// How the maximum-visibility series is chosen.
    #[arg(long, value_enum)]
    vmax_mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Closest,
    Dedicated,
}

impl From<Mode> for VmaxMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Closest => VmaxMode::Closest,
            Mode::Dedicated => VmaxMode::Dedicated,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::Domain { .. } => 2,
        Error::PartialData { .. } | Error::MissingArtifact(_) => 3,
        Error::CalibrationDominated { .. } => 4,
        _ => 1,
    }
}

fn load_config(args: &Common) -> dispwig::Result<Option<RunConfig>> {
    args.config.as_deref().map(RunConfig::load).transpose()
}

fn run_dir(args: &Common, config: Option<&RunConfig>) -> dispwig::Result<PathBuf> {
    args.run
        .clone()
        .or_else(|| config.and_then(|c| c.output.run_dir.clone()))
        .ok_or_else(|| {
            Error::InvalidConfig("no run directory: pass --run or set output.run_dir".into())
        })
}

fn analysis_options(args: &Common, config: Option<&RunConfig>) -> dispwig::Result<AnalysisOptions> {
    let mut opts = config.map(|c| c.analysis.clone()).unwrap_or_default();
    if args.global_gamma {
        opts.global_gamma = true;
    }
    if let Some(m) = args.vmax_mode {
        opts.vmax_mode = m.into();
    }
    opts.validate()?;
    Ok(opts)
}

fn simulate(args: &Common) -> dispwig::Result<()> {
    let Some(config) = load_config(args)? else {
        return Err(Error::InvalidConfig("simulate requires --config".into()));
    };
    let dir = run_dir(args, Some(&config))?;
    let files = pipeline::simulate(&config.experiment, &dir)?;
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

fn analyze(args: &Common) -> dispwig::Result<()> {
    let config = load_config(args)?;
    let dir = run_dir(args, config.as_ref())?;
    let opts = analysis_options(args, config.as_ref())?;
    let analysis = pipeline::analyze(&dir, &opts)?;
    let r = &analysis.report;
    for s in &r.skipped {
        log::warn!(
            "skipped setting i={} p={}: {}",
            s.intensity_index,
            s.phase_index,
            s.reason
        );
    }
    println!(
        "calibrated {}/{} settings, xi = {}, fitted |beta0| = {}, epsilon = {}",
        r.settings_calibrated, r.settings_total, r.overlap.xi, r.fitted_beta0, r.epsilon
    );
    Ok(())
}

fn report(args: &Common) -> dispwig::Result<()> {
    let config = load_config(args)?;
    let dir = run_dir(args, config.as_ref())?;
    let opts: ReportOptions = config.map(|c| c.report).unwrap_or_default();
    let out = pipeline::report(&dir, &opts)?;
    print!("{}", out.summary);
    Ok(())
}

fn dispatch(cli: &Cli) -> dispwig::Result<()> {
    let (args, f): (&Common, fn(&Common) -> dispwig::Result<()>) = match &cli.command {
        Command::Simulate(a) => (a, simulate),
        Command::Analyze(a) => (a, analyze),
        Command::Report(a) => (a, report),
    };
    par::with_workers(args.workers.map(|n| n as usize), || f(args))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
