use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isorot::analysis::{
    estimate_abundances, predict_interference_times, resolve_isotopologue_peaks, signal_revival_period,
};
use isorot::config::{parse_config, RunConfig};
use isorot::control::TwoPulseController;
use isorot::ensemble::{mixture_fwm_signal, time_grid};
use isorot::output::{
    read_trace, write_analysis, write_interference, write_reports, write_trace, AnalysisReport,
};
use isorot::{Error, TwoPulseSetup};

#[derive(Parser)]
#[command(name = "isorot", version, about = "Rotational alignment of isotopic mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; overrides `output` in the config. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fixed J truncation; disables automatic basis growth.
    #[arg(long, global = true)]
    jmax: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write the mixture signal trace.
    Simulate,
    /// Tabulate predicted interference times of the first two species.
    Interfere,
    /// Two-pulse metrics over a delay grid, or at `delay`.
    Scan,
    /// Best second-pulse delay within the bracket.
    Optimize,
    /// Revival period, peaks and abundances of a trace file.
    Analyze,
}

enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    fn code(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.code(),
            Failure::Usage(_) => "usage",
        }
    }

    fn exit_status(&self) -> u8 {
        match self {
            Failure::Core(Error::Numerical(_) | Error::JmaxTooSmall { .. }) => 3,
            Failure::Core(Error::Unresolved { .. } | Error::NoCombFound(_) | Error::NoOptimum(_)) => 4,
            _ => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Usage(m) => m.clone(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if cli.jmax.is_some() {
        cfg.jmax = cli.jmax;
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    for line in cfg.to_text().lines() {
        log::info!("config: {line}");
    }
    Ok(cfg)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn controller(cfg: &RunConfig) -> Result<TwoPulseController, Failure> {
    let c = &cfg.control;
    let setup = TwoPulseSetup {
        temperature: cfg.temperature,
        p1: c.p1,
        p2: c.p2,
        horizon: c.horizon,
        dt: cfg.dt,
        jmax_override: cfg.jmax,
    };
    Ok(TwoPulseController::new(&cfg.specs(), c.target, setup)?)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let echo = cfg.to_text();
    let mut out = sink(cfg.output.as_deref())?;
    match cli.command {
        Command::Simulate => {
            let grid = time_grid(cfg.t_start, cfg.t_end, cfg.dt)?;
            let trace = mixture_fwm_signal(
                &cfg.components(),
                &cfg.pulses,
                cfg.temperature,
                &grid,
                cfg.decay_tau,
                cfg.jmax,
            )?;
            write_trace(&mut out, &trace, &echo)?;
        }
        Command::Interfere => {
            if cfg.mixture.len() < 2 {
                return Err(Failure::Usage("interfere needs two species".into()));
            }
            let (a, b) = (&cfg.mixture[0].spec, &cfg.mixture[1].spec);
            let events = predict_interference_times(a, b, cfg.interfere.horizon, cfg.interfere.tol)?;
            write_interference(&mut out, (&a.name, &b.name), &events, &echo)?;
        }
        Command::Scan => {
            let delays: Vec<f64> = match (cfg.control.scan, cfg.control.delay) {
                (Some((start, end, step)), _) => time_grid(start, end, step)?,
                (None, Some(d)) => vec![d],
                (None, None) => {
                    return Err(Failure::Usage(
                        "scan needs `delay` or scan_start/scan_end/scan_step in [control]".into(),
                    ))
                }
            };
            let reports = controller(&cfg)?.scan(&delays)?;
            write_reports(&mut out, &reports, &echo)?;
        }
        Command::Optimize => {
            let bracket = cfg.control.bracket.ok_or_else(|| {
                Failure::Usage("optimize needs bracket_lo and bracket_hi in [control]".into())
            })?;
            let best = controller(&cfg)?.optimize(bracket, cfg.control.objective)?;
            log::info!("best delay {:.4} ps", best.delay);
            write_reports(&mut out, &[best], &echo)?;
        }
        Command::Analyze => {
            let input = cfg
                .analyze
                .input
                .as_ref()
                .ok_or_else(|| Failure::Usage("analyze needs `input` in [analyze]".into()))?;
            let text = std::fs::read_to_string(input)?;
            let trace = read_trace(&text)?;
            let mut report = AnalysisReport {
                period: Some(signal_revival_period(&trace)?),
                ..Default::default()
            };
            if cfg.mixture.len() >= 2 {
                let specs = cfg.specs();
                let peaks = resolve_isotopologue_peaks(&trace.times, &trace.signal, &specs, cfg.analyze.order)?;
                let amplitudes: Vec<f64> = peaks.iter().map(|p| p.amplitude).collect();
                report.abundances = Some(estimate_abundances(&amplitudes)?);
                report.order = Some(cfg.analyze.order);
                report.peaks = peaks;
            }
            write_analysis(&mut out, &report, &echo)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[usage]: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = f.message().replace('\n', " ");
            eprintln!("error[{}]: {msg}", f.code());
            ExitCode::from(f.exit_status())
        }
    }
}
