use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use wavetank::driver::{run, RunOptions};
use wavetank::scenario::{Mode, Scenario};
use wavetank::Error;

/// Potential-flow towing tank with fully nonlinear free-surface conditions.
#[derive(Parser, Debug)]
#[command(name = "wavetank", version)]
struct Cli {
    /// Scenario file; defaults apply when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_parser = ["steady", "unsteady", "ramped"])]
    mode: Option<String>,
    /// Adaptive refinement cycles on the free surface.
    #[arg(long)]
    cycles: Option<usize>,
    /// Initial time step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// End time of time-accurate runs, s.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    /// Worker threads for the assemblies.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the BEM matrices of the initial geometry.
    #[arg(long = "dump-matrices")]
    dump_matrices: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Invalid(_) => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    wavetank::init_threads(cli.threads);
    let mut sc = match &cli.scenario {
        Some(p) => match Scenario::load(p) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
        },
        None => Scenario::default(),
    };
    let opts = RunOptions {
        mode: cli.mode.as_deref().map(|m| m.parse::<Mode>().expect("validated by clap")),
        cycles: cli.cycles,
        dt: cli.dt,
        t_end: cli.t_end,
        output_dir: cli.output_dir.clone(),
        dump_matrices: cli.dump_matrices,
    };
    opts.apply(&mut sc);
    if let Err(e) = sc.check() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(&sc, opts.dump_matrices) {
        Ok(s) => {
            if let Some(f) = s.forces.last() {
                log::info!("final forces: R = {:.6e} N, L = {:.6e} N, L* = {:.6e}", f.r, f.l, f.l_star);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e.error))
        }
    }
}
