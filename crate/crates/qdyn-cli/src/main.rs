//! `qdyn` — quantum-dynamics toolkit CLI.
//!
//! Subcommands: `evolve` (grid evolution), `spectrum` (eigensolve +
//! occupation traces), `optimize` (annealed population optimizer),
//! `bench` (experiment matrices), `wavepacket` (dispersion check).
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 numerical
//! failure, 4 budget exhausted (with a result written).

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CommandError, Outcome};
use config::{
    load_config, EvolveParams, OptimizeParams, PotentialSpec, SpectrumParams, WavepacketParams,
};

#[derive(Parser)]
#[command(
    name = "qdyn",
    version,
    about = "Quantum-dynamics toolkit",
    max_term_width = 100
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON config file for the chosen subcommand (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Random seed (optimize).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress warnings and progress notes.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a wave function in real or imaginary time.
    Evolve {
        /// real | imaginary
        #[arg(long)]
        mode: Option<String>,
        /// harmonic | double_well | free, or a path to an x,value CSV.
        #[arg(long)]
        potential: Option<String>,
        /// Kinetic coefficient.
        #[arg(long = "D")]
        d: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        n_points: Option<usize>,
        /// Keep every Nth intermediate state in the trajectory.
        #[arg(long)]
        sample_every: Option<usize>,
    },
    /// Eigen-decompose the Hamiltonian; optionally trace the softmax.
    Spectrum {
        #[arg(long)]
        potential: Option<String>,
        #[arg(long = "D")]
        d: Option<f64>,
        /// Number of levels to solve for.
        #[arg(long)]
        levels: Option<usize>,
        /// Also write one CSV per eigenstate.
        #[arg(long)]
        states: bool,
        /// TAU_MAX K: write the occupation trace over [0, TAU_MAX] for the
        /// lowest K levels.
        #[arg(long, num_args = 2, value_names = ["TAU_MAX", "K"])]
        softmax_trace: Option<Vec<String>>,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Run the annealed population optimizer on a builtin objective.
    Optimize {
        /// sphere | rastrigin | ackley | rosenbrock | styblinski_tang
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        /// diffusion | drift | dmc
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        n_walkers: Option<usize>,
        #[arg(long)]
        dtau: Option<f64>,
        #[arg(long)]
        max_evaluations: Option<usize>,
    },
    /// Run an experiment plan and aggregate success statistics.
    Bench {
        /// Plan JSON (defaults to the bundled plan).
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Compare numeric and analytic dispersion of a free Gaussian packet.
    Wavepacket {
        #[arg(long)]
        sigma0: Option<f64>,
        #[arg(long = "D")]
        d: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn main() {
    let cli = Cli::parse();

    let level = if cli.global.quiet {
        log::LevelFilter::Off
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::from_env(env_logger::Env::default())
        .filter_level(level)
        .format_timestamp(None)
        .init();

    if let Ok(threads) = std::env::var("QDYN_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: QDYN_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(2);
            }
        }
    }

    match dispatch(&cli) {
        Ok(Outcome::Success) => {}
        Ok(Outcome::BudgetExhaustedWithResult) => {
            if !cli.global.quiet {
                eprintln!("budget exhausted; best-so-far result written");
            }
            std::process::exit(4);
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.exit_code);
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome, CommandError> {
    let out_dir = cli.global.out.clone();
    if out_dir.is_file() {
        return Err(CommandError {
            message: format!("--out {out_dir:?} is an existing file, need a directory"),
            exit_code: 2,
        });
    }
    match &cli.command {
        Command::Evolve {
            mode,
            potential,
            d,
            dt,
            steps,
            x_min,
            x_max,
            n_points,
            sample_every,
        } => {
            let mut p: EvolveParams = base_params(cli)?;
            if let Some(m) = mode {
                p.mode = parse_time_mode(m)?;
            }
            if let Some(v) = potential {
                p.potential = PotentialSpec::from_flag(v);
            }
            override_some(&mut p.d, *d);
            override_some(&mut p.dt, *dt);
            override_some(&mut p.steps, *steps);
            override_some(&mut p.x_min, *x_min);
            override_some(&mut p.x_max, *x_max);
            override_some(&mut p.n_points, *n_points);
            override_some(&mut p.sample_every, *sample_every);
            commands::run_evolve(&p, &out_dir)
        }
        Command::Spectrum {
            potential,
            d,
            levels,
            states,
            softmax_trace,
            x_min,
            x_max,
            n_points,
        } => {
            let mut p: SpectrumParams = base_params(cli)?;
            if let Some(v) = potential {
                p.potential = PotentialSpec::from_flag(v);
            }
            override_some(&mut p.d, *d);
            override_some(&mut p.levels, *levels);
            if *states {
                p.states = true;
            }
            if let Some(args) = softmax_trace {
                let tau_max: f64 = args[0]
                    .parse()
                    .map_err(|_| bad_flag("softmax-trace TAU_MAX", &args[0]))?;
                let k: usize = args[1]
                    .parse()
                    .map_err(|_| bad_flag("softmax-trace K", &args[1]))?;
                p.softmax_trace = Some((tau_max, k));
            }
            override_some(&mut p.x_min, *x_min);
            override_some(&mut p.x_max, *x_max);
            override_some(&mut p.n_points, *n_points);
            commands::run_spectrum(&p, &out_dir)
        }
        Command::Optimize {
            objective,
            dim,
            mode,
            n_walkers,
            dtau,
            max_evaluations,
        } => {
            let mut p: OptimizeParams = base_params(cli)?;
            if let Some(o) = objective {
                p.objective = o.clone();
            }
            override_some(&mut p.dim, *dim);
            if let Some(m) = mode {
                p.mode = parse_sampler_mode(m)?;
            }
            override_some(&mut p.n_walkers, *n_walkers);
            override_some(&mut p.dtau, *dtau);
            override_some(&mut p.max_evaluations, *max_evaluations);
            if let Some(seed) = cli.global.seed {
                p.seed = seed;
            }
            commands::run_optimize(&p, &out_dir)
        }
        Command::Bench { plan } => commands::run_bench(plan.as_ref(), &out_dir),
        Command::Wavepacket {
            sigma0,
            d,
            t_max,
            dt,
        } => {
            let mut p: WavepacketParams = base_params(cli)?;
            override_some(&mut p.sigma0, *sigma0);
            override_some(&mut p.d, *d);
            override_some(&mut p.t_max, *t_max);
            override_some(&mut p.dt, *dt);
            commands::run_wavepacket(&p, &out_dir)
        }
    }
}

fn base_params<T: serde::de::DeserializeOwned + Default>(cli: &Cli) -> Result<T, CommandError> {
    match &cli.global.config {
        Some(path) => load_config(path).map_err(|message| CommandError {
            message,
            exit_code: 2,
        }),
        None => Ok(T::default()),
    }
}

fn override_some<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_time_mode(s: &str) -> Result<qdyn::TimeMode, CommandError> {
    match s {
        "real" => Ok(qdyn::TimeMode::Real),
        "imaginary" => Ok(qdyn::TimeMode::Imaginary),
        _ => Err(bad_flag("mode", s)),
    }
}

fn parse_sampler_mode(s: &str) -> Result<qdyn::SamplerMode, CommandError> {
    match s {
        "diffusion" => Ok(qdyn::SamplerMode::Diffusion),
        "drift" => Ok(qdyn::SamplerMode::Drift),
        "dmc" => Ok(qdyn::SamplerMode::Dmc),
        _ => Err(bad_flag("mode", s)),
    }
}

fn bad_flag(flag: &str, value: &str) -> CommandError {
    CommandError {
        message: format!("invalid value {value:?} for --{flag}"),
        exit_code: 2,
    }
}
