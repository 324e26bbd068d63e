//! Implementation of the five subcommands. Every command validates its
//! full parameter set, computes into memory, and only then touches the
//! filesystem, so a validation failure never leaves partial outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qdyn::bench::{run_plan, ExperimentPlan};
use qdyn::evolve::{
    evolve_imaginary, evolve_real, free_packet_width, rayleigh_quotient, EvolutionConfig,
};
use qdyn::export;
use qdyn::grid::Grid;
use qdyn::sampler::{optimize, AnnealingSchedule, Objective, OptimizerConfig};
use qdyn::spectral::eigensolve;
use qdyn::{Error, TimeMode};

use crate::config::{EvolveParams, OptimizeParams, SpectrumParams, WavepacketParams};

/// Everything a command wants to persist: `(relative file name, bytes)`.
type Outputs = Vec<(String, Vec<u8>)>;

pub enum Outcome {
    Success,
    BudgetExhaustedWithResult,
}

pub struct CommandError {
    pub message: String,
    pub exit_code: i32,
}

impl CommandError {
    fn validation(message: impl Into<String>) -> Self {
        CommandError {
            message: message.into(),
            exit_code: 2,
        }
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        let exit_code = match e {
            Error::InstabilityDetected { .. }
            | Error::ConvergenceFailure { .. }
            | Error::PopulationExtinction => 3,
            Error::BudgetExhausted { .. } => 4,
            _ => 2,
        };
        CommandError {
            message: e.to_string(),
            exit_code,
        }
    }
}

pub fn run_evolve(p: &EvolveParams, out_dir: &Path) -> Result<Outcome, CommandError> {
    let grid = Grid::new(p.x_min, p.x_max, p.n_points)?;
    let pot = p.potential.build(&grid)?;
    let psi0 = p.initial.build(&grid);
    let cfg = EvolutionConfig {
        d: p.d,
        dt: p.dt,
        n_steps: p.steps,
        mode: p.mode,
        renormalize_each_step: p.renormalize.unwrap_or(p.mode == TimeMode::Imaginary),
        sample_every: p.sample_every,
    };
    let traj = match p.mode {
        TimeMode::Real => evolve_real(&psi0, &pot, &cfg)?,
        TimeMode::Imaginary => evolve_imaginary(&psi0, &pot, &cfg)?,
    };
    let fin = traj.final_state();

    #[derive(Serialize)]
    struct Summary {
        final_norm: f64,
        final_rayleigh_quotient: f64,
        final_time: f64,
        steps: usize,
        max_boundary_amplitude: f64,
    }
    let summary = Summary {
        final_norm: fin.norm(),
        final_rayleigh_quotient: rayleigh_quotient(fin, &pot, p.d)?,
        final_time: fin.time(),
        steps: p.steps,
        max_boundary_amplitude: traj.max_boundary_amplitude,
    };

    let mut csv = Vec::new();
    export::write_trajectory_csv(&traj, &mut csv).map_err(io_error)?;
    let mut json = Vec::new();
    serde_json::to_writer_pretty(&mut json, &summary).map_err(|e| CommandError {
        message: e.to_string(),
        exit_code: 3,
    })?;
    json.push(b'\n');

    persist(
        out_dir,
        vec![
            ("trajectory.csv".into(), csv),
            ("summary.json".into(), json),
        ],
    )?;
    Ok(Outcome::Success)
}

pub fn run_spectrum(p: &SpectrumParams, out_dir: &Path) -> Result<Outcome, CommandError> {
    let grid = Grid::new(p.x_min, p.x_max, p.n_points)?;
    let pot = p.potential.build(&grid)?;
    if let Some((tau_max, k)) = p.softmax_trace {
        if !tau_max.is_finite() || tau_max < 0.0 {
            return Err(CommandError::validation("softmax trace needs tau_max >= 0"));
        }
        if k == 0 || k > p.levels {
            return Err(CommandError::validation(format!(
                "softmax trace over {k} levels, but {} were requested",
                p.levels
            )));
        }
    }
    let spec = eigensolve(&pot, p.d, p.levels)?;

    let mut outputs: Outputs = Vec::new();
    let mut csv = Vec::new();
    export::write_spectrum_csv(&spec, &mut csv).map_err(io_error)?;
    outputs.push(("spectrum.csv".into(), csv));

    if p.states {
        for n in 0..spec.len() {
            let mut buf = Vec::new();
            export::write_state_csv(&spec, n, &mut buf).map_err(io_error)?;
            outputs.push((format!("state_{n:03}.csv"), buf));
        }
    }
    if let Some((tau_max, k)) = p.softmax_trace {
        let mut buf = Vec::new();
        export::write_softmax_trace_csv(&spec.energies()[..k], tau_max, p.trace_rows, &mut buf)
            .map_err(io_error)?;
        outputs.push(("softmax_trace.csv".into(), buf));
    }

    persist(out_dir, outputs)?;
    Ok(Outcome::Success)
}

pub fn run_optimize(p: &OptimizeParams, out_dir: &Path) -> Result<Outcome, CommandError> {
    let function = qdyn::bench::builtin_function(&p.objective, p.dim)?;
    let base =
        AnnealingSchedule::default_for_bounds(function.lower_bounds(), function.upper_bounds());
    let d_initial = p.d_initial.unwrap_or(base.d_initial);
    let schedule = AnnealingSchedule {
        d_initial,
        decay: p.decay,
        d_min: p.d_min.unwrap_or(1e-6 * d_initial),
        inner_steps: p.inner_steps,
    };
    let cfg = OptimizerConfig {
        mode: p.mode,
        dtau: p.dtau,
        n_walkers: p.n_walkers,
        target_walkers: p.target_walkers.unwrap_or(p.n_walkers),
        eref_gain: p.eref_gain,
        fd_offset_factor: p.fd_offset_factor,
        seed: p.seed,
        max_evaluations: p.max_evaluations,
        reseed_around_best: p.reseed_around_best,
    };
    let result = optimize(&function, &schedule, &cfg)?;

    let mut json = Vec::new();
    export::write_result_json(&result, &mut json).map_err(io_error)?;
    let mut csv = Vec::new();
    export::write_history_csv(&result, &mut csv).map_err(io_error)?;
    persist(
        out_dir,
        vec![("result.json".into(), json), ("history.csv".into(), csv)],
    )?;
    if result.budget_exhausted {
        Ok(Outcome::BudgetExhaustedWithResult)
    } else {
        Ok(Outcome::Success)
    }
}

pub fn run_bench(plan_path: Option<&PathBuf>, out_dir: &Path) -> Result<Outcome, CommandError> {
    let plan: ExperimentPlan = match plan_path {
        Some(path) => crate::config::load_config(path).map_err(CommandError::validation)?,
        None => serde_json::from_str(include_str!("../assets/default_plan.json"))
            .expect("bundled plan is valid"),
    };
    let report = run_plan(&plan)?;

    let mut json = Vec::new();
    export::write_report_json(&report, &mut json).map_err(io_error)?;
    let mut csv = Vec::new();
    export::write_report_csv(&report, &mut csv).map_err(io_error)?;
    persist(
        out_dir,
        vec![("report.json".into(), json), ("report.csv".into(), csv)],
    )?;
    Ok(Outcome::Success)
}

pub fn run_wavepacket(p: &WavepacketParams, out_dir: &Path) -> Result<Outcome, CommandError> {
    let grid = Grid::new(p.x_min, p.x_max, p.n_points)?;
    let pot = qdyn::grid::PotentialGrid::from_fn(&grid, qdyn::grid::potentials::free())?;
    if !p.sigma0.is_finite() || p.sigma0 <= 0.0 || !p.t_max.is_finite() || p.t_max <= 0.0 {
        return Err(CommandError::validation(
            "wavepacket needs sigma0 > 0 and t_max > 0",
        ));
    }
    let psi0 = qdyn::grid::WaveFunction::gaussian(&grid, 0.0, p.sigma0);
    let steps = (p.t_max / p.dt).round().max(1.0) as usize;
    let cfg = EvolutionConfig {
        d: p.d,
        dt: p.dt,
        n_steps: steps,
        mode: TimeMode::Real,
        renormalize_each_step: false,
        sample_every: (steps / p.samples.max(1)).max(1),
    };
    let traj = evolve_real(&psi0, &pot, &cfg)?;
    let rows: Vec<(f64, f64, f64)> = traj
        .states
        .iter()
        .map(|s| {
            let (_, numeric) = s.density_moments();
            (
                s.time(),
                free_packet_width(p.sigma0, p.d, s.time()),
                numeric,
            )
        })
        .collect();

    let mut csv = Vec::new();
    export::write_wavepacket_csv(&rows, &mut csv).map_err(io_error)?;
    persist(out_dir, vec![("wavepacket.csv".into(), csv)])?;
    Ok(Outcome::Success)
}

fn io_error(e: std::io::Error) -> CommandError {
    CommandError {
        message: e.to_string(),
        exit_code: 3,
    }
}

fn persist(out_dir: &Path, outputs: Outputs) -> Result<(), CommandError> {
    fs::create_dir_all(out_dir).map_err(|e| {
        CommandError::validation(format!("cannot create output directory {out_dir:?}: {e}"))
    })?;
    for (name, bytes) in outputs {
        let path = out_dir.join(&name);
        fs::write(&path, bytes)
            .map_err(|e| CommandError::validation(format!("cannot write {path:?}: {e}")))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}
