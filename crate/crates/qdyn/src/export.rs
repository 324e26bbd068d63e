//! Fixed-format data-file writers.
//!
//! Trajectory files carry 17-significant-digit floats; everything else
//! uses the shortest round-trip decimal so that re-runs are byte-identical.

use std::io::{self, Write};

use crate::bench::ExperimentReport;
use crate::evolve::Trajectory;
use crate::sampler::OptimizationResult;
use crate::spectral::{occupation_probabilities, Spectrum};

/// CSV `tau_or_t,x,re,im,abs2`, row-major over (time sample, grid point).
pub fn write_trajectory_csv(traj: &Trajectory, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "tau_or_t,x,re,im,abs2")?;
    for state in &traj.states {
        let grid = state.grid();
        for (i, a) in state.amplitudes().iter().enumerate() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                state.time(),
                grid.position(i),
                a.re,
                a.im,
                a.norm_sqr()
            )?;
        }
    }
    Ok(())
}

/// CSV `n,energy`.
pub fn write_spectrum_csv(spec: &Spectrum, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "n,energy")?;
    for (n, e) in spec.energies().iter().enumerate() {
        writeln!(w, "{n},{e}")?;
    }
    Ok(())
}

/// Per-state CSV `n,x,phi`.
pub fn write_state_csv(spec: &Spectrum, n: usize, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "n,x,phi")?;
    let grid = spec.grid();
    for (i, phi) in spec.state(n).iter().enumerate() {
        writeln!(w, "{n},{},{phi}", grid.position(i))?;
    }
    Ok(())
}

/// CSV `tau,p0,p1,...` sampling the occupation softmax on `rows` points
/// of `[0, tau_max]`.
pub fn write_softmax_trace_csv(
    energies: &[f64],
    tau_max: f64,
    rows: usize,
    w: &mut impl Write,
) -> io::Result<()> {
    write!(w, "tau")?;
    for k in 0..energies.len() {
        write!(w, ",p{k}")?;
    }
    writeln!(w)?;
    let rows = rows.max(2);
    for i in 0..rows {
        let tau = tau_max * i as f64 / (rows - 1) as f64;
        write!(w, "{tau}")?;
        for p in occupation_probabilities(energies, tau) {
            write!(w, ",{p}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Pretty JSON, newline-terminated.
pub fn write_result_json(result: &OptimizationResult, w: &mut impl Write) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, result)?;
    writeln!(w)
}

/// CSV `outer_iter,D,best_value,mean_value,spread`.
pub fn write_history_csv(result: &OptimizationResult, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "outer_iter,D,best_value,mean_value,spread")?;
    for r in &result.history {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.outer_iter, r.d, r.best_value, r.mean_value, r.spread
        )?;
    }
    Ok(())
}

/// Pretty JSON, newline-terminated.
pub fn write_report_json(report: &ExperimentReport, w: &mut impl Write) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, report)?;
    writeln!(w)
}

/// CSV `function,dim,mode,schedule_id,seed,best_value,evaluations,success`.
pub fn write_report_csv(report: &ExperimentReport, w: &mut impl Write) -> io::Result<()> {
    writeln!(
        w,
        "function,dim,mode,schedule_id,seed,best_value,evaluations,success"
    )?;
    for cell in &report.cells {
        for row in &cell.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                cell.function,
                cell.dimension,
                cell.mode,
                cell.schedule_id,
                row.seed,
                row.best_value,
                row.evaluations_used,
                row.success
            )?;
        }
    }
    Ok(())
}

/// CSV `t,width_analytic,width_numeric`.
pub fn write_wavepacket_csv(rows: &[(f64, f64, f64)], w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "t,width_analytic,width_numeric")?;
    for (t, analytic, numeric) in rows {
        writeln!(w, "{t},{analytic},{numeric}")?;
    }
    Ok(())
}
