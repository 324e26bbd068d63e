//! Time evolution of wave functions on a 1-D grid.
//!
//! The generator is `H = -D d2/dx2 + V(x)` discretized with the
//! second-order central difference and hard walls (fixed zero) at the two
//! grid end points. Real time uses the norm-preserving Crank-Nicolson
//! rational step; imaginary time uses Strang splitting with the kinetic
//! half carried exactly in the sine basis of the hard-wall Laplacian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PotentialGrid, WaveFunction};
use crate::linalg::{solve_tridiag_const_off, DstPlan};

/// Real time (oscillatory, norm-preserving) or imaginary time
/// (diffusive, energy-decreasing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Real,
    Imaginary,
}

/// Parameters for a grid evolution run.
///
/// The boundary condition is always fixed-zero (hard walls) at the grid
/// ends; choose the domain so that the state carries less than `1e-12`
/// amplitude there, otherwise the evolvers log a warning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Kinetic coefficient in `H = -D d2/dx2 + V`.
    pub d: f64,
    /// Time step.
    pub dt: f64,
    /// Number of steps to take.
    pub n_steps: usize,
    pub mode: TimeMode,
    /// Renormalize after every step.
    pub renormalize_each_step: bool,
    /// Keep every `sample_every`-th intermediate state in the trajectory
    /// (0 keeps only the initial and final states).
    #[serde(default)]
    pub sample_every: usize,
}

impl EvolutionConfig {
    pub fn new(d: f64, dt: f64, n_steps: usize, mode: TimeMode) -> Self {
        EvolutionConfig {
            d,
            dt,
            n_steps,
            mode,
            renormalize_each_step: mode == TimeMode::Imaginary,
            sample_every: 0,
        }
    }

    fn validate(&self, expected: TimeMode) -> Result<()> {
        if !self.d.is_finite() || self.d <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "diffusion coefficient must be positive, got {}",
                self.d
            )));
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.mode != expected {
            return Err(Error::InvalidConfig(format!(
                "config mode {:?} does not match the requested evolution",
                self.mode
            )));
        }
        Ok(())
    }
}

/// Evolution output: sampled states (always including the final one) and
/// the largest amplitude observed next to the walls.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<WaveFunction>,
    pub max_boundary_amplitude: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &WaveFunction {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Applies the discretized Hamiltonian: `(H psi)_i = -D (psi_{i+1} - 2
/// psi_i + psi_{i-1}) / dx^2 + V_i psi_i`, with out-of-range neighbors
/// taken as zero.
pub fn apply_hamiltonian(psi: &WaveFunction, pot: &PotentialGrid, d: f64) -> Result<WaveFunction> {
    if psi.grid() != pot.grid() {
        return Err(Error::GridMismatch);
    }
    let n = psi.grid().n_points();
    let dx2 = psi.grid().dx() * psi.grid().dx();
    let amp = psi.amplitudes();
    let v = pot.values();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let left = if i > 0 { amp[i - 1] } else { Complex64::ZERO };
        let right = if i + 1 < n {
            amp[i + 1]
        } else {
            Complex64::ZERO
        };
        let lap = (right - 2.0 * amp[i] + left) / dx2;
        out.push(-d * lap + v[i] * amp[i]);
    }
    let mut result = WaveFunction::new(psi.grid(), out)?;
    result.set_time(psi.time());
    Ok(result)
}

/// Rayleigh quotient `<psi|H|psi> / <psi|psi>`.
pub fn rayleigh_quotient(psi: &WaveFunction, pot: &PotentialGrid, d: f64) -> Result<f64> {
    let h_psi = apply_hamiltonian(psi, pot, d)?;
    let num = psi.inner(&h_psi)?.re;
    let den = psi.norm_squared();
    Ok(num / den)
}

/// Evolves under `i d(psi)/dt = H psi` with the Crank-Nicolson step
/// `(I + i dt/2 H) psi' = (I - i dt/2 H) psi`.
///
/// The step is exactly norm-preserving in exact arithmetic; per-step norm
/// drift is at round-off level. Requires a normalized initial state.
pub fn evolve_real(
    psi0: &WaveFunction,
    pot: &PotentialGrid,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    cfg.validate(TimeMode::Real)?;
    if psi0.grid() != pot.grid() {
        return Err(Error::GridMismatch);
    }
    if !psi0.is_normalized(1e-8) {
        return Err(Error::InvalidConfig(format!(
            "real-time evolution requires a normalized state, |psi|^2 = {}",
            psi0.norm_squared()
        )));
    }

    let n = psi0.grid().n_points();
    let m = n - 2;
    let dx2 = psi0.grid().dx() * psi0.grid().dx();
    let v = pot.values();

    // LHS bands of (I + i dt/2 H) on the interior.
    let half_dt = 0.5 * cfg.dt;
    let diag: Vec<Complex64> = (1..=m)
        .map(|j| Complex64::new(1.0, half_dt * (2.0 * cfg.d / dx2 + v[j])))
        .collect();
    let off = Complex64::new(0.0, -half_dt * cfg.d / dx2);

    let mut interior: Vec<Complex64> = psi0.amplitudes()[1..n - 1].to_vec();
    let mut rhs = vec![Complex64::ZERO; m];
    let mut scratch = Vec::new();

    let mut runner = Runner::new(psi0, cfg);
    runner.observe_edges(&interior);

    for step in 1..=cfg.n_steps {
        // rhs = (I - i dt/2 H) psi, hard walls at both ends
        for j in 0..m {
            let left = if j > 0 {
                interior[j - 1]
            } else {
                Complex64::ZERO
            };
            let right = if j + 1 < m {
                interior[j + 1]
            } else {
                Complex64::ZERO
            };
            let h = -cfg.d * (right - 2.0 * interior[j] + left) / dx2 + v[j + 1] * interior[j];
            rhs[j] = interior[j] - Complex64::new(0.0, half_dt) * h;
        }
        solve_tridiag_const_off(&diag, off, &mut rhs, &mut scratch);
        interior.copy_from_slice(&rhs);
        runner.after_step(step, &mut interior)?;
    }
    Ok(runner.finish())
}

/// Evolves under `d(psi)/dtau = (D d2/dx2 - V) psi` by Strang splitting:
/// half a potential step, an exact kinetic step in the sine basis, half a
/// potential step.
///
/// With renormalization the trajectory relaxes toward the lowest mode of
/// `H`; the Rayleigh quotient is non-increasing along the way up to the
/// `O(dt^2)` splitting remainder.
pub fn evolve_imaginary(
    psi0: &WaveFunction,
    pot: &PotentialGrid,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    cfg.validate(TimeMode::Imaginary)?;
    if psi0.grid() != pot.grid() {
        return Err(Error::GridMismatch);
    }

    let n = psi0.grid().n_points();
    let m = n - 2;
    let dx = psi0.grid().dx();
    let v = pot.values();

    let half_pot: Vec<f64> = (1..=m).map(|j| (-0.5 * cfg.dt * v[j]).exp()).collect();
    let mut dst = DstPlan::new(m);
    let norm = dst.pair_normalization();
    let kinetic: Vec<f64> = (0..m)
        .map(|k| (-cfg.d * cfg.dt * dst.laplacian_eigenvalue(k, dx)).exp() * norm)
        .collect();

    let mut interior: Vec<Complex64> = psi0.amplitudes()[1..n - 1].to_vec();
    let mut runner = Runner::new(psi0, cfg);
    runner.observe_edges(&interior);

    for step in 1..=cfg.n_steps {
        for (a, &e) in interior.iter_mut().zip(&half_pot) {
            *a *= e;
        }
        dst.transform(&mut interior);
        for (a, &e) in interior.iter_mut().zip(&kinetic) {
            *a *= e;
        }
        dst.transform(&mut interior);
        for (a, &e) in interior.iter_mut().zip(&half_pot) {
            *a *= e;
        }
        if cfg.renormalize_each_step {
            let nrm = (interior.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx).sqrt();
            if nrm > 0.0 {
                for a in &mut interior {
                    *a /= nrm;
                }
            }
        }
        runner.after_step(step, &mut interior)?;
    }
    Ok(runner.finish())
}

/// Shared bookkeeping for both evolvers: sampling, boundary monitoring,
/// instability checks.
struct Runner<'a> {
    psi0: &'a WaveFunction,
    cfg: &'a EvolutionConfig,
    states: Vec<WaveFunction>,
    max_edge: f64,
}

impl<'a> Runner<'a> {
    fn new(psi0: &'a WaveFunction, cfg: &'a EvolutionConfig) -> Self {
        let mut max_edge = psi0.boundary_amplitude();
        if max_edge > 1e-12 {
            log::warn!(
                "initial state carries amplitude {max_edge:.3e} at the grid ends; \
                 the hard walls will clip it"
            );
        }
        let mut first = psi0.clone();
        // walls are part of the state space but pinned to zero from here on
        pin_walls(&mut first);
        if first.boundary_amplitude() > 0.0 {
            max_edge = max_edge.max(first.boundary_amplitude());
        }
        Runner {
            psi0,
            cfg,
            states: vec![first],
            max_edge,
        }
    }

    fn observe_edges(&mut self, interior: &[Complex64]) {
        if let (Some(a), Some(b)) = (interior.first(), interior.last()) {
            self.max_edge = self.max_edge.max(a.norm()).max(b.norm());
        }
    }

    fn after_step(&mut self, step: usize, interior: &mut [Complex64]) -> Result<()> {
        if !interior
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
        {
            return Err(Error::InstabilityDetected { step });
        }
        self.observe_edges(interior);
        let keep = step == self.cfg.n_steps
            || (self.cfg.sample_every > 0 && step.is_multiple_of(self.cfg.sample_every));
        if keep {
            self.states
                .push(self.assemble(interior, self.psi0.time() + step as f64 * self.cfg.dt));
        }
        Ok(())
    }

    fn assemble(&self, interior: &[Complex64], time: f64) -> WaveFunction {
        let n = self.psi0.grid().n_points();
        let mut amps = vec![Complex64::ZERO; n];
        amps[1..n - 1].copy_from_slice(interior);
        let mut wf = WaveFunction::new(self.psi0.grid(), amps).expect("length matches grid");
        wf.set_time(time);
        wf
    }

    fn finish(mut self) -> Trajectory {
        if self.cfg.n_steps == 0 {
            // keep the input untouched so a zero-step run is an exact identity
            self.states = vec![self.psi0.clone()];
        }
        if self.max_edge > 1e-12 {
            log::warn!(
                "boundary amplitude reached {:.3e} (> 1e-12); enlarge the domain",
                self.max_edge
            );
        }
        Trajectory {
            states: self.states,
            max_boundary_amplitude: self.max_edge,
        }
    }
}

fn pin_walls(psi: &mut WaveFunction) {
    let n = psi.grid().n_points();
    let amps = psi.amplitudes_mut();
    amps[0] = Complex64::ZERO;
    amps[n - 1] = Complex64::ZERO;
}

/// Density width of a free Gaussian packet after real time `t`:
/// `sigma(t) = sigma0 sqrt(1 + (D t / sigma0^2)^2)`.
///
/// `sigma0` is the initial standard deviation of `|psi|^2`.
pub fn free_packet_width(sigma0: f64, d: f64, t: f64) -> f64 {
    debug_assert!(sigma0 > 0.0 && d > 0.0 && t >= 0.0);
    let r = d * t / (sigma0 * sigma0);
    sigma0 * (1.0 + r * r).sqrt()
}

/// Heat kernel at distance `x` from a point source after imaginary time
/// `tau`: `(4 pi D tau)^(-dim/2) exp(-x^2 / (4 D tau))`.
///
/// Normalized as a probability density over `dim`-dimensional space; the
/// per-coordinate variance is `2 D tau`.
pub fn diffusion_green_function(x: f64, tau: f64, d: f64, dim: u32) -> f64 {
    debug_assert!(tau > 0.0 && d > 0.0 && dim >= 1);
    let four_pi_dt = 4.0 * std::f64::consts::PI * d * tau;
    four_pi_dt.powf(-(dim as f64) / 2.0) * (-x * x / (4.0 * d * tau)).exp()
}
