//! Uniform 1-D grids, discretized potentials, and wave functions.
//!
//! Conventions used across the crate:
//! - grid points are `x_i = x_min + i * dx`, with the two end points treated
//!   as hard walls (amplitudes pinned to zero by the evolvers),
//! - inner products carry the `dx` weight: `<f|g> = sum_i conj(f_i) g_i dx`,
//! - a wave function is normalized when `sum_i |psi_i|^2 dx == 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform 1-D spatial grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid {
    /// Builds a uniform grid over `[x_min, x_max]` with `n_points` points.
    ///
    /// Both end points are included exactly; `dx = (x_max - x_min) / (n_points - 1)`.
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min || n_points < 3 {
            return Err(Error::InvalidBounds {
                x_min,
                x_max,
                n_points,
            });
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Grid {
            x_min,
            x_max,
            n_points,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Position of grid point `i`. The last point returns `x_max` exactly.
    pub fn position(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        if i == self.n_points - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx
        }
    }

    /// Iterator over all grid positions.
    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.position(i))
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        (i.max(0.0) as usize).min(self.n_points - 1)
    }
}

/// A scalar objective sampled on a grid, used as the potential term.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    grid: Grid,
    values: Vec<f64>,
}

impl PotentialGrid {
    /// Samples `f` at every grid point.
    ///
    /// Fails with [`Error::NonFinitePotential`] if any sample is NaN or infinite.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_points());
        for i in 0..grid.n_points() {
            let x = grid.position(i);
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinitePotential { index: i, x });
            }
            values.push(v);
        }
        Ok(PotentialGrid {
            grid: *grid,
            values,
        })
    }

    /// Wraps precomputed values; lengths must match and all values be finite.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinitePotential {
                    index: i,
                    x: grid.position(i),
                });
            }
        }
        Ok(PotentialGrid {
            grid: *grid,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Complex amplitudes on a grid at a point in (real or imaginary) time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl WaveFunction {
    /// Wraps amplitudes at time zero. The length must match the grid.
    pub fn new(grid: &Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        Ok(WaveFunction {
            grid: *grid,
            amplitudes,
            time: 0.0,
        })
    }

    /// Samples a complex-valued profile at every grid point (time zero).
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.positions().map(f).collect();
        WaveFunction {
            grid: *grid,
            amplitudes,
            time: 0.0,
        }
    }

    /// Samples a real-valued profile at every grid point (time zero).
    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Normalized Gaussian packet whose *density* `|psi|^2` has standard
    /// deviation `sigma` around `center`.
    pub fn gaussian(grid: &Grid, center: f64, sigma: f64) -> Self {
        let mut psi = Self::from_real_fn(grid, |x| {
            let u = (x - center) / sigma;
            (-u * u / 4.0).exp()
        });
        psi.normalize();
        psi
    }

    /// Normalized flat profile over the interior, zero at the walls.
    pub fn flat(grid: &Grid) -> Self {
        let n = grid.n_points();
        let c = 1.0 / ((n - 2) as f64 * grid.dx()).sqrt();
        let mut amplitudes = vec![Complex64::new(c, 0.0); n];
        amplitudes[0] = Complex64::ZERO;
        amplitudes[n - 1] = Complex64::ZERO;
        WaveFunction {
            grid: *grid,
            amplitudes,
            time: 0.0,
        }
    }

    /// Discrete point source: `1/dx` at the grid point nearest to `center`,
    /// zero elsewhere, so that `sum_i psi_i dx = 1`.
    pub fn point_source(grid: &Grid, center: f64) -> Self {
        let mut amplitudes = vec![Complex64::ZERO; grid.n_points()];
        let i = grid.nearest_index(center);
        amplitudes[i] = Complex64::new(1.0 / grid.dx(), 0.0);
        WaveFunction {
            grid: *grid,
            amplitudes,
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// `sum_i |psi_i|^2 dx`.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Rescales so that `norm() == 1`. No-op on the zero function.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_squared() - 1.0).abs() <= tol
    }

    /// dx-weighted inner product `<self|other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.dx())
    }

    /// `|psi_i|^2` per grid point.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Mean and standard deviation of position under the density `|psi|^2`.
    ///
    /// The density is renormalized internally, so the input need not be
    /// normalized.
    pub fn density_moments(&self) -> (f64, f64) {
        let mut w_sum = 0.0;
        let mut mean = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let w = a.norm_sqr();
            w_sum += w;
            mean += w * self.grid.position(i);
        }
        mean /= w_sum;
        let mut var = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let d = self.grid.position(i) - mean;
            var += a.norm_sqr() * d * d;
        }
        var /= w_sum;
        (mean, var.sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Largest end-point amplitude magnitude; the evolvers pin the walls to
    /// zero, so anything sizable here means the domain is too small.
    pub fn boundary_amplitude(&self) -> f64 {
        let first = self.amplitudes.first().map_or(0.0, |a| a.norm());
        let last = self.amplitudes.last().map_or(0.0, |a| a.norm());
        first.max(last)
    }
}

/// Ready-made 1-D potentials.
pub mod potentials {
    /// `V(x) = k x^2`.
    pub fn harmonic(k: f64) -> impl Fn(f64) -> f64 {
        move |x| k * x * x
    }

    /// `V(x) = a (x^2 - b^2)^2`, two wells at `x = ±b`.
    pub fn double_well(a: f64, b: f64) -> impl Fn(f64) -> f64 {
        move |x| {
            let u = x * x - b * b;
            a * u * u
        }
    }

    /// `V(x) = 0`.
    pub fn free() -> impl Fn(f64) -> f64 {
        |_| 0.0
    }
}
