//! Small dense kernels shared by the evolvers and the eigensolver:
//! tridiagonal solves and a sine transform diagonalizing the hard-wall
//! Laplacian.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Thomas algorithm for a complex tridiagonal system with constant
/// off-diagonals. The matrix is `diag(b) + off * (shift by ±1)`.
///
/// No pivoting; callers must supply diagonally dominant systems.
pub fn solve_tridiag_const_off(
    b: &[Complex64],
    off: Complex64,
    rhs: &mut [Complex64],
    scratch: &mut Vec<Complex64>,
) {
    let n = b.len();
    debug_assert_eq!(rhs.len(), n);
    scratch.clear();
    scratch.resize(n, Complex64::ZERO);

    // forward sweep
    let mut denom = b[0];
    rhs[0] /= denom;
    for i in 1..n {
        scratch[i] = off / denom;
        denom = b[i] - off * scratch[i];
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    // back substitution
    for i in (0..n - 1).rev() {
        let correction = scratch[i + 1] * rhs[i + 1];
        rhs[i] -= correction;
    }
}

/// Solves `(T - shift I) x = rhs` for a real symmetric tridiagonal `T`
/// given by `diag` and constant off-diagonal `off`, using LU with partial
/// pivoting. Safe near-singular shifts, as needed by inverse iteration.
pub struct ShiftedTridiagLu {
    n: usize,
    // three bands of U plus the L multipliers and pivot flags
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedTridiagLu {
    pub fn factor(diag: &[f64], off: f64, shift: f64) -> Self {
        let n = diag.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swapped = vec![false; n];

        // rolling band rows: current row (c0,c1,c2), next row (n0,n1,n2)
        let mut c0 = diag[0] - shift;
        let mut c1 = if n > 1 { off } else { 0.0 };
        let mut c2 = 0.0;
        for i in 0..n {
            let (mut n0, mut n1, mut n2) = if i + 1 < n {
                (off, diag[i + 1] - shift, if i + 2 < n { off } else { 0.0 })
            } else {
                (0.0, 0.0, 0.0)
            };
            if i + 1 < n && n0.abs() > c0.abs() {
                std::mem::swap(&mut c0, &mut n0);
                std::mem::swap(&mut c1, &mut n1);
                std::mem::swap(&mut c2, &mut n2);
                swapped[i] = true;
            }
            // guard exact zeros so the solve stays finite
            if c0 == 0.0 {
                c0 = f64::MIN_POSITIVE.sqrt();
            }
            let m = if i + 1 < n { n0 / c0 } else { 0.0 };
            u0[i] = c0;
            u1[i] = c1;
            u2[i] = c2;
            l[i] = m;
            c0 = n1 - m * c1;
            c1 = n2 - m * c2;
            c2 = 0.0;
        }
        ShiftedTridiagLu {
            n,
            u0,
            u1,
            u2,
            l,
            swapped,
        }
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(rhs.len(), n);
        for i in 0..n - 1 {
            if self.swapped[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= self.l[i] * rhs[i];
        }
        for i in (0..n).rev() {
            let mut v = rhs[i];
            if i + 1 < n {
                v -= self.u1[i] * rhs[i + 1];
            }
            if i + 2 < n {
                v -= self.u2[i] * rhs[i + 2];
            }
            rhs[i] = v / self.u0[i];
        }
    }
}

/// Type-I discrete sine transform on `m` interior points, realized through
/// a complex FFT of length `2(m+1)` with odd extension.
///
/// The transform matrix `S_kj = sin(pi k j / (m+1))` is its own inverse up
/// to the factor `2/(m+1)`; [`DstPlan::pair_normalization`] returns that
/// factor.
pub struct DstPlan {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl DstPlan {
    pub fn new(m: usize) -> Self {
        let len = 2 * (m + 1);
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
        DstPlan {
            m,
            fft,
            buf: vec![Complex64::ZERO; len],
            scratch,
        }
    }

    /// Normalization constant for a forward+inverse pair: `2 / (m + 1)`.
    pub fn pair_normalization(&self) -> f64 {
        2.0 / (self.m + 1) as f64
    }

    /// Applies the unnormalized DST-I in place.
    pub fn transform(&mut self, data: &mut [Complex64]) {
        let m = self.m;
        debug_assert_eq!(data.len(), m);
        let len = 2 * (m + 1);
        self.buf[0] = Complex64::ZERO;
        self.buf[m + 1] = Complex64::ZERO;
        for (j, &v) in data.iter().enumerate() {
            self.buf[1 + j] = v;
            self.buf[len - 1 - j] = -v;
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let half_i = Complex64::new(0.0, 0.5);
        for (k, out) in data.iter_mut().enumerate() {
            *out = half_i * self.buf[k + 1];
        }
    }

    /// Eigenvalue of the hard-wall second-difference operator
    /// `-(f_{j+1} - 2 f_j + f_{j-1}) / dx^2` for mode `k` (0-based).
    pub fn laplacian_eigenvalue(&self, k: usize, dx: f64) -> f64 {
        let theta = std::f64::consts::PI * (k + 1) as f64 / (self.m + 1) as f64;
        (2.0 - 2.0 * theta.cos()) / (dx * dx)
    }
}
