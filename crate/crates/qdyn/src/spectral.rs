//! Eigen-decomposition of the discretized Hamiltonian and everything that
//! follows from it: state expansions, real/imaginary spectral propagation,
//! the ground-state limit, and the time-dependent softmax / sigmoid
//! occupation laws.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolve::TimeMode;
use crate::grid::{Grid, PotentialGrid, WaveFunction};
use crate::linalg::ShiftedTridiagLu;

/// Lowest eigenpairs of `H = -D d2/dx2 + V` on a grid with hard walls at
/// the end points.
///
/// Energies are ascending; eigenstates are orthonormal under the
/// dx-weighted inner product and vanish at the walls.
#[derive(Debug, Clone)]
pub struct Spectrum {
    energies: Vec<f64>,
    states: Vec<Vec<f64>>,
    d: f64,
    grid: Grid,
}

impl Spectrum {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenstate values on the full grid (walls included as zeros).
    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n]
    }

    pub fn state_as_wavefunction(&self, n: usize) -> WaveFunction {
        WaveFunction::new(
            &self.grid,
            self.states[n]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        )
        .expect("state length matches grid")
    }
}

/// Coefficients of a state in the eigenbasis of a [`Spectrum`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateExpansion {
    pub coefficients: Vec<Complex64>,
}

impl StateExpansion {
    pub fn norm_squared(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Kinetic/potential split of an expectation value; `total` is always the
/// exact sum of the two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySplit {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// Computes the lowest `k` eigenpairs of the interior tridiagonal
/// Hamiltonian by Sturm-sequence bisection plus inverse iteration.
///
/// `k` may range from 1 to `n_points - 2`, the number of interior points.
pub fn eigensolve(pot: &PotentialGrid, d: f64, k: usize) -> Result<Spectrum> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "kinetic coefficient must be positive, got {d}"
        )));
    }
    let grid = *pot.grid();
    let n = grid.n_points();
    let m = n - 2;
    if k < 1 || k > m {
        return Err(Error::InvalidConfig(format!(
            "requested {k} levels; the grid supports 1..={m}"
        )));
    }

    let dx2 = grid.dx() * grid.dx();
    let diag: Vec<f64> = (1..=m).map(|j| 2.0 * d / dx2 + pot.values()[j]).collect();
    let off = -d / dx2;

    let energies = bisect_lowest(&diag, off, k);
    let scale = diag.iter().fold(0.0_f64, |a, &b| a.max(b.abs())) + 2.0 * off.abs();

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (level, &lambda) in energies.iter().enumerate() {
        let v = inverse_iterate(&diag, off, lambda, &vectors, scale)
            .ok_or(Error::ConvergenceFailure { level })?;
        vectors.push(v);
    }

    // dx-weighted normalization, zero walls, deterministic sign
    let inv_sqrt_dx = 1.0 / grid.dx().sqrt();
    let states = vectors
        .into_iter()
        .map(|v| {
            let mut full = vec![0.0; n];
            full[1..n - 1].copy_from_slice(&v);
            let mut peak = 0usize;
            for (i, val) in full.iter().enumerate() {
                if val.abs() > full[peak].abs() {
                    peak = i;
                }
            }
            let sign = if full[peak] < 0.0 { -1.0 } else { 1.0 };
            for val in &mut full {
                *val *= sign * inv_sqrt_dx;
            }
            full
        })
        .collect();

    Ok(Spectrum {
        energies,
        states,
        d,
        grid,
    })
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let e2 = off * off;
    let pivmin = 1e-290_f64.max(f64::MIN_POSITIVE * e2.max(1.0));
    let mut count = 0;
    let mut q = 1.0;
    for (i, &dv) in diag.iter().enumerate() {
        q = if i == 0 { dv - x } else { dv - x - e2 / q };
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect_lowest(diag: &[f64], off: f64, k: usize) -> Vec<f64> {
    let lo0 = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * off.abs();
    let hi0 = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off.abs();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut lo = if j == 0 { lo0 } else { out[j - 1] };
        let mut hi = hi0;
        for _ in 0..200 {
            let width = hi - lo;
            if width <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if sturm_count(diag, off, mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

fn inverse_iterate(
    diag: &[f64],
    off: f64,
    lambda: f64,
    previous: &[Vec<f64>],
    scale: f64,
) -> Option<Vec<f64>> {
    let m = diag.len();
    let lu = ShiftedTridiagLu::factor(diag, off, lambda);
    let tol = (1e3 * f64::EPSILON * scale).max(1e-13);

    // deterministic pseudo-random start vector
    let mut state =
        0x9E37_79B9_7F4A_7C15u64 ^ (previous.len() as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut v: Vec<f64> = (0..m)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    normalize2(&mut v);

    let mut best_resid = f64::INFINITY;
    let mut best: Option<Vec<f64>> = None;
    for _ in 0..10 {
        lu.solve(&mut v);
        for p in previous {
            let dot: f64 = v.iter().zip(p).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(p) {
                *a -= dot * b;
            }
        }
        if !normalize2(&mut v) {
            return None;
        }
        let r = residual2(diag, off, lambda, &v);
        if r < best_resid {
            best_resid = r;
            best = Some(v.clone());
        }
        if r <= tol {
            break;
        }
    }
    if best_resid <= 1e-6 * lambda.abs().max(1.0) {
        best
    } else {
        None
    }
}

fn normalize2(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for a in v.iter_mut() {
        *a /= norm;
    }
    true
}

fn residual2(diag: &[f64], off: f64, lambda: f64, v: &[f64]) -> f64 {
    let m = v.len();
    let mut acc = 0.0;
    for i in 0..m {
        let mut t = (diag[i] - lambda) * v[i];
        if i > 0 {
            t += off * v[i - 1];
        }
        if i + 1 < m {
            t += off * v[i + 1];
        }
        acc += t * t;
    }
    acc.sqrt()
}

/// Projects `psi` onto the eigenbasis: `c_n = <phi_n|psi>` with the
/// dx-weighted inner product.
pub fn expand_state(psi: &WaveFunction, spec: &Spectrum) -> Result<StateExpansion> {
    if psi.grid() != spec.grid() {
        return Err(Error::GridMismatch);
    }
    let dx = spec.grid().dx();
    let coefficients = spec
        .states
        .iter()
        .map(|phi| {
            let s: Complex64 = phi.iter().zip(psi.amplitudes()).map(|(&p, a)| p * a).sum();
            s * dx
        })
        .collect();
    Ok(StateExpansion { coefficients })
}

/// Rebuilds the grid state `sum_n c_n phi_n` from an expansion.
pub fn reconstruct(exp0: &StateExpansion, spec: &Spectrum) -> WaveFunction {
    let n = spec.grid().n_points();
    let mut amps = vec![Complex64::ZERO; n];
    for (c, phi) in exp0.coefficients.iter().zip(&spec.states) {
        for (a, &p) in amps.iter_mut().zip(phi) {
            *a += c * p;
        }
    }
    let mut wf = WaveFunction::new(spec.grid(), amps).expect("length matches grid");
    wf.set_time(0.0);
    wf
}

/// Phase factor `exp(-i E t)` of real-time propagation, accepting a
/// complex time so the rotation `t = -i tau` can be evaluated directly.
pub fn real_time_factor(energy: f64, t: Complex64) -> Complex64 {
    (Complex64::new(0.0, -energy) * t).exp()
}

/// Decay factor `exp(-E tau)` of imaginary-time propagation.
pub fn imaginary_time_factor(energy: f64, tau: f64) -> f64 {
    (-energy * tau).exp()
}

/// Propagates expansion coefficients: real mode multiplies `c_n` by
/// `exp(-i E_n t)`, imaginary mode by `exp(-E_n tau)` (requires
/// `time >= 0`).
pub fn spectral_propagate(
    exp0: &StateExpansion,
    spec: &Spectrum,
    time: f64,
    mode: TimeMode,
) -> StateExpansion {
    assert!(
        mode == TimeMode::Real || time >= 0.0,
        "imaginary-time propagation needs tau >= 0"
    );
    let coefficients = exp0
        .coefficients
        .iter()
        .zip(spec.energies())
        .map(|(c, &e)| match mode {
            TimeMode::Real => c * real_time_factor(e, Complex64::new(time, 0.0)),
            TimeMode::Imaginary => c * imaginary_time_factor(e, time),
        })
        .collect();
    StateExpansion { coefficients }
}

/// Index of the lowest-energy state with a nonzero coefficient, plus the
/// smallest imaginary time at which that term's magnitude exceeds 100x
/// every other nonzero term.
///
/// Returns `f64::INFINITY` for the time when another occupied level is
/// exactly degenerate with the winner (ties broken by lowest index).
pub fn ground_state_limit(exp0: &StateExpansion, spec: &Spectrum) -> Result<(usize, f64)> {
    let occupied: Vec<usize> = exp0
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(i, _)| i)
        .collect();
    let &winner = occupied
        .iter()
        .min_by(|&&a, &&b| {
            spec.energies[a]
                .partial_cmp(&spec.energies[b])
                .expect("energies are finite")
        })
        .ok_or(Error::EmptyExpansion)?;

    let e0 = spec.energies[winner];
    let c0 = exp0.coefficients[winner].norm();
    let mut dominance_tau = 0.0_f64;
    for &i in &occupied {
        if i == winner {
            continue;
        }
        let gap = spec.energies[i] - e0;
        if gap <= 0.0 {
            return Ok((winner, f64::INFINITY));
        }
        // |c0| exp(-e0 tau) >= 100 |ci| exp(-ei tau)
        let tau = (100.0 * exp0.coefficients[i].norm() / c0).ln() / gap;
        dominance_tau = dominance_tau.max(tau);
    }
    Ok((winner, dominance_tau))
}

/// Splits `<psi|H|psi>` into `E_d = <psi|-D d2/dx2|psi>` and
/// `E_p = <psi|V|psi>`. Requires a normalized state.
pub fn energy_decomposition(
    psi: &WaveFunction,
    pot: &PotentialGrid,
    d: f64,
) -> Result<EnergySplit> {
    if psi.grid() != pot.grid() {
        return Err(Error::GridMismatch);
    }
    if !psi.is_normalized(1e-8) {
        return Err(Error::InvalidConfig(format!(
            "energy decomposition requires a normalized state, |psi|^2 = {}",
            psi.norm_squared()
        )));
    }
    let n = psi.grid().n_points();
    let dx = psi.grid().dx();
    let dx2 = dx * dx;
    let amp = psi.amplitudes();
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 0..n {
        let left = if i > 0 { amp[i - 1] } else { Complex64::ZERO };
        let right = if i + 1 < n {
            amp[i + 1]
        } else {
            Complex64::ZERO
        };
        let lap = (right - 2.0 * amp[i] + left) / dx2;
        kinetic += (amp[i].conj() * (-d * lap)).re;
        potential += pot.values()[i] * amp[i].norm_sqr();
    }
    kinetic *= dx;
    potential *= dx;
    Ok(EnergySplit {
        kinetic,
        potential,
        total: kinetic + potential,
    })
}

/// Occupation probabilities `exp(-E_k tau) / sum_i exp(-E_i tau)`, the
/// softmax over energies with inverse-temperature `tau`.
///
/// Stabilized by subtracting `min(E)` before exponentiation, which leaves
/// the result unchanged. Requires finite, non-empty energies and
/// `tau >= 0`.
pub fn occupation_probabilities(energies: &[f64], tau: f64) -> Vec<f64> {
    assert!(!energies.is_empty(), "occupation of an empty level set");
    assert!(tau >= 0.0, "softmax time must be nonnegative");
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(e_min.is_finite(), "energies must be finite");
    let weights: Vec<f64> = energies
        .iter()
        .map(|&e| (-(e - e_min) * tau).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Probability of the lower of two levels separated by `delta_e`:
/// the time-dependent sigmoid `1 / (1 + exp(-delta_e tau))`.
///
/// Evaluates through the same stabilized path as
/// [`occupation_probabilities`], so the two agree bit-for-bit.
pub fn two_level_probability(delta_e: f64, tau: f64) -> f64 {
    occupation_probabilities(&[0.0, delta_e], tau)[0]
}

/// Born-rule diagnostic: `|c_n exp(-E_n tau)|^2` normalized over the
/// expansion. Squaring the amplitudes doubles the effective decay rates
/// compared with [`occupation_probabilities`].
pub fn born_occupation(exp0: &StateExpansion, spec: &Spectrum, tau: f64) -> Vec<f64> {
    assert!(tau >= 0.0);
    let e_min = spec.energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = exp0
        .coefficients
        .iter()
        .zip(spec.energies())
        .map(|(c, &e)| c.norm_sqr() * (-2.0 * (e - e_min) * tau).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::potentials;

    fn harmonic_spectrum(n: usize, d: f64, k: usize) -> (PotentialGrid, Spectrum) {
        let g = Grid::new(-10.0, 10.0, n).unwrap();
        let pot = PotentialGrid::from_fn(&g, potentials::harmonic(1.0)).unwrap();
        let spec = eigensolve(&pot, d, k).unwrap();
        (pot, spec)
    }

    #[test]
    fn harmonic_ladder_energies() {
        // H = -D d2/dx2 + x^2 has E_n = (2n+1) sqrt(D)
        for &d in &[1.0, 0.25] {
            let (_, spec) = harmonic_spectrum(2001, d, 4);
            for (n, &e) in spec.energies().iter().enumerate() {
                let want = (2 * n + 1) as f64 * d.sqrt();
                assert!((e - want).abs() < 1e-3, "D={d}: E_{n} = {e}, want {want}");
            }
        }
    }

    #[test]
    fn box_energies_have_second_order_error() {
        let l = 10.0;
        let n = 501;
        let g = Grid::new(0.0, l, n).unwrap();
        let pot = PotentialGrid::from_fn(&g, potentials::free()).unwrap();
        let d = 0.8;
        let spec = eigensolve(&pot, d, 3).unwrap();
        let dx = g.dx();
        for (i, &e) in spec.energies().iter().enumerate() {
            let kk = (i + 1) as f64 * std::f64::consts::PI / l;
            let want = d * kk * kk;
            let bound = 1.5 * want * (kk * dx) * (kk * dx) / 12.0;
            assert!(
                (e - want).abs() < bound.max(1e-10),
                "E_{i} = {e}, continuum {want}, bound {bound}"
            );
        }
    }

    #[test]
    fn eigenpairs_are_orthonormal_with_small_residuals() {
        let g = Grid::new(-4.0, 4.0, 801).unwrap();
        // double well with nearly degenerate lowest pair
        let pot = PotentialGrid::from_fn(&g, potentials::double_well(8.0, 1.0)).unwrap();
        let spec = eigensolve(&pot, 0.5, 6).unwrap();
        let dx = g.dx();
        for a in 0..spec.len() {
            for b in a..spec.len() {
                let dot: f64 = spec
                    .state(a)
                    .iter()
                    .zip(spec.state(b))
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    * dx;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "<{a}|{b}> = {dot}");
            }
        }
        for n in 0..spec.len() {
            let phi = spec.state_as_wavefunction(n);
            let h_phi = crate::evolve::apply_hamiltonian(&phi, &pot, 0.5).unwrap();
            let e = spec.energies()[n];
            let resid = h_phi
                .amplitudes()
                .iter()
                .zip(phi.amplitudes())
                .map(|(h, p)| (h - e * p).norm_sqr())
                .sum::<f64>()
                .sqrt()
                * dx.sqrt();
            assert!(
                resid <= 1e-6 * e.abs().max(1.0),
                "residual {resid} for level {n}"
            );
        }
        // energies ascending
        for w in spec.energies().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn eigensolve_is_bit_identical_across_calls() {
        let g = Grid::new(-4.0, 4.0, 401).unwrap();
        let pot = PotentialGrid::from_fn(&g, potentials::double_well(2.0, 1.2)).unwrap();
        let a = eigensolve(&pot, 0.7, 5).unwrap();
        let b = eigensolve(&pot, 0.7, 5).unwrap();
        assert_eq!(a.energies(), b.energies());
        for n in 0..5 {
            assert_eq!(a.state(n), b.state(n));
        }
    }

    #[test]
    fn eigensolve_rejects_bad_level_counts() {
        let g = Grid::new(-1.0, 1.0, 11).unwrap();
        let pot = PotentialGrid::from_fn(&g, potentials::free()).unwrap();
        assert!(eigensolve(&pot, 1.0, 0).is_err());
        assert!(eigensolve(&pot, 1.0, 10).is_err());
        assert!(eigensolve(&pot, 1.0, 9).is_ok());
    }

    #[test]
    fn expansion_of_eigenstates_is_a_unit_vector() {
        let (_, spec) = harmonic_spectrum(601, 1.0, 5);
        let phi0 = spec.state_as_wavefunction(0);
        let c = expand_state(&phi0, &spec).unwrap();
        assert!((c.coefficients[0].re - 1.0).abs() < 1e-10);
        for c_n in &c.coefficients[1..] {
            assert!(c_n.norm() < 1e-9);
        }

        // superposition is linear
        let mut amps: Vec<Complex64> = phi0.amplitudes().to_vec();
        for (a, &p) in amps.iter_mut().zip(spec.state(1)) {
            *a = (*a + p) / 2.0_f64.sqrt();
        }
        let mix = WaveFunction::new(spec.grid(), amps).unwrap();
        let c = expand_state(&mix, &spec).unwrap();
        let target = 1.0 / 2.0_f64.sqrt();
        assert!((c.coefficients[0].re - target).abs() < 1e-10);
        assert!((c.coefficients[1].re - target).abs() < 1e-10);
    }

    #[test]
    fn parseval_holds_on_a_complete_basis() {
        let g = Grid::new(-3.0, 3.0, 60).unwrap();
        let pot = PotentialGrid::from_fn(&g, potentials::harmonic(1.0)).unwrap();
        let spec = eigensolve(&pot, 1.0, 58).unwrap();
        // arbitrary wall-respecting state
        let mut psi = WaveFunction::from_real_fn(&g, |x| {
            (x * 1.3).sin() + 0.4 * (x * 3.7).cos() * (-x * x).exp()
        });
        {
            let n = psi.amplitudes().len();
            let amps = psi.amplitudes_mut();
            amps[0] = Complex64::ZERO;
            amps[n - 1] = Complex64::ZERO;
        }
        psi.normalize();
        let c = expand_state(&psi, &spec).unwrap();
        assert!(
            (c.norm_squared() - 1.0).abs() < 1e-8,
            "sum |c|^2 = {}",
            c.norm_squared()
        );
        // and the reconstruction returns the state
        let back = reconstruct(&c, &spec);
        for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn propagation_factors() {
        let (_, spec) = harmonic_spectrum(301, 1.0, 3);
        let exp0 = StateExpansion {
            coefficients: vec![Complex64::new(1.0, 0.0); 3],
        };
        // tau = 0 is the identity
        let p = spectral_propagate(&exp0, &spec, 0.0, TimeMode::Imaginary);
        assert_eq!(p, exp0);
        // real mode preserves magnitudes
        let p = spectral_propagate(&exp0, &spec, 3.7, TimeMode::Real);
        for c in &p.coefficients {
            assert!((c.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn imaginary_decay_halves_a_unit_gap_at_ln2() {
        // direct factor check, independent of any grid
        let tau = 2.0_f64.ln();
        assert!((imaginary_time_factor(0.0, tau) - 1.0).abs() < 1e-15);
        assert!((imaginary_time_factor(1.0, tau) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wick_rotation_matches_imaginary_factors_exactly() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let e = next() * 20.0 - 5.0;
            let tau = next() * 10.0;
            let rotated = real_time_factor(e, Complex64::new(0.0, -tau));
            let direct = imaginary_time_factor(e, tau);
            assert_eq!(rotated.re, direct);
            assert_eq!(rotated.im, 0.0);
        }
    }

    #[test]
    fn ground_state_limit_examples() {
        let (_, spec) = harmonic_spectrum(301, 1.0, 3);
        let gaps: Vec<f64> = spec.energies().to_vec();
        // make a synthetic two-level expansion; dominance solves
        // exp(gap tau) = 100
        let exp0 = StateExpansion {
            coefficients: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::ZERO,
            ],
        };
        let (idx, tau) = ground_state_limit(&exp0, &spec).unwrap();
        assert_eq!(idx, 0);
        let want = 100.0_f64.ln() / (gaps[1] - gaps[0]);
        assert!((tau - want).abs() < 1e-10);

        // absent ground coefficient is skipped
        let exp1 = StateExpansion {
            coefficients: vec![
                Complex64::ZERO,
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        };
        let (idx, _) = ground_state_limit(&exp1, &spec).unwrap();
        assert_eq!(idx, 1);

        // single occupied level dominates immediately
        let exp2 = StateExpansion {
            coefficients: vec![Complex64::new(0.3, 0.0), Complex64::ZERO, Complex64::ZERO],
        };
        let (idx, tau) = ground_state_limit(&exp2, &spec).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(tau, 0.0);

        let empty = StateExpansion {
            coefficients: vec![Complex64::ZERO; 3],
        };
        assert!(matches!(
            ground_state_limit(&empty, &spec),
            Err(Error::EmptyExpansion)
        ));
    }

    #[test]
    fn harmonic_ground_state_satisfies_the_virial_split() {
        let (pot, spec) = harmonic_spectrum(2001, 1.0, 1);
        let phi0 = spec.state_as_wavefunction(0);
        let split = energy_decomposition(&phi0, &pot, 1.0).unwrap();
        assert!((split.total - 1.0).abs() < 1e-3, "total {}", split.total);
        assert!((split.kinetic - 0.5).abs() < 1e-3);
        assert!((split.potential - 0.5).abs() < 1e-3);
        assert_eq!(split.total, split.kinetic + split.potential);
    }

    #[test]
    fn zero_potential_has_zero_potential_energy() {
        let g = Grid::new(-5.0, 5.0, 201).unwrap();
        let pot = PotentialGrid::from_fn(&g, potentials::free()).unwrap();
        let psi = WaveFunction::gaussian(&g, 0.0, 1.0);
        let split = energy_decomposition(&psi, &pot, 1.0).unwrap();
        assert_eq!(split.potential, 0.0);
        assert!(split.kinetic > 0.0);
    }

    #[test]
    fn flat_interior_state_has_boundary_dominated_kinetic_energy() {
        let kinetic_for = |half_width: f64| {
            let g = Grid::new(-half_width, half_width, 2001).unwrap();
            let pot = PotentialGrid::from_fn(&g, potentials::free()).unwrap();
            let psi = WaveFunction::flat(&g);
            energy_decomposition(&psi, &pot, 1.0).unwrap().kinetic
        };
        let narrow = kinetic_for(5.0);
        let wide = kinetic_for(50.0);
        assert!(wide < narrow, "{wide} should shrink below {narrow}");
    }

    #[test]
    fn softmax_examples() {
        let p = occupation_probabilities(&[0.0, 1.0], 0.0);
        assert_eq!(p, vec![0.5, 0.5]);

        let p = occupation_probabilities(&[0.0, 1.0, 2.0], 1.0);
        let want = [0.66524, 0.24473, 0.09003];
        for (got, want) in p.iter().zip(want) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }

        let p = occupation_probabilities(&[0.0, 1.0], 1e6);
        assert!((p[0] - 1.0).abs() < 1e-300);
        assert!(p[1] < 1e-300);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        // integer-valued inputs keep the shifted subtraction exact, so the
        // comparison can be bitwise
        let energies = [3.0, -1.0, 7.0, 0.0, 2.0];
        for shift in [-1024.0, -7.0, 1.0, 513.0, 65536.0] {
            let shifted: Vec<f64> = energies.iter().map(|e| e + shift).collect();
            for tau in [0.0, 0.3, 1.7, 9.0] {
                assert_eq!(
                    occupation_probabilities(&energies, tau),
                    occupation_probabilities(&shifted, tau)
                );
            }
        }
    }

    #[test]
    fn sigmoid_examples_and_softmax_identity() {
        assert_eq!(two_level_probability(0.0, 5.0), 0.5);
        assert!((two_level_probability(1.0, 3.0_f64.ln()) - 0.75).abs() < 1e-15);
        assert!((two_level_probability(1.0, 1e4) - 1.0).abs() < 1e-15);

        let mut state = 42u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let delta_e = next() * 40.0 - 20.0;
            let tau = next() * 20.0;
            let sig = two_level_probability(delta_e, tau);
            let soft = occupation_probabilities(&[0.0, delta_e], tau)[0];
            assert_eq!(sig, soft);
        }
    }

    #[test]
    fn lowest_level_occupation_is_monotone_in_tau() {
        let energies = [0.2, 1.4, 0.9, 3.0];
        let mut prev = 0.0;
        for i in 0..=2000 {
            let tau = i as f64 * 0.01;
            let p = occupation_probabilities(&energies, tau)[0];
            assert!(p >= prev - 1e-15, "p0 fell from {prev} to {p} at tau={tau}");
            prev = p;
        }
    }

    #[test]
    fn born_weights_double_the_decay_rate() {
        let (_, spec) = harmonic_spectrum(301, 1.0, 2);
        let exp0 = StateExpansion {
            coefficients: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        };
        let tau = 0.4;
        let born = born_occupation(&exp0, &spec, tau);
        let gap = spec.energies()[1] - spec.energies()[0];
        let want_ratio = (-2.0 * gap * tau).exp();
        assert!((born[1] / born[0] - want_ratio).abs() < 1e-12);
    }
}
