//! Annealed Gaussian-diffusion population optimizer.
//!
//! A population of walkers samples a black-box objective. One inner step
//! is either a pure Gaussian diffusion move (kernel variance `2 D dtau`
//! per coordinate), a drift move that adds `-grad dtau` estimated by
//! double sampling, or a diffusion-Monte-Carlo move that follows the
//! diffusion with birth/death branching against a reference energy. The
//! outer loop anneals `D` downward, shrinking the sampling scale.
//!
//! Every random draw comes from a counter-based stream keyed by
//! `(seed, generation, walker, purpose)`, so parallel and serial runs are
//! bit-identical.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor for the double-sampling probe offset.
const FD_OFFSET_FLOOR: f64 = 1e-8;
/// DMC population ceiling, as a multiple of `target_walkers`.
const MAX_POPULATION_FACTOR: usize = 10;

/// A box-bounded objective to minimize.
pub trait Objective: Send + Sync {
    fn dimension(&self) -> usize;
    fn lower_bounds(&self) -> &[f64];
    fn upper_bounds(&self) -> &[f64];
    fn evaluate(&self, x: &[f64]) -> f64;
}

/// Closure-backed [`Objective`].
pub struct FnObjective<F> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnObjective<F> {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, f: F) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidConfig(
                "objective bounds must be non-empty and of equal length".into(),
            ));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(Error::InvalidConfig(format!(
                    "objective bounds must satisfy lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(FnObjective { lower, upper, f })
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Objective for FnObjective<F> {
    fn dimension(&self) -> usize {
        self.lower.len()
    }
    fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }
    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Wraps an objective with an exact evaluation counter and a hard budget.
pub struct Evaluator<'a> {
    objective: &'a dyn Objective,
    used: AtomicUsize,
    limit: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(objective: &'a dyn Objective, limit: usize) -> Self {
        Evaluator {
            objective,
            used: AtomicUsize::new(0),
            limit,
        }
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective
    }

    /// Evaluates the objective, charging one call to the budget.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        loop {
            let cur = self.used.load(Ordering::Acquire);
            if cur >= self.limit {
                return Err(Error::BudgetExhausted { limit: self.limit });
            }
            if self
                .used
                .compare_exchange(cur, cur + 1, Ordering::AcqRel, Ordering::Acquire)
                .is_ok()
            {
                return Ok(self.objective.evaluate(x));
            }
        }
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::Acquire)
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.used().min(self.limit)
    }
}

/// Root of the counter-based random streams used by all walker updates.
#[derive(Debug, Clone, Copy)]
pub struct RngStream {
    seed: u64,
}

const TAG_INIT: u32 = 0;
const TAG_MOVE: u32 = 1;
const TAG_BRANCH: u32 = 2;
const TAG_RESEED: u32 = 3;

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed }
    }

    fn walker(&self, generation: u64, walker: u64, tag: u32) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&generation.to_le_bytes());
        key[16..24].copy_from_slice(&walker.to_le_bytes());
        key[24..28].copy_from_slice(&tag.to_le_bytes());
        key[28..32].copy_from_slice(b"qdyn");
        ChaCha8Rng::from_seed(key)
    }
}

/// Diffusion mode realizes the bare heat kernel; drift adds the
/// double-sampled gradient descent term; DMC adds birth/death branching
/// toward the lowest level of `-D lap + objective`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Diffusion,
    Drift,
    Dmc,
}

impl std::fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SamplerMode::Diffusion => "diffusion",
            SamplerMode::Drift => "drift",
            SamplerMode::Dmc => "dmc",
        };
        f.write_str(s)
    }
}

/// Outer-loop sequence of diffusion coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub d_initial: f64,
    /// Multiplicative decay per outer iteration, in (0, 1).
    pub decay: f64,
    pub d_min: f64,
    /// Inner steps per outer iteration.
    pub inner_steps: usize,
}

impl AnnealingSchedule {
    /// Default schedule for a bounding box: `d_initial = (max width)^2/4`,
    /// halving per stage down to `1e-6 d_initial`, 50 inner steps.
    pub fn default_for_bounds(lower: &[f64], upper: &[f64]) -> Self {
        let width = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| u - l)
            .fold(0.0_f64, f64::max);
        let d_initial = width * width / 4.0;
        AnnealingSchedule {
            d_initial,
            decay: 0.5,
            d_min: 1e-6 * d_initial,
            inner_steps: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d_min.is_finite()
            || self.d_min <= 0.0
            || !self.d_initial.is_finite()
            || self.d_initial < self.d_min
        {
            return Err(Error::InvalidConfig(format!(
                "annealing needs d_initial >= d_min > 0, got {} and {}",
                self.d_initial, self.d_min
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "annealing decay must lie in (0, 1), got {}",
                self.decay
            )));
        }
        if self.inner_steps == 0 {
            return Err(Error::InvalidConfig("inner_steps must be positive".into()));
        }
        Ok(())
    }

    /// Strictly decreasing sequence from `d_initial` down to `d_min`
    /// (always ending exactly at `d_min`).
    pub fn d_sequence(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut v = self.d_initial;
        while v > self.d_min {
            out.push(v);
            v *= self.decay;
        }
        out.push(self.d_min);
        out
    }
}

/// Sampler parameters shared by all modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub mode: SamplerMode,
    /// Imaginary-time step of one inner iteration.
    pub dtau: f64,
    pub n_walkers: usize,
    /// DMC population target (branching steers the size back to it).
    pub target_walkers: usize,
    /// Gain on the population-control term of the reference energy.
    pub eref_gain: f64,
    /// Probe offset for double sampling is
    /// `fd_offset_factor * sqrt(2 D dtau)`, floored at `1e-8`.
    pub fd_offset_factor: f64,
    pub seed: u64,
    pub max_evaluations: usize,
    /// Re-draw the population around the incumbent at each new stage.
    pub reseed_around_best: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            mode: SamplerMode::Diffusion,
            dtau: 0.1,
            n_walkers: 16,
            target_walkers: 16,
            eref_gain: 0.1,
            fd_offset_factor: 0.1,
            seed: 0,
            max_evaluations: 200_000,
            reseed_around_best: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_walkers < 2 {
            return Err(Error::InvalidConfig("need at least 2 walkers".into()));
        }
        if !self.dtau.is_finite() || self.dtau <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "dtau must be positive, got {}",
                self.dtau
            )));
        }
        if self.target_walkers == 0
            || !self.eref_gain.is_finite()
            || self.eref_gain <= 0.0
            || !self.fd_offset_factor.is_finite()
            || self.fd_offset_factor <= 0.0
        {
            return Err(Error::InvalidConfig(
                "target_walkers, eref_gain, fd_offset_factor must be positive".into(),
            ));
        }
        if self.max_evaluations == 0 {
            return Err(Error::InvalidConfig(
                "max_evaluations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Walker ensemble plus the best sample seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerPopulation {
    positions: Vec<Vec<f64>>,
    weights: Vec<f64>,
    values: Vec<f64>,
    generation: u64,
    best_position: Vec<f64>,
    best_value: f64,
}

impl WalkerPopulation {
    /// Uniform initialization over the objective's bounds (generation 0).
    pub fn init_uniform(eval: &Evaluator, n_walkers: usize, stream: &RngStream) -> Result<Self> {
        let obj = eval.objective();
        let dim = obj.dimension();
        let lower = obj.lower_bounds();
        let upper = obj.upper_bounds();
        let positions: Vec<Vec<f64>> = (0..n_walkers)
            .map(|i| {
                let mut rng = stream.walker(0, i as u64, TAG_INIT);
                (0..dim)
                    .map(|j| lower[j] + rng.gen::<f64>() * (upper[j] - lower[j]))
                    .collect()
            })
            .collect();
        Self::from_positions(eval, positions, 0)
    }

    /// Builds a population from explicit positions (clamped to bounds) and
    /// evaluates each one.
    pub fn from_positions(
        eval: &Evaluator,
        mut positions: Vec<Vec<f64>>,
        generation: u64,
    ) -> Result<Self> {
        let obj = eval.objective();
        for p in &mut positions {
            clamp_to_bounds(p, obj.lower_bounds(), obj.upper_bounds());
        }
        let values: Vec<f64> = positions
            .par_iter()
            .map(|p| eval.evaluate(p))
            .collect::<Result<_>>()?;
        let n = positions.len();
        let mut pop = WalkerPopulation {
            positions,
            weights: vec![1.0; n],
            values,
            generation,
            best_position: Vec::new(),
            best_value: f64::INFINITY,
        };
        pop.refresh_best();
        Ok(pop)
    }

    fn refresh_best(&mut self) {
        for (p, &v) in self.positions.iter().zip(&self.values) {
            if v < self.best_value {
                self.best_value = v;
                self.best_position = p.clone();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn best_position(&self) -> &[f64] {
        &self.best_position
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// RMS distance of the walkers from their centroid.
    pub fn spread(&self) -> f64 {
        let dim = self.positions[0].len();
        let n = self.len() as f64;
        let mut centroid = vec![0.0; dim];
        for p in &self.positions {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= n;
        }
        let ms = self
            .positions
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&centroid)
                    .map(|(x, c)| (x - c) * (x - c))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n;
        ms.sqrt()
    }
}

fn clamp_to_bounds(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(lo, hi);
    }
}

/// One Gaussian diffusion move: every coordinate of every walker gains an
/// independent `N(0, 2 D dtau)` displacement, clamped to the bounds, then
/// the walkers are re-evaluated. `D = 0` is an exact identity (no
/// evaluations charged).
pub fn diffusion_step(
    pop: &WalkerPopulation,
    eval: &Evaluator,
    d: f64,
    dtau: f64,
    stream: &RngStream,
) -> Result<WalkerPopulation> {
    validate_step(d, dtau)?;
    let generation = pop.generation + 1;
    if d == 0.0 {
        let mut next = pop.clone();
        next.generation = generation;
        return Ok(next);
    }
    let std = (2.0 * d * dtau).sqrt();
    let obj = eval.objective();
    let moved: Vec<(Vec<f64>, f64)> = pop
        .positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = stream.walker(generation, i as u64, TAG_MOVE);
            let normal = Normal::new(0.0, std).expect("std is finite and positive");
            let mut q: Vec<f64> = p.iter().map(|x| x + normal.sample(&mut rng)).collect();
            clamp_to_bounds(&mut q, obj.lower_bounds(), obj.upper_bounds());
            let v = eval.evaluate(&q)?;
            Ok((q, v))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(pop, moved, generation))
}

/// Double-sampling gradient estimate: per coordinate the objective is
/// probed at `x ± h e_j` (clamped into the box, falling back to a
/// one-sided stencil at the walls) and differenced over the actual probe
/// separation. Charges exactly `2 * dimension` evaluations.
pub fn estimate_gradient(eval: &Evaluator, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "probe offset must be positive, got {h}"
        )));
    }
    let obj = eval.objective();
    let lower = obj.lower_bounds();
    let upper = obj.upper_bounds();
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let a = (x[j] - h).max(lower[j]);
        let b = (x[j] + h).min(upper[j]);
        probe[j] = b;
        let fb = eval.evaluate(&probe)?;
        probe[j] = a;
        let fa = eval.evaluate(&probe)?;
        probe[j] = x[j];
        grad.push((fb - fa) / (b - a));
    }
    Ok(grad)
}

/// Drift move: `-grad dtau` (gradient from [`estimate_gradient`] with
/// offset `fd_offset_factor * sqrt(2 D dtau)`, floored at `1e-8`) plus the
/// Gaussian displacement of [`diffusion_step`]. Charges
/// `2 * dimension + 1` evaluations per walker.
pub fn drift_step(
    pop: &WalkerPopulation,
    eval: &Evaluator,
    d: f64,
    dtau: f64,
    cfg: &OptimizerConfig,
    stream: &RngStream,
) -> Result<WalkerPopulation> {
    validate_step(d, dtau)?;
    let generation = pop.generation + 1;
    let std = (2.0 * d * dtau).sqrt();
    let h = (cfg.fd_offset_factor * std).max(FD_OFFSET_FLOOR);
    let obj = eval.objective();
    let moved: Vec<(Vec<f64>, f64)> = pop
        .positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let grad = estimate_gradient(eval, p, h)?;
            let mut rng = stream.walker(generation, i as u64, TAG_MOVE);
            let mut q: Vec<f64> = if std > 0.0 {
                let normal = Normal::new(0.0, std).expect("std is finite and positive");
                p.iter()
                    .zip(&grad)
                    .map(|(x, g)| x - g * dtau + normal.sample(&mut rng))
                    .collect()
            } else {
                p.iter().zip(&grad).map(|(x, g)| x - g * dtau).collect()
            };
            clamp_to_bounds(&mut q, obj.lower_bounds(), obj.upper_bounds());
            let v = eval.evaluate(&q)?;
            Ok((q, v))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(pop, moved, generation))
}

fn validate_step(d: f64, dtau: f64) -> Result<()> {
    if d < 0.0 || !d.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "diffusion coefficient must be nonnegative, got {d}"
        )));
    }
    if !dtau.is_finite() || dtau <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "dtau must be positive, got {dtau}"
        )));
    }
    Ok(())
}

fn assemble(
    pop: &WalkerPopulation,
    moved: Vec<(Vec<f64>, f64)>,
    generation: u64,
) -> WalkerPopulation {
    let n = moved.len();
    let mut positions = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (p, v) in moved {
        positions.push(p);
        values.push(v);
    }
    let mut next = WalkerPopulation {
        positions,
        weights: vec![1.0; n],
        values,
        generation,
        best_position: pop.best_position.clone(),
        best_value: pop.best_value,
    };
    next.refresh_best();
    next
}

/// Birth/death branching: walker `i` is copied `floor(w_i + u)` times with
/// `w_i = exp(-(value_i - e_ref) dtau)` and `u` uniform in `[0, 1)`, then
/// the reference energy is re-centered to
/// `mean(values) - eref_gain * ln(N / target) / dtau`.
///
/// Uses the values cached by the preceding move; charges no evaluations.
/// The population is capped at `10 * target_walkers` and must not die out.
pub fn dmc_reweight(
    pop: &WalkerPopulation,
    e_ref: f64,
    dtau: f64,
    cfg: &OptimizerConfig,
    stream: &RngStream,
) -> Result<(WalkerPopulation, f64)> {
    if pop.is_empty() {
        return Err(Error::PopulationExtinction);
    }
    if !dtau.is_finite() || dtau <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "dtau must be positive, got {dtau}"
        )));
    }
    let cap = MAX_POPULATION_FACTOR * cfg.target_walkers;
    let copies: Vec<usize> = pop
        .positions
        .par_iter()
        .enumerate()
        .map(|(i, _)| {
            let w = (-(pop.values[i] - e_ref) * dtau).exp();
            let mut rng = stream.walker(pop.generation, i as u64, TAG_BRANCH);
            let u: f64 = rng.gen();
            (w + u).floor() as usize
        })
        .collect();

    let mut positions = Vec::new();
    let mut values = Vec::new();
    'fill: for (i, &c) in copies.iter().enumerate() {
        for _ in 0..c {
            if positions.len() == cap {
                break 'fill;
            }
            positions.push(pop.positions[i].clone());
            values.push(pop.values[i]);
        }
    }
    if positions.is_empty() {
        return Err(Error::PopulationExtinction);
    }

    let n = positions.len();
    let mean: f64 = values.iter().sum::<f64>() / n as f64;
    let new_e_ref = mean - cfg.eref_gain * (n as f64 / cfg.target_walkers as f64).ln() / dtau;

    let next = WalkerPopulation {
        positions,
        weights: vec![1.0; n],
        values,
        generation: pop.generation,
        best_position: pop.best_position.clone(),
        best_value: pop.best_value,
    };
    Ok((next, new_e_ref))
}

/// Per-stage summary in an [`OptimizationResult`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer_iter: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub best_value: f64,
    pub mean_value: f64,
    pub spread: f64,
}

/// Eval-count stamp of each improvement of the best value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub evaluations: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    pub evaluations_used: usize,
    pub seed: u64,
    pub mode: SamplerMode,
    pub history: Vec<OuterRecord>,
    pub eref_trace: Vec<f64>,
    pub budget_exhausted: bool,
    pub improvements: Vec<Improvement>,
}

/// Runs the two-loop optimizer: the outer loop walks the annealing
/// schedule, the inner loop advances the population with the configured
/// move. Deterministic given the seed; stops early (flagged, with the
/// best-so-far) when the next step would not fit in the budget.
pub fn optimize(
    obj: &dyn Objective,
    schedule: &AnnealingSchedule,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    schedule.validate()?;
    let dim = obj.dimension();
    if dim == 0 || obj.lower_bounds().len() != dim || obj.upper_bounds().len() != dim {
        return Err(Error::InvalidConfig(
            "objective bounds must match its dimension".into(),
        ));
    }
    let sweep = step_cost(cfg.mode, cfg.n_walkers, dim);
    if cfg.max_evaluations < cfg.n_walkers + sweep {
        return Err(Error::InvalidConfig(format!(
            "budget {} cannot cover initialization plus one sweep ({})",
            cfg.max_evaluations,
            cfg.n_walkers + sweep
        )));
    }

    let eval = Evaluator::new(obj, cfg.max_evaluations);
    let stream = RngStream::new(cfg.seed);
    let mut pop = WalkerPopulation::init_uniform(&eval, cfg.n_walkers, &stream)?;
    let mut improvements = vec![Improvement {
        evaluations: eval.used(),
        value: pop.best_value(),
    }];
    let mut e_ref = pop.mean_value();
    let mut eref_trace = Vec::new();
    let mut history = Vec::new();
    let mut exhausted = false;

    'outer: for (outer_iter, d) in schedule.d_sequence().into_iter().enumerate() {
        if cfg.reseed_around_best && outer_iter > 0 {
            if eval.remaining() < cfg.n_walkers {
                exhausted = true;
            } else {
                pop = reseed(&pop, &eval, d, cfg.dtau, &stream)?;
                note_improvement(&mut improvements, &eval, &pop);
            }
        }
        if !exhausted {
            for _ in 0..schedule.inner_steps {
                if eval.remaining() < step_cost(cfg.mode, pop.len(), dim) {
                    exhausted = true;
                    break;
                }
                pop = match cfg.mode {
                    SamplerMode::Diffusion => diffusion_step(&pop, &eval, d, cfg.dtau, &stream)?,
                    SamplerMode::Drift => drift_step(&pop, &eval, d, cfg.dtau, cfg, &stream)?,
                    SamplerMode::Dmc => {
                        let moved = diffusion_step(&pop, &eval, d, cfg.dtau, &stream)?;
                        let (branched, new_e_ref) =
                            dmc_reweight(&moved, e_ref, cfg.dtau, cfg, &stream)?;
                        e_ref = new_e_ref;
                        eref_trace.push(e_ref);
                        branched
                    }
                };
                note_improvement(&mut improvements, &eval, &pop);
            }
        }
        history.push(OuterRecord {
            outer_iter,
            d,
            best_value: pop.best_value(),
            mean_value: pop.mean_value(),
            spread: pop.spread(),
        });
        if exhausted {
            break 'outer;
        }
    }

    Ok(OptimizationResult {
        best_position: pop.best_position().to_vec(),
        best_value: pop.best_value(),
        evaluations_used: eval.used(),
        seed: cfg.seed,
        mode: cfg.mode,
        history,
        eref_trace,
        budget_exhausted: exhausted,
        improvements,
    })
}

fn step_cost(mode: SamplerMode, population: usize, dim: usize) -> usize {
    match mode {
        SamplerMode::Diffusion => population,
        SamplerMode::Drift => population * (2 * dim + 1),
        SamplerMode::Dmc => population,
    }
}

fn note_improvement(improvements: &mut Vec<Improvement>, eval: &Evaluator, pop: &WalkerPopulation) {
    let last = improvements.last().map_or(f64::INFINITY, |i| i.value);
    if pop.best_value() < last {
        improvements.push(Improvement {
            evaluations: eval.used(),
            value: pop.best_value(),
        });
    }
}

fn reseed(
    pop: &WalkerPopulation,
    eval: &Evaluator,
    d: f64,
    dtau: f64,
    stream: &RngStream,
) -> Result<WalkerPopulation> {
    let generation = pop.generation + 1;
    let std = (2.0 * d * dtau).sqrt();
    let n = pop.len();
    let center = pop.best_position().to_vec();
    let positions: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut rng = stream.walker(generation, i as u64, TAG_RESEED);
            let normal = Normal::new(0.0, std).expect("std is finite and positive");
            center.iter().map(|c| c + normal.sample(&mut rng)).collect()
        })
        .collect();
    let mut next = WalkerPopulation::from_positions(eval, positions, generation)?;
    if pop.best_value < next.best_value {
        next.best_value = pop.best_value;
        next.best_position = pop.best_position.clone();
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(dim: usize, half_width: f64) -> FnObjective<impl Fn(&[f64]) -> f64> {
        FnObjective::new(
            vec![-half_width; dim],
            vec![half_width; dim],
            |x: &[f64]| x.iter().map(|v| v * v).sum(),
        )
        .unwrap()
    }

    #[test]
    fn evaluator_counts_exactly_and_enforces_the_limit() {
        let obj = sphere(2, 5.0);
        let eval = Evaluator::new(&obj, 3);
        assert!(eval.evaluate(&[0.0, 0.0]).is_ok());
        assert!(eval.evaluate(&[1.0, 1.0]).is_ok());
        assert_eq!(eval.used(), 2);
        assert!(eval.evaluate(&[2.0, 2.0]).is_ok());
        assert!(matches!(
            eval.evaluate(&[3.0, 3.0]),
            Err(Error::BudgetExhausted { .. })
        ));
        assert_eq!(eval.used(), 3);
    }

    #[test]
    fn zero_diffusion_is_an_identity_step() {
        let obj = sphere(3, 5.0);
        let eval = Evaluator::new(&obj, 1000);
        let stream = RngStream::new(7);
        let pop = WalkerPopulation::init_uniform(&eval, 5, &stream).unwrap();
        let used_before = eval.used();
        let next = diffusion_step(&pop, &eval, 0.0, 0.5, &stream).unwrap();
        assert_eq!(next.positions(), pop.positions());
        assert_eq!(next.values(), pop.values());
        assert_eq!(eval.used(), used_before);
        assert_eq!(next.generation(), pop.generation() + 1);
    }

    #[test]
    fn diffusion_displacements_match_the_kernel_moments() {
        // 1e5 walkers from a point: variance 2 D dtau, mean 0
        let obj = sphere(2, 1000.0);
        let n = 100_000;
        let eval = Evaluator::new(&obj, 3 * n);
        let stream = RngStream::new(123);
        let positions = vec![vec![0.0, 0.0]; n];
        let pop = WalkerPopulation::from_positions(&eval, positions, 0).unwrap();
        let d = 1.0;
        let dtau = 0.5;
        let next = diffusion_step(&pop, &eval, d, dtau, &stream).unwrap();
        let want_var = 2.0 * d * dtau;
        for j in 0..2 {
            let mean: f64 = next.positions().iter().map(|p| p[j]).sum::<f64>() / n as f64;
            let var: f64 = next
                .positions()
                .iter()
                .map(|p| (p[j] - mean) * (p[j] - mean))
                .sum::<f64>()
                / n as f64;
            let mean_band = 3.0 * (want_var / n as f64).sqrt();
            assert!(mean.abs() < mean_band, "mean {mean} vs band {mean_band}");
            assert!(
                (var - want_var).abs() < 0.02,
                "variance {var} vs {want_var}"
            );
        }
    }

    #[test]
    fn gradient_is_exact_on_affine_and_quadratic_objectives() {
        let affine = FnObjective::new(vec![-10.0], vec![10.0], |x: &[f64]| 3.0 * x[0]).unwrap();
        let eval = Evaluator::new(&affine, 100);
        for &x in &[-4.0, 0.37, 5.0] {
            let g = estimate_gradient(&eval, &[x], 0.01).unwrap();
            assert!((g[0] - 3.0).abs() < 1e-12, "affine gradient {}", g[0]);
        }

        let quad = sphere(1, 10.0);
        let eval = Evaluator::new(&quad, 100);
        let g = estimate_gradient(&eval, &[1.0], 0.01).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-10, "quadratic gradient {}", g[0]);
    }

    #[test]
    fn gradient_truncation_is_second_order_on_quartics() {
        let quartic = FnObjective::new(vec![-10.0], vec![10.0], |x: &[f64]| x[0].powi(4)).unwrap();
        let eval = Evaluator::new(&quartic, 100);
        let err_at = |h: f64| {
            let g = estimate_gradient(&eval, &[1.0], h).unwrap();
            (g[0] - 4.0).abs()
        };
        let ratio = err_at(2e-2) / err_at(1e-2);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "halving h gave error ratio {ratio}"
        );
    }

    #[test]
    fn gradient_charges_two_evaluations_per_coordinate() {
        let obj = sphere(4, 5.0);
        let eval = Evaluator::new(&obj, 100);
        estimate_gradient(&eval, &[1.0, 2.0, 3.0, 4.0], 0.01).unwrap();
        assert_eq!(eval.used(), 8);

        let short = Evaluator::new(&obj, 7);
        assert!(matches!(
            estimate_gradient(&short, &[1.0, 2.0, 3.0, 4.0], 0.01),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn gradient_falls_back_to_one_sided_at_the_walls() {
        let affine = FnObjective::new(vec![0.0], vec![1.0], |x: &[f64]| 3.0 * x[0]).unwrap();
        let eval = Evaluator::new(&affine, 100);
        let g = estimate_gradient(&eval, &[0.0], 0.5).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-12);
        let g = estimate_gradient(&eval, &[1.0], 0.5).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn drift_without_noise_is_gradient_descent() {
        let obj = sphere(1, 5.0);
        let eval = Evaluator::new(&obj, 100);
        let stream = RngStream::new(0);
        let pop = WalkerPopulation::from_positions(&eval, vec![vec![1.0], vec![-2.0]], 0).unwrap();
        let cfg = OptimizerConfig::default();
        let next = drift_step(&pop, &eval, 0.0, 0.1, &cfg, &stream).unwrap();
        // x - 2 x dtau with the probe floored at 1e-8
        assert!((next.positions()[0][0] - 0.8).abs() < 1e-8);
        assert!((next.positions()[1][0] + 1.6).abs() < 1e-8);
    }

    #[test]
    fn drift_with_vanishing_noise_tracks_exact_descent_to_1e12() {
        let obj = sphere(1, 5.0);
        let eval = Evaluator::new(&obj, 10_000);
        let stream = RngStream::new(99);
        let dtau = 0.1;
        // noise std 1e-15 per step; probe offset 0.5 keeps the quadratic
        // difference exact in floating point
        let d = 5e-31;
        let cfg = OptimizerConfig {
            fd_offset_factor: 0.5e15,
            ..OptimizerConfig::default()
        };
        let mut pop =
            WalkerPopulation::from_positions(&eval, vec![vec![1.0], vec![-0.5]], 0).unwrap();
        let mut exact = [1.0, -0.5];
        for _ in 0..50 {
            pop = drift_step(&pop, &eval, d, dtau, &cfg, &stream).unwrap();
            for e in &mut exact {
                *e -= 2.0 * *e * dtau;
            }
            assert!((pop.positions()[0][0] - exact[0]).abs() < 1e-12);
            assert!((pop.positions()[1][0] - exact[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_on_constant_objective_reduces_to_diffusion() {
        let flat = FnObjective::new(vec![-5.0, -5.0], vec![5.0, 5.0], |_: &[f64]| 2.5).unwrap();
        let eval = Evaluator::new(&flat, 10_000);
        let stream = RngStream::new(5);
        let pop = WalkerPopulation::init_uniform(&eval, 8, &stream).unwrap();
        let diffused = diffusion_step(&pop, &eval, 0.3, 0.2, &stream).unwrap();
        let drifted =
            drift_step(&pop, &eval, 0.3, 0.2, &OptimizerConfig::default(), &stream).unwrap();
        for (a, b) in diffused.positions().iter().zip(drifted.positions()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drift_mean_displacement_splits_into_gradient_and_noise() {
        // 1e4 repetitions at x = 1 on x^2: mean displacement -2 x dtau
        let obj = sphere(1, 100.0);
        let n = 10_000;
        let eval = Evaluator::new(&obj, 10 * n);
        let stream = RngStream::new(2024);
        let pop = WalkerPopulation::from_positions(&eval, vec![vec![1.0]; n], 0).unwrap();
        let d = 0.05;
        let dtau = 0.1;
        let next = drift_step(&pop, &eval, d, dtau, &OptimizerConfig::default(), &stream).unwrap();
        let mean_disp: f64 = next.positions().iter().map(|p| p[0] - 1.0).sum::<f64>() / n as f64;
        let noise_band = 3.0 * ((2.0 * d * dtau) / n as f64).sqrt();
        assert!(
            (mean_disp + 0.2).abs() < noise_band + 1e-3,
            "mean displacement {mean_disp}"
        );
    }

    #[test]
    fn neutral_branching_keeps_the_population_exactly() {
        let flat = FnObjective::new(vec![-5.0], vec![5.0], |_: &[f64]| 0.7).unwrap();
        let eval = Evaluator::new(&flat, 1000);
        let stream = RngStream::new(3);
        let pop = WalkerPopulation::init_uniform(&eval, 20, &stream).unwrap();
        let cfg = OptimizerConfig {
            target_walkers: 20,
            ..OptimizerConfig::default()
        };
        // e_ref equal to the constant objective: every weight is exactly 1
        let (next, e_ref) = dmc_reweight(&pop, 0.7, 1.0, &cfg, &stream).unwrap();
        assert_eq!(next.len(), 20);
        assert_eq!(next.positions(), pop.positions());
        assert!((e_ref - 0.7).abs() < 1e-12);
    }

    #[test]
    fn branching_favors_low_values() {
        // walker values {0, 1} with e_ref = 0.5: expected copies e^0.5 vs e^-0.5
        let ramp = FnObjective::new(vec![-5.0], vec![5.0], |x: &[f64]| x[0].max(0.0)).unwrap();
        let eval = Evaluator::new(&ramp, usize::MAX);
        let cfg = OptimizerConfig {
            target_walkers: 2,
            ..OptimizerConfig::default()
        };
        let mut low = 0usize;
        let mut high = 0usize;
        let trials = 100_000;
        for t in 0..trials {
            let stream = RngStream::new(t as u64);
            let pop =
                WalkerPopulation::from_positions(&eval, vec![vec![0.0], vec![1.0]], 0).unwrap();
            let (next, _) = dmc_reweight(&pop, 0.5, 1.0, &cfg, &stream).unwrap();
            low += next.positions().iter().filter(|p| p[0] == 0.0).count();
            high += next.positions().iter().filter(|p| p[0] == 1.0).count();
        }
        let e_low = low as f64 / trials as f64;
        let e_high = high as f64 / trials as f64;
        assert!((e_low - 0.5_f64.exp()).abs() < 0.01, "low copies {e_low}");
        assert!(
            (e_high - (-0.5_f64).exp()).abs() < 0.01,
            "high copies {e_high}"
        );
    }

    #[test]
    fn branching_caps_the_population_at_ten_targets() {
        let deep = FnObjective::new(vec![-5.0], vec![5.0], |_: &[f64]| -1e4).unwrap();
        let eval = Evaluator::new(&deep, 1000);
        let stream = RngStream::new(8);
        let pop = WalkerPopulation::init_uniform(&eval, 4, &stream).unwrap();
        let cfg = OptimizerConfig {
            target_walkers: 4,
            ..OptimizerConfig::default()
        };
        // weights exp(1e4 dtau) explode: the cap must hold the line
        let (next, _) = dmc_reweight(&pop, 0.0, 1.0, &cfg, &stream).unwrap();
        assert_eq!(next.len(), 40);
    }

    #[test]
    fn extinct_population_is_reported() {
        let hot = FnObjective::new(vec![-5.0], vec![5.0], |_: &[f64]| 1e6).unwrap();
        let eval = Evaluator::new(&hot, 1000);
        let stream = RngStream::new(1);
        let pop = WalkerPopulation::init_uniform(&eval, 4, &stream).unwrap();
        let cfg = OptimizerConfig::default();
        // weights exp(-1e6 dtau) are zero: everyone dies
        assert!(matches!(
            dmc_reweight(&pop, 0.0, 1.0, &cfg, &stream),
            Err(Error::PopulationExtinction)
        ));
    }

    #[test]
    fn dmc_recovers_the_harmonic_zero_point_energy() {
        // lowest level of -D lap + x^2 is sqrt(D)
        for &d in &[1.0, 0.25] {
            let obj = sphere(1, 10.0);
            let cfg = OptimizerConfig {
                mode: SamplerMode::Dmc,
                dtau: 0.01,
                n_walkers: 500,
                target_walkers: 500,
                eref_gain: 0.1,
                seed: 11,
                max_evaluations: 10_000_000,
                ..OptimizerConfig::default()
            };
            let schedule = AnnealingSchedule {
                d_initial: d,
                decay: 0.5,
                d_min: d,
                inner_steps: 3000,
            };
            let result = optimize(&obj, &schedule, &cfg).unwrap();
            let trace = &result.eref_trace;
            let tail = &trace[trace.len() / 2..];
            let mean: f64 = tail.iter().sum::<f64>() / tail.len() as f64;
            let want = d.sqrt();
            assert!(
                (mean - want).abs() < 0.05 * want,
                "D={d}: e_ref settled at {mean}, want {want}"
            );
        }
    }

    #[test]
    fn annealing_sequence_is_strictly_decreasing_to_d_min() {
        let s = AnnealingSchedule {
            d_initial: 1.0,
            decay: 0.5,
            d_min: 0.3,
            inner_steps: 10,
        };
        assert_eq!(s.d_sequence(), vec![1.0, 0.5, 0.3]);

        let degenerate = AnnealingSchedule {
            d_initial: 0.7,
            decay: 0.9,
            d_min: 0.7,
            inner_steps: 10,
        };
        assert_eq!(degenerate.d_sequence(), vec![0.7]);

        let long = AnnealingSchedule::default_for_bounds(&[-5.0; 3], &[5.0; 3]);
        let seq = long.d_sequence();
        assert_eq!(seq[0], 25.0);
        for w in seq.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert_eq!(*seq.last().unwrap(), long.d_min);
    }

    #[test]
    fn degenerate_schedule_runs_one_outer_iteration() {
        let obj = sphere(2, 5.0);
        let schedule = AnnealingSchedule {
            d_initial: 0.1,
            decay: 0.5,
            d_min: 0.1,
            inner_steps: 5,
        };
        let cfg = OptimizerConfig {
            seed: 1,
            ..OptimizerConfig::default()
        };
        let result = optimize(&obj, &schedule, &cfg).unwrap();
        assert_eq!(result.history.len(), 1);
        assert_eq!(result.evaluations_used, 16 + 5 * 16);
    }

    #[test]
    fn optimizer_is_deterministic_and_monotone() {
        let obj = sphere(3, 5.0);
        let schedule =
            AnnealingSchedule::default_for_bounds(obj.lower_bounds(), obj.upper_bounds());
        let cfg = OptimizerConfig {
            mode: SamplerMode::Drift,
            seed: 42,
            ..OptimizerConfig::default()
        };
        let a = optimize(&obj, &schedule, &cfg).unwrap();
        let b = optimize(&obj, &schedule, &cfg).unwrap();
        assert_eq!(a, b);

        // and identical across thread counts
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| optimize(&obj, &schedule, &cfg).unwrap());
        assert_eq!(a, single);

        for w in a.history.windows(2) {
            assert!(w[1].best_value <= w[0].best_value);
        }
        for w in a.improvements.windows(2) {
            assert!(w[1].value < w[0].value);
            assert!(w[1].evaluations >= w[0].evaluations);
        }
        assert!(!a.budget_exhausted);
    }

    #[test]
    fn exhausted_budget_returns_flagged_best_so_far() {
        let obj = sphere(2, 5.0);
        let schedule =
            AnnealingSchedule::default_for_bounds(obj.lower_bounds(), obj.upper_bounds());
        let cfg = OptimizerConfig {
            seed: 3,
            max_evaluations: 100,
            ..OptimizerConfig::default()
        };
        let result = optimize(&obj, &schedule, &cfg).unwrap();
        assert!(result.budget_exhausted);
        assert!(result.evaluations_used <= 100);
        assert!(result.best_value.is_finite());
    }

    #[test]
    fn reseeding_concentrates_the_population_near_the_incumbent() {
        let obj = sphere(2, 5.0);
        let schedule = AnnealingSchedule {
            d_initial: 1.0,
            decay: 0.5,
            d_min: 0.25,
            inner_steps: 3,
        };
        let cfg = OptimizerConfig {
            seed: 9,
            reseed_around_best: true,
            ..OptimizerConfig::default()
        };
        let with = optimize(&obj, &schedule, &cfg).unwrap();
        let without = optimize(
            &obj,
            &schedule,
            &OptimizerConfig {
                reseed_around_best: false,
                ..cfg
            },
        )
        .unwrap();
        assert!(with.best_value.is_finite() && without.best_value.is_finite());
        assert_ne!(with.evaluations_used, without.evaluations_used);
    }

    #[test]
    fn evaluation_accounting_matches_actual_calls() {
        use std::sync::atomic::AtomicUsize;
        struct Counting {
            lower: Vec<f64>,
            upper: Vec<f64>,
            calls: AtomicUsize,
        }
        impl Objective for Counting {
            fn dimension(&self) -> usize {
                2
            }
            fn lower_bounds(&self) -> &[f64] {
                &self.lower
            }
            fn upper_bounds(&self) -> &[f64] {
                &self.upper
            }
            fn evaluate(&self, x: &[f64]) -> f64 {
                self.calls.fetch_add(1, Ordering::Relaxed);
                x.iter().map(|v| v * v).sum()
            }
        }
        let obj = Counting {
            lower: vec![-5.0, -5.0],
            upper: vec![5.0, 5.0],
            calls: AtomicUsize::new(0),
        };
        let schedule = AnnealingSchedule {
            d_initial: 1.0,
            decay: 0.5,
            d_min: 0.1,
            inner_steps: 7,
        };
        let cfg = OptimizerConfig {
            mode: SamplerMode::Drift,
            seed: 12,
            ..OptimizerConfig::default()
        };
        let result = optimize(&obj, &schedule, &cfg).unwrap();
        assert_eq!(result.evaluations_used, obj.calls.load(Ordering::Relaxed));
    }
}
