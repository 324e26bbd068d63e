//! Standard test objectives and a seeded experiment harness.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{optimize, AnnealingSchedule, Objective, OptimizerConfig, SamplerMode};

/// Minimizer coordinate of the Styblinski-Tang term `x^4 - 16 x^2 + 5 x`.
const STYBLINSKI_X: f64 = -2.903534027771177;

/// A named test objective with a known global minimum.
pub struct BenchmarkFunction {
    name: String,
    dimension: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    known_minimum_position: Vec<f64>,
    known_minimum_value: f64,
    f: fn(&[f64]) -> f64,
}

impl BenchmarkFunction {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn known_minimum_position(&self) -> &[f64] {
        &self.known_minimum_position
    }

    pub fn known_minimum_value(&self) -> f64 {
        self.known_minimum_value
    }
}

impl Objective for BenchmarkFunction {
    fn dimension(&self) -> usize {
        self.dimension
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

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn rastrigin(x: &[f64]) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    10.0 * x.len() as f64
        + x.iter()
            .map(|&v| v * v - 10.0 * (two_pi * v).cos())
            .sum::<f64>()
}

fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let sum_cos: f64 = x.iter().map(|&v| (two_pi * v).cos()).sum();
    -20.0 * (-0.2 * (sum_sq / n).sqrt()).exp() - (sum_cos / n).exp() + 20.0 + std::f64::consts::E
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let a = w[1] - w[0] * w[0];
            let b = 1.0 - w[0];
            100.0 * a * a + b * b
        })
        .sum()
}

fn styblinski_tang(x: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .map(|&v| v * v * v * v - 16.0 * v * v + 5.0 * v)
        .sum::<f64>()
}

/// Returns a standard-form benchmark with its canonical bounds.
///
/// Known names: `sphere`, `rastrigin`, `ackley`, `rosenbrock`,
/// `styblinski_tang`.
pub fn builtin_function(name: &str, dimension: usize) -> Result<BenchmarkFunction> {
    if dimension == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    struct Standard {
        f: fn(&[f64]) -> f64,
        lower: f64,
        upper: f64,
        min_coord: f64,
    }
    let std_form = match name {
        "sphere" => Standard {
            f: sphere,
            lower: -5.12,
            upper: 5.12,
            min_coord: 0.0,
        },
        "rastrigin" => Standard {
            f: rastrigin,
            lower: -5.12,
            upper: 5.12,
            min_coord: 0.0,
        },
        "ackley" => Standard {
            f: ackley,
            lower: -32.768,
            upper: 32.768,
            min_coord: 0.0,
        },
        "rosenbrock" => {
            if dimension < 2 {
                return Err(Error::InvalidConfig(
                    "rosenbrock needs dimension >= 2".into(),
                ));
            }
            Standard {
                f: rosenbrock,
                lower: -5.0,
                upper: 10.0,
                min_coord: 1.0,
            }
        }
        "styblinski_tang" => Standard {
            f: styblinski_tang,
            lower: -5.0,
            upper: 5.0,
            min_coord: STYBLINSKI_X,
        },
        _ => {
            return Err(Error::UnknownFunction {
                name: name.to_string(),
            })
        }
    };
    let Standard {
        f,
        lower,
        upper,
        min_coord,
    } = std_form;
    let lower = vec![lower; dimension];
    let upper = vec![upper; dimension];
    let min_pos = vec![min_coord; dimension];
    let known_minimum_value = f(&min_pos);
    Ok(BenchmarkFunction {
        name: name.to_string(),
        dimension,
        lower,
        upper,
        known_minimum_position: min_pos,
        known_minimum_value,
        f,
    })
}

/// Default success threshold on `best - known_minimum` for a function.
///
/// Rosenbrock gets a loose threshold because of its flat valley; all
/// others must come within `1e-2` of the optimum.
pub fn default_threshold(name: &str) -> f64 {
    match name {
        "rosenbrock" => 1.0,
        _ => 1e-2,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub dimension: usize,
}

/// Plan-level schedule description; unset fields fall back to the
/// per-function defaults of [`AnnealingSchedule::default_for_bounds`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub id: String,
    #[serde(default)]
    pub d_initial: Option<f64>,
    #[serde(default)]
    pub d_min: Option<f64>,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_inner_steps")]
    pub inner_steps: usize,
    /// Collapse to a single stage pinned at `d_min` (the ablation
    /// baseline against annealing).
    #[serde(default)]
    pub fixed_at_d_min: bool,
}

fn default_decay() -> f64 {
    0.5
}

fn default_inner_steps() -> usize {
    50
}

impl ScheduleSpec {
    pub fn resolve(&self, lower: &[f64], upper: &[f64]) -> AnnealingSchedule {
        let base = AnnealingSchedule::default_for_bounds(lower, upper);
        let d_initial = self.d_initial.unwrap_or(base.d_initial);
        let d_min = self.d_min.unwrap_or(1e-6 * d_initial);
        if self.fixed_at_d_min {
            AnnealingSchedule {
                d_initial: d_min,
                decay: self.decay,
                d_min,
                inner_steps: self.inner_steps,
            }
        } else {
            AnnealingSchedule {
                d_initial,
                decay: self.decay,
                d_min,
                inner_steps: self.inner_steps,
            }
        }
    }
}

/// A full experiment matrix: every (function, mode, schedule, seed) cell
/// is run with the same per-run budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub functions: Vec<FunctionSpec>,
    pub modes: Vec<SamplerMode>,
    pub schedules: Vec<ScheduleSpec>,
    pub seeds: Vec<u64>,
    pub max_evaluations: usize,
    #[serde(default)]
    pub n_walkers: Option<usize>,
    #[serde(default)]
    pub dtau: Option<f64>,
    /// Per-function overrides of [`default_threshold`].
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() || self.modes.is_empty() || self.schedules.is_empty() {
            return Err(Error::InvalidConfig(
                "plan needs at least one function, mode, and schedule".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("plan needs at least one seed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("plan seeds must be distinct".into()));
        }
        for f in &self.functions {
            builtin_function(&f.name, f.dimension)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRow {
    pub seed: u64,
    pub best_value: f64,
    pub evaluations_used: usize,
    pub evaluations_to_threshold: Option<usize>,
    pub success: bool,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub function: String,
    pub dimension: usize,
    pub mode: SamplerMode,
    pub schedule_id: String,
    pub threshold: f64,
    pub success_rate: f64,
    pub median_best_value: f64,
    pub median_evaluations_to_threshold: Option<f64>,
    pub rows: Vec<SeedRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
}

/// Runs every cell of the plan. Cells execute independently (in parallel)
/// but the report ordering and contents are deterministic; per-cell budget
/// exhaustion is recorded, never fatal.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let mut cell_specs = Vec::new();
    for f in &plan.functions {
        for &mode in &plan.modes {
            for s in &plan.schedules {
                cell_specs.push((f.clone(), mode, s.clone()));
            }
        }
    }
    let cells: Vec<CellReport> = cell_specs
        .par_iter()
        .map(|(fspec, mode, sspec)| run_cell(plan, fspec, *mode, sspec))
        .collect::<Result<_>>()?;
    Ok(ExperimentReport { cells })
}

fn run_cell(
    plan: &ExperimentPlan,
    fspec: &FunctionSpec,
    mode: SamplerMode,
    sspec: &ScheduleSpec,
) -> Result<CellReport> {
    let function = builtin_function(&fspec.name, fspec.dimension)?;
    let schedule = sspec.resolve(function.lower_bounds(), function.upper_bounds());
    let threshold = plan
        .thresholds
        .get(&fspec.name)
        .copied()
        .unwrap_or_else(|| default_threshold(&fspec.name));

    let rows: Vec<SeedRow> = plan
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = OptimizerConfig {
                mode,
                seed,
                max_evaluations: plan.max_evaluations,
                ..OptimizerConfig::default()
            };
            if let Some(n) = plan.n_walkers {
                cfg.n_walkers = n;
                cfg.target_walkers = n;
            }
            if let Some(dtau) = plan.dtau {
                cfg.dtau = dtau;
            }
            let result = optimize(&function, &schedule, &cfg)?;
            let gap = result.best_value - function.known_minimum_value();
            let evaluations_to_threshold = result
                .improvements
                .iter()
                .find(|imp| imp.value - function.known_minimum_value() < threshold)
                .map(|imp| imp.evaluations);
            Ok(SeedRow {
                seed,
                best_value: result.best_value,
                evaluations_used: result.evaluations_used,
                evaluations_to_threshold,
                success: gap < threshold,
                budget_exhausted: result.budget_exhausted,
            })
        })
        .collect::<Result<_>>()?;

    let success_rate = rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64;
    let median_best_value = median(rows.iter().map(|r| r.best_value).collect());
    let to_threshold: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.evaluations_to_threshold.map(|e| e as f64))
        .collect();
    let median_evaluations_to_threshold = if to_threshold.is_empty() {
        None
    } else {
        Some(median(to_threshold))
    };
    Ok(CellReport {
        function: fspec.name.clone(),
        dimension: fspec.dimension,
        mode,
        schedule_id: sspec.id.clone(),
        threshold,
        success_rate,
        median_best_value,
        median_evaluations_to_threshold,
        rows,
    })
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
