//! Pilot experiments behind the success thresholds asserted in the
//! acceptance suite (`tests/acceptance.rs`) and quoted in the book's
//! benchmarks chapter. Re-run with:
//!
//! ```text
//! cargo run --release -p qdyn --example pilot_runs
//! ```

use qdyn::bench::{builtin_function, default_threshold};
use qdyn::sampler::{optimize, AnnealingSchedule, Objective, OptimizerConfig, SamplerMode};

fn main() {
    let seeds: Vec<u64> = (1..=20).collect();

    println!("== sphere d=5, drift mode, default config, budget 2e5 ==");
    let sphere = builtin_function("sphere", 5).unwrap();
    let schedule =
        AnnealingSchedule::default_for_bounds(sphere.lower_bounds(), sphere.upper_bounds());
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    let mut max_evals = 0;
    for &seed in &seeds {
        let cfg = OptimizerConfig {
            mode: SamplerMode::Drift,
            seed,
            ..OptimizerConfig::default()
        };
        let r = optimize(&sphere, &schedule, &cfg).unwrap();
        if r.best_value < 1e-2 {
            hits += 1;
        }
        worst = worst.max(r.best_value);
        max_evals = max_evals.max(r.evaluations_used);
        println!(
            "  seed {seed:2}: best {:>12.3e}  evals {}  exhausted {}",
            r.best_value, r.evaluations_used, r.budget_exhausted
        );
    }
    println!("  -> {hits}/20 under 1e-2, worst {worst:.3e}, max evals {max_evals}");

    for mode in [SamplerMode::Diffusion, SamplerMode::Drift] {
        println!("== rastrigin d=2, {mode} mode, annealed vs fixed d_min ==");
        let rastrigin = builtin_function("rastrigin", 2).unwrap();
        let annealed = AnnealingSchedule::default_for_bounds(
            rastrigin.lower_bounds(),
            rastrigin.upper_bounds(),
        );
        let stages = annealed.d_sequence().len();
        let fixed = AnnealingSchedule {
            d_initial: annealed.d_min,
            decay: annealed.decay,
            d_min: annealed.d_min,
            inner_steps: annealed.inner_steps * stages,
        };
        for (label, sched) in [("annealed", &annealed), ("fixed", &fixed)] {
            let mut basin = 0;
            let mut under = 0;
            for &seed in &seeds {
                let cfg = OptimizerConfig {
                    mode,
                    seed,
                    ..OptimizerConfig::default()
                };
                let r = optimize(&rastrigin, sched, &cfg).unwrap();
                if r.best_position.iter().all(|x| x.abs() < 0.5) {
                    basin += 1;
                }
                if r.best_value < default_threshold("rastrigin") {
                    under += 1;
                }
            }
            println!("  {label:>8}: basin {basin}/20, best<1e-2 {under}/20");
        }
    }
}
