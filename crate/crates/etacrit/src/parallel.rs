//! Multistart over a rayon pool. Results are collected in start order, so
//! the reduction sees exactly what the serial search sees.

use etacrit_core::optimize::{self, draw_starts, run_start, Objective, StartResult};
use etacrit_core::{BellFunctional, DetectorModel, NoiseSpec, OptimizationOutcome, SearchConfig, ThetaMode};

/// Environment variable consulted when no job count is given.
pub const JOBS_ENV: &str = "ETACRIT_JOBS";

/// Job count from [`JOBS_ENV`], falling back to the machine's parallelism.
pub fn default_jobs() -> usize {
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn search(obj: &Objective, cfg: &SearchConfig, jobs: usize) -> etacrit_core::Result<OptimizationOutcome> {
    cfg.validate()?;
    if jobs <= 1 {
        return optimize::search(obj, cfg);
    }
    let starts = draw_starts(obj.functional().n_settings(), obj.theta_mode().is_free(), cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    let results: Vec<StartResult> = pool.install(|| {
        use rayon::prelude::*;
        starts
            .par_iter()
            .enumerate()
            .map(|(i, x0)| run_start(obj, i, x0, cfg))
            .collect()
    });
    optimize::reduce(obj, cfg, &results)
}

/// Parallel counterpart of [`etacrit_core::multistart`].
pub fn multistart(
    f: &BellFunctional,
    m: DetectorModel,
    noise: NoiseSpec,
    theta_mode: ThetaMode,
    cfg: &SearchConfig,
    jobs: usize,
) -> etacrit_core::Result<OptimizationOutcome> {
    let obj = optimize::objective(f, m, noise, theta_mode, cfg)?;
    search(&obj, cfg, jobs)
}
