use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::quasi_interp::QuasiInterpolant;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub median_seconds: f64,
    pub samples: Vec<f64>,
}

/// Median wall time of `reps` (at least 3) runs of `f`.
pub fn bench<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<BenchResult> {
    let mut samples = Vec::with_capacity(reps.max(3));
    for _ in 0..reps.max(3) {
        let t = Instant::now();
        f()?;
        samples.push(t.elapsed().as_secs_f64());
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BenchResult { median_seconds: sorted[sorted.len() / 2], samples })
}

/// Single-threaded grid evaluation time of `op`.
pub fn bench_grid(op: &QuasiInterpolant, grid: &Grid, reps: usize) -> Result<BenchResult> {
    bench(reps, || op.evaluate_grid_sequential(grid).map(|_| ()))
}
