use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{normalize, ImageBuffer, Preprocess};
use crate::error::{Error, Result};
use crate::model::ModelGraph;

pub const DEFAULT_BUDGET_SECONDS: f64 = 1.0;
pub const DEFAULT_WARMUP: usize = 10;
pub const DEFAULT_ITERATIONS: usize = 100;

/// Per-call wall-clock seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub iterations: usize,
    pub mean: f64,
    pub p95: f64,
    pub max: f64,
    pub budget: f64,
    pub within_budget: bool,
}

impl LatencyStats {
    /// Summarises raw timings. p95 uses the nearest-rank definition.
    pub fn from_samples(times: &[f64], budget: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::config("latency benchmark needs at least one iteration"));
        }
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Ok(LatencyStats {
            iterations: n,
            mean,
            p95: sorted[rank - 1],
            max: sorted[n - 1],
            budget,
            within_budget: mean < budget,
        })
    }
}

/// Times `run` `iterations` times after `warmup` untimed calls.
pub fn benchmark(
    mut run: impl FnMut() -> Result<()>,
    warmup: usize,
    iterations: usize,
    budget: f64,
) -> Result<LatencyStats> {
    for _ in 0..warmup {
        run()?;
    }
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        run()?;
        times.push(t.elapsed().as_secs_f64());
    }
    LatencyStats::from_samples(&times, budget)
}

/// Single-image prediction latency: preprocessing from the decoded source
/// image plus one batch-1 forward pass.
pub fn benchmark_latency(
    model: &ModelGraph,
    image: &ImageBuffer,
    preprocess: &Preprocess,
    warmup: usize,
    iterations: usize,
    budget: f64,
) -> Result<LatencyStats> {
    benchmark(
        || {
            let x = normalize(&preprocess.apply(image)?);
            std::hint::black_box(model.forward(&x)?);
            Ok(())
        },
        warmup,
        iterations,
        budget,
    )
}
