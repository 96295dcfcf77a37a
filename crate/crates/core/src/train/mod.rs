//! Loss, optimizers, the training loop, metrics, latency and ensembles.

mod ensemble;
mod latency;
mod loss;
mod metrics;
mod optim;
mod trainer;

pub use ensemble::{combine_probabilities, ensemble_predict};
pub use latency::{benchmark, benchmark_latency, LatencyStats, DEFAULT_BUDGET_SECONDS, DEFAULT_ITERATIONS, DEFAULT_WARMUP};
pub use loss::{cross_entropy, cross_entropy_grad, PROB_FLOOR};
pub use metrics::{evaluate, evaluate_with, ClassScore, ConfusionMatrix, EvalReport};
pub use optim::{OptimizerKind, OptimizerState, TrainConfig};
pub use trainer::{accuracy, shared_drivers, train, train_with, EpochRecord, TrainHistory};
