//! Loss, optimizers, gradient verification and the training loop.

pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use gradcheck::{gradcheck, jitter_params, GradcheckOptions, GradcheckReport, LayerGradReport};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use optim::{LrSchedule, Optimizer, OptimizerConfig, OptimizerKind};
pub use trainer::{
    evaluate, train, train_step, Divergence, EpochRecord, EvalResult, MetricRow, MetricsWriter, TrainConfig,
    TrainReport, METRICS_HEADER,
};
