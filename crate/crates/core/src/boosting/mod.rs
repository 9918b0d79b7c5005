//! Multiclass boosting: loss, weights, line search and the boosting loop.

pub mod engine;
pub mod ensemble;
pub mod line_search;
pub mod loss;

pub use engine::{
    run_boost, BoostRun, BoostVariant, Booster, FitJob, Fitted, RoundMetrics, Trainer,
    TransformerTrainer,
};
pub use ensemble::{accuracy, argmax, Ensemble, EnsembleConfig, Stage, WeakLearner};
pub use line_search::{golden_section, LineSearch};
pub use loss::{
    compute_weights, directional_derivative, per_sample_loss, risk, Codeword, SampleWeights,
    EXPONENT_CLAMP,
};
