//! Transformer-encoder weak learner.

mod config;
pub mod gradcheck;
mod model;
mod optim;
mod params;
mod train;

pub use config::{HeadInit, OptimizerConfig, TransformerConfig};
pub use gradcheck::{analytic_gradient, gradient_check, GradientCheck};
pub use model::Transformer;
pub use optim::{AdamW, LinearSchedule};
pub use params::{tensor_specs, LayerParams, Params, TensorSpec};
pub use train::{
    least_squares_loss, objective_loss, train, train_least_squares, LossVariant, Objective,
    TrainOptions, TrainReport,
};
