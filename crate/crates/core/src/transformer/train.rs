//! Mini-batch training of a [`Transformer`] against boosting targets
//! (least squares, optionally importance-weighted) or class labels.

use rand::seq::SliceRandom;

use super::config::OptimizerConfig;
use super::model::Transformer;
use super::optim::{AdamW, LinearSchedule};
use super::params::Params;
use crate::error::{domain, Error, Result};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

/// What the learner is fitted to.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `Σ_i c_i ‖g(x_i) − w_i‖²` with `c_i = 1` when `sample_scale` is `None`.
    LeastSquares {
        targets: &'a [Vec<f64>],
        sample_scale: Option<&'a [f64]>,
    },
    /// Softmax cross-entropy against 0-based labels.
    CrossEntropy { labels: &'a [usize] },
}

/// Weighting of the least-squares loss.
#[derive(Debug, Clone, Copy)]
pub enum LossVariant<'a> {
    Plain,
    /// `1 / (|D| · P_i)` per entry, where `probabilities[i]` is the sampling
    /// probability of the sample placed at entry `i`.
    ImportanceWeighted {
        probabilities: &'a [f64],
        dataset_size: usize,
    },
}

impl LossVariant<'_> {
    pub fn scales(&self, len: usize) -> Result<Option<Vec<f64>>> {
        match *self {
            LossVariant::Plain => Ok(None),
            LossVariant::ImportanceWeighted {
                probabilities,
                dataset_size,
            } => {
                if probabilities.len() != len {
                    return Err(domain("one sampling probability per entry is required"));
                }
                if dataset_size == 0 {
                    return Err(domain("dataset size must be positive"));
                }
                probabilities
                    .iter()
                    .map(|&p| {
                        if p > 0.0 && p.is_finite() {
                            Ok(1.0 / (dataset_size as f64 * p))
                        } else {
                            Err(domain(format!("cannot weight a sample with probability {p}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    pub seed: u64,
    /// Evaluate the full objective after every epoch and restore the best
    /// epoch (including the untrained start) at the end.
    pub keep_best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Objective before the first update, when `keep_best` is set.
    pub initial_loss: Option<f64>,
    /// Full objective per epoch with `keep_best`, else the summed minibatch
    /// losses seen during the epoch.
    pub epoch_losses: Vec<f64>,
    /// 0 = untrained start, `e` = after epoch `e`.
    pub best_epoch: usize,
    pub final_loss: f64,
}

impl Objective<'_> {
    fn len(&self) -> usize {
        match self {
            Objective::LeastSquares { targets, .. } => targets.len(),
            Objective::CrossEntropy { labels } => labels.len(),
        }
    }

    fn validate(&self, n: usize, classes: usize) -> Result<()> {
        if self.len() != n {
            return Err(domain(format!("{} inputs but {} targets", n, self.len())));
        }
        match self {
            Objective::LeastSquares {
                targets,
                sample_scale,
            } => {
                if let Some(t) = targets.iter().find(|t| t.len() != classes) {
                    return Err(domain(format!(
                        "target of dimension {} for a {classes}-class learner",
                        t.len()
                    )));
                }
                if let Some(s) = sample_scale {
                    if s.len() != n {
                        return Err(domain("one sample scale per input is required"));
                    }
                    if s.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                        return Err(domain("sample scales must be finite and non-negative"));
                    }
                }
            }
            Objective::CrossEntropy { labels } => {
                if labels.iter().any(|&z| z >= classes) {
                    return Err(domain("label out of range"));
                }
            }
        }
        Ok(())
    }

    /// Loss of sample `i` and, optionally, `∂loss/∂logits` scaled by `grad_scale`.
    fn sample_loss(&self, i: usize, logits: &[f64], grad: Option<(&mut Vec<f64>, f64)>) -> f64 {
        match self {
            Objective::LeastSquares {
                targets,
                sample_scale,
            } => {
                let c = sample_scale.map_or(1.0, |s| s[i]);
                let mut sq = 0.0;
                for (g, w) in logits.iter().zip(&targets[i]) {
                    sq += (g - w) * (g - w);
                }
                if let Some((out, k)) = grad {
                    out.clear();
                    out.extend(logits.iter().zip(&targets[i]).map(|(g, w)| 2.0 * c * (g - w) * k));
                }
                c * sq
            }
            Objective::CrossEntropy { labels } => {
                let z = labels[i];
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = logits.iter().map(|v| (v - max).exp()).sum();
                let log_norm = max + total.ln();
                if let Some((out, k)) = grad {
                    out.clear();
                    out.extend(logits.iter().enumerate().map(|(j, v)| {
                        let p = (v - log_norm).exp();
                        (p - if j == z { 1.0 } else { 0.0 }) * k
                    }));
                }
                log_norm - logits[z]
            }
        }
    }
}

/// Full objective of `model` over `inputs` (dropout off).
pub fn objective_loss<T: Scalar>(
    model: &Transformer<T>,
    inputs: &[Vec<u32>],
    objective: &Objective<'_>,
) -> Result<f64> {
    objective.validate(inputs.len(), model.config().num_classes)?;
    let mut total = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let logits = model.predict(x)?;
        total += objective.sample_loss(i, &logits, None);
    }
    Ok(total)
}

/// Least-squares objective `Σ c_i ‖g(x_i) − w_i‖²` under `variant`.
pub fn least_squares_loss<T: Scalar>(
    model: &Transformer<T>,
    inputs: &[Vec<u32>],
    targets: &[Vec<f64>],
    variant: LossVariant<'_>,
) -> Result<f64> {
    let scales = variant.scales(inputs.len())?;
    objective_loss(
        model,
        inputs,
        &Objective::LeastSquares {
            targets,
            sample_scale: scales.as_deref(),
        },
    )
}

/// Fits `model` to boosting targets, keeping the best epoch.
pub fn train_least_squares<T: Scalar>(
    model: &mut Transformer<T>,
    inputs: &[Vec<u32>],
    targets: &[Vec<f64>],
    variant: LossVariant<'_>,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<TrainReport> {
    let scales = variant.scales(inputs.len())?;
    let objective = Objective::LeastSquares {
        targets,
        sample_scale: scales.as_deref(),
    };
    train(
        model,
        inputs,
        &objective,
        opt,
        TrainOptions {
            seed,
            keep_best: true,
        },
        |_, _| Ok(()),
    )
}

/// Mini-batch AdamW over `opt.epochs` epochs. `on_epoch` sees the model after
/// each epoch (before any best-epoch restore).
pub fn train<T, F>(
    model: &mut Transformer<T>,
    inputs: &[Vec<u32>],
    objective: &Objective<'_>,
    opt: &OptimizerConfig,
    options: TrainOptions,
    mut on_epoch: F,
) -> Result<TrainReport>
where
    T: Scalar,
    F: FnMut(usize, &Transformer<T>) -> Result<()>,
{
    opt.validate()?;
    let n = inputs.len();
    if n == 0 {
        return Err(domain("cannot train on an empty dataset"));
    }
    objective.validate(n, model.config().num_classes)?;
    for x in inputs {
        model.validate_tokens(x)?;
    }

    let steps_per_epoch = n.div_ceil(opt.batch_size);
    let schedule = LinearSchedule::new(opt.epochs * steps_per_epoch, opt.warmup_fraction);
    let mut optimizer = AdamW::<T>::new(model.config(), opt);
    let mut grads = Params::<T>::zeros(model.config());
    let mut shuffle_rng = stream_rng(options.seed, 1);
    let mut dropout_rng = stream_rng(options.seed, 2);
    let use_dropout = model.config().dropout > 0.0;

    let initial_loss = if options.keep_best {
        Some(finite(objective_loss(model, inputs, objective)?, "initial loss")?)
    } else {
        None
    };
    let mut best: Option<(f64, usize, Transformer<T>)> =
        initial_loss.map(|l| (l, 0, model.clone()));

    let mut order: Vec<usize> = (0..n).collect();
    let mut dlogits = Vec::new();
    let mut dlogits_t: Vec<T> = Vec::new();
    let mut epoch_losses = Vec::with_capacity(opt.epochs);
    let mut step = 0usize;
    for epoch in 0..opt.epochs {
        if opt.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut running = 0.0;
        for batch in order.chunks(opt.batch_size) {
            grads.fill_zero();
            let inv_batch = 1.0 / batch.len() as f64;
            for &i in batch {
                let cache = if use_dropout {
                    model.forward_cached(&inputs[i], Some(&mut dropout_rng))?
                } else {
                    model.forward_cached(&inputs[i], None::<&mut rand_chacha::ChaCha8Rng>)?
                };
                let logits: Vec<f64> = cache.logits.iter().map(|v| v.as_f64()).collect();
                running += objective.sample_loss(i, &logits, Some((&mut dlogits, inv_batch)));
                dlogits_t.clear();
                dlogits_t.extend(dlogits.iter().map(|&v| T::from_f64(v)));
                model.backward(&cache, &dlogits_t, &mut grads);
            }
            let lr = opt.learning_rate * schedule.factor(step);
            optimizer.step(model.params_mut(), &grads, lr);
            step += 1;
        }
        if !model.params().all_finite() {
            return Err(Error::Numeric(format!("non-finite parameters after epoch {}", epoch + 1)));
        }
        let loss = if options.keep_best {
            objective_loss(model, inputs, objective)?
        } else {
            running
        };
        let loss = finite(loss, "training loss")?;
        epoch_losses.push(loss);
        if let Some((best_loss, best_epoch, best_model)) = best.as_mut() {
            if loss < *best_loss {
                *best_loss = loss;
                *best_epoch = epoch + 1;
                *best_model = model.clone();
            }
        }
        on_epoch(epoch, model)?;
    }

    let (final_loss, best_epoch) = match best {
        Some((loss, epoch, best_model)) => {
            *model = best_model;
            (loss, epoch)
        }
        None => (epoch_losses.last().copied().unwrap_or(0.0), opt.epochs),
    };
    Ok(TrainReport {
        initial_loss,
        epoch_losses,
        best_epoch,
        final_loss,
    })
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} is not finite")))
    }
}
