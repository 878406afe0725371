//! Stochastic gradient training with early stopping.
//!
//! One document is one update. After every `eval_interval` updates the
//! model is scored on the development split and the best-scoring
//! parameters are kept; training stops once no improvement has been seen
//! for `patience_updates` updates, or after `max_epochs` passes over the
//! training split.

use super::forward::sample_dropout_plan;
use super::grad::document_loss_and_grads;
use super::{Dims, EmbeddingSet, ModelGrads, ModelParams, ModelVariant};
use crate::candidates::WeakDocument;
use crate::corpus::EntityId;
use crate::error::{Error, Result};
use crate::eval::{micro_f1, model_outcomes};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Required gap between the best positive and best negative score.
    pub margin: f64,
    pub learning_rate: f64,
    /// Dropout rate on the mention representation, zero to disable.
    pub dropout: f64,
    /// Updates between development evaluations.
    pub eval_interval: usize,
    /// Stop after this many updates without a development improvement.
    pub patience_updates: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 0.1,
            learning_rate: 1e-4,
            dropout: 0.3,
            eval_interval: 2000,
            patience_updates: 50_000,
            max_epochs: 50,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            problems.push("margin must be finite and nonnegative".to_string());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            problems.push("learning_rate must be finite and positive".to_string());
        }
        if !(self.dropout.is_finite() && (0.0..1.0).contains(&self.dropout)) {
            problems.push("dropout must lie in [0, 1)".to_string());
        }
        for (name, v) in [
            ("eval_interval", self.eval_interval),
            ("patience_updates", self.patience_updates),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// One development evaluation during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub update: usize,
    /// Mean hinge loss over the updates since the previous row.
    pub train_loss: f64,
    pub dev_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Parameters from the best development evaluation.
    pub params: ModelParams<F>,
    pub best_dev_f1: f64,
    /// Update count at which the best parameters were taken (zero means
    /// the untrained initialization was never beaten).
    pub best_update: usize,
    pub total_updates: usize,
    pub log: Vec<TrainLogRow>,
}

/// Trains a model of the given shape on weakly labeled documents.
pub fn train<F: Scalar>(
    train_docs: &[WeakDocument<F>],
    dev_docs: &[WeakDocument<F>],
    emb: &EmbeddingSet<'_, F>,
    dims: Dims,
    lambda_c: F,
    variant: ModelVariant,
    cfg: &TrainConfig,
    in_kb: &(impl Fn(&EntityId) -> bool + Sync),
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    dims.validate()?;
    if train_docs.is_empty() {
        return Err(Error::Invalid("training split is empty".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(dims, lambda_c, &mut rng);
    params.validate(Some(emb.words), Some(emb.entities))?;

    let dev_score = |p: &ModelParams<F>| -> f64 {
        micro_f1(&model_outcomes(dev_docs, emb, p, variant, in_kb)).f1
    };
    let mut best_params = params.clone();
    let mut best_f1 = dev_score(&params);
    let mut best_update = 0usize;

    let margin = F::lit(cfg.margin);
    let rate = F::lit(cfg.learning_rate);
    let mut updates = 0usize;
    let mut loss_sum = 0.0f64;
    let mut loss_count = 0usize;
    let mut log = Vec::new();
    let mut grads = ModelGrads::zeros(&dims);
    let mut order: Vec<usize> = (0..train_docs.len()).collect();

    'epochs: for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for &di in &order {
            let doc = &train_docs[di];
            let plan = (cfg.dropout > 0.0).then(|| {
                sample_dropout_plan(cfg.dropout, doc.mentions.len(), dims.attention_dim, &mut rng)
            });
            grads.clear();
            let loss = document_loss_and_grads(
                doc,
                emb,
                &params,
                variant,
                plan.as_ref(),
                margin,
                &mut grads,
            );
            updates += 1;
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::Diverged { update: updates as u64 });
            }
            loss_sum += loss;
            loss_count += 1;
            params.sgd_step(rate, &grads);

            if updates % cfg.eval_interval == 0 {
                let f1 = dev_score(&params);
                log.push(TrainLogRow {
                    update: updates,
                    train_loss: loss_sum / loss_count as f64,
                    dev_f1: f1,
                });
                loss_sum = 0.0;
                loss_count = 0;
                if f1 > best_f1 {
                    best_f1 = f1;
                    best_params = params.clone();
                    best_update = updates;
                }
                if updates - best_update >= cfg.patience_updates {
                    break 'epochs;
                }
            }
        }
    }

    Ok(TrainOutcome { params: best_params, best_dev_f1: best_f1, best_update, total_updates: updates, log })
}

/// Writes the evaluation log as a small CSV: update, mean train loss,
/// development F1.
pub fn write_training_log(path: &Path, log: &[TrainLogRow]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(b"update,train_loss,dev_f1\n");
    for row in log {
        writeln!(out, "{},{},{}", row.update, row.train_loss, row.dev_f1)
            .expect("write to vec cannot fail");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
