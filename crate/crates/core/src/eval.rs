//! Linking metrics and the multi-seed comparison harness.
//!
//! Scoring is restricted to mentions whose annotated target entity exists
//! in the knowledge base; mentions without a target, or whose target is
//! unknown, are ignored on both sides of the ratio. Precision counts
//! correct predictions among predictions made, recall counts them among
//! scorable mentions, and micro averaging pools the counts over all
//! documents before taking ratios.

use crate::candidates::WeakDocument;
use crate::corpus::EntityId;
use crate::error::{Error, Result};
use crate::model::forward::link_document;
use crate::model::train::{train, TrainConfig};
use crate::model::{Dims, EmbeddingSet, ModelParams, ModelVariant};
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One mention's prediction next to its annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub predicted: Option<EntityId>,
    pub gold: Option<EntityId>,
    pub gold_in_kb: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub scorable_mentions: usize,
    pub predicted_mentions: usize,
    pub correct: usize,
}

/// Micro-averaged precision, recall, and F1 over mentions with an in-base
/// annotation. Undefined ratios come out as zero rather than NaN.
pub fn micro_f1(outcomes: &[LinkOutcome]) -> F1Report {
    let mut scorable = 0usize;
    let mut predicted = 0usize;
    let mut correct = 0usize;
    for o in outcomes {
        let gold = match (&o.gold, o.gold_in_kb) {
            (Some(g), true) => g,
            _ => continue,
        };
        scorable += 1;
        if let Some(p) = &o.predicted {
            predicted += 1;
            if p == gold {
                correct += 1;
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(correct, predicted);
    let recall = ratio(correct, scorable);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    F1Report { precision, recall, f1, scorable_mentions: scorable, predicted_mentions: predicted, correct }
}

/// Links every document with the trained model and pairs the predictions
/// with the annotations.
pub fn model_outcomes<F: Scalar>(
    docs: &[WeakDocument<F>],
    emb: &EmbeddingSet<'_, F>,
    params: &ModelParams<F>,
    variant: ModelVariant,
    in_kb: &(impl Fn(&EntityId) -> bool + Sync),
) -> Vec<LinkOutcome> {
    docs.iter()
        .flat_map(|doc| {
            let preds = link_document(doc, emb, params, variant);
            doc.mentions
                .iter()
                .zip(preds)
                .map(|(m, predicted)| LinkOutcome {
                    predicted,
                    gold: m.gold.clone(),
                    gold_in_kb: m.gold.as_ref().map(|g| in_kb(g)).unwrap_or(false),
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Baseline that links each mention to the positive candidate with the
/// highest first-stage aggregate score, no trained model involved.
pub fn aggregate_outcomes<F: Scalar>(
    docs: &[WeakDocument<F>],
    in_kb: &impl Fn(&EntityId) -> bool,
) -> Vec<LinkOutcome> {
    select_outcomes(docs, in_kb, |m| {
        best_by(&m.candidates.positives, |c| c.s_c).map(|c| c.entity.clone())
    })
}

/// Baseline that links each mention to its most frequent candidate by
/// anchor prior, searching the full retained candidate set.
pub fn prior_outcomes<F: Scalar>(
    docs: &[WeakDocument<F>],
    in_kb: &impl Fn(&EntityId) -> bool,
) -> Vec<LinkOutcome> {
    select_outcomes(docs, in_kb, |m| {
        best_by(m.candidates.iter(), |c| c.p).map(|c| c.entity.clone())
    })
}

fn select_outcomes<F: Scalar>(
    docs: &[WeakDocument<F>],
    in_kb: &impl Fn(&EntityId) -> bool,
    pick: impl Fn(&crate::candidates::WeakMention<F>) -> Option<EntityId>,
) -> Vec<LinkOutcome> {
    docs.iter()
        .flat_map(|doc| doc.mentions.iter())
        .map(|m| LinkOutcome {
            predicted: pick(m),
            gold: m.gold.clone(),
            gold_in_kb: m.gold.as_ref().map(|g| in_kb(g)).unwrap_or(false),
        })
        .collect()
}

fn best_by<'a, F: Scalar, I>(
    cands: I,
    key: impl Fn(&crate::candidates::Candidate<F>) -> F,
) -> Option<&'a crate::candidates::Candidate<F>>
where
    I: IntoIterator<Item = &'a crate::candidates::Candidate<F>>,
{
    let mut best: Option<&crate::candidates::Candidate<F>> = None;
    for c in cands {
        let better = match best {
            None => true,
            Some(b) => {
                key(c) > key(b) || (key(c) == key(b) && c.entity < b.entity)
            }
        };
        if better {
            best = Some(c);
        }
    }
    best
}

/// Which score orders candidates when measuring retention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateRanking {
    /// first-stage aggregate score
    Aggregate,
    /// anchor prior alone
    Prior,
}

/// Fraction of scorable mentions whose annotated entity appears among the
/// top `k` retained candidates under the given ranking. Ties order by
/// entity id so the measure is stable across runs.
pub fn recall_at_k<F: Scalar>(
    docs: &[WeakDocument<F>],
    k: usize,
    ranking: CandidateRanking,
    in_kb: &impl Fn(&EntityId) -> bool,
) -> f64 {
    let mut scorable = 0usize;
    let mut hits = 0usize;
    for m in docs.iter().flat_map(|d| d.mentions.iter()) {
        let gold = match &m.gold {
            Some(g) if in_kb(g) => g,
            _ => continue,
        };
        scorable += 1;
        let mut ranked: Vec<&crate::candidates::Candidate<F>> = m.candidates.iter().collect();
        ranked.sort_by(|a, b| {
            let (ka, kb) = match ranking {
                CandidateRanking::Aggregate => (a.s_c, b.s_c),
                CandidateRanking::Prior => (a.p, b.p),
            };
            kb.partial_cmp(&ka)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.entity.cmp(&b.entity))
        });
        if ranked.iter().take(k).any(|c| &c.entity == gold) {
            hits += 1;
        }
    }
    if scorable == 0 {
        0.0
    } else {
        hits as f64 / scorable as f64
    }
}

/// [`recall_at_k`] at several cutoffs.
pub fn recall_curve<F: Scalar>(
    docs: &[WeakDocument<F>],
    ks: &[usize],
    ranking: CandidateRanking,
    in_kb: &(impl Fn(&EntityId) -> bool + Sync),
) -> Vec<(usize, f64)> {
    ks.iter().map(|&k| (k, recall_at_k(docs, k, ranking, in_kb))).collect()
}

/// Sample mean and the 1.96 sigma over root n half-width of its normal
/// confidence interval. A single observation gets half-width zero.
pub fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty(), "no observations");
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

/// One model configuration's test scores across seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub mean_f1: f64,
    pub half_width: f64,
    pub per_seed: Vec<f64>,
}

/// Trains each model variant once per seed and scores it on the test
/// split, with the untrained aggregate-score baseline for reference.
/// Rows come back in a fixed order: full, no-local, no-attention,
/// aggregate-only.
pub fn run_ablations<F: Scalar>(
    train_docs: &[WeakDocument<F>],
    dev_docs: &[WeakDocument<F>],
    test_docs: &[WeakDocument<F>],
    emb: &EmbeddingSet<'_, F>,
    dims: Dims,
    lambda_c: F,
    cfg: &TrainConfig,
    seeds: &[u64],
    in_kb: &(impl Fn(&EntityId) -> bool + Sync),
) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() {
        return Err(Error::Invalid("ablation needs at least one seed".into()));
    }
    let variants =
        [ModelVariant::Full, ModelVariant::NoLocal, ModelVariant::NoAttention];
    let jobs: Vec<(ModelVariant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let scores: Result<Vec<f64>> = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = seed;
            let outcome =
                train(train_docs, dev_docs, emb, dims, lambda_c, variant, &run_cfg, in_kb)?;
            let outs = model_outcomes(test_docs, emb, &outcome.params, variant, in_kb);
            Ok(micro_f1(&outs).f1)
        })
        .collect();
    let scores = scores?;

    let mut rows = Vec::new();
    for (vi, v) in variants.iter().enumerate() {
        let per_seed: Vec<f64> =
            scores[vi * seeds.len()..(vi + 1) * seeds.len()].to_vec();
        let (mean, half) = mean_and_half_width(&per_seed);
        rows.push(AblationRow {
            model: v.to_string(),
            mean_f1: mean,
            half_width: half,
            per_seed,
        });
    }
    let base = micro_f1(&aggregate_outcomes(test_docs, in_kb)).f1;
    rows.push(AblationRow {
        model: "aggregate-only".into(),
        mean_f1: base,
        half_width: 0.0,
        per_seed: vec![base; seeds.len()],
    });
    Ok(rows)
}

/// Test F1 of models trained on growing prefixes of the training split.
/// Sizes must be distinct, increasing, and within range.
pub fn learning_curve<F: Scalar>(
    sizes: &[usize],
    train_docs: &[WeakDocument<F>],
    dev_docs: &[WeakDocument<F>],
    test_docs: &[WeakDocument<F>],
    emb: &EmbeddingSet<'_, F>,
    dims: Dims,
    lambda_c: F,
    variant: ModelVariant,
    cfg: &TrainConfig,
    in_kb: &(impl Fn(&EntityId) -> bool + Sync),
) -> Result<Vec<(usize, f64)>> {
    if sizes.is_empty() {
        return Err(Error::Invalid("learning curve needs at least one size".into()));
    }
    for w in sizes.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Invalid(format!(
                "learning curve sizes must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if sizes[0] == 0 {
        return Err(Error::Invalid("learning curve sizes must be positive".into()));
    }
    if *sizes.last().unwrap() > train_docs.len() {
        return Err(Error::Invalid(format!(
            "learning curve size {} exceeds the {} training documents",
            sizes.last().unwrap(),
            train_docs.len()
        )));
    }
    sizes
        .par_iter()
        .map(|&n| {
            let outcome =
                train(&train_docs[..n], dev_docs, emb, dims, lambda_c, variant, cfg, in_kb)?;
            let outs = model_outcomes(test_docs, emb, &outcome.params, variant, in_kb);
            Ok((n, micro_f1(&outs).f1))
        })
        .collect()
}
