//! Loss and hand-derived gradients.
//!
//! The training objective per document sums, over mentions that have both
//! positive and negative candidates, a hinge on the gap between the best
//! negative and the best positive combined score. Gradients flow only
//! through the achieving candidates of each max (first index on ties) and
//! are derived here by hand, with a central finite-difference checker and
//! a kink detector to keep the checks honest near non-differentiable
//! points.

use super::forward::{forward_document, DocForward, DropoutPlan};
use super::{EmbeddingSet, ModelGrads, ModelParams, ModelVariant, PARAM_GROUPS};
use crate::candidates::WeakDocument;
use crate::scalar::{argmax, softmax_backward, Scalar};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;

/// One mention's hinge term: max(0, margin + best negative - best
/// positive). Zero when either side is empty.
fn hinge_term<F: Scalar>(pos: &[F], neg: &[F], margin: F) -> F {
    match (max_of(pos), max_of(neg)) {
        (Some(bp), Some(bn)) => {
            let t = margin + bn - bp;
            if !t.is_finite() {
                // IEEE max would silently swallow a NaN score; surface it
                // so the trainer can report divergence
                return t;
            }
            t.max(F::zero())
        }
        _ => F::zero(),
    }
}

fn max_of<F: Scalar>(values: &[F]) -> Option<F> {
    values.iter().copied().reduce(F::max)
}

/// Document loss given a completed forward pass.
pub fn hinge_loss<F: Scalar>(fwd: &DocForward<'_, F>, margin: F) -> F {
    fwd.mentions
        .iter()
        .map(|mf| {
            let scores: Vec<F> = mf.cands.iter().map(|c| c.combined).collect();
            hinge_term(&scores[..mf.n_pos], &scores[mf.n_pos..], margin)
        })
        .sum()
}

/// Convenience: forward pass plus loss, no gradients.
pub fn document_loss<F: Scalar>(
    doc: &WeakDocument<F>,
    emb: &EmbeddingSet<'_, F>,
    params: &ModelParams<F>,
    variant: ModelVariant,
    dropout: Option<&DropoutPlan>,
    margin: F,
) -> F {
    hinge_loss(&forward_document(doc, emb, params, variant, dropout), margin)
}

/// Forward and backward in one call, accumulating into `grads` and
/// returning the loss.
pub fn document_loss_and_grads<F: Scalar>(
    doc: &WeakDocument<F>,
    emb: &EmbeddingSet<'_, F>,
    params: &ModelParams<F>,
    variant: ModelVariant,
    dropout: Option<&DropoutPlan>,
    margin: F,
    grads: &mut ModelGrads<F>,
) -> F {
    let fwd = forward_document(doc, emb, params, variant, dropout);
    backward_document(doc, &fwd, emb, params, variant, dropout, margin, grads)
}

/// Backpropagates the document loss into `grads` (accumulating) and
/// returns the loss. `dropout` must be the same plan the forward pass ran
/// with.
pub fn backward_document<F: Scalar>(
    doc: &WeakDocument<F>,
    fwd: &DocForward<'_, F>,
    emb: &EmbeddingSet<'_, F>,
    params: &ModelParams<F>,
    variant: ModelVariant,
    dropout: Option<&DropoutPlan>,
    margin: F,
    grads: &mut ModelGrads<F>,
) -> F {
    let d = &params.dims;
    let mut loss = F::zero();
    // gradient on each mention's h, filled by the attention backward
    let mut dh: Vec<Vec<F>> = fwd.mentions.iter().map(|_| Vec::new()).collect();

    for (i, mf) in fwd.mentions.iter().enumerate() {
        let scores: Vec<F> = mf.cands.iter().map(|c| c.combined).collect();
        let (pos, neg) = scores.split_at(mf.n_pos);
        let term = hinge_term(pos, neg, margin);
        loss += term;
        if term <= F::zero() {
            continue;
        }
        let bp = argmax(pos).expect("nonempty positives");
        let bn = mf.n_pos + argmax(neg).expect("nonempty negatives");

        // d loss / d s_vec and / d alpha accumulate over both achieving
        // candidates before their shared softmax backward passes
        let mut ds_vec = vec![F::zero(); d.entity_dim];
        let mut dalpha = vec![F::zero(); mf.neighbor_ids.len()];

        for (ci, g) in [(bn, F::one()), (bp, -F::one())] {
            let cf = &mf.cands[ci];
            let xe = mf.cand_vecs[ci];

            // combiner: s_hat = w2 . tanh(w1 [star, p] + b1) + b2
            let p_val = all_candidates(doc, i)[ci].p;
            let mut dstar = F::zero();
            for k in 0..d.f_hidden {
                let a = cf.f_act[k];
                grads.w2[k] += g * a;
                let dt = g * params.w2[k] * (F::one() - a * a);
                grads.w1[k * 2] += dt * cf.star;
                grads.w1[k * 2 + 1] += dt * p_val;
                grads.b1[k] += dt;
                dstar += dt * params.w1[k * 2];
            }
            grads.b2 += g;

            // local score phi = sum_k xe_k * b_k * s_vec_k
            if variant != ModelVariant::NoLocal {
                for k in 0..d.entity_dim {
                    grads.b_diag[k] += dstar * xe[k] * mf.s_vec[k];
                    ds_vec[k] += dstar * xe[k] * params.b_diag[k];
                }
            }

            // coherence sum_t alpha_t * m_t, m_t maxed over neighbor
            // positives
            for (t, &j) in mf.neighbor_ids.iter().enumerate() {
                dalpha[t] += dstar * cf.m[t];
                let dm = dstar * mf.alpha[t];
                let winner = &doc.mentions[j].candidates.positives[cf.m_achiever[t]];
                let xj = emb.entities.lookup(winner.entity.as_str());
                for k in 0..d.entity_dim {
                    grads.r_diag[k] += dm * xe[k] * xj[k];
                }
            }
        }

        // word attention: s_vec = sum_t beta_t x_{w_t}, beta = softmax(u)
        if variant != ModelVariant::NoLocal && !mf.topk.is_empty() {
            let dbeta: Vec<F> = mf
                .topk
                .iter()
                .map(|&w| mf.ctx_vecs[w].iter().zip(&ds_vec).map(|(&x, &dv)| x * dv).sum())
                .collect();
            let du = softmax_backward(&mf.beta, &dbeta);
            for (t, &w) in mf.topk.iter().enumerate() {
                let xa = mf.cand_vecs[mf.u_achiever[w]];
                let xw = mf.ctx_vecs[w];
                for k in 0..d.entity_dim {
                    grads.c_diag[k] += du[t] * xa[k] * xw[k];
                }
            }
        }

        // mention attention: alpha = softmax(h_i A h_j / sqrt(d_c))
        if variant != ModelVariant::NoAttention && !mf.neighbor_ids.is_empty() {
            let dlogits = softmax_backward(&mf.alpha, &dalpha);
            let scale = F::one() / F::lit((d.attention_dim as f64).sqrt());
            for (t, &j) in mf.neighbor_ids.iter().enumerate() {
                let dl = dlogits[t] * scale;
                let hi = &mf.h;
                let hj = &fwd.mentions[j].h;
                for k in 0..d.attention_dim {
                    grads.a_diag[k] += dl * hi[k] * hj[k];
                }
                accumulate(&mut dh[i], d.attention_dim, |k| dl * params.a_diag[k] * hj[k]);
                accumulate(&mut dh[j], d.attention_dim, |k| dl * params.a_diag[k] * hi[k]);
            }
        }
    }

    // encoder: h = dropout(tanh(w_h z + b_h))
    for (i, mf) in fwd.mentions.iter().enumerate() {
        if dh[i].is_empty() {
            continue;
        }
        let scale = dropout.map(|p| F::lit(1.0 / (1.0 - p.rate)));
        for k in 0..d.attention_dim {
            let dtanh = match (dropout, scale) {
                (Some(plan), Some(s)) => {
                    if plan.keep[i][k] {
                        dh[i][k] * s
                    } else {
                        F::zero()
                    }
                }
                _ => dh[i][k],
            };
            let t = mf.tanh_pre[k];
            let dpre = dtanh * (F::one() - t * t);
            grads.b_h[k] += dpre;
            let row = &mut grads.w_h[k * 2 * d.word_dim..(k + 1) * 2 * d.word_dim];
            for (wv, &zv) in row.iter_mut().zip(&mf.z) {
                *wv += dpre * zv;
            }
        }
    }

    loss
}

fn all_candidates<'a, F>(
    doc: &'a WeakDocument<F>,
    i: usize,
) -> Vec<&'a crate::candidates::Candidate<F>> {
    doc.mentions[i].candidates.iter().collect()
}

fn accumulate<F: Scalar>(acc: &mut Vec<F>, len: usize, f: impl Fn(usize) -> F) {
    if acc.is_empty() {
        acc.resize(len, F::zero());
    }
    for (k, slot) in acc.iter_mut().enumerate() {
        *slot += f(k);
    }
}

/// Smallest distance to a decision switch anywhere in the document's loss:
/// hinge activations, the positive/negative argmaxes, the per-neighbor
/// compatibility maxes of the achieving candidates, the per-word relevance
/// maxes, and the top-k membership boundary. Finite-difference checks are
/// only trustworthy when this is comfortably larger than the probe step.
pub fn kink_margin<F: Scalar>(
    doc: &WeakDocument<F>,
    fwd: &DocForward<'_, F>,
    params: &ModelParams<F>,
    emb: &EmbeddingSet<'_, F>,
    margin: F,
) -> F {
    let mut min_gap = F::infinity();
    let mut note = |gap: F| {
        if gap < min_gap {
            min_gap = gap;
        }
    };

    for mf in &fwd.mentions {
        if mf.n_pos == 0 || mf.cands.len() == mf.n_pos {
            continue;
        }
        let scores: Vec<F> = mf.cands.iter().map(|c| c.combined).collect();
        let (pos, neg) = scores.split_at(mf.n_pos);
        let bp = max_of(pos).expect("nonempty");
        let bn = max_of(neg).expect("nonempty");
        note((margin + bn - bp).abs());
        note(runner_up_gap(pos));
        note(runner_up_gap(neg));

        let bp_idx = argmax(pos).expect("nonempty");
        let bn_idx = mf.n_pos + argmax(neg).expect("nonempty");
        for ci in [bp_idx, bn_idx] {
            let xe = mf.cand_vecs[ci];
            for &j in &mf.neighbor_ids {
                let compats: Vec<F> = doc.mentions[j]
                    .candidates
                    .positives
                    .iter()
                    .map(|c| {
                        super::forward::pairwise_compat(
                            xe,
                            emb.entities.lookup(c.entity.as_str()),
                            &params.r_diag,
                        )
                    })
                    .collect();
                note(runner_up_gap(&compats));
            }
        }

        // relevance max per context word, over the candidate set
        for xw in &mf.ctx_vecs {
            let products: Vec<F> = mf
                .cand_vecs
                .iter()
                .map(|xe| {
                    xe.iter().zip(params.c_diag.iter()).zip(xw.iter()).map(|((&a, &c), &b)| a * c * b).sum()
                })
                .collect();
            note(runner_up_gap(&products));
        }

        // top-k membership boundary
        if mf.ctx_vecs.len() > mf.topk.len() && !mf.topk.is_empty() {
            let mut sorted: Vec<F> = mf.u.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            note(sorted[mf.topk.len() - 1] - sorted[mf.topk.len()]);
        }
    }
    min_gap
}

fn runner_up_gap<F: Scalar>(values: &[F]) -> F {
    if values.len() < 2 {
        return F::infinity();
    }
    let mut best = F::neg_infinity();
    let mut second = F::neg_infinity();
    for &v in values {
        if v > best {
            second = best;
            best = v;
        } else if v > second {
            second = v;
        }
    }
    best - second
}

/// Worst relative disagreement between analytic and central
/// finite-difference gradients for one parameter group.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub group: &'static str,
    pub checked: usize,
    pub max_rel_err: f64,
}

/// Verifies every parameter group of the analytic gradient against central
/// finite differences on one document, probing up to `per_group` randomly
/// chosen coordinates per group. The caller is responsible for screening
/// kinks (see [`kink_margin`]) first.
pub fn finite_difference_check<F: Scalar>(
    doc: &WeakDocument<F>,
    emb: &EmbeddingSet<'_, F>,
    params: &ModelParams<F>,
    variant: ModelVariant,
    dropout: Option<&DropoutPlan>,
    margin: F,
    step: f64,
    per_group: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<GradCheck> {
    let mut grads = ModelGrads::zeros(&params.dims);
    let fwd = forward_document(doc, emb, params, variant, dropout);
    backward_document(doc, &fwd, emb, params, variant, dropout, margin, &mut grads);

    let mut results = Vec::with_capacity(PARAM_GROUPS.len());
    for group in PARAM_GROUPS {
        let len = params.group(group).len();
        let mut indices: Vec<usize> = (0..len).collect();
        if len > per_group {
            indices.shuffle(rng);
            indices.truncate(per_group);
        }
        let mut max_rel = 0.0f64;
        for &idx in &indices {
            let mut probe = params.clone();
            let h = F::lit(step);
            probe.group_mut(group)[idx] = params.group(group)[idx] + h;
            let up = document_loss(doc, emb, &probe, variant, dropout, margin).to_f64_lossy();
            probe.group_mut(group)[idx] = params.group(group)[idx] - h;
            let down = document_loss(doc, emb, &probe, variant, dropout, margin).to_f64_lossy();
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads.group(group)[idx].to_f64_lossy();
            let diff = (analytic - numeric).abs();
            let rel = if diff <= 1e-8 { 0.0 } else { diff / analytic.abs().max(numeric.abs()) };
            if rel > max_rel {
                max_rel = rel;
            }
        }
        results.push(GradCheck { group, checked: indices.len(), max_rel_err: max_rel });
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{Candidate, CandidateSet, WeakMention};
    use crate::corpus::EntityId;
    use crate::model::forward::sample_dropout_plan;
    use crate::model::Dims;
    use crate::priors::EmbeddingTable;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    #[test]
    fn hinge_term_examples() {
        assert_relative_eq!(hinge_term::<f64>(&[2.0], &[1.5], 0.1), 0.0);
        assert_relative_eq!(hinge_term::<f64>(&[1.0], &[1.0], 0.1), 0.1, epsilon = 1e-12);
        assert_relative_eq!(hinge_term::<f64>(&[0.0], &[], 0.1), 0.0);
        assert_relative_eq!(hinge_term::<f64>(&[0.2, 0.9], &[0.85, 0.3], 0.1), 0.05, epsilon = 1e-12);
    }

    // a small random world: three mentions, mixed candidate counts,
    // several context words so the word attention is nontrivial
    fn random_world(
        rng: &mut ChaCha12Rng,
    ) -> (WeakDocument<f64>, EmbeddingTable<f64>, EmbeddingTable<f64>) {
        let dw = 3;
        let de = 3;
        let mut words = EmbeddingTable::<f64>::new(dw);
        let vocab: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
        for w in &vocab {
            let v: Vec<f64> = (0..dw).map(|_| rng.gen_range(-1.0..1.0)).collect();
            words.insert(w, &v).unwrap();
        }
        let mut ents = EmbeddingTable::<f64>::new(de);
        let names: Vec<String> = (0..10).map(|i| format!("E{i}")).collect();
        for nm in &names {
            let v: Vec<f64> = (0..de).map(|_| rng.gen_range(-1.0..1.0)).collect();
            ents.insert(nm, &v).unwrap();
        }
        let mut next_entity = 0usize;
        let mut mention = |rng: &mut ChaCha12Rng, npos: usize, nneg: usize| -> WeakMention<f64> {
            let mut mk = |rank: usize| {
                let c = Candidate {
                    entity: EntityId::new(names[next_entity % names.len()].clone()),
                    p: rng.gen_range(0.05..0.95),
                    q_log: rng.gen_range(-1.0..1.0),
                    r: 0.0,
                    sim: rng.gen_range(0.0..1.0),
                    s_c: rng.gen_range(0.0..0.5),
                    first_stage_rank: rank,
                };
                next_entity += 1;
                c
            };
            let positives: Vec<_> = (0..npos).map(&mut mk).collect();
            let negatives: Vec<_> = (npos..npos + nneg).map(&mut mk).collect();
            let ctx = |rng: &mut ChaCha12Rng, n: usize| -> Vec<String> {
                (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()).collect()
            };
            WeakMention {
                surface: format!("s{}", rng.gen_range(0..100)),
                left: ctx(rng, 3),
                right: ctx(rng, 2),
                gold: None,
                candidates: CandidateSet { positives, negatives },
            }
        };
        let doc = WeakDocument {
            doc_id: "g".into(),
            mentions: vec![
                mention(rng, 2, 2),
                mention(rng, 1, 2),
                mention(rng, 2, 1),
            ],
        };
        (doc, words, ents)
    }

    fn random_params(rng: &mut ChaCha12Rng) -> ModelParams<f64> {
        let dims =
            Dims { word_dim: 3, entity_dim: 3, attention_dim: 4, f_hidden: 5, local_top_k: 3 };
        let mut p = ModelParams::init(dims, 1.0, rng);
        // move the diagonals off their all-ones init so their gradients
        // are exercised at a generic point
        for g in ["r_diag", "a_diag", "b_diag", "c_diag"] {
            for v in p.group_mut(g) {
                *v = rng.gen_range(0.5..1.5);
            }
        }
        p
    }

    #[test]
    fn loss_is_nonnegative_and_zero_means_margin_satisfied() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..20 {
            let (doc, words, ents) = random_world(&mut rng);
            let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &ents };
            let params = random_params(&mut rng);
            let fwd = forward_document(&doc, &emb, &params, ModelVariant::Full, None);
            let loss = hinge_loss(&fwd, 0.1);
            assert!(loss >= 0.0);
            if loss == 0.0 {
                for mf in &fwd.mentions {
                    let scores: Vec<f64> = mf.cands.iter().map(|c| c.combined).collect();
                    let (pos, neg) = scores.split_at(mf.n_pos);
                    if let (Some(bp), Some(bn)) = (max_of(pos), max_of(neg)) {
                        assert!(bp >= bn + 0.1 - 1e-12);
                    }
                }
            }
        }
    }

    fn check_variant(variant: ModelVariant, with_dropout: bool, seed: u64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 5 && attempts < 200 {
            attempts += 1;
            let (doc, words, ents) = random_world(&mut rng);
            let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &ents };
            let params = random_params(&mut rng);
            let plan = with_dropout.then(|| {
                sample_dropout_plan(0.4, doc.mentions.len(), params.dims.attention_dim, &mut rng)
            });
            let fwd = forward_document(&doc, &emb, &params, variant, plan.as_ref());
            if hinge_loss(&fwd, 0.1) == 0.0 {
                continue; // no gradient anywhere, nothing to compare
            }
            if kink_margin(&doc, &fwd, &params, &emb, 0.1) < 1e-4 {
                continue;
            }
            accepted += 1;
            let checks = finite_difference_check(
                &doc,
                &emb,
                &params,
                variant,
                plan.as_ref(),
                0.1,
                1e-5,
                8,
                &mut rng,
            );
            for c in checks {
                assert!(
                    c.max_rel_err < 1e-4,
                    "{variant} group {} rel err {}",
                    c.group,
                    c.max_rel_err
                );
            }
        }
        assert_eq!(accepted, 5, "could not find enough clean instances");
    }

    #[test]
    fn gradients_match_finite_differences_full() {
        check_variant(ModelVariant::Full, false, 101);
    }

    #[test]
    fn gradients_match_finite_differences_full_with_dropout() {
        check_variant(ModelVariant::Full, true, 103);
    }

    #[test]
    fn gradients_match_finite_differences_no_local() {
        check_variant(ModelVariant::NoLocal, false, 105);
    }

    #[test]
    fn gradients_match_finite_differences_no_attention() {
        check_variant(ModelVariant::NoAttention, false, 107);
    }

    #[test]
    fn backward_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let (doc, words, ents) = random_world(&mut rng);
        let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &ents };
        let params = random_params(&mut rng);
        let run = || {
            let fwd = forward_document(&doc, &emb, &params, ModelVariant::Full, None);
            let mut grads = ModelGrads::zeros(&params.dims);
            let loss =
                backward_document(&doc, &fwd, &emb, &params, ModelVariant::Full, None, 0.1, &mut grads);
            (loss, grads.r_diag.clone(), grads.w_h.clone())
        };
        let (l1, r1, w1) = run();
        let (l2, r2, w2) = run();
        assert_eq!(l1, l2);
        assert_eq!(r1, r2);
        assert_eq!(w1, w2);
    }

    #[test]
    fn no_attention_leaves_attention_params_untouched() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let (doc, words, ents) = random_world(&mut rng);
        let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &ents };
        let params = random_params(&mut rng);
        let fwd = forward_document(&doc, &emb, &params, ModelVariant::NoAttention, None);
        let mut grads = ModelGrads::zeros(&params.dims);
        backward_document(
            &doc,
            &fwd,
            &emb,
            &params,
            ModelVariant::NoAttention,
            None,
            0.1,
            &mut grads,
        );
        assert!(grads.a_diag.iter().all(|&v| v == 0.0));
        assert!(grads.w_h.iter().all(|&v| v == 0.0));
        assert!(grads.b_h.iter().all(|&v| v == 0.0));
    }
}
