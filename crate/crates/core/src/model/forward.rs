//! Forward scoring: mention encoding, attention, pairwise compatibility,
//! the local context score, the combining network, and document linking.
//!
//! [`forward_document`] computes every candidate's score for one document
//! and keeps the intermediate values the backward pass needs.

use super::{EmbeddingSet, ModelParams, ModelVariant};
use crate::candidates::WeakDocument;
use crate::corpus::EntityId;
use crate::scalar::{dot, matvec, softmax, Scalar};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Per-mention dropout masks for one document, sampled once per training
/// step. `keep[i][k]` decides whether unit k of mention i's representation
/// survives; surviving units are rescaled by 1/(1-rate) so inference needs
/// no scaling.
#[derive(Debug, Clone)]
pub struct DropoutPlan {
    pub rate: f64,
    pub keep: Vec<Vec<bool>>,
}

pub fn sample_dropout_plan(
    rate: f64,
    num_mentions: usize,
    width: usize,
    rng: &mut ChaCha12Rng,
) -> DropoutPlan {
    let keep_prob = (1.0 - rate).clamp(0.0, 1.0);
    let keep = (0..num_mentions)
        .map(|_| (0..width).map(|_| rng.gen_bool(keep_prob)).collect())
        .collect();
    DropoutPlan { rate, keep }
}

fn apply_dropout<F: Scalar>(values: &[F], rate: f64, keep: &[bool]) -> Vec<F> {
    let scale = F::lit(1.0 / (1.0 - rate));
    values
        .iter()
        .zip(keep)
        .map(|(&v, &k)| if k { v * scale } else { F::zero() })
        .collect()
}

/// Encodes one mention: tanh of a linear map over the concatenated mean
/// word vector of the mention tokens and the mean word vector of its
/// context, with optional (inverted) dropout on the output.
pub fn h_vector<F: Scalar>(
    surface: &str,
    left: &[String],
    right: &[String],
    attention_words: &crate::priors::EmbeddingTable<F>,
    params: &ModelParams<F>,
    dropout: Option<(f64, &[bool])>,
) -> Vec<F> {
    let z = encoder_input(surface, left, right, attention_words);
    let tanh_pre = encode(&z, params);
    match dropout {
        Some((rate, keep)) => apply_dropout(&tanh_pre, rate, keep),
        None => tanh_pre,
    }
}

fn encoder_input<F: Scalar>(
    surface: &str,
    left: &[String],
    right: &[String],
    attention_words: &crate::priors::EmbeddingTable<F>,
) -> Vec<F> {
    let mut z = attention_words.sum_of(surface.split_whitespace());
    let n = surface.split_whitespace().count();
    if n > 0 {
        let inv = F::one() / F::lit(n as f64);
        for v in &mut z {
            *v *= inv;
        }
    }
    z.extend(attention_words.mean_of(left.iter().chain(right.iter())));
    z
}

fn encode<F: Scalar>(z: &[F], params: &ModelParams<F>) -> Vec<F> {
    let d = &params.dims;
    let mut pre = matvec(d.attention_dim, 2 * d.word_dim, &params.w_h, z);
    for (v, &b) in pre.iter_mut().zip(&params.b_h) {
        *v = (*v + b).tanh();
    }
    pre
}

/// Attention of mention `i` over the mentions listed in `others`: softmax
/// of the diagonal bilinear form between the representations, scaled by
/// 1/sqrt(width). Returns one weight per entry of `others`.
pub fn attention_weights<F: Scalar>(
    h_all: &[Vec<F>],
    i: usize,
    others: &[usize],
    a_diag: &[F],
) -> Vec<F> {
    softmax(&attention_logits(h_all, i, others, a_diag))
}

fn attention_logits<F: Scalar>(
    h_all: &[Vec<F>],
    i: usize,
    others: &[usize],
    a_diag: &[F],
) -> Vec<F> {
    let scale = F::one() / F::lit((a_diag.len() as f64).sqrt());
    others
        .iter()
        .map(|&j| {
            debug_assert_ne!(i, j);
            bilinear_diag(&h_all[i], a_diag, &h_all[j]) * scale
        })
        .collect()
}

fn bilinear_diag<F: Scalar>(x: &[F], diag: &[F], y: &[F]) -> F {
    x.iter().zip(diag).zip(y).map(|((&a, &d), &b)| a * d * b).sum()
}

/// Compatibility of two entities under the diagonal bilinear form; zero
/// whenever either embedding is the unknown (zero) vector. Symmetric.
pub fn pairwise_compat<F: Scalar>(x_i: &[F], x_j: &[F], r_diag: &[F]) -> F {
    bilinear_diag(x_i, r_diag, x_j)
}

/// Context-word relevance for one mention: each context word's best
/// diagonal-weighted dot product against the mention's candidate entities,
/// plus which candidate achieved it (first index on ties).
fn word_relevance<F: Scalar>(
    ctx_vecs: &[&[F]],
    cand_vecs: &[&[F]],
    c_diag: &[F],
) -> (Vec<F>, Vec<usize>) {
    let mut u = Vec::with_capacity(ctx_vecs.len());
    let mut achiever = Vec::with_capacity(ctx_vecs.len());
    for &xw in ctx_vecs {
        let mut best = F::neg_infinity();
        let mut best_idx = 0;
        for (idx, &xe) in cand_vecs.iter().enumerate() {
            let score = bilinear_diag(xe, c_diag, xw);
            if score > best {
                best = score;
                best_idx = idx;
            }
        }
        u.push(if cand_vecs.is_empty() { F::zero() } else { best });
        achiever.push(best_idx);
    }
    (u, achiever)
}

/// Indices of the `k` largest values, ties to the lower index, in
/// descending value order.
fn top_k_indices<F: Scalar>(values: &[F], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// The local context score of one entity: soft attention over the `top_k`
/// most relevant context words (relevance maxed over the mention's whole
/// candidate set), then a diagonal bilinear match between the entity and
/// the attention-weighted word sum. Empty context scores 0.
pub fn local_score<F: Scalar>(
    entity_vec: &[F],
    cand_vecs: &[&[F]],
    ctx_vecs: &[&[F]],
    b_diag: &[F],
    c_diag: &[F],
    top_k: usize,
) -> F {
    let (u, _) = word_relevance(ctx_vecs, cand_vecs, c_diag);
    let topk = top_k_indices(&u, top_k);
    if topk.is_empty() {
        return F::zero();
    }
    let beta = softmax(&topk.iter().map(|&w| u[w]).collect::<Vec<F>>());
    let mut s_vec = vec![F::zero(); b_diag.len()];
    for (&w, &bw) in topk.iter().zip(&beta) {
        for (s, &x) in s_vec.iter_mut().zip(ctx_vecs[w]) {
            *s += bw * x;
        }
    }
    bilinear_diag(entity_vec, &s_vec, b_diag)
}

/// Final candidate score: a one-hidden-layer tanh network over
/// [star score, prior], plus the fixed-weight generator score.
pub fn combined_score<F: Scalar>(star: F, p: F, s_c: F, params: &ModelParams<F>) -> F {
    let (s_hat, _) = combiner(star, p, params);
    s_hat + params.lambda_c * s_c
}

/// Returns the network output and the hidden activations.
fn combiner<F: Scalar>(star: F, p: F, params: &ModelParams<F>) -> (F, Vec<F>) {
    let d = &params.dims;
    let x = [star, p];
    let mut act = matvec(d.f_hidden, 2, &params.w1, &x);
    for (a, &b) in act.iter_mut().zip(&params.b1) {
        *a = (*a + b).tanh();
    }
    let out = dot(&params.w2, &act) + params.b2;
    (out, act)
}

/// Everything the backward pass needs about one scored candidate.
#[derive(Debug, Clone)]
pub struct CandForward<F> {
    pub phi: F,
    /// Per attended neighbor: best compatibility with the neighbor's
    /// positive candidates, and which positive achieved it.
    pub m: Vec<F>,
    pub m_achiever: Vec<usize>,
    pub star: F,
    pub f_act: Vec<F>,
    pub s_hat: F,
    pub combined: F,
}

/// Forward state for one mention.
#[derive(Debug)]
pub struct MentionForward<'a, F> {
    /// Encoder input (mention mean ++ context mean).
    pub z: Vec<F>,
    /// Encoder output before dropout.
    pub tanh_pre: Vec<F>,
    /// Representation used by the attention (after dropout, if any).
    pub h: Vec<F>,
    /// Mentions this one attends over: every other mention with at least
    /// one positive candidate.
    pub neighbor_ids: Vec<usize>,
    pub logits: Vec<F>,
    pub alpha: Vec<F>,
    /// Candidate entity embeddings, positives first then negatives.
    pub cand_vecs: Vec<&'a [F]>,
    /// Context word embeddings (left then right tokens).
    pub ctx_vecs: Vec<&'a [F]>,
    /// Word relevance over the full context, its achieving candidate, the
    /// selected top-k word indices, and their attention weights.
    pub u: Vec<F>,
    pub u_achiever: Vec<usize>,
    pub topk: Vec<usize>,
    pub beta: Vec<F>,
    /// Attention-weighted word sum (entity_dim).
    pub s_vec: Vec<F>,
    pub cands: Vec<CandForward<F>>,
    pub n_pos: usize,
}

/// Forward state for a whole document.
#[derive(Debug)]
pub struct DocForward<'a, F> {
    pub mentions: Vec<MentionForward<'a, F>>,
}

/// Scores every candidate of every mention. Pass a [`DropoutPlan`] during
/// training; `None` means inference (no dropout).
pub fn forward_document<'a, F: Scalar>(
    doc: &WeakDocument<F>,
    emb: &EmbeddingSet<'a, F>,
    params: &ModelParams<F>,
    variant: ModelVariant,
    dropout: Option<&DropoutPlan>,
) -> DocForward<'a, F> {
    let d = &params.dims;
    let n = doc.mentions.len();

    // mention representations
    let mut z_all = Vec::with_capacity(n);
    let mut tanh_all = Vec::with_capacity(n);
    let mut h_all = Vec::with_capacity(n);
    for (i, m) in doc.mentions.iter().enumerate() {
        let z = encoder_input(&m.surface, &m.left, &m.right, emb.attention_words);
        let tanh_pre = encode(&z, params);
        let h = match dropout {
            Some(plan) => apply_dropout(&tanh_pre, plan.rate, &plan.keep[i]),
            None => tanh_pre.clone(),
        };
        z_all.push(z);
        tanh_all.push(tanh_pre);
        h_all.push(h);
    }

    // only mentions with a positive candidate can be attended over
    let attendable: Vec<usize> =
        (0..n).filter(|&i| !doc.mentions[i].candidates.positives.is_empty()).collect();

    let mut mentions = Vec::with_capacity(n);
    for (i, m) in doc.mentions.iter().enumerate() {
        let neighbor_ids: Vec<usize> =
            attendable.iter().copied().filter(|&j| j != i).collect();
        let logits = attention_logits(&h_all, i, &neighbor_ids, &params.a_diag);
        let alpha = match variant {
            ModelVariant::NoAttention if !neighbor_ids.is_empty() => {
                vec![F::one() / F::lit(neighbor_ids.len() as f64); neighbor_ids.len()]
            }
            _ => softmax(&logits),
        };

        let cand_vecs: Vec<&[F]> =
            m.candidates.iter().map(|c| emb.entities.lookup(c.entity.as_str())).collect();
        let ctx_vecs: Vec<&[F]> =
            m.left.iter().chain(m.right.iter()).map(|w| emb.words.lookup(w)).collect();

        let (u, u_achiever) = word_relevance(&ctx_vecs, &cand_vecs, &params.c_diag);
        let topk = top_k_indices(&u, d.local_top_k);
        let beta = softmax(&topk.iter().map(|&w| u[w]).collect::<Vec<F>>());
        let mut s_vec = vec![F::zero(); d.entity_dim];
        for (&w, &bw) in topk.iter().zip(&beta) {
            for (s, &x) in s_vec.iter_mut().zip(ctx_vecs[w]) {
                *s += bw * x;
            }
        }

        let cands = m
            .candidates
            .iter()
            .zip(&cand_vecs)
            .map(|(c, &xe)| {
                let phi = bilinear_diag(xe, &s_vec, &params.b_diag);
                let mut mvals = Vec::with_capacity(neighbor_ids.len());
                let mut mwho = Vec::with_capacity(neighbor_ids.len());
                for &j in &neighbor_ids {
                    let mut best = F::neg_infinity();
                    let mut who = 0;
                    for (idx, pos) in doc.mentions[j].candidates.positives.iter().enumerate() {
                        let xj = emb.entities.lookup(pos.entity.as_str());
                        let score = pairwise_compat(xe, xj, &params.r_diag);
                        if score > best {
                            best = score;
                            who = idx;
                        }
                    }
                    mvals.push(best);
                    mwho.push(who);
                }
                let coherence: F =
                    alpha.iter().zip(&mvals).map(|(&a, &mv)| a * mv).sum();
                let star = match variant {
                    ModelVariant::NoLocal => coherence,
                    _ => phi + coherence,
                };
                let (s_hat, f_act) = combiner(star, c.p, params);
                CandForward {
                    phi,
                    m: mvals,
                    m_achiever: mwho,
                    star,
                    f_act,
                    s_hat,
                    combined: s_hat + params.lambda_c * c.s_c,
                }
            })
            .collect();

        mentions.push(MentionForward {
            z: z_all[i].clone(),
            tanh_pre: tanh_all[i].clone(),
            h: h_all[i].clone(),
            neighbor_ids,
            logits,
            alpha,
            cand_vecs,
            ctx_vecs,
            u,
            u_achiever,
            topk,
            beta,
            s_vec,
            cands,
            n_pos: m.candidates.positives.len(),
        });
    }

    DocForward { mentions }
}

/// Picks one entity per mention: the positive candidate with the highest
/// combined score, ties to the better first-stage rank and then to list
/// order. Mentions without candidates stay unlinked.
pub fn link_document<F: Scalar>(
    doc: &WeakDocument<F>,
    emb: &EmbeddingSet<'_, F>,
    params: &ModelParams<F>,
    variant: ModelVariant,
) -> Vec<Option<EntityId>> {
    let fwd = forward_document(doc, emb, params, variant, None);
    doc.mentions
        .iter()
        .zip(&fwd.mentions)
        .map(|(m, mf)| {
            let pos = &m.candidates.positives;
            if pos.is_empty() {
                return None;
            }
            let mut best = 0;
            for i in 1..pos.len() {
                let better = mf.cands[i].combined > mf.cands[best].combined
                    || (mf.cands[i].combined == mf.cands[best].combined
                        && pos[i].first_stage_rank < pos[best].first_stage_rank);
                if better {
                    best = i;
                }
            }
            Some(pos[best].entity.clone())
        })
        .collect()
}
