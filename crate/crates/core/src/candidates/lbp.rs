//! Max-sum belief propagation over the mentions of one document.
//!
//! Every pair of mentions is connected by a factor that rewards picking two
//! entities joined in the link graph. In log space the factor contributes 0
//! for a linked pair and `-2 * penalty` otherwise (the doubling reflects
//! that each unordered pair is scored once per direction by the underlying
//! compatibility sum). The outputs are per-candidate max-marginals shifted
//! so each mention's best candidate sits at 0.

use crate::scalar::Scalar;

/// Pairwise log potential between two candidate entities, `None` meaning an
/// entity absent from the graph (linked to nothing).
#[inline]
fn potential<F: Scalar>(is_linked: &impl Fn(u32, u32) -> bool, penalty: F, a: Option<u32>, b: Option<u32>) -> F {
    let linked = match (a, b) {
        (Some(u), Some(v)) => is_linked(u, v),
        _ => false,
    };
    if linked {
        F::zero()
    } else {
        -(penalty + penalty)
    }
}

/// Runs synchronous max-sum message passing and returns, for every mention,
/// one score per candidate with the per-mention maximum shifted to zero.
///
/// Mentions with no candidates take no part and come back as empty rows.
/// With fewer than two participating mentions there is no pairwise evidence
/// and every candidate scores zero.
pub fn max_marginals<F: Scalar>(
    candidates: &[Vec<Option<u32>>],
    is_linked: &impl Fn(u32, u32) -> bool,
    penalty: F,
    iterations: usize,
) -> Vec<Vec<F>> {
    let n = candidates.len();
    let active: Vec<usize> = (0..n).filter(|&i| !candidates[i].is_empty()).collect();

    // msg[i][j] is the message from mention i to mention j, one entry per
    // candidate of j. Zero-initialized, refreshed in lockstep each round.
    let mut msg: Vec<Vec<Vec<F>>> = (0..n)
        .map(|_| (0..n).map(|j| vec![F::zero(); candidates[j].len()]).collect())
        .collect();

    let belief = |msg: &Vec<Vec<Vec<F>>>, i: usize, a: usize| -> F {
        active.iter().filter(|&&k| k != i).map(|&k| msg[k][i][a]).sum()
    };

    for _ in 0..iterations {
        let mut next = msg.clone();
        for &i in &active {
            for &j in &active {
                if i == j {
                    continue;
                }
                let row = &mut next[i][j];
                for (b, &eb) in candidates[j].iter().enumerate() {
                    let mut best = F::neg_infinity();
                    for (a, &ea) in candidates[i].iter().enumerate() {
                        let score = potential(is_linked, penalty, ea, eb)
                            + belief(&msg, i, a)
                            - msg[j][i][a];
                        if score > best {
                            best = score;
                        }
                    }
                    row[b] = best;
                }
                let top = row.iter().cloned().fold(F::neg_infinity(), F::max);
                for v in row.iter_mut() {
                    *v -= top;
                }
            }
        }
        msg = next;
    }

    (0..n)
        .map(|i| {
            let scores: Vec<F> =
                (0..candidates[i].len()).map(|a| belief(&msg, i, a)).collect();
            shift_max_to_zero(scores)
        })
        .collect()
}

/// Exhaustive reference for [`max_marginals`]: enumerates every joint
/// assignment, so it is only usable on tiny problems. Scores each unordered
/// mention pair once with the same doubled potential, takes per-candidate
/// maxima over compatible assignments, and shifts each mention's best to
/// zero. Exact where message passing is approximate.
pub fn brute_force_max_marginals<F: Scalar>(
    candidates: &[Vec<Option<u32>>],
    is_linked: &impl Fn(u32, u32) -> bool,
    penalty: F,
) -> Vec<Vec<F>> {
    let n = candidates.len();
    let active: Vec<usize> = (0..n).filter(|&i| !candidates[i].is_empty()).collect();
    let mut best: Vec<Vec<F>> =
        candidates.iter().map(|c| vec![F::neg_infinity(); c.len()]).collect();

    let mut assignment = vec![0usize; active.len()];
    loop {
        let mut score = F::zero();
        for (pos_i, &i) in active.iter().enumerate() {
            for (pos_j, &j) in active.iter().enumerate().skip(pos_i + 1) {
                score += potential(
                    is_linked,
                    penalty,
                    candidates[i][assignment[pos_i]],
                    candidates[j][assignment[pos_j]],
                );
            }
        }
        for (pos, &i) in active.iter().enumerate() {
            let slot = &mut best[i][assignment[pos]];
            if score > *slot {
                *slot = score;
            }
        }
        // odometer-style advance over the cartesian product
        let mut pos = 0;
        loop {
            if pos == active.len() {
                return best.into_iter().map(shift_max_to_zero).collect();
            }
            assignment[pos] += 1;
            if assignment[pos] < candidates[active[pos]].len() {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

fn shift_max_to_zero<F: Scalar>(mut scores: Vec<F>) -> Vec<F> {
    let top = scores.iter().cloned().fold(F::neg_infinity(), F::max);
    if top.is_finite() {
        for v in &mut scores {
            *v -= top;
        }
    }
    scores
}
