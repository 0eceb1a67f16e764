//! Membership splitting, full-candidate ranking, Recall@K / NDCG@K, and
//! cross-validated experiment orchestration.

use crate::embedding::Embedding;
use crate::encoders::EncoderOperators;
use crate::error::{CasoError, Result};
use crate::graph::SocialGraph;
use crate::membership::MembershipNetwork;
use crate::model::{fit, forward, predict_scores, FitOutcome, ModelState, TrainingConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Disjoint train/validation/test membership networks sharing the input
/// id spaces.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: MembershipNetwork,
    pub validation: MembershipNetwork,
    pub test: MembershipNetwork,
}

/// Recall@K and NDCG@K averaged over users with nonempty test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingMetrics {
    pub recall_at: BTreeMap<usize, f64>,
    pub ndcg_at: BTreeMap<usize, f64>,
    pub n_evaluated_users: usize,
}

/// Assigns every membership independently: train with probability
/// `train_frac·(1−valid_frac)`, validation with `train_frac·valid_frac`,
/// test otherwise.
pub fn split_memberships(
    b: &MembershipNetwork,
    train_frac: f64,
    valid_frac: f64,
    seed: u64,
) -> Result<SplitResult> {
    if !(train_frac > 0.0 && train_frac <= 1.0) {
        return Err(CasoError::invalid(
            "train_frac",
            format!("{train_frac} outside (0, 1]"),
        ));
    }
    if !(0.0..1.0).contains(&valid_frac) {
        return Err(CasoError::invalid(
            "valid_frac",
            format!("{valid_frac} outside [0, 1)"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_train = train_frac * (1.0 - valid_frac);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for (u, k) in b.iter_pairs() {
        let r: f64 = rng.random_range(0.0..1.0);
        if r < p_train {
            train.push((u, k));
        } else if r < train_frac {
            validation.push((u, k));
        } else {
            test.push((u, k));
        }
    }
    let dims = (b.n_users(), b.n_communities());
    Ok(SplitResult {
        train: MembershipNetwork::from_pairs(dims.0, dims.1, train)?,
        validation: MembershipNetwork::from_pairs(dims.0, dims.1, validation)?,
        test: MembershipNetwork::from_pairs(dims.0, dims.1, test)?,
    })
}

/// All communities outside `excluded` (sorted ascending), ordered by
/// descending score with ties broken by ascending community index.
pub fn rank_candidates(
    u: &Embedding,
    c: &Embedding,
    user: usize,
    excluded: &[usize],
) -> Vec<usize> {
    debug_assert!(excluded.windows(2).all(|w| w[0] < w[1]));
    let scores = predict_scores(u, c, user);
    let mut candidates: Vec<usize> = (0..c.nrows())
        .filter(|k| excluded.binary_search(k).is_err())
        .collect();
    candidates.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    candidates
}

/// |top-K ∩ test| / |test| with the untruncated denominator.
pub fn recall_at_k(ranked: &[usize], test_set: &[usize], k: usize) -> f64 {
    debug_assert!(!test_set.is_empty());
    let hits = ranked
        .iter()
        .take(k)
        .filter(|&&c| test_set.binary_search(&c).is_ok())
        .count();
    hits as f64 / test_set.len() as f64
}

/// Binary-relevance NDCG: DCG@K = Σ_{r≤K, hit} 1/log₂(r+1) against the
/// ideal prefix of min(K, |test|) hits.
pub fn ndcg_at_k(ranked: &[usize], test_set: &[usize], k: usize) -> f64 {
    debug_assert!(!test_set.is_empty());
    if k == 0 {
        return 0.0;
    }
    let gain = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let mut dcg = 0.0;
    for (idx, &cand) in ranked.iter().take(k).enumerate() {
        if test_set.binary_search(&cand).is_ok() {
            dcg += gain(idx + 1);
        }
    }
    let ideal: f64 = (1..=k.min(test_set.len())).map(gain).sum();
    dcg / ideal
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                i += 1;
                if x == y {
                    j += 1;
                }
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Metrics over users with nonempty test sets. Train and validation
/// memberships are both removed from the candidate pool: they are known
/// positives, not predictions under test.
pub fn evaluate_embeddings(
    u: &Embedding,
    c: &Embedding,
    split: &SplitResult,
    ks: &[usize],
) -> Result<RankingMetrics> {
    let mut recall: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut ndcg: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut n_evaluated = 0usize;
    for user in 0..split.test.n_users() {
        let test_set = split.test.communities_of(user);
        if test_set.is_empty() {
            continue;
        }
        let excluded = merge_sorted(
            split.train.communities_of(user),
            split.validation.communities_of(user),
        );
        let ranked = rank_candidates(u, c, user, &excluded);
        for &k in ks {
            *recall.get_mut(&k).unwrap() += recall_at_k(&ranked, test_set, k);
            *ndcg.get_mut(&k).unwrap() += ndcg_at_k(&ranked, test_set, k);
        }
        n_evaluated += 1;
    }
    if n_evaluated == 0 {
        return Err(CasoError::invalid(
            "evaluation",
            "zero evaluable users: every test set is empty",
        ));
    }
    for v in recall.values_mut().chain(ndcg.values_mut()) {
        *v /= n_evaluated as f64;
    }
    Ok(RankingMetrics {
        recall_at: recall,
        ndcg_at: ndcg,
        n_evaluated_users: n_evaluated,
    })
}

/// Runs the fitted pipeline and evaluates the resulting embeddings.
pub fn evaluate(
    state: &ModelState,
    ops: &EncoderOperators,
    cfg: &TrainingConfig,
    split: &SplitResult,
    ks: &[usize],
) -> Result<RankingMetrics> {
    let cache = forward(state, ops, cfg)?;
    evaluate_embeddings(&cache.u, &state.community_emb, split, ks)
}

/// Mean NDCG@`k` over users with validation memberships, ranking against
/// candidates outside the training set. `None` when no user qualifies.
pub fn validation_ndcg(
    u: &Embedding,
    c: &Embedding,
    b_train: &MembershipNetwork,
    b_valid: &MembershipNetwork,
    k: usize,
) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for user in 0..b_valid.n_users() {
        let positives = b_valid.communities_of(user);
        if positives.is_empty() {
            continue;
        }
        let ranked = rank_candidates(u, c, user, b_train.communities_of(user));
        total += ndcg_at_k(&ranked, positives, k);
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}

/// Per-metric mean and sample standard deviation across folds.
#[derive(Debug, Clone)]
pub struct AggregateMetrics {
    pub recall_mean: BTreeMap<usize, f64>,
    pub recall_std: BTreeMap<usize, f64>,
    pub ndcg_mean: BTreeMap<usize, f64>,
    pub ndcg_std: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone)]
pub struct CrossValidationReport {
    pub per_fold: Vec<RankingMetrics>,
    pub aggregate: AggregateMetrics,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// K-fold protocol: memberships are shuffled once and partitioned into
/// `folds` groups; each group serves as the test set while the remainder
/// is re-split into train/validation by `valid_frac`. Every fold trains
/// from scratch with the same config.
/// Shuffles the memberships once and builds one split per fold: fold `f`
/// tests on every `folds`-th shuffled pair, and the remainder is
/// re-split into train/validation by `valid_frac`.
pub fn build_fold_splits(
    b: &MembershipNetwork,
    folds: usize,
    valid_frac: f64,
    seed: u64,
) -> Result<Vec<SplitResult>> {
    if folds < 2 {
        return Err(CasoError::invalid("folds", "must be at least 2"));
    }
    if !(0.0..1.0).contains(&valid_frac) {
        return Err(CasoError::invalid(
            "valid_frac",
            format!("{valid_frac} outside [0, 1)"),
        ));
    }
    let mut pairs: Vec<(usize, usize)> = b.iter_pairs().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);

    let dims = (b.n_users(), b.n_communities());
    let mut splits = Vec::with_capacity(folds);
    for fold in 0..folds {
        let mut train = Vec::new();
        let mut validation = Vec::new();
        let mut test = Vec::new();
        for (idx, &pair) in pairs.iter().enumerate() {
            if idx % folds == fold {
                test.push(pair);
            } else if rng.random_range(0.0..1.0) < valid_frac {
                validation.push(pair);
            } else {
                train.push(pair);
            }
        }
        splits.push(SplitResult {
            train: MembershipNetwork::from_pairs(dims.0, dims.1, train)?,
            validation: MembershipNetwork::from_pairs(dims.0, dims.1, validation)?,
            test: MembershipNetwork::from_pairs(dims.0, dims.1, test)?,
        });
    }
    Ok(splits)
}

pub fn cross_validate(
    g: &SocialGraph,
    b: &MembershipNetwork,
    cfg: &TrainingConfig,
    folds: usize,
    valid_frac: f64,
    ks: &[usize],
) -> Result<CrossValidationReport> {
    let mut per_fold = Vec::with_capacity(folds);
    for split in build_fold_splits(b, folds, valid_frac, cfg.seed)? {
        let FitOutcome { state, .. } = fit(g, &split.train, &split.validation, cfg)?;
        let ops = EncoderOperators::build(g, &split.train, cfg.measure)?;
        per_fold.push(evaluate(&state, &ops, cfg, &split, ks)?);
    }

    let mut aggregate = AggregateMetrics {
        recall_mean: BTreeMap::new(),
        recall_std: BTreeMap::new(),
        ndcg_mean: BTreeMap::new(),
        ndcg_std: BTreeMap::new(),
    };
    for &k in ks {
        let recalls: Vec<f64> = per_fold.iter().map(|m| m.recall_at[&k]).collect();
        let ndcgs: Vec<f64> = per_fold.iter().map(|m| m.ndcg_at[&k]).collect();
        let (rm, rs) = mean_std(&recalls);
        let (nm, ns) = mean_std(&ndcgs);
        aggregate.recall_mean.insert(k, rm);
        aggregate.recall_std.insert(k, rs);
        aggregate.ndcg_mean.insert(k, nm);
        aggregate.ndcg_std.insert(k, ns);
    }
    Ok(CrossValidationReport {
        per_fold,
        aggregate,
    })
}
