//! The fitting loop: shuffled BPR triples, per-step or per-epoch
//! pipeline recomputation, Adam updates, and NDCG-based early stopping.

use super::loss::{bpr_loss, kl_loss, KlLoss};
use super::pipeline::{backward, forward_from};
use super::{Adam, ModelState, RecomputeMode, TrainTriple, TrainingConfig};
use crate::embedding::Embedding;
use crate::encoders::EncoderOperators;
use crate::error::{CasoError, Result};
use crate::eval::validation_ndcg;
use crate::graph::SocialGraph;
use crate::membership::MembershipNetwork;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform draw from the communities outside the user's training set.
pub fn sample_negative(
    b_train: &MembershipNetwork,
    user: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    let total = b_train.n_communities();
    let members = b_train.communities_of(user);
    if members.len() == total {
        return Err(CasoError::NoNegatives { user });
    }
    if members.is_empty() {
        return Ok(rng.random_range(0..total));
    }
    if members.len() * 2 < total {
        // Sparse membership: rejection sampling terminates quickly.
        loop {
            let k = rng.random_range(0..total);
            if !b_train.contains(user, k) {
                return Ok(k);
            }
        }
    }
    // Dense membership: index directly into the complement.
    let mut remaining = rng.random_range(0..total - members.len());
    let mut member_iter = members.iter().peekable();
    for k in 0..total {
        if member_iter.peek() == Some(&&k) {
            member_iter.next();
            continue;
        }
        if remaining == 0 {
            return Ok(k);
        }
        remaining -= 1;
    }
    unreachable!("complement is nonempty");
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean step loss (per-step mode) or the epoch loss (per-epoch mode).
    pub loss: f64,
    /// Users skipped by the KL term for lack of training memberships.
    pub kl_skipped: usize,
    /// Mean NDCG@5 over validation users; absent when none exist.
    pub validation_ndcg: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the best validation epoch (final epoch when no
    /// validation users exist).
    pub state: ModelState,
    pub log: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

struct EpochStats {
    loss: f64,
    kl_skipped: usize,
}

fn theta_eff(cfg: &TrainingConfig) -> f64 {
    if cfg.ablations.no_kl {
        0.0
    } else {
        cfg.theta
    }
}

fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(CasoError::NonFinite {
            context: "training loss".into(),
            detail: Some(format!("epoch {epoch}: loss = {loss}")),
        })
    }
}

fn batch_triples(
    positives: &[(usize, usize)],
    order: &[usize],
    b_train: &MembershipNetwork,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TrainTriple>> {
    order
        .iter()
        .map(|&idx| {
            let (user, positive) = positives[idx];
            Ok(TrainTriple {
                user,
                positive,
                negative: sample_negative(b_train, user, rng)?,
            })
        })
        .collect()
}

fn sorted_unique_users(triples: &[TrainTriple]) -> Vec<usize> {
    let mut users: Vec<usize> = triples.iter().map(|t| t.user).collect();
    users.sort_unstable();
    users.dedup();
    users
}

fn per_step_epoch(
    state: &mut ModelState,
    ops: &EncoderOperators,
    cfg: &TrainingConfig,
    opt: &Adam,
    b_train: &MembershipNetwork,
    positives: &[(usize, usize)],
    order: &[usize],
    rng: &mut ChaCha8Rng,
    epoch: usize,
) -> Result<EpochStats> {
    let theta = theta_eff(cfg);
    let mut loss_sum = 0.0;
    let mut steps = 0usize;
    let mut kl_skipped = 0usize;
    for chunk in order.chunks(cfg.batch_size) {
        let triples = batch_triples(positives, chunk, b_train, rng)?;
        let kl_users = sorted_unique_users(&triples);
        let cache = forward_from(&state.user_base, ops, cfg)?;
        let mut loss = bpr_loss(&cache.u, &state.community_emb, &triples, cfg.zeta);
        if theta > 0.0 {
            let kl = kl_loss(&cache.u, &state.community_emb, b_train, &kl_users);
            loss += theta * kl.value;
            kl_skipped += kl.skipped;
        }
        check_finite(loss, epoch)?;
        let grads = backward(
            &cache,
            ops,
            cfg,
            &state.community_emb,
            b_train,
            &triples,
            &kl_users,
        )?;
        state.apply_step(opt, &grads);
        loss_sum += loss;
        steps += 1;
    }
    Ok(EpochStats {
        loss: loss_sum / steps.max(1) as f64,
        kl_skipped,
    })
}

fn per_epoch_epoch(
    state: &mut ModelState,
    ops: &EncoderOperators,
    cfg: &TrainingConfig,
    opt: &Adam,
    b_train: &MembershipNetwork,
    positives: &[(usize, usize)],
    order: &[usize],
    rng: &mut ChaCha8Rng,
    epoch: usize,
) -> Result<EpochStats> {
    // One forward per epoch; every batch gradient accumulates against
    // the cached pipeline and a single optimizer step closes the epoch.
    let theta = theta_eff(cfg);
    let triples = batch_triples(positives, order, b_train, rng)?;
    let all_users: Vec<usize> = (0..b_train.n_users()).collect();
    let cache = forward_from(&state.user_base, ops, cfg)?;
    let mut loss = bpr_loss(&cache.u, &state.community_emb, &triples, cfg.zeta);
    let kl = if theta > 0.0 {
        let kl = kl_loss(&cache.u, &state.community_emb, b_train, &all_users);
        loss += theta * kl.value;
        kl
    } else {
        KlLoss::zero()
    };
    check_finite(loss, epoch)?;
    let grads = backward(
        &cache,
        ops,
        cfg,
        &state.community_emb,
        b_train,
        &triples,
        &all_users,
    )?;
    state.apply_step(opt, &grads);
    Ok(EpochStats {
        loss,
        kl_skipped: kl.skipped,
    })
}

/// Trains on `b_train`, early-stopping on validation NDCG@5, and returns
/// the best-validation parameters with the per-epoch log.
pub fn fit(
    g: &SocialGraph,
    b_train: &MembershipNetwork,
    b_valid: &MembershipNetwork,
    cfg: &TrainingConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if b_train.n_users() != g.n_users() {
        return Err(CasoError::DimensionMismatch {
            context: "training memberships vs graph".into(),
            expected: g.n_users(),
            got: b_train.n_users(),
        });
    }
    for (u, k) in b_valid.iter_pairs() {
        if b_train.contains(u, k) {
            return Err(CasoError::invalid(
                "validation",
                format!("membership ({u}, {k}) also present in the training split"),
            ));
        }
    }
    let ops = EncoderOperators::build(g, b_train, cfg.measure)?;
    let opt = Adam::with_learning_rate(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ModelState::init(g.n_users(), b_train.n_communities(), cfg, &mut rng);
    let positives: Vec<(usize, usize)> = b_train.iter_pairs().collect();
    let has_validation = (0..b_valid.n_users()).any(|u| b_valid.user_degree(u) > 0);

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Embedding, Embedding)> = None;
    let mut epochs_since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..positives.len()).collect();
        order.shuffle(&mut rng);
        let stats = match cfg.recompute {
            RecomputeMode::PerStep => per_step_epoch(
                &mut state, &ops, cfg, &opt, b_train, &positives, &order, &mut rng, epoch,
            )?,
            RecomputeMode::PerEpoch => per_epoch_epoch(
                &mut state, &ops, cfg, &opt, b_train, &positives, &order, &mut rng, epoch,
            )?,
        };

        let val = if has_validation {
            let cache = forward_from(&state.user_base, &ops, cfg)?;
            validation_ndcg(&cache.u, &state.community_emb, b_train, b_valid, 5)
        } else {
            None
        };
        log.push(EpochRecord {
            epoch,
            loss: stats.loss,
            kl_skipped: stats.kl_skipped,
            validation_ndcg: val,
        });

        if let Some(v) = val {
            let improved = best.as_ref().map_or(true, |(b, ..)| v > *b);
            if improved {
                best = Some((
                    v,
                    epoch,
                    state.user_base.clone(),
                    state.community_emb.clone(),
                ));
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= cfg.patience {
                    break;
                }
            }
        }
    }

    let best_epoch = if let Some((_, epoch, u0, c)) = best {
        state.user_base = u0;
        state.community_emb = c;
        Some(epoch)
    } else {
        None
    };
    Ok(FitOutcome {
        state,
        log,
        best_epoch,
    })
}
