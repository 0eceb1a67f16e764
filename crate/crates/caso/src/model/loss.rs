//! Joint objective: pairwise ranking loss over sampled triples plus the
//! Student-t community-detection divergence, with closed-form gradients.

use super::TrainTriple;
use crate::embedding::Embedding;
use crate::membership::MembershipNetwork;
use ndarray::{Array1, ArrayView1};

/// ŷ_{i,·} = C·U_i: inner-product scores of one user against every
/// community.
pub fn predict_scores(u: &Embedding, c: &Embedding, user: usize) -> Array1<f64> {
    c.dot(&u.row(user))
}

/// ln(1 + eˣ) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// σ(x) − 1 = −σ(−x), computed on the side that keeps the exponent
/// negative.
fn sigmoid_minus_one(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + x.exp())
    }
}

fn frobenius_sq(m: &Embedding) -> f64 {
    m.iter().map(|&x| x * x).sum()
}

/// −Σ ln σ(ŷ_{i,k} − ŷ_{i,j}) + ζ(‖U‖² + ‖C‖²), summed (not averaged)
/// over the batch.
pub fn bpr_loss(u: &Embedding, c: &Embedding, triples: &[TrainTriple], zeta: f64) -> f64 {
    let mut loss = 0.0;
    for t in triples {
        let u_i = u.row(t.user);
        let margin = u_i.dot(&c.row(t.positive)) - u_i.dot(&c.row(t.negative));
        loss += softplus(-margin);
    }
    loss + zeta * (frobenius_sq(u) + frobenius_sq(c))
}

/// Adds the ranking-loss gradients (without the ζ term) onto `d_u` and
/// `d_c`.
pub(crate) fn bpr_grad_into(
    u: &Embedding,
    c: &Embedding,
    triples: &[TrainTriple],
    d_u: &mut Embedding,
    d_c: &mut Embedding,
) {
    for t in triples {
        let u_i = u.row(t.user);
        let c_pos = c.row(t.positive);
        let c_neg = c.row(t.negative);
        let margin = u_i.dot(&c_pos) - u_i.dot(&c_neg);
        let coeff = sigmoid_minus_one(margin);
        {
            let mut row = d_u.row_mut(t.user);
            row.scaled_add(coeff, &(&c_pos - &c_neg));
        }
        d_c.row_mut(t.positive).scaled_add(coeff, &u_i);
        d_c.row_mut(t.negative).scaled_add(-coeff, &u_i);
    }
}

/// Unnormalized Student-t affinities of one user to every community and
/// their sum.
fn student_t_row(u_i: ArrayView1<f64>, c: &Embedding) -> (Array1<f64>, f64) {
    let mut w = Array1::zeros(c.nrows());
    let mut z = 0.0;
    for (k, c_k) in c.rows().into_iter().enumerate() {
        let mut dist_sq = 0.0;
        for (a, b) in u_i.iter().zip(c_k.iter()) {
            let d = a - b;
            dist_sq += d * d;
        }
        let wk = 1.0 / (1.0 + dist_sq);
        w[k] = wk;
        z += wk;
    }
    (w, z)
}

/// Soft assignment row q_{i,·}; rows sum to 1.
pub fn soft_assignment(u: &Embedding, c: &Embedding, user: usize) -> Array1<f64> {
    let (mut w, z) = student_t_row(u.row(user), c);
    w /= z;
    w
}

/// KL divergence between the membership distribution p (observed rows of
/// the training network, normalized) and the soft assignments q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlLoss {
    pub value: f64,
    /// Users passed in with zero training memberships (p undefined);
    /// they contribute nothing.
    pub skipped: usize,
}

impl KlLoss {
    pub fn zero() -> Self {
        KlLoss {
            value: 0.0,
            skipped: 0,
        }
    }
}

/// Σ_i Σ_k p_{ik} ln(p_{ik}/q_{ik}) over the given users, with
/// 0·ln(0/q) = 0. p_{ik} = 1/δ_i on the user's training communities.
pub fn kl_loss(u: &Embedding, c: &Embedding, b: &MembershipNetwork, users: &[usize]) -> KlLoss {
    let mut value = 0.0;
    let mut skipped = 0;
    for &i in users {
        let delta = b.user_degree(i);
        if delta == 0 {
            skipped += 1;
            continue;
        }
        let p = 1.0 / delta as f64;
        let (w, z) = student_t_row(u.row(i), c);
        for &k in b.communities_of(i) {
            let q = w[k] / z;
            value += p * (p / q).ln();
        }
    }
    KlLoss { value, skipped }
}

/// Adds `weight`·∂KL/∂(U, C) onto the accumulators; returns the skipped
/// user count.
pub(crate) fn kl_grad_into(
    u: &Embedding,
    c: &Embedding,
    b: &MembershipNetwork,
    users: &[usize],
    weight: f64,
    d_u: &mut Embedding,
    d_c: &mut Embedding,
) -> usize {
    let mut skipped = 0;
    for &i in users {
        let delta = b.user_degree(i);
        if delta == 0 {
            skipped += 1;
            continue;
        }
        let p_member = 1.0 / delta as f64;
        let u_i = u.row(i).to_owned();
        let (w, z) = student_t_row(u_i.view(), c);
        let members = b.communities_of(i);
        let mut member_iter = members.iter().peekable();
        for k in 0..c.nrows() {
            let p = if member_iter.peek() == Some(&&k) {
                member_iter.next();
                p_member
            } else {
                0.0
            };
            let q = w[k] / z;
            // ∂KL/∂U_i = 2Σ_k (p−q)·w_k·(U_i − C_k); C_k gets the negative.
            let factor = 2.0 * weight * (p - q) * w[k];
            let diff = &u_i - &c.row(k);
            d_u.row_mut(i).scaled_add(factor, &diff);
            d_c.row_mut(k).scaled_add(-factor, &diff);
        }
    }
    skipped
}

/// bpr_loss + θ·kl_loss on the same embeddings; θ = 0 skips the KL term
/// entirely.
pub fn joint_loss(
    u: &Embedding,
    c: &Embedding,
    triples: &[TrainTriple],
    kl_users: &[usize],
    b: &MembershipNetwork,
    theta: f64,
    zeta: f64,
) -> f64 {
    let mut loss = bpr_loss(u, c, triples, zeta);
    if theta > 0.0 {
        loss += theta * kl_loss(u, c, b, kl_users).value;
    }
    loss
}
