//! Community-aware structural diagnostics.
//!
//! AC, ACN and ACC compare intra-community user pairs against cross-community
//! pairs; the modularity score evaluates trace(Yᵀ M Y) for the standard or
//! degree-normalized modularity operator. Denominators count ordered pairs:
//! σ_k(σ_k−1) within a community, σ_k·σ_ℓ across community pairs with k ≠ ℓ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CasoError, Result};
use crate::graph::SocialGraph;
use crate::membership::MembershipNetwork;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport {
    pub ac_intra: f64,
    pub ac_inter: f64,
    pub acn_intra: f64,
    pub acn_inter: f64,
    pub acc_intra: f64,
    pub acc_inter: f64,
    pub modularity_std: f64,
    pub modularity_norm: f64,
}

/// Exhaustive enumeration is quadratic in community sizes; the sampled mode
/// estimates each average from a fixed number of weighted pair draws.
#[derive(Debug, Clone, Copy)]
pub enum SamplingMode {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

fn sorted_intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Ordered-pair denominators over the whole network.
fn pair_denominators(b: &MembershipNetwork) -> (f64, f64) {
    let mut intra = 0.0;
    let mut total = 0.0;
    let mut sq = 0.0;
    for k in 0..b.n_communities() {
        let s = b.community_size(k) as f64;
        intra += s * (s - 1.0);
        total += s;
        sq += s * s;
    }
    (intra, total * total - sq)
}

fn exhaustive_averages(
    b: &MembershipNetwork,
    mut summand: impl FnMut(usize, usize) -> f64,
    intra_excludes_current: bool,
) -> Result<(f64, f64)> {
    let (intra_den, inter_den) = pair_denominators(b);
    if intra_den == 0.0 {
        return Err(CasoError::NoIntraPairs);
    }
    if inter_den == 0.0 {
        return Err(CasoError::NoInterPairs);
    }
    let mut intra_num = 0.0;
    for k in 0..b.n_communities() {
        let members = b.members_of(k);
        for a in 0..members.len() {
            for c in a + 1..members.len() {
                let mut v = summand(members[a], members[c]);
                if intra_excludes_current {
                    v -= 1.0;
                }
                intra_num += 2.0 * v;
            }
        }
    }
    let mut inter_num = 0.0;
    for k in 0..b.n_communities() {
        for l in k + 1..b.n_communities() {
            for &i in b.members_of(k) {
                for &j in b.members_of(l) {
                    if i != j {
                        inter_num += 2.0 * summand(i, j);
                    }
                }
            }
        }
    }
    Ok((intra_num / intra_den, inter_num / inter_den))
}

/// Samples an index from cumulative weights (strictly positive total).
fn sample_cumulative(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().unwrap();
    let x: f64 = rng.random_range(0.0..total);
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

fn sampled_averages(
    b: &MembershipNetwork,
    mut summand: impl FnMut(usize, usize) -> f64,
    intra_excludes_current: bool,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (intra_den, inter_den) = pair_denominators(b);
    if intra_den == 0.0 {
        return Err(CasoError::NoIntraPairs);
    }
    if inter_den == 0.0 {
        return Err(CasoError::NoInterPairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Intra: communities weighted by their ordered-pair count.
    let mut cum_intra = Vec::with_capacity(b.n_communities());
    let mut acc = 0.0;
    for k in 0..b.n_communities() {
        let s = b.community_size(k) as f64;
        acc += s * (s - 1.0);
        cum_intra.push(acc);
    }
    let mut intra_sum = 0.0;
    for _ in 0..samples {
        let k = sample_cumulative(&mut rng, &cum_intra);
        let members = b.members_of(k);
        let a = rng.random_range(0..members.len());
        let mut c = rng.random_range(0..members.len() - 1);
        if c >= a {
            c += 1;
        }
        let mut v = summand(members[a], members[c]);
        if intra_excludes_current {
            v -= 1.0;
        }
        intra_sum += v;
    }
    // Inter: community pair (k, ℓ ≠ k) weighted by σ_k·σ_ℓ via rejection.
    let mut cum_size = Vec::with_capacity(b.n_communities());
    let mut acc = 0.0;
    for k in 0..b.n_communities() {
        acc += b.community_size(k) as f64;
        cum_size.push(acc);
    }
    let mut inter_sum = 0.0;
    for _ in 0..samples {
        let (k, l) = loop {
            let k = sample_cumulative(&mut rng, &cum_size);
            let l = sample_cumulative(&mut rng, &cum_size);
            if k != l {
                break (k, l);
            }
        };
        let i = b.members_of(k)[rng.random_range(0..b.community_size(k))];
        let j = b.members_of(l)[rng.random_range(0..b.community_size(l))];
        if i != j {
            inter_sum += summand(i, j);
        }
    }
    Ok((intra_sum / samples as f64, inter_sum / samples as f64))
}

fn averages(
    b: &MembershipNetwork,
    summand: impl FnMut(usize, usize) -> f64,
    intra_excludes_current: bool,
    mode: SamplingMode,
) -> Result<(f64, f64)> {
    match mode {
        SamplingMode::Exhaustive => exhaustive_averages(b, summand, intra_excludes_current),
        SamplingMode::Sampled { samples, seed } => {
            sampled_averages(b, summand, intra_excludes_current, samples, seed)
        }
    }
}

/// Fraction of intra- and inter-community user pairs joined by an edge.
pub fn average_connectivity(g: &SocialGraph, b: &MembershipNetwork) -> Result<(f64, f64)> {
    average_connectivity_mode(g, b, SamplingMode::Exhaustive)
}

pub fn average_connectivity_mode(
    g: &SocialGraph,
    b: &MembershipNetwork,
    mode: SamplingMode,
) -> Result<(f64, f64)> {
    averages(
        b,
        |i, j| if g.has_edge(i, j) { 1.0 } else { 0.0 },
        false,
        mode,
    )
}

/// Average number of common graph neighbors over intra/inter pairs.
pub fn average_common_neighbors(g: &SocialGraph, b: &MembershipNetwork) -> Result<(f64, f64)> {
    average_common_neighbors_mode(g, b, SamplingMode::Exhaustive)
}

pub fn average_common_neighbors_mode(
    g: &SocialGraph,
    b: &MembershipNetwork,
    mode: SamplingMode,
) -> Result<(f64, f64)> {
    averages(
        b,
        |i, j| sorted_intersection_size(g.neighbors(i), g.neighbors(j)) as f64,
        false,
        mode,
    )
}

/// Average number of shared communities; the intra summand excludes the
/// community under which the pair is enumerated.
pub fn average_common_communities(b: &MembershipNetwork) -> Result<(f64, f64)> {
    average_common_communities_mode(b, SamplingMode::Exhaustive)
}

pub fn average_common_communities_mode(
    b: &MembershipNetwork,
    mode: SamplingMode,
) -> Result<(f64, f64)> {
    averages(
        b,
        |i, j| sorted_intersection_size(b.communities_of(i), b.communities_of(j)) as f64,
        true,
        mode,
    )
}

/// trace(Yᵀ M Y) with M = A − ddᵀ/|E| (standard) or Ã − √d√dᵀ/|E|
/// (normalized). Computed per community without densifying M.
pub fn modularity_score(g: &SocialGraph, b: &MembershipNetwork, normalized: bool) -> f64 {
    assert_eq!(g.n_users(), b.n_users(), "user count mismatch");
    if g.n_edges() == 0 {
        return 0.0;
    }
    let inv_e = 1.0 / g.n_edges() as f64;
    let mut mask = vec![false; g.n_users()];
    let mut total = 0.0;
    for k in 0..b.n_communities() {
        let members = b.members_of(k);
        for &i in members {
            mask[i] = true;
        }
        let mut edge_term = 0.0;
        let mut weight_sum = 0.0;
        for &i in members {
            let di = g.degree(i) as f64;
            for &j in g.neighbors(i) {
                if mask[j] {
                    edge_term += if normalized {
                        1.0 / (di * g.degree(j) as f64).sqrt()
                    } else {
                        1.0
                    };
                }
            }
            weight_sum += if normalized { di.sqrt() } else { di };
        }
        total += edge_term - weight_sum * weight_sum * inv_e;
        for &i in members {
            mask[i] = false;
        }
    }
    total
}

/// All six pair averages plus both modularity scores.
pub fn structure_report(
    g: &SocialGraph,
    b: &MembershipNetwork,
    mode: SamplingMode,
) -> Result<StructureReport> {
    let (ac_intra, ac_inter) = average_connectivity_mode(g, b, mode)?;
    let (acn_intra, acn_inter) = average_common_neighbors_mode(g, b, mode)?;
    let (acc_intra, acc_inter) = average_common_communities_mode(b, mode)?;
    Ok(StructureReport {
        ac_intra,
        ac_inter,
        acn_intra,
        acn_inter,
        acc_intra,
        acc_inter,
        modularity_std: modularity_score(g, b, false),
        modularity_norm: modularity_score(g, b, true),
    })
}
