//! The three disentangled user encoders.
//!
//! Each encoder is a fixed linear map applied to the trainable base
//! embeddings U°:
//!
//! * SMM propagates U° through the truncated Neumann series of the
//!   normalized modularity operator (global social structure).
//! * SCA aggregates U° through a neighborhood-similarity feature map f(A)
//!   (local social closeness).
//! * UCE aggregates U° through the normalized, mean-shifted membership
//!   matrix Ŷ (collaborative preference similarity).
//!
//! All three run right-to-left so nothing denser than the inputs is formed.

use ndarray::Array1;

use crate::embedding::Embedding;
use crate::error::{CasoError, Result};
use crate::graph::SocialGraph;
use crate::membership::MembershipNetwork;
use crate::operator::{modularity_operator, LinearOperator};

/// Neighborhood-based social closeness measures and their feature maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NscMeasure {
    /// Common neighbors: f(A) = A.
    Cn,
    /// Adamic–Adar index: f(A) = A·D_log^{-1/2}.
    Aai,
    /// Resource allocation index: f(A) = A·D^{-1/2}.
    Rai,
    /// Salton index: f(A) = D^{-1/2}·A.
    Si,
    /// Leicht–Holme–Newman index: f(A) = D^{-1}·A.
    Lhni,
}

impl NscMeasure {
    pub const ALL: [NscMeasure; 5] = [
        NscMeasure::Cn,
        NscMeasure::Aai,
        NscMeasure::Rai,
        NscMeasure::Si,
        NscMeasure::Lhni,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NscMeasure::Cn => "cn",
            NscMeasure::Aai => "aai",
            NscMeasure::Rai => "rai",
            NscMeasure::Si => "si",
            NscMeasure::Lhni => "lhni",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cn" => Ok(NscMeasure::Cn),
            "aai" => Ok(NscMeasure::Aai),
            "rai" => Ok(NscMeasure::Rai),
            "si" => Ok(NscMeasure::Si),
            "lhni" => Ok(NscMeasure::Lhni),
            other => Err(CasoError::invalid(
                "measure",
                format!("unknown measure '{other}' (expected cn|aai|rai|si|lhni)"),
            )),
        }
    }
}

/// Propagation weight α/(1−α) of the truncated series.
pub fn smm_weight(alpha: f64) -> f64 {
    alpha / (1.0 - alpha)
}

/// G = Σ_{t=0..T} (α/(1−α))ᵗ Mᵗ U°, by the incremental recurrence
/// G′ ← (α/(1−α))·M·G′; G ← G + G′. Cost O(|E|·d·T).
pub fn smm_encode(
    m: &LinearOperator,
    u0: &Embedding,
    alpha: f64,
    t: usize,
) -> Result<Embedding> {
    if alpha < 0.0 {
        return Err(CasoError::invalid("alpha", "must be nonnegative"));
    }
    if alpha >= 1.0 / 3.0 {
        return Err(CasoError::SeriesDivergenceRisk { alpha });
    }
    let weight = smm_weight(alpha);
    let mut g_prime = u0.clone();
    let mut g = g_prime.clone();
    for _ in 1..=t {
        g_prime = m.apply(&g_prime.view());
        g_prime *= weight;
        g += &g_prime;
    }
    Ok(g)
}

/// f(A) for the chosen measure, satisfying p(u_i,u_j) = f(A)_i · f(A)_j.
/// For AAI, intermediate nodes with degree ≤ 1 contribute nothing (their
/// column is zero): 1/log d is undefined there.
pub fn nsc_feature_map(g: &SocialGraph, measure: NscMeasure) -> LinearOperator {
    let degrees = g.degrees();
    let fa = g.adjacency().map_values(|i, j, _| match measure {
        NscMeasure::Cn => 1.0,
        NscMeasure::Aai => {
            let dj = degrees[j] as f64;
            if degrees[j] <= 1 {
                0.0
            } else {
                1.0 / dj.ln().sqrt()
            }
        }
        NscMeasure::Rai => 1.0 / (degrees[j] as f64).sqrt(),
        NscMeasure::Si => 1.0 / (degrees[i] as f64).sqrt(),
        NscMeasure::Lhni => 1.0 / degrees[i] as f64,
    });
    LinearOperator::from_sparse(fa)
}

/// Per-user 1/d_i scale of the closeness aggregation (0 for isolated users).
pub fn inverse_degrees(g: &SocialGraph) -> Array1<f64> {
    g.degrees()
        .iter()
        .map(|&d| if d > 0 { 1.0 / d as f64 } else { 0.0 })
        .collect()
}

/// L = D⁻¹ f(A) f(A)ᵀ U°, computed right-to-left in O(|E|·d).
pub fn sca_encode(g: &SocialGraph, fa: &LinearOperator, u0: &Embedding) -> Embedding {
    sca_encode_with(fa, &inverse_degrees(g), u0)
}

/// Same as [`sca_encode`] with the inverse-degree scaling precomputed.
pub fn sca_encode_with(fa: &LinearOperator, inv_deg: &Array1<f64>, u0: &Embedding) -> Embedding {
    let w = fa.apply_transpose(&u0.view());
    let mut l = fa.apply(&w.view());
    for (mut row, &s) in l.rows_mut().into_iter().zip(inv_deg.iter()) {
        row *= s;
    }
    l
}

/// Ŷ_{ik} = Y_{ik}/(√δ_i √σ_k) − √(δ_i/|Y|)·√(σ_k/|Y|), as a sparse part
/// plus the rank-one triple (−1/|Y|, √δ, √σ). Empty communities contribute
/// zero columns and users without memberships zero rows.
pub fn build_yhat(b: &MembershipNetwork) -> Result<LinearOperator> {
    if b.n_memberships() == 0 {
        return Err(CasoError::EmptyMembershipNetwork);
    }
    let mut triplets = Vec::with_capacity(b.n_memberships());
    for (u, k) in b.iter_pairs() {
        let delta = b.user_degree(u) as f64;
        let sigma = b.community_size(k) as f64;
        triplets.push((u, k, 1.0 / (delta * sigma).sqrt()));
    }
    let sparse = crate::sparse::Csr::from_triplets(b.n_users(), b.n_communities(), triplets);
    let sqrt_delta: Array1<f64> = (0..b.n_users())
        .map(|u| (b.user_degree(u) as f64).sqrt())
        .collect();
    let sqrt_sigma: Array1<f64> = (0..b.n_communities())
        .map(|k| (b.community_size(k) as f64).sqrt())
        .collect();
    let mut op = LinearOperator::from_sparse(sparse);
    op.push_rank_one(-1.0 / b.n_memberships() as f64, sqrt_delta, sqrt_sigma);
    Ok(op)
}

/// X = Ŷ·(ŶᵀU°): two operator applications, never an n×n similarity matrix.
pub fn uce_encode(yhat: &LinearOperator, u0: &Embedding) -> Embedding {
    let w = yhat.apply_transpose(&u0.view());
    yhat.apply(&w.view())
}

/// Preference similarity s(u_i,u_j) = Ŷ_i · Ŷ_j, evaluated pairwise:
/// s = (1/√(δ_i δ_j))·Σ_{k ∈ N_B(i)∩N_B(j)} 1/σ_k − √(δ_i δ_j)/|Y|.
pub fn preference_similarity(b: &MembershipNetwork, i: usize, j: usize) -> f64 {
    let (di, dj) = (b.user_degree(i) as f64, b.user_degree(j) as f64);
    if b.n_memberships() == 0 {
        return 0.0;
    }
    let mut shared = 0.0;
    let (a, c) = (b.communities_of(i), b.communities_of(j));
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < c.len() {
        match a[p].cmp(&c[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                shared += 1.0 / b.community_size(a[p]) as f64;
                p += 1;
                q += 1;
            }
        }
    }
    let geo = (di * dj).sqrt();
    let cross = if geo > 0.0 { shared / geo } else { 0.0 };
    cross - geo / b.n_memberships() as f64
}

/// All fixed operators of the encoder pipeline, built once per fitted
/// dataset from the graph and the training memberships.
#[derive(Debug, Clone)]
pub struct EncoderOperators {
    pub smm: LinearOperator,
    pub sca_fa: LinearOperator,
    pub sca_scale: Array1<f64>,
    pub yhat: LinearOperator,
    pub measure: NscMeasure,
}

impl EncoderOperators {
    pub fn build(
        g: &SocialGraph,
        b_train: &MembershipNetwork,
        measure: NscMeasure,
    ) -> Result<Self> {
        assert_eq!(g.n_users(), b_train.n_users(), "user count mismatch");
        Ok(EncoderOperators {
            smm: modularity_operator(g),
            sca_fa: nsc_feature_map(g, measure),
            sca_scale: inverse_degrees(g),
            yhat: build_yhat(b_train)?,
            measure,
        })
    }
}
