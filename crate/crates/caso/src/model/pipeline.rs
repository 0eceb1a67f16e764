//! The encoder pipeline: three disentangled views of the base embedding
//! fused into U, with the exact adjoint transport back to U°.

use super::loss::{bpr_grad_into, kl_grad_into};
use super::{ModelState, TrainTriple, TrainingConfig};
use crate::embedding::{ensure_finite, Embedding};
use crate::encoders::{sca_encode_with, smm_encode, uce_encode, EncoderOperators};
use crate::error::Result;
use crate::fme::{FmeConfig, FmePass};
use crate::membership::MembershipNetwork;

/// Every intermediate of one forward evaluation, kept so the backward
/// pass can replay it exactly.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Modularity-propagated embedding (zero under `no_smm`).
    pub g: Embedding,
    /// Closeness-aggregated embedding (zero under `no_sca`).
    pub l: Embedding,
    /// Fused social embedding S° = γG + (1−γ)L.
    pub s0: Embedding,
    /// Collaborative embedding (zero under `no_uce`).
    pub x0: Embedding,
    /// Recorded mutual-exclusion iterates; `None` under `no_fme`.
    pub fme: Option<FmePass>,
    pub s: Embedding,
    pub x: Embedding,
    /// Final user embedding U = βS + (1−β)X.
    pub u: Embedding,
    /// Fusion weights after ablation overrides.
    pub gamma_eff: f64,
    pub beta_eff: f64,
}

/// Gradients of the joint loss with respect to the trainable blocks.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_user_base: Embedding,
    pub d_community: Embedding,
}

/// Runs the full pipeline from the base embedding. Ablation bypasses:
/// `no_smm` drops G and fuses S° = L; `no_sca` fuses S° = G; `no_uce`
/// zeroes X and sets β = 1; `no_fme` forwards (S°, X°) untouched.
pub fn forward_from(
    u0: &Embedding,
    ops: &EncoderOperators,
    cfg: &TrainingConfig,
) -> Result<ForwardCache> {
    let ab = cfg.ablations;
    let dim = u0.dim();
    let gamma_eff = if ab.no_sca {
        1.0
    } else if ab.no_smm {
        0.0
    } else {
        cfg.gamma
    };
    let beta_eff = if ab.no_uce { 1.0 } else { cfg.beta };

    let g = if ab.no_smm {
        Embedding::zeros(dim)
    } else {
        smm_encode(&ops.smm, u0, cfg.alpha, cfg.t)?
    };
    let l = if ab.no_sca {
        Embedding::zeros(dim)
    } else {
        sca_encode_with(&ops.sca_fa, &ops.sca_scale, u0)
    };
    let s0 = &g * gamma_eff + &l * (1.0 - gamma_eff);
    let x0 = if ab.no_uce {
        Embedding::zeros(dim)
    } else {
        uce_encode(&ops.yhat, u0)
    };

    let (s, x, fme) = if ab.no_fme {
        (s0.clone(), x0.clone(), None)
    } else {
        let pass = FmePass::forward(
            &s0,
            &x0,
            &FmeConfig {
                lambda: cfg.lambda,
                iterations: cfg.fme_iterations,
            },
        );
        (pass.s_out().clone(), pass.x_out().clone(), Some(pass))
    };

    let u = &s * beta_eff + &x * (1.0 - beta_eff);
    ensure_finite("pipeline output", &u)?;
    Ok(ForwardCache {
        g,
        l,
        s0,
        x0,
        fme,
        s,
        x,
        u,
        gamma_eff,
        beta_eff,
    })
}

/// [`forward_from`] on the state's base embedding.
pub fn forward(
    state: &ModelState,
    ops: &EncoderOperators,
    cfg: &TrainingConfig,
) -> Result<ForwardCache> {
    forward_from(&state.user_base, ops, cfg)
}

/// Transports a gradient with respect to U back to U°: fusion splits,
/// the recorded mutual-exclusion pass runs its adjoint, and each encoder
/// applies its transpose (the series and ŶŶᵀ are self-adjoint; the
/// aggregation transposes to f(A)f(A)ᵀD⁻¹).
pub fn backward_transport(
    cache: &ForwardCache,
    ops: &EncoderOperators,
    cfg: &TrainingConfig,
    d_u: &Embedding,
) -> Result<Embedding> {
    let ab = cfg.ablations;
    let d_s = d_u * cache.beta_eff;
    let d_x = d_u * (1.0 - cache.beta_eff);
    let (d_s0, d_x0) = match &cache.fme {
        Some(pass) => pass.backward(&d_s, &d_x, !cfg.fme_stop_gradient),
        None => (d_s, d_x),
    };

    let mut d_u0 = Embedding::zeros(d_u.dim());
    if !ab.no_smm && cache.gamma_eff != 0.0 {
        let d_g = &d_s0 * cache.gamma_eff;
        d_u0 += &smm_encode(&ops.smm, &d_g, cfg.alpha, cfg.t)?;
    }
    if !ab.no_sca && cache.gamma_eff != 1.0 {
        let mut d_l = &d_s0 * (1.0 - cache.gamma_eff);
        for (mut row, &s) in d_l.rows_mut().into_iter().zip(ops.sca_scale.iter()) {
            row *= s;
        }
        let w = ops.sca_fa.apply_transpose(&d_l.view());
        d_u0 += &ops.sca_fa.apply(&w.view());
    }
    if !ab.no_uce {
        let w = ops.yhat.apply_transpose(&d_x0.view());
        d_u0 += &ops.yhat.apply(&w.view());
    }
    Ok(d_u0)
}

/// Exact gradient of the joint loss at the cached forward point:
/// ∂/∂U of the ranking, KL, and ζ terms, transported through the
/// pipeline; ∂/∂C accumulated directly.
pub fn backward(
    cache: &ForwardCache,
    ops: &EncoderOperators,
    cfg: &TrainingConfig,
    community_emb: &Embedding,
    b_train: &MembershipNetwork,
    triples: &[TrainTriple],
    kl_users: &[usize],
) -> Result<Gradients> {
    let mut d_u = &cache.u * (2.0 * cfg.zeta);
    let mut d_c = community_emb * (2.0 * cfg.zeta);
    bpr_grad_into(&cache.u, community_emb, triples, &mut d_u, &mut d_c);
    let theta_eff = if cfg.ablations.no_kl { 0.0 } else { cfg.theta };
    if theta_eff > 0.0 {
        kl_grad_into(
            &cache.u,
            community_emb,
            b_train,
            kl_users,
            theta_eff,
            &mut d_u,
            &mut d_c,
        );
    }
    let d_user_base = backward_transport(cache, ops, cfg, &d_u)?;
    Ok(Gradients {
        d_user_base,
        d_community: d_c,
    })
}
