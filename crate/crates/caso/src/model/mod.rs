//! Training pipeline: encoder fusion, joint BPR + KL loss, analytic
//! gradients back to the base embeddings, and the Adam fitting loop.

mod adam;
mod loss;
mod pipeline;
mod train;

pub use adam::{Adam, AdamMoments};
pub use loss::{
    bpr_loss, joint_loss, kl_loss, predict_scores, soft_assignment, KlLoss,
};
pub use pipeline::{backward, backward_transport, forward, forward_from, ForwardCache, Gradients};
pub use train::{fit, sample_negative, EpochRecord, FitOutcome};

use crate::embedding::{gaussian_init, Embedding};
use crate::encoders::NscMeasure;
use crate::error::{CasoError, Result};
use rand::Rng;

/// Switches that disable individual pipeline stages, mirroring the
/// "w/o" model variants. Disabled stages are bypassed as documented on
/// [`forward`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablations {
    /// G := 0 and the fusion weight collapses to 0, so S° = L.
    pub no_smm: bool,
    /// S° = G; the closeness aggregation is skipped entirely.
    pub no_sca: bool,
    /// X° := 0 and β := 1, so U depends on the social branch alone.
    pub no_uce: bool,
    /// (S, X) = (S°, X°): no normalization, no exclusion updates.
    pub no_fme: bool,
    /// θ := 0; the community-detection loss is dropped.
    pub no_kl: bool,
}

impl Ablations {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn any(&self) -> bool {
        self.no_smm || self.no_sca || self.no_uce || self.no_fme || self.no_kl
    }

    /// The full model followed by the five single-stage ablations, in a
    /// fixed reporting order.
    pub fn variants() -> [(&'static str, Ablations); 6] {
        let mut no_smm = Ablations::none();
        no_smm.no_smm = true;
        let mut no_sca = Ablations::none();
        no_sca.no_sca = true;
        let mut no_uce = Ablations::none();
        no_uce.no_uce = true;
        let mut no_fme = Ablations::none();
        no_fme.no_fme = true;
        let mut no_kl = Ablations::none();
        no_kl.no_kl = true;
        [
            ("full", Ablations::none()),
            ("no_smm", no_smm),
            ("no_sca", no_sca),
            ("no_uce", no_uce),
            ("no_fme", no_fme),
            ("no_kl", no_kl),
        ]
    }
}

/// Whether the encoder pipeline is recomputed at every optimizer step or
/// once per epoch with gradients accumulated across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RecomputeMode {
    /// Forward/backward per mini-batch: faithful stochastic gradients.
    #[default]
    PerStep,
    /// One forward per epoch; batch gradients accumulate against the
    /// cached pipeline and a single optimizer step closes the epoch.
    PerEpoch,
}

/// Every knob of the training run. `validate` enforces the parameter
/// ranges; `fit` calls it before touching any data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Propagation strength of the modularity series; must stay below 1/3.
    pub alpha: f64,
    /// Weight of the social embedding in U = βS + (1−β)X.
    pub beta: f64,
    /// Weight of the modularity embedding in S° = γG + (1−γ)L.
    pub gamma: f64,
    /// Step size of the mutual-exclusion updates.
    pub lambda: f64,
    /// Weight of the KL community-detection loss.
    pub theta: f64,
    /// L2 regularization strength on U and C.
    pub zeta: f64,
    /// Series truncation depth T.
    pub t: usize,
    /// Embedding dimension d.
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub measure: NscMeasure,
    pub ablations: Ablations,
    /// Number of mutual-exclusion update iterations.
    pub fme_iterations: usize,
    /// Treat the mutual-exclusion input normalization as a constant in
    /// the backward pass (comparison mode; default differentiates it).
    pub fme_stop_gradient: bool,
    pub recompute: RecomputeMode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha: 0.33,
            beta: 0.5,
            gamma: 0.3,
            lambda: 0.01,
            theta: 0.1,
            zeta: 1e-4,
            t: 2,
            dim: 64,
            learning_rate: 0.01,
            batch_size: 2048,
            max_epochs: 1000,
            patience: 20,
            seed: 0,
            measure: NscMeasure::Rai,
            ablations: Ablations::none(),
            fme_iterations: 1,
            fme_stop_gradient: false,
            recompute: RecomputeMode::PerStep,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0 / 3.0).contains(&self.alpha) {
            return Err(CasoError::SeriesDivergenceRisk { alpha: self.alpha });
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CasoError::invalid(name, format!("{v} outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(CasoError::invalid(
                "lambda",
                format!("{} outside [0, 1]", self.lambda),
            ));
        }
        for (name, v) in [("theta", self.theta), ("zeta", self.zeta)] {
            if !(v >= 0.0) {
                return Err(CasoError::invalid(name, format!("{v} must be nonnegative")));
            }
        }
        if !(self.learning_rate >= 0.0) {
            return Err(CasoError::invalid(
                "learning_rate",
                format!("{} must be nonnegative", self.learning_rate),
            ));
        }
        if self.dim == 0 {
            return Err(CasoError::invalid("dim", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(CasoError::invalid("batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// One BPR comparison: the user should score the observed community
/// above the sampled negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainTriple {
    pub user: usize,
    /// Community the user belongs to in the training split.
    pub positive: usize,
    /// Community outside the user's training memberships.
    pub negative: usize,
}

/// Trainable parameters plus optimizer state. The base embeddings U°
/// feed the encoder pipeline; C holds one row per community.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub user_base: Embedding,
    pub community_emb: Embedding,
    pub adam_user: AdamMoments,
    pub adam_community: AdamMoments,
    /// Completed optimizer steps (drives Adam bias correction).
    pub step: usize,
}

impl ModelState {
    /// Gaussian init with standard deviation 1/√d keeps the initial
    /// inner products O(1).
    pub fn init(
        n_users: usize,
        n_communities: usize,
        cfg: &TrainingConfig,
        rng: &mut impl Rng,
    ) -> Self {
        ModelState {
            user_base: gaussian_init(rng, n_users, cfg.dim),
            community_emb: gaussian_init(rng, n_communities, cfg.dim),
            adam_user: AdamMoments::zeros(n_users, cfg.dim),
            adam_community: AdamMoments::zeros(n_communities, cfg.dim),
            step: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_base.nrows()
    }

    pub fn n_communities(&self) -> usize {
        self.community_emb.nrows()
    }

    pub fn dim(&self) -> usize {
        self.user_base.ncols()
    }

    /// One optimizer step over both parameter blocks; the shared step
    /// counter keeps their bias corrections in lockstep.
    pub fn apply_step(&mut self, opt: &Adam, grads: &Gradients) {
        self.step += 1;
        opt.update(
            self.step,
            &mut self.user_base,
            &mut self.adam_user,
            &grads.d_user_base,
        );
        opt.update(
            self.step,
            &mut self.community_emb,
            &mut self.adam_community,
            &grads.d_community,
        );
    }
}
