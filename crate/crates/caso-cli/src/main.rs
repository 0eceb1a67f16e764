//! Batch command-line surface: dataset statistics, training, evaluation,
//! cross-validation, ablations, synthetic data, and hyperparameter sweeps.
//!
//! Every run prints the fully resolved configuration (defaults, then the
//! config file, then flags) as `config.<key> = <value>` lines, and every
//! metric additionally appears as a machine-readable
//! `metric.<name>@<K> = <value>` line.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use caso::encoders::{EncoderOperators, NscMeasure};
use caso::eval::{
    cross_validate, evaluate, evaluate_embeddings, split_memberships, RankingMetrics,
    SplitResult,
};
use caso::io::{
    apply_config_text, config_echo, load_checkpoint, load_config_file, load_dataset,
    load_memberships, save_checkpoint, write_dataset, Checkpoint, DatasetBundle, RunConfig,
};
use caso::metrics::{structure_report, SamplingMode};
use caso::model::{fit, Ablations, AdamMoments, FitOutcome, ModelState};
use caso::synth::{generate_planted_partition, SynthSpec};
use caso::MembershipNetwork;

#[derive(Parser)]
#[command(
    name = "caso",
    version,
    about = "Social community recommendation: train, evaluate, and inspect"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the structural gap report of a dataset
    Stats(StatsArgs),
    /// Fit the model and write a checkpoint plus a training log
    Train(TrainArgs),
    /// Score a checkpoint on held-out memberships
    Evaluate(EvaluateArgs),
    /// K-fold cross-validation with per-fold and aggregate metrics
    #[command(name = "cross-validate")]
    CrossValidate(CrossValidateArgs),
    /// Train and score the full model and the five single-stage ablations
    Ablate(AblateArgs),
    /// Generate a planted-partition dataset
    Synth(SynthArgs),
    /// Train and score across a grid of one hyperparameter
    Sweep(SweepArgs),
}

/// Hyperparameter flags shared by all model-running subcommands. Unset
/// flags fall back to the config file, which falls back to defaults.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat `key = value` configuration file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    /// Propagation series depth
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Closeness measure: cn, aai, rai, si, or lhni
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fme_iterations: Option<usize>,
    /// Treat the per-iteration input normalization of the exclusion step
    /// as a constant during backpropagation
    #[arg(long)]
    fme_stop_gradient: bool,
    /// Pipeline recomputation: per_step or per_epoch
    #[arg(long)]
    recompute: Option<String>,
    /// Drop the modularity-propagation branch
    #[arg(long)]
    no_smm: bool,
    /// Drop the closeness-aggregation branch
    #[arg(long)]
    no_sca: bool,
    /// Drop the collaborative branch
    #[arg(long)]
    no_uce: bool,
    /// Skip the mutual-exclusion refinement
    #[arg(long)]
    no_fme: bool,
    /// Drop the community-detection loss term
    #[arg(long)]
    no_kl: bool,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    valid_frac: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            load_config_file(&mut cfg, path)
                .with_context(|| format!("reading config {}", path.display()))?;
        }
        let t = &mut cfg.train;
        macro_rules! set {
            ($field:ident, $target:expr) => {
                if let Some(v) = self.$field {
                    $target = v;
                }
            };
        }
        set!(alpha, t.alpha);
        set!(beta, t.beta);
        set!(gamma, t.gamma);
        set!(lambda, t.lambda);
        set!(theta, t.theta);
        set!(zeta, t.zeta);
        set!(t, t.t);
        set!(dim, t.dim);
        set!(learning_rate, t.learning_rate);
        set!(batch_size, t.batch_size);
        set!(max_epochs, t.max_epochs);
        set!(patience, t.patience);
        set!(seed, t.seed);
        set!(fme_iterations, t.fme_iterations);
        if let Some(m) = &self.measure {
            t.measure = NscMeasure::parse(m)?;
        }
        if self.fme_stop_gradient {
            t.fme_stop_gradient = true;
        }
        if let Some(r) = &self.recompute {
            cfg.apply("recompute", r)?;
        }
        let a = &mut cfg.train.ablations;
        a.no_smm |= self.no_smm;
        a.no_sca |= self.no_sca;
        a.no_uce |= self.no_uce;
        a.no_fme |= self.no_fme;
        a.no_kl |= self.no_kl;
        set!(train_frac, cfg.train_frac);
        set!(valid_frac, cfg.valid_frac);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Data files shared by the dataset-consuming subcommands.
#[derive(Args, Clone)]
struct DataArgs {
    /// Edge list: one `user user` pair per line, `#` comments
    #[arg(long)]
    graph: PathBuf,
    /// Memberships: one `user community` pair per line
    #[arg(long)]
    memberships: PathBuf,
}

impl DataArgs {
    fn load(&self) -> Result<DatasetBundle> {
        load_dataset(&self.graph, &self.memberships).with_context(|| {
            format!(
                "loading dataset from {} and {}",
                self.graph.display(),
                self.memberships.display()
            )
        })
    }
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Estimate the pair averages from this many sampled pairs instead
    /// of exhaustive enumeration
    #[arg(long)]
    sample: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for model.ckpt and train.log
    #[arg(long, default_value = "caso_run")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Score these held-out memberships instead of re-deriving the
    /// checkpoint's test split; `--memberships` then counts as training
    /// data and is excluded from each user's candidates
    #[arg(long)]
    test_memberships: Option<PathBuf>,
    /// Cutoff K; repeat for several cutoffs
    #[arg(long = "K")]
    k: Vec<usize>,
}

#[derive(Args)]
struct CrossValidateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of folds
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long = "K")]
    k: Vec<usize>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long = "K")]
    k: Vec<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    blocks: usize,
    #[arg(long)]
    p_in: f64,
    #[arg(long)]
    p_out: f64,
    #[arg(long, default_value_t = 1)]
    memberships_per_user: usize,
    /// Probability that each extra membership is the user's own sister
    /// community in a fresh block-aligned layer (0 = uniform extras over
    /// the other block communities)
    #[arg(long, default_value_t = 0.0)]
    extra_affinity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for graph.txt and memberships.txt
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Configuration key to sweep (any config-file key, e.g. gamma)
    #[arg(long)]
    param: String,
    /// Comma-separated grid values
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long = "K")]
    k: Vec<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Stats(args) => run_stats(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::CrossValidate(args) => run_cross_validate(args),
        Command::Ablate(args) => run_ablate(args),
        Command::Synth(args) => run_synth(args),
        Command::Sweep(args) => run_sweep(args),
    }
}

fn print_echo(cfg: &RunConfig) {
    for line in config_echo(cfg).lines() {
        println!("config.{line}");
    }
}

fn cutoffs(k: &[usize]) -> Vec<usize> {
    if k.is_empty() {
        vec![1, 3, 5]
    } else {
        let mut ks = k.to_vec();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

fn print_metrics(prefix: &str, metrics: &RankingMetrics) {
    println!("{:<6} {:>12} {:>12}", "K", "Recall@K", "NDCG@K");
    for (&k, &r) in &metrics.recall_at {
        println!("{:<6} {:>12.4} {:>12.4}", k, r, metrics.ndcg_at[&k]);
    }
    for (&k, &r) in &metrics.recall_at {
        println!("metric.{prefix}recall@{k} = {r}");
    }
    for (&k, &n) in &metrics.ndcg_at {
        println!("metric.{prefix}ndcg@{k} = {n}");
    }
    println!("evaluated_users = {}", metrics.n_evaluated_users);
}

fn run_stats(args: StatsArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    print_echo(&cfg);
    let bundle = args.data.load()?;
    println!("users = {}", bundle.graph.n_users());
    println!("edges = {}", bundle.graph.n_edges());
    println!("communities = {}", bundle.memberships.n_communities());
    println!("memberships = {}", bundle.memberships.n_memberships());
    let mode = match args.sample {
        Some(samples) => SamplingMode::Sampled {
            samples,
            seed: cfg.train.seed,
        },
        None => SamplingMode::Exhaustive,
    };
    let report = structure_report(&bundle.graph, &bundle.memberships, mode)?;
    println!("stats.ac_intra = {}", report.ac_intra);
    println!("stats.ac_inter = {}", report.ac_inter);
    println!("stats.acn_intra = {}", report.acn_intra);
    println!("stats.acn_inter = {}", report.acn_inter);
    println!("stats.acc_intra = {}", report.acc_intra);
    println!("stats.acc_inter = {}", report.acc_inter);
    println!("stats.modularity_std = {}", report.modularity_std);
    println!("stats.modularity_norm = {}", report.modularity_norm);
    Ok(())
}

fn split_for(cfg: &RunConfig, bundle: &DatasetBundle) -> Result<SplitResult> {
    Ok(split_memberships(
        &bundle.memberships,
        cfg.train_frac,
        cfg.valid_frac,
        cfg.train.seed,
    )?)
}

fn fit_on_split(cfg: &RunConfig, bundle: &DatasetBundle, split: &SplitResult) -> Result<FitOutcome> {
    Ok(fit(&bundle.graph, &split.train, &split.validation, &cfg.train)?)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    print_echo(&cfg);
    let bundle = args.data.load()?;
    let split = split_for(&cfg, &bundle)?;
    println!(
        "split: {} train / {} validation / {} test memberships",
        split.train.n_memberships(),
        split.validation.n_memberships(),
        split.test.n_memberships()
    );
    let outcome = fit_on_split(&cfg, &bundle, &split)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let echo = config_echo(&cfg);
    let ckpt_path = args.out.join("model.ckpt");
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            config_echo: echo.clone(),
            provenance_hash: bundle.provenance.content_hash.clone(),
            user_base: outcome.state.user_base.clone(),
            community_emb: outcome.state.community_emb.clone(),
        },
    )?;

    let mut log = String::new();
    for line in echo.lines() {
        log.push_str(&format!("# {line}\n"));
    }
    log.push_str("# epoch loss kl_skipped validation_ndcg\n");
    for rec in &outcome.log {
        let v = rec
            .validation_ndcg
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".to_string());
        log.push_str(&format!("{} {} {} {}\n", rec.epoch, rec.loss, rec.kl_skipped, v));
    }
    let log_path = args.out.join("train.log");
    fs::write(&log_path, log)?;

    if let Some(last) = outcome.log.last() {
        println!("trained {} epochs, final loss {}", last.epoch, last.loss);
    }
    if let Some(best) = outcome.best_epoch {
        println!("best validation epoch = {best}");
    }
    println!("wrote {} and {}", ckpt_path.display(), log_path.display());
    Ok(())
}

fn state_from(ck: Checkpoint, bundle: &DatasetBundle) -> Result<ModelState> {
    let (n_users, dim) = ck.user_base.dim();
    if n_users != bundle.graph.n_users() {
        bail!(
            "checkpoint holds {} users but the dataset has {}",
            n_users,
            bundle.graph.n_users()
        );
    }
    if ck.community_emb.nrows() != bundle.memberships.n_communities() {
        bail!(
            "checkpoint holds {} communities but the dataset has {}",
            ck.community_emb.nrows(),
            bundle.memberships.n_communities()
        );
    }
    let n_communities = ck.community_emb.nrows();
    Ok(ModelState {
        user_base: ck.user_base,
        community_emb: ck.community_emb,
        adam_user: AdamMoments::zeros(n_users, dim),
        adam_community: AdamMoments::zeros(n_communities, dim),
        step: 0,
    })
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let ck = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("reading checkpoint {}", args.checkpoint.display()))?;
    let mut cfg = RunConfig::default();
    apply_config_text(&mut cfg, "checkpoint", &ck.config_echo)?;
    print_echo(&cfg);
    let bundle = args.data.load()?;
    if bundle.provenance.content_hash != ck.provenance_hash {
        bail!(
            "dataset content hash {} does not match the checkpoint's {}; \
             the checkpoint was fitted on different data",
            bundle.provenance.content_hash,
            ck.provenance_hash
        );
    }

    let ks = cutoffs(&args.k);
    let metrics = match &args.test_memberships {
        None => {
            // Re-derive the training split the checkpoint was fitted on
            // and score its test partition.
            let split = split_for(&cfg, &bundle)?;
            let state = state_from(ck, &bundle)?;
            let ops =
                EncoderOperators::build(&bundle.graph, &split.train, cfg.train.measure)?;
            evaluate(&state, &ops, &cfg.train, &split, &ks)?
        }
        Some(path) => {
            let tokens = load_memberships(path)
                .with_context(|| format!("reading test memberships {}", path.display()))?;
            let mut pairs = Vec::with_capacity(tokens.len());
            for (u, k) in &tokens {
                let ui = bundle
                    .user_ids
                    .get(u)
                    .with_context(|| format!("test membership references unknown user '{u}'"))?;
                let ki = bundle.community_ids.get(k).with_context(|| {
                    format!("test membership references unknown community '{k}'")
                })?;
                pairs.push((ui, ki));
            }
            let test = MembershipNetwork::from_pairs(
                bundle.graph.n_users(),
                bundle.memberships.n_communities(),
                pairs,
            )?;
            let split = SplitResult {
                train: bundle.memberships.clone(),
                validation: MembershipNetwork::from_pairs(
                    bundle.graph.n_users(),
                    bundle.memberships.n_communities(),
                    Vec::new(),
                )?,
                test,
            };
            let state = state_from(ck, &bundle)?;
            let ops =
                EncoderOperators::build(&bundle.graph, &split.train, cfg.train.measure)?;
            let cache = caso::model::forward(&state, &ops, &cfg.train)?;
            evaluate_embeddings(&cache.u, &state.community_emb, &split, &ks)?
        }
    };
    print_metrics("", &metrics);
    Ok(())
}

fn run_cross_validate(args: CrossValidateArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    print_echo(&cfg);
    let bundle = args.data.load()?;
    let ks = cutoffs(&args.k);
    let report = cross_validate(
        &bundle.graph,
        &bundle.memberships,
        &cfg.train,
        args.folds,
        cfg.valid_frac,
        &ks,
    )?;
    for (fold, metrics) in report.per_fold.iter().enumerate() {
        for (&k, &r) in &metrics.recall_at {
            println!("fold.{fold}.recall@{k} = {r}");
        }
        for (&k, &n) in &metrics.ndcg_at {
            println!("fold.{fold}.ndcg@{k} = {n}");
        }
    }
    println!(
        "{:<6} {:>12} {:>12} {:>12} {:>12}",
        "K", "Recall mean", "Recall std", "NDCG mean", "NDCG std"
    );
    for &k in &ks {
        println!(
            "{:<6} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            k,
            report.aggregate.recall_mean[&k],
            report.aggregate.recall_std[&k],
            report.aggregate.ndcg_mean[&k],
            report.aggregate.ndcg_std[&k]
        );
    }
    for &k in &ks {
        println!("metric.recall@{k} = {}", report.aggregate.recall_mean[&k]);
        println!("metric.recall_std@{k} = {}", report.aggregate.recall_std[&k]);
        println!("metric.ndcg@{k} = {}", report.aggregate.ndcg_mean[&k]);
        println!("metric.ndcg_std@{k} = {}", report.aggregate.ndcg_std[&k]);
    }
    Ok(())
}

fn run_ablate(args: AblateArgs) -> Result<()> {
    let base = args.config.resolve()?;
    print_echo(&base);
    let bundle = args.data.load()?;
    let split = split_for(&base, &bundle)?;
    let ops = EncoderOperators::build(&bundle.graph, &split.train, base.train.measure)?;
    let ks = cutoffs(&args.k);
    for (name, ablations) in Ablations::variants() {
        let mut cfg = base.clone();
        cfg.train.ablations = ablations;
        let outcome = fit_on_split(&cfg, &bundle, &split)?;
        let metrics = evaluate(&outcome.state, &ops, &cfg.train, &split, &ks)?;
        println!("--- {name} ---");
        print_metrics(&format!("{name}."), &metrics);
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_users: args.n,
        n_blocks: args.blocks,
        p_in: args.p_in,
        p_out: args.p_out,
        memberships_per_user: args.memberships_per_user,
        extra_affinity: args.extra_affinity,
        seed: args.seed,
    };
    let data = generate_planted_partition(&spec)?;
    let prov = write_dataset(&args.out, &data.graph, &data.memberships)
        .with_context(|| format!("writing dataset to {}", args.out.display()))?;
    println!("synth.n_users = {}", spec.n_users);
    println!("synth.n_blocks = {}", spec.n_blocks);
    println!("synth.p_in = {}", spec.p_in);
    println!("synth.p_out = {}", spec.p_out);
    println!("synth.memberships_per_user = {}", spec.memberships_per_user);
    println!("synth.extra_affinity = {}", spec.extra_affinity);
    println!("synth.seed = {}", spec.seed);
    println!("synth.n_communities = {}", spec.n_communities());
    println!("synth.edges = {}", data.graph.n_edges());
    println!("synth.content_hash = {}", prov.content_hash);
    println!("wrote {} and {}", prov.graph_path, prov.membership_path);
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let base = args.config.resolve()?;
    print_echo(&base);
    let bundle = args.data.load()?;
    let ks = cutoffs(&args.k);
    let mut rows = Vec::new();
    for value in &args.values {
        let mut cfg = base.clone();
        cfg.apply(&args.param, value)
            .with_context(|| format!("sweep value '{value}'"))?;
        cfg.validate()?;
        let split = split_for(&cfg, &bundle)?;
        let outcome = fit_on_split(&cfg, &bundle, &split)?;
        let ops = EncoderOperators::build(&bundle.graph, &split.train, cfg.train.measure)?;
        let metrics = evaluate(&outcome.state, &ops, &cfg.train, &split, &ks)?;
        rows.push((value.clone(), metrics));
    }
    let mut header = format!("{:<12}", args.param);
    for &k in &ks {
        header.push_str(&format!(" {:>11}", format!("Recall@{k}")));
        header.push_str(&format!(" {:>11}", format!("NDCG@{k}")));
    }
    println!("{header}");
    for (value, metrics) in &rows {
        let mut row = format!("{value:<12}");
        for &k in &ks {
            row.push_str(&format!(" {:>11.4}", metrics.recall_at[&k]));
            row.push_str(&format!(" {:>11.4}", metrics.ndcg_at[&k]));
        }
        println!("{row}");
    }
    for (value, metrics) in &rows {
        for (&k, &r) in &metrics.recall_at {
            println!("metric.{}={}.recall@{k} = {r}", args.param, value);
        }
        for (&k, &n) in &metrics.ndcg_at {
            println!("metric.{}={}.ndcg@{k} = {n}", args.param, value);
        }
    }
    Ok(())
}
