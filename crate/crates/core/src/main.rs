use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hypertrust::checkpoint::{Checkpoint, SeedLineage};
use hypertrust::data::{
    baseline_weighted_sum_trust, fit, generate_synthetic, load_trace, run_experiment_to_dir, save_trace,
    write_trust_csv, BaselineWeights, ExperimentConfig, RunConfig, SyntheticConfig, TraceDataset,
};
use hypertrust::files::write_atomic;
use hypertrust::hypergraph::HyperedgeKind;
use hypertrust::social::build_social_hypergraph;
use hypertrust::trainer::embed_devices;
use hypertrust::trainer::gradcheck::{finite_difference_check, GradcheckInstance};
use hypertrust::trust::{rank_trust, TrustReport, TrustScore};
use hypertrust::{Error, Result};
use ndarray::Array2;

#[derive(Parser)]
#[command(name = "hypertrust", version, about = "Hypergraph contrastive trust evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trace with planted communities.
    Generate(GenerateArgs),
    /// Build the social hypergraph of a trace and print its statistics.
    Build(BuildArgs),
    /// Train the encoder and write a checkpoint and a per-epoch log.
    Train(TrainArgs),
    /// Trust report for one initiator.
    Trust(TrustArgs),
    /// Most trusted device for one initiator.
    Rank(TrustArgs),
    /// Weighted-sum baseline scores for one initiator.
    Baseline(BaselineArgs),
    /// Full pipeline with baseline comparison and optional size sweep.
    Experiment(ExperimentArgs),
    /// Compare analytic and finite-difference gradients on random instances.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 76)]
    devices: usize,
    #[arg(long, default_value_t = 4)]
    communities: usize,
    #[arg(long, default_value_t = 0.8)]
    p_in: f64,
    #[arg(long, default_value_t = 0.05)]
    p_out: f64,
    #[arg(long, default_value_t = 60)]
    collaborations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    run: RunFlags,
}

/// Every key of the run configuration file, as an overriding flag.
#[derive(Args, Default)]
struct RunFlags {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    resample_masks_each_epoch: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    p_device: Option<f64>,
    #[arg(long)]
    p_hyperedge: Option<f64>,
    #[arg(long)]
    p_membership: Option<f64>,
    #[arg(long)]
    mask_seed: Option<u64>,
    #[arg(long)]
    tau_dc: Option<f64>,
    #[arg(long)]
    tau_ec: Option<f64>,
    #[arg(long)]
    tau_mc: Option<f64>,
    #[arg(long)]
    omega_ec: Option<f64>,
    #[arg(long)]
    omega_mc: Option<f64>,
    #[arg(long)]
    neg_seed: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    num_clusters: Option<usize>,
    #[arg(long)]
    membership_threshold: Option<f64>,
    #[arg(long)]
    kmeans_max_iters: Option<usize>,
    #[arg(long)]
    kmeans_tol: Option<f64>,
    #[arg(long)]
    kmeans_seed: Option<u64>,
    /// Trust threshold [default: 0.6]
    #[arg(long)]
    threshold: Option<f64>,
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            embedding_dim: self.embedding_dim,
            num_layers: self.num_layers,
            resample_masks_each_epoch: self.resample_masks_each_epoch,
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
            p_device: self.p_device,
            p_hyperedge: self.p_hyperedge,
            p_membership: self.p_membership,
            mask_seed: self.mask_seed,
            tau_dc: self.tau_dc,
            tau_ec: self.tau_ec,
            tau_mc: self.tau_mc,
            omega_ec: self.omega_ec,
            omega_mc: self.omega_mc,
            neg_seed: self.neg_seed,
            beta: self.beta,
            num_clusters: self.num_clusters,
            membership_threshold: self.membership_threshold,
            kmeans_max_iters: self.kmeans_max_iters,
            kmeans_tol: self.kmeans_tol,
            kmeans_seed: self.kmeans_seed,
            threshold: self.threshold,
        };
        Ok(file.overlay(&flags))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Checkpoint path; rewritten every `checkpoint_every` epochs and at the end.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct TrustArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Device index (0-based, in ascending id order).
    #[arg(long, default_value_t = 0)]
    initiator: usize,
    /// Use a trained checkpoint instead of training now.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 0)]
    initiator: usize,
    /// Spatial, interest, friendship and collaboration weights.
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    weights: BaselineWeights,
    #[arg(long, default_value_t = 0.6)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Trace to run on; a synthetic trace is generated from the seed when absent.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Device counts for the prefix sweep, e.g. 40,50,60,70.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    /// Initiators always reported.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    initiators: Vec<usize>,
    /// Extra initiators drawn from the seed.
    #[arg(long, default_value_t = 4)]
    random_initiators: usize,
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    weights: BaselineWeights,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Build(a) => build(a),
        Command::Train(a) => train(a),
        Command::Trust(a) => trust(a, false),
        Command::Rank(a) => trust(a, true),
        Command::Baseline(a) => baseline(a),
        Command::Experiment(a) => experiment(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        num_devices: a.devices,
        num_communities: a.communities,
        p_in: a.p_in,
        p_out: a.p_out,
        collaboration_events: a.collaborations,
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    let ds = generate_synthetic(&cfg)?;
    save_trace(&ds, &a.out)?;
    println!(
        "wrote {} devices, {} collaboration events to {}",
        ds.num_devices(),
        ds.collaborations.len(),
        a.out.display()
    );
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    let run = a.run.resolve()?;
    let ds = load_trace(&a.trace)?;
    let social = build_social_hypergraph(&ds.profiles(), &run.social_config())?;
    let hg = &social.hypergraph;
    println!("devices\t{}", hg.num_devices());
    println!("hyperedges\t{}", hg.num_hyperedges());
    for kind in HyperedgeKind::ALL {
        println!("{}\t{}", kind.as_str(), hg.count_kind(kind));
    }
    println!("kmeans_iterations\t{}", social.clustering.iterations);
    println!("kmeans_converged\t{}", social.clustering.converged);
    let diagnostics = hg.validate();
    for d in &diagnostics {
        println!("diagnostic\t{d}");
    }
    hg.ensure_valid()
}

fn train(a: TrainArgs) -> Result<()> {
    let run = a.run.resolve()?;
    let cfg = run.train_config();
    let ds = load_trace(&a.trace)?;
    let seeds = SeedLineage::of(&cfg);
    let start = Instant::now();
    let mut log = csv_log_header();
    let mut write_err = None;
    let fitted = fit(&ds, &run.social_config(), &cfg, |rec, params| {
        let l = rec.loss;
        log.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rec.epoch,
            l.total,
            l.device,
            l.hyperedge,
            l.membership,
            rec.skipped_sides,
            start.elapsed().as_secs_f64()
        ));
        let done = rec.epoch + 1;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && write_err.is_none() {
            write_err = Checkpoint::new(params, seeds, done, None).save(&a.out).err();
        }
    });
    if let Some(path) = &a.log {
        write_atomic(path, log.as_bytes())?;
    }
    let fitted = fitted?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let model = &fitted.model;
    Checkpoint::new(&model.params, seeds, cfg.epochs, Some(&model.final_device_embeddings)).save(&a.out)?;
    if let Some(last) = model.loss_history.last() {
        println!("epochs\t{}\nfinal_loss\t{}", model.loss_history.len(), last.loss.total);
    }
    println!("checkpoint\t{}", a.out.display());
    Ok(())
}

fn csv_log_header() -> String {
    "epoch,total,device,hyperedge,membership,skipped_sides,wall_seconds\n".to_string()
}

fn embeddings_for(ds: &TraceDataset, run: &RunConfig, checkpoint: Option<&Path>) -> Result<Array2<f64>> {
    match checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if let Some(e) = ck.device_embeddings()? {
                if e.nrows() != ds.num_devices() {
                    return Err(Error::Structural(format!(
                        "checkpoint holds {} device embeddings, trace has {} devices",
                        e.nrows(),
                        ds.num_devices()
                    )));
                }
                return Ok(e);
            }
            let social = build_social_hypergraph(&ds.profiles(), &run.social_config())?;
            embed_devices(&social.hypergraph, &ck.params()?)
        }
        None => Ok(fit(ds, &run.social_config(), &run.train_config(), |_, _| {})?
            .model
            .final_device_embeddings),
    }
}

fn print_report(report: &TrustReport, ids: &[u64]) {
    println!("target_id\ttrust\ttrusted");
    for s in &report.scores {
        println!("{}\t{:.6}\t{}", ids[s.device], s.trust, s.trust >= report.threshold);
    }
    println!(
        "# initiator {}: {} of {} trusted at {}",
        ids[report.initiator],
        report.trusted_set.len(),
        report.scores.len(),
        report.threshold
    );
}

fn trust(a: TrustArgs, most_trusted_only: bool) -> Result<()> {
    let run = a.run.resolve()?;
    let ds = load_trace(&a.trace)?;
    if a.initiator >= ds.num_devices() {
        return Err(Error::Parameter(format!(
            "initiator {} out of range for {} devices",
            a.initiator,
            ds.num_devices()
        )));
    }
    let emb = embeddings_for(&ds, &run, a.checkpoint.as_deref())?;
    let report = rank_trust(&emb, a.initiator, run.threshold())?;
    let ids = ds.ids();
    if let Some(out) = &a.out {
        write_trust_csv(&report, &ids, out)?;
    }
    if most_trusted_only {
        let best = report.most_trusted;
        println!("{}/{}\t{:.6}", ids[a.initiator], ids[best.device], best.trust);
    } else {
        print_report(&report, &ids);
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let ds = load_trace(&a.trace)?;
    let scores: Vec<TrustScore> = baseline_weighted_sum_trust(&ds, a.initiator, &a.weights)?;
    let report = TrustReport::from_scores(a.initiator, scores, a.threshold)?;
    let ids = ds.ids();
    if let Some(out) = &a.out {
        write_trust_csv(&report, &ids, out)?;
    }
    print_report(&report, &ids);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let run = a.run.resolve()?;
    let train = run.train_config();
    let ds = match &a.trace {
        Some(p) => load_trace(p)?,
        None => generate_synthetic(&SyntheticConfig {
            seed: train.seed,
            ..SyntheticConfig::default()
        })?,
    };
    let cfg = ExperimentConfig {
        social: run.social_config(),
        train,
        threshold: run.threshold(),
        initiators: a.initiators,
        random_initiators: a.random_initiators,
        sweep: a.sweep,
        sweep_initiator: 0,
        baseline: a.weights,
    };
    let result = run_experiment_to_dir(&ds, &cfg, &a.out)?;
    for p in &result.pairs {
        println!(
            "initiator {}\thscl {} ({:.4})\tbaseline {} ({:.4})",
            p.initiator_id,
            p.hscl_label(),
            p.hscl.trust,
            p.baseline_label(),
            p.baseline.trust
        );
    }
    for s in &result.sweep {
        println!("sweep {}\t{} ({:.4})", s.num_devices, s.label(), s.most_trusted.trust);
    }
    println!("results in {}", a.out.display());
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let mut failed = 0;
    for seed in a.first_seed..a.first_seed + a.instances {
        let inst = GradcheckInstance::random(seed)?;
        let r = finite_difference_check(&inst, a.step, a.tolerance)?;
        let worst = r.worst.as_ref().map(|w| w.to_string()).unwrap_or_default();
        println!(
            "seed {seed}\t{}\tchecked {}\tmax_rel {:.3e}\t{worst}",
            if r.passed { "ok" } else { "FAIL" },
            r.checked,
            r.max_relative_error
        );
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(Error::Numeric {
            epoch: 0,
            message: format!("{failed} of {} gradient checks failed", a.instances),
        });
    }
    Ok(())
}
