//! End-to-end runs: hypergraph construction, training, trust reports,
//! baseline comparison and the node-count sweep.

use std::path::Path;

use ndarray::Array2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::baseline::{baseline_matrix, BaselineWeights};
use super::report::write_experiment;
use super::trace::TraceDataset;
use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeKind, Hypergraph};
use crate::seeding;
use crate::social::{build_social_hypergraph, SocialConfig};
use crate::trainer::{train_with, EpochRecord, TrainConfig, TrainedModel};
use crate::trust::{rank_trust, trust_matrix, TrustReport, TrustScore, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub social: SocialConfig,
    pub train: TrainConfig,
    pub threshold: f64,
    /// Initiators always reported.
    pub initiators: Vec<usize>,
    /// Additional distinct initiators drawn from the master seed.
    pub random_initiators: usize,
    /// Device counts for the prefix sweep; empty disables it.
    pub sweep: Vec<usize>,
    /// Initiator used at every sweep size.
    pub sweep_initiator: usize,
    pub baseline: BaselineWeights,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            social: SocialConfig::default(),
            train: TrainConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            initiators: vec![0],
            random_initiators: 4,
            sweep: Vec::new(),
            sweep_initiator: 0,
            baseline: BaselineWeights::default(),
        }
    }
}

/// A trained model together with the hypergraph it was trained on.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub hypergraph: Hypergraph,
    pub model: TrainedModel,
}

/// Build the social hypergraph of `ds` and train on it.
pub fn fit<F>(ds: &TraceDataset, social: &SocialConfig, train: &TrainConfig, on_epoch: F) -> Result<Fitted>
where
    F: FnMut(&EpochRecord, &crate::encoder::EncoderParams),
{
    let social_hg = build_social_hypergraph(&ds.profiles(), social)?;
    let model = train_with(&social_hg.hypergraph, train, on_epoch)?;
    Ok(Fitted {
        hypergraph: social_hg.hypergraph,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub initiator: usize,
    pub initiator_id: u64,
    pub hscl: TrustScore,
    pub hscl_id: u64,
    pub baseline: TrustScore,
    pub baseline_id: u64,
}

impl PairRecord {
    pub fn hscl_label(&self) -> String {
        format!("{}/{}", self.initiator_id, self.hscl_id)
    }

    pub fn baseline_label(&self) -> String {
        format!("{}/{}", self.initiator_id, self.baseline_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub num_devices: usize,
    pub initiator_id: u64,
    pub most_trusted: TrustScore,
    pub most_trusted_id: u64,
}

impl SweepRecord {
    pub fn label(&self) -> String {
        format!("{}/{}", self.initiator_id, self.most_trusted_id)
    }
}

/// How well a score matrix separates same-community from cross-community pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationStats {
    pub method: String,
    pub intra_mean: f64,
    pub inter_mean: f64,
    pub separation: f64,
    /// Initiator whose threshold classification is scored.
    pub initiator: usize,
    /// Fraction of the initiator's targets where `score >= threshold`
    /// agrees with "same community".
    pub accuracy: f64,
}

pub fn separation_stats(
    method: &str,
    scores: &Array2<f64>,
    communities: &[usize],
    initiator: usize,
    threshold: f64,
) -> SeparationStats {
    let n = communities.len();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            if communities[i] == communities[j] {
                intra += scores[[i, j]];
                n_intra += 1;
            } else {
                inter += scores[[i, j]];
                n_inter += 1;
            }
        }
    }
    let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    let (intra_mean, inter_mean) = (mean(intra, n_intra), mean(inter, n_inter));
    let correct = (0..n)
        .filter(|&j| j != initiator)
        .filter(|&j| (scores[[initiator, j]] >= threshold) == (communities[j] == communities[initiator]))
        .count();
    SeparationStats {
        method: method.to_string(),
        intra_mean,
        inter_mean,
        separation: intra_mean - inter_mean,
        initiator,
        accuracy: if n > 1 { correct as f64 / (n - 1) as f64 } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypergraphSummary {
    pub num_devices: usize,
    pub num_hyperedges: usize,
    pub physical: usize,
    pub interest: usize,
    pub friendship: usize,
    pub collaboration: usize,
}

impl HypergraphSummary {
    pub fn of(hg: &Hypergraph) -> Self {
        Self {
            num_devices: hg.num_devices(),
            num_hyperedges: hg.num_hyperedges(),
            physical: hg.count_kind(HyperedgeKind::Physical),
            interest: hg.count_kind(HyperedgeKind::Interest),
            friendship: hg.count_kind(HyperedgeKind::Friendship),
            collaboration: hg.count_kind(HyperedgeKind::Collaboration),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub dataset: String,
    pub seed: u64,
    pub ids: Vec<u64>,
    pub threshold: f64,
    pub hypergraph: Option<HypergraphSummary>,
    pub reports: Vec<TrustReport>,
    pub baseline_reports: Vec<TrustReport>,
    pub pairs: Vec<PairRecord>,
    pub sweep: Vec<SweepRecord>,
    pub loss_history: Vec<EpochRecord>,
    pub separation: Vec<SeparationStats>,
    pub trust_matrix: Array2<f64>,
}

impl ExperimentResult {
    fn empty(ds: &TraceDataset, cfg: &ExperimentConfig) -> Self {
        Self {
            dataset: ds.name.clone(),
            seed: cfg.train.seed,
            ids: ds.ids(),
            threshold: cfg.threshold,
            hypergraph: None,
            reports: Vec::new(),
            baseline_reports: Vec::new(),
            pairs: Vec::new(),
            sweep: Vec::new(),
            loss_history: Vec::new(),
            separation: Vec::new(),
            trust_matrix: Array2::zeros((0, 0)),
        }
    }
}

/// Explicit initiators followed by seeded distinct extras.
pub fn resolve_initiators(num_devices: usize, cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    if let Some(&bad) = cfg.initiators.iter().find(|&&i| i >= num_devices) {
        return Err(Error::Parameter(format!(
            "initiator {bad} out of range for {num_devices} devices"
        )));
    }
    let mut out: Vec<usize> = Vec::new();
    for &i in &cfg.initiators {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    let pool: Vec<usize> = (0..num_devices).filter(|i| !out.contains(i)).collect();
    let extra = cfg.random_initiators.min(pool.len());
    let mut rng = seeding::rng(seeding::sub_seed(cfg.train.seed, seeding::STREAM_INITIATORS));
    let mut picks: Vec<usize> = index::sample(&mut rng, pool.len(), extra)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    picks.sort_unstable();
    out.extend(picks);
    Ok(out)
}

fn validate(ds: &TraceDataset, cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    cfg.train.validate()?;
    cfg.baseline.validate()?;
    if ds.num_devices() < 2 {
        return Err(Error::Data("experiments need at least two devices".into()));
    }
    let initiators = resolve_initiators(ds.num_devices(), cfg)?;
    for &n in &cfg.sweep {
        if n < 2 || n > ds.num_devices() {
            return Err(Error::Parameter(format!(
                "sweep size {n} outside 2..={}",
                ds.num_devices()
            )));
        }
        if cfg.sweep_initiator >= n {
            return Err(Error::Parameter(format!(
                "sweep initiator {} out of range for {n} devices",
                cfg.sweep_initiator
            )));
        }
    }
    Ok(initiators)
}

fn main_run(ds: &TraceDataset, cfg: &ExperimentConfig, initiators: &[usize], out: &mut ExperimentResult) -> Result<()> {
    let fitted = fit(ds, &cfg.social, &cfg.train, |_, _| {})?;
    let emb = &fitted.model.final_device_embeddings;
    let base = baseline_matrix(ds, &cfg.baseline)?;
    let ids = ds.ids();
    out.hypergraph = Some(HypergraphSummary::of(&fitted.hypergraph));
    out.loss_history = fitted.model.loss_history.clone();
    out.trust_matrix = trust_matrix(emb);
    for &i in initiators {
        let report = rank_trust(emb, i, cfg.threshold)?;
        let scores = (0..ds.num_devices())
            .filter(|&j| j != i)
            .map(|j| TrustScore {
                device: j,
                trust: base[[i, j]],
            })
            .collect();
        let baseline = TrustReport::from_scores(i, scores, cfg.threshold)?;
        out.pairs.push(PairRecord {
            initiator: i,
            initiator_id: ids[i],
            hscl: report.most_trusted,
            hscl_id: ids[report.most_trusted.device],
            baseline: baseline.most_trusted,
            baseline_id: ids[baseline.most_trusted.device],
        });
        out.reports.push(report);
        out.baseline_reports.push(baseline);
    }
    if let Some(communities) = ds.communities() {
        let first = initiators[0];
        out.separation = vec![
            separation_stats("hscl", &out.trust_matrix, &communities, first, cfg.threshold),
            separation_stats("baseline", &base, &communities, first, cfg.threshold),
        ];
    }
    Ok(())
}

fn sweep_point(ds: &TraceDataset, cfg: &ExperimentConfig, n: usize) -> Result<SweepRecord> {
    let sub = ds.prefix(n)?;
    let fitted = fit(&sub, &cfg.social, &cfg.train, |_, _| {})?;
    let report = rank_trust(&fitted.model.final_device_embeddings, cfg.sweep_initiator, cfg.threshold)?;
    let ids = sub.ids();
    Ok(SweepRecord {
        num_devices: n,
        initiator_id: ids[cfg.sweep_initiator],
        most_trusted: report.most_trusted,
        most_trusted_id: ids[report.most_trusted.device],
    })
}

/// Run everything in memory.
pub fn run_experiment(ds: &TraceDataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let initiators = validate(ds, cfg)?;
    let mut out = ExperimentResult::empty(ds, cfg);
    main_run(ds, cfg, &initiators, &mut out)?;
    for &n in &cfg.sweep {
        out.sweep.push(sweep_point(ds, cfg, n)?);
    }
    Ok(out)
}

/// Run and write all artifacts to `dir`. Results are flushed after the main
/// run and after every sweep point; on failure the manifest records the
/// error and marks the output incomplete.
pub fn run_experiment_to_dir(ds: &TraceDataset, cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentResult> {
    run_to_dir_with(ds, cfg, dir, sweep_point)
}

fn run_to_dir_with<S>(ds: &TraceDataset, cfg: &ExperimentConfig, dir: &Path, mut sweep: S) -> Result<ExperimentResult>
where
    S: FnMut(&TraceDataset, &ExperimentConfig, usize) -> Result<SweepRecord>,
{
    let initiators = validate(ds, cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = ExperimentResult::empty(ds, cfg);
    let outcome = (|| -> Result<()> {
        main_run(ds, cfg, &initiators, &mut out)?;
        for &n in &cfg.sweep {
            write_experiment(&out, dir, false, None)?;
            out.sweep.push(sweep(ds, cfg, n)?);
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => {
            write_experiment(&out, dir, true, None)?;
            Ok(out)
        }
        Err(e) => {
            write_experiment(&out, dir, false, Some(&e.to_string()))?;
            Err(e)
        }
    }
}
