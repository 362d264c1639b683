//! Browser bindings for three small interactive demos. Each entry point takes
//! plain numbers, returns a JSON document and reports failures as a string.

use hypertrust::augment::{make_views, MaskConfig};
use hypertrust::data::{generate_synthetic, SyntheticConfig, TraceDataset};
use hypertrust::social::{build_physical_hyperedges, build_social_hypergraph, soft_kmeans_run, Point, SocialConfig};
use hypertrust::trainer::{train, TrainConfig};
use hypertrust::trust::{rank_trust, DEFAULT_THRESHOLD};
use ndarray::Array2;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct ClusterOutput {
    pub positions: Vec<Point>,
    pub communities: Vec<usize>,
    pub centers: Vec<Point>,
    /// Per device, its membership in every cluster.
    pub memberships: Vec<Vec<f64>>,
    pub hyperedges: Vec<Vec<usize>>,
    pub cost_history: Vec<f64>,
    pub free_energy_history: Vec<f64>,
    pub converged: bool,
}

#[derive(Serialize)]
pub struct TrustOutput {
    pub ids: Vec<u64>,
    pub positions: Vec<Point>,
    pub communities: Vec<usize>,
    pub initiator: usize,
    /// Trust from the initiator to every device; the initiator's own entry is 1.
    pub trust: Vec<f64>,
    pub most_trusted: usize,
    pub trusted: Vec<usize>,
    pub loss: Vec<f64>,
}

#[derive(Serialize)]
pub struct AugmentOutput {
    pub incidence: Vec<Vec<u8>>,
    pub view_1: Vec<Vec<u8>>,
    pub view_2: Vec<Vec<u8>>,
    pub entries: usize,
    pub surviving: [usize; 2],
    pub expected_fraction: f64,
}

fn dataset(devices: usize, communities: usize, seed: u64) -> Result<TraceDataset, String> {
    generate_synthetic(&SyntheticConfig {
        num_devices: devices,
        num_communities: communities,
        collaboration_events: devices,
        seed,
        ..SyntheticConfig::default()
    })
    .map_err(|e| e.to_string())
}

fn positions(ds: &TraceDataset) -> Vec<Point> {
    (0..ds.num_devices()).map(|i| ds.position(i)).collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Soft K-means on a synthetic layout and the physical hyperedges it yields.
pub fn cluster_demo(devices: usize, communities: usize, k: usize, beta: f64, seed: u64) -> Result<String, String> {
    let ds = dataset(devices, communities, seed)?;
    let pos = positions(&ds);
    let state = soft_kmeans_run(&pos, k, beta, seed, 100, 1e-6).map_err(|e| e.to_string())?;
    let hg = build_physical_hyperedges(&state, 1.0 / k as f64).map_err(|e| e.to_string())?;
    to_json(&ClusterOutput {
        communities: ds.communities().unwrap_or_default(),
        centers: state.centers.clone(),
        memberships: state.memberships.columns().into_iter().map(|c| c.to_vec()).collect(),
        hyperedges: hg.hyperedges().iter().map(|e| e.members.clone()).collect(),
        cost_history: state.cost_history.clone(),
        free_energy_history: state.free_energy_history.clone(),
        converged: state.converged,
        positions: pos,
    })
}

/// Train on a synthetic trace and report trust from one initiator.
pub fn trust_demo(
    devices: usize,
    communities: usize,
    epochs: usize,
    seed: u64,
    initiator: usize,
) -> Result<String, String> {
    let ds = dataset(devices, communities, seed)?;
    let hg = build_social_hypergraph(&ds.profiles(), &SocialConfig::default())
        .map_err(|e| e.to_string())?
        .hypergraph;
    let cfg = TrainConfig {
        epochs,
        embedding_dim: 16,
        seed,
        ..TrainConfig::default()
    };
    let model = train(&hg, &cfg).map_err(|e| e.to_string())?;
    let report =
        rank_trust(&model.final_device_embeddings, initiator, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
    let mut trust = vec![1.0; ds.num_devices()];
    for s in &report.scores {
        trust[s.device] = s.trust;
    }
    to_json(&TrustOutput {
        ids: ds.ids(),
        positions: positions(&ds),
        communities: ds.communities().unwrap_or_default(),
        initiator,
        trust,
        most_trusted: report.most_trusted.device,
        trusted: report.trusted_set,
        loss: model.loss_history.iter().map(|r| r.loss.total).collect(),
    })
}

/// Two masked views of a small social hypergraph.
pub fn augment_demo(p_device: f64, p_hyperedge: f64, p_membership: f64, seed: u64) -> Result<String, String> {
    let ds = dataset(12, 3, 0)?;
    let hg = build_social_hypergraph(&ds.profiles(), &SocialConfig::default())
        .map_err(|e| e.to_string())?
        .hypergraph;
    let inc = hg.build_incidence();
    let mask = MaskConfig {
        p_device,
        p_hyperedge,
        p_membership,
        seed,
    };
    let (v1, v2) = make_views(&hg, &inc, &mask).map_err(|e| e.to_string())?;
    let rows = |m: &Array2<f64>| -> Vec<Vec<u8>> {
        m.outer_iter().map(|r| r.iter().map(|&v| u8::from(v != 0.0)).collect()).collect()
    };
    let count = |m: &Array2<f64>| m.iter().filter(|&&v| v != 0.0).count();
    to_json(&AugmentOutput {
        incidence: rows(&inc.0),
        view_1: rows(&v1.masked_incidence),
        view_2: rows(&v2.masked_incidence),
        entries: count(&inc.0),
        surviving: [count(&v1.masked_incidence), count(&v2.masked_incidence)],
        expected_fraction: (1.0 - p_device) * (1.0 - p_hyperedge) * (1.0 - p_membership),
    })
}

#[wasm_bindgen]
pub fn cluster(devices: usize, communities: usize, k: usize, beta: f64, seed: u32) -> Result<String, JsValue> {
    cluster_demo(devices, communities, k, beta, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn trust(devices: usize, communities: usize, epochs: usize, seed: u32, initiator: usize) -> Result<String, JsValue> {
    trust_demo(devices, communities, epochs, seed.into(), initiator).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn augment(p_device: f64, p_hyperedge: f64, p_membership: f64, seed: u32) -> Result<String, JsValue> {
    augment_demo(p_device, p_hyperedge, p_membership, seed.into()).map_err(|e| JsValue::from_str(&e))
}
