//! Builds the social relationship hypergraph from per-device attributes.
//!
//! Four part-hypergraphs are produced and concatenated in a fixed order:
//! physical proximity (soft K-means clusters), shared interests, friendship
//! groups, and collaboration events. Collaboration hyperedges carry weight 1
//! for a successful event and 0 for a failed one; every other hyperedge has
//! weight 1.

pub mod kmeans;

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, HyperedgeKind, Hypergraph, Severity};

pub use kmeans::{
    soft_kmeans_assign, soft_kmeans_run, soft_kmeans_update_centers, Point, SoftKMeansState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CollaborationRecord {
    pub event: usize,
    pub success: bool,
}

/// One device's social attributes, with identifiers already resolved to
/// indices into the declared universes.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub id: usize,
    pub position: Point,
    pub interests: BTreeSet<usize>,
    pub friendship_groups: BTreeSet<usize>,
    pub collaborations: BTreeSet<CollaborationRecord>,
}

impl DeviceProfile {
    pub fn at(id: usize, position: Point) -> Self {
        Self {
            id,
            position,
            interests: BTreeSet::new(),
            friendship_groups: BTreeSet::new(),
            collaborations: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialConfig {
    /// Soft K-means stiffness.
    pub beta: f64,
    /// Defaults to ⌈√(I/2)⌉.
    pub num_clusters: Option<usize>,
    /// Defaults to 1/K.
    pub membership_threshold: Option<f64>,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    pub kmeans_seed: u64,
}

impl Default for SocialConfig {
    fn default() -> Self {
        Self {
            beta: 0.4,
            num_clusters: None,
            membership_threshold: None,
            kmeans_max_iters: 100,
            kmeans_tol: 1e-6,
            kmeans_seed: 0,
        }
    }
}

impl SocialConfig {
    pub fn clusters_for(&self, num_devices: usize) -> usize {
        self.num_clusters
            .unwrap_or_else(|| ((num_devices as f64) / 2.0).sqrt().ceil() as usize)
            .clamp(1, num_devices.max(1))
    }
}

/// One physical hyperedge per cluster containing every device whose
/// membership is at least `threshold`; clusters left empty are dropped.
pub fn build_physical_hyperedges(state: &SoftKMeansState, threshold: f64) -> Result<Hypergraph> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Parameter(format!(
            "membership threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let num_devices = state.memberships.ncols();
    let edges = state
        .memberships
        .outer_iter()
        .map(|row| {
            let members = row
                .iter()
                .enumerate()
                .filter(|(_, &z)| z >= threshold - 1e-12)
                .map(|(i, _)| i);
            Hyperedge::new(members, 1.0, HyperedgeKind::Physical)
        })
        .filter(|e| !e.is_empty())
        .collect();
    Ok(Hypergraph::new(num_devices, edges))
}

fn group_hyperedges<'a>(
    num_devices: usize,
    memberships: impl Iterator<Item = (usize, &'a BTreeSet<usize>)>,
    kind: HyperedgeKind,
) -> Hypergraph {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (device, ids) in memberships {
        for &g in ids {
            groups.entry(g).or_default().push(device);
        }
    }
    let edges = groups
        .into_values()
        .map(|members| Hyperedge::new(members, 1.0, kind))
        .collect();
    Hypergraph::new(num_devices, edges)
}

/// One hyperedge per interest held by at least one device, ordered by interest id.
pub fn build_interest_hyperedges(profiles: &[DeviceProfile]) -> Hypergraph {
    group_hyperedges(
        profiles.len(),
        profiles.iter().enumerate().map(|(i, p)| (i, &p.interests)),
        HyperedgeKind::Interest,
    )
}

pub fn build_friendship_hyperedges(profiles: &[DeviceProfile]) -> Hypergraph {
    group_hyperedges(
        profiles.len(),
        profiles.iter().enumerate().map(|(i, p)| (i, &p.friendship_groups)),
        HyperedgeKind::Friendship,
    )
}

/// One hyperedge per collaboration event, weighted by its outcome.
pub fn build_collaboration_hyperedges(profiles: &[DeviceProfile]) -> Result<Hypergraph> {
    let mut events: BTreeMap<usize, (bool, Vec<usize>)> = BTreeMap::new();
    for (i, p) in profiles.iter().enumerate() {
        for rec in &p.collaborations {
            let entry = events.entry(rec.event).or_insert((rec.success, Vec::new()));
            if entry.0 != rec.success {
                return Err(Error::Data(format!(
                    "collaboration event {} has conflicting outcomes",
                    rec.event
                )));
            }
            entry.1.push(i);
        }
    }
    let edges = events
        .into_values()
        .map(|(success, members)| {
            Hyperedge::new(
                members,
                if success { 1.0 } else { 0.0 },
                HyperedgeKind::Collaboration,
            )
        })
        .collect();
    Ok(Hypergraph::new(profiles.len(), edges))
}

/// The social hypergraph plus the clustering that produced its physical part.
#[derive(Debug, Clone)]
pub struct SocialHypergraph {
    pub hypergraph: Hypergraph,
    pub clustering: SoftKMeansState,
}

pub fn build_social_hypergraph(
    profiles: &[DeviceProfile],
    cfg: &SocialConfig,
) -> Result<SocialHypergraph> {
    if profiles.is_empty() {
        return Err(Error::Data("no devices to build a hypergraph from".into()));
    }
    let positions: Vec<Point> = profiles.iter().map(|p| p.position).collect();
    let k = cfg.clusters_for(profiles.len());
    let clustering = soft_kmeans_run(
        &positions,
        k,
        cfg.beta,
        cfg.kmeans_seed,
        cfg.kmeans_max_iters,
        cfg.kmeans_tol,
    )?;
    let threshold = cfg.membership_threshold.unwrap_or(1.0 / k as f64);
    let parts = [
        build_physical_hyperedges(&clustering, threshold)?,
        build_interest_hyperedges(profiles),
        build_friendship_hyperedges(profiles),
        build_collaboration_hyperedges(profiles)?,
    ];
    let hypergraph = Hypergraph::concat(&parts)?;
    if let Some(d) = hypergraph
        .validate()
        .into_iter()
        .find(|d| d.severity == Severity::Error)
    {
        return Err(Error::Structural(d.to_string()));
    }
    Ok(SocialHypergraph {
        hypergraph,
        clustering,
    })
}
