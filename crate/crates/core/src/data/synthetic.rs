//! Planted-community synthetic traces.
//!
//! Device `i` (id `i + 1`) belongs to community `i mod C`. Communities sit
//! on a circle, and each device is placed with Gaussian noise around its
//! community's center. Every community owns `interests_per_community`
//! interests. A device holds each own-community interest with probability
//! `p_in` and each foreign interest with probability `p_out`. Friendship
//! groups are drawn inside a community. Collaboration events are
//! intra-community with probability `intra_collaboration`. Labels are kept
//! in the trace for evaluation.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trace::{Collaboration, TraceDataset, TraceDevice};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_devices: usize,
    pub num_communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub interests_per_community: usize,
    pub groups_per_community: usize,
    pub group_size: usize,
    pub collaboration_events: usize,
    pub collaboration_size: usize,
    pub intra_collaboration: f64,
    pub success_rate: f64,
    /// Radius of the circle the community centers lie on.
    pub center_radius: f64,
    /// Standard deviation of device positions around their center.
    pub spread: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_devices: 76,
            num_communities: 4,
            p_in: 0.8,
            p_out: 0.05,
            interests_per_community: 4,
            groups_per_community: 3,
            group_size: 4,
            collaboration_events: 60,
            collaboration_size: 3,
            intra_collaboration: 0.9,
            success_rate: 0.8,
            center_radius: 6.0,
            spread: 1.5,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_communities == 0 || self.num_communities > self.num_devices {
            return Err(Error::Parameter(format!(
                "need 1 <= communities <= devices, got {} communities for {} devices",
                self.num_communities, self.num_devices
            )));
        }
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("intra_collaboration", self.intra_collaboration),
            ("success_rate", self.success_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.p_out >= self.p_in {
            return Err(Error::Parameter(format!(
                "p_out ({}) must be below p_in ({})",
                self.p_out, self.p_in
            )));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite() && self.center_radius.is_finite()) {
            return Err(Error::Parameter("spread and center_radius must be finite, spread >= 0".into()));
        }
        if self.collaboration_events > 0 && self.collaboration_size < 2 {
            return Err(Error::Parameter("collaboration_size must be at least 2".into()));
        }
        Ok(())
    }

    pub fn community_of(&self, index: usize) -> usize {
        index % self.num_communities
    }
}

fn interest_name(k: usize) -> String {
    format!("interest-{k}")
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<TraceDataset> {
    cfg.validate()?;
    let mut rng = seeding::rng(seeding::sub_seed(cfg.seed, seeding::STREAM_DATA));
    let n = cfg.num_devices;
    let c = cfg.num_communities;
    let noise = Normal::new(0.0, cfg.spread).expect("validated spread");
    let members: Vec<Vec<usize>> = (0..c)
        .map(|k| (0..n).filter(|&i| cfg.community_of(i) == k).collect())
        .collect();

    let num_interests = c * cfg.interests_per_community;
    let interest_universe: Vec<String> = (0..num_interests).map(interest_name).collect();
    let mut group_universe = Vec::new();
    let mut device_groups: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut devices: Vec<TraceDevice> = (0..n)
        .map(|i| {
            let k = cfg.community_of(i);
            let angle = std::f64::consts::TAU * k as f64 / c as f64;
            let pos = [
                cfg.center_radius * angle.cos() + noise.sample(&mut rng),
                cfg.center_radius * angle.sin() + noise.sample(&mut rng),
            ];
            let interests = (0..num_interests)
                .filter(|&t| {
                    let p = if t / cfg.interests_per_community == k {
                        cfg.p_in
                    } else {
                        cfg.p_out
                    };
                    rng.random_bool(p)
                })
                .map(interest_name)
                .collect();
            TraceDevice {
                id: i as u64 + 1,
                pos: Some(pos),
                interests,
                groups: Vec::new(),
                community: Some(k),
            }
        })
        .collect();

    for (k, pool) in members.iter().enumerate() {
        for g in 0..cfg.groups_per_community {
            let name = format!("group-{k}-{g}");
            let size = cfg.group_size.min(pool.len());
            for pick in index::sample(&mut rng, pool.len(), size) {
                device_groups[pool[pick]].push(name.clone());
            }
            group_universe.push(name);
        }
    }
    for (d, groups) in devices.iter_mut().zip(device_groups) {
        d.groups = groups;
    }

    let mut collaborations = Vec::with_capacity(cfg.collaboration_events);
    for _ in 0..cfg.collaboration_events {
        let pool: Vec<usize> = if rng.random_bool(cfg.intra_collaboration) {
            members[rng.random_range(0..c)].clone()
        } else {
            (0..n).collect()
        };
        let size = cfg.collaboration_size.min(pool.len());
        let chosen = index::sample(&mut rng, pool.len(), size)
            .into_iter()
            .map(|j| pool[j] as u64 + 1)
            .collect();
        collaborations.push(Collaboration {
            members: chosen,
            success: rng.random_bool(cfg.success_rate),
        });
    }

    TraceDataset {
        name: format!("synthetic-{}x{}-seed{}", n, c, cfg.seed),
        position_seed: None,
        interest_universe,
        group_universe,
        devices,
        collaborations,
    }
    .canonicalize(0)
}
