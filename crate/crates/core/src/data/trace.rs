//! JSON trace files.
//!
//! ```json
//! {
//!   "name": "campus",
//!   "position_seed": 0,
//!   "interest_universe": ["music", "sports"],
//!   "group_universe": ["lab-a"],
//!   "devices": [
//!     {"id": 1, "pos": [0.2, 0.7], "interests": ["music"], "groups": ["lab-a"]},
//!     {"id": 2, "interests": ["music", "sports"], "groups": [], "community": 0}
//!   ],
//!   "collaborations": [{"members": [1, 2], "success": true}]
//! }
//! ```
//!
//! `pos` is optional; missing positions are drawn uniformly from the unit
//! square with `position_seed` (0 when absent), and the seed used is kept in
//! the dataset. `community` is an optional ground-truth label used only for
//! evaluation. Loading puts a dataset into canonical form: devices sorted by
//! id, each attribute list sorted in universe order without duplicates, and
//! collaboration members sorted by id.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;
use crate::seeding;
use crate::social::{CollaborationRecord, DeviceProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDevice {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 2]>,
    #[serde(default)]
    pub interests: Vec<String>,
    #[serde(default)]
    pub groups: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Collaboration {
    pub members: Vec<u64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDataset {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_seed: Option<u64>,
    #[serde(default)]
    pub interest_universe: Vec<String>,
    #[serde(default)]
    pub group_universe: Vec<String>,
    pub devices: Vec<TraceDevice>,
    #[serde(default)]
    pub collaborations: Vec<Collaboration>,
}

fn index_of(universe: &[String], kind: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(universe.len());
    for (i, name) in universe.iter().enumerate() {
        if map.insert(name.clone(), i).is_some() {
            return Err(Error::Data(format!("{kind} {name:?} declared twice")));
        }
    }
    Ok(map)
}

fn canonical_names(
    names: &[String],
    index: &HashMap<String, usize>,
    universe: &[String],
    kind: &str,
    device: u64,
) -> Result<Vec<String>> {
    let mut ids = BTreeSet::new();
    for n in names {
        let i = index.get(n).ok_or_else(|| {
            Error::Data(format!("device {device} references undeclared {kind} {n:?}"))
        })?;
        ids.insert(*i);
    }
    Ok(ids.into_iter().map(|i| universe[i].clone()).collect())
}

impl TraceDataset {
    /// Validate references, fill missing positions and sort into canonical form.
    pub fn canonicalize(mut self, default_position_seed: u64) -> Result<Self> {
        let interests = index_of(&self.interest_universe, "interest")?;
        let groups = index_of(&self.group_universe, "group")?;
        self.devices.sort_by_key(|d| d.id);
        if let Some(w) = self.devices.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Data(format!("duplicate device id {}", w[0].id)));
        }
        for d in &mut self.devices {
            d.interests = canonical_names(&d.interests, &interests, &self.interest_universe, "interest", d.id)?;
            d.groups = canonical_names(&d.groups, &groups, &self.group_universe, "group", d.id)?;
            if let Some(p) = d.pos {
                if !p.iter().all(|v| v.is_finite()) {
                    return Err(Error::Data(format!("device {} has a non-finite position", d.id)));
                }
            }
        }
        for (k, c) in self.collaborations.iter_mut().enumerate() {
            c.members.sort_unstable();
            c.members.dedup();
            if c.members.is_empty() {
                return Err(Error::Data(format!("collaboration {k} has no members")));
            }
            if let Some(m) = c
                .members
                .iter()
                .find(|m| self.devices.binary_search_by_key(&**m, |d| d.id).is_err())
            {
                return Err(Error::Data(format!(
                    "collaboration {k} references undeclared device {m}"
                )));
            }
        }
        if self.devices.iter().any(|d| d.pos.is_none()) {
            let seed = *self.position_seed.get_or_insert(default_position_seed);
            let mut rng = seeding::rng(seeding::sub_seed(seed, seeding::STREAM_POSITIONS));
            for d in self.devices.iter_mut().filter(|d| d.pos.is_none()) {
                d.pos = Some([rng.random(), rng.random()]);
            }
        }
        Ok(self)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let raw: TraceDataset = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        raw.canonicalize(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    /// Attribute memberships: interests + groups + collaboration participants.
    pub fn num_interactions(&self) -> usize {
        self.devices
            .iter()
            .map(|d| d.interests.len() + d.groups.len())
            .sum::<usize>()
            + self.collaborations.iter().map(|c| c.members.len()).sum::<usize>()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.devices.iter().map(|d| d.id).collect()
    }

    /// Ground-truth labels, if every device carries one.
    pub fn communities(&self) -> Option<Vec<usize>> {
        self.devices.iter().map(|d| d.community).collect()
    }

    pub fn position(&self, index: usize) -> [f64; 2] {
        self.devices[index].pos.expect("canonical datasets have positions")
    }

    /// Device profiles indexed by position in the canonical device list.
    pub fn profiles(&self) -> Vec<DeviceProfile> {
        let interests: HashMap<&str, usize> = self
            .interest_universe
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let groups: HashMap<&str, usize> = self
            .group_universe
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let index: HashMap<u64, usize> = self.devices.iter().enumerate().map(|(i, d)| (d.id, i)).collect();
        let mut profiles: Vec<DeviceProfile> = self
            .devices
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut p = DeviceProfile::at(i, self.position(i));
                p.interests = d.interests.iter().map(|s| interests[s.as_str()]).collect();
                p.friendship_groups = d.groups.iter().map(|s| groups[s.as_str()]).collect();
                p
            })
            .collect();
        for (event, c) in self.collaborations.iter().enumerate() {
            for m in &c.members {
                profiles[index[m]].collaborations.insert(CollaborationRecord {
                    event,
                    success: c.success,
                });
            }
        }
        profiles
    }

    /// The first `n` devices by id; collaborations left with fewer than two
    /// members are dropped.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.devices.len() {
            return Err(Error::Parameter(format!(
                "prefix size {n} outside 1..={}",
                self.devices.len()
            )));
        }
        let devices = self.devices[..n].to_vec();
        let last = devices[n - 1].id;
        let collaborations = self
            .collaborations
            .iter()
            .filter_map(|c| {
                let members: Vec<u64> = c.members.iter().copied().filter(|&m| m <= last).collect();
                (members.len() >= 2).then_some(Collaboration {
                    members,
                    success: c.success,
                })
            })
            .collect();
        Ok(Self {
            name: format!("{}[:{n}]", self.name),
            devices,
            collaborations,
            ..self.clone()
        })
    }
}

pub fn load_trace(path: &Path) -> Result<TraceDataset> {
    TraceDataset::from_json(&files::read_to_string(path)?, path)
}

pub fn save_trace(ds: &TraceDataset, path: &Path) -> Result<()> {
    files::write_atomic(path, ds.to_json().as_bytes())
}
