//! Weighted-sum trust baseline.
//!
//! Four attribute similarities, each in [0, 1], combined with weights that
//! sum to one:
//!
//! - spatial: `exp(−‖p_i − p_j‖²)`
//! - interests: Jaccard index of the interest sets
//! - friendship: Jaccard index of the group sets
//! - collaboration: successful shared events / shared events (0 if none)

use std::collections::BTreeSet;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::trace::TraceDataset;
use crate::error::{Error, Result};
use crate::social::DeviceProfile;
use crate::trust::TrustScore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineWeights {
    pub spatial: f64,
    pub interest: f64,
    pub friendship: f64,
    pub collaboration: f64,
}

impl Default for BaselineWeights {
    fn default() -> Self {
        Self {
            spatial: 0.25,
            interest: 0.25,
            friendship: 0.25,
            collaboration: 0.25,
        }
    }
}

impl BaselineWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.spatial, self.interest, self.friendship, self.collaboration]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter(format!("baseline weights must be non-negative, got {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("baseline weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

impl FromStr for BaselineWeights {
    type Err = Error;

    /// `"w1,w2,w3,w4"` in spatial, interest, friendship, collaboration order.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parameter(format!("bad weight list {s:?}: {e}")))?;
        let [spatial, interest, friendship, collaboration] = parts[..] else {
            return Err(Error::Parameter(format!("expected four weights, got {}", parts.len())));
        };
        let w = Self {
            spatial,
            interest,
            friendship,
            collaboration,
        };
        w.validate()?;
        Ok(w)
    }
}

fn jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

fn collaboration_ratio(a: &DeviceProfile, b: &DeviceProfile) -> f64 {
    let shared: Vec<bool> = a
        .collaborations
        .iter()
        .filter(|r| b.collaborations.contains(r))
        .map(|r| r.success)
        .collect();
    if shared.is_empty() {
        0.0
    } else {
        shared.iter().filter(|&&s| s).count() as f64 / shared.len() as f64
    }
}

/// Per-attribute similarities in weight order.
pub fn attribute_similarities(a: &DeviceProfile, b: &DeviceProfile) -> [f64; 4] {
    let dx = a.position[0] - b.position[0];
    let dy = a.position[1] - b.position[1];
    [
        (-(dx * dx + dy * dy)).exp(),
        jaccard(&a.interests, &b.interests),
        jaccard(&a.friendship_groups, &b.friendship_groups),
        collaboration_ratio(a, b),
    ]
}

pub fn pair_score(a: &DeviceProfile, b: &DeviceProfile, w: &BaselineWeights) -> f64 {
    let s = attribute_similarities(a, b);
    w.as_array().iter().zip(s).map(|(w, s)| w * s).sum::<f64>().clamp(0.0, 1.0)
}

/// Baseline scores from `initiator` to every other device, in index order.
pub fn baseline_weighted_sum_trust(
    ds: &TraceDataset,
    initiator: usize,
    weights: &BaselineWeights,
) -> Result<Vec<TrustScore>> {
    weights.validate()?;
    if initiator >= ds.num_devices() {
        return Err(Error::Parameter(format!(
            "initiator {initiator} out of range for {} devices",
            ds.num_devices()
        )));
    }
    let profiles = ds.profiles();
    let a = &profiles[initiator];
    Ok(profiles
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != initiator)
        .map(|(j, b)| TrustScore {
            device: j,
            trust: pair_score(a, b, weights),
        })
        .collect())
}

/// All pairwise baseline scores; the diagonal is 1 only for identical profiles.
pub fn baseline_matrix(ds: &TraceDataset, weights: &BaselineWeights) -> Result<Array2<f64>> {
    weights.validate()?;
    let profiles = ds.profiles();
    let n = profiles.len();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let s = pair_score(&profiles[i], &profiles[j], weights);
            m[[i, j]] = s;
            m[[j, i]] = s;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::social::CollaborationRecord;
    use std::path::Path;

    fn profile(pos: [f64; 2], interests: &[usize], groups: &[usize], events: &[(usize, bool)]) -> DeviceProfile {
        let mut p = DeviceProfile::at(0, pos);
        p.interests = interests.iter().copied().collect();
        p.friendship_groups = groups.iter().copied().collect();
        p.collaborations = events
            .iter()
            .map(|&(event, success)| CollaborationRecord { event, success })
            .collect();
        p
    }

    #[test]
    fn identical_profiles_score_one() {
        let a = profile([1.0, 2.0], &[1, 2], &[0], &[(0, true)]);
        assert!((pair_score(&a, &a.clone(), &BaselineWeights::default()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_distant_profiles_score_near_zero() {
        let a = profile([0.0, 0.0], &[1], &[0], &[(0, true)]);
        let b = profile([50.0, 0.0], &[2], &[1], &[(1, true)]);
        assert!(pair_score(&a, &b, &BaselineWeights::default()) < 1e-12);
    }

    #[test]
    fn spatial_only_weight() {
        let a = profile([3.0, 3.0], &[1], &[], &[]);
        let b = profile([3.0, 3.0], &[2], &[4], &[]);
        let w = BaselineWeights {
            spatial: 1.0,
            interest: 0.0,
            friendship: 0.0,
            collaboration: 0.0,
        };
        assert_eq!(pair_score(&a, &b, &w), 1.0);
    }

    #[test]
    fn collaboration_success_ratio() {
        let a = profile([0.0, 0.0], &[], &[], &[(0, true), (1, false), (2, true)]);
        let b = profile([0.0, 0.0], &[], &[], &[(0, true), (1, false)]);
        assert_eq!(attribute_similarities(&a, &b)[3], 0.5);
    }

    #[test]
    fn weight_parsing() {
        let w: BaselineWeights = "0.4, 0.2,0.2,0.2".parse().unwrap();
        assert_eq!(w.spatial, 0.4);
        assert!("0.5,0.5,0.5,0.5".parse::<BaselineWeights>().is_err());
        assert!("1,0,0".parse::<BaselineWeights>().is_err());
        assert!("a,b,c,d".parse::<BaselineWeights>().is_err());
    }

    #[test]
    fn scores_lie_in_unit_interval() {
        let ds = TraceDataset::from_json(
            r#"{"interest_universe": ["a", "b"], "devices": [
                {"id": 1, "pos": [0, 0], "interests": ["a"]},
                {"id": 2, "pos": [0.5, 0], "interests": ["a", "b"]},
                {"id": 3, "pos": [4, 4]}]}"#,
            Path::new("t"),
        )
        .unwrap();
        let m = baseline_matrix(&ds, &BaselineWeights::default()).unwrap();
        assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        let s = baseline_weighted_sum_trust(&ds, 0, &BaselineWeights::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].trust, m[[0, 1]]);
    }
}
