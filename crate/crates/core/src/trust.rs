//! Trust values from device embeddings.
//!
//! Trust between two devices is the cosine similarity of their embeddings, so
//! it is symmetric: `T(i → j) = T(j → i)`. Devices with a zero embedding have
//! trust 0 with everyone and therefore never clear a positive threshold.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::contrast::cosine;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.6;

pub fn trust_value(x_i: ArrayView1<f64>, x_j: ArrayView1<f64>) -> f64 {
    cosine(x_i, x_j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustScore {
    pub device: usize,
    pub trust: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub initiator: usize,
    /// Every other device, highest trust first; ties keep ascending index.
    pub scores: Vec<TrustScore>,
    pub threshold: f64,
    /// Devices with trust at or above the threshold, ascending.
    pub trusted_set: Vec<usize>,
    pub most_trusted: TrustScore,
}

impl TrustReport {
    /// Sort arbitrary scores into a report. Stable sorting keeps ascending
    /// index among equal scores.
    pub fn from_scores(initiator: usize, mut scores: Vec<TrustScore>, threshold: f64) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Data("trust report needs at least two devices".into()));
        }
        scores.sort_by_key(|s| s.device);
        scores.sort_by(|a, b| b.trust.total_cmp(&a.trust));
        Ok(TrustReport {
            initiator,
            trusted_set: trusted_set(&scores, threshold),
            most_trusted: scores[0],
            scores,
            threshold,
        })
    }

    /// Recompute the trusted set for another threshold.
    pub fn with_threshold(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        out.threshold = threshold;
        out.trusted_set = trusted_set(&self.scores, threshold);
        out
    }

    pub fn trust_of(&self, device: usize) -> Option<f64> {
        self.scores.iter().find(|s| s.device == device).map(|s| s.trust)
    }
}

fn trusted_set(scores: &[TrustScore], threshold: f64) -> Vec<usize> {
    let mut set: Vec<usize> = scores
        .iter()
        .filter(|s| s.trust >= threshold)
        .map(|s| s.device)
        .collect();
    set.sort_unstable();
    set
}

/// Rank every other device by its trust as seen from `initiator`.
pub fn rank_trust(embeddings: &Array2<f64>, initiator: usize, threshold: f64) -> Result<TrustReport> {
    let n = embeddings.nrows();
    if initiator >= n {
        return Err(Error::Parameter(format!(
            "initiator {initiator} out of range for {n} devices"
        )));
    }
    if n < 2 {
        return Err(Error::Data("trust report needs at least two devices".into()));
    }
    let anchor = embeddings.row(initiator);
    let scores = (0..n)
        .filter(|&j| j != initiator)
        .map(|j| TrustScore {
            device: j,
            trust: trust_value(anchor, embeddings.row(j)),
        })
        .collect();
    TrustReport::from_scores(initiator, scores, threshold)
}

/// All pairwise trust values. Exactly symmetric; unit diagonal for non-zero rows.
pub fn trust_matrix(embeddings: &Array2<f64>) -> Array2<f64> {
    let n = embeddings.nrows();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let t = trust_value(embeddings.row(i), embeddings.row(j));
            m[[i, j]] = t;
            m[[j, i]] = t;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn basic_values() {
        let a = array![0.3, -2.0];
        assert!((trust_value(a.view(), a.view()) - 1.0).abs() < 1e-15);
        assert_eq!(trust_value(array![1.0, 0.0].view(), array![0.0, 4.0].view()), 0.0);
        assert_eq!(trust_value(a.view(), (-&a).view()), -1.0);
    }

    #[test]
    fn three_device_example() {
        let e = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let r = rank_trust(&e, 0, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.most_trusted, TrustScore { device: 1, trust: 1.0 });
        assert_eq!(r.trust_of(2), Some(0.0));
        assert_eq!(r.trusted_set, vec![1]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let e = Array2::from_elem((5, 3), 0.7);
        let r = rank_trust(&e, 2, 0.6).unwrap();
        assert!(r.scores.iter().all(|s| (s.trust - 1.0).abs() < 1e-15));
        assert_eq!(r.most_trusted.device, 0);
        assert_eq!(
            r.scores.iter().map(|s| s.device).collect::<Vec<_>>(),
            vec![0, 1, 3, 4]
        );
    }

    #[test]
    fn threshold_boundary() {
        let e = array![[1.0, 0.0], [0.9, (1.0f64 - 0.81).sqrt()], [0.59, (1.0f64 - 0.59 * 0.59).sqrt()]];
        let r = rank_trust(&e, 0, 0.6).unwrap();
        assert_eq!(r.trusted_set, vec![1]);
    }

    #[test]
    fn single_device_and_bad_initiator() {
        assert!(matches!(rank_trust(&array![[1.0, 2.0]], 0, 0.6), Err(Error::Data(_))));
        assert!(matches!(
            rank_trust(&array![[1.0], [2.0]], 2, 0.6),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn zero_embedding_is_never_trusted() {
        let e = array![[1.0, 1.0], [0.0, 0.0], [1.0, 0.9]];
        let r = rank_trust(&e, 0, 0.6).unwrap();
        assert_eq!(r.trust_of(1), Some(0.0));
        assert!(!r.trusted_set.contains(&1));
    }

    fn arb_embeddings() -> impl Strategy<Value = Array2<f64>> {
        (2usize..9, 1usize..5).prop_flat_map(|(n, d)| {
            prop::collection::vec(-5.0f64..5.0, n * d)
                .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn matrix_is_symmetric_bounded_and_pairwise(e in arb_embeddings()) {
            let m = trust_matrix(&e);
            prop_assert_eq!(&m, &m.t().to_owned());
            for i in 0..e.nrows() {
                for j in 0..e.nrows() {
                    prop_assert!((-1.0..=1.0).contains(&m[[i, j]]));
                    prop_assert_eq!(m[[i, j]], trust_value(e.row(i), e.row(j)));
                }
                if e.row(i).iter().any(|&v| v != 0.0) {
                    prop_assert!((m[[i, i]] - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn positive_row_scaling_changes_nothing(e in arb_embeddings(), k in 0.01f64..100.0, row in 0usize..2) {
            let mut scaled = e.clone();
            scaled.row_mut(row).mapv_inplace(|v| v * k);
            let (a, b) = (trust_matrix(&e), trust_matrix(&scaled));
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn trusted_set_shrinks_as_threshold_rises(e in arb_embeddings(), t1 in -1.0f64..1.0, dt in 0.0f64..1.0) {
            let r = rank_trust(&e, 0, t1).unwrap();
            let higher = r.with_threshold(t1 + dt);
            prop_assert!(higher.trusted_set.iter().all(|d| r.trusted_set.contains(d)));
        }

        #[test]
        fn most_trusted_attains_maximum(e in arb_embeddings()) {
            let r = rank_trust(&e, 0, 0.6).unwrap();
            let max = r.scores.iter().map(|s| s.trust).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(r.most_trusted.trust, max);
            prop_assert!(!r.scores.iter().any(|s| s.device == 0));
            // Monotone transform of the scores keeps the argmax.
            let transformed = r.scores.iter().map(|s| ((s.trust * 3.0).exp(), s.device))
                .fold((f64::NEG_INFINITY, usize::MAX), |best, c| if c.0 > best.0 { c } else { best });
            prop_assert_eq!(transformed.1, r.most_trusted.device);
        }
    }
}
