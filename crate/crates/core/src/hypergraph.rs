//! Hypergraph representation shared by every other module.
//!
//! Hyperedge membership is kept as sorted device-index lists; the incidence
//! matrix is materialized densely since the target scale is a few hundred
//! devices at most.

use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which social attribute produced a hyperedge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperedgeKind {
    Physical,
    Interest,
    Friendship,
    Collaboration,
}

impl HyperedgeKind {
    pub const ALL: [HyperedgeKind; 4] = [
        HyperedgeKind::Physical,
        HyperedgeKind::Interest,
        HyperedgeKind::Friendship,
        HyperedgeKind::Collaboration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HyperedgeKind::Physical => "physical",
            HyperedgeKind::Interest => "interest",
            HyperedgeKind::Friendship => "friendship",
            HyperedgeKind::Collaboration => "collaboration",
        }
    }
}

impl fmt::Display for HyperedgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    /// Sorted, deduplicated device indices.
    pub members: Vec<usize>,
    pub weight: f64,
    pub kind: HyperedgeKind,
}

impl Hyperedge {
    pub fn new(members: impl IntoIterator<Item = usize>, weight: f64, kind: HyperedgeKind) -> Self {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        Self {
            members,
            weight,
            kind,
        }
    }

    pub fn contains(&self, device: usize) -> bool {
        self.members.binary_search(&device).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    num_devices: usize,
    hyperedges: Vec<Hyperedge>,
    device_features: Array2<f64>,
}

impl Hypergraph {
    /// Featureless hypergraph: devices get one-hot input features.
    pub fn new(num_devices: usize, hyperedges: Vec<Hyperedge>) -> Self {
        Self {
            num_devices,
            hyperedges,
            device_features: Array2::eye(num_devices),
        }
    }

    pub fn with_features(
        num_devices: usize,
        hyperedges: Vec<Hyperedge>,
        device_features: Array2<f64>,
    ) -> Result<Self> {
        if device_features.nrows() != num_devices {
            return Err(Error::Structural(format!(
                "feature matrix has {} rows for {} devices",
                device_features.nrows(),
                num_devices
            )));
        }
        Ok(Self {
            num_devices,
            hyperedges,
            device_features,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.num_devices
    }

    pub fn num_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn device_features(&self) -> &Array2<f64> {
        &self.device_features
    }

    pub fn weights(&self) -> Array1<f64> {
        self.hyperedges.iter().map(|e| e.weight).collect()
    }

    pub fn count_kind(&self, kind: HyperedgeKind) -> usize {
        self.hyperedges.iter().filter(|e| e.kind == kind).count()
    }

    /// Dense binary incidence: entry (i, n) is 1 iff device i belongs to hyperedge n.
    pub fn build_incidence(&self) -> IncidenceMatrix {
        let mut h = Array2::zeros((self.num_devices, self.hyperedges.len()));
        for (n, edge) in self.hyperedges.iter().enumerate() {
            for &i in &edge.members {
                h[[i, n]] = 1.0;
            }
        }
        IncidenceMatrix(h)
    }

    pub fn compute_degrees(&self, inc: &IncidenceMatrix) -> DegreeVectors {
        DegreeVectors::from_incidence(inc, &self.weights())
    }

    /// Concatenate part-hypergraphs over the same device set, preserving order.
    pub fn concat(parts: &[Hypergraph]) -> Result<Hypergraph> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Structural("cannot concatenate zero hypergraphs".into()))?;
        let mut hyperedges = Vec::new();
        for (k, part) in parts.iter().enumerate() {
            if part.num_devices != first.num_devices {
                return Err(Error::Structural(format!(
                    "part {k} has {} devices, expected {}",
                    part.num_devices, first.num_devices
                )));
            }
            if part.device_features != first.device_features {
                return Err(Error::Structural(format!(
                    "part {k} carries different device features"
                )));
            }
            hyperedges.extend(part.hyperedges.iter().cloned());
        }
        Ok(Hypergraph {
            num_devices: first.num_devices,
            hyperedges,
            device_features: first.device_features.clone(),
        })
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut covered = vec![false; self.num_devices];
        for (n, edge) in self.hyperedges.iter().enumerate() {
            if edge.members.is_empty() {
                out.push(Diagnostic::error(n, DiagnosticKind::EmptyHyperedge));
            }
            for &i in &edge.members {
                if i >= self.num_devices {
                    out.push(Diagnostic::error(n, DiagnosticKind::DeviceOutOfRange(i)));
                } else {
                    covered[i] = true;
                }
            }
            if !edge.weight.is_finite() {
                out.push(Diagnostic::error(n, DiagnosticKind::NonFiniteWeight));
            } else if edge.weight < 0.0 {
                out.push(Diagnostic::error(n, DiagnosticKind::NegativeWeight(edge.weight)));
            }
        }
        if self.device_features.nrows() != self.num_devices {
            out.push(Diagnostic {
                severity: Severity::Error,
                hyperedge: None,
                kind: DiagnosticKind::FeatureShape,
            });
        } else if self.device_features.iter().any(|v| !v.is_finite()) {
            out.push(Diagnostic {
                severity: Severity::Error,
                hyperedge: None,
                kind: DiagnosticKind::NonFiniteFeature,
            });
        }
        for (i, hit) in covered.into_iter().enumerate() {
            if !hit {
                out.push(Diagnostic {
                    severity: Severity::Warning,
                    hyperedge: None,
                    kind: DiagnosticKind::IsolatedDevice(i),
                });
            }
        }
        out
    }

    /// Fails on the first error-level diagnostic; warnings pass.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().into_iter().find(|d| d.severity == Severity::Error) {
            Some(d) => Err(Error::Structural(d.to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix(pub Array2<f64>);

impl IncidenceMatrix {
    pub fn num_devices(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_hyperedges(&self) -> usize {
        self.0.ncols()
    }

    pub fn contains(&self, device: usize, hyperedge: usize) -> bool {
        self.0[[device, hyperedge]] != 0.0
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVectors {
    /// δ(a_i) = Σ_n w_n h(i, n)
    pub device_degrees: Array1<f64>,
    /// δ(e_n) = Σ_i h(i, n)
    pub hyperedge_degrees: Array1<f64>,
}

impl DegreeVectors {
    pub fn from_incidence(inc: &IncidenceMatrix, weights: &Array1<f64>) -> Self {
        let h = &inc.0;
        Self {
            device_degrees: h.dot(weights),
            hyperedge_degrees: h.sum_axis(ndarray::Axis(0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticKind {
    EmptyHyperedge,
    DeviceOutOfRange(usize),
    NegativeWeight(f64),
    NonFiniteWeight,
    FeatureShape,
    NonFiniteFeature,
    IsolatedDevice(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub hyperedge: Option<usize>,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    fn error(hyperedge: usize, kind: DiagnosticKind) -> Self {
        Self {
            severity: Severity::Error,
            hyperedge: Some(hyperedge),
            kind,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}: ")?;
        if let Some(n) = self.hyperedge {
            write!(f, "hyperedge {n}: ")?;
        }
        match &self.kind {
            DiagnosticKind::EmptyHyperedge => write!(f, "empty hyperedge"),
            DiagnosticKind::DeviceOutOfRange(i) => write!(f, "device index {i} out of range"),
            DiagnosticKind::NegativeWeight(w) => write!(f, "negative weight {w}"),
            DiagnosticKind::NonFiniteWeight => write!(f, "non-finite weight"),
            DiagnosticKind::FeatureShape => write!(f, "feature rows do not match device count"),
            DiagnosticKind::NonFiniteFeature => write!(f, "non-finite device feature"),
            DiagnosticKind::IsolatedDevice(i) => write!(f, "device {i} belongs to no hyperedge"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn edge(m: &[usize], w: f64) -> Hyperedge {
        Hyperedge::new(m.iter().copied(), w, HyperedgeKind::Interest)
    }

    #[test]
    fn incidence_small_cases() {
        let hg = Hypergraph::new(2, vec![edge(&[0, 1], 1.0)]);
        assert_eq!(hg.build_incidence().0, array![[1.0], [1.0]]);

        let hg = Hypergraph::new(3, vec![edge(&[0], 1.0), edge(&[1, 2], 1.0)]);
        assert_eq!(
            hg.build_incidence().0,
            array![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]
        );

        let hg = Hypergraph::new(1, vec![]);
        assert_eq!(hg.build_incidence().0.dim(), (1, 0));
    }

    #[test]
    fn degrees_hand_evaluated() {
        let hg = Hypergraph::new(2, vec![edge(&[0], 2.0), edge(&[0, 1], 3.0)]);
        let inc = hg.build_incidence();
        assert_eq!(inc.0, array![[1.0, 1.0], [0.0, 1.0]]);
        let deg = hg.compute_degrees(&inc);
        assert_eq!(deg.device_degrees, array![5.0, 3.0]);
        assert_eq!(deg.hyperedge_degrees, array![1.0, 2.0]);
    }

    #[test]
    fn zero_weights_give_zero_device_degree() {
        let hg = Hypergraph::new(3, vec![edge(&[0, 1], 0.0), edge(&[1, 2], 0.0)]);
        let deg = hg.compute_degrees(&hg.build_incidence());
        assert!(deg.device_degrees.iter().all(|&d| d == 0.0));
        assert_eq!(deg.hyperedge_degrees, array![2.0, 2.0]);
    }

    #[test]
    fn single_spanning_hyperedge() {
        let hg = Hypergraph::new(4, vec![edge(&[0, 1, 2, 3], 1.0)]);
        let deg = hg.compute_degrees(&hg.build_incidence());
        assert_eq!(deg.hyperedge_degrees, array![4.0]);
        assert_eq!(deg.device_degrees, array![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn concat_preserves_order_and_kinds() {
        let a = Hypergraph::new(
            3,
            vec![
                Hyperedge::new([0], 1.0, HyperedgeKind::Physical),
                Hyperedge::new([1, 2], 1.0, HyperedgeKind::Physical),
            ],
        );
        let b = Hypergraph::new(
            3,
            vec![
                edge(&[0, 1], 1.0),
                edge(&[2], 1.0),
                Hyperedge::new([0, 2], 0.0, HyperedgeKind::Collaboration),
            ],
        );
        let c = Hypergraph::concat(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.num_hyperedges(), 5);
        assert_eq!(&c.hyperedges()[..2], a.hyperedges());
        assert_eq!(&c.hyperedges()[2..], b.hyperedges());
        assert_eq!(c.hyperedges()[4].kind, HyperedgeKind::Collaboration);

        assert_eq!(Hypergraph::concat(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn concat_rejects_mismatched_device_counts() {
        let a = Hypergraph::new(3, vec![]);
        let b = Hypergraph::new(4, vec![]);
        assert!(matches!(
            Hypergraph::concat(&[a, b]),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn validate_reports_each_violation() {
        let ok = Hypergraph::new(2, vec![edge(&[0, 1], 1.0)]);
        assert!(ok.validate().is_empty());

        let out_of_range = Hypergraph::new(2, vec![edge(&[0, 1], 1.0), edge(&[2], 1.0)]);
        let d = out_of_range.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::DeviceOutOfRange(2));

        let negative = Hypergraph::new(2, vec![edge(&[0, 1], -1.0)]);
        let d = negative.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::NegativeWeight(-1.0));

        let empty = Hypergraph::new(1, vec![edge(&[0], 1.0), edge(&[], 1.0)]);
        assert_eq!(empty.validate()[0].kind, DiagnosticKind::EmptyHyperedge);

        let isolated = Hypergraph::new(3, vec![edge(&[0, 1], 1.0)]);
        let d = isolated.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Warning);
        assert!(isolated.ensure_valid().is_ok());
    }

    fn arb_hypergraph() -> impl Strategy<Value = Hypergraph> {
        (1usize..=10).prop_flat_map(|n| {
            prop::collection::vec(
                (prop::collection::btree_set(0..n, 1..=n), 0.0f64..5.0),
                0..=10,
            )
            .prop_map(move |edges| {
                Hypergraph::new(
                    n,
                    edges
                        .into_iter()
                        .map(|(m, w)| Hyperedge::new(m, w, HyperedgeKind::Interest))
                        .collect(),
                )
            })
        })
    }

    proptest! {
        #[test]
        fn degrees_match_double_loop(hg in arb_hypergraph()) {
            let inc = hg.build_incidence();
            let deg = hg.compute_degrees(&inc);
            for i in 0..hg.num_devices() {
                let mut dev = 0.0;
                for (n, e) in hg.hyperedges().iter().enumerate() {
                    let member = e.members.contains(&i);
                    prop_assert_eq!(inc.0[[i, n]] == 1.0, member);
                    if member {
                        dev += e.weight;
                    }
                }
                prop_assert!((deg.device_degrees[i] - dev).abs() <= 1e-12 * dev.abs().max(1.0));
            }
            for (n, e) in hg.hyperedges().iter().enumerate() {
                prop_assert_eq!(deg.hyperedge_degrees[n], e.members.len() as f64);
            }
        }

        #[test]
        fn handshake_identity(hg in arb_hypergraph()) {
            let deg = hg.compute_degrees(&hg.build_incidence());
            let lhs: f64 = deg.device_degrees.sum();
            let rhs: f64 = hg.hyperedges().iter().map(|e| e.weight * e.members.len() as f64).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn concat_is_associative(a in arb_hypergraph(), b in arb_hypergraph(), c in arb_hypergraph()) {
            let n = a.num_devices();
            let reshape = |h: Hypergraph| Hypergraph::new(n, h.hyperedges().iter().map(|e| {
                Hyperedge::new(e.members.iter().map(|&i| i % n), e.weight, e.kind)
            }).collect());
            let (b, c) = (reshape(b), reshape(c));
            let left = Hypergraph::concat(&[Hypergraph::concat(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
            let right = Hypergraph::concat(&[a, Hypergraph::concat(&[b, c]).unwrap()]).unwrap();
            prop_assert_eq!(left, right);
        }
    }
}
