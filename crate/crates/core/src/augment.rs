//! Stochastic masking of devices, hyperedges and memberships.
//!
//! Masking a device zeroes its feature row and its incidence row; masking a
//! hyperedge zeroes its incidence column; masking a membership zeroes one
//! incidence entry. Dimensions never change, so both views feed the same
//! encoder.
//!
//! Draw order for one view: the device mask, then the hyperedge mask, then the
//! membership mask in row-major order, all from one ChaCha8 stream. View `v`
//! uses stream `v` of the generator seeded with `seed`.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, IncidenceMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub p_device: f64,
    pub p_hyperedge: f64,
    pub p_membership: f64,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            p_device: 0.2,
            p_hyperedge: 0.2,
            p_membership: 0.2,
            seed: 0,
        }
    }
}

impl MaskConfig {
    pub fn none() -> Self {
        Self {
            p_device: 0.0,
            p_hyperedge: 0.0,
            p_membership: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_device", self.p_device),
            ("p_hyperedge", self.p_hyperedge),
            ("p_membership", self.p_membership),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Masks {
    pub device: Array1<f64>,
    pub hyperedge: Array1<f64>,
    pub membership: Array2<f64>,
}

/// A masked copy of the hypergraph together with the masks that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub masks: Masks,
    pub masked_features: Array2<f64>,
    pub masked_incidence: Array2<f64>,
    /// Hyperedge weights, unmasked (a dropped hyperedge already has an empty column).
    pub weights: Array1<f64>,
}

impl AugmentedView {
    /// The unmasked hypergraph as a view.
    pub fn identity(hg: &Hypergraph, inc: &IncidenceMatrix) -> Self {
        let masks = Masks {
            device: Array1::ones(hg.num_devices()),
            hyperedge: Array1::ones(hg.num_hyperedges()),
            membership: Array2::ones((hg.num_devices(), hg.num_hyperedges())),
        };
        apply_masks(hg, inc, masks)
    }

    pub fn num_devices(&self) -> usize {
        self.masked_incidence.nrows()
    }

    pub fn num_hyperedges(&self) -> usize {
        self.masked_incidence.ncols()
    }
}

fn bernoulli_keep<R: Rng>(rng: &mut R, drop: f64) -> f64 {
    if rng.random_bool(1.0 - drop) {
        1.0
    } else {
        0.0
    }
}

/// Draw the three keep-masks; each entry is 1 with probability `1 - p`.
pub fn sample_masks<R: Rng>(
    cfg: &MaskConfig,
    num_devices: usize,
    num_hyperedges: usize,
    rng: &mut R,
) -> Masks {
    let device = (0..num_devices)
        .map(|_| bernoulli_keep(rng, cfg.p_device))
        .collect();
    let hyperedge = (0..num_hyperedges)
        .map(|_| bernoulli_keep(rng, cfg.p_hyperedge))
        .collect();
    let membership = Array2::from_shape_simple_fn((num_devices, num_hyperedges), || {
        bernoulli_keep(rng, cfg.p_membership)
    });
    Masks {
        device,
        hyperedge,
        membership,
    }
}

pub fn apply_masks(hg: &Hypergraph, inc: &IncidenceMatrix, masks: Masks) -> AugmentedView {
    let mut masked_incidence = &inc.0 * &masks.membership;
    for ((i, n), v) in masked_incidence.indexed_iter_mut() {
        *v *= masks.device[i] * masks.hyperedge[n];
    }
    let mut masked_features = hg.device_features().clone();
    for (mut row, &keep) in masked_features.outer_iter_mut().zip(masks.device.iter()) {
        row *= keep;
    }
    AugmentedView {
        masks,
        masked_features,
        masked_incidence,
        weights: hg.weights(),
    }
}

pub fn view_rng(seed: u64, view: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(view);
    rng
}

/// Two independently masked views of `hg`.
pub fn make_views(
    hg: &Hypergraph,
    inc: &IncidenceMatrix,
    cfg: &MaskConfig,
) -> Result<(AugmentedView, AugmentedView)> {
    cfg.validate()?;
    let (a, e) = (hg.num_devices(), hg.num_hyperedges());
    let first = sample_masks(cfg, a, e, &mut view_rng(cfg.seed, 1));
    let second = sample_masks(cfg, a, e, &mut view_rng(cfg.seed, 2));
    Ok((apply_masks(hg, inc, first), apply_masks(hg, inc, second)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{Hyperedge, HyperedgeKind};

    fn sample_hg() -> Hypergraph {
        Hypergraph::new(
            4,
            vec![
                Hyperedge::new([0, 1], 1.0, HyperedgeKind::Physical),
                Hyperedge::new([1, 2, 3], 1.0, HyperedgeKind::Interest),
                Hyperedge::new([0, 3], 0.0, HyperedgeKind::Collaboration),
            ],
        )
    }

    #[test]
    fn zero_and_one_probabilities_are_constant() {
        let cfg = MaskConfig {
            p_device: 0.0,
            p_hyperedge: 1.0,
            p_membership: 0.0,
            seed: 5,
        };
        let m = sample_masks(&cfg, 50, 30, &mut view_rng(5, 1));
        assert!(m.device.iter().all(|&v| v == 1.0));
        assert!(m.hyperedge.iter().all(|&v| v == 0.0));
        assert!(m.membership.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn membership_keep_rate_concentrates() {
        let cfg = MaskConfig {
            p_membership: 0.2,
            ..MaskConfig::none()
        };
        let m = sample_masks(&cfg, 100, 100, &mut view_rng(17, 1));
        let frac = m.membership.sum() / 10_000.0;
        assert!((frac - 0.8).abs() <= 3.0 * (0.2f64 * 0.8 / 10_000.0).sqrt());
    }

    #[test]
    fn identity_masks_leave_everything() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let v = AugmentedView::identity(&hg, &inc);
        assert_eq!(v.masked_incidence, inc.0);
        assert_eq!(&v.masked_features, hg.device_features());
    }

    #[test]
    fn device_mask_zeroes_row_and_features() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let mut masks = AugmentedView::identity(&hg, &inc).masks;
        masks.device[1] = 0.0;
        let v = apply_masks(&hg, &inc, masks);
        assert!(v.masked_incidence.row(1).iter().all(|&x| x == 0.0));
        assert!(v.masked_features.row(1).iter().all(|&x| x == 0.0));
        assert_eq!(v.masked_incidence.row(0), inc.0.row(0));
    }

    #[test]
    fn hyperedge_mask_zeroes_column() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let mut masks = AugmentedView::identity(&hg, &inc).masks;
        masks.hyperedge[1] = 0.0;
        let v = apply_masks(&hg, &inc, masks);
        assert!(v.masked_incidence.column(1).iter().all(|&x| x == 0.0));
        assert_eq!(v.masked_incidence.column(0), inc.0.column(0));
    }

    #[test]
    fn single_membership_mask_zeroes_one_entry() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let mut masks = AugmentedView::identity(&hg, &inc).masks;
        masks.membership[[2, 1]] = 0.0;
        let v = apply_masks(&hg, &inc, masks);
        let diff = &inc.0 - &v.masked_incidence;
        assert_eq!(diff.sum(), 1.0);
        assert_eq!(diff[[2, 1]], 1.0);
    }

    #[test]
    fn zero_probability_views_equal_original() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let (a, b) = make_views(&hg, &inc, &MaskConfig::none()).unwrap();
        assert_eq!(a.masked_incidence, inc.0);
        assert_eq!(a, b);
    }

    #[test]
    fn same_seed_same_views() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let cfg = MaskConfig {
            seed: 99,
            ..MaskConfig::default()
        };
        assert_eq!(
            make_views(&hg, &inc, &cfg).unwrap(),
            make_views(&hg, &inc, &cfg).unwrap()
        );
    }

    #[test]
    fn two_views_differ_on_many_devices() {
        let hg = Hypergraph::new(76, vec![Hyperedge::new(0..76, 1.0, HyperedgeKind::Physical)]);
        let inc = hg.build_incidence();
        for seed in 0..20 {
            let cfg = MaskConfig {
                p_device: 0.3,
                p_hyperedge: 0.0,
                p_membership: 0.0,
                seed,
            };
            let (a, b) = make_views(&hg, &inc, &cfg).unwrap();
            assert_ne!(a.masks.device, b.masks.device, "seed {seed}");
        }
    }

    #[test]
    fn masking_is_monotone_and_pure() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let before = (hg.clone(), inc.clone());
        for seed in 0..30 {
            let cfg = MaskConfig {
                p_device: 0.3,
                p_hyperedge: 0.3,
                p_membership: 0.3,
                seed,
            };
            let (a, b) = make_views(&hg, &inc, &cfg).unwrap();
            for v in [a, b] {
                assert!(v
                    .masked_incidence
                    .iter()
                    .zip(inc.0.iter())
                    .all(|(m, o)| m <= o));
            }
        }
        assert_eq!((hg, inc), before);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        let hg = sample_hg();
        let inc = hg.build_incidence();
        let cfg = MaskConfig {
            p_device: 1.5,
            ..MaskConfig::none()
        };
        assert!(make_views(&hg, &inc, &cfg).is_err());
    }
}
