//! Device, hyperedge and membership contrast losses.
//!
//! Device and hyperedge contrast are symmetric InfoNCE over the cosine
//! similarities between the two views; every row of the other view is in the
//! denominator, including the positive. Membership contrast scores
//! device/hyperedge pairs with `σ(x_aᵀ B x_e)` and contrasts each real
//! membership against one sampled non-member on each anchor side.
//!
//! A zero embedding has cosine 0 with everything and contributes no gradient
//! through the normalization.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::IncidenceMatrix;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastConfig {
    pub tau_dc: f64,
    pub tau_ec: f64,
    pub tau_mc: f64,
    pub omega_ec: f64,
    pub omega_mc: f64,
    pub neg_seed: u64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self {
            tau_dc: 0.5,
            tau_ec: 0.5,
            tau_mc: 0.5,
            omega_ec: 1.0,
            omega_mc: 1.0,
            neg_seed: 0,
        }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("tau_dc", self.tau_dc), ("tau_ec", self.tau_ec), ("tau_mc", self.tau_mc)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {t}")));
            }
        }
        for (name, w) in [("omega_ec", self.omega_ec), ("omega_mc", self.omega_mc)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be non-negative, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub device: f64,
    pub hyperedge: f64,
    pub membership: f64,
}

pub fn total_loss(l_dc: f64, l_ec: f64, l_mc: f64, cfg: &ContrastConfig) -> f64 {
    l_dc + cfg.omega_ec * l_ec + cfg.omega_mc * l_mc
}

pub fn cosine(u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0)
}

fn normalize_rows(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut u = x.clone();
    for (mut row, &n) in u.outer_iter_mut().zip(norms.iter()) {
        if n > 0.0 {
            row /= n;
        }
    }
    (u, norms)
}

/// Pull a gradient w.r.t. unit rows back to the raw rows.
fn normalize_rows_backward(u: &Array2<f64>, norms: &Array1<f64>, du: &Array2<f64>) -> Array2<f64> {
    let mut dx = Array2::zeros(u.raw_dim());
    for i in 0..u.nrows() {
        let n = norms[i];
        if n == 0.0 {
            continue;
        }
        let ui = u.row(i);
        let proj = ui.dot(&du.row(i));
        let mut row = dx.row_mut(i);
        row.assign(&du.row(i));
        row.scaled_add(-proj, &ui);
        row /= n;
    }
    dx
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

type ViewGrads = Option<(Array2<f64>, Array2<f64>)>;

/// Symmetric InfoNCE between matching rows of two views, with gradients.
fn paired_info_nce_impl(
    x1: &Array2<f64>,
    x2: &Array2<f64>,
    tau: f64,
    want_grad: bool,
) -> (f64, ViewGrads) {
    assert_eq!(x1.dim(), x2.dim(), "views must have identical shapes");
    let n = x1.nrows();
    if n == 0 {
        let z = || Array2::zeros(x1.raw_dim());
        return (0.0, want_grad.then(|| (z(), z())));
    }
    let (u1, n1) = normalize_rows(x1);
    let (u2, n2) = normalize_rows(x2);
    let logits = u1.dot(&u2.t()) / tau;

    let row_lse: Vec<f64> = (0..n).map(|i| log_sum_exp(logits.row(i).iter().copied())).collect();
    let col_lse: Vec<f64> = (0..n).map(|j| log_sum_exp(logits.column(j).iter().copied())).collect();
    let mut loss = 0.0;
    for i in 0..n {
        loss += 2.0 * (-logits[[i, i]]) + row_lse[i] + col_lse[i];
    }
    let scale = 1.0 / (2.0 * n as f64);
    loss *= scale;
    if !want_grad {
        return (loss, None);
    }

    // ∂L/∂S_ij = (P_ij + Q_ij − 2δ_ij) / (2nτ), P row softmax, Q column softmax.
    let mut g = Array2::zeros((n, n));
    for ((i, j), v) in g.indexed_iter_mut() {
        let s = logits[[i, j]];
        let mut val = (s - row_lse[i]).exp() + (s - col_lse[j]).exp();
        if i == j {
            val -= 2.0;
        }
        *v = val * scale / tau;
    }
    let du1 = g.dot(&u2);
    let du2 = g.t().dot(&u1);
    let dx1 = normalize_rows_backward(&u1, &n1, &du1);
    let dx2 = normalize_rows_backward(&u2, &n2, &du2);
    (loss, Some((dx1, dx2)))
}

pub fn paired_info_nce(x1: &Array2<f64>, x2: &Array2<f64>, tau: f64) -> f64 {
    paired_info_nce_impl(x1, x2, tau, false).0
}

/// Loss and its gradients with respect to both views.
pub fn paired_info_nce_grad(
    x1: &Array2<f64>,
    x2: &Array2<f64>,
    tau: f64,
) -> (f64, Array2<f64>, Array2<f64>) {
    let (l, g) = paired_info_nce_impl(x1, x2, tau, true);
    let (a, b) = g.expect("gradients requested");
    (l, a, b)
}

pub fn device_contrast_loss(x_a1: &Array2<f64>, x_a2: &Array2<f64>, tau_dc: f64) -> f64 {
    paired_info_nce(x_a1, x_a2, tau_dc)
}

pub fn hyperedge_contrast_loss(x_e1: &Array2<f64>, x_e2: &Array2<f64>, tau_ec: f64) -> f64 {
    paired_info_nce(x_e1, x_e2, tau_ec)
}

/// `σ(x_aᵀ B x_e)`.
pub fn bilinear_score(x_a: ArrayView1<f64>, x_e: ArrayView1<f64>, bilinear: &Array2<f64>) -> f64 {
    sigmoid(x_a.dot(&bilinear.dot(&x_e)))
}

/// Negatives drawn for one (positive pair, view direction).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledNegatives {
    /// A hyperedge the device does not belong to.
    pub hyperedge: Option<usize>,
    /// A device that does not belong to the hyperedge.
    pub device: Option<usize>,
}

/// Real memberships of the original hypergraph with their sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipNegatives {
    pub positives: Vec<(usize, usize)>,
    /// Indexed `[positive][direction]`; direction 0 pairs view-1 devices with
    /// view-2 hyperedges, direction 1 the reverse.
    pub samples: Vec<[SampledNegatives; 2]>,
}

impl MembershipNegatives {
    /// Anchor sides with no valid negative.
    pub fn skipped_sides(&self) -> usize {
        self.samples
            .iter()
            .flatten()
            .map(|s| s.hyperedge.is_none() as usize + s.device.is_none() as usize)
            .sum()
    }
}

/// Sample one negative per anchor side for every membership, uniformly over
/// the complement in the original incidence.
pub fn sample_membership_negatives(inc: &IncidenceMatrix, seed: u64) -> MembershipNegatives {
    let (num_a, num_e) = (inc.num_devices(), inc.num_hyperedges());
    let outside_edges: Vec<Vec<usize>> = (0..num_a)
        .map(|i| (0..num_e).filter(|&n| !inc.contains(i, n)).collect())
        .collect();
    let outside_devices: Vec<Vec<usize>> = (0..num_e)
        .map(|n| (0..num_a).filter(|&i| !inc.contains(i, n)).collect())
        .collect();
    let mut rng = seeding::rng(seed);
    let mut pick = |pool: &Vec<usize>| -> Option<usize> {
        (!pool.is_empty()).then(|| pool[rng.random_range(0..pool.len())])
    };
    let mut positives = Vec::new();
    let mut samples = Vec::new();
    for (i, edges_out) in outside_edges.iter().enumerate() {
        for (n, devices_out) in outside_devices.iter().enumerate() {
            if !inc.contains(i, n) {
                continue;
            }
            positives.push((i, n));
            let mut draw = || SampledNegatives {
                hyperedge: pick(edges_out),
                device: pick(devices_out),
            };
            let first = draw();
            let second = draw();
            samples.push([first, second]);
        }
    }
    MembershipNegatives { positives, samples }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipLoss {
    pub value: f64,
    pub skipped_sides: usize,
}

/// Gradients of the membership loss.
#[derive(Debug, Clone)]
pub struct MembershipGrad {
    pub device_1: Array2<f64>,
    pub hyperedge_2: Array2<f64>,
    pub device_2: Array2<f64>,
    pub hyperedge_1: Array2<f64>,
    pub bilinear: Array2<f64>,
}

struct DirectionScores {
    scores: Array2<f64>,
}

impl DirectionScores {
    fn new(x_a: &Array2<f64>, x_e: &Array2<f64>, bilinear: &Array2<f64>) -> Self {
        let logits = x_a.dot(bilinear).dot(&x_e.t());
        Self {
            scores: logits.mapv(sigmoid),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn membership_impl(
    x_a1: &Array2<f64>,
    x_e2: &Array2<f64>,
    x_a2: &Array2<f64>,
    x_e1: &Array2<f64>,
    bilinear: &Array2<f64>,
    tau: f64,
    negatives: &MembershipNegatives,
    want_grad: bool,
) -> (MembershipLoss, Option<MembershipGrad>) {
    let (num_a, num_e) = (x_a1.nrows(), x_e1.nrows());
    let skipped_sides = negatives.skipped_sides();
    if num_a == 0 || num_e == 0 {
        return (
            MembershipLoss {
                value: 0.0,
                skipped_sides,
            },
            want_grad.then(|| MembershipGrad {
                device_1: Array2::zeros(x_a1.raw_dim()),
                hyperedge_2: Array2::zeros(x_e2.raw_dim()),
                device_2: Array2::zeros(x_a2.raw_dim()),
                hyperedge_1: Array2::zeros(x_e1.raw_dim()),
                bilinear: Array2::zeros(bilinear.raw_dim()),
            }),
        );
    }
    let scale = 1.0 / (2.0 * num_a as f64 * num_e as f64);
    let directions = [(x_a1, x_e2), (x_a2, x_e1)];
    let mut value = 0.0;
    let mut grads = Vec::new();
    for (dir, (x_a, x_e)) in directions.into_iter().enumerate() {
        let scored = DirectionScores::new(x_a, x_e, bilinear);
        let s = &scored.scores;
        // ∂L/∂score for every (device, hyperedge) pair touched in this direction.
        let mut d_score = Array2::<f64>::zeros((num_a, num_e));
        for (&(i, n), sample) in negatives.positives.iter().zip(&negatives.samples) {
            let sample = sample[dir];
            let pos = s[[i, n]];
            let negs = [
                sample.hyperedge.map(|k| (i, k)),
                sample.device.map(|j| (j, n)),
            ];
            for (ni, nn) in negs.into_iter().flatten() {
                let t = (s[[ni, nn]] - pos) / tau;
                value += scale * softplus(t);
                if want_grad {
                    let g = scale * sigmoid(t) / tau;
                    d_score[[ni, nn]] += g;
                    d_score[[i, n]] -= g;
                }
            }
        }
        if want_grad {
            // Through the logistic: ∂score/∂logit = s(1 − s).
            d_score.zip_mut_with(s, |d, &sv| *d *= sv * (1.0 - sv));
            let d_a = d_score.dot(&x_e.dot(&bilinear.t()));
            let d_e = d_score.t().dot(&x_a.dot(bilinear));
            let d_b = x_a.t().dot(&d_score).dot(x_e);
            grads.push((d_a, d_e, d_b));
        }
    }
    let loss = MembershipLoss {
        value,
        skipped_sides,
    };
    if !want_grad {
        return (loss, None);
    }
    let (d_a2, d_e1, d_b2) = grads.pop().unwrap();
    let (d_a1, d_e2, d_b1) = grads.pop().unwrap();
    (
        loss,
        Some(MembershipGrad {
            device_1: d_a1,
            hyperedge_2: d_e2,
            device_2: d_a2,
            hyperedge_1: d_e1,
            bilinear: d_b1 + d_b2,
        }),
    )
}

/// Membership contrast with explicitly supplied negatives.
#[allow(clippy::too_many_arguments)]
pub fn membership_contrast_with(
    x_a1: &Array2<f64>,
    x_e2: &Array2<f64>,
    x_a2: &Array2<f64>,
    x_e1: &Array2<f64>,
    bilinear: &Array2<f64>,
    tau_mc: f64,
    negatives: &MembershipNegatives,
) -> MembershipLoss {
    membership_impl(x_a1, x_e2, x_a2, x_e1, bilinear, tau_mc, negatives, false).0
}

#[allow(clippy::too_many_arguments)]
pub fn membership_contrast_grad(
    x_a1: &Array2<f64>,
    x_e2: &Array2<f64>,
    x_a2: &Array2<f64>,
    x_e1: &Array2<f64>,
    bilinear: &Array2<f64>,
    tau_mc: f64,
    negatives: &MembershipNegatives,
) -> (MembershipLoss, MembershipGrad) {
    let (l, g) = membership_impl(x_a1, x_e2, x_a2, x_e1, bilinear, tau_mc, negatives, true);
    (l, g.expect("gradients requested"))
}

/// Membership contrast with negatives drawn from `neg_seed`.
#[allow(clippy::too_many_arguments)]
pub fn membership_contrast_loss(
    x_a1: &Array2<f64>,
    x_e2: &Array2<f64>,
    x_a2: &Array2<f64>,
    x_e1: &Array2<f64>,
    inc_original: &IncidenceMatrix,
    bilinear: &Array2<f64>,
    tau_mc: f64,
    neg_seed: u64,
) -> MembershipLoss {
    let negatives = sample_membership_negatives(inc_original, neg_seed);
    membership_contrast_with(x_a1, x_e2, x_a2, x_e1, bilinear, tau_mc, &negatives)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    /// Direct evaluation of one InfoNCE term from cosines, used as an oracle.
    fn info_nce_term(anchor_pos: f64, others: &[f64], tau: f64) -> f64 {
        let num = (anchor_pos / tau).exp();
        let den: f64 = num + others.iter().map(|c| (c / tau).exp()).sum::<f64>();
        -(num / den).ln()
    }

    #[test]
    fn cosine_basic_cases() {
        assert_abs_diff_eq!(cosine(array![1.0, 0.0].view(), array![1.0, 0.0].view()), 1.0);
        assert_eq!(cosine(array![1.0, 0.0].view(), array![0.0, 1.0].view()), 0.0);
        assert_abs_diff_eq!(cosine(array![1.0, 0.0].view(), array![-1.0, 0.0].view()), -1.0);
        assert_eq!(cosine(array![0.0, 0.0].view(), array![3.0, 1.0].view()), 0.0);
    }

    #[test]
    fn single_device_identical_views_is_zero() {
        let x = array![[0.3, -1.2, 2.0]];
        assert_abs_diff_eq!(device_contrast_loss(&x, &x, 0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hyperedge_contrast_loss(&x, &x, 0.5), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_orthogonal_devices() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let expected = -(1f64.exp() / (1f64.exp() + 1.0)).ln();
        assert_abs_diff_eq!(expected, 0.31326, epsilon = 1e-5);
        assert_abs_diff_eq!(device_contrast_loss(&x, &x, 1.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(hyperedge_contrast_loss(&x, &x, 1.0), expected, epsilon = 1e-12);
    }

    #[test]
    fn antipodal_negatives() {
        // Anchor 0: positive cosine 1, both negatives cosine -1.
        let x1 = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let x2 = array![[1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]];
        let term = info_nce_term(1.0, &[-1.0, -1.0], 1.0);
        assert_abs_diff_eq!(term, (1.0 + 2.0 * (-2f64).exp()).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(term, 0.239545, epsilon = 1e-6);
        // Check the implementation against the per-anchor oracle.
        let mut total = 0.0;
        for i in 0..3 {
            let c = |a: &Array2<f64>, b: &Array2<f64>, p: usize, q: usize| cosine(a.row(p), b.row(q));
            let o1: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| c(&x1, &x2, i, j)).collect();
            let o2: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| c(&x2, &x1, i, j)).collect();
            total += info_nce_term(c(&x1, &x2, i, i), &o1, 1.0)
                + info_nce_term(c(&x2, &x1, i, i), &o2, 1.0);
        }
        assert_abs_diff_eq!(device_contrast_loss(&x1, &x2, 1.0), total / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn high_temperature_approaches_log_n() {
        let x1 = array![[1.0, 0.2], [0.1, -1.0], [0.5, 0.5], [-1.0, 0.3]];
        let x2 = array![[0.9, 0.1], [0.0, -1.0], [0.4, 0.6], [-0.8, 0.2]];
        assert_abs_diff_eq!(
            hyperedge_contrast_loss(&x1, &x2, 1e3),
            4f64.ln(),
            epsilon = 1e-3
        );
    }

    #[test]
    fn zero_rows_do_not_produce_nan() {
        let x1 = array![[0.0, 0.0], [1.0, 2.0]];
        let x2 = array![[0.0, 0.0], [0.0, 0.0]];
        let (l, g1, g2) = paired_info_nce_grad(&x1, &x2, 0.5);
        assert!(l.is_finite());
        assert!(g1.iter().chain(g2.iter()).all(|v| v.is_finite()));
    }

    #[test]
    fn bilinear_scores() {
        let b0 = Array2::zeros((3, 3));
        let a = array![0.2, -0.7, 1.0];
        let e = array![1.0, 1.0, -3.0];
        assert_eq!(bilinear_score(a.view(), e.view(), &b0), 0.5);
        let u = array![1.0, 0.0, 0.0];
        assert_abs_diff_eq!(
            bilinear_score(u.view(), u.view(), &Array2::eye(3)),
            0.73106,
            epsilon = 1e-5
        );
        assert_eq!(
            bilinear_score(Array1::zeros(3).view(), e.view(), &Array2::eye(3)),
            0.5
        );
    }

    #[test]
    fn membership_anchor_term_closed_form() {
        // One device in hyperedge 0 but not hyperedge 1; one outside device.
        let inc = IncidenceMatrix(array![[1.0, 0.0], [0.0, 1.0]]);
        let negatives = sample_membership_negatives(&inc, 0);
        assert_eq!(negatives.positives, vec![(0, 0), (1, 1)]);
        assert_eq!(negatives.skipped_sides(), 0);
        let expected = softplus(0.1 - 0.9);
        assert_abs_diff_eq!(expected, 0.37110, epsilon = 1e-5);
        assert_abs_diff_eq!(
            expected,
            -((0.9f64).exp() / ((0.9f64).exp() + (0.1f64).exp())).ln(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(softplus(0.0), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn membership_equal_scores_give_log_two_per_side() {
        // With a zero bilinear matrix every score is 0.5, so every side is log 2.
        let inc = IncidenceMatrix(array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let negatives = sample_membership_negatives(&inc, 3);
        let x_a = Array2::from_elem((3, 2), 0.7);
        let x_e = Array2::from_elem((2, 2), -0.2);
        let l = membership_contrast_with(&x_a, &x_e, &x_a, &x_e, &Array2::zeros((2, 2)), 0.5, &negatives);
        let sides = 3 * 2 * 2;
        assert_abs_diff_eq!(l.value, sides as f64 * 2f64.ln() / (2.0 * 3.0 * 2.0), epsilon = 1e-12);
    }

    #[test]
    fn saturated_membership_skips_everything() {
        let inc = IncidenceMatrix(Array2::ones((3, 2)));
        let negatives = sample_membership_negatives(&inc, 0);
        assert_eq!(negatives.skipped_sides(), 6 * 2 * 2);
        let x_a = Array2::from_elem((3, 2), 0.3);
        let x_e = Array2::from_elem((2, 2), 0.4);
        let l = membership_contrast_loss(&x_a, &x_e, &x_a, &x_e, &inc, &Array2::eye(2), 0.5, 0);
        assert_eq!(l.value, 0.0);
        assert_eq!(l.skipped_sides, 24);
    }

    #[test]
    fn negatives_respect_complement_and_seed() {
        let inc = IncidenceMatrix(array![
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 1.0]
        ]);
        let a = sample_membership_negatives(&inc, 12);
        assert_eq!(a, sample_membership_negatives(&inc, 12));
        for (&(i, n), s) in a.positives.iter().zip(&a.samples) {
            for side in s {
                if let Some(k) = side.hyperedge {
                    assert!(!inc.contains(i, k));
                }
                if let Some(j) = side.device {
                    assert!(!inc.contains(j, n));
                }
            }
        }
    }

    #[test]
    fn total_loss_weights() {
        let mut cfg = ContrastConfig {
            omega_ec: 0.0,
            omega_mc: 0.0,
            ..ContrastConfig::default()
        };
        assert_eq!(total_loss(1.5, 2.0, 3.0, &cfg), 1.5);
        cfg.omega_ec = 0.5;
        cfg.omega_mc = 0.1;
        assert_abs_diff_eq!(total_loss(1.0, 2.0, 3.0, &cfg), 2.3, epsilon = 1e-15);
        assert_eq!(total_loss(0.0, 0.0, 0.0, &cfg), 0.0);
    }

    #[test]
    fn config_validation() {
        let bad = ContrastConfig {
            tau_mc: 0.0,
            ..ContrastConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ContrastConfig::default().validate().is_ok());
    }

    #[test]
    fn cosine_losses_are_scale_invariant_membership_is_not() {
        let x1 = array![[1.0, 0.2, -0.3], [0.1, -1.0, 0.4], [0.5, 0.5, 0.5]];
        let x2 = array![[0.8, 0.1, 0.0], [0.0, -1.0, 0.2], [0.4, 0.6, 0.1]];
        let e1 = array![[0.3, 0.3, -0.2], [1.0, -0.5, 0.0]];
        let e2 = array![[0.2, 0.4, -0.1], [0.9, -0.4, 0.2]];
        let k = 3.7;
        assert_abs_diff_eq!(
            device_contrast_loss(&x1, &x2, 0.5),
            device_contrast_loss(&(&x1 * k), &(&x2 * k), 0.5),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            hyperedge_contrast_loss(&e1, &e2, 0.5),
            hyperedge_contrast_loss(&(&e1 * k), &(&e2 * k), 0.5),
            epsilon = 1e-12
        );
        let inc = IncidenceMatrix(array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let neg = sample_membership_negatives(&inc, 1);
        let b = Array2::eye(3);
        let base = membership_contrast_with(&x1, &e2, &x2, &e1, &b, 0.5, &neg).value;
        let scaled =
            membership_contrast_with(&(&x1 * k), &(&e2 * k), &(&x2 * k), &(&e1 * k), &b, 0.5, &neg)
                .value;
        assert!((base - scaled).abs() > 1e-6);
    }

    #[test]
    fn row_permutation_invariance() {
        let x1 = array![[1.0, 0.2], [0.1, -1.0], [0.5, 0.5]];
        let x2 = array![[0.8, 0.1], [0.0, -1.0], [0.4, 0.6]];
        let perm = [2usize, 0, 1];
        let p = |x: &Array2<f64>| x.select(Axis(0), &perm);
        assert_abs_diff_eq!(
            device_contrast_loss(&x1, &x2, 0.7),
            device_contrast_loss(&p(&x1), &p(&x2), 0.7),
            epsilon = 1e-12
        );
    }

    #[test]
    fn loss_falls_as_negatives_become_dissimilar() {
        // Three unit vectors at pairwise angle θ; identical views.
        let family = |theta: f64| {
            let rows: Vec<[f64; 3]> = (0..3)
                .map(|k| {
                    let mut r = [theta.cos(), 0.0, 0.0];
                    r[1 + (k % 2)] = theta.sin() * if k == 2 { -1.0 } else { 1.0 };
                    r
                })
                .collect();
            Array2::from_shape_vec((3, 3), rows.concat()).unwrap()
        };
        let mut previous = f64::INFINITY;
        for step in 0..8 {
            let theta = 0.1 + 0.2 * step as f64;
            let x = family(theta);
            let l = device_contrast_loss(&x, &x, 0.5);
            assert!(l < previous, "theta {theta}: {l} !< {previous}");
            previous = l;
        }
    }

    #[test]
    fn every_loss_is_non_negative() {
        let mut rng = seeding::rng(4);
        for _ in 0..50 {
            let x1 = Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0));
            let x2 = Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0));
            assert!(device_contrast_loss(&x1, &x2, 0.3) >= 0.0);
        }
    }
}
