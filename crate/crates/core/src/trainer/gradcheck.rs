//! Central finite-difference verification of the analytic gradients.

use std::fmt;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::augment::{make_views, AugmentedView, MaskConfig};
use crate::contrast::{sample_membership_negatives, ContrastConfig, MembershipNegatives};
use crate::encoder::{forward_with_cache, EncoderParams, GradientSet};
use crate::error::Result;
use crate::hypergraph::{Hyperedge, HyperedgeKind, Hypergraph, IncidenceMatrix};
use crate::seeding;

use super::{compute_gradients, evaluate_loss, StepInputs};

fn is_active(view: &AugmentedView, params: &EncoderParams) -> Result<bool> {
    let nonzero = |rows: ndarray::iter::Lanes<'_, f64, ndarray::Ix1>| {
        rows.into_iter().filter(|r| r.iter().any(|&v| v != 0.0)).count() >= 2
    };
    let (a, e) = crate::encoder::forward(view, params)?;
    let h = &view.masked_incidence;
    Ok(nonzero(h.rows()) && nonzero(h.columns()) && nonzero(a.rows()) && nonzero(e.rows()))
}

/// A small fixed problem: hypergraph, views, negatives and parameters.
#[derive(Debug, Clone)]
pub struct GradcheckInstance {
    pub hypergraph: Hypergraph,
    pub incidence: IncidenceMatrix,
    pub views: (AugmentedView, AugmentedView),
    pub negatives: MembershipNegatives,
    pub contrast: ContrastConfig,
    pub params: EncoderParams,
}

impl GradcheckInstance {
    fn assemble(
        hypergraph: Hypergraph,
        dims: &[usize],
        contrast: ContrastConfig,
        seed: u64,
    ) -> Result<Self> {
        let incidence = hypergraph.build_incidence();
        // Redraw masks and initialization until both views keep at least two
        // active devices and hyperedges with non-zero embeddings; otherwise
        // some loss terms are constant.
        let mut attempt = 0;
        let (views, mut params) = loop {
            let mask = MaskConfig {
                seed: seeding::sub_seed(seeding::sub_seed(seed, seeding::STREAM_MASKS), attempt),
                ..MaskConfig::default()
            };
            let views = make_views(&hypergraph, &incidence, &mask)?;
            let init = seeding::sub_seed(seeding::sub_seed(seed, seeding::STREAM_INIT), attempt);
            let params = EncoderParams::init(dims, init)?;
            if attempt >= 64 || (is_active(&views.0, &params)? && is_active(&views.1, &params)?) {
                break (views, params);
            }
            attempt += 1;
        };
        let negatives = sample_membership_negatives(
            &incidence,
            seeding::sub_seed(seed, seeding::STREAM_NEGATIVES),
        );
        // A generic bilinear matrix exercises every entry of its gradient.
        let mut rng = seeding::rng(seed);
        params.bilinear.mapv_inplace(|v| v + rng.random_range(-0.5..0.5));
        Ok(Self {
            hypergraph,
            incidence,
            views,
            negatives,
            contrast,
            params,
        })
    }

    /// Four devices, three hyperedges, embedding width five.
    pub fn small(seed: u64) -> Result<Self> {
        let hg = Hypergraph::new(
            4,
            vec![
                Hyperedge::new([0, 1, 2], 1.0, HyperedgeKind::Physical),
                Hyperedge::new([1, 3], 1.0, HyperedgeKind::Interest),
                Hyperedge::new([0, 3], 0.5, HyperedgeKind::Collaboration),
            ],
        );
        Self::assemble(hg, &[4, 5, 5], ContrastConfig::default(), seed)
    }

    /// Random hypergraph with up to 8 devices and 6 hyperedges and Gaussian
    /// device features; all three loss terms active with random temperatures
    /// and weights.
    pub fn random(seed: u64) -> Result<Self> {
        let mut rng = seeding::rng(seeding::sub_seed(seed, seeding::STREAM_DATA));
        let num_devices = rng.random_range(3..=8);
        let num_edges = rng.random_range(2..=6);
        let mut edges: Vec<Hyperedge> = (0..num_edges)
            .map(|n| {
                let size = rng.random_range(1..=num_devices.min(4));
                let members = rand::seq::index::sample(&mut rng, num_devices, size).into_vec();
                let kind = HyperedgeKind::ALL[n % 4];
                Hyperedge::new(members, rng.random_range(0.5..1.5), kind)
            })
            .collect();
        // Every device belongs somewhere.
        for i in 0..num_devices {
            if !edges.iter().any(|e| e.contains(i)) {
                let n = rng.random_range(0..edges.len());
                let e = &edges[n];
                edges[n] = Hyperedge::new(e.members.iter().copied().chain([i]), e.weight, e.kind);
            }
        }
        let width = rng.random_range(2..=6);
        let features = Array2::from_shape_simple_fn((num_devices, width), || {
            rng.sample::<f64, _>(StandardNormal)
        });
        let d = rng.random_range(2..=6);
        let layers = rng.random_range(1..=2);
        let dims: Vec<usize> = std::iter::once(width)
            .chain(std::iter::repeat_n(d, layers))
            .collect();
        let contrast = ContrastConfig {
            tau_dc: rng.random_range(0.3..1.0),
            tau_ec: rng.random_range(0.3..1.0),
            tau_mc: rng.random_range(0.3..1.0),
            omega_ec: rng.random_range(0.5..1.5),
            omega_mc: rng.random_range(0.5..1.5),
            neg_seed: 0,
        };
        let hg = Hypergraph::with_features(num_devices, edges, features)?;
        Self::assemble(hg, &dims, contrast, seed)
    }

    fn step(&self) -> StepInputs<'_> {
        StepInputs {
            inc: &self.incidence,
            views: (&self.views.0, &self.views.1),
            contrast: &self.contrast,
            negatives: &self.negatives,
        }
    }

    pub fn analytic_gradients(&self) -> Result<GradientSet> {
        Ok(compute_gradients(&self.params, &self.step())?.1)
    }

    fn loss_and_pattern(&self, params: &EncoderParams) -> Result<(f64, Vec<bool>)> {
        let loss = evaluate_loss(params, &self.step())?.total;
        let mut pattern = forward_with_cache(&self.views.0, params)?.activation_pattern();
        pattern.extend(forward_with_cache(&self.views.1, params)?.activation_pattern());
        Ok((loss, pattern))
    }
}

/// One compared gradient entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryComparison {
    pub matrix: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

impl fmt::Display for EntryComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}, {}]: analytic {:.6e}, numeric {:.6e}, relative error {:.3e}",
            self.matrix, self.row, self.col, self.analytic, self.numeric, self.relative_error
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub checked: usize,
    /// Entries where both gradients are below 1e-8 in magnitude.
    pub exempt_small: usize,
    /// Entries whose perturbation flips a ReLU on or off.
    pub exempt_kink: usize,
    pub max_relative_error: f64,
    pub worst: Option<EntryComparison>,
    /// Every compared entry that exceeded the tolerance.
    pub failures: Vec<EntryComparison>,
    pub passed: bool,
}

fn matrix_names(params: &EncoderParams) -> Vec<String> {
    (0..params.num_layers())
        .flat_map(|l| [format!("layer{l}.theta_e"), format!("layer{l}.theta_a")])
        .chain(std::iter::once("bilinear".to_string()))
        .collect()
}

const SMALL: f64 = 1e-8;

/// Compare the instance's analytic gradients against central differences.
pub fn finite_difference_check(inst: &GradcheckInstance, h: f64, tol: f64) -> Result<GradcheckReport> {
    let analytic = inst.analytic_gradients()?;
    compare_gradients(inst, &analytic, h, tol)
}

/// Compare a supplied gradient against central differences of the instance loss.
pub fn compare_gradients(
    inst: &GradcheckInstance,
    analytic: &GradientSet,
    h: f64,
    tol: f64,
) -> Result<GradcheckReport> {
    let (_, base_pattern) = inst.loss_and_pattern(&inst.params)?;
    let names = matrix_names(&inst.params);
    let analytic: Vec<&Array2<f64>> = analytic.matrices().collect();
    let mut probe = inst.params.clone();
    let mut report = GradcheckReport {
        step: h,
        tolerance: tol,
        checked: 0,
        exempt_small: 0,
        exempt_kink: 0,
        max_relative_error: 0.0,
        worst: None,
        failures: Vec::new(),
        passed: false,
    };

    let num_matrices = names.len();
    for m in 0..num_matrices {
        let shape = analytic[m].dim();
        for row in 0..shape.0 {
            for col in 0..shape.1 {
                let original = entry(&mut probe, m, row, col, None);
                entry(&mut probe, m, row, col, Some(original + h));
                let (plus, plus_pattern) = inst.loss_and_pattern(&probe)?;
                entry(&mut probe, m, row, col, Some(original - h));
                let (minus, minus_pattern) = inst.loss_and_pattern(&probe)?;
                entry(&mut probe, m, row, col, Some(original));

                let numeric = (plus - minus) / (2.0 * h);
                let a = analytic[m][[row, col]];
                if plus_pattern != base_pattern || minus_pattern != base_pattern {
                    report.exempt_kink += 1;
                    continue;
                }
                if a.abs() + numeric.abs() < SMALL {
                    report.exempt_small += 1;
                    continue;
                }
                report.checked += 1;
                let relative_error = (a - numeric).abs() / a.abs().max(numeric.abs());
                let cmp = EntryComparison {
                    matrix: names[m].clone(),
                    row,
                    col,
                    analytic: a,
                    numeric,
                    relative_error,
                };
                if relative_error >= tol {
                    report.failures.push(cmp.clone());
                }
                if report.worst.is_none() || relative_error > report.max_relative_error {
                    report.max_relative_error = relative_error;
                    report.worst = Some(cmp);
                }
            }
        }
    }
    report.passed = report.max_relative_error < tol;
    Ok(report)
}

/// Read an entry of the `m`-th parameter matrix, optionally overwriting it.
fn entry(params: &mut EncoderParams, m: usize, row: usize, col: usize, set: Option<f64>) -> f64 {
    let matrix = params.matrices_mut().nth(m).expect("matrix index in range");
    let old = matrix[[row, col]];
    if let Some(v) = set {
        matrix[[row, col]] = v;
    }
    old
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance_passes() {
        let inst = GradcheckInstance::small(0).unwrap();
        let r = finite_difference_check(&inst, 1e-5, 1e-4).unwrap();
        assert!(r.passed, "{:?}", r.worst);
        assert!(r.checked > 0);
    }

    #[test]
    fn zero_tolerance_always_fails() {
        let inst = GradcheckInstance::small(1).unwrap();
        assert!(!finite_difference_check(&inst, 1e-5, 0.0).unwrap().passed);
    }

    #[test]
    fn corrupted_entry_is_localized() {
        let inst = GradcheckInstance::small(2).unwrap();
        let mut g = inst.analytic_gradients().unwrap();
        let target = &mut g.layers[1].theta_a;
        let ((r, c), _) = target
            .indexed_iter()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert!(target[[r, c]].abs() > SMALL);
        target[[r, c]] *= 2.0;
        let rep = compare_gradients(&inst, &g, 1e-5, 1e-4).unwrap();
        assert!(!rep.passed);
        let worst = rep.worst.unwrap();
        assert_eq!((worst.matrix.as_str(), worst.row, worst.col), ("layer1.theta_a", r, c));
        assert_eq!(rep.failures.len(), 1);
    }

    #[test]
    fn device_swap_permutes_first_layer_gradient() {
        // With one-hot features, relabelling devices 0 and 1 swaps the rows of
        // the first-layer hyperedge gradient and leaves everything else fixed.
        let inst = GradcheckInstance::small(3).unwrap();
        let swap = |i: usize| match i {
            0 => 1,
            1 => 0,
            other => other,
        };
        let edges: Vec<Hyperedge> = inst
            .hypergraph
            .hyperedges()
            .iter()
            .map(|e| Hyperedge::new(e.members.iter().map(|&i| swap(i)), e.weight, e.kind))
            .collect();
        let hg = Hypergraph::new(4, edges);
        let inc = hg.build_incidence();
        let perm_view = |v: &AugmentedView| {
            let order = [1usize, 0, 2, 3];
            let mut masks = v.masks.clone();
            masks.device = order.iter().map(|&i| v.masks.device[i]).collect();
            masks.membership = masks.membership.select(ndarray::Axis(0), &order);
            crate::augment::apply_masks(&hg, &inc, masks)
        };
        let mut params = inst.params.clone();
        let order = [1usize, 0, 2, 3];
        params.layers[0].theta_e = params.layers[0].theta_e.select(ndarray::Axis(0), &order);
        let swapped = GradcheckInstance {
            views: (perm_view(&inst.views.0), perm_view(&inst.views.1)),
            negatives: {
                let mut n = inst.negatives.clone();
                for (p, s) in n.positives.iter_mut().zip(n.samples.iter_mut()) {
                    p.0 = swap(p.0);
                    for side in s.iter_mut() {
                        side.device = side.device.map(swap);
                    }
                }
                n
            },
            hypergraph: hg.clone(),
            incidence: inc.clone(),
            params,
            contrast: inst.contrast.clone(),
        };
        let g0 = inst.analytic_gradients().unwrap();
        let g1 = swapped.analytic_gradients().unwrap();
        let g0_rows = g0.layers[0].theta_e.select(ndarray::Axis(0), &order);
        for (a, b) in g0_rows.iter().zip(g1.layers[0].theta_e.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g0.layers[1].theta_a.iter().zip(g1.layers[1].theta_a.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
