//! Soft K-means over 2-D device positions.
//!
//! Memberships are a softmax of `-beta * squared distance`; centers are the
//! membership-weighted means. Note that the alternation monotonically lowers
//! the free energy `cost - entropy / beta`, not `cost` itself: the assignment
//! step may raise the plain weighted cost. Both are recorded per iteration.

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;

pub type Point = [f64; 2];

fn sq_dist(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftKMeansState {
    pub centers: Vec<Point>,
    /// K × I, each column sums to one.
    pub memberships: Array2<f64>,
    pub beta: f64,
    /// Weighted cost `Σ_k Σ_i z_ki ‖a_i − c_k‖²` at the final centers.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every assign/update round.
    pub cost_history: Vec<f64>,
    /// Free energy after every assign/update round.
    pub free_energy_history: Vec<f64>,
}

impl SoftKMeansState {
    pub fn num_clusters(&self) -> usize {
        self.centers.len()
    }
}

/// Softmax memberships of every device to every center (K × I).
pub fn soft_kmeans_assign(positions: &[Point], centers: &[Point], beta: f64) -> Array2<f64> {
    let k = centers.len();
    let mut z = Array2::zeros((k, positions.len()));
    let mut logits = vec![0.0; k];
    for (i, p) in positions.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        for (c, center) in centers.iter().enumerate() {
            logits[c] = -beta * sq_dist(p, center);
            max = max.max(logits[c]);
        }
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        for c in 0..k {
            z[[c, i]] = logits[c] / total;
        }
    }
    z
}

/// Membership-weighted means. A center whose total membership is zero is
/// re-seeded at a random device position drawn from `rng`.
pub fn soft_kmeans_update_centers<R: Rng>(
    positions: &[Point],
    memberships: &Array2<f64>,
    rng: &mut R,
) -> Vec<Point> {
    memberships
        .outer_iter()
        .map(|row| {
            let mut mass = 0.0;
            let mut acc = [0.0, 0.0];
            for (z, p) in row.iter().zip(positions) {
                mass += z;
                acc[0] += z * p[0];
                acc[1] += z * p[1];
            }
            if mass > 0.0 {
                [acc[0] / mass, acc[1] / mass]
            } else {
                positions[rng.random_range(0..positions.len())]
            }
        })
        .collect()
}

pub fn weighted_cost(positions: &[Point], centers: &[Point], memberships: &Array2<f64>) -> f64 {
    let mut cost = 0.0;
    for (c, center) in centers.iter().enumerate() {
        for (i, p) in positions.iter().enumerate() {
            cost += memberships[[c, i]] * sq_dist(p, center);
        }
    }
    cost
}

pub fn free_energy(
    positions: &[Point],
    centers: &[Point],
    memberships: &Array2<f64>,
    beta: f64,
) -> f64 {
    let neg_entropy: f64 = memberships
        .iter()
        .filter(|&&z| z > 0.0)
        .map(|&z| z * z.ln())
        .sum();
    weighted_cost(positions, centers, memberships) + neg_entropy / beta
}

/// Run soft K-means from `k` distinct randomly chosen device positions until the
/// absolute change of the weighted cost drops below `tol` or `max_iters` rounds.
pub fn soft_kmeans_run(
    positions: &[Point],
    k: usize,
    beta: f64,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<SoftKMeansState> {
    if k == 0 || k > positions.len() {
        return Err(Error::Parameter(format!(
            "soft K-means needs 1 <= K <= {} devices, got K = {k}",
            positions.len()
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("stiffness beta must be positive, got {beta}")));
    }
    if max_iters == 0 {
        return Err(Error::Parameter("max_iters must be at least 1".into()));
    }
    if positions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("device positions must be finite".into()));
    }

    let mut rng = seeding::rng(seed);
    let mut centers: Vec<Point> = index::sample(&mut rng, positions.len(), k)
        .into_iter()
        .map(|i| positions[i])
        .collect();

    let mut memberships = Array2::zeros((k, positions.len()));
    let mut cost_history = Vec::new();
    let mut free_energy_history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        memberships = soft_kmeans_assign(positions, &centers, beta);
        centers = soft_kmeans_update_centers(positions, &memberships, &mut rng);
        let cost = weighted_cost(positions, &centers, &memberships);
        free_energy_history.push(free_energy(positions, &centers, &memberships, beta));
        let previous = cost_history.last().copied();
        cost_history.push(cost);
        if let Some(prev) = previous {
            if (prev - cost).abs() < tol {
                converged = true;
                break;
            }
        }
    }

    Ok(SoftKMeansState {
        cost: *cost_history.last().expect("at least one iteration"),
        iterations: cost_history.len(),
        centers,
        memberships,
        beta,
        converged,
        cost_history,
        free_energy_history,
    })
}
