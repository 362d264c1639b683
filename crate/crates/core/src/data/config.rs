//! Flat key/value run configuration.
//!
//! Every key is optional and maps onto one field of the training, masking,
//! contrast or hypergraph-construction settings. Unknown keys are rejected.
//!
//! ```toml
//! epochs = 200
//! embedding_dim = 32
//! p_device = 0.2
//! tau_dc = 0.5
//! threshold = 0.6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;
use crate::social::SocialConfig;
use crate::trainer::TrainConfig;
use crate::trust::DEFAULT_THRESHOLD;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub embedding_dim: Option<usize>,
    pub num_layers: Option<usize>,
    pub resample_masks_each_epoch: Option<bool>,
    pub seed: Option<u64>,
    pub checkpoint_every: Option<usize>,

    pub p_device: Option<f64>,
    pub p_hyperedge: Option<f64>,
    pub p_membership: Option<f64>,
    pub mask_seed: Option<u64>,

    pub tau_dc: Option<f64>,
    pub tau_ec: Option<f64>,
    pub tau_mc: Option<f64>,
    pub omega_ec: Option<f64>,
    pub omega_mc: Option<f64>,
    pub neg_seed: Option<u64>,

    pub beta: Option<f64>,
    pub num_clusters: Option<usize>,
    pub membership_threshold: Option<f64>,
    pub kmeans_max_iters: Option<usize>,
    pub kmeans_tol: Option<f64>,
    pub kmeans_seed: Option<u64>,

    pub threshold: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&files::read_to_string(path)?, path)
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(self, top;
            epochs, learning_rate, weight_decay, embedding_dim, num_layers,
            resample_masks_each_epoch, seed, checkpoint_every,
            p_device, p_hyperedge, p_membership, mask_seed,
            tau_dc, tau_ec, tau_mc, omega_ec, omega_mc, neg_seed,
            beta, num_clusters, membership_threshold, kmeans_max_iters, kmeans_tol, kmeans_seed,
            threshold,
        );
        self
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut c = TrainConfig::default();
        macro_rules! set {
            ($($dst:expr => $src:ident),* $(,)?) => { $( if let Some(v) = self.$src { $dst = v; } )* };
        }
        set!(
            c.epochs => epochs,
            c.learning_rate => learning_rate,
            c.weight_decay => weight_decay,
            c.embedding_dim => embedding_dim,
            c.num_layers => num_layers,
            c.resample_masks_each_epoch => resample_masks_each_epoch,
            c.seed => seed,
            c.checkpoint_every => checkpoint_every,
            c.mask.p_device => p_device,
            c.mask.p_hyperedge => p_hyperedge,
            c.mask.p_membership => p_membership,
            c.mask.seed => mask_seed,
            c.contrast.tau_dc => tau_dc,
            c.contrast.tau_ec => tau_ec,
            c.contrast.tau_mc => tau_mc,
            c.contrast.omega_ec => omega_ec,
            c.contrast.omega_mc => omega_mc,
            c.contrast.neg_seed => neg_seed,
        );
        c
    }

    pub fn social_config(&self) -> SocialConfig {
        let mut s = SocialConfig::default();
        if let Some(v) = self.beta {
            s.beta = v;
        }
        if self.num_clusters.is_some() {
            s.num_clusters = self.num_clusters;
        }
        if self.membership_threshold.is_some() {
            s.membership_threshold = self.membership_threshold;
        }
        if let Some(v) = self.kmeans_max_iters {
            s.kmeans_max_iters = v;
        }
        if let Some(v) = self.kmeans_tol {
            s.kmeans_tol = v;
        }
        if let Some(v) = self.kmeans_seed {
            s.kmeans_seed = v;
        }
        s
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(DEFAULT_THRESHOLD)
    }
}
