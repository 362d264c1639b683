//! Training loop: two masked views per epoch, shared encoder, analytic
//! gradients of the combined contrastive loss, Adam.

pub mod adam;
pub mod gradcheck;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::augment::{make_views, AugmentedView, MaskConfig};
use crate::contrast::{
    membership_contrast_grad, membership_contrast_with, paired_info_nce, paired_info_nce_grad,
    sample_membership_negatives, total_loss, ContrastConfig, LossBreakdown, MembershipNegatives,
};
use crate::encoder::{forward, forward_with_cache, EmbeddingMatrix, EncoderParams, GradientSet};
use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, IncidenceMatrix};
use crate::seeding;

pub use adam::{adam_step, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub embedding_dim: usize,
    pub num_layers: usize,
    pub mask: MaskConfig,
    pub contrast: ContrastConfig,
    pub resample_masks_each_epoch: bool,
    /// Master seed; initialization, masks and negatives derive from it.
    pub seed: u64,
    /// Epoch interval for checkpoint callbacks; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            embedding_dim: 512,
            num_layers: 2,
            mask: MaskConfig::default(),
            contrast: ContrastConfig::default(),
            resample_masks_each_epoch: true,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Parameter(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.embedding_dim == 0 || self.num_layers == 0 {
            return Err(Error::Parameter(
                "embedding_dim and num_layers must be positive".into(),
            ));
        }
        self.mask.validate()?;
        self.contrast.validate()
    }

    /// `[input_dim, d, …, d]` with `num_layers` trainable layers.
    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(std::iter::repeat_n(self.embedding_dim, self.num_layers))
            .collect()
    }

    pub fn init_seed(&self) -> u64 {
        seeding::sub_seed(self.seed, seeding::STREAM_INIT)
    }

    /// Seed of the mask draws for `epoch`.
    pub fn mask_seed(&self, epoch: usize) -> u64 {
        let epoch = if self.resample_masks_each_epoch { epoch } else { 0 };
        let base = seeding::sub_seed(self.seed, seeding::STREAM_MASKS) ^ self.mask.seed;
        seeding::sub_seed(base, epoch as u64)
    }

    /// Seed of the membership negatives for `epoch`.
    pub fn negative_seed(&self, epoch: usize) -> u64 {
        let base = seeding::sub_seed(self.seed, seeding::STREAM_NEGATIVES) ^ self.contrast.neg_seed;
        seeding::sub_seed(base, epoch as u64)
    }
}

/// Everything the loss needs for one optimization step.
#[derive(Debug, Clone)]
pub struct StepInputs<'a> {
    pub inc: &'a IncidenceMatrix,
    pub views: (&'a AugmentedView, &'a AugmentedView),
    pub contrast: &'a ContrastConfig,
    pub negatives: &'a MembershipNegatives,
}

fn check_finite(loss: &LossBreakdown, epoch: usize) -> Result<()> {
    if loss.total.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric {
            epoch,
            message: format!(
                "non-finite loss (device {}, hyperedge {}, membership {})",
                loss.device, loss.hyperedge, loss.membership
            ),
        })
    }
}

/// The combined loss without gradients.
pub fn evaluate_loss(params: &EncoderParams, step: &StepInputs) -> Result<LossBreakdown> {
    let (a1, e1) = forward(step.views.0, params)?;
    let (a2, e2) = forward(step.views.1, params)?;
    let c = step.contrast;
    let device = paired_info_nce(&a1, &a2, c.tau_dc);
    let hyperedge = if c.omega_ec > 0.0 {
        paired_info_nce(&e1, &e2, c.tau_ec)
    } else {
        0.0
    };
    let membership = if c.omega_mc > 0.0 {
        membership_contrast_with(&a1, &e2, &a2, &e1, &params.bilinear, c.tau_mc, step.negatives).value
    } else {
        0.0
    };
    Ok(LossBreakdown {
        total: total_loss(device, hyperedge, membership, c),
        device,
        hyperedge,
        membership,
    })
}

/// Loss and exact gradients under the step's fixed views and negatives.
///
/// Both views run through the same parameters and their contributions are
/// summed into a single [`GradientSet`].
pub fn compute_gradients(
    params: &EncoderParams,
    step: &StepInputs,
) -> Result<(LossBreakdown, GradientSet)> {
    if step.inc.num_devices() != step.views.0.num_devices()
        || step.inc.num_hyperedges() != step.views.0.num_hyperedges()
    {
        return Err(Error::Structural("views do not match the incidence matrix".into()));
    }
    let p1 = forward_with_cache(step.views.0, params)?;
    let p2 = forward_with_cache(step.views.1, params)?;
    let (a1, e1) = (&p1.device_embeddings, &p1.hyperedge_embeddings);
    let (a2, e2) = (&p2.device_embeddings, &p2.hyperedge_embeddings);
    let c = step.contrast;

    let (device, mut d_a1, mut d_a2) = paired_info_nce_grad(a1, a2, c.tau_dc);
    let mut d_e1 = Array2::zeros(e1.raw_dim());
    let mut d_e2 = Array2::zeros(e2.raw_dim());
    let mut grads = GradientSet::zeros_like(params);

    let mut hyperedge = 0.0;
    if c.omega_ec > 0.0 {
        let (l, g1, g2) = paired_info_nce_grad(e1, e2, c.tau_ec);
        hyperedge = l;
        d_e1.scaled_add(c.omega_ec, &g1);
        d_e2.scaled_add(c.omega_ec, &g2);
    }
    let mut membership = 0.0;
    if c.omega_mc > 0.0 {
        let (l, g) =
            membership_contrast_grad(a1, e2, a2, e1, &params.bilinear, c.tau_mc, step.negatives);
        membership = l.value;
        d_a1.scaled_add(c.omega_mc, &g.device_1);
        d_a2.scaled_add(c.omega_mc, &g.device_2);
        d_e1.scaled_add(c.omega_mc, &g.hyperedge_1);
        d_e2.scaled_add(c.omega_mc, &g.hyperedge_2);
        grads.bilinear.scaled_add(c.omega_mc, &g.bilinear);
    }

    p1.backward(params, &d_a1, &d_e1, &mut grads);
    p2.backward(params, &d_a2, &d_e2, &mut grads);

    let loss = LossBreakdown {
        total: total_loss(device, hyperedge, membership, c),
        device,
        hyperedge,
        membership,
    };
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    /// Membership anchor sides without any valid negative.
    pub skipped_sides: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: EncoderParams,
    /// Device embeddings of the unmasked hypergraph.
    pub final_device_embeddings: EmbeddingMatrix,
    pub loss_history: Vec<EpochRecord>,
}

pub fn train(hg: &Hypergraph, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(hg, cfg, |_, _| {})
}

/// Train and call `on_epoch` after every parameter update.
///
/// A non-finite loss stops training before the update is applied, so the
/// parameters last passed to `on_epoch` are the last good ones.
pub fn train_with<F>(hg: &Hypergraph, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainedModel>
where
    F: FnMut(&EpochRecord, &EncoderParams),
{
    cfg.validate()?;
    hg.ensure_valid()?;
    let inc = hg.build_incidence();
    let mut params = EncoderParams::init(&cfg.layer_dims(hg.device_features().ncols()), cfg.init_seed())?;
    let mut adam = AdamState::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut views = None;

    for epoch in 0..cfg.epochs {
        if views.is_none() || cfg.resample_masks_each_epoch {
            let mask = MaskConfig {
                seed: cfg.mask_seed(epoch),
                ..cfg.mask.clone()
            };
            views = Some(make_views(hg, &inc, &mask)?);
        }
        let (v1, v2) = views.as_ref().expect("views drawn above");
        let negatives = sample_membership_negatives(&inc, cfg.negative_seed(epoch));
        let step = StepInputs {
            inc: &inc,
            views: (v1, v2),
            contrast: &cfg.contrast,
            negatives: &negatives,
        };
        let (loss, grads) = compute_gradients(&params, &step)?;
        check_finite(&loss, epoch)?;
        if !grads.is_finite() {
            return Err(Error::Numeric {
                epoch,
                message: "non-finite gradient".into(),
            });
        }
        adam_step(&mut params, &grads, &mut adam, cfg.learning_rate, cfg.weight_decay);
        let record = EpochRecord {
            epoch,
            loss,
            skipped_sides: negatives.skipped_sides(),
        };
        on_epoch(&record, &params);
        history.push(record);
    }

    let final_device_embeddings = embed_devices(hg, &params)?;
    Ok(TrainedModel {
        params,
        final_device_embeddings,
        loss_history: history,
    })
}

/// Device embeddings of the unmasked hypergraph.
pub fn embed_devices(hg: &Hypergraph, params: &EncoderParams) -> Result<Array2<f64>> {
    let inc = hg.build_incidence();
    Ok(forward(&AugmentedView::identity(hg, &inc), params)?.0)
}
