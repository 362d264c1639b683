//! Parameter-sharing hypergraph neural network.
//!
//! Each layer runs two aggregation stages:
//!
//! ```text
//! X_E = φ(D_e⁻¹ Hᵀ X_A Θ_E)        device → hyperedge
//! X_A = φ(D_a⁻¹ H W X_E Θ_A)       hyperedge → device
//! ```
//!
//! Degrees come from the view's masked incidence. Zero-degree entities get a
//! zero inverse degree, so fully masked devices and hyperedges produce zero
//! rows instead of NaN. Hidden layers use the configured activation (ReLU by
//! default); the last layer is linear so embeddings can take either sign.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentedView;
use crate::error::{Error, Result};
use crate::seeding;

pub type EmbeddingMatrix = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        }
    }

    fn apply_scalar(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    /// Multiply an upstream gradient by φ'(z). ReLU uses subgradient 0 at 0.
    fn backprop(self, upstream: &mut Array2<f64>, z: &Array2<f64>) {
        if self == Activation::Relu {
            upstream.zip_mut_with(z, |g, &zz| {
                if zz <= 0.0 {
                    *g = 0.0
                }
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// d_{l-1} × d_l
    pub theta_e: Array2<f64>,
    /// d_l × d_l
    pub theta_a: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `[d_0, d_1, …, d_L]` where `d_0` is the input feature width.
    pub layer_dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub layers: Vec<LayerParams>,
    /// d_L × d_L matrix of the bilinear membership scorer.
    pub bilinear: Array2<f64>,
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

impl EncoderParams {
    /// Glorot-uniform layer matrices and a `0.1·I` bilinear matrix.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Parameter(
                "layer_dims needs an input width and at least one layer".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(Error::Parameter(format!(
                "layer dimensions must be positive, got {layer_dims:?}"
            )));
        }
        let mut rng = seeding::rng(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| LayerParams {
                theta_e: glorot(w[0], w[1], &mut rng),
                theta_a: glorot(w[1], w[1], &mut rng),
            })
            .collect();
        let d = *layer_dims.last().unwrap();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            hidden_activation: Activation::Relu,
            layers,
            bilinear: Array2::eye(d) * 0.1,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Identity
        } else {
            self.hidden_activation
        }
    }

    /// Every trainable matrix in a fixed order: per layer Θ_E then Θ_A, then the bilinear matrix.
    pub fn matrices(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.theta_e, &l.theta_a])
            .chain(std::iter::once(&self.bilinear))
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.theta_e, &mut l.theta_a])
            .chain(std::iter::once(&mut self.bilinear))
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.layers.len() + 1 != self.layer_dims.len() {
            return Err(Error::Structural("layer count does not match layer_dims".into()));
        }
        for (l, (layer, w)) in self.layers.iter().zip(self.layer_dims.windows(2)).enumerate() {
            if layer.theta_e.dim() != (w[0], w[1]) || layer.theta_a.dim() != (w[1], w[1]) {
                return Err(Error::Structural(format!("layer {l} matrices have wrong shape")));
            }
        }
        let d = self.embedding_dim();
        if self.bilinear.dim() != (d, d) {
            return Err(Error::Structural("bilinear matrix has wrong shape".into()));
        }
        if self.matrices().flat_map(|m| m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Structural("non-finite parameter entry".into()));
        }
        Ok(())
    }
}

/// Gradients with the same layout as [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerParams>,
    pub bilinear: Array2<f64>,
}

impl GradientSet {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerParams {
                    theta_e: Array2::zeros(l.theta_e.raw_dim()),
                    theta_a: Array2::zeros(l.theta_a.raw_dim()),
                })
                .collect(),
            bilinear: Array2::zeros(params.bilinear.raw_dim()),
        }
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.theta_e, &l.theta_a])
            .chain(std::iter::once(&self.bilinear))
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.theta_e, &mut l.theta_a])
            .chain(std::iter::once(&mut self.bilinear))
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().flat_map(|m| m.iter()).all(|v| v.is_finite())
    }
}

fn safe_inverse(degrees: Array1<f64>) -> Array1<f64> {
    degrees.mapv(|d| if d > 0.0 { 1.0 / d } else { 0.0 })
}

/// The two fixed propagation operators of a view.
#[derive(Debug, Clone)]
pub struct Propagation {
    /// D_e⁻¹ Hᵀ  (|E| × |A|)
    pub to_hyperedges: Array2<f64>,
    /// D_a⁻¹ H W  (|A| × |E|)
    pub to_devices: Array2<f64>,
}

impl Propagation {
    pub fn of(view: &AugmentedView) -> Self {
        let h = &view.masked_incidence;
        let inv_edge = safe_inverse(h.sum_axis(Axis(0)));
        let inv_device = safe_inverse(h.dot(&view.weights));

        let mut to_hyperedges = h.t().to_owned();
        for (mut row, s) in to_hyperedges.outer_iter_mut().zip(inv_edge.iter()) {
            row *= *s;
        }
        let mut to_devices = h.clone();
        for ((i, n), v) in to_devices.indexed_iter_mut() {
            *v *= inv_device[i] * view.weights[n];
        }
        Self {
            to_hyperedges,
            to_devices,
        }
    }
}

pub fn aggregate_device_to_hyperedge(
    prop: &Propagation,
    x_a_prev: &Array2<f64>,
    theta_e: &Array2<f64>,
    activation: Activation,
) -> Array2<f64> {
    activation.apply(&prop.to_hyperedges.dot(x_a_prev).dot(theta_e))
}

pub fn aggregate_hyperedge_to_device(
    prop: &Propagation,
    x_e: &Array2<f64>,
    theta_a: &Array2<f64>,
    activation: Activation,
) -> Array2<f64> {
    activation.apply(&prop.to_devices.dot(x_e).dot(theta_a))
}

struct LayerCache {
    /// Aggregated device inputs, D_e⁻¹ Hᵀ X_A^(l-1)
    edge_input: Array2<f64>,
    edge_pre: Array2<f64>,
    /// Aggregated hyperedge inputs, D_a⁻¹ H W X_E^(l)
    device_input: Array2<f64>,
    device_pre: Array2<f64>,
}

/// Forward activations kept for the backward pass.
pub struct ForwardPass {
    pub device_embeddings: EmbeddingMatrix,
    pub hyperedge_embeddings: EmbeddingMatrix,
    prop: Propagation,
    layers: Vec<LayerCache>,
}

fn check_view(view: &AugmentedView, params: &EncoderParams) -> Result<()> {
    if view.masked_features.ncols() != params.input_dim() {
        return Err(Error::Structural(format!(
            "view has {} input features, encoder expects {}",
            view.masked_features.ncols(),
            params.input_dim()
        )));
    }
    if view.masked_features.nrows() != view.num_devices() || view.weights.len() != view.num_hyperedges()
    {
        return Err(Error::Structural("view matrices disagree on dimensions".into()));
    }
    Ok(())
}

pub fn forward_with_cache(view: &AugmentedView, params: &EncoderParams) -> Result<ForwardPass> {
    check_view(view, params)?;
    let prop = Propagation::of(view);
    let mut x_a = view.masked_features.clone();
    let mut x_e = Array2::zeros((view.num_hyperedges(), params.embedding_dim()));
    let mut layers = Vec::with_capacity(params.num_layers());
    for (l, layer) in params.layers.iter().enumerate() {
        let act = params.activation_for(l);
        let edge_input = prop.to_hyperedges.dot(&x_a);
        let edge_pre = edge_input.dot(&layer.theta_e);
        x_e = act.apply(&edge_pre);
        let device_input = prop.to_devices.dot(&x_e);
        let device_pre = device_input.dot(&layer.theta_a);
        x_a = act.apply(&device_pre);
        layers.push(LayerCache {
            edge_input,
            edge_pre,
            device_input,
            device_pre,
        });
    }
    Ok(ForwardPass {
        device_embeddings: x_a,
        hyperedge_embeddings: x_e,
        prop,
        layers,
    })
}

/// Device and hyperedge embeddings of the final layer.
pub fn forward(
    view: &AugmentedView,
    params: &EncoderParams,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let pass = forward_with_cache(view, params)?;
    Ok((pass.device_embeddings, pass.hyperedge_embeddings))
}

impl ForwardPass {
    /// Accumulate ∂L/∂Θ into `grads` given ∂L/∂X_A and ∂L/∂X_E of the final layer.
    pub fn backward(
        &self,
        params: &EncoderParams,
        d_device: &Array2<f64>,
        d_hyperedge: &Array2<f64>,
        grads: &mut GradientSet,
    ) {
        let mut d_xa = d_device.clone();
        let mut d_xe_extra = Some(d_hyperedge.clone());
        for l in (0..params.num_layers()).rev() {
            let act = params.activation_for(l);
            let cache = &self.layers[l];
            let layer = &params.layers[l];
            let g = &mut grads.layers[l];

            let mut d_pre = d_xa;
            act.backprop(&mut d_pre, &cache.device_pre);
            g.theta_a += &cache.device_input.t().dot(&d_pre);
            let mut d_xe = self.prop.to_devices.t().dot(&d_pre.dot(&layer.theta_a.t()));
            if let Some(extra) = d_xe_extra.take() {
                d_xe += &extra;
            }

            let mut d_pre = d_xe;
            act.backprop(&mut d_pre, &cache.edge_pre);
            g.theta_e += &cache.edge_input.t().dot(&d_pre);
            d_xa = self.prop.to_hyperedges.t().dot(&d_pre.dot(&layer.theta_e.t()));
        }
    }

    /// Signs of every pre-activation; used to detect ReLU kinks crossed by a perturbation.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|c| c.edge_pre.iter().chain(c.device_pre.iter()))
            .map(|&v| v > 0.0)
            .collect()
    }
}

/// Per-entity loop evaluation of the same network; a test oracle for [`forward`].
///
/// Each hyperedge takes the mean of its surviving members' rows, each device
/// the weight-normalized sum of its incident hyperedges' rows, and both
/// results are multiplied by the layer matrix with explicit loops.
pub fn forward_elementwise_oracle(
    view: &AugmentedView,
    params: &EncoderParams,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    check_view(view, params)?;
    let (num_a, num_e) = (view.num_devices(), view.num_hyperedges());
    let h = &view.masked_incidence;
    let mut x_a: Vec<Vec<f64>> = view.masked_features.outer_iter().map(|r| r.to_vec()).collect();
    let mut x_e: Vec<Vec<f64>> = vec![vec![0.0; params.embedding_dim()]; num_e];

    let times = |v: &[f64], m: &Array2<f64>, act: Activation| -> Vec<f64> {
        (0..m.ncols())
            .map(|c| act.apply_scalar((0..m.nrows()).map(|r| v[r] * m[[r, c]]).sum()))
            .collect()
    };

    for (l, layer) in params.layers.iter().enumerate() {
        let act = params.activation_for(l);
        let width = layer.theta_e.nrows();
        x_e = (0..num_e)
            .map(|n| {
                let members: Vec<usize> = (0..num_a).filter(|&i| h[[i, n]] != 0.0).collect();
                let mut mean = vec![0.0; width];
                if !members.is_empty() {
                    for &i in &members {
                        for (m, v) in mean.iter_mut().zip(&x_a[i]) {
                            *m += v;
                        }
                    }
                    for m in mean.iter_mut() {
                        *m /= members.len() as f64;
                    }
                }
                times(&mean, &layer.theta_e, act)
            })
            .collect();
        let width = layer.theta_a.nrows();
        x_a = (0..num_a)
            .map(|i| {
                let mut acc = vec![0.0; width];
                let mut degree = 0.0;
                for n in (0..num_e).filter(|&n| h[[i, n]] != 0.0) {
                    let w = view.weights[n];
                    degree += w;
                    for (a, v) in acc.iter_mut().zip(&x_e[n]) {
                        *a += w * v;
                    }
                }
                if degree > 0.0 {
                    for a in acc.iter_mut() {
                        *a /= degree;
                    }
                } else {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                }
                times(&acc, &layer.theta_a, act)
            })
            .collect();
    }

    let to_matrix = |rows: Vec<Vec<f64>>, cols: usize| {
        let n = rows.len();
        Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
            .expect("rows have equal width")
    };
    let d = params.embedding_dim();
    Ok((to_matrix(x_a, d), to_matrix(x_e, d)))
}
