//! JSON checkpoint container for encoder parameters.
//!
//! ```json
//! {
//!   "format": "hypertrust-checkpoint",
//!   "version": 1,
//!   "layer_dims": [76, 32, 32],
//!   "activation": "relu",
//!   "matrices": [{"name": "layer0.theta_e", "rows": 76, "cols": 32, "data": [...]}, ...],
//!   "seeds": {"master": 7, "init": ..., "masks": ..., "negatives": ...},
//!   "epoch": 200,
//!   "device_embeddings": {"name": "device_embeddings", "rows": 76, "cols": 32, "data": [...]}
//! }
//! ```
//!
//! Matrices are row-major and listed per layer as `theta_e` then `theta_a`,
//! followed by `bilinear`. Floats are written in shortest round-trip form, so
//! save then load reproduces every bit.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::{Activation, EncoderParams, LayerParams};
use crate::error::{Error, Result};
use crate::files;
use crate::seeding;
use crate::trainer::TrainConfig;

pub const FORMAT: &str = "hypertrust-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl StoredMatrix {
    pub fn from_array(name: impl Into<String>, m: &Array2<f64>) -> Self {
        Self {
            name: name.into(),
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }

    pub fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone()).map_err(|_| {
            Error::Structural(format!(
                "matrix {} declares {}x{} but holds {} values",
                self.name,
                self.rows,
                self.cols,
                self.data.len()
            ))
        })
    }
}

/// Seeds from which the stored parameters were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    pub init: u64,
    pub masks: u64,
    pub negatives: u64,
}

impl SeedLineage {
    pub fn of(cfg: &TrainConfig) -> Self {
        Self {
            master: cfg.seed,
            init: cfg.init_seed(),
            masks: seeding::sub_seed(cfg.seed, seeding::STREAM_MASKS) ^ cfg.mask.seed,
            negatives: seeding::sub_seed(cfg.seed, seeding::STREAM_NEGATIVES) ^ cfg.contrast.neg_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub matrices: Vec<StoredMatrix>,
    pub seeds: SeedLineage,
    /// Number of completed epochs.
    pub epoch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_embeddings: Option<StoredMatrix>,
}

impl Checkpoint {
    pub fn new(
        params: &EncoderParams,
        seeds: SeedLineage,
        epoch: usize,
        device_embeddings: Option<&Array2<f64>>,
    ) -> Self {
        let mut matrices = Vec::new();
        for (l, layer) in params.layers.iter().enumerate() {
            matrices.push(StoredMatrix::from_array(format!("layer{l}.theta_e"), &layer.theta_e));
            matrices.push(StoredMatrix::from_array(format!("layer{l}.theta_a"), &layer.theta_a));
        }
        matrices.push(StoredMatrix::from_array("bilinear", &params.bilinear));
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            layer_dims: params.layer_dims.clone(),
            activation: params.hidden_activation,
            matrices,
            seeds,
            epoch,
            device_embeddings: device_embeddings
                .map(|m| StoredMatrix::from_array("device_embeddings", m)),
        }
    }

    pub fn params(&self) -> Result<EncoderParams> {
        if self.format != FORMAT {
            return Err(Error::Data(format!("not a checkpoint (format tag {:?})", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {} (expected {VERSION})",
                self.version
            )));
        }
        let num_layers = self.layer_dims.len().saturating_sub(1);
        if self.matrices.len() != 2 * num_layers + 1 {
            return Err(Error::Structural(format!(
                "{} matrices stored for {num_layers} layers",
                self.matrices.len()
            )));
        }
        let mut arrays = self.matrices.iter().map(StoredMatrix::to_array);
        let mut layers = Vec::with_capacity(num_layers);
        for _ in 0..num_layers {
            let theta_e = arrays.next().unwrap()?;
            let theta_a = arrays.next().unwrap()?;
            layers.push(LayerParams { theta_e, theta_a });
        }
        let params = EncoderParams {
            layer_dims: self.layer_dims.clone(),
            hidden_activation: self.activation,
            layers,
            bilinear: arrays.next().unwrap()?,
        };
        params.check_shapes()?;
        Ok(params)
    }

    pub fn device_embeddings(&self) -> Result<Option<Array2<f64>>> {
        self.device_embeddings.as_ref().map(StoredMatrix::to_array).transpose()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        files::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&files::read_to_string(path)?, path)
    }
}
