//! Checkpoint serialization.
//!
//! Values are stored as JSON numbers; the shortest-round-trip float encoding
//! makes save followed by load reproduce every parameter bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelDims, SgruParams, Variant};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub variant: Variant,
    pub hyperparameters: ModelDims,
    pub seed: u64,
    pub parameters: BTreeMap<String, ParamTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &SgruParams, seed: u64) -> Self {
        let mut parameters = BTreeMap::new();
        params.visit_leaves(&mut |name, tensor| {
            parameters.insert(
                name,
                ParamTensor {
                    shape: tensor.shape().to_vec(),
                    values: tensor.data().to_vec(),
                },
            );
        });
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            variant: params.variant,
            hyperparameters: params.dims,
            seed,
            parameters,
        }
    }

    /// Rebuilds the parameter set; every stored name must match a leaf of the
    /// declared variant and dimensions exactly.
    pub fn to_params(&self) -> Result<SgruParams> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {})",
                self.format_version, CHECKPOINT_FORMAT_VERSION
            )));
        }
        let mut params = SgruParams::zeroed(self.variant, self.hyperparameters)?;
        let mut used = std::collections::BTreeSet::new();
        let mut fill_err = None;
        params.visit_leaves_mut(&mut |name, tensor| {
            if fill_err.is_some() {
                return;
            }
            match self.parameters.get(&name) {
                None => fill_err = Some(format!("missing parameter {name}")),
                Some(stored) if stored.shape != tensor.shape() => {
                    fill_err = Some(format!(
                        "parameter {name} has shape {:?}, expected {:?}",
                        stored.shape,
                        tensor.shape()
                    ));
                }
                Some(stored) => {
                    tensor.data_mut().copy_from_slice(&stored.values);
                    used.insert(name);
                }
            }
        });
        if let Some(message) = fill_err {
            return Err(Error::Checkpoint(message));
        }
        if used.len() != self.parameters.len() {
            let extra = self
                .parameters
                .keys()
                .find(|k| !used.contains(*k))
                .expect("count mismatch implies an unused key");
            return Err(Error::Checkpoint(format!("unknown parameter {extra}")));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("invalid checkpoint: {e}")))?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
