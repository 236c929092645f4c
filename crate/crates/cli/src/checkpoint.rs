//! Versioned JSON parameter checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use algforge_core::policy::{PolicyHyper, PolicyParams, Tensor};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorDump {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HyperDump {
    d_model: usize,
    heads: usize,
    blocks: usize,
    ffn_hidden: usize,
    vocab: usize,
    factor_dim: usize,
    max_len: usize,
}

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    version: u32,
    hyper: HyperDump,
    /// Whether the parameters were trained with a problem-factor token.
    pub continual: bool,
    /// Echo of the training configuration for provenance.
    pub config_echo: BTreeMap<String, String>,
    tensors: BTreeMap<String, TensorDump>,
}

impl Checkpoint {
    pub fn from_params(
        params: &PolicyParams,
        continual: bool,
        config_echo: BTreeMap<String, String>,
    ) -> Self {
        let tensors = params
            .named_tensors()
            .into_iter()
            .map(|(name, t)| {
                (
                    name,
                    TensorDump {
                        rows: t.rows,
                        cols: t.cols,
                        data: t.data.clone(),
                    },
                )
            })
            .collect();
        let h = params.hyper;
        Checkpoint {
            version: CHECKPOINT_VERSION,
            hyper: HyperDump {
                d_model: h.d_model,
                heads: h.heads,
                blocks: h.blocks,
                ffn_hidden: h.ffn_hidden,
                vocab: h.vocab,
                factor_dim: h.factor_dim,
                max_len: h.max_len,
            },
            continual,
            config_echo,
            tensors,
        }
    }

    pub fn to_params(&self) -> Result<PolicyParams> {
        if self.version != CHECKPOINT_VERSION {
            bail!("unsupported checkpoint version {}", self.version);
        }
        let hyper = PolicyHyper {
            d_model: self.hyper.d_model,
            heads: self.hyper.heads,
            blocks: self.hyper.blocks,
            ffn_hidden: self.hyper.ffn_hidden,
            vocab: self.hyper.vocab,
            factor_dim: self.hyper.factor_dim,
            max_len: self.hyper.max_len,
        };
        let mut params = PolicyParams::init(hyper, 0);
        for (name, tensor) in params.named_tensors_mut() {
            let dump = self
                .tensors
                .get(&name)
                .with_context(|| format!("checkpoint is missing tensor `{name}`"))?;
            if dump.rows != tensor.rows || dump.cols != tensor.cols {
                bail!(
                    "tensor `{name}` has shape {}x{}, expected {}x{}",
                    dump.rows,
                    dump.cols,
                    tensor.rows,
                    tensor.cols
                );
            }
            *tensor = Tensor {
                rows: dump.rows,
                cols: dump.cols,
                data: dump.data.clone(),
            };
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
