//! Binary checkpoint format.
//!
//! ```text
//! magic     8 bytes  "LBCKPT\0\0"
//! version   u32 LE
//! hdr_len   u64 LE
//! header    hdr_len bytes of JSON (config, vocabulary, tensor names and shapes)
//! payload   f64 LE values of every tensor, row-major, in header order
//! ```

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::backbone::ToyMlp;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::fusion::{FusionParameters, FUSION_TENSOR_NAMES};
use crate::gcn::GcnStack;
use crate::graph::{CooccurrenceStats, CorrelationGraph, ReweightAxis};
use crate::ingest::LabelVocabulary;
use crate::training::model::{BridgeModel, Trainable};
use crate::training::optim::OptimizerState;

pub const MAGIC: &[u8; 8] = b"LBCKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub best_val_auc: Option<f64>,
    pub config: TrainConfig,
    pub vocab: LabelVocabulary,
    pub graph: CorrelationGraph,
    pub model: BridgeModel,
    pub optimizer: OptimizerState,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct GraphMeta {
    stats: CooccurrenceStats,
    epsilon: f64,
    delta: f64,
    axis: ReweightAxis,
}

#[derive(Serialize, Deserialize)]
struct Header {
    epoch: usize,
    best_val_auc: Option<f64>,
    config: TrainConfig,
    vocab: LabelVocabulary,
    graph: GraphMeta,
    leaky_slope: f64,
    gcn_final_linear: bool,
    groups: usize,
    finetune_embeddings: bool,
    toy_mlp: bool,
    tensors: Vec<TensorMeta>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let specs = self.model.param_specs();
        let mut out: Vec<(String, &Array2<f64>)> = specs
            .iter()
            .map(|(n, _)| n.clone())
            .zip(self.model.params())
            .collect();
        if !self.model.finetune_embeddings {
            out.push(("embeddings.w".into(), &self.model.embeddings));
        }
        out.push(("graph.p".into(), &self.graph.p));
        out.push(("graph.a".into(), &self.graph.a));
        out.push(("graph.ea".into(), &self.graph.ea));
        out.push(("graph.ea_norm".into(), &self.graph.ea_norm));
        for ((name, _), buf) in specs.iter().zip(&self.optimizer.buffers) {
            out.push((format!("optim.{name}"), buf));
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.named_tensors();
        let header = Header {
            epoch: self.epoch,
            best_val_auc: self.best_val_auc,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            graph: GraphMeta {
                stats: self.graph.stats.clone(),
                epsilon: self.graph.epsilon,
                delta: self.graph.delta,
                axis: self.graph.axis,
            },
            leaky_slope: self.model.gcn.slope(),
            gcn_final_linear: self.model.gcn.final_linear(),
            groups: self.model.fusion.groups(),
            finetune_embeddings: self.model.finetune_embeddings,
            toy_mlp: self.model.backbone.is_some(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorMeta {
                    name: name.clone(),
                    shape: [t.nrows(), t.ncols()],
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header)?;
        let payload_len: usize = tensors.iter().map(|(_, t)| t.len() * 8).sum();
        let mut out = Vec::with_capacity(20 + header.len() + payload_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &tensors {
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint file (bad magic or truncated preamble)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(corrupt(format!(
                "checkpoint version {version} is not supported (expected {VERSION})"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let header_end = 20usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| corrupt("truncated checkpoint header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..header_end])
            .map_err(|e| corrupt(format!("invalid checkpoint header: {e}")))?;

        let expected: usize = header.tensors.iter().map(|t| t.shape[0] * t.shape[1] * 8).sum();
        let payload = &bytes[header_end..];
        if payload.len() != expected {
            return Err(corrupt(format!(
                "checkpoint payload has {} bytes, header describes {expected} (truncated or corrupt)",
                payload.len()
            )));
        }
        let mut tensors: HashMap<String, Array2<f64>> = HashMap::new();
        let mut offset = 0;
        for meta in &header.tensors {
            let n = meta.shape[0] * meta.shape[1];
            let values: Vec<f64> = payload[offset..offset + n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            offset += n * 8;
            let t = Array2::from_shape_vec((meta.shape[0], meta.shape[1]), values)
                .map_err(|e| corrupt(e.to_string()))?;
            tensors.insert(meta.name.clone(), t);
        }
        let mut take = |name: &str| {
            tensors
                .remove(name)
                .ok_or_else(|| corrupt(format!("checkpoint lacks tensor `{name}`")))
        };

        let depth = header.config.gcn_dims.len() - 1;
        let thetas = (0..depth)
            .map(|l| take(&format!("gcn.theta{l}")))
            .collect::<Result<Vec<_>>>()?;
        let gcn = GcnStack::from_thetas(thetas, header.leaky_slope, header.gcn_final_linear)?;
        let embeddings = take("embeddings.w")?;
        let fusion_tensors = FUSION_TENSOR_NAMES
            .iter()
            .map(|n| take(n))
            .collect::<Result<Vec<_>>>()?;
        let fusion = FusionParameters::from_tensors(fusion_tensors, header.groups)?;
        let backbone = if header.toy_mlp {
            let t = crate::backbone::TOY_MLP_TENSOR_NAMES
                .iter()
                .map(|n| take(n))
                .collect::<Result<Vec<_>>>()?;
            Some(ToyMlp::from_tensors(t, header.leaky_slope)?)
        } else {
            None
        };
        let graph = CorrelationGraph {
            stats: header.graph.stats,
            p: take("graph.p")?,
            a: take("graph.a")?,
            ea: take("graph.ea")?,
            ea_norm: take("graph.ea_norm")?,
            epsilon: header.graph.epsilon,
            delta: header.graph.delta,
            axis: header.graph.axis,
        };
        let model = BridgeModel::new(
            embeddings,
            graph.ea_norm.clone(),
            gcn,
            fusion,
            backbone,
            header.finetune_embeddings,
        )?;
        if model.num_labels() != header.vocab.len() {
            return Err(corrupt(format!(
                "checkpoint model has {} labels but its vocabulary has {}",
                model.num_labels(),
                header.vocab.len()
            )));
        }
        let mut optimizer = OptimizerState::new(&[], &header.config);
        for (name, _) in model.param_specs() {
            optimizer.buffers.push(take(&format!("optim.{name}"))?);
        }
        Ok(Self {
            epoch: header.epoch,
            best_val_auc: header.best_val_auc,
            config: header.config,
            vocab: header.vocab,
            graph,
            model,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Fails with [`Error::Incompatible`] unless `vocab` matches the
    /// checkpoint's label set and order.
    pub fn ensure_vocab(&self, vocab: &LabelVocabulary) -> Result<()> {
        if vocab.len() != self.vocab.len() {
            return Err(Error::Incompatible(format!(
                "checkpoint was trained on C={} labels but the data has C={}",
                self.vocab.len(),
                vocab.len()
            )));
        }
        for (i, (a, b)) in self.vocab.labels().iter().zip(vocab.labels()).enumerate() {
            if !a.eq_ignore_ascii_case(b) {
                return Err(Error::Incompatible(format!(
                    "label {i} is `{a}` in the checkpoint but `{b}` in the data"
                )));
            }
        }
        Ok(())
    }
}
