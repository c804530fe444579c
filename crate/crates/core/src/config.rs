//! Run configuration. Every key has a default, so `{}` is a valid config file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::backbone::ProviderKind;
use crate::error::{Error, Result};
use crate::graph::ReweightAxis;
use crate::ingest::{UncertainPolicy, DEFAULT_NO_FINDING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelFormat {
    #[default]
    Pipe,
    Columnar,
}

impl std::str::FromStr for LabelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pipe" => Ok(Self::Pipe),
            "columnar" => Ok(Self::Columnar),
            other => Err(Error::InvalidConfig(format!("unknown label format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Binarization threshold on conditional probabilities.
    pub epsilon: f64,
    /// Mass spread over a node's neighbours when reweighting.
    pub delta: f64,
    pub reweight_axis: ReweightAxis,
    /// Count validation labels into the graph statistics as well.
    pub graph_include_val: bool,

    #[serde(rename = "G")]
    pub groups: usize,
    #[serde(rename = "g")]
    pub group_size: usize,
    pub d3: usize,
    /// `[D2, hidden..., D2']`.
    pub gcn_dims: Vec<usize>,
    pub gcn_final_linear: bool,
    pub leaky_slope: f64,
    /// Width of the feature vector entering the bridge.
    pub d1: usize,
    pub toy_mlp_hidden: usize,

    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr_lce: f64,
    pub lr_main: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub finetune_embeddings: bool,

    pub split: [f64; 3],
    pub uncertain_policy: UncertainPolicy,
    pub provider: ProviderKind,
    pub label_format: LabelFormat,
    pub labels_header: bool,
    pub no_finding: String,
    /// Keep the no-finding token as a regular label when it appears in the
    /// vocabulary (columnar data lists it as a column).
    pub include_no_finding: bool,
    pub vocab: Option<Vec<String>>,

    pub labels_path: Option<PathBuf>,
    pub features_path: Option<PathBuf>,
    pub embeddings_path: Option<PathBuf>,
    /// Seed for synthetic label embeddings, also used for out-of-vocabulary
    /// words when `embedding_fallback` is set.
    pub embedding_seed: u64,
    pub embedding_fallback: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            delta: 0.2,
            reweight_axis: ReweightAxis::Row,
            graph_include_val: false,
            groups: 64,
            group_size: 6,
            d3: 384,
            gcn_dims: vec![300, 1024, 768],
            gcn_final_linear: false,
            leaky_slope: 0.2,
            d1: 768,
            toy_mlp_hidden: 256,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            lr_lce: 0.01,
            lr_main: 0.001,
            momentum: 0.9,
            weight_decay: 5e-5,
            decay_every: 10,
            decay_factor: 0.1,
            finetune_embeddings: false,
            split: [0.7, 0.1, 0.2],
            uncertain_policy: UncertainPolicy::AsPositive,
            provider: ProviderKind::Precomputed,
            label_format: LabelFormat::Pipe,
            labels_header: true,
            no_finding: DEFAULT_NO_FINDING.to_string(),
            include_no_finding: true,
            vocab: None,
            labels_path: None,
            features_path: None,
            embeddings_path: None,
            embedding_seed: 0,
            embedding_fallback: false,
        }
    }
}

impl TrainConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn embedding_dim(&self) -> usize {
        self.gcn_dims.first().copied().unwrap_or(0)
    }

    pub fn label_dim(&self) -> usize {
        self.gcn_dims.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1), got {}", self.delta));
        }
        if self.groups == 0 || self.group_size == 0 || self.d3 == 0 || self.d1 == 0 {
            return bad("G, g, d3 and d1 must be positive".into());
        }
        if self.gcn_dims.len() < 2 || self.gcn_dims.contains(&0) {
            return bad(format!("gcn_dims needs >= 2 positive entries, got {:?}", self.gcn_dims));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope > 0.0) {
            return bad(format!("leaky_slope must be positive, got {}", self.leaky_slope));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.decay_every == 0 {
            return bad("epochs, batch_size and decay_every must be positive".into());
        }
        for (name, v) in [("lr_lce", self.lr_lce), ("lr_main", self.lr_main)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!("decay_factor must lie in (0, 1], got {}", self.decay_factor));
        }
        if self.provider == ProviderKind::ToyMlp && self.toy_mlp_hidden == 0 {
            return bad("toy_mlp_hidden must be positive".into());
        }
        Ok(())
    }
}
