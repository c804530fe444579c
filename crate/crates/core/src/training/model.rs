//! Trainable models: the full graph-bridged classifier and an independent
//! per-label linear baseline.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::backbone::{ToyMlp, ToyMlpCache, TOY_MLP_TENSOR_NAMES};
use crate::error::{Error, Result};
use crate::fusion::{FusionCache, FusionParameters, FUSION_TENSOR_NAMES};
use crate::gcn::{GcnCache, GcnStack};
use crate::rng::fan_in_uniform;
use crate::training::optim::ParamGroup;

/// Anything the training loop can fit: maps raw features (`B x D`) to logits
/// (`B x C`) and back-propagates into a flat, ordered parameter list.
pub trait Trainable: Clone {
    type Cache;

    fn num_labels(&self) -> usize;
    fn param_specs(&self) -> Vec<(String, ParamGroup)>;
    fn params(&self) -> Vec<&Array2<f64>>;
    fn params_mut(&mut self) -> Vec<&mut Array2<f64>>;
    fn forward(&self, raw: &Array2<f64>) -> Result<(Array2<f64>, Self::Cache)>;
    /// Gradients in [`Self::params`] order.
    fn backward(&self, cache: &Self::Cache, upstream: &Array2<f64>) -> Result<Vec<Array2<f64>>>;

    fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|p| p.dim()).collect()
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        self.param_specs().into_iter().map(|(_, g)| g).collect()
    }
}

/// Label embeddings propagated through the GCN, bridged with (optionally
/// MLP-transformed) image features.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeModel {
    pub embeddings: Array2<f64>,
    pub ea_norm: Array2<f64>,
    pub gcn: GcnStack,
    pub fusion: FusionParameters,
    pub backbone: Option<ToyMlp>,
    pub finetune_embeddings: bool,
}

#[derive(Debug, Clone)]
pub struct BridgeCache {
    gcn: GcnCache,
    fusion: FusionCache,
    backbone: Option<ToyMlpCache>,
}

impl BridgeModel {
    pub fn new(
        embeddings: Array2<f64>,
        ea_norm: Array2<f64>,
        gcn: GcnStack,
        fusion: FusionParameters,
        backbone: Option<ToyMlp>,
        finetune_embeddings: bool,
    ) -> Result<Self> {
        let c = embeddings.nrows();
        if ea_norm.dim() != (c, c) {
            return Err(Error::Shape(format!(
                "propagation matrix {:?} does not match {c} labels",
                ea_norm.dim()
            )));
        }
        if gcn.dims()[0] != embeddings.ncols() {
            return Err(Error::Shape(format!(
                "embedding width {} does not match gcn input {}",
                embeddings.ncols(),
                gcn.dims()[0]
            )));
        }
        if *gcn.dims().last().unwrap() != fusion.label_dim() {
            return Err(Error::Shape("gcn output width does not match fusion label width".into()));
        }
        if let Some(mlp) = &backbone {
            if mlp.output_dim() != fusion.feature_dim() {
                return Err(Error::Shape("toy mlp output does not match fusion feature width".into()));
            }
        }
        Ok(Self {
            embeddings,
            ea_norm,
            gcn,
            fusion,
            backbone,
            finetune_embeddings,
        })
    }

    /// Width of the raw features this model consumes.
    pub fn raw_dim(&self) -> usize {
        self.backbone
            .as_ref()
            .map_or(self.fusion.feature_dim(), ToyMlp::input_dim)
    }

    /// The GCN output `LO` for the current parameters.
    pub fn label_cooccurrence_embedding(&self) -> Result<Array2<f64>> {
        Ok(self.gcn.forward(&self.embeddings, &self.ea_norm)?.0)
    }
}

impl Trainable for BridgeModel {
    type Cache = BridgeCache;

    fn num_labels(&self) -> usize {
        self.embeddings.nrows()
    }

    fn param_specs(&self) -> Vec<(String, ParamGroup)> {
        let mut specs: Vec<(String, ParamGroup)> = (0..self.gcn.depth())
            .map(|l| (format!("gcn.theta{l}"), ParamGroup::Lce))
            .collect();
        if self.finetune_embeddings {
            specs.push(("embeddings.w".into(), ParamGroup::Lce));
        }
        specs.extend(FUSION_TENSOR_NAMES.iter().map(|n| (n.to_string(), ParamGroup::Main)));
        if self.backbone.is_some() {
            specs.extend(TOY_MLP_TENSOR_NAMES.iter().map(|n| (n.to_string(), ParamGroup::Main)));
        }
        specs
    }

    fn params(&self) -> Vec<&Array2<f64>> {
        let mut out: Vec<&Array2<f64>> = self.gcn.thetas().iter().collect();
        if self.finetune_embeddings {
            out.push(&self.embeddings);
        }
        out.extend(self.fusion.tensors());
        if let Some(mlp) = &self.backbone {
            out.extend(mlp.tensors());
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = self.gcn.thetas_mut().iter_mut().collect();
        if self.finetune_embeddings {
            out.push(&mut self.embeddings);
        }
        out.extend(self.fusion.tensors_mut());
        if let Some(mlp) = &mut self.backbone {
            out.extend(mlp.tensors_mut());
        }
        out
    }

    fn forward(&self, raw: &Array2<f64>) -> Result<(Array2<f64>, BridgeCache)> {
        let (lo, gcn_cache) = self.gcn.forward(&self.embeddings, &self.ea_norm)?;
        let (features, backbone_cache) = match &self.backbone {
            Some(mlp) => {
                let (f, c) = mlp.forward(raw)?;
                (f, Some(c))
            }
            None => (raw.clone(), None),
        };
        let (logits, fusion_cache) = self.fusion.bridge_all(&features, &lo)?;
        Ok((
            logits,
            BridgeCache {
                gcn: gcn_cache,
                fusion: fusion_cache,
                backbone: backbone_cache,
            },
        ))
    }

    fn backward(&self, cache: &BridgeCache, upstream: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        let fusion = self.fusion.backward(&cache.fusion, upstream)?;
        let gcn = self.gcn.backward(&cache.gcn, &fusion.label_embeddings)?;
        let mut grads = gcn.thetas;
        if self.finetune_embeddings {
            grads.push(gcn.input);
        }
        grads.extend(fusion.params);
        if let (Some(mlp), Some(c)) = (&self.backbone, &cache.backbone) {
            let (mlp_grads, _) = mlp.backward(c, &fusion.features)?;
            grads.extend(mlp_grads);
        }
        Ok(grads)
    }
}

/// Independent logistic head per label on the same features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaseline {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
    pub backbone: Option<ToyMlp>,
}

#[derive(Debug, Clone)]
pub struct LinearCache {
    features: Array2<f64>,
    backbone: Option<ToyMlpCache>,
}

impl LinearBaseline {
    pub fn new(feature_dim: usize, num_labels: usize, backbone: Option<ToyMlp>, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: fan_in_uniform(rng, feature_dim, num_labels, feature_dim),
            bias: fan_in_uniform(rng, 1, num_labels, feature_dim),
            backbone,
        }
    }
}

impl Trainable for LinearBaseline {
    type Cache = LinearCache;

    fn num_labels(&self) -> usize {
        self.weight.ncols()
    }

    fn param_specs(&self) -> Vec<(String, ParamGroup)> {
        let mut specs = vec![
            ("heads.weight".to_string(), ParamGroup::Main),
            ("heads.bias".to_string(), ParamGroup::Main),
        ];
        if self.backbone.is_some() {
            specs.extend(TOY_MLP_TENSOR_NAMES.iter().map(|n| (n.to_string(), ParamGroup::Main)));
        }
        specs
    }

    fn params(&self) -> Vec<&Array2<f64>> {
        let mut out = vec![&self.weight, &self.bias];
        if let Some(mlp) = &self.backbone {
            out.extend(mlp.tensors());
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.weight, &mut self.bias];
        if let Some(mlp) = &mut self.backbone {
            out.extend(mlp.tensors_mut());
        }
        out
    }

    fn forward(&self, raw: &Array2<f64>) -> Result<(Array2<f64>, LinearCache)> {
        let (features, backbone) = match &self.backbone {
            Some(mlp) => {
                let (f, c) = mlp.forward(raw)?;
                (f, Some(c))
            }
            None => (raw.clone(), None),
        };
        if features.ncols() != self.weight.nrows() {
            return Err(Error::Shape(format!(
                "baseline expects {} features, got {}",
                self.weight.nrows(),
                features.ncols()
            )));
        }
        let logits = features.dot(&self.weight) + &self.bias;
        Ok((logits, LinearCache { features, backbone }))
    }

    fn backward(&self, cache: &LinearCache, upstream: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        let mut grads = vec![
            cache.features.t().dot(upstream),
            upstream.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0)),
        ];
        if let (Some(mlp), Some(c)) = (&self.backbone, &cache.backbone) {
            let d_features = upstream.dot(&self.weight.t());
            grads.extend(mlp.backward(c, &d_features)?.0);
        }
        Ok(grads)
    }
}
