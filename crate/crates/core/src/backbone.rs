//! Image-feature providers.
//!
//! The real feature extractor is external: users export one vector per image
//! into the feature file format. For desk-scale work there is also a planted
//! co-occurrence generator and a one-hidden-layer MLP that can be trained
//! end to end together with the rest of the model.

use std::collections::HashMap;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{leaky_relu, leaky_relu_grad, next_generation};
use crate::ingest::{FeatureRecord, FeatureStore, LabeledSample};
use crate::rng::{fan_in_uniform, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Precomputed,
    Synthetic,
    ToyMlp,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precomputed" => Ok(Self::Precomputed),
            "synthetic" => Ok(Self::Synthetic),
            "toy_mlp" => Ok(Self::ToyMlp),
            other => Err(Error::InvalidConfig(format!("unknown feature provider `{other}`"))),
        }
    }
}

/// `from` present forces `to` with probability `strength`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub from: usize,
    pub to: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_labels: usize,
    pub feature_dim: usize,
    pub n_samples: usize,
    pub dependency_edges: Vec<DependencyEdge>,
    pub base_rates: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_labels < 2 || self.feature_dim == 0 {
            return bad(format!(
                "synthetic data needs >= 2 labels and >= 1 feature dim, got {} and {}",
                self.num_labels, self.feature_dim
            ));
        }
        if self.base_rates.len() != self.num_labels {
            return bad(format!(
                "{} base rates for {} labels",
                self.base_rates.len(),
                self.num_labels
            ));
        }
        if self.base_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("base rates must lie in [0, 1]".into());
        }
        for e in &self.dependency_edges {
            if e.from >= self.num_labels || e.to >= self.num_labels || e.from == e.to {
                return bad(format!("invalid dependency edge {} -> {}", e.from, e.to));
            }
            if !(0.0..=1.0).contains(&e.strength) {
                return bad(format!("edge strength {} outside [0, 1]", e.strength));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        Ok(())
    }

    pub fn sample_id(index: usize) -> String {
        format!("s{index:06}")
    }
}

/// Label signatures plus the labels of every generated id; features are
/// recomputed on demand from the id.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    spec: SyntheticSpec,
    signatures: Array2<f64>,
    labels: HashMap<String, Vec<u8>>,
}

fn unit_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Array2<f64> {
    let mut m: Array2<f64> = Array2::from_shape_simple_fn((n, dim), || StandardNormal.sample(rng));
    for mut row in m.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            row[0] = 1.0;
        }
    }
    m
}

impl SyntheticSource {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn signatures(&self) -> &Array2<f64> {
        &self.signatures
    }

    fn features_for(&self, id: &str, labels: &[u8]) -> Array1<f64> {
        let mut f = Array1::zeros(self.spec.feature_dim);
        for (j, &l) in labels.iter().enumerate() {
            if l == 1 {
                f += &self.signatures.row(j);
            }
        }
        if self.spec.noise_sigma > 0.0 {
            let mut rng = stream(self.spec.seed, &format!("noise/{id}"));
            for v in f.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += self.spec.noise_sigma * z;
            }
        }
        f
    }

    pub fn get(&self, id: &str) -> Result<Array1<f64>> {
        let labels = self
            .labels
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown synthetic sample `{id}`")))?;
        Ok(self.features_for(id, labels))
    }
}

/// Draws labels from the base rates, then walks the dependency edges in
/// order, forcing `to` on with probability `strength` whenever `from` is on.
/// Features are the sum of the active labels' unit signatures plus Gaussian
/// noise.
pub fn generate_synthetic_dataset(
    spec: &SyntheticSpec,
) -> Result<(Vec<LabeledSample>, Vec<FeatureRecord>, SyntheticSource)> {
    spec.validate()?;
    let signatures = unit_vectors(&mut stream(spec.seed, "signatures"), spec.num_labels, spec.feature_dim);
    let mut rng = stream(spec.seed, "labels");
    let mut samples = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let mut labels: Vec<u8> = spec
            .base_rates
            .iter()
            .map(|&r| u8::from(rng.random::<f64>() < r))
            .collect();
        for e in &spec.dependency_edges {
            // always draw so the stream stays aligned whatever the labels are
            let forced = rng.random::<f64>() < e.strength;
            if labels[e.from] == 1 && forced {
                labels[e.to] = 1;
            }
        }
        samples.push(LabeledSample {
            sample_id: SyntheticSpec::sample_id(i),
            labels,
        });
    }
    let source = SyntheticSource {
        spec: spec.clone(),
        signatures,
        labels: samples.iter().map(|s| (s.sample_id.clone(), s.labels.clone())).collect(),
    };
    let records = samples
        .iter()
        .map(|s| FeatureRecord {
            sample_id: s.sample_id.clone(),
            features: source.features_for(&s.sample_id, &s.labels).to_vec(),
        })
        .collect();
    Ok((samples, records, source))
}

/// One hidden layer MLP, `y = W2 . LeakyReLU(W1 . x + b1) + b2`.
#[derive(Debug, Clone)]
pub struct ToyMlp {
    pub(crate) w1: Array2<f64>,
    pub(crate) b1: Array2<f64>,
    pub(crate) w2: Array2<f64>,
    pub(crate) b2: Array2<f64>,
    slope: f64,
    generation: u64,
}

#[derive(Debug, Clone)]
pub struct ToyMlpCache {
    generation: u64,
    input: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

pub const TOY_MLP_TENSOR_NAMES: [&str; 4] = [
    "backbone.fc1.weight",
    "backbone.fc1.bias",
    "backbone.fc2.weight",
    "backbone.fc2.bias",
];

impl PartialEq for ToyMlp {
    fn eq(&self, other: &Self) -> bool {
        self.slope == other.slope && self.tensors() == other.tensors()
    }
}

impl ToyMlp {
    pub fn new(input: usize, hidden: usize, output: usize, slope: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::InvalidConfig("toy mlp dims must be positive".into()));
        }
        Self::from_tensors(
            vec![
                fan_in_uniform(rng, input, hidden, input),
                fan_in_uniform(rng, 1, hidden, input),
                fan_in_uniform(rng, hidden, output, hidden),
                fan_in_uniform(rng, 1, output, hidden),
            ],
            slope,
        )
    }

    pub fn from_tensors(tensors: Vec<Array2<f64>>, slope: f64) -> Result<Self> {
        let [w1, b1, w2, b2]: [Array2<f64>; 4] = tensors
            .try_into()
            .map_err(|t: Vec<_>| Error::Shape(format!("expected 4 mlp tensors, got {}", t.len())))?;
        if b1.dim() != (1, w1.ncols()) || w2.nrows() != w1.ncols() || b2.dim() != (1, w2.ncols()) {
            return Err(Error::Shape("inconsistent toy mlp shapes".into()));
        }
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::InvalidConfig(format!("leaky slope must be positive, got {slope}")));
        }
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            slope,
            generation: next_generation(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn tensors(&self) -> [&Array2<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 4] {
        self.generation = next_generation();
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward(&self, input: &Array2<f64>) -> Result<(Array2<f64>, ToyMlpCache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "toy mlp expects {} inputs, got {}",
                self.input_dim(),
                input.ncols()
            )));
        }
        let pre = input.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(|x| leaky_relu(x, self.slope));
        let out = hidden.dot(&self.w2) + &self.b2;
        Ok((
            out,
            ToyMlpCache {
                generation: self.generation,
                input: input.clone(),
                pre,
                hidden,
            },
        ))
    }

    /// Returns parameter gradients in [`TOY_MLP_TENSOR_NAMES`] order and the
    /// gradient with respect to the input.
    pub fn backward(&self, cache: &ToyMlpCache, upstream: &Array2<f64>) -> Result<(Vec<Array2<f64>>, Array2<f64>)> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache("toy mlp weights changed since the forward pass".into()));
        }
        if upstream.dim() != (cache.input.nrows(), self.output_dim()) {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?}, expected ({}, {})",
                upstream.dim(),
                cache.input.nrows(),
                self.output_dim()
            )));
        }
        let d_w2 = cache.hidden.t().dot(upstream);
        let d_b2 = upstream.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut d_pre = upstream.dot(&self.w2.t());
        d_pre.zip_mut_with(&cache.pre, |g, &z| *g *= leaky_relu_grad(z, self.slope));
        let d_w1 = cache.input.t().dot(&d_pre);
        let d_b1 = d_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_input = d_pre.dot(&self.w1.t());
        Ok((vec![d_w1, d_b1, d_w2, d_b2], d_input))
    }
}

/// Source of per-sample feature vectors.
#[derive(Debug, Clone)]
pub enum FeatureProvider {
    Precomputed(FeatureStore),
    Synthetic(SyntheticSource),
    /// Raw features from `base`, passed through a trainable MLP.
    ToyMlp { base: Box<FeatureProvider>, mlp: ToyMlp },
}

impl FeatureProvider {
    pub fn kind(&self) -> ProviderKind {
        match self {
            Self::Precomputed(_) => ProviderKind::Precomputed,
            Self::Synthetic(_) => ProviderKind::Synthetic,
            Self::ToyMlp { .. } => ProviderKind::ToyMlp,
        }
    }

    /// Width of the vectors returned by [`Self::get_features`].
    pub fn dim(&self) -> usize {
        match self {
            Self::Precomputed(store) => store.dim(),
            Self::Synthetic(src) => src.spec.feature_dim,
            Self::ToyMlp { mlp, .. } => mlp.output_dim(),
        }
    }

    /// Width of the raw vectors before any trainable transform.
    pub fn raw_dim(&self) -> usize {
        match self {
            Self::ToyMlp { base, .. } => base.dim(),
            other => other.dim(),
        }
    }

    /// Raw features before any trainable transform.
    pub fn raw_features(&self, id: &str) -> Result<Array1<f64>> {
        match self {
            Self::Precomputed(store) => store
                .get(id)
                .map(|v| v.to_owned())
                .ok_or_else(|| Error::InvalidInput(format!("no features for sample `{id}`"))),
            Self::Synthetic(src) => src.get(id),
            Self::ToyMlp { base, .. } => base.raw_features(id),
        }
    }

    pub fn get_features(&self, id: &str) -> Result<Array1<f64>> {
        match self {
            Self::ToyMlp { base, mlp } => {
                let raw = base.raw_features(id)?.insert_axis(Axis(0));
                let (out, _) = mlp.forward(&raw)?;
                Ok(out.row(0).to_owned())
            }
            other => other.raw_features(id),
        }
    }

    /// Stacks raw features for `ids` into a matrix.
    pub fn raw_batch<S: AsRef<str>>(&self, ids: &[S]) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((ids.len(), self.raw_dim()));
        for (r, id) in ids.iter().enumerate() {
            m.row_mut(r).assign(&self.raw_features(id.as_ref())?);
        }
        Ok(m)
    }
}
