//! Composes ingest, graph, embeddings, model construction, training and
//! evaluation into the end-to-end runs used by the CLI and the experiments.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ndarray::Array2;

use crate::backbone::{generate_synthetic_dataset, FeatureProvider, ProviderKind, SyntheticSpec, ToyMlp};
use crate::config::{LabelFormat, TrainConfig};
use crate::embeddings::{embed_labels, load_word_vectors, synthetic_embeddings};
use crate::error::{Error, Result};
use crate::fusion::FusionParameters;
use crate::gcn::GcnStack;
use crate::graph::CorrelationGraph;
use crate::ingest::{
    infer_pipe_vocabulary, label_matrix, load_features, parse_columnar_labels, parse_pipe_labels, split_dataset,
    FeatureStore, LabelVocabulary, LabeledSample, Split,
};
use crate::metrics::{evaluate, EvaluationReport};
use crate::rng::stream;
use crate::training::{fit, BridgeModel, Checkpoint, EpochLog, FitResult, LinearBaseline, Trainable};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn required<'a>(path: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("`{key}` is not set")))
}

/// Labels plus the raw features for every sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: LabelVocabulary,
    pub samples: Vec<LabeledSample>,
    pub provider: FeatureProvider,
}

/// Resolves the label vocabulary for `cfg`: the configured list, else the
/// columnar header, else the pipe file's tokens in order of appearance.
pub fn resolve_vocabulary(cfg: &TrainConfig) -> Result<LabelVocabulary> {
    let mut labels = match &cfg.vocab {
        Some(v) => v.clone(),
        None => {
            let path = required(&cfg.labels_path, "labels_path")?;
            match cfg.label_format {
                LabelFormat::Pipe => infer_pipe_vocabulary(open(path)?, cfg.labels_header, &cfg.no_finding)?,
                LabelFormat::Columnar => {
                    let mut rdr = csv::ReaderBuilder::new().from_reader(open(path)?);
                    let header = rdr
                        .headers()
                        .map_err(|e| Error::parse(1, e.to_string()))?
                        .clone();
                    header.iter().skip(1).map(str::to_string).collect()
                }
            }
        }
    };
    if !cfg.include_no_finding {
        labels.retain(|l| !l.trim().eq_ignore_ascii_case(cfg.no_finding.trim()));
    }
    LabelVocabulary::with_no_finding(&labels, &cfg.no_finding)
}

impl Dataset {
    /// Reads `labels_path` and `features_path`; every labelled sample must have
    /// a feature row.
    pub fn load(cfg: &TrainConfig) -> Result<Self> {
        Self::load_with_vocab(cfg, resolve_vocabulary(cfg)?)
    }

    /// Loads data to be scored by `checkpoint`. An inferred vocabulary with the
    /// same label set adopts the checkpoint's order; any other difference is
    /// [`Error::Incompatible`].
    pub fn load_for_checkpoint(cfg: &TrainConfig, checkpoint: &Checkpoint) -> Result<Self> {
        let mut vocab = resolve_vocabulary(cfg)?;
        if cfg.vocab.is_none() {
            let key = |v: &LabelVocabulary| {
                let mut k: Vec<String> = v.labels().iter().map(|l| l.trim().to_lowercase()).collect();
                k.sort();
                k
            };
            if key(&vocab) == key(&checkpoint.vocab) {
                vocab = checkpoint.vocab.clone();
            }
        }
        checkpoint.ensure_vocab(&vocab)?;
        Self::load_with_vocab(cfg, vocab)
    }

    pub fn load_with_vocab(cfg: &TrainConfig, vocab: LabelVocabulary) -> Result<Self> {
        let samples = Self::load_labels(cfg, &vocab)?;
        let features_path = required(&cfg.features_path, "features_path")?;
        let store = FeatureStore::from_records(&load_features(open(features_path)?)?)?;
        if let Some(s) = samples.iter().find(|s| store.get(&s.sample_id).is_none()) {
            return Err(Error::InvalidInput(format!(
                "sample `{}` has labels but no feature row in {}",
                s.sample_id,
                features_path.display()
            )));
        }
        Ok(Self {
            vocab,
            samples,
            provider: FeatureProvider::Precomputed(store),
        })
    }

    pub fn load_labels(cfg: &TrainConfig, vocab: &LabelVocabulary) -> Result<Vec<LabeledSample>> {
        let path = required(&cfg.labels_path, "labels_path")?;
        match cfg.label_format {
            LabelFormat::Pipe => parse_pipe_labels(open(path)?, vocab, cfg.labels_header),
            LabelFormat::Columnar => parse_columnar_labels(open(path)?, vocab, cfg.uncertain_policy),
        }
    }

    /// Generates a planted-dependency dataset with labels named by
    /// [`synthetic_label_names`].
    pub fn synthetic(spec: &SyntheticSpec) -> Result<Self> {
        let (samples, _, source) = generate_synthetic_dataset(spec)?;
        let vocab = LabelVocabulary::new(&synthetic_label_names(spec.num_labels))?;
        Ok(Self {
            vocab,
            samples,
            provider: FeatureProvider::Synthetic(source),
        })
    }

    pub fn num_labels(&self) -> usize {
        self.vocab.len()
    }

    pub fn split(&self, cfg: &TrainConfig) -> Result<Split<LabeledSample>> {
        split_dataset(&self.samples, cfg.split, cfg.seed)
    }

    pub fn features(&self, samples: &[LabeledSample]) -> Result<Array2<f64>> {
        let ids: Vec<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
        self.provider.raw_batch(&ids)
    }

    pub fn truths(&self, samples: &[LabeledSample]) -> Array2<u8> {
        label_matrix(samples, self.num_labels())
    }
}

pub fn synthetic_label_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("finding{j}")).collect()
}

/// Co-occurrence graph from the training split, plus validation when
/// `graph_include_val` is set.
pub fn build_graph(cfg: &TrainConfig, split: &Split<LabeledSample>, num_labels: usize) -> Result<CorrelationGraph> {
    let mut samples = split.train.clone();
    if cfg.graph_include_val {
        samples.extend(split.val.iter().cloned());
    }
    CorrelationGraph::from_samples(&samples, num_labels, cfg.epsilon, cfg.delta, cfg.reweight_axis)
}

/// Word-vector label embeddings when `embeddings_path` is set, seeded
/// synthetic ones otherwise.
pub fn label_embeddings(cfg: &TrainConfig, vocab: &LabelVocabulary) -> Result<Array2<f64>> {
    let w = match &cfg.embeddings_path {
        Some(path) => {
            let table = load_word_vectors(open(path)?)?;
            embed_labels(vocab, &table, cfg.embedding_fallback.then_some(cfg.embedding_seed))?
        }
        None => synthetic_embeddings(vocab, cfg.embedding_dim(), cfg.embedding_seed)?,
    };
    if w.ncols() != cfg.embedding_dim() {
        return Err(Error::Shape(format!(
            "label embeddings are {}-dimensional but gcn_dims starts at {}",
            w.ncols(),
            cfg.embedding_dim()
        )));
    }
    Ok(w)
}

/// Toy MLP from `raw_dim` to `d1` when the provider asks for one; otherwise
/// the raw features must already be `d1` wide.
pub fn init_backbone(cfg: &TrainConfig, raw_dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Option<ToyMlp>> {
    if cfg.provider == ProviderKind::ToyMlp {
        return Ok(Some(ToyMlp::new(raw_dim, cfg.toy_mlp_hidden, cfg.d1, cfg.leaky_slope, rng)?));
    }
    if raw_dim != cfg.d1 {
        return Err(Error::Shape(format!(
            "features are {raw_dim}-dimensional but d1 is {}; set d1 or use the toy_mlp provider",
            cfg.d1
        )));
    }
    Ok(None)
}

pub fn init_model(
    cfg: &TrainConfig,
    graph: &CorrelationGraph,
    embeddings: Array2<f64>,
    raw_dim: usize,
) -> Result<BridgeModel> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, "init");
    let gcn = GcnStack::new(&cfg.gcn_dims, cfg.leaky_slope, cfg.gcn_final_linear, &mut rng)?;
    let fusion = FusionParameters::new(
        cfg.d1,
        cfg.label_dim(),
        cfg.d3,
        cfg.groups,
        cfg.group_size,
        &mut rng,
    )?;
    let backbone = init_backbone(cfg, raw_dim, &mut rng)?;
    BridgeModel::new(
        embeddings,
        graph.ea_norm.clone(),
        gcn,
        fusion,
        backbone,
        cfg.finetune_embeddings,
    )
}

pub fn init_baseline(cfg: &TrainConfig, num_labels: usize, raw_dim: usize) -> Result<LinearBaseline> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, "baseline-init");
    let backbone = init_backbone(cfg, raw_dim, &mut rng)?;
    Ok(LinearBaseline::new(cfg.d1, num_labels, backbone, &mut rng))
}

/// Feature and label matrices for each split.
#[derive(Debug)]
pub struct Prepared {
    pub split: Split<LabeledSample>,
    pub train: (Array2<f64>, Array2<u8>),
    pub val: (Array2<f64>, Array2<u8>),
    pub test: (Array2<f64>, Array2<u8>),
}

pub fn prepare(cfg: &TrainConfig, data: &Dataset) -> Result<Prepared> {
    let split = data.split(cfg)?;
    let part = |s: &[LabeledSample]| -> Result<(Array2<f64>, Array2<u8>)> { Ok((data.features(s)?, data.truths(s))) };
    Ok(Prepared {
        train: part(&split.train)?,
        val: part(&split.val)?,
        test: part(&split.test)?,
        split,
    })
}

pub fn predict<M: Trainable>(model: &M, features: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(model.forward(features)?.0)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub test_logits: Array2<f64>,
    pub test_report: EvaluationReport,
    pub split: Split<LabeledSample>,
}

/// Builds the graph and model, trains, and evaluates the best-validation
/// parameters on the test split.
pub fn train_full(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg, data)?;
    let graph = build_graph(cfg, &prepared.split, data.num_labels())?;
    let embeddings = label_embeddings(cfg, &data.vocab)?;
    let model = init_model(cfg, &graph, embeddings, data.provider.raw_dim())?;
    let FitResult {
        best_model,
        best_optimizer,
        best_epoch,
        best_val_auc,
        log,
        ..
    } = fit(model, cfg, &prepared.train.0, &prepared.train.1, &prepared.val.0, &prepared.val.1)?;
    let test_logits = predict(&best_model, &prepared.test.0)?;
    let test_report = evaluate(&test_logits, &prepared.test.1, &data.vocab)?;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            epoch: best_epoch,
            best_val_auc,
            config: cfg.clone(),
            vocab: data.vocab.clone(),
            graph,
            model: best_model,
            optimizer: best_optimizer,
        },
        log,
        test_logits,
        test_report,
        split: prepared.split,
    })
}

#[derive(Debug)]
pub struct BaselineOutcome {
    pub model: LinearBaseline,
    pub log: Vec<EpochLog>,
    pub test_report: EvaluationReport,
}

/// Independent per-label logistic heads on the same features, split and
/// optimizer budget as [`train_full`].
pub fn train_baseline(cfg: &TrainConfig, data: &Dataset) -> Result<BaselineOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg, data)?;
    let model = init_baseline(cfg, data.num_labels(), data.provider.raw_dim())?;
    let fitted = fit(model, cfg, &prepared.train.0, &prepared.train.1, &prepared.val.0, &prepared.val.1)?;
    let test_logits = predict(&fitted.best_model, &prepared.test.0)?;
    let test_report = evaluate(&test_logits, &prepared.test.1, &data.vocab)?;
    Ok(BaselineOutcome {
        model: fitted.best_model,
        log: fitted.log,
        test_report,
    })
}

/// Scores a checkpoint on `samples`, refusing label sets that differ from the
/// one it was trained on.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    data: &Dataset,
    samples: &[LabeledSample],
) -> Result<(Array2<f64>, EvaluationReport)> {
    checkpoint.ensure_vocab(&data.vocab)?;
    let features = data.features(samples)?;
    if features.ncols() != checkpoint.model.raw_dim() {
        return Err(Error::Shape(format!(
            "checkpoint expects {}-dimensional features, data has {}",
            checkpoint.model.raw_dim(),
            features.ncols()
        )));
    }
    let logits = predict(&checkpoint.model, &features)?;
    let report = evaluate(&logits, &data.truths(samples), &data.vocab)?;
    Ok((logits, report))
}
