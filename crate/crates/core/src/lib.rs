//! Multi-label classification with label co-occurrence graphs, GCN label
//! embeddings and grouped low-rank bilinear fusion of image and label
//! representations.

pub mod backbone;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod fusion;
pub mod gcn;
pub mod graph;
pub mod ingest;
pub mod experiment;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod training;

pub use backbone::{FeatureProvider, ProviderKind, SyntheticSpec, ToyMlp};
pub use config::{LabelFormat, TrainConfig};
pub use error::{Error, ErrorKind, Result};
pub use fusion::FusionParameters;
pub use gcn::GcnStack;
pub use graph::{CooccurrenceStats, CorrelationGraph, ReweightAxis};
pub use ingest::{FeatureRecord, FeatureStore, LabelVocabulary, LabeledSample, Split, UncertainPolicy};
pub use metrics::{EvaluationReport, OverallPrf, RocPoint};
pub use pipeline::Dataset;
pub use training::{BridgeModel, Checkpoint, EpochLog, LinearBaseline, Trainable};
