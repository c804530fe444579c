use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use labelbridge::backbone::{generate_synthetic_dataset, DependencyEdge, SyntheticSpec};
use labelbridge::experiment::{parse_values, run_sweep, sweep_csv, SweepAxis};
use labelbridge::graph::CorrelationGraph;
use labelbridge::ingest::{split_dataset, write_features, write_pipe_labels, LabelVocabulary, LabeledSample};
use labelbridge::metrics::{top_k_table, EvaluationReport};
use labelbridge::pipeline::{
    evaluate_checkpoint, resolve_vocabulary, synthetic_label_names, train_full, Dataset,
};
use labelbridge::training::metrics_log_csv;
use labelbridge::{
    Checkpoint, ErrorKind, LabelFormat, ProviderKind, ReweightAxis, TrainConfig, UncertainPolicy,
};

#[derive(Parser)]
#[command(name = "labelbridge", version, about = "Label-graph multi-label classification toolkit")]
struct Cli {
    /// Base JSON config; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-dependency dataset (pipe labels + feature file)
    Synth(SynthArgs),
    /// Build the label correlation graph and write it as JSON
    BuildGraph(BuildGraphArgs),
    /// Train a model, keeping the best-validation checkpoint
    Train(TrainArgs),
    /// Score a checkpoint on a split of a dataset
    Eval(EvalArgs),
    /// Train one model per value of a hyperparameter
    Sweep(SweepArgs),
    /// Metrics, ROC curves, co-occurrence matrix and top-k table for a checkpoint
    Report(ReportArgs),
}

#[derive(Args, Default)]
struct DataArgs {
    /// Label file
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,
    /// Feature file (`#dim=` header, `id v1 .. vD` rows)
    #[arg(long, value_name = "PATH")]
    features: Option<PathBuf>,
    /// Word-vector text file; synthetic label embeddings when absent
    #[arg(long, value_name = "PATH")]
    embeddings: Option<PathBuf>,
    /// Comma-separated label vocabulary, in order [default: inferred from the label file]
    #[arg(long, value_delimiter = ',')]
    vocab: Option<Vec<String>>,
    /// Label file layout [default: pipe]
    #[arg(long)]
    label_format: Option<LabelFormat>,
    /// The pipe label file has no header row
    #[arg(long)]
    no_labels_header: bool,
    /// Mapping of uncertain (-1) columnar cells: as_positive or as_negative [default: as_positive]
    #[arg(long)]
    uncertain_policy: Option<UncertainPolicy>,
    /// Sentinel for samples without findings [default: "No Finding"]
    #[arg(long)]
    no_finding: Option<String>,
    /// Drop the no-finding label from the vocabulary
    #[arg(long)]
    exclude_no_finding: bool,
    /// Give words missing from the embedding file a seeded synthetic vector
    #[arg(long)]
    embedding_fallback: bool,
    /// Seed of synthetic label embeddings [default: 0]
    #[arg(long)]
    embedding_seed: Option<u64>,
}

#[derive(Args, Default)]
struct GraphArgs {
    /// Binarization threshold on P(Li|Lj) [default: 0.3]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Neighbour mass when reweighting, in [0, 1) [default: 0.2]
    #[arg(long)]
    delta: Option<f64>,
    /// Axis whose off-diagonal entries share delta: row or col [default: row]
    #[arg(long)]
    reweight_axis: Option<ReweightAxis>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Number of groups G in the group sum [default: 64]
    #[arg(long)]
    groups: Option<usize>,
    /// Elements per group g [default: 6]
    #[arg(long)]
    group_size: Option<usize>,
    /// Bridge width D3 [default: 384]
    #[arg(long)]
    d3: Option<usize>,
    /// Feature width D1 entering the bridge [default: 768]
    #[arg(long)]
    d1: Option<usize>,
    /// Comma-separated GCN widths, embedding width first [default: 300,1024,768]
    #[arg(long, value_delimiter = ',')]
    gcn_dims: Option<Vec<usize>>,
    /// Skip the activation on the last GCN layer
    #[arg(long)]
    gcn_final_linear: bool,
    /// LeakyReLU negative slope [default: 0.2]
    #[arg(long)]
    leaky_slope: Option<f64>,
    /// Feature provider: precomputed, synthetic or toy_mlp [default: precomputed]
    #[arg(long)]
    provider: Option<ProviderKind>,
    /// Hidden width of the toy MLP [default: 256]
    #[arg(long)]
    toy_mlp_hidden: Option<usize>,
}

#[derive(Args, Default)]
struct OptimArgs {
    /// [default: 30]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Seed for splitting, initialization and batching [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Learning rate of the label-embedding GCN [default: 0.01]
    #[arg(long)]
    lr_lce: Option<f64>,
    /// Learning rate of the fusion head and toy MLP [default: 0.001]
    #[arg(long)]
    lr_main: Option<f64>,
    /// [default: 0.9]
    #[arg(long)]
    momentum: Option<f64>,
    /// [default: 5e-5]
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Epochs between learning-rate decays [default: 10]
    #[arg(long)]
    decay_every: Option<usize>,
    /// Learning-rate multiplier at each decay [default: 0.1]
    #[arg(long)]
    decay_factor: Option<f64>,
    /// Train/val/test fractions, comma-separated [default: 0.7,0.1,0.2]
    #[arg(long, value_delimiter = ',', num_args = 1)]
    split: Option<Vec<f64>>,
    /// Count validation labels into the graph statistics
    #[arg(long)]
    graph_include_val: bool,
    /// Train the label word embeddings too
    #[arg(long)]
    finetune_embeddings: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Full spec as JSON; the flags below override it
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// [default: 8]
    #[arg(long)]
    num_labels: Option<usize>,
    /// [default: 768]
    #[arg(long)]
    feature_dim: Option<usize>,
    /// [default: 500]
    #[arg(long)]
    n_samples: Option<usize>,
    /// Edges `from>to:strength`, comma-separated [default: 0>1:0.8,1>2:0.8,0>3:0.8,4>5:0.8,5>6:0.8,4>7:0.8]
    #[arg(long, value_delimiter = ',')]
    edges: Option<Vec<String>>,
    /// One base rate per label, comma-separated [default: 0.2 on labels 0 and 4, 0 elsewhere]
    #[arg(long, value_delimiter = ',')]
    base_rates: Option<Vec<f64>>,
    /// [default: 1.0]
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BuildGraphArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Count only the training split (seeded by --seed, sized by --split)
    #[arg(long)]
    train_split: bool,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON file
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Train on an in-memory synthetic dataset from this spec instead of files
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Output directory for model.ckpt, metrics.csv and test_metrics.json
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

impl SplitChoice {
    fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
            Self::All => "all",
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Which partition of the data to score, re-derived from the checkpoint's seed and split
    #[arg(long, value_enum, default_value = "test")]
    split: SplitChoice,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Labels per sample in the top-k table
    #[arg(long, default_value_t = 3)]
    top_k: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// epsilon, delta, groupsum or gcn_depth
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated values; groupsum takes `GxG` pairs such as 8x48
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Sweep on an in-memory synthetic dataset from this spec instead of files
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Output CSV
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

macro_rules! set {
    ($cfg:expr, $($field:ident <- $value:expr),+ $(,)?) => {
        $(if let Some(v) = $value.clone() { $cfg.$field = v; })+
    };
}

impl DataArgs {
    fn apply(&self, cfg: &mut TrainConfig) {
        set!(cfg,
            label_format <- self.label_format,
            uncertain_policy <- self.uncertain_policy,
            no_finding <- self.no_finding,
            embedding_seed <- self.embedding_seed,
        );
        if self.labels.is_some() {
            cfg.labels_path = self.labels.clone();
        }
        if self.features.is_some() {
            cfg.features_path = self.features.clone();
        }
        if self.embeddings.is_some() {
            cfg.embeddings_path = self.embeddings.clone();
        }
        if self.vocab.is_some() {
            cfg.vocab = self.vocab.clone();
        }
        if self.no_labels_header {
            cfg.labels_header = false;
        }
        if self.exclude_no_finding {
            cfg.include_no_finding = false;
        }
        if self.embedding_fallback {
            cfg.embedding_fallback = true;
        }
    }
}

impl GraphArgs {
    fn apply(&self, cfg: &mut TrainConfig) {
        set!(cfg, epsilon <- self.epsilon, delta <- self.delta, reweight_axis <- self.reweight_axis);
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut TrainConfig) {
        set!(cfg,
            groups <- self.groups,
            group_size <- self.group_size,
            d3 <- self.d3,
            d1 <- self.d1,
            gcn_dims <- self.gcn_dims,
            leaky_slope <- self.leaky_slope,
            provider <- self.provider,
            toy_mlp_hidden <- self.toy_mlp_hidden,
        );
        if self.gcn_final_linear {
            cfg.gcn_final_linear = true;
        }
    }
}

impl OptimArgs {
    fn apply(&self, cfg: &mut TrainConfig) -> Result<()> {
        set!(cfg,
            epochs <- self.epochs,
            batch_size <- self.batch_size,
            seed <- self.seed,
            lr_lce <- self.lr_lce,
            lr_main <- self.lr_main,
            momentum <- self.momentum,
            weight_decay <- self.weight_decay,
            decay_every <- self.decay_every,
            decay_factor <- self.decay_factor,
        );
        if let Some(s) = &self.split {
            cfg.split = <[f64; 3]>::try_from(s.as_slice())
                .map_err(|_| labelbridge::Error::InvalidConfig(format!("--split needs 3 fractions, got {}", s.len())))?;
        }
        if self.graph_include_val {
            cfg.graph_include_val = true;
        }
        if self.finetune_embeddings {
            cfg.finetune_embeddings = true;
        }
        Ok(())
    }
}

fn base_config(path: Option<&Path>) -> Result<TrainConfig> {
    Ok(match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

/// Effective configuration beside every output.
fn echo(path: &Path, command: &str, cfg: &TrainConfig, extra: Value) -> Result<()> {
    write_json(
        path,
        &json!({ "command": command, "config": cfg, "arguments": extra }),
    )
}

fn echo_beside(file: &Path, command: &str, cfg: &TrainConfig, extra: Value) -> Result<()> {
    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    echo(&file.with_file_name(format!("{stem}.config_echo.json")), command, cfg, extra)
}

fn parse_edge(raw: &str) -> Result<DependencyEdge> {
    let bad = || labelbridge::Error::InvalidConfig(format!("edge `{raw}` is not `from>to:strength`"));
    let (pair, strength) = raw.trim().split_once(':').ok_or_else(bad)?;
    let (from, to) = pair.split_once('>').ok_or_else(bad)?;
    Ok(DependencyEdge {
        from: from.trim().parse().map_err(|_| bad())?,
        to: to.trim().parse().map_err(|_| bad())?,
        strength: strength.trim().parse().map_err(|_| bad())?,
    })
}

fn load_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| labelbridge::Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let spec: SyntheticSpec = serde_json::from_str(&text).map_err(labelbridge::Error::from)?;
    spec.validate()?;
    Ok(spec)
}

fn default_spec() -> SyntheticSpec {
    SyntheticSpec {
        num_labels: 8,
        feature_dim: 768,
        n_samples: 500,
        dependency_edges: [(0, 1), (1, 2), (0, 3), (4, 5), (5, 6), (4, 7)]
            .iter()
            .map(|&(from, to)| DependencyEdge { from, to, strength: 0.8 })
            .collect(),
        base_rates: vec![0.2, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0],
        noise_sigma: 1.0,
        seed: 0,
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => load_spec(p)?,
        None => default_spec(),
    };
    if let Some(c) = args.num_labels {
        if c != spec.num_labels {
            spec.num_labels = c;
            spec.dependency_edges.retain(|e| e.from < c && e.to < c);
            spec.base_rates.resize(c, 0.1);
        }
    }
    set!(spec,
        feature_dim <- args.feature_dim,
        n_samples <- args.n_samples,
        base_rates <- args.base_rates,
        noise_sigma <- args.noise_sigma,
        seed <- args.seed,
    );
    if let Some(edges) = &args.edges {
        spec.dependency_edges = edges.iter().map(|e| parse_edge(e)).collect::<Result<_>>()?;
    }
    let (samples, records, _) = generate_synthetic_dataset(&spec)?;
    let names = synthetic_label_names(spec.num_labels);
    let vocab = LabelVocabulary::new(&names)?;

    let mut labels = Vec::new();
    write_pipe_labels(&mut labels, &samples, &vocab)?;
    write(&args.out_dir.join("labels.csv"), labels)?;
    let mut features = Vec::new();
    write_features(&mut features, &records)?;
    write(&args.out_dir.join("features.txt"), features)?;
    write_json(&args.out_dir.join("spec.json"), &serde_json::to_value(&spec)?)?;

    let cfg = TrainConfig {
        labels_path: Some(args.out_dir.join("labels.csv")),
        features_path: Some(args.out_dir.join("features.txt")),
        vocab: Some(names),
        d1: spec.feature_dim,
        seed: spec.seed,
        ..TrainConfig::default()
    };
    echo(&args.out_dir.join("config_echo.json"), "synth", &cfg, json!({ "spec": spec }))?;
    println!(
        "wrote {} samples, {} labels, {}-dimensional features to {}",
        spec.n_samples,
        spec.num_labels,
        spec.feature_dim,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_build_graph(args: &BuildGraphArgs, mut cfg: TrainConfig) -> Result<()> {
    args.data.apply(&mut cfg);
    args.graph.apply(&mut cfg);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let vocab = resolve_vocabulary(&cfg)?;
    let samples = Dataset::load_labels(&cfg, &vocab)?;
    let counted: Vec<LabeledSample> = if args.train_split {
        let split = split_dataset(&samples, cfg.split, cfg.seed)?;
        let mut s = split.train;
        if cfg.graph_include_val {
            s.extend(split.val);
        }
        s
    } else {
        samples
    };
    let graph = CorrelationGraph::from_samples(&counted, vocab.len(), cfg.epsilon, cfg.delta, cfg.reweight_axis)?;
    write_json(&args.out, &graph.to_json(&vocab))?;
    echo_beside(
        &args.out,
        "build-graph",
        &cfg,
        json!({ "train_split": args.train_split, "samples_counted": counted.len() }),
    )?;
    println!(
        "graph over {} labels from {} samples: {} edges",
        vocab.len(),
        counted.len(),
        graph.edge_count()
    );
    Ok(())
}

fn dataset_for(cfg: &TrainConfig, spec: Option<&Path>) -> Result<Dataset> {
    Ok(match spec {
        Some(p) => Dataset::synthetic(&load_spec(p)?)?,
        None => Dataset::load(cfg)?,
    })
}

fn metrics_value(report: &EvaluationReport, split: &str, n: usize) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    if let Value::Object(map) = &mut v {
        map.insert("split".into(), json!(split));
        map.insert("n_samples".into(), json!(n));
    }
    Ok(v)
}

fn cmd_train(args: &TrainArgs, mut cfg: TrainConfig) -> Result<()> {
    args.data.apply(&mut cfg);
    args.graph.apply(&mut cfg);
    args.model.apply(&mut cfg);
    args.optim.apply(&mut cfg)?;
    cfg.validate()?;
    let data = dataset_for(&cfg, args.spec.as_deref())?;
    let out = train_full(&cfg, &data)?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    out.checkpoint.save(&dir.join("model.ckpt"))?;
    write(&dir.join("metrics.csv"), metrics_log_csv(&out.log))?;
    write_json(
        &dir.join("test_metrics.json"),
        &metrics_value(&out.test_report, "test", out.split.test.len())?,
    )?;
    echo(
        &dir.join("config_echo.json"),
        "train",
        &cfg,
        json!({ "spec": args.spec, "best_epoch": out.checkpoint.epoch }),
    )?;
    println!(
        "best epoch {} (val mean AUC {}), test mean AUC {}",
        out.checkpoint.epoch,
        fmt_auc(out.checkpoint.best_val_auc),
        fmt_auc(out.test_report.mean_auc)
    );
    Ok(())
}

fn fmt_auc(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |a| format!("{a:.4}"))
}

struct Scored {
    cfg: TrainConfig,
    checkpoint: Checkpoint,
    data: Dataset,
    samples: Vec<LabeledSample>,
    logits: ndarray::Array2<f64>,
    report: EvaluationReport,
}

/// Checkpoint config, replaced by `--config` when given, then flags.
fn score(args: &EvalArgs, config: Option<&Path>) -> Result<Scored> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let mut cfg = match config {
        Some(p) => TrainConfig::load(p)?,
        None => checkpoint.config.clone(),
    };
    args.data.apply(&mut cfg);
    cfg.validate()?;
    let data = Dataset::load_for_checkpoint(&cfg, &checkpoint)?;
    let samples = match args.split {
        SplitChoice::All => data.samples.clone(),
        choice => {
            let split = split_dataset(&data.samples, checkpoint.config.split, checkpoint.config.seed)?;
            match choice {
                SplitChoice::Train => split.train,
                SplitChoice::Val => split.val,
                _ => split.test,
            }
        }
    };
    if samples.is_empty() {
        bail!(labelbridge::Error::InvalidInput(format!("the {} split is empty", args.split.name())));
    }
    let (logits, report) = evaluate_checkpoint(&checkpoint, &data, &samples)?;
    Ok(Scored {
        cfg,
        checkpoint,
        data,
        samples,
        logits,
        report,
    })
}

fn cmd_eval(args: &EvalArgs, config: Option<&Path>) -> Result<()> {
    let s = score(args, config)?;
    write_json(
        &args.out_dir.join("metrics.json"),
        &metrics_value(&s.report, args.split.name(), s.samples.len())?,
    )?;
    echo(
        &args.out_dir.join("config_echo.json"),
        "eval",
        &s.cfg,
        json!({ "checkpoint": args.checkpoint, "split": args.split.name() }),
    )?;
    println!(
        "{} samples ({} split): mean AUC {}, OP {:.4} OR {:.4} OF1 {:.4}",
        s.samples.len(),
        args.split.name(),
        fmt_auc(s.report.mean_auc),
        s.report.overall.op,
        s.report.overall.or,
        s.report.overall.of1
    );
    Ok(())
}

fn file_label(index: usize, label: &str) -> String {
    let clean: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{index:02}_{clean}")
}

fn matrix_csv<T: std::fmt::Display>(labels: &[String], m: &ndarray::Array2<T>) -> String {
    let mut out = format!("label,{}\n", labels.join(","));
    for (i, row) in m.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        out.push_str(&format!("{},{}\n", labels[i], cells.join(",")));
    }
    out
}

fn cmd_report(args: &ReportArgs, config: Option<&Path>) -> Result<()> {
    let s = score(&args.eval, config)?;
    let dir = &args.eval.out_dir;
    let labels = s.data.vocab.labels();
    write_json(
        &dir.join("metrics.json"),
        &metrics_value(&s.report, args.eval.split.name(), s.samples.len())?,
    )?;
    for (j, points) in s.report.roc.iter().enumerate() {
        let Some(points) = points else { continue };
        let mut csv = String::from("threshold,fpr,tpr\n");
        for p in points {
            csv.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        write(&dir.join("roc").join(format!("{}.csv", file_label(j, &labels[j]))), csv)?;
    }
    let graph = &s.checkpoint.graph;
    write(&dir.join("cooccurrence.csv"), matrix_csv(labels, &graph.stats.pair_counts))?;
    write(&dir.join("conditional.csv"), matrix_csv(labels, &graph.p))?;
    let mut topk = String::from("sample_id,rank,label,probability\n");
    for (sample, row) in s.samples.iter().zip(top_k_table(&s.logits, &s.data.vocab, args.top_k)) {
        for (rank, (label, prob)) in row.iter().enumerate() {
            topk.push_str(&format!("{},{},{},{}\n", sample.sample_id, rank + 1, label, prob));
        }
    }
    write(&dir.join("topk.csv"), topk)?;
    echo(
        &dir.join("config_echo.json"),
        "report",
        &s.cfg,
        json!({ "checkpoint": args.eval.checkpoint, "split": args.eval.split.name(), "top_k": args.top_k }),
    )?;
    println!("report for {} samples written to {}", s.samples.len(), dir.display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, mut cfg: TrainConfig) -> Result<()> {
    args.data.apply(&mut cfg);
    args.graph.apply(&mut cfg);
    args.model.apply(&mut cfg);
    args.optim.apply(&mut cfg)?;
    cfg.validate()?;
    let values = parse_values(args.axis, &args.values)?;
    let data = dataset_for(&cfg, args.spec.as_deref())?;
    let rows = run_sweep(&cfg, &data, args.axis, &values)?;
    write(&args.out, sweep_csv(&rows))?;
    let values: Vec<String> = values.iter().map(ToString::to_string).collect();
    echo_beside(
        &args.out,
        "sweep",
        &cfg,
        json!({ "axis": args.axis, "values": values, "spec": args.spec }),
    )?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::BuildGraph(a) => cmd_build_graph(a, base_config(config)?),
        Command::Train(a) => cmd_train(a, base_config(config)?),
        Command::Eval(a) => cmd_eval(a, config),
        Command::Sweep(a) => cmd_sweep(a, base_config(config)?),
        Command::Report(a) => cmd_report(a, config),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<labelbridge::Error>()) {
        Some(e) => match e.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Compat => 3,
            ErrorKind::Numerical => 4,
        },
        None => 2,
    }
}

/// The error chain, minus causes the previous message already quotes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain().map(ToString::to_string) {
        if !out.ends_with(&cause) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&cause);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
