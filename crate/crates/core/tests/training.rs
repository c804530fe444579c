use std::io::Write;

use labelbridge::backbone::{DependencyEdge, ProviderKind, SyntheticSpec};
use labelbridge::pipeline::{evaluate_checkpoint, resolve_vocabulary, train_full, Dataset};
use labelbridge::training::{metrics_log_csv, Checkpoint, Trainable};
use labelbridge::{Error, ErrorKind, LabelVocabulary, TrainConfig};

fn spec(n: usize, noise: f64) -> SyntheticSpec {
    SyntheticSpec {
        num_labels: 4,
        feature_dim: 10,
        n_samples: n,
        dependency_edges: vec![DependencyEdge { from: 0, to: 1, strength: 0.8 }],
        base_rates: vec![0.4, 0.1, 0.3, 0.2],
        noise_sigma: noise,
        seed: 3,
    }
}

fn small_config() -> TrainConfig {
    TrainConfig {
        d1: 10,
        gcn_dims: vec![6, 8, 5],
        d3: 6,
        groups: 3,
        group_size: 2,
        epochs: 3,
        batch_size: 8,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn one_epoch_on_eight_samples_is_finite() {
    let data = Dataset::synthetic(&spec(8, 0.3)).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        split: [0.5, 0.25, 0.25],
        ..small_config()
    };
    let out = train_full(&cfg, &data).unwrap();
    assert_eq!(out.log.len(), 1);
    assert!(out.log[0].train_loss.is_finite());
}

#[test]
fn same_seed_gives_identical_parameters() {
    let data = Dataset::synthetic(&spec(60, 0.3)).unwrap();
    let a = train_full(&small_config(), &data).unwrap();
    let b = train_full(&small_config(), &data).unwrap();
    assert_eq!(a.checkpoint.model, b.checkpoint.model);
    assert_eq!(a.log, b.log);
    let other = train_full(&TrainConfig { seed: 12, ..small_config() }, &data).unwrap();
    assert_ne!(a.checkpoint.model, other.checkpoint.model);
}

#[test]
fn training_loss_decreases_on_learnable_data() {
    let data = Dataset::synthetic(&spec(300, 0.1)).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        lr_main: 0.05,
        lr_lce: 0.05,
        ..small_config()
    };
    let log = train_full(&cfg, &data).unwrap().log;
    for w in log.windows(2) {
        assert!(w[1].train_loss < w[0].train_loss, "{log:?}");
    }
}

#[test]
fn exploding_learning_rate_aborts_with_diagnostic() {
    let data = Dataset::synthetic(&spec(60, 0.3)).unwrap();
    let cfg = TrainConfig {
        lr_main: 1e150,
        lr_lce: 1e150,
        ..small_config()
    };
    match train_full(&cfg, &data) {
        Err(e @ Error::NonFinite { lr_main, .. }) => {
            assert_eq!(lr_main, 1e150);
            assert_eq!(e.kind(), ErrorKind::Numerical);
            assert!(e.to_string().contains("batch"), "{e}");
        }
        other => panic!("expected a non-finite abort, got {:?}", other.map(|o| o.log)),
    }
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let data = Dataset::synthetic(&spec(60, 0.3)).unwrap();
    let cfg = TrainConfig {
        provider: ProviderKind::ToyMlp,
        toy_mlp_hidden: 7,
        d1: 9,
        ..small_config()
    };
    let out = train_full(&cfg, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    out.checkpoint.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, out.checkpoint);
    let x = data.features(&out.split.test).unwrap();
    let before = out.checkpoint.model.forward(&x).unwrap().0;
    let after = back.model.forward(&x).unwrap().0;
    assert!(before.iter().zip(after.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back.to_bytes().unwrap(), std::fs::read(&path).unwrap());
}

#[test]
fn truncated_or_foreign_checkpoints_are_rejected() {
    let data = Dataset::synthetic(&spec(40, 0.3)).unwrap();
    let bytes = train_full(&small_config(), &data).unwrap().checkpoint.to_bytes().unwrap();
    for cut in [0, 10, 30, bytes.len() / 2, bytes.len() - 1] {
        let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "cut {cut}: {err}");
    }
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    assert!(Checkpoint::from_bytes(&wrong_version).unwrap_err().to_string().contains("version"));
    assert!(Checkpoint::from_bytes(b"not a checkpoint at all").is_err());
}

#[test]
fn checkpoint_from_different_label_count_names_mismatch() {
    let data = Dataset::synthetic(&spec(40, 0.3)).unwrap();
    let ckpt = train_full(&small_config(), &data).unwrap().checkpoint;
    let five = LabelVocabulary::new(&["a", "b", "c", "d", "e"]).unwrap();
    let err = ckpt.ensure_vocab(&five).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Compat);
    assert!(err.to_string().contains("C=4") && err.to_string().contains("C=5"), "{err}");

    let mut renamed = data.clone();
    renamed.vocab = LabelVocabulary::new(&["finding0", "finding1", "other", "finding3"]).unwrap();
    let err = evaluate_checkpoint(&ckpt, &renamed, &renamed.samples).unwrap_err();
    assert!(err.to_string().contains("other"), "{err}");
}

#[test]
fn metrics_log_layout() {
    let data = Dataset::synthetic(&spec(40, 0.3)).unwrap();
    let out = train_full(&small_config(), &data).unwrap();
    let csv = metrics_log_csv(&out.log);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_mean_auc"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn pipe_vocabulary_skips_no_finding_and_honours_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "sample_id,labels\nx1,Mass|Edema\nx2,No Finding\nx3,edema").unwrap();
    let mut cfg = TrainConfig {
        labels_path: Some(path),
        ..TrainConfig::default()
    };
    assert_eq!(resolve_vocabulary(&cfg).unwrap().labels(), ["Mass", "Edema"]);

    cfg.vocab = Some(vec!["Mass".into(), "Edema".into(), "No Finding".into()]);
    let vocab = resolve_vocabulary(&cfg).unwrap();
    assert_eq!(vocab.len(), 3);
    let rows = Dataset::load_labels(&cfg, &vocab).unwrap();
    assert_eq!(rows[1].labels, vec![0, 0, 1]);

    cfg.include_no_finding = false;
    let vocab = resolve_vocabulary(&cfg).unwrap();
    assert_eq!(vocab.labels(), ["Mass", "Edema"]);
    let rows = Dataset::load_labels(&cfg, &vocab).unwrap();
    assert_eq!(rows[1].labels, vec![0, 0]);
}

#[test]
fn features_must_cover_every_labelled_sample() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.csv");
    let features = dir.path().join("features.txt");
    std::fs::write(&labels, "sample_id,labels\na,x\nb,y\n").unwrap();
    std::fs::write(&features, "#dim=2\na 0.1 0.2\n").unwrap();
    let cfg = TrainConfig {
        labels_path: Some(labels),
        features_path: Some(features),
        ..TrainConfig::default()
    };
    let err = Dataset::load(&cfg).unwrap_err();
    assert!(err.to_string().contains("`b`"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Input);
}

#[test]
fn feature_width_must_match_d1_without_backbone() {
    let data = Dataset::synthetic(&spec(40, 0.3)).unwrap();
    let err = train_full(&TrainConfig { d1: 7, ..small_config() }, &data).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Compat);
}
