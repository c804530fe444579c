//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p labelbridge --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use labelbridge::backbone::{DependencyEdge, SyntheticSpec, ToyMlp};
use labelbridge::experiment::{parse_values, run_sweep, SweepAxis, SweepStatus, SweepValue};
use labelbridge::fusion::FusionParameters;
use labelbridge::gcn::GcnStack;
use labelbridge::graph::{binarize, conditional_matrix, count_cooccurrence, normalize, reweight, ReweightAxis};
use labelbridge::ingest::{write_features, write_pipe_labels, LabeledSample};
use labelbridge::metrics::{auc_score, overall_prf, roc_points, trapezoid_area};
use labelbridge::pipeline::{train_baseline, train_full, Dataset};
use labelbridge::rng::stream;
use labelbridge::training::{batch_loss, metrics_log_csv, multilabel_loss, BridgeModel, Trainable};
use labelbridge::TrainConfig;
use ndarray::{arr2, Array1, Array2};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    check(t < limit, || format!("{what} took {t:.1?}, limit {limit:?}"))
}

fn random_samples(rng: &mut impl Rng, n: usize, c: usize) -> Vec<LabeledSample> {
    let density: f64 = rng.random_range(0.05..0.6);
    (0..n)
        .map(|i| LabeledSample {
            sample_id: format!("r{i}"),
            labels: (0..c).map(|_| u8::from(rng.random::<f64>() < density)).collect(),
        })
        .collect()
}

/// Brute-force counts, conditional probabilities, adjacency and reweighting
/// written from the definitions with plain loops.
struct Oracle {
    t: Vec<u64>,
    pair: Vec<Vec<u64>>,
    p: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    ea: Vec<Vec<f64>>,
}

fn oracle(samples: &[LabeledSample], c: usize, eps: f64, delta: f64) -> Oracle {
    let mut t = vec![0u64; c];
    let mut pair = vec![vec![0u64; c]; c];
    for s in samples {
        for i in 0..c {
            if s.labels[i] == 1 {
                t[i] += 1;
                for j in 0..c {
                    if s.labels[j] == 1 {
                        pair[i][j] += 1;
                    }
                }
            }
        }
    }
    let mut p = vec![vec![0.0; c]; c];
    let mut a = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in 0..c {
            if t[j] > 0 {
                p[i][j] = pair[i][j] as f64 / t[j] as f64;
            }
            if p[i][j] > eps {
                a[i][j] = 1.0;
            }
        }
        if p[i][i] > 0.0 {
            a[i][i] = 1.0;
        }
    }
    let mut ea = vec![vec![0.0; c]; c];
    for i in 0..c {
        let mut off = 0.0;
        for j in 0..c {
            if j != i {
                off += a[i][j];
            }
        }
        for j in 0..c {
            if j == i {
                ea[i][j] = 1.0 - delta;
            } else if off > 0.0 {
                ea[i][j] = delta * a[i][j] / off;
            }
        }
    }
    Oracle { t, pair, p, a, ea }
}

fn max_diff(m: &Array2<f64>, o: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for ((i, j), v) in m.indexed_iter() {
        worst = worst.max((v - o[i][j]).abs());
    }
    worst
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(101, "acceptance/graph");
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(1..=100);
        let c = rng.random_range(1..=10);
        let eps = rng.random_range(0.0..1.0);
        let delta = rng.random_range(0.0..1.0);
        let samples = random_samples(&mut rng, n, c);
        let o = oracle(&samples, c, eps, delta);
        let stats = count_cooccurrence(&samples, c).map_err(|e| e.to_string())?;
        check(stats.single_counts == o.t, || format!("case {case}: single counts differ"))?;
        for i in 0..c {
            for j in 0..c {
                check(stats.pair_counts[[i, j]] == o.pair[i][j], || {
                    format!("case {case}: pair count ({i},{j}) differs")
                })?;
            }
        }
        let p = conditional_matrix(&stats);
        let a = binarize(&p, eps).map_err(|e| e.to_string())?;
        let ea = reweight(&a, delta, ReweightAxis::Row).map_err(|e| e.to_string())?;
        // the adjacency is 0/1 so it must match exactly
        check(max_diff(&a, &o.a) == 0.0, || format!("case {case}: adjacency differs"))?;
        worst = worst.max(max_diff(&p, &o.p)).max(max_diff(&ea, &o.ea));
        check(worst <= 1e-12, || format!("case {case}: real entries differ by {worst:e}"))?;
    }
    within(start, Duration::from_secs(5), "200 graph cases")?;
    Ok(format!("200 cases, max real deviation {worst:.1e}, {:.2?}", start.elapsed()))
}

fn criterion_2() -> Outcome {
    let mut rng = stream(102, "acceptance/reweight");
    let mut rows = 0usize;
    for step in 1..=9 {
        let delta = step as f64 / 10.0;
        for _ in 0..20 {
            let c = rng.random_range(2..=10);
            let n = rng.random_range(5..=100);
            let samples = random_samples(&mut rng, n, c);
            let stats = count_cooccurrence(&samples, c).map_err(|e| e.to_string())?;
            let a = binarize(&conditional_matrix(&stats), rng.random_range(0.0..0.8)).map_err(|e| e.to_string())?;
            let ea = reweight(&a, delta, ReweightAxis::Row).map_err(|e| e.to_string())?;
            for i in 0..c {
                let retained = (0..c).any(|j| j != i && a[[i, j]] == 1.0);
                if !retained {
                    continue;
                }
                rows += 1;
                let off: f64 = (0..c).filter(|&j| j != i).map(|j| ea[[i, j]]).sum();
                check((ea[[i, i]] - (1.0 - delta)).abs() <= 1e-9, || {
                    format!("delta {delta}: diagonal {} != {}", ea[[i, i]], 1.0 - delta)
                })?;
                check((off - delta).abs() <= 1e-9, || {
                    format!("delta {delta}: off-diagonal sum {off} != {delta}")
                })?;
            }
        }
    }
    check(rows > 0, || "no rows with retained edges were generated".into())?;
    Ok(format!("{rows} rows with retained edges across delta 0.1..0.9"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(103, "acceptance/bilinear");
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let d1 = rng.random_range(1..=6);
        let d2 = rng.random_range(1..=6);
        let d3 = rng.random_range(1..=8);
        let groups = rng.random_range(1..=4);
        let g = rng.random_range(1..=8 / groups);
        let fusion = FusionParameters::new(d1, d2, d3, groups, g, &mut rng).map_err(|e| e.to_string())?;
        let f = Array1::from_shape_fn(d1, |_| rng.random_range(-2.0..2.0));
        let l = Array1::from_shape_fn(d2, |_| rng.random_range(-2.0..2.0));
        let (o, _) = fusion.bridge_one(f.view(), l.view()).map_err(|e| e.to_string())?;

        let [fc1_w, fc1_b, fc2_w, fc2_b, u, v, fc3_w, fc3_b] = fusion.tensors();
        let m1 = f.dot(fc1_w) + fc1_b.row(0);
        let m2 = l.dot(fc2_w) + fc2_b.row(0);
        // O = sum_k w3_k * m1^T S_k m2 + b3, with S_k = sum over group k of u_t v_t^T
        let mut explicit = fc3_b[[0, 0]];
        for k in 0..groups {
            let mut s = Array2::<f64>::zeros((d3, d3));
            for t in k * g..(k + 1) * g {
                for a in 0..d3 {
                    for b in 0..d3 {
                        s[[a, b]] += u[[a, t]] * v[[b, t]];
                    }
                }
            }
            explicit += fc3_w[[k, 0]] * m1.dot(&s.dot(&m2));
        }
        let diff = (o - explicit).abs();
        worst = worst.max(diff);
        check(diff <= 1e-10, || format!("case {case}: bridge {o} vs explicit form {explicit}"))?;
    }
    within(start, Duration::from_secs(5), "100 bilinear cases")?;
    Ok(format!("100 cases, max deviation {worst:.1e}"))
}

fn tiny_model() -> Result<(BridgeModel, Array2<f64>, Array2<u8>), String> {
    let mut rng = stream(104, "acceptance/tiny");
    let gcn = GcnStack::new(&[5, 6, 4], 0.2, false, &mut rng).map_err(|e| e.to_string())?;
    let fusion = FusionParameters::new(8, 4, 4, 2, 2, &mut rng).map_err(|e| e.to_string())?;
    let mlp = ToyMlp::new(6, 7, 8, 0.2, &mut rng).map_err(|e| e.to_string())?;
    let samples = vec![
        LabeledSample { sample_id: "a".into(), labels: vec![1, 1, 0] },
        LabeledSample { sample_id: "b".into(), labels: vec![1, 0, 0] },
        LabeledSample { sample_id: "c".into(), labels: vec![0, 1, 1] },
        LabeledSample { sample_id: "d".into(), labels: vec![1, 1, 0] },
    ];
    let stats = count_cooccurrence(&samples, 3).map_err(|e| e.to_string())?;
    let a = binarize(&conditional_matrix(&stats), 0.3).map_err(|e| e.to_string())?;
    let ea_norm = normalize(&reweight(&a, 0.2, ReweightAxis::Row).map_err(|e| e.to_string())?);
    let w = Array2::from_shape_fn((3, 5), |_| rng.random_range(-1.0..1.0));
    let model = BridgeModel::new(w, ea_norm, gcn, fusion, Some(mlp), true).map_err(|e| e.to_string())?;
    let x = Array2::from_shape_fn((4, 6), |_| rng.random_range(-1.0..1.0));
    let y = arr2(&[[1u8, 1, 0], [1, 0, 0], [0, 1, 1], [1, 1, 0]]);
    Ok((model, x, y))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let (model, x, y) = tiny_model()?;
    let loss = |m: &BridgeModel| batch_loss(&m.forward(&x).unwrap().0, &y).0;
    let (logits, cache) = model.forward(&x).map_err(|e| e.to_string())?;
    let upstream = batch_loss(&logits, &y).1;
    let grads = model.backward(&cache, &upstream).map_err(|e| e.to_string())?;
    let specs = model.param_specs();
    let h = 1e-5;
    // central differences at this step resolve gradients down to about 1e-11,
    // so magnitudes below FLOOR are compared at the bound's value at FLOOR
    const FLOOR: f64 = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut floored = 0usize;
    for (p, (name, _)) in specs.iter().enumerate() {
        let shape = model.params()[p].dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let mut plus = model.clone();
                plus.params_mut()[p][[r, c]] += h;
                let mut minus = model.clone();
                minus.params_mut()[p][[r, c]] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let analytic = grads[p][[r, c]];
                let magnitude = analytic.abs().max(numeric.abs());
                if magnitude < FLOOR {
                    floored += 1;
                }
                let rel = (analytic - numeric).abs() / magnitude.max(FLOOR);
                worst = worst.max(rel);
                checked += 1;
                check(rel < 1e-4, || {
                    format!("{name}[{r},{c}]: analytic {analytic:e} vs numeric {numeric:e} (rel {rel:e})")
                })?;
            }
        }
    }
    within(start, Duration::from_secs(60), "gradient check")?;
    Ok(format!(
        "{checked} entries over {} tensors, max rel error {worst:.1e} ({floored} below {FLOOR:e} in magnitude)",
        specs.len()
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = stream(105, "acceptance/loss");
    for c in 1..=12 {
        for _ in 0..20 {
            let l: Vec<u8> = (0..c).map(|_| rng.random_range(0..=1)).collect();
            let (loss, _) = multilabel_loss(Array1::zeros(c).view(), &l);
            check((loss - std::f64::consts::LN_2).abs() <= 1e-12, || format!("loss(0, {l:?}) = {loss}"))?;
        }
    }
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..50 {
        let c = rng.random_range(1..=10);
        let o = Array1::from_shape_fn(c, |_| rng.random_range(-6.0..6.0));
        let l: Vec<u8> = (0..c).map(|_| rng.random_range(0..=1)).collect();
        let (_, grad) = multilabel_loss(o.view(), &l);
        for j in 0..c {
            let sigma = 1.0 / (1.0 + (-o[j]).exp());
            let identity = (sigma - f64::from(l[j])) / c as f64;
            check((grad[j] - identity).abs() <= 1e-15, || format!("gradient identity off at {j}"))?;
            let mut plus = o.clone();
            plus[j] += h;
            let mut minus = o.clone();
            minus[j] -= h;
            let fd = (multilabel_loss(plus.view(), &l).0 - multilabel_loss(minus.view(), &l).0) / (2.0 * h);
            worst = worst.max((fd - grad[j]).abs());
        }
    }
    check(worst < 1e-6, || format!("finite-difference gap {worst:e}"))?;
    Ok(format!("ln 2 at zero logits; max finite-difference gap {worst:.1e}"))
}

fn brute_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn criterion_6() -> Outcome {
    let mut rng = stream(106, "acceptance/metrics");
    let mut worst_pairs: f64 = 0.0;
    let mut worst_trap: f64 = 0.0;
    let mut defined = 0;
    for case in 0..500 {
        let n = rng.random_range(1..=50);
        // coarse scores so ties are common
        let levels = rng.random_range(2..=20);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        let got = auc_score(&scores, &labels);
        let want = brute_auc(&scores, &labels);
        match (got, want) {
            (None, None) => continue,
            (Some(g), Some(w)) => {
                defined += 1;
                worst_pairs = worst_pairs.max((g - w).abs());
                let area = trapezoid_area(&roc_points(&scores, &labels).map_err(|e| e.to_string())?);
                worst_trap = worst_trap.max((area - g).abs());
            }
            _ => return Err(format!("case {case}: definedness differs ({got:?} vs {want:?})")),
        }
    }
    check(worst_pairs <= 1e-12, || format!("pair counting differs by {worst_pairs:e}"))?;
    check(worst_trap <= 1e-10, || format!("trapezoid area differs by {worst_trap:e}"))?;

    // 2 samples x 3 labels: 2 correct, 3 predicted, 4 ground
    let pred = arr2(&[[1u8, 1, 0], [0, 1, 0]]);
    let truth = arr2(&[[1u8, 0, 1], [0, 1, 1]]);
    let prf = overall_prf(&pred, &truth).map_err(|e| e.to_string())?;
    check(
        (prf.n_correct, prf.n_predicted, prf.n_ground) == (2, 3, 4)
            && prf.op == 2.0 / 3.0
            && prf.or == 0.5
            && prf.of1 == 2.0 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5),
        || format!("hand-counted example gave {prf:?}"),
    )?;
    Ok(format!(
        "{defined}/500 defined instances, pair gap {worst_pairs:.1e}, trapezoid gap {worst_trap:.1e}; OP/OR/OF1 example exact"
    ))
}

/// Planted dataset shared by criteria 7 and 8: two roots with base rate 0.2,
/// children present only through the six edges.
fn planted_spec() -> SyntheticSpec {
    let edges = [(0, 1), (1, 2), (0, 3), (4, 5), (5, 6), (4, 7)];
    SyntheticSpec {
        num_labels: 8,
        feature_dim: 512,
        n_samples: 2000,
        dependency_edges: edges
            .iter()
            .map(|&(from, to)| DependencyEdge { from, to, strength: 0.8 })
            .collect(),
        base_rates: vec![0.2, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0],
        noise_sigma: 1.0,
        seed: 1,
    }
}

fn planted_config() -> TrainConfig {
    TrainConfig {
        d1: 512,
        gcn_dims: vec![16, 32, 16],
        d3: 16,
        groups: 4,
        group_size: 4,
        lr_main: 0.1,
        lr_lce: 0.5,
        seed: 1,
        ..TrainConfig::default()
    }
}

// Pinned from the reference run of this configuration.
const PINNED_BASELINE_AUC: f64 = 0.7384864706803397;
const PINNED_FULL_AUC: f64 = 0.7502026035760259;
const PIN_TOLERANCE: f64 = 1e-9;

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let data = Dataset::synthetic(&planted_spec()).map_err(|e| e.to_string())?;
    let cfg = planted_config();
    let baseline = train_baseline(&cfg, &data).map_err(|e| e.to_string())?;
    let full = train_full(&cfg, &data).map_err(|e| e.to_string())?;
    let b = baseline.test_report.mean_auc.ok_or("baseline mean AUC undefined")?;
    let f = full.test_report.mean_auc.ok_or("full model mean AUC undefined")?;
    let summary = format!("baseline {b:?}, full {f:?}, margin {:+.6}, {:.1?}", f - b, start.elapsed());
    check(b > 0.70 && b < 0.90, || format!("baseline outside (0.70, 0.90): {summary}"))?;
    check(f > b, || format!("full model not above baseline: {summary}"))?;
    check((b - PINNED_BASELINE_AUC).abs() <= PIN_TOLERANCE, || {
        format!("baseline {b:?} drifted from pinned {PINNED_BASELINE_AUC:?}")
    })?;
    check((f - PINNED_FULL_AUC).abs() <= PIN_TOLERANCE, || {
        format!("full model {f:?} drifted from pinned {PINNED_FULL_AUC:?}")
    })?;
    within(start, Duration::from_secs(600), "planted experiment")?;
    Ok(summary)
}

fn criterion_8() -> Outcome {
    let data = Dataset::synthetic(&planted_spec()).map_err(|e| e.to_string())?;
    let cfg = planted_config();
    let eps = parse_values(SweepAxis::Epsilon, &["0", "0.3"]).map_err(|e| e.to_string())?;
    let eps_rows = run_sweep(&cfg, &data, SweepAxis::Epsilon, &eps).map_err(|e| e.to_string())?;
    let zero = &eps_rows[0];
    check(
        zero.value == SweepValue::Real(0.0) && matches!(zero.status, SweepStatus::Degenerate | SweepStatus::Diverged),
        || format!("epsilon 0 row not flagged: {zero:?}"),
    )?;
    check(eps_rows[1].status == SweepStatus::Ok, || format!("epsilon 0.3 row: {:?}", eps_rows[1]))?;

    let depths = parse_values(SweepAxis::GcnDepth, &["2", "3", "4"]).map_err(|e| e.to_string())?;
    let rows = run_sweep(&cfg, &data, SweepAxis::GcnDepth, &depths).map_err(|e| e.to_string())?;
    check(rows.len() == 3, || format!("{} depth rows", rows.len()))?;
    let auc = |i: usize| rows[i].mean_auc.unwrap_or(f64::NAN);
    let trend = if auc(2) <= auc(0) {
        "depth 4 <= depth 2 as expected"
    } else {
        "depth 4 > depth 2, against the expected trend (reported, not failing)"
    };
    Ok(format!(
        "epsilon 0 flagged {}; depth 2/3/4 mean AUC {:.4}/{:.4}/{:.4}, {trend}",
        zero.status,
        auc(0),
        auc(1),
        auc(2)
    ))
}

fn pipeline_outputs(dir: &std::path::Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let spec = SyntheticSpec {
        num_labels: 5,
        feature_dim: 12,
        n_samples: 120,
        dependency_edges: vec![DependencyEdge { from: 0, to: 1, strength: 0.8 }],
        base_rates: vec![0.3, 0.1, 0.2, 0.2, 0.1],
        noise_sigma: 0.5,
        seed: 9,
    };
    let synthetic = Dataset::synthetic(&spec).map_err(|e| e.to_string())?;
    let (_, records, _) = labelbridge::backbone::generate_synthetic_dataset(&spec).map_err(|e| e.to_string())?;
    let labels_path = dir.join("labels.csv");
    let features_path = dir.join("features.txt");
    write_pipe_labels(
        std::fs::File::create(&labels_path).map_err(|e| e.to_string())?,
        &synthetic.samples,
        &synthetic.vocab,
    )
    .map_err(|e| e.to_string())?;
    write_features(std::fs::File::create(&features_path).map_err(|e| e.to_string())?, &records)
        .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        labels_path: Some(labels_path),
        features_path: Some(features_path),
        d1: 12,
        gcn_dims: vec![6, 8, 6],
        d3: 6,
        groups: 2,
        group_size: 3,
        epochs: 4,
        batch_size: 16,
        provider: labelbridge::ProviderKind::ToyMlp,
        toy_mlp_hidden: 10,
        seed: 5,
        ..TrainConfig::default()
    };
    let data = Dataset::load(&cfg).map_err(|e| e.to_string())?;
    let out = train_full(&cfg, &data).map_err(|e| e.to_string())?;
    let ckpt = dir.join("model.ckpt");
    let metrics = dir.join("metrics.csv");
    out.checkpoint.save(&ckpt).map_err(|e| e.to_string())?;
    std::fs::write(&metrics, metrics_log_csv(&out.log)).map_err(|e| e.to_string())?;
    Ok((
        std::fs::read(&ckpt).map_err(|e| e.to_string())?,
        std::fs::read(&metrics).map_err(|e| e.to_string())?,
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline_outputs(dir.path())?;
    let second = pipeline_outputs(dir.path())?;
    check(first.0 == second.0, || "checkpoints differ between runs".into())?;
    check(first.1 == second.1, || "metric logs differ between runs".into())?;
    Ok(format!(
        "checkpoint ({} bytes) and metrics log ({} bytes) byte-identical",
        first.0.len(),
        first.1.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 graph oracle equivalence", criterion_1),
        ("2 reweighting row structure", criterion_2),
        ("3 bilinear decomposition", criterion_3),
        ("4 end-to-end gradient check", criterion_4),
        ("5 loss exactness", criterion_5),
        ("6 metric oracles", criterion_6),
        ("7 planted-structure experiment", criterion_7),
        ("8 sweep ablation shape", criterion_8),
        ("9 determinism", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
