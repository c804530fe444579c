//! Label co-occurrence statistics and the correlation graph built from them.
//!
//! The pipeline is `count -> conditional probabilities P -> binarized A ->
//! reweighted EA -> row-normalized EA`, where `P[i][j] = P(label i | label j)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ingest::{LabelVocabulary, LabeledSample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceStats {
    /// `T_j`, number of samples carrying label `j`.
    pub single_counts: Vec<u64>,
    /// `T_ij`, number of samples carrying both `i` and `j`; symmetric.
    pub pair_counts: Array2<u64>,
}

impl CooccurrenceStats {
    pub fn num_labels(&self) -> usize {
        self.single_counts.len()
    }
}

pub fn count_cooccurrence(samples: &[LabeledSample], num_labels: usize) -> Result<CooccurrenceStats> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot count co-occurrence of an empty sample list".into()));
    }
    let mut pair_counts = Array2::<u64>::zeros((num_labels, num_labels));
    let mut active = Vec::with_capacity(num_labels);
    for s in samples {
        if s.labels.len() != num_labels {
            return Err(Error::Shape(format!(
                "sample `{}` has {} labels, expected {num_labels}",
                s.sample_id,
                s.labels.len()
            )));
        }
        active.clear();
        active.extend(s.positives());
        for &i in &active {
            for &j in &active {
                pair_counts[[i, j]] += 1;
            }
        }
    }
    let single_counts = pair_counts.diag().to_vec();
    Ok(CooccurrenceStats {
        single_counts,
        pair_counts,
    })
}

/// `P[i][j] = T_ij / T_j`, zero when `T_j = 0`.
pub fn conditional_matrix(stats: &CooccurrenceStats) -> Array2<f64> {
    let c = stats.num_labels();
    Array2::from_shape_fn((c, c), |(i, j)| {
        let tj = stats.single_counts[j];
        if tj == 0 {
            0.0
        } else {
            stats.pair_counts[[i, j]] as f64 / tj as f64
        }
    })
}

fn check_unit(name: &str, v: f64, upper_inclusive: bool) -> Result<()> {
    let ok = v.is_finite() && v >= 0.0 && if upper_inclusive { v <= 1.0 } else { v < 1.0 };
    if ok {
        Ok(())
    } else {
        let range = if upper_inclusive { "[0, 1]" } else { "[0, 1)" };
        Err(Error::InvalidConfig(format!("{name} must lie in {range}, got {v}")))
    }
}

/// Keeps `P_ij > epsilon`. Diagonal entries of labels that occur at all are
/// kept regardless of `epsilon`.
pub fn binarize(p: &Array2<f64>, epsilon: f64) -> Result<Array2<f64>> {
    check_unit("epsilon", epsilon, true)?;
    Ok(Array2::from_shape_fn(p.dim(), |(i, j)| {
        let keep = p[[i, j]] > epsilon || (i == j && p[[i, j]] > 0.0);
        if keep {
            1.0
        } else {
            0.0
        }
    }))
}

/// Which neighbourhood the reweighting mass `delta` is spread over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReweightAxis {
    /// Off-diagonal entries of row `i` share `delta`.
    #[default]
    Row,
    /// Off-diagonal entries of column `j` share `delta`.
    Col,
}

impl std::str::FromStr for ReweightAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(Self::Row),
            "col" | "column" => Ok(Self::Col),
            other => Err(Error::InvalidConfig(format!("unknown reweight axis `{other}`"))),
        }
    }
}

/// Puts `1 - delta` on the diagonal and spreads `delta` uniformly over the
/// retained off-diagonal edges of each row (or column).
pub fn reweight(a: &Array2<f64>, delta: f64, axis: ReweightAxis) -> Result<Array2<f64>> {
    check_unit("delta", delta, false)?;
    let c = a.nrows();
    if a.ncols() != c {
        return Err(Error::Shape(format!("adjacency must be square, got {:?}", a.dim())));
    }
    let off_diag_sum = |k: usize| -> f64 {
        (0..c)
            .filter(|&m| m != k)
            .map(|m| match axis {
                ReweightAxis::Row => a[[k, m]],
                ReweightAxis::Col => a[[m, k]],
            })
            .sum()
    };
    let sums: Vec<f64> = (0..c).map(off_diag_sum).collect();
    Ok(Array2::from_shape_fn((c, c), |(i, j)| {
        if i == j {
            return 1.0 - delta;
        }
        let denom = match axis {
            ReweightAxis::Row => sums[i],
            ReweightAxis::Col => sums[j],
        };
        if denom > 0.0 {
            delta * a[[i, j]] / denom
        } else {
            0.0
        }
    }))
}

/// Row-stochastic normalization `D^-1 EA`; zero rows stay zero.
pub fn normalize(ea: &Array2<f64>) -> Array2<f64> {
    let mut out = ea.clone();
    for mut row in out.rows_mut() {
        let s: f64 = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        }
    }
    out
}

/// All matrices derived from one set of co-occurrence statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGraph {
    pub stats: CooccurrenceStats,
    pub p: Array2<f64>,
    pub a: Array2<f64>,
    pub ea: Array2<f64>,
    pub ea_norm: Array2<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub axis: ReweightAxis,
}

impl CorrelationGraph {
    pub fn build(stats: CooccurrenceStats, epsilon: f64, delta: f64, axis: ReweightAxis) -> Result<Self> {
        let p = conditional_matrix(&stats);
        let a = binarize(&p, epsilon)?;
        let ea = reweight(&a, delta, axis)?;
        let ea_norm = normalize(&ea);
        Ok(Self {
            stats,
            p,
            a,
            ea,
            ea_norm,
            epsilon,
            delta,
            axis,
        })
    }

    pub fn from_samples(
        samples: &[LabeledSample],
        num_labels: usize,
        epsilon: f64,
        delta: f64,
        axis: ReweightAxis,
    ) -> Result<Self> {
        Self::build(count_cooccurrence(samples, num_labels)?, epsilon, delta, axis)
    }

    pub fn num_labels(&self) -> usize {
        self.p.nrows()
    }

    /// Number of retained off-diagonal edges in `A`.
    pub fn edge_count(&self) -> usize {
        let c = self.num_labels();
        (0..c)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.a[[i, j]] > 0.0)
            .count()
    }

    /// JSON document with every matrix as row-major nested arrays and reals
    /// rounded to 12 significant digits.
    pub fn to_json(&self, vocab: &LabelVocabulary) -> Value {
        let counts = |m: &Array2<u64>| -> Value {
            Value::Array(m.rows().into_iter().map(|r| json!(r.to_vec())).collect())
        };
        json!({
            "labels": vocab.labels(),
            "epsilon": round_sig(self.epsilon),
            "delta": round_sig(self.delta),
            "reweight_axis": self.axis,
            "single_counts": self.stats.single_counts,
            "pair_counts": counts(&self.stats.pair_counts),
            "p": matrix_json(&self.p),
            "a": matrix_json(&self.a),
            "ea": matrix_json(&self.ea),
            "ea_norm": matrix_json(&self.ea_norm),
        })
    }
}

/// Rounds to 12 significant digits; the shortest representation of the
/// result is what serde_json prints.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

pub fn matrix_json(m: &Array2<f64>) -> Value {
    Value::Array(
        m.rows()
            .into_iter()
            .map(|r| Value::Array(r.iter().map(|&v| json!(round_sig(v))).collect()))
            .collect(),
    )
}
