//! Hyperparameter sweeps: one model per value, shared seed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::pipeline::{train_full, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Epsilon,
    Delta,
    Groupsum,
    GcnDepth,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epsilon" => Ok(Self::Epsilon),
            "delta" => Ok(Self::Delta),
            "groupsum" => Ok(Self::Groupsum),
            "gcn_depth" => Ok(Self::GcnDepth),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis `{other}` (expected epsilon, delta, groupsum or gcn_depth)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Real(f64),
    /// `(G, g)`
    Groups(usize, usize),
    Depth(usize),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Real(v) => write!(f, "{v}"),
            Self::Groups(g, s) => write!(f, "{g}x{s}"),
            Self::Depth(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    /// Trained, but the configuration is known not to converge (a fully
    /// connected graph at epsilon 0).
    Degenerate,
    /// Training hit a non-finite loss.
    Diverged,
}

impl fmt::Display for SweepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ok => "ok",
            Self::Degenerate => "degenerate",
            Self::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: SweepValue,
    pub mean_auc: Option<f64>,
    pub status: SweepStatus,
}

fn parse_one(axis: SweepAxis, raw: &str) -> Result<SweepValue> {
    let bad = |why: &str| Error::InvalidConfig(format!("invalid {axis:?} sweep value `{raw}`: {why}"));
    let raw = raw.trim();
    match axis {
        SweepAxis::Epsilon | SweepAxis::Delta => {
            let v: f64 = raw.parse().map_err(|_| bad("not a number"))?;
            let ok = match axis {
                SweepAxis::Epsilon => (0.0..=1.0).contains(&v),
                _ => (0.0..1.0).contains(&v),
            };
            if !ok {
                return Err(bad(if axis == SweepAxis::Epsilon {
                    "must lie in [0, 1]"
                } else {
                    "must lie in [0, 1)"
                }));
            }
            Ok(SweepValue::Real(v))
        }
        SweepAxis::Groupsum => {
            let (g, s) = raw
                .split_once(['x', 'X', ':'])
                .ok_or_else(|| bad("expected `GxG` such as `8x48`"))?;
            let g: usize = g.trim().parse().map_err(|_| bad("G is not an integer"))?;
            let s: usize = s.trim().parse().map_err(|_| bad("g is not an integer"))?;
            if g == 0 || s == 0 {
                return Err(bad("G and g must be positive"));
            }
            Ok(SweepValue::Groups(g, s))
        }
        SweepAxis::GcnDepth => {
            let d: usize = raw.parse().map_err(|_| bad("not an integer"))?;
            if d == 0 {
                return Err(bad("depth must be at least 1"));
            }
            Ok(SweepValue::Depth(d))
        }
    }
}

/// Parses and validates every value before any training; duplicates are
/// dropped with a warning, and `groupsum` pairs must share one `G * g`.
pub fn parse_values<S: AsRef<str>>(axis: SweepAxis, raw: &[S]) -> Result<Vec<SweepValue>> {
    if raw.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let mut out: Vec<SweepValue> = Vec::with_capacity(raw.len());
    for r in raw {
        let v = parse_one(axis, r.as_ref())?;
        if out.contains(&v) {
            log::warn!("duplicate sweep value `{v}` dropped");
        } else {
            out.push(v);
        }
    }
    if axis == SweepAxis::Groupsum {
        let width = |v: &SweepValue| match v {
            SweepValue::Groups(g, s) => g * s,
            _ => unreachable!(),
        };
        let w0 = width(&out[0]);
        if let Some(v) = out.iter().find(|v| width(v) != w0) {
            return Err(Error::InvalidConfig(format!(
                "groupsum values must share G*g = {w0}; `{v}` has {}",
                width(v)
            )));
        }
    }
    Ok(out)
}

/// `cfg` with one sweep value applied.
pub fn apply(cfg: &TrainConfig, value: SweepValue, axis: SweepAxis) -> TrainConfig {
    let mut c = cfg.clone();
    match (axis, value) {
        (SweepAxis::Epsilon, SweepValue::Real(v)) => c.epsilon = v,
        (SweepAxis::Delta, SweepValue::Real(v)) => c.delta = v,
        (SweepAxis::Groupsum, SweepValue::Groups(g, s)) => {
            c.groups = g;
            c.group_size = s;
        }
        (SweepAxis::GcnDepth, SweepValue::Depth(d)) => {
            let input = cfg.embedding_dim();
            let output = cfg.label_dim();
            let hidden = if cfg.gcn_dims.len() > 2 { cfg.gcn_dims[1] } else { output };
            let mut dims = vec![input];
            dims.extend(std::iter::repeat_n(hidden, d - 1));
            dims.push(output);
            c.gcn_dims = dims;
        }
        _ => unreachable!("value does not belong to axis"),
    }
    c
}

/// Trains one model per value (concurrently) and reports test mean AUC.
pub fn run_sweep(cfg: &TrainConfig, data: &Dataset, axis: SweepAxis, values: &[SweepValue]) -> Result<Vec<SweepRow>> {
    let configs: Vec<TrainConfig> = values.iter().map(|&v| apply(cfg, v, axis)).collect();
    for c in &configs {
        c.validate()?;
    }
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, &value)| {
            let degenerate = axis == SweepAxis::Epsilon && c.epsilon == 0.0;
            match train_full(c, data) {
                Ok(out) => {
                    let mean_auc = out.test_report.mean_auc;
                    let status = if mean_auc.is_some_and(f64::is_finite) {
                        if degenerate {
                            SweepStatus::Degenerate
                        } else {
                            SweepStatus::Ok
                        }
                    } else {
                        SweepStatus::Diverged
                    };
                    Ok(SweepRow { value, mean_auc, status })
                }
                Err(Error::NonFinite { loss, epoch, batch, .. }) => {
                    log::warn!("sweep value {value} diverged (loss {loss} at epoch {epoch}, batch {batch})");
                    Ok(SweepRow {
                        value,
                        mean_auc: None,
                        status: SweepStatus::Diverged,
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// `value,mean_auc,status`
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,mean_auc,status\n");
    for r in rows {
        let auc = r.mean_auc.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", r.value, auc, r.status));
    }
    out
}
