//! Loss, optimizer, models, checkpoints and the epoch loop.

pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod optim;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::metrics::auc_score;
use crate::rng::stream;

pub use checkpoint::Checkpoint;
pub use loss::{batch_loss, multilabel_loss};
pub use model::{BridgeModel, LinearBaseline, Trainable};
pub use optim::{OptimizerState, ParamGroup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mean_auc: Option<f64>,
}

/// `epoch,train_loss,val_mean_auc` with an empty cell for undefined AUC.
pub fn metrics_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_mean_auc\n");
    for e in log {
        let auc = e.val_mean_auc.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, auc));
    }
    out
}

#[derive(Debug, Clone)]
pub struct FitResult<M> {
    /// Parameters at the epoch with the best validation mean AUC.
    pub best_model: M,
    pub best_optimizer: OptimizerState,
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
    pub final_model: M,
    pub log: Vec<EpochLog>,
}

/// Mean of the defined per-column AUCs of `logits` against `truths`.
pub fn mean_auc(logits: &Array2<f64>, truths: &Array2<u8>) -> Option<f64> {
    let aucs: Vec<f64> = (0..logits.ncols())
        .filter_map(|j| auc_score(&logits.column(j).to_vec(), &truths.column(j).to_vec()))
        .collect();
    (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Gradient of the mean batch loss for every parameter, plus the loss.
pub fn loss_and_grads<M: Trainable>(model: &M, x: &Array2<f64>, y: &Array2<u8>) -> Result<(f64, Vec<Array2<f64>>)> {
    let (logits, cache) = model.forward(x)?;
    let (loss, upstream) = batch_loss(&logits, y);
    let grads = model.backward(&cache, &upstream)?;
    Ok((loss, grads))
}

/// Minibatch SGD over `epochs`, reshuffling each epoch from the run seed and
/// keeping the last partial batch.
pub fn fit<M: Trainable>(
    mut model: M,
    cfg: &TrainConfig,
    train_x: &Array2<f64>,
    train_y: &Array2<u8>,
    val_x: &Array2<f64>,
    val_y: &Array2<u8>,
) -> Result<FitResult<M>> {
    if train_x.nrows() != train_y.nrows() || train_x.nrows() == 0 {
        return Err(Error::Shape(format!(
            "{} feature rows for {} label rows",
            train_x.nrows(),
            train_y.nrows()
        )));
    }
    if train_y.ncols() != model.num_labels() {
        return Err(Error::Shape(format!(
            "labels have {} columns, model predicts {}",
            train_y.ncols(),
            model.num_labels()
        )));
    }
    let groups = model.param_groups();
    let mut optimizer = OptimizerState::new(&model.param_shapes(), cfg);
    let mut rng = stream(cfg.seed, "batches");
    let mut order: Vec<usize> = (0..train_x.nrows()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(M, OptimizerState, usize, Option<f64>)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = train_x.select(Axis(0), idx);
            let y = train_y.select(Axis(0), idx);
            let (loss, grads) = loss_and_grads(&model, &x, &y)?;
            if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite {
                    loss,
                    epoch,
                    batch,
                    lr_lce: optimizer.lr(epoch, ParamGroup::Lce),
                    lr_main: optimizer.lr(epoch, ParamGroup::Main),
                });
            }
            loss_sum += loss * idx.len() as f64;
            optimizer.step(model.params_mut(), &groups, &grads, epoch)?;
        }
        let train_loss = loss_sum / train_x.nrows() as f64;
        let val_mean_auc = if val_x.nrows() > 0 {
            let (logits, _) = model.forward(val_x)?;
            mean_auc(&logits, val_y)
        } else {
            None
        };
        log::info!("epoch {epoch}: train_loss={train_loss:.6} val_mean_auc={val_mean_auc:?}");
        log.push(EpochLog {
            epoch,
            train_loss,
            val_mean_auc,
        });
        let improved = match (&best, val_mean_auc) {
            (None, _) => true,
            (Some((_, _, _, Some(b))), Some(v)) => v > *b,
            (Some((_, _, _, None)), Some(_)) => true,
            // without a validation signal keep the latest parameters
            (Some(_), None) => val_x.nrows() == 0,
        };
        if improved {
            best = Some((model.clone(), optimizer.clone(), epoch, val_mean_auc));
        }
    }
    let (best_model, best_optimizer, best_epoch, best_val_auc) = best.expect("at least one epoch");
    Ok(FitResult {
        best_model,
        best_optimizer,
        best_epoch,
        best_val_auc,
        final_model: model,
        log,
    })
}
