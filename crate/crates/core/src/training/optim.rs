//! SGD with momentum, L2 weight decay and per-group step-decayed learning rates.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// Learning-rate group a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    /// Label-embedding GCN.
    Lce,
    /// Backbone and fusion head.
    Main,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub buffers: Vec<Array2<f64>>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_lce: f64,
    pub lr_main: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
}

impl OptimizerState {
    pub fn new(shapes: &[(usize, usize)], cfg: &TrainConfig) -> Self {
        Self {
            buffers: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            lr_lce: cfg.lr_lce,
            lr_main: cfg.lr_main,
            decay_factor: cfg.decay_factor,
            decay_every: cfg.decay_every,
        }
    }

    /// `lr0 * decay_factor^(epoch / decay_every)`, epochs counted from 0.
    pub fn lr(&self, epoch: usize, group: ParamGroup) -> f64 {
        let base = match group {
            ParamGroup::Lce => self.lr_lce,
            ParamGroup::Main => self.lr_main,
        };
        base * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }

    /// One update over every parameter:
    /// `g = grad + wd * p; buf = momentum * buf + g; p -= lr * buf`.
    pub fn step(
        &mut self,
        params: Vec<&mut Array2<f64>>,
        groups: &[ParamGroup],
        grads: &[Array2<f64>],
        epoch: usize,
    ) -> Result<()> {
        if params.len() != self.buffers.len() || grads.len() != params.len() || groups.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer holds {} buffers, got {} params, {} grads, {} groups",
                self.buffers.len(),
                params.len(),
                grads.len(),
                groups.len()
            )));
        }
        for (i, param) in params.into_iter().enumerate() {
            if param.dim() != grads[i].dim() || param.dim() != self.buffers[i].dim() {
                return Err(Error::Shape(format!(
                    "parameter {i} is {:?} but gradient is {:?}",
                    param.dim(),
                    grads[i].dim()
                )));
            }
            let lr = self.lr(epoch, groups[i]);
            let buf = &mut self.buffers[i];
            let (momentum, wd) = (self.momentum, self.weight_decay);
            ndarray::Zip::from(&mut *param)
                .and(&mut *buf)
                .and(&grads[i])
                .for_each(|p, b, &g| {
                    let g = g + wd * *p;
                    *b = momentum * *b + g;
                    *p -= lr * *b;
                });
        }
        Ok(())
    }
}
