//! Stacked graph convolution over the label graph,
//! `H^{l+1} = LeakyReLU(EA_norm . H^l . Theta^l)`, with exact reverse-mode
//! gradients.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::fan_in_uniform;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

pub(crate) fn next_generation() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of [`leaky_relu`]; the slope is used at exactly zero.
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

#[derive(Debug, Clone)]
pub struct GcnStack {
    thetas: Vec<Array2<f64>>,
    slope: f64,
    final_linear: bool,
    generation: u64,
}

/// Activations recorded by [`GcnStack::forward`].
#[derive(Debug, Clone)]
pub struct GcnCache {
    generation: u64,
    ea_norm: Array2<f64>,
    /// `EA_norm . H^l` per layer.
    propagated: Vec<Array2<f64>>,
    /// Pre-activations per layer.
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnGradients {
    pub thetas: Vec<Array2<f64>>,
    /// Gradient with respect to the input embedding matrix.
    pub input: Array2<f64>,
}

// the generation tag identifies an instance, not its values
impl PartialEq for GcnStack {
    fn eq(&self, other: &Self) -> bool {
        self.thetas == other.thetas && self.slope == other.slope && self.final_linear == other.final_linear
    }
}

impl GcnStack {
    /// `dims = [D2, d1, ..., D2']`, initialized fan-in uniform.
    pub fn new(dims: &[usize], slope: f64, final_linear: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "gcn dims need at least two positive entries, got {dims:?}"
            )));
        }
        let thetas = dims
            .windows(2)
            .map(|w| fan_in_uniform(rng, w[0], w[1], w[0]))
            .collect();
        Self::from_thetas(thetas, slope, final_linear)
    }

    pub fn from_thetas(thetas: Vec<Array2<f64>>, slope: f64, final_linear: bool) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidConfig("a gcn needs at least one layer".into()));
        }
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::InvalidConfig(format!("leaky slope must be positive, got {slope}")));
        }
        for (l, pair) in thetas.windows(2).enumerate() {
            if pair[0].ncols() != pair[1].nrows() {
                return Err(Error::Shape(format!(
                    "gcn layer {l} outputs {} dims but layer {} expects {}",
                    pair[0].ncols(),
                    l + 1,
                    pair[1].nrows()
                )));
            }
        }
        Ok(Self {
            thetas,
            slope,
            final_linear,
            generation: next_generation(),
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.thetas[0].nrows())
            .chain(self.thetas.iter().map(|t| t.ncols()))
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.thetas.len()
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn final_linear(&self) -> bool {
        self.final_linear
    }

    pub fn thetas(&self) -> &[Array2<f64>] {
        &self.thetas
    }

    /// Mutable access to the weights. Invalidates outstanding caches.
    pub fn thetas_mut(&mut self) -> &mut [Array2<f64>] {
        self.generation = next_generation();
        &mut self.thetas
    }

    fn activates(&self, layer: usize) -> bool {
        !(self.final_linear && layer + 1 == self.thetas.len())
    }

    pub fn forward(&self, w: &Array2<f64>, ea_norm: &Array2<f64>) -> Result<(Array2<f64>, GcnCache)> {
        let c = w.nrows();
        if ea_norm.dim() != (c, c) {
            return Err(Error::Shape(format!(
                "propagation matrix is {:?}, expected ({c}, {c})",
                ea_norm.dim()
            )));
        }
        if w.ncols() != self.thetas[0].nrows() {
            return Err(Error::Shape(format!(
                "embedding width {} does not match gcn input width {}",
                w.ncols(),
                self.thetas[0].nrows()
            )));
        }
        let mut propagated = Vec::with_capacity(self.thetas.len());
        let mut pre = Vec::with_capacity(self.thetas.len());
        let mut h = w.clone();
        for (l, theta) in self.thetas.iter().enumerate() {
            let ph = ea_norm.dot(&h);
            let z = ph.dot(theta);
            h = if self.activates(l) {
                z.mapv(|x| leaky_relu(x, self.slope))
            } else {
                z.clone()
            };
            propagated.push(ph);
            pre.push(z);
        }
        Ok((
            h,
            GcnCache {
                generation: self.generation,
                ea_norm: ea_norm.clone(),
                propagated,
                pre,
            },
        ))
    }

    pub fn backward(&self, cache: &GcnCache, upstream: &Array2<f64>) -> Result<GcnGradients> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache("gcn weights changed since the forward pass".into()));
        }
        let out = cache.pre.last().map(|z| z.dim()).unwrap_or_default();
        if upstream.dim() != out {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?}, expected {out:?}",
                upstream.dim()
            )));
        }
        let mut grads = vec![Array2::zeros((0, 0)); self.thetas.len()];
        let mut dh = upstream.clone();
        for l in (0..self.thetas.len()).rev() {
            let dz = if self.activates(l) {
                let mut d = dh;
                d.zip_mut_with(&cache.pre[l], |g, &z| *g *= leaky_relu_grad(z, self.slope));
                d
            } else {
                dh
            };
            grads[l] = cache.propagated[l].t().dot(&dz);
            dh = cache.ea_norm.t().dot(&dz.dot(&self.thetas[l].t()));
        }
        Ok(GcnGradients {
            thetas: grads,
            input: dh,
        })
    }
}
