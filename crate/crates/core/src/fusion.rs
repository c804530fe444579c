//! Low-rank bilinear bridging of an image feature with every label embedding.
//!
//! For one feature `F` and one label embedding `LO_j`:
//!
//! ```text
//! M1 = FC1(F), M2 = FC2(LO_j)                 (both D3 wide)
//! h  = (u^T M1) o (v^T M2)                    (G*g wide)
//! TO = GroupSum(h, G)                         (G wide, sums of g consecutive entries)
//! O_j = FC3(TO)                               (scalar)
//! ```
//!
//! All parameters are shared across the `C` bridgings.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gcn::next_generation;
use crate::rng::fan_in_uniform;

/// Sums `groups` consecutive blocks of equal length.
pub fn group_sum(values: ArrayView1<'_, f64>, groups: usize) -> Result<Array1<f64>> {
    if groups == 0 || values.len() % groups != 0 {
        return Err(Error::Shape(format!(
            "cannot split {} values into {groups} equal groups",
            values.len()
        )));
    }
    let g = values.len() / groups;
    Ok(Array1::from_shape_fn(groups, |k| values.slice(s![k * g..(k + 1) * g]).sum()))
}

#[derive(Debug, Clone)]
pub struct FusionParameters {
    pub(crate) fc1_w: Array2<f64>,
    pub(crate) fc1_b: Array2<f64>,
    pub(crate) fc2_w: Array2<f64>,
    pub(crate) fc2_b: Array2<f64>,
    pub(crate) u: Array2<f64>,
    pub(crate) v: Array2<f64>,
    pub(crate) fc3_w: Array2<f64>,
    pub(crate) fc3_b: Array2<f64>,
    groups: usize,
    group_size: usize,
    generation: u64,
}

/// Gradients for every [`FusionParameters`] block plus the two inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionGradients {
    /// `[fc1_w, fc1_b, fc2_w, fc2_b, u, v, fc3_w, fc3_b]`, same order as
    /// [`FusionParameters::tensors`].
    pub params: Vec<Array2<f64>>,
    pub features: Array2<f64>,
    pub label_embeddings: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct FusionCache {
    generation: u64,
    features: Array2<f64>,
    label_embeddings: Array2<f64>,
    m1: Array2<f64>,
    m2: Array2<f64>,
    p: Array2<f64>,
    q: Array2<f64>,
}

pub const FUSION_TENSOR_NAMES: [&str; 8] = [
    "fusion.fc1.weight",
    "fusion.fc1.bias",
    "fusion.fc2.weight",
    "fusion.fc2.bias",
    "fusion.u",
    "fusion.v",
    "fusion.fc3.weight",
    "fusion.fc3.bias",
];

impl PartialEq for FusionParameters {
    fn eq(&self, other: &Self) -> bool {
        self.groups == other.groups && self.group_size == other.group_size && self.tensors() == other.tensors()
    }
}

impl FusionParameters {
    /// Fan-in uniform initialization.
    pub fn new(
        d1: usize,
        d2: usize,
        d3: usize,
        groups: usize,
        group_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if [d1, d2, d3, groups, group_size].contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "fusion dims must be positive: d1={d1} d2={d2} d3={d3} G={groups} g={group_size}"
            )));
        }
        let width = groups * group_size;
        let tensors = vec![
            fan_in_uniform(rng, d1, d3, d1),
            fan_in_uniform(rng, 1, d3, d1),
            fan_in_uniform(rng, d2, d3, d2),
            fan_in_uniform(rng, 1, d3, d2),
            fan_in_uniform(rng, d3, width, d3),
            fan_in_uniform(rng, d3, width, d3),
            fan_in_uniform(rng, groups, 1, groups),
            fan_in_uniform(rng, 1, 1, groups),
        ];
        Self::from_tensors(tensors, groups)
    }

    /// Builds from tensors in [`FUSION_TENSOR_NAMES`] order.
    pub fn from_tensors(tensors: Vec<Array2<f64>>, groups: usize) -> Result<Self> {
        let [fc1_w, fc1_b, fc2_w, fc2_b, u, v, fc3_w, fc3_b]: [Array2<f64>; 8] = tensors
            .try_into()
            .map_err(|t: Vec<_>| Error::Shape(format!("expected 8 fusion tensors, got {}", t.len())))?;
        let d3 = fc1_w.ncols();
        let width = u.ncols();
        let checks = [
            (fc1_b.dim() == (1, d3), "fc1 bias"),
            (fc2_w.ncols() == d3, "fc2 weight"),
            (fc2_b.dim() == (1, d3), "fc2 bias"),
            (u.nrows() == d3, "u"),
            (v.dim() == (d3, width), "v"),
            (groups > 0 && width % groups == 0, "group count"),
            (fc3_w.dim() == (groups, 1), "fc3 weight"),
            (fc3_b.dim() == (1, 1), "fc3 bias"),
        ];
        if let Some((_, what)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(Error::Shape(format!("inconsistent fusion parameter shapes at {what}")));
        }
        Ok(Self {
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            u,
            v,
            fc3_w,
            fc3_b,
            groups,
            group_size: width / groups,
            generation: next_generation(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.fc1_w.nrows()
    }

    pub fn label_dim(&self) -> usize {
        self.fc2_w.nrows()
    }

    pub fn bridge_dim(&self) -> usize {
        self.fc1_w.ncols()
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn tensors(&self) -> [&Array2<f64>; 8] {
        [
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            &self.fc2_b,
            &self.u,
            &self.v,
            &self.fc3_w,
            &self.fc3_b,
        ]
    }

    /// Mutable access in [`FUSION_TENSOR_NAMES`] order. Invalidates caches.
    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 8] {
        self.generation = next_generation();
        [
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            &mut self.fc2_b,
            &mut self.u,
            &mut self.v,
            &mut self.fc3_w,
            &mut self.fc3_b,
        ]
    }

    /// FC3 weights expanded so entry `t` carries the weight of its group.
    fn expanded_fc3(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.groups * self.group_size, |t| self.fc3_w[[t / self.group_size, 0]])
    }

    /// One bridging, written out step by step. Returns `(O_j, TO)`.
    pub fn bridge_one(&self, feature: ArrayView1<'_, f64>, label: ArrayView1<'_, f64>) -> Result<(f64, Array1<f64>)> {
        if feature.len() != self.feature_dim() || label.len() != self.label_dim() {
            return Err(Error::Shape(format!(
                "bridge expects feature {} and label {} wide, got {} and {}",
                self.feature_dim(),
                self.label_dim(),
                feature.len(),
                label.len()
            )));
        }
        let m1 = feature.dot(&self.fc1_w) + self.fc1_b.row(0);
        let m2 = label.dot(&self.fc2_w) + self.fc2_b.row(0);
        let h = m1.dot(&self.u) * m2.dot(&self.v);
        let to = group_sum(h.view(), self.groups)?;
        let o = to.dot(&self.fc3_w.column(0)) + self.fc3_b[[0, 0]];
        Ok((o, to))
    }

    /// Bridges every feature row with every label row: `O[b][j]`.
    ///
    /// Uses `O = (P o w3) Q^T + b3` with `P = M1 u`, `Q = M2 v`, which is the
    /// group sum followed by FC3 with the sums folded into the product.
    pub fn bridge_all(&self, features: &Array2<f64>, labels: &Array2<f64>) -> Result<(Array2<f64>, FusionCache)> {
        if features.ncols() != self.feature_dim() || labels.ncols() != self.label_dim() {
            return Err(Error::Shape(format!(
                "bridge expects features {} and labels {} wide, got {} and {}",
                self.feature_dim(),
                self.label_dim(),
                features.ncols(),
                labels.ncols()
            )));
        }
        let m1 = features.dot(&self.fc1_w) + &self.fc1_b;
        let m2 = labels.dot(&self.fc2_w) + &self.fc2_b;
        let p = m1.dot(&self.u);
        let q = m2.dot(&self.v);
        let scaled = &p * &self.expanded_fc3();
        let o = scaled.dot(&q.t()) + self.fc3_b[[0, 0]];
        Ok((
            o,
            FusionCache {
                generation: self.generation,
                features: features.clone(),
                label_embeddings: labels.clone(),
                m1,
                m2,
                p,
                q,
            },
        ))
    }

    pub fn backward(&self, cache: &FusionCache, upstream: &Array2<f64>) -> Result<FusionGradients> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache("fusion parameters changed since the forward pass".into()));
        }
        let expected = (cache.p.nrows(), cache.q.nrows());
        if upstream.dim() != expected {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?}, expected {expected:?}",
                upstream.dim()
            )));
        }
        let w3 = self.expanded_fc3();
        let r = upstream.dot(&cache.q);
        let d_w3_expanded = (&cache.p * &r).sum_axis(Axis(0));
        let d_fc3_w = group_sum(d_w3_expanded.view(), self.groups)?.insert_axis(Axis(1));
        let d_fc3_b = Array2::from_elem((1, 1), upstream.sum());
        let d_p = &r * &w3;
        let d_q = upstream.t().dot(&(&cache.p * &w3));
        let d_u = cache.m1.t().dot(&d_p);
        let d_v = cache.m2.t().dot(&d_q);
        let d_m1 = d_p.dot(&self.u.t());
        let d_m2 = d_q.dot(&self.v.t());
        let d_fc1_w = cache.features.t().dot(&d_m1);
        let d_fc1_b = d_m1.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_fc2_w = cache.label_embeddings.t().dot(&d_m2);
        let d_fc2_b = d_m2.sum_axis(Axis(0)).insert_axis(Axis(0));
        Ok(FusionGradients {
            params: vec![d_fc1_w, d_fc1_b, d_fc2_w, d_fc2_b, d_u, d_v, d_fc3_w, d_fc3_b],
            features: d_m1.dot(&self.fc1_w.t()),
            label_embeddings: d_m2.dot(&self.fc2_w.t()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array};
    use rand::SeedableRng;

    fn params(seed: u64) -> FusionParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FusionParameters::new(5, 3, 4, 2, 2, &mut rng).unwrap()
    }

    #[test]
    fn group_sum_definition() {
        let v = arr1(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(group_sum(v.view(), 3).unwrap(), arr1(&[3.0, 7.0, 11.0]));
        assert_eq!(group_sum(v.view(), 1).unwrap(), arr1(&[21.0]));
        assert!(group_sum(v.view(), 4).is_err());
    }

    #[test]
    fn bridge_all_matches_independent_bridgings() {
        let f = params(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let feats = fan_in_uniform(&mut rng, 2, 5, 1);
        let labels = fan_in_uniform(&mut rng, 3, 3, 1);
        let (o, _) = f.bridge_all(&feats, &labels).unwrap();
        for b in 0..2 {
            for j in 0..3 {
                let (single, _) = f.bridge_one(feats.row(b), labels.row(j)).unwrap();
                approx::assert_abs_diff_eq!(o[[b, j]], single, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn permuted_and_duplicated_label_rows() {
        let f = params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let feats = fan_in_uniform(&mut rng, 1, 5, 1);
        let labels = fan_in_uniform(&mut rng, 3, 3, 1);
        let (o, _) = f.bridge_all(&feats, &labels).unwrap();
        let permuted = labels.select(Axis(0), &[2, 0, 1]);
        let (op, _) = f.bridge_all(&feats, &permuted).unwrap();
        assert_eq!(op.row(0).to_vec(), vec![o[[0, 2]], o[[0, 0]], o[[0, 1]]]);
        let dup = labels.select(Axis(0), &[1, 1]);
        let (od, _) = f.bridge_all(&feats, &dup).unwrap();
        assert_eq!(od[[0, 0]], od[[0, 1]]);
    }

    #[test]
    fn one_hot_upstream_touches_one_label_row() {
        let f = params(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let feats = fan_in_uniform(&mut rng, 1, 5, 1);
        let labels = fan_in_uniform(&mut rng, 3, 3, 1);
        let (_, cache) = f.bridge_all(&feats, &labels).unwrap();
        let mut up = Array2::zeros((1, 3));
        up[[0, 1]] = 1.0;
        let g = f.backward(&cache, &up).unwrap();
        for j in [0, 2] {
            assert!(g.label_embeddings.row(j).iter().all(|&v| v == 0.0));
        }
        assert!(g.label_embeddings.row(1).iter().any(|&v| v != 0.0));
        let zero = f.backward(&cache, &Array2::zeros((1, 3))).unwrap();
        assert!(zero.params.iter().all(|t| t.iter().all(|&v| v == 0.0)));
        assert!(zero.features.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut f = params(4);
        let (_, cache) = f.bridge_all(&Array::zeros((1, 5)), &Array::zeros((2, 3))).unwrap();
        f.tensors_mut()[6][[0, 0]] = 1.0;
        assert!(matches!(f.backward(&cache, &Array2::zeros((1, 2))), Err(Error::StaleCache(_))));
    }

    #[test]
    fn shapes_are_checked() {
        let f = params(5);
        assert!(f.bridge_one(arr1(&[1.0; 4]).view(), arr1(&[1.0; 3]).view()).is_err());
        assert!(f.bridge_all(&Array::zeros((1, 5)), &Array::zeros((2, 4))).is_err());
        let mut t: Vec<Array2<f64>> = f.tensors().iter().map(|t| (*t).clone()).collect();
        t[6] = Array2::zeros((3, 1));
        assert!(FusionParameters::from_tensors(t, 2).is_err());
    }
}
