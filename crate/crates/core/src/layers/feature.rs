use std::collections::BTreeMap;

use crate::graph::Fiber;
use crate::so3::{wigner_d_from_matrix, Rot3};
use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Degree -> tape value of shape `[rows, channels, 2d+1]`, where rows are
/// nodes or edges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMap(BTreeMap<u32, Var>);

impl FeatureMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, degree: u32, v: Var) {
        self.0.insert(degree, v);
    }

    pub fn get(&self, degree: u32) -> Result<Var> {
        self.0.get(&degree).copied().ok_or_else(|| Error::Layer(format!("feature map has no degree {degree}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Var)> + '_ {
        self.0.iter().map(|(d, v)| (*d, *v))
    }

    pub fn degrees(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.keys().copied()
    }

    pub fn fiber(&self, tape: &Tape) -> Fiber {
        Fiber::new(self.0.iter().map(|(d, v)| (*d, tape.shape(*v)[1]))).expect("tape shapes are valid")
    }

    /// Records `values` as constants.
    pub fn constant(tape: &mut Tape, values: &BTreeMap<u32, Tensor>) -> Result<Self> {
        let mut out = FeatureMap::new();
        for (d, t) in values {
            let s = t.shape();
            if s.len() != 3 || s[2] != 2 * *d as usize + 1 {
                return Err(Error::Shape { op: "feature_map", lhs: s.to_vec(), rhs: vec![2 * *d as usize + 1] });
            }
            out.insert(*d, tape.constant(t.clone()));
        }
        Ok(out)
    }

    pub fn values(&self, tape: &Tape) -> BTreeMap<u32, Tensor> {
        self.0.iter().map(|(d, v)| (*d, tape.value(*v).clone())).collect()
    }
}

/// Applies `D^d(rot)` to the representation axis of every degree-`d` block.
pub fn rotate_feature_values(values: &BTreeMap<u32, Tensor>, rot: &Rot3) -> BTreeMap<u32, Tensor> {
    values
        .iter()
        .map(|(d, t)| {
            let dmat = wigner_d_from_matrix(*d, rot).entries;
            let dim = dmat.nrows();
            let mut out = Tensor::zeros(t.shape());
            for (src, dst) in t.data().chunks(dim).zip(out.data_mut().chunks_mut(dim)) {
                for a in 0..dim {
                    dst[a] = (0..dim).map(|b| dmat[(a, b)] * src[b]).sum();
                }
            }
            (*d, out)
        })
        .collect()
}
