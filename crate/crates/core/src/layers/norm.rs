use rand::Rng;

use super::FeatureMap;
use crate::graph::Fiber;
use crate::tensor::{ParamStore, Tape, Tensor};
use crate::Result;

/// Guard added under the square root of every norm.
pub const NORM_EPS: f64 = 1e-12;

/// Norm-based normalisation: each channel vector `h` of degree `d` becomes
/// `relu(s * |h| + b) * h / |h|` with learned per-channel `s` (initially 1)
/// and `b` (initially 0).
///
/// Only the invariant norm is transformed, so directions rotate unchanged.
#[derive(Clone, Debug)]
pub struct GraphNorm {
    prefix: String,
    fiber: Fiber,
}

impl GraphNorm {
    pub fn new(prefix: impl Into<String>, fiber: Fiber) -> Self {
        GraphNorm { prefix: prefix.into(), fiber }
    }

    pub fn scale_name(&self, degree: u32) -> String {
        format!("{}.{degree}.scale", self.prefix)
    }

    pub fn bias_name(&self, degree: u32) -> String {
        format!("{}.{degree}.bias", self.prefix)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, _rng: &mut R) {
        for (d, c) in self.fiber.iter() {
            store.insert(self.scale_name(d), Tensor::full(&[1, c], 1.0));
            store.insert(self.bias_name(d), Tensor::zeros(&[1, c]));
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: &FeatureMap) -> Result<FeatureMap> {
        let mut out = FeatureMap::new();
        for (d, x) in h.iter() {
            let shape = tape.shape(x).to_vec();
            let (n, c, dim) = (shape[0], shape[1], shape[2]);
            let norm = tape.norm_last(x, NORM_EPS);
            let norm = tape.reshape(norm, &[n, c])?;
            let ones = tape.constant(Tensor::full(&[n, 1], 1.0));
            let s = tape.param(store, &self.scale_name(d))?;
            let b = tape.param(store, &self.bias_name(d))?;
            let s = tape.matmul(ones, s)?;
            let b = tape.matmul(ones, b)?;
            let mag = tape.mul(norm, s)?;
            let mag = tape.add(mag, b)?;
            let mag = tape.relu(mag);
            let factor = tape.div(mag, norm)?;
            let factor = tape.reshape(factor, &[n * c, 1, 1])?;
            let xs = tape.reshape(x, &[n * c, dim, 1])?;
            let y = tape.bmm(xs, factor)?;
            out.insert(d, tape.reshape(y, &[n, c, dim])?);
        }
        Ok(out)
    }
}
