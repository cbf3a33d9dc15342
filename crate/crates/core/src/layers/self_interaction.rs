use rand::Rng;

use super::linear::{init_uniform, linear_bound};
use super::FeatureMap;
use crate::graph::Fiber;
use crate::tensor::{ParamStore, Tape, Var};
use crate::{Error, Result};

/// Degree-wise channel mixing `h^(d) -> W^(d) h^(d)` with `W^(d): [c_out, c_in]`.
#[derive(Clone, Debug)]
pub struct SelfInteraction {
    prefix: String,
    fiber_in: Fiber,
    fiber_out: Fiber,
}

impl SelfInteraction {
    /// Every output degree must be present in the input fiber.
    pub fn new(prefix: impl Into<String>, fiber_in: Fiber, fiber_out: Fiber) -> Result<Self> {
        if let Some(d) = fiber_out.degrees().find(|d| !fiber_in.contains(*d)) {
            return Err(Error::Layer(format!("self-interaction has no input channels for degree {d}")));
        }
        Ok(SelfInteraction { prefix: prefix.into(), fiber_in, fiber_out })
    }

    pub fn fiber_out(&self) -> &Fiber {
        &self.fiber_out
    }

    pub fn weight_name(&self, degree: u32) -> String {
        format!("{}.{degree}", self.prefix)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        for (d, c_out) in self.fiber_out.iter() {
            let c_in = self.fiber_in.channels(d).expect("checked in new");
            init_uniform(store, self.weight_name(d), &[c_out, c_in], linear_bound(c_in), rng);
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: &FeatureMap) -> Result<FeatureMap> {
        let mut out = FeatureMap::new();
        for d in self.fiber_out.degrees() {
            out.insert(d, self.apply(tape, store, d, h.get(d)?)?);
        }
        Ok(out)
    }

    /// Mixes a single degree `[rows, c_in, 2d+1] -> [rows, c_out, 2d+1]`.
    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, degree: u32, x: Var) -> Result<Var> {
        let w = tape.param(store, &self.weight_name(degree))?;
        tape.bmm(w, x)
    }
}
