use rand::Rng;

use crate::tensor::{ParamStore, Tape, Tensor, Var};
use crate::Result;

/// Uniform initialisation in `[-bound, bound]`.
pub(crate) fn init_uniform<R: Rng + ?Sized>(store: &mut ParamStore, name: String, shape: &[usize], bound: f64, rng: &mut R) {
    let t = Tensor::from_fn(shape, |_| if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 });
    store.insert(name, t);
}

/// Kaiming-style bound for a layer followed by ReLU (`gain^2 = 2`).
pub(crate) fn relu_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in.max(1) as f64).sqrt()
}

/// Bound preserving activation variance for a linear map.
pub(crate) fn linear_bound(fan_in: usize) -> f64 {
    (3.0 / fan_in.max(1) as f64).sqrt()
}

/// `x W + b` on row vectors; `W: [in, out]`, `b: [1, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    prefix: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(prefix: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        Linear { prefix: prefix.into(), in_dim, out_dim }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.prefix)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.prefix)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, weight_bound: f64, rng: &mut R) {
        init_uniform(store, self.weight_name(), &[self.in_dim, self.out_dim], weight_bound, rng);
        init_uniform(store, self.bias_name(), &[1, self.out_dim], 1.0 / (self.in_dim.max(1) as f64).sqrt(), rng);
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, &self.weight_name())?;
        let b = tape.param(store, &self.bias_name())?;
        let rows = tape.shape(x)[0];
        let ones = tape.constant(Tensor::full(&[rows, 1], 1.0));
        let xw = tape.matmul(x, w)?;
        let bias = tape.matmul(ones, b)?;
        tape.add(xw, bias)
    }
}

/// Width of both hidden layers of the radial MLP.
pub const RADIAL_HIDDEN: usize = 32;

/// Two-hidden-layer ReLU MLP from rotation-invariant edge scalars to radial
/// coefficients.
#[derive(Clone, Debug)]
pub struct RadialFunc {
    layers: [Linear; 3],
    out_gain: f64,
}

impl RadialFunc {
    /// `out_gain` scales the output layer's initial weights.
    pub fn new(prefix: &str, in_dim: usize, out_dim: usize, out_gain: f64) -> Self {
        RadialFunc {
            layers: [
                Linear::new(format!("{prefix}.0"), in_dim, RADIAL_HIDDEN),
                Linear::new(format!("{prefix}.1"), RADIAL_HIDDEN, RADIAL_HIDDEN),
                Linear::new(format!("{prefix}.2"), RADIAL_HIDDEN, out_dim),
            ],
            out_gain,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.layers[2].out_dim
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.layers[0].init(store, relu_bound(self.layers[0].in_dim), rng);
        self.layers[1].init(store, relu_bound(RADIAL_HIDDEN), rng);
        self.layers[2].init(store, linear_bound(RADIAL_HIDDEN) * self.out_gain, rng);
    }

    /// `[E, F_r] -> [E, out_dim]`
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, edge_scalars: Var) -> Result<Var> {
        let h = self.layers[0].forward(tape, store, edge_scalars)?;
        let h = tape.relu(h);
        let h = self.layers[1].forward(tape, store, h)?;
        let h = tape.relu(h);
        self.layers[2].forward(tape, store, h)
    }
}

/// Graph-level head: `Linear -> ReLU -> Linear`.
#[derive(Clone, Debug)]
pub struct FcHead {
    hidden: Linear,
    out: Linear,
}

impl FcHead {
    pub fn new(prefix: &str, in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        FcHead {
            hidden: Linear::new(format!("{prefix}.0"), in_dim, hidden),
            out: Linear::new(format!("{prefix}.1"), hidden, out_dim),
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.hidden.init(store, relu_bound(self.hidden.in_dim), rng);
        self.out.init(store, linear_bound(self.out.in_dim), rng);
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.hidden.forward(tape, store, x)?;
        let h = tape.relu(h);
        self.out.forward(tape, store, h)
    }
}
