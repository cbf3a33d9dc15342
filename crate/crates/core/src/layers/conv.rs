use rand::Rng;

use super::linear::RadialFunc;
use super::{FeatureMap, GraphContext, SelfInteraction};
use crate::cg::{BasisKey, EdgeBasis};
use crate::graph::Fiber;
use crate::so3::{wigner_d_from_matrix, Rot3};
use crate::tensor::{ParamStore, Reduce, Tape, Tensor, Var};
use crate::{Error, Result};

/// Explicit per-edge kernels for one `(k, l)` block.
///
/// `radial` is `[E, c_out * c_in * n_J]` (index order out, in, J). The result is
/// `[E, (2l+1) c_out, (2k+1) c_in]` with row `o (2l+1) + a` and column
/// `i (2k+1) + b`, so it acts on channel-major flattened degree-`k` features.
pub fn pairwise_kernel(radial: &Tensor, basis: &EdgeBasis, key: BasisKey, c_in: usize, c_out: usize) -> Result<Tensor> {
    let ang = basis.angular(key)?;
    let (dl, dk, nj) = ((2 * key.d_out + 1) as usize, (2 * key.d_in + 1) as usize, key.n_j());
    let e_count = basis.num_edges();
    if radial.shape() != [e_count, c_out * c_in * nj] {
        return Err(Error::Shape { op: "pairwise_kernel", lhs: radial.shape().to_vec(), rhs: vec![e_count, c_out * c_in * nj] });
    }
    let (rows, cols) = (dl * c_out, dk * c_in);
    let mut out = vec![0.0; e_count * rows * cols];
    let (r, a_data) = (radial.data(), ang.data());
    for e in 0..e_count {
        for o in 0..c_out {
            for i in 0..c_in {
                let coef = &r[e * c_out * c_in * nj + (o * c_in + i) * nj..][..nj];
                for a in 0..dl {
                    for b in 0..dk {
                        let basis_row = &a_data[((e * dl + a) * dk + b) * nj..][..nj];
                        let v: f64 = coef.iter().zip(basis_row).map(|(x, y)| x * y).sum();
                        out[(e * rows + o * dl + a) * cols + i * dk + b] = v;
                    }
                }
            }
        }
    }
    Tensor::new(vec![e_count, rows, cols], out)
}

/// `D^l(rot) K D^k(rot)^T` applied to every per-edge kernel block of
/// `kernel` (layout as in [`pairwise_kernel`]). An equivariant kernel satisfies
/// `K(rot r) = conjugate_kernel(K(r))`.
pub fn conjugate_kernel(kernel: &Tensor, key: BasisKey, c_in: usize, c_out: usize, rot: &Rot3) -> Tensor {
    let dl = wigner_d_from_matrix(key.d_out, rot).entries;
    let dk = wigner_d_from_matrix(key.d_in, rot).entries;
    let (nl, nk) = (dl.nrows(), dk.nrows());
    let (rows, cols) = (nl * c_out, nk * c_in);
    let mut out = Tensor::zeros(kernel.shape());
    let src = kernel.data();
    for e in 0..kernel.shape()[0] {
        for o in 0..c_out {
            for i in 0..c_in {
                let at = |a: usize, b: usize| src[(e * rows + o * nl + a) * cols + i * nk + b];
                for a in 0..nl {
                    for b in 0..nk {
                        let mut s = 0.0;
                        for a2 in 0..nl {
                            for b2 in 0..nk {
                                s += dl[(a, a2)] * at(a2, b2) * dk[(b, b2)];
                            }
                        }
                        out.data_mut()[(e * rows + o * nl + a) * cols + i * nk + b] = s;
                    }
                }
            }
        }
    }
    out
}

/// Kernel block `(k -> l)` with its own radial network.
#[derive(Clone, Debug)]
pub struct PairwiseConv {
    pub key: BasisKey,
    pub c_in: usize,
    pub c_out: usize,
    radial: RadialFunc,
}

impl PairwiseConv {
    /// `fan_in` is the number of terms summed into each output component by the
    /// owning layer; it scales the radial output at initialisation.
    pub fn new(prefix: &str, key: BasisKey, c_in: usize, c_out: usize, edge_dim: usize, fan_in: usize) -> Self {
        let out_dim = c_out * c_in * key.n_j();
        let gain = 1.0 / (fan_in.max(1) as f64).sqrt();
        PairwiseConv { key, c_in, c_out, radial: RadialFunc::new(&format!("{prefix}.radial"), edge_dim, out_dim, gain) }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.radial.init(store, rng);
    }

    pub fn radial(&self) -> &RadialFunc {
        &self.radial
    }

    /// Radial coefficients `[E, c_out * c_in * n_J]`.
    pub fn radial_coefficients(&self, tape: &mut Tape, store: &ParamStore, ctx: &GraphContext) -> Result<Var> {
        self.radial.forward(tape, store, ctx.edge_scalars)
    }

    /// Applies the kernel of every edge to the sender features
    /// `h_nbr: [E, c_in, 2k+1]`, giving `[E, c_out, 2l+1]`.
    ///
    /// Contracts with the basis first and with the radial coefficients second,
    /// which never forms the `(2l+1) c_out x (2k+1) c_in` kernel.
    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, ctx: &GraphContext, h_nbr: Var) -> Result<Var> {
        let e = ctx.num_edges();
        let (nj, dl) = (self.key.n_j(), (2 * self.key.d_out + 1) as usize);
        let basis = ctx.conv_layout(self.key)?;
        let u = tape.bmm(h_nbr, basis)?;
        let u = tape.reshape(u, &[e, self.c_in * nj, dl])?;
        let r = self.radial_coefficients(tape, store, ctx)?;
        let r = tape.reshape(r, &[e, self.c_out, self.c_in * nj])?;
        tape.bmm(r, u)
    }
}

/// Per-edge messages from every input degree to every output degree, summed
/// over input degrees. Used for keys/values in attention and inside
/// [`GraphConv`].
#[derive(Clone, Debug)]
pub struct PartialEdgeConv {
    fiber_in: Fiber,
    fiber_out: Fiber,
    convs: Vec<PairwiseConv>,
}

impl PartialEdgeConv {
    pub fn new(prefix: &str, fiber_in: Fiber, fiber_out: Fiber, edge_dim: usize) -> Self {
        let mut convs = Vec::new();
        for (d_out, c_out) in fiber_out.iter() {
            let fan_in: usize = fiber_in.iter().map(|(d_in, c_in)| c_in * BasisKey::new(d_in, d_out).n_j()).sum();
            for (d_in, c_in) in fiber_in.iter() {
                let key = BasisKey::new(d_in, d_out);
                convs.push(PairwiseConv::new(&format!("{prefix}.{d_in}_{d_out}"), key, c_in, c_out, edge_dim, fan_in));
            }
        }
        PartialEdgeConv { fiber_in, fiber_out, convs }
    }

    pub fn fiber_in(&self) -> &Fiber {
        &self.fiber_in
    }

    pub fn fiber_out(&self) -> &Fiber {
        &self.fiber_out
    }

    pub fn convs(&self) -> &[PairwiseConv] {
        &self.convs
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        for c in &self.convs {
            c.init(store, rng);
        }
    }

    /// Node features in, per-edge features `[E, c_out, 2d+1]` out.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &GraphContext, h: &FeatureMap) -> Result<FeatureMap> {
        let mut senders = FeatureMap::new();
        for d in self.fiber_in.degrees() {
            let x = h.get(d)?;
            let got = tape.shape(x)[1];
            if got != self.fiber_in.channels(d).expect("own degree") {
                return Err(Error::Layer(format!("degree {d} has {got} channels, layer expects {}", self.fiber_in)));
            }
            senders.insert(d, tape.gather_rows(x, ctx.neighbors.clone())?);
        }
        let mut out = FeatureMap::new();
        for d_out in self.fiber_out.degrees() {
            let mut acc: Option<Var> = None;
            for conv in self.convs.iter().filter(|c| c.key.d_out == d_out) {
                let m = conv.apply(tape, store, ctx, senders.get(conv.key.d_in)?)?;
                acc = Some(match acc {
                    Some(a) => tape.add(a, m)?,
                    None => m,
                });
            }
            out.insert(d_out, acc.expect("fiber_in is non-empty"));
        }
        Ok(out)
    }
}

/// How [`GraphConv`] combines the aggregated message with the node's own
/// features.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvFlavor {
    /// Message plus optional self-interaction only.
    Tfn,
    /// Additionally adds the input unchanged on degrees whose channel counts match.
    Skip,
}

/// Equivariant graph convolution with mean aggregation over incoming edges.
#[derive(Clone, Debug)]
pub struct GraphConv {
    edges: PartialEdgeConv,
    self_int: Option<SelfInteraction>,
    flavor: ConvFlavor,
}

impl GraphConv {
    pub fn new(prefix: &str, fiber_in: Fiber, fiber_out: Fiber, edge_dim: usize, self_int: bool, flavor: ConvFlavor) -> Result<Self> {
        if fiber_in.is_empty() || fiber_out.is_empty() {
            return Err(Error::Layer("graph convolution needs non-empty fibers".into()));
        }
        let self_int = if self_int {
            let out = fiber_out.restricted_to(&fiber_in);
            Some(SelfInteraction::new(format!("{prefix}.self"), fiber_in.restricted_to(&fiber_out), out)?)
        } else {
            None
        };
        let edges = PartialEdgeConv::new(&format!("{prefix}.conv"), fiber_in, fiber_out, edge_dim);
        Ok(GraphConv { edges, self_int, flavor })
    }

    pub fn fiber_out(&self) -> &Fiber {
        self.edges.fiber_out()
    }

    pub fn edges(&self) -> &PartialEdgeConv {
        &self.edges
    }

    pub fn self_interaction(&self) -> Option<&SelfInteraction> {
        self.self_int.as_ref()
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.edges.init(store, rng);
        if let Some(s) = &self.self_int {
            s.init(store, rng);
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &GraphContext, h: &FeatureMap) -> Result<FeatureMap> {
        let messages = self.edges.forward(tape, store, ctx, h)?;
        let mut out = FeatureMap::new();
        for (d, m) in messages.iter() {
            let mut x = tape.segment_reduce(m, ctx.centers.clone(), ctx.num_nodes, Reduce::Mean)?;
            if let Some(s) = self.self_int.as_ref().filter(|s| s.fiber_out().contains(d)) {
                let own = s.apply(tape, store, d, h.get(d)?)?;
                x = tape.add(x, own)?;
            }
            if self.flavor == ConvFlavor::Skip {
                if let Ok(hd) = h.get(d) {
                    if tape.shape(hd) == tape.shape(x) {
                        x = tape.add(x, hd)?;
                    }
                }
            }
            out.insert(d, x);
        }
        Ok(out)
    }
}
