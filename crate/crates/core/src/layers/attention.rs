use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{FeatureMap, GraphContext, PartialEdgeConv, SelfInteraction};
use crate::graph::Fiber;
use crate::tensor::{ParamStore, Reduce, Tape, Var};
use crate::{Error, Result};

/// Node features after attention together with the weights that produced them.
pub struct AttentionOutput {
    pub z: FeatureMap,
    /// `[E, H]`, normalised over the incoming edges of every node.
    pub alpha: Var,
}

/// Multi-head dot-product attention from per-node queries to per-edge keys and values.
///
/// For every head the logit of edge `(i, j)` is the inner product of `q_i`
/// and `k_ij` taken over channels and representation components of all
/// degrees at once, divided by the square root of the total key size. Heads
/// split the channels of every degree evenly; the representation axis is never split.
pub fn multi_head_attention(
    tape: &mut Tape,
    q: &FeatureMap,
    k: &FeatureMap,
    v: &FeatureMap,
    ctx: &GraphContext,
    heads: usize,
) -> Result<AttentionOutput> {
    let e = ctx.num_edges();
    let q_fiber = q.fiber(tape);
    let k_fiber = k.fiber(tape);
    if q_fiber != k_fiber {
        return Err(Error::Layer(format!("query fiber {q_fiber} differs from key fiber {k_fiber}")));
    }
    let v_fiber = v.fiber(tape);
    for (what, fiber) in [("key", &k_fiber), ("value", &v_fiber)] {
        if let Some((d, c)) = fiber.iter().find(|(_, c)| heads == 0 || c % heads != 0) {
            return Err(Error::Layer(format!("{what} degree {d} has {c} channels, not divisible by {heads} heads")));
        }
    }
    let mut logits: Option<Var> = None;
    for (d, kd) in k.iter() {
        let qe = tape.gather_rows(q.get(d)?, ctx.centers.clone())?;
        let prod = tape.mul(qe, kd)?;
        let per_head = tape.reshape(prod, &[e, heads, k_fiber.channels(d).expect("own degree") / heads * (2 * d as usize + 1)])?;
        let part = tape.sum_last(per_head);
        let part = tape.reshape(part, &[e, heads])?;
        logits = Some(match logits {
            Some(l) => tape.add(l, part)?,
            None => part,
        });
    }
    let logits = logits.ok_or_else(|| Error::Layer("attention needs at least one key degree".into()))?;
    let logits = tape.scale(logits, 1.0 / (k_fiber.total_dim() as f64).sqrt());
    let alpha = tape.segment_softmax(logits, ctx.centers.clone(), ctx.num_nodes)?;
    let alpha_b = tape.reshape(alpha, &[e * heads, 1, 1])?;

    let mut z = FeatureMap::new();
    for (d, vd) in v.iter() {
        let c = v_fiber.channels(d).expect("own degree");
        let dim = 2 * d as usize + 1;
        let split = tape.reshape(vd, &[e * heads, c / heads * dim, 1])?;
        let weighted = tape.bmm(split, alpha_b)?;
        let weighted = tape.reshape(weighted, &[e, c, dim])?;
        z.insert(d, tape.segment_reduce(weighted, ctx.centers.clone(), ctx.num_nodes, Reduce::Sum)?);
    }
    Ok(AttentionOutput { z, alpha })
}

/// How the attention block combines its output with its input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipKind {
    /// Project, then add the input; needs identical input and output fibers.
    Sum,
    /// Concatenate output and input channels, then project.
    #[default]
    Cat,
    /// Return the attention output as is.
    None,
}

impl FromStr for SkipKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(SkipKind::Sum),
            "cat" => Ok(SkipKind::Cat),
            "none" => Ok(SkipKind::None),
            other => Err(Error::Config(format!("unknown skip type `{other}` (expected sum, cat or none)"))),
        }
    }
}

impl fmt::Display for SkipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipKind::Sum => "sum",
            SkipKind::Cat => "cat",
            SkipKind::None => "none",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionConfig {
    pub heads: usize,
    pub skip: SkipKind,
}

/// Attention block: query by self-interaction, keys and values by partial
/// edge convolutions, multi-head attention, then the configured skip.
///
/// Values carry the output fiber; queries and keys carry the output channels
/// on the degrees the input also has.
#[derive(Clone, Debug)]
pub struct ResidualAttention {
    fiber_in: Fiber,
    fiber_out: Fiber,
    config: AttentionConfig,
    query: SelfInteraction,
    key: PartialEdgeConv,
    value: PartialEdgeConv,
    project: Option<SelfInteraction>,
}

impl ResidualAttention {
    pub fn new(prefix: &str, fiber_in: Fiber, fiber_out: Fiber, edge_dim: usize, config: AttentionConfig) -> Result<Self> {
        let key_fiber = fiber_out.restricted_to(&fiber_in);
        if key_fiber.is_empty() {
            return Err(Error::Layer(format!("input fiber {fiber_in} and output fiber {fiber_out} share no degree")));
        }
        for (what, fiber) in [("key", &key_fiber), ("value", &fiber_out)] {
            if let Some((d, c)) = fiber.iter().find(|(_, c)| config.heads == 0 || c % config.heads != 0) {
                return Err(Error::Layer(format!(
                    "{what} degree {d} has {c} channels, not divisible by {} heads",
                    config.heads
                )));
            }
        }
        let project = match config.skip {
            SkipKind::Sum => {
                if fiber_in != fiber_out {
                    return Err(Error::Layer(format!(
                        "sum skip needs equal fibers, got input {fiber_in} and output {fiber_out}"
                    )));
                }
                Some(SelfInteraction::new(format!("{prefix}.project"), fiber_out.clone(), fiber_out.clone())?)
            }
            SkipKind::Cat => {
                let cat = fiber_out.concat(&fiber_in.restricted_to(&fiber_out));
                Some(SelfInteraction::new(format!("{prefix}.project"), cat, fiber_out.clone())?)
            }
            SkipKind::None => None,
        };
        Ok(ResidualAttention {
            query: SelfInteraction::new(format!("{prefix}.query"), fiber_in.clone(), key_fiber.clone())?,
            key: PartialEdgeConv::new(&format!("{prefix}.key"), fiber_in.clone(), key_fiber, edge_dim),
            value: PartialEdgeConv::new(&format!("{prefix}.value"), fiber_in.clone(), fiber_out.clone(), edge_dim),
            fiber_in,
            fiber_out,
            config,
            project,
        })
    }

    pub fn fiber_in(&self) -> &Fiber {
        &self.fiber_in
    }

    pub fn fiber_out(&self) -> &Fiber {
        &self.fiber_out
    }

    /// Kernel blocks of the key and value convolutions.
    pub fn edge_convs(&self) -> impl Iterator<Item = &super::PairwiseConv> {
        self.key.convs().iter().chain(self.value.convs())
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.query.init(store, rng);
        self.key.init(store, rng);
        self.value.init(store, rng);
        if let Some(p) = &self.project {
            p.init(store, rng);
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &GraphContext, h: &FeatureMap) -> Result<FeatureMap> {
        Ok(self.forward_with_weights(tape, store, ctx, h)?.z)
    }

    /// Like [`forward`](Self::forward) but also returns the attention weights.
    pub fn forward_with_weights(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        ctx: &GraphContext,
        h: &FeatureMap,
    ) -> Result<AttentionOutput> {
        let q = self.query.forward(tape, store, h)?;
        let k = self.key.forward(tape, store, ctx, h)?;
        let v = self.value.forward(tape, store, ctx, h)?;
        let AttentionOutput { z, alpha } = multi_head_attention(tape, &q, &k, &v, ctx, self.config.heads)?;
        let z = match self.config.skip {
            SkipKind::None => z,
            SkipKind::Sum => {
                let p = self.project.as_ref().expect("sum projects").forward(tape, store, &z)?;
                let mut out = FeatureMap::new();
                for (d, zd) in p.iter() {
                    out.insert(d, tape.add(zd, h.get(d)?)?);
                }
                out
            }
            SkipKind::Cat => {
                let mut cat = FeatureMap::new();
                for (d, zd) in z.iter() {
                    let joined = match h.get(d) {
                        Ok(hd) => tape.concat(&[zd, hd], 1)?,
                        Err(_) => zd,
                    };
                    cat.insert(d, joined);
                }
                self.project.as_ref().expect("cat projects").forward(tape, store, &cat)?
            }
        };
        Ok(AttentionOutput { z, alpha })
    }
}
