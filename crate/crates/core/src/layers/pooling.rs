use std::fmt;
use std::str::FromStr;

use super::{FeatureMap, GraphContext};
use crate::tensor::{Reduce, Tape, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Max,
    Avg,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Pooling::Max),
            "avg" => Ok(Pooling::Avg),
            other => Err(Error::Config(format!("unknown pooling `{other}` (expected max or avg)"))),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Max => "max",
            Pooling::Avg => "avg",
        })
    }
}

/// Pools the degree-0 channels over the nodes of each graph: `[G, c_0]`.
///
/// Higher degrees are dropped since they are not rotation invariant.
pub fn pool(tape: &mut Tape, h: &FeatureMap, ctx: &GraphContext, mode: Pooling) -> Result<Var> {
    let x = h.get(0).map_err(|_| Error::Layer("pooling needs degree-0 features".into()))?;
    let c = tape.shape(x)[1];
    let x = tape.reshape(x, &[ctx.num_nodes, c])?;
    let reduce = match mode {
        Pooling::Max => Reduce::Max,
        Pooling::Avg => Reduce::Mean,
    };
    tape.segment_reduce(x, ctx.node_graph.clone(), ctx.num_graphs, reduce)
}
