//! SE(3)-equivariant layers recorded on a [`Tape`](crate::tensor::Tape).
//!
//! Features are [`FeatureMap`]s: per degree `d` a tensor `[rows, channels, 2d+1]`.

mod attention;
mod context;
mod conv;
mod feature;
mod linear;
mod norm;
mod pooling;
mod self_interaction;

pub use attention::{multi_head_attention, AttentionConfig, AttentionOutput, ResidualAttention, SkipKind};
pub use context::GraphContext;
pub use conv::{conjugate_kernel, pairwise_kernel, ConvFlavor, GraphConv, PairwiseConv, PartialEdgeConv};
pub use feature::{rotate_feature_values, FeatureMap};
pub use linear::{FcHead, Linear, RadialFunc, RADIAL_HIDDEN};
pub use norm::{GraphNorm, NORM_EPS};
pub use pooling::{pool, Pooling};
pub use self_interaction::SelfInteraction;
