use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelKind};
use crate::graph::{Fiber, GraphBatch, MolGraph};
use crate::layers::{
    pool, AttentionConfig, ConvFlavor, FcHead, FeatureMap, GraphContext, GraphConv, GraphNorm, PairwiseConv,
    ResidualAttention, SkipKind,
};
use crate::tensor::{ParamStore, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Debug)]
enum Mixer {
    Attention(ResidualAttention),
    Conv(GraphConv),
}

#[derive(Clone, Debug)]
struct Block {
    mixer: Mixer,
    norm: GraphNorm,
}

/// Named intermediate node features from one forward pass.
pub struct Trace {
    /// In execution order: `input`, then per layer `layer{i}.attention` or
    /// `layer{i}.conv` and `layer{i}.norm`, then `final_conv`.
    pub stages: Vec<(String, FeatureMap)>,
    /// `[G, C]`
    pub pooled: Var,
    /// `[G, T]`
    pub output: Var,
}

/// SE(3)-Transformer or TFN: equivariant blocks, a final degree-0 graph
/// convolution, pooling and a fully connected head.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    blocks: Vec<Block>,
    final_conv: GraphConv,
    head: FcHead,
}

impl Model {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let edge_dim = config.edge_features + 1;
        let hidden = Fiber::uniform(config.num_degrees, config.channels);
        let mut fiber_in = Fiber::scalar(config.node_features);
        let mut blocks = Vec::with_capacity(config.num_layers);
        for i in 0..config.num_layers {
            let prefix = format!("layer{i}");
            let mixer = match config.model {
                ModelKind::Se3t => {
                    let skip = if config.skip == SkipKind::Sum && fiber_in != hidden { SkipKind::Cat } else { config.skip };
                    let cfg = AttentionConfig { heads: config.heads, skip };
                    Mixer::Attention(ResidualAttention::new(&format!("{prefix}.attention"), fiber_in.clone(), hidden.clone(), edge_dim, cfg)?)
                }
                ModelKind::Tfn => Mixer::Conv(GraphConv::new(
                    &format!("{prefix}.conv"),
                    fiber_in.clone(),
                    hidden.clone(),
                    edge_dim,
                    true,
                    ConvFlavor::Tfn,
                )?),
            };
            blocks.push(Block { mixer, norm: GraphNorm::new(format!("{prefix}.norm"), hidden.clone()) });
            fiber_in = hidden.clone();
        }
        let final_conv =
            GraphConv::new("final_conv", fiber_in, Fiber::scalar(config.channels), edge_dim, true, ConvFlavor::Tfn)?;
        let head = FcHead::new("head", config.channels, 4 * config.channels, config.tasks);
        Ok(Model { config: config.clone(), blocks, final_conv, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Fresh parameters from a seeded generator.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for b in &self.blocks {
            match &b.mixer {
                Mixer::Attention(a) => a.init(&mut store, &mut rng),
                Mixer::Conv(c) => c.init(&mut store, &mut rng),
            }
            b.norm.init(&mut store, &mut rng);
        }
        self.final_conv.init(&mut store, &mut rng);
        self.head.init(&mut store, &mut rng);
        store
    }

    /// Kernel blocks of the first layer, in the order they are applied.
    pub fn first_layer_convs(&self) -> Vec<&PairwiseConv> {
        match self.blocks.first().map(|b| &b.mixer) {
            Some(Mixer::Attention(a)) => a.edge_convs().collect(),
            Some(Mixer::Conv(c)) => c.edges().convs().iter().collect(),
            None => self.final_conv.edges().convs().iter().collect(),
        }
    }

    pub fn context(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<GraphContext> {
        GraphContext::new(tape, batch, self.config.max_degree())
    }

    /// `[G, T]` outputs for a batch.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, batch: &GraphBatch) -> Result<Var> {
        let ctx = self.context(tape, batch)?;
        Ok(self.run(tape, store, batch, &ctx, None)?.1)
    }

    /// Forward pass recording every intermediate feature map.
    pub fn trace(&self, tape: &mut Tape, store: &ParamStore, batch: &GraphBatch, ctx: &GraphContext) -> Result<Trace> {
        let mut stages = Vec::new();
        let (pooled, output) = self.run(tape, store, batch, ctx, Some(&mut stages))?;
        Ok(Trace { stages, pooled, output })
    }

    fn run(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        batch: &GraphBatch,
        ctx: &GraphContext,
        mut stages: Option<&mut Vec<(String, FeatureMap)>>,
    ) -> Result<(Var, Var)> {
        let f = batch.node_feats.shape()[1];
        if f != self.config.node_features {
            return Err(Error::Config(format!("graphs have {f} node features, model expects {}", self.config.node_features)));
        }
        if batch.edge_scalar_dim() != self.config.edge_features + 1 {
            return Err(Error::Config(format!(
                "graphs have {} edge features, model expects {}",
                batch.edge_scalar_dim() - 1,
                self.config.edge_features
            )));
        }
        let mut record = |name: String, h: &FeatureMap| {
            if let Some(s) = stages.as_deref_mut() {
                s.push((name, h.clone()));
            }
        };
        let x = tape.constant(batch.node_feats.clone().reshaped(&[batch.num_nodes, f, 1])?);
        let mut h = FeatureMap::new();
        h.insert(0, x);
        record("input".into(), &h);
        for (i, b) in self.blocks.iter().enumerate() {
            h = match &b.mixer {
                Mixer::Attention(a) => {
                    let out = a.forward(tape, store, ctx, &h)?;
                    record(format!("layer{i}.attention"), &out);
                    out
                }
                Mixer::Conv(c) => {
                    let out = c.forward(tape, store, ctx, &h)?;
                    record(format!("layer{i}.conv"), &out);
                    out
                }
            };
            h = b.norm.forward(tape, store, &h)?;
            record(format!("layer{i}.norm"), &h);
        }
        h = self.final_conv.forward(tape, store, ctx, &h)?;
        record("final_conv".into(), &h);
        let pooled = pool(tape, &h, ctx, self.config.pooling)?;
        let output = self.head.forward(tape, store, pooled)?;
        Ok((pooled, output))
    }

    /// Raw network outputs `[T]` for one graph.
    pub fn predict_one(&self, store: &ParamStore, graph: &MolGraph) -> Result<Vec<f64>> {
        let batch = GraphBatch::new(&[graph])?;
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, store, &batch)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Parameter shapes the model expects, for validating loaded files.
    pub fn param_template(&self) -> ParamStore {
        let mut t = self.init_params(0);
        for (_, v) in t.iter_mut() {
            *v = Tensor::zeros(v.shape());
        }
        t
    }
}

fn forward_for(kind: ModelKind, config: &ModelConfig, params: &ParamStore, graph: &MolGraph) -> Result<Vec<f64>> {
    if config.model != kind {
        return Err(Error::Config(format!("config selects model `{}`, not `{kind}`", config.model)));
    }
    let model = Model::new(config)?;
    params.check_compatible(&model.param_template())?;
    model.predict_one(params, graph)
}

/// SE(3)-Transformer outputs `[T]` for one featurised graph.
pub fn se3_transformer_forward(config: &ModelConfig, params: &ParamStore, graph: &MolGraph) -> Result<Vec<f64>> {
    forward_for(ModelKind::Se3t, config, params, graph)
}

/// Tensor field network outputs `[T]` for one featurised graph.
pub fn tfn_forward(config: &ModelConfig, params: &ParamStore, graph: &MolGraph) -> Result<Vec<f64>> {
    forward_for(ModelKind::Tfn, config, params, graph)
}
