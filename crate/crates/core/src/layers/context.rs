use std::collections::BTreeMap;
use std::sync::Arc;

use crate::cg::{BasisKey, EdgeBasis};
use crate::graph::GraphBatch;
use crate::tensor::{Tape, Var};
use crate::Result;

/// Graph structure and edge basis of one forward pass, with the basis
/// recorded on the tape as constants.
pub struct GraphContext {
    pub num_nodes: usize,
    pub num_graphs: usize,
    pub centers: Arc<[usize]>,
    pub neighbors: Arc<[usize]>,
    pub node_graph: Arc<[usize]>,
    /// `[E, F_e + 1]`
    pub edge_scalars: Var,
    basis: EdgeBasis,
    conv: BTreeMap<BasisKey, Var>,
}

impl GraphContext {
    pub fn new(tape: &mut Tape, batch: &GraphBatch, max_degree: u32) -> Result<Self> {
        let basis = EdgeBasis::new(&batch.rel_vec, max_degree)?;
        Self::with_basis(tape, batch, basis)
    }

    pub fn with_basis(tape: &mut Tape, batch: &GraphBatch, basis: EdgeBasis) -> Result<Self> {
        let isolated = batch.isolated_nodes();
        if !isolated.is_empty() {
            log::warn!("nodes {isolated:?} have no neighbours; their aggregated messages are zero");
        }
        let mut conv = BTreeMap::new();
        for key in basis.keys() {
            conv.insert(key, tape.constant(basis.conv_layout(key)?.clone()));
        }
        Ok(GraphContext {
            num_nodes: batch.num_nodes,
            num_graphs: batch.num_graphs,
            centers: batch.centers.clone(),
            neighbors: batch.neighbors.clone(),
            node_graph: batch.node_graph.clone(),
            edge_scalars: tape.constant(batch.edge_scalars.clone()),
            basis,
            conv,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.centers.len()
    }

    pub fn basis(&self) -> &EdgeBasis {
        &self.basis
    }

    /// Tape handle of `basis().conv_layout(key)`.
    pub fn conv_layout(&self, key: BasisKey) -> Result<Var> {
        self.conv.get(&key).copied().ok_or_else(|| {
            crate::Error::Layer(format!("basis built for degrees <= {} lacks ({}, {})", self.basis.max_degree(), key.d_in, key.d_out))
        })
    }
}
