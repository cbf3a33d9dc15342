use std::sync::Arc;

use super::featurize::MolGraph;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Disjoint union of graphs, the unit a model forward pass runs on.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub num_graphs: usize,
    pub num_nodes: usize,
    /// graph index of every node
    pub node_graph: Arc<[usize]>,
    /// `[N, F]`
    pub node_feats: Tensor,
    pub positions: Vec<[f64; 3]>,
    /// receiving node of every edge
    pub centers: Arc<[usize]>,
    /// sending node of every edge
    pub neighbors: Arc<[usize]>,
    pub rel_vec: Vec<[f64; 3]>,
    /// `[E, F_e + 1]`: edge features followed by the distance
    pub edge_scalars: Tensor,
}

impl GraphBatch {
    pub fn new(graphs: &[&MolGraph]) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::Graph("empty batch".into()))?;
        let (f, fe) = (first.node_feat_dim, first.edge_feat_dim);
        let mut node_graph = Vec::new();
        let mut node_feats = Vec::new();
        let mut positions = Vec::new();
        let (mut centers, mut neighbors) = (Vec::new(), Vec::new());
        let mut rel_vec = Vec::new();
        let mut edge_scalars = Vec::new();
        for (gi, g) in graphs.iter().enumerate() {
            if g.node_feat_dim != f || g.edge_feat_dim != fe {
                return Err(Error::Graph(format!("graph {gi} has different feature sizes from graph 0")));
            }
            let offset = positions.len();
            node_graph.extend(std::iter::repeat_n(gi, g.num_nodes()));
            node_feats.extend_from_slice(&g.node_feats);
            positions.extend_from_slice(&g.positions);
            for (e, &(i, j)) in g.edges.iter().enumerate() {
                centers.push(offset + i);
                neighbors.push(offset + j);
                edge_scalars.extend_from_slice(g.edge_row(e));
                edge_scalars.push(g.dist[e]);
            }
            rel_vec.extend_from_slice(&g.rel_vec);
        }
        let n = positions.len();
        let e = centers.len();
        Ok(GraphBatch {
            num_graphs: graphs.len(),
            num_nodes: n,
            node_graph: node_graph.into(),
            node_feats: Tensor::new(vec![n, f], node_feats)?,
            positions,
            centers: centers.into(),
            neighbors: neighbors.into(),
            rel_vec,
            edge_scalars: Tensor::new(vec![e, fe + 1], edge_scalars)?,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.centers.len()
    }

    pub fn edge_scalar_dim(&self) -> usize {
        self.edge_scalars.shape()[1]
    }

    /// Nodes without incoming edges.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.num_nodes];
        for &c in self.centers.iter() {
            seen[c] = true;
        }
        (0..self.num_nodes).filter(|&i| !seen[i]).collect()
    }
}
