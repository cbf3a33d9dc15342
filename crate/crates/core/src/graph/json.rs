//! Versioned JSON interchange for featurised graphs.
//!
//! ```json
//! {"version": 1,
//!  "nodes": [{"element": "C", "pos": [0, 0, 0], "feats": [0, 1, 0, 0, 0, 0.667]}],
//!  "edges": [[0, 1]], "edge_feats": [[1, 0, 0, 1.2]], "labels": {"u0": -0.5}}
//! ```
//!
//! `edges`, `edge_feats` and `feats` may be omitted and are then recomputed
//! (full connectivity, default featuriser).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::featurize::{edge_features, node_features, FeaturizerConfig, MolGraph, EDGE_FEATURES};
use crate::{Error, Result};

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub element: String,
    pub pos: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feats: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub version: u32,
    pub nodes: Vec<NodeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_feats: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub labels: BTreeMap<String, f64>,
}

impl From<&MolGraph> for GraphDoc {
    fn from(g: &MolGraph) -> Self {
        GraphDoc {
            version: GRAPH_FORMAT_VERSION,
            nodes: (0..g.num_nodes())
                .map(|i| NodeDoc { element: g.elements[i].clone(), pos: g.positions[i], feats: Some(g.node_row(i).to_vec()) })
                .collect(),
            edges: Some(g.edges.iter().map(|&(i, j)| [i, j]).collect()),
            edge_feats: Some((0..g.num_edges()).map(|e| g.edge_row(e).to_vec()).collect()),
            labels: g.labels.clone(),
        }
    }
}

impl GraphDoc {
    pub fn into_graph(self) -> Result<MolGraph> {
        if self.version != GRAPH_FORMAT_VERSION {
            return Err(Error::Graph(format!("unsupported graph format version {}", self.version)));
        }
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::Graph("graph has no nodes".into()));
        }
        let cfg = FeaturizerConfig::default();
        let mut rows = Vec::with_capacity(n);
        for node in &self.nodes {
            rows.push(match &node.feats {
                Some(f) => f.clone(),
                None => node_features(&node.element, &cfg.alphabet)?,
            });
        }
        let node_feat_dim = rows[0].len();
        if rows.iter().any(|r| r.len() != node_feat_dim) {
            return Err(Error::Graph("node feature rows differ in length".into()));
        }
        let edges: Vec<(usize, usize)> = match self.edges {
            Some(e) => e.into_iter().map(|[i, j]| (i, j)).collect(),
            None => (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect(),
        };
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i >= n || j >= n || i == j) {
            return Err(Error::Graph(format!("invalid edge [{i}, {j}] for {n} nodes")));
        }
        let mut g = MolGraph {
            elements: self.nodes.iter().map(|n| n.element.clone()).collect(),
            node_feats: rows.concat(),
            node_feat_dim,
            positions: self.nodes.iter().map(|n| n.pos).collect(),
            edges,
            edge_feats: Vec::new(),
            edge_feat_dim: EDGE_FEATURES,
            rel_vec: Vec::new(),
            dist: Vec::new(),
            labels: self.labels,
        };
        g.refresh_geometry();
        if let Some(e) = g.dist.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::Graph(format!("edge {e} joins coincident atoms")));
        }
        match self.edge_feats {
            Some(ef) => {
                if ef.len() != g.num_edges() {
                    return Err(Error::Graph(format!("{} edge feature rows for {} edges", ef.len(), g.num_edges())));
                }
                g.edge_feat_dim = ef.first().map_or(EDGE_FEATURES, |r| r.len());
                if ef.iter().any(|r| r.len() != g.edge_feat_dim) {
                    return Err(Error::Graph("edge feature rows differ in length".into()));
                }
                g.edge_feats = ef.concat();
            }
            None => g.edge_feats = g.dist.iter().flat_map(|&d| edge_features(d)).collect(),
        }
        Ok(g)
    }
}

pub fn graphs_to_json(graphs: &[MolGraph]) -> Result<String> {
    let docs: Vec<GraphDoc> = graphs.iter().map(GraphDoc::from).collect();
    Ok(serde_json::to_string_pretty(&docs)?)
}

/// Accepts either a single graph object or an array of them.
pub fn graphs_from_json(text: &str) -> Result<Vec<MolGraph>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let docs: Vec<GraphDoc> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    docs.into_iter().map(GraphDoc::into_graph).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{featurize, parse_xyz, EdgeRule};

    #[test]
    fn round_trip() {
        let mol = parse_xyz("3\nu0=-1.5\nC 0 0 0\nO 0 0 1.2\nH 0.9 0.3 -0.4").unwrap();
        let g = featurize(&mol, EdgeRule::Knn(1), &Default::default()).unwrap();
        let text = graphs_to_json(std::slice::from_ref(&g)).unwrap();
        let back = graphs_from_json(&text).unwrap();
        assert_eq!(back, vec![g]);
    }

    #[test]
    fn optional_fields_recomputed() {
        let text = r#"{"version":1,"nodes":[{"element":"H","pos":[0,0,0]},{"element":"H","pos":[0,0,0.74]}]}"#;
        let g = graphs_from_json(text).unwrap().remove(0);
        assert_eq!(g.edges, vec![(0, 1), (1, 0)]);
        assert_eq!(g.edge_row(1), &[1.0, 0.0, 0.0, 0.74]);
        assert_eq!(g.node_row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0 / 9.0]);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(graphs_from_json(r#"{"version":2,"nodes":[{"element":"H","pos":[0,0,0]}]}"#).is_err());
        assert!(graphs_from_json(r#"{"version":1,"nodes":[{"element":"H","pos":[0,0,0]}],"edges":[[0,3]]}"#).is_err());
        assert!(graphs_from_json(
            r#"{"version":1,"nodes":[{"element":"H","pos":[0,0,0]},{"element":"H","pos":[0,0,0]}]}"#
        )
        .is_err());
    }
}
