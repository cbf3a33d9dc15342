use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::edges::{build_edges, EdgeRule};
use super::molecule::{atomic_number, Alphabet, Molecule};
use crate::{Error, Result};

/// Upper bounds of the first two distance buckets (angstrom); the third
/// bucket is open-ended.
pub const DISTANCE_BINS: [f64; 2] = [1.6, 3.2];
/// Atomic numbers are divided by this before entering the node features.
pub const ATOMIC_NUMBER_SCALE: f64 = 9.0;
pub const EDGE_FEATURES: usize = DISTANCE_BINS.len() + 2;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    #[serde(default)]
    pub alphabet: Alphabet,
}

impl FeaturizerConfig {
    pub fn node_feature_size(&self) -> usize {
        self.alphabet.len() + 1
    }
}

/// A featurised molecular graph.
///
/// Edge `(i, j)` carries `rel_vec = p_j - p_i` and node `i` aggregates over
/// its edges.
#[derive(Clone, Debug, PartialEq)]
pub struct MolGraph {
    pub elements: Vec<String>,
    /// `[N x F]` row-major
    pub node_feats: Vec<f64>,
    pub node_feat_dim: usize,
    /// angstrom
    pub positions: Vec<[f64; 3]>,
    pub edges: Vec<(usize, usize)>,
    /// `[E x F_e]` row-major
    pub edge_feats: Vec<f64>,
    pub edge_feat_dim: usize,
    pub rel_vec: Vec<[f64; 3]>,
    pub dist: Vec<f64>,
    pub labels: BTreeMap<String, f64>,
}

impl MolGraph {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_row(&self, i: usize) -> &[f64] {
        &self.node_feats[i * self.node_feat_dim..(i + 1) * self.node_feat_dim]
    }

    pub fn edge_row(&self, e: usize) -> &[f64] {
        &self.edge_feats[e * self.edge_feat_dim..(e + 1) * self.edge_feat_dim]
    }

    /// Rebuilds geometry-derived edge data from positions and the edge list.
    pub(crate) fn refresh_geometry(&mut self) {
        self.rel_vec = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (self.positions[i], self.positions[j]);
                [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
            })
            .collect();
        self.dist = self.rel_vec.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).collect();
    }

    /// Node `i` of the result is node `perm[i]` of `self`; edges are relabelled
    /// and kept in the same order.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        let n = self.num_nodes();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let f = self.node_feat_dim;
        let mut g = self.clone();
        g.elements = perm.iter().map(|&p| self.elements[p].clone()).collect();
        g.positions = perm.iter().map(|&p| self.positions[p]).collect();
        g.node_feats = perm.iter().flat_map(|&p| self.node_feats[p * f..(p + 1) * f].iter().copied()).collect();
        g.edges = self.edges.iter().map(|&(i, j)| (inv[i], inv[j])).collect();
        g
    }
}

pub fn edge_features(dist: f64) -> [f64; EDGE_FEATURES] {
    let bucket = DISTANCE_BINS.iter().position(|&b| dist < b).unwrap_or(DISTANCE_BINS.len());
    let mut out = [0.0; EDGE_FEATURES];
    out[bucket] = 1.0;
    out[EDGE_FEATURES - 1] = dist;
    out
}

pub fn node_features(element: &str, alphabet: &Alphabet) -> Result<Vec<f64>> {
    let idx = alphabet
        .index_of(element)
        .ok_or_else(|| Error::Graph(format!("element `{element}` not in the featuriser alphabet")))?;
    let z = atomic_number(element).expect("alphabet symbols are validated") as f64;
    let mut row = vec![0.0; alphabet.len() + 1];
    row[idx] = 1.0;
    row[alphabet.len()] = z / ATOMIC_NUMBER_SCALE;
    Ok(row)
}

/// Node features: element one-hot plus `Z / 9`. Edge features: one-hot
/// distance bucket plus the raw distance.
pub fn featurize(mol: &Molecule, rule: EdgeRule, config: &FeaturizerConfig) -> Result<MolGraph> {
    if mol.is_empty() {
        return Err(Error::Graph("molecule has no atoms".into()));
    }
    let edges = build_edges(mol, rule)?;
    let mut node_feats = Vec::with_capacity(mol.len() * config.node_feature_size());
    for a in &mol.atoms {
        node_feats.extend(node_features(&a.element, &config.alphabet)?);
    }
    let mut g = MolGraph {
        elements: mol.atoms.iter().map(|a| a.element.clone()).collect(),
        node_feats,
        node_feat_dim: config.node_feature_size(),
        positions: mol.atoms.iter().map(|a| a.position).collect(),
        edges: edges.pairs,
        edge_feats: Vec::new(),
        edge_feat_dim: EDGE_FEATURES,
        rel_vec: Vec::new(),
        dist: Vec::new(),
        labels: mol.labels.clone(),
    };
    g.refresh_geometry();
    g.edge_feats = g.dist.iter().flat_map(|&d| edge_features(d)).collect();
    Ok(g)
}
