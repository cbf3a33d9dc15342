use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::molecule::Molecule;
use crate::{Error, Result};

/// Neighbourhood rule. An edge `(i, j)` means node `i` receives messages
/// from its neighbour `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum EdgeRule {
    /// All ordered pairs `i != j`.
    #[default]
    Full,
    /// Each node's `k` nearest other nodes, ties broken by lower index.
    Knn(usize),
    /// Pairs within the cutoff distance (angstrom), inclusive.
    Radius(f64),
}

impl FromStr for EdgeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("edge rule `{s}` is not one of full, knn:K, radius:C"));
        match s.split_once(':') {
            None if s == "full" => Ok(EdgeRule::Full),
            Some(("knn", k)) => k.parse().map(EdgeRule::Knn).map_err(|_| bad()),
            Some(("radius", c)) => c.parse().ok().filter(|c: &f64| *c >= 0.0).map(EdgeRule::Radius).ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for EdgeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeRule::Full => write!(f, "full"),
            EdgeRule::Knn(k) => write!(f, "knn:{k}"),
            EdgeRule::Radius(c) => write!(f, "radius:{c}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeList {
    pub pairs: Vec<(usize, usize)>,
    /// Nodes that receive no messages.
    pub isolated: Vec<usize>,
}

pub fn build_edges(mol: &Molecule, rule: EdgeRule) -> Result<EdgeList> {
    let n = mol.len();
    let mut pairs = Vec::new();
    match rule {
        EdgeRule::Full => {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    pairs.push((i, j));
                }
            }
        }
        EdgeRule::Knn(k) => {
            if k >= n {
                return Err(Error::Graph(format!("knn with k = {k} needs more than {n} atoms")));
            }
            for i in 0..n {
                let mut others: Vec<(f64, usize)> =
                    (0..n).filter(|&j| j != i).map(|j| (mol.distance(i, j), j)).collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                pairs.extend(others.into_iter().take(k).map(|(_, j)| (i, j)));
            }
        }
        EdgeRule::Radius(cutoff) => {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    if mol.distance(i, j) <= cutoff {
                        pairs.push((i, j));
                    }
                }
            }
        }
    }
    let mut has_edge = vec![false; n];
    for &(i, _) in &pairs {
        has_edge[i] = true;
    }
    let isolated: Vec<usize> = (0..n).filter(|&i| !has_edge[i]).collect();
    if n > 1 && !isolated.is_empty() {
        log::warn!("{} of {n} nodes have no neighbours under rule {rule}", isolated.len());
    }
    Ok(EdgeList { pairs, isolated })
}
