use std::collections::BTreeMap;

use super::basis_transformation_q_j;
use crate::graph::MolGraph;
use crate::so3::{get_spherical_from_cartesian, HarmonicIndexTable};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Input degree `d_in` (k) and output degree `d_out` (l) of a kernel block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisKey {
    pub d_in: u32,
    pub d_out: u32,
}

impl BasisKey {
    pub fn new(d_in: u32, d_out: u32) -> Self {
        BasisKey { d_in, d_out }
    }

    /// Number of coupled degrees `J` in `|k-l|..=k+l`.
    pub fn n_j(&self) -> usize {
        (2 * self.d_in.min(self.d_out) + 1) as usize
    }

    pub fn j_range(&self) -> std::ops::RangeInclusive<u32> {
        self.d_in.abs_diff(self.d_out)..=self.d_in + self.d_out
    }
}

/// Per-edge angular kernel basis.
///
/// For key `(k, l)` the tensor `angular(key)` has shape
/// `[E, 2l+1, 2k+1, n_J]`; slice `J` of edge `e` is `Q_J^T Y_J(r_e)` reshaped,
/// where `Q_J` couples `D^l ⊗ D^k`. The kernel built from it obeys
/// `K(R r) = D^l(R) K(r) D^k(R)^T`.
#[derive(Clone, Debug)]
pub struct EdgeBasis {
    max_degree: u32,
    num_edges: usize,
    angular: BTreeMap<BasisKey, Tensor>,
    conv: BTreeMap<BasisKey, Tensor>,
    dist: Vec<f64>,
}

impl EdgeBasis {
    /// Builds the basis for feature degrees `0..=max_degree` from relative
    /// position vectors.
    pub fn new(rel_vec: &[[f64; 3]], max_degree: u32) -> Result<Self> {
        let num_edges = rel_vec.len();
        let coords: Vec<_> = rel_vec.iter().map(|v| get_spherical_from_cartesian(*v)).collect();
        if let Some(e) = coords.iter().position(|c| !(c.r > 0.0)) {
            return Err(Error::Graph(format!("edge {e} has zero length")));
        }
        let jmax = 2 * max_degree;
        let table = HarmonicIndexTable::new(jmax);
        let harmonics = coords.iter().map(|c| table.eval_all(jmax, c)).collect::<Result<Vec<_>>>()?;

        let mut angular = BTreeMap::new();
        let mut conv = BTreeMap::new();
        for k in 0..=max_degree {
            for l in 0..=max_degree {
                let key = BasisKey::new(k, l);
                let (dk, dl, nj) = ((2 * k + 1) as usize, (2 * l + 1) as usize, key.n_j());
                let mut ang = vec![0.0; num_edges * dl * dk * nj];
                let mut cv = vec![0.0; num_edges * dk * nj * dl];
                for (ji, j) in key.j_range().enumerate() {
                    let q = basis_transformation_q_j(j, l, k)?;
                    let y_off = (j * j) as usize;
                    let dj = (2 * j + 1) as usize;
                    for (e, y) in harmonics.iter().enumerate() {
                        let y = &y[y_off..y_off + dj];
                        for a in 0..dl {
                            for b in 0..dk {
                                let col = a * dk + b;
                                let v: f64 = (0..dj).map(|m| q.entries[(m, col)] * y[m]).sum();
                                ang[((e * dl + a) * dk + b) * nj + ji] = v;
                                cv[(e * dk + b) * nj * dl + ji * dl + a] = v;
                            }
                        }
                    }
                }
                angular.insert(key, Tensor::new(vec![num_edges, dl, dk, nj], ang)?);
                conv.insert(key, Tensor::new(vec![num_edges, dk, nj * dl], cv)?);
            }
        }
        Ok(EdgeBasis { max_degree, num_edges, angular, conv, dist: coords.iter().map(|c| c.r).collect() })
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn keys(&self) -> impl Iterator<Item = BasisKey> + '_ {
        self.angular.keys().copied()
    }

    /// `[E, 2l+1, 2k+1, n_J]`
    pub fn angular(&self, key: BasisKey) -> Result<&Tensor> {
        self.angular
            .get(&key)
            .ok_or_else(|| Error::Layer(format!("basis has no key ({}, {})", key.d_in, key.d_out)))
    }

    /// Same values laid out as `[E, 2k+1, n_J * (2l+1)]` for applying kernels
    /// to degree-`k` features without materialising the kernel.
    pub fn conv_layout(&self, key: BasisKey) -> Result<&Tensor> {
        self.conv
            .get(&key)
            .ok_or_else(|| Error::Layer(format!("basis has no key ({}, {})", key.d_in, key.d_out)))
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    /// Multiplies every basis entry of edge `e` by `factor[e]`. Only used to
    /// build a deliberately broken basis for negative-control checks.
    #[doc(hidden)]
    pub fn scale_edges(&mut self, factor: &[f64]) {
        for t in self.angular.values_mut().chain(self.conv.values_mut()) {
            let row = t.row_len();
            for (e, chunk) in t.data_mut().chunks_mut(row.max(1)).enumerate() {
                chunk.iter_mut().for_each(|v| *v *= factor[e]);
            }
        }
    }
}

/// Angular basis and distances of every edge of `graph`, for feature degrees
/// up to `max_degree`.
pub fn get_equivariant_basis(graph: &MolGraph, max_degree: u32) -> Result<EdgeBasis> {
    if graph.num_edges() == 0 {
        return Err(Error::Graph("graph has no edges".into()));
    }
    EdgeBasis::new(&graph.rel_vec, max_degree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_scalar_block() {
        let b = EdgeBasis::new(&[[0.0, 0.0, 1.3]], 1).unwrap();
        let t = b.angular(BasisKey::new(0, 0)).unwrap();
        assert_eq!(t.shape(), &[1, 1, 1, 1]);
        assert!((t.data()[0] - 0.282_094_791_773_878_14).abs() < 1e-12);
        assert_eq!(b.dist(), &[1.3]);
    }

    #[test]
    fn shapes_for_four_degrees() {
        let b = EdgeBasis::new(&[[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]], 3).unwrap();
        assert_eq!(b.keys().count(), 16);
        for key in b.keys() {
            let (k, l) = (key.d_in as usize, key.d_out as usize);
            let nj = k + l - k.abs_diff(l) + 1;
            assert_eq!(b.angular(key).unwrap().shape(), &[2, 2 * l + 1, 2 * k + 1, nj]);
            assert_eq!(b.conv_layout(key).unwrap().shape(), &[2, 2 * k + 1, nj * (2 * l + 1)]);
        }
    }

    #[test]
    fn rejects_zero_length_edge() {
        assert!(EdgeBasis::new(&[[0.0, 0.0, 0.0]], 1).is_err());
    }

    #[test]
    fn bit_identical_for_identical_geometry() {
        let a = EdgeBasis::new(&[[0.3, -0.2, 0.9], [0.3, -0.2, 0.9]], 2).unwrap();
        for key in a.keys() {
            let t = a.angular(key).unwrap();
            let row = t.row_len();
            assert_eq!(t.data()[..row], t.data()[row..]);
        }
    }
}
