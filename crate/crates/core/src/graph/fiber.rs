use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Degree -> channel multiplicity of an equivariant feature map.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fiber(BTreeMap<u32, usize>);

impl Fiber {
    pub fn new(pairs: impl IntoIterator<Item = (u32, usize)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (d, c) in pairs {
            if c == 0 {
                return Err(Error::Config(format!("degree {d} has zero channels")));
            }
            if map.insert(d, c).is_some() {
                return Err(Error::Config(format!("degree {d} listed twice")));
            }
        }
        Ok(Fiber(map))
    }

    /// Degrees `0..num_degrees`, each with `channels` channels.
    pub fn uniform(num_degrees: u32, channels: usize) -> Self {
        Fiber((0..num_degrees).map(|d| (d, channels)).collect())
    }

    pub fn scalar(channels: usize) -> Self {
        Fiber(BTreeMap::from([(0, channels)]))
    }

    pub fn degrees(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.0.iter().map(|(d, c)| (*d, *c))
    }

    pub fn channels(&self, degree: u32) -> Option<usize> {
        self.0.get(&degree).copied()
    }

    pub fn contains(&self, degree: u32) -> bool {
        self.0.contains_key(&degree)
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.0.keys().next_back().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of scalars per node: `sum_d c_d (2d+1)`.
    pub fn total_dim(&self) -> usize {
        self.0.iter().map(|(d, c)| c * (2 * *d as usize + 1)).sum()
    }

    /// Same degrees as `self` that also appear in `other`, with `self`'s channels.
    pub fn restricted_to(&self, other: &Fiber) -> Fiber {
        Fiber(self.0.iter().filter(|(d, _)| other.contains(**d)).map(|(d, c)| (*d, *c)).collect())
    }

    /// Channel-wise concatenation: channel counts add on shared degrees.
    pub fn concat(&self, other: &Fiber) -> Fiber {
        let mut map = self.0.clone();
        for (d, c) in &other.0 {
            *map.entry(*d).or_insert(0) += c;
        }
        Fiber(map)
    }
}

impl fmt::Display for Fiber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(d, c)| format!("{d}:{c}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_dims() {
        let f = Fiber::uniform(3, 4);
        assert_eq!(f.degrees().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(f.total_dim(), 4 * (1 + 3 + 5));
        assert!(Fiber::new([(0, 0)]).is_err());
        assert!(Fiber::new([(1, 2), (1, 3)]).is_err());
        assert_eq!(Fiber::scalar(6).to_string(), "{0:6}");
    }

    #[test]
    fn concat_and_restrict() {
        let a = Fiber::uniform(2, 3);
        let b = Fiber::scalar(6);
        assert_eq!(a.concat(&b), Fiber::new([(0, 9), (1, 3)]).unwrap());
        assert_eq!(a.restricted_to(&b), Fiber::scalar(3));
    }
}
