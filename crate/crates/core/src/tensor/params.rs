use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

/// Named trainable tensors. Serialises as `{"name": {"shape": [...], "values": [...]}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
}

/// Gradients keyed by parameter name, same layout as [`ParamStore`].
pub type Gradients = BTreeMap<String, Tensor>;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.params.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params.get(name).ok_or_else(|| Error::Param { name: name.into(), msg: "not found".into() })
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalars across all tensors.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Euclidean norm over every scalar, used in training diagnostics.
    pub fn global_norm(&self) -> f64 {
        self.params.values().map(|t| t.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Checks that `self` has exactly the names and shapes of `reference`.
    pub fn check_compatible(&self, reference: &ParamStore) -> Result<()> {
        for (name, want) in &reference.params {
            match self.params.get(name) {
                None => return Err(Error::Param { name: name.clone(), msg: "missing".into() }),
                Some(t) if t.shape() != want.shape() => {
                    return Err(Error::Param {
                        name: name.clone(),
                        msg: format!("shape {:?}, expected {:?}", t.shape(), want.shape()),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.params.keys().find(|k| !reference.params.contains_key(*k)) {
            return Err(Error::Param { name: extra.clone(), msg: "unexpected parameter".into() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_layout_and_round_trip() {
        let mut p = ParamStore::new();
        p.insert("w", Tensor::new(vec![1, 2], vec![0.1, -3.0]).unwrap());
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"w":{"shape":[1,2],"values":[0.1,-3.0]}}"#);
        let back: ParamStore = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }

    #[test]
    fn compatibility_names_offender() {
        let mut a = ParamStore::new();
        a.insert("a", Tensor::zeros(&[2]));
        a.insert("b", Tensor::zeros(&[3]));
        let mut b = a.clone();
        b.insert("b", Tensor::zeros(&[4]));
        match b.check_compatible(&a) {
            Err(Error::Param { name, .. }) => assert_eq!(name, "b"),
            other => panic!("{other:?}"),
        }
        assert!(a.check_compatible(&a).is_ok());
    }
}
