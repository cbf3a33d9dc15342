use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabelStats, Model, ModelConfig};
use crate::graph::MolGraph;
use crate::tensor::ParamStore;
use crate::{Error, Result};

/// Everything needed to rebuild a trained model and undo label standardisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub config: ModelConfig,
    pub targets: Vec<String>,
    pub label_mean: Vec<f64>,
    pub label_std: Vec<f64>,
    pub params: ParamStore,
}

impl SavedModel {
    pub fn new(config: ModelConfig, stats: &LabelStats, params: ParamStore) -> Self {
        SavedModel {
            config,
            targets: stats.targets.clone(),
            label_mean: stats.mean.clone(),
            label_std: stats.std.clone(),
            params,
        }
    }

    pub fn stats(&self) -> LabelStats {
        LabelStats { targets: self.targets.clone(), mean: self.label_mean.clone(), std: self.label_std.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks every tensor against the shapes `config` implies.
    pub fn from_json(text: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(text)?;
        saved.validate()?;
        Ok(saved)
    }

    pub fn validate(&self) -> Result<()> {
        let model = Model::new(&self.config)?;
        self.params.check_compatible(&model.param_template())?;
        let t = self.config.tasks;
        if self.targets.len() != t || self.label_mean.len() != t || self.label_std.len() != t {
            return Err(Error::Config(format!("label statistics do not cover the {t} model tasks")));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(&self.config)
    }

    /// Predictions in label units for one graph.
    pub fn predict(&self, model: &Model, graph: &MolGraph) -> Result<Vec<f64>> {
        Ok(self.stats().restore(&model.predict_one(&self.params, graph)?))
    }
}

pub fn save_params(path: &Path, saved: &SavedModel) -> Result<()> {
    std::fs::write(path, saved.to_json()?)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<SavedModel> {
    SavedModel::from_json(&std::fs::read_to_string(path)?)
}
