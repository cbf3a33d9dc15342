use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LossKind, Model, ModelConfig, TrainConfig};
use crate::graph::{GraphBatch, MolGraph};
use crate::tensor::{Gradients, ParamStore, Tape, Tensor};
use crate::{Error, Result};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(config: &TrainConfig) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
            step: 0,
            m: Gradients::new(),
            v: Gradients::new(),
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self.m.entry(name.to_string()).or_insert_with(|| Tensor::zeros(g.shape()));
            let v = self.v.entry(name.to_string()).or_insert_with(|| Tensor::zeros(g.shape()));
            for (((pi, gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                *pi -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Index sets of an 80/10/10 split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n` into 80% train, 10% validation and 10% test
/// (rounded down for validation and test).
pub fn split_dataset(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = n / 10;
    let n_test = n / 10;
    let test = idx.split_off(n - n_test);
    let val = idx.split_off(n - n_test - n_val);
    Split { train: idx, val, test }
}

/// Per-task mean and standard deviation used to standardise labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub targets: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LabelStats {
    /// Statistics of `targets` over `graphs`; a zero spread falls back to 1.
    pub fn fit(graphs: &[&MolGraph], targets: &[String]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Training("empty dataset".into()));
        }
        let mut mean = Vec::with_capacity(targets.len());
        let mut std = Vec::with_capacity(targets.len());
        for t in targets {
            let vals = graphs.iter().map(|g| label(g, t)).collect::<Result<Vec<_>>>()?;
            let mu = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / vals.len() as f64;
            mean.push(mu);
            std.push(if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 });
        }
        Ok(LabelStats { targets: targets.to_vec(), mean, std })
    }

    pub fn standardise(&self, graph: &MolGraph) -> Result<Vec<f64>> {
        self.targets.iter().enumerate().map(|(k, t)| Ok((label(graph, t)? - self.mean[k]) / self.std[k])).collect()
    }

    pub fn restore(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().enumerate().map(|(k, v)| v * self.std[k] + self.mean[k]).collect()
    }
}

fn label(graph: &MolGraph, target: &str) -> Result<f64> {
    graph.labels.get(target).copied().ok_or_else(|| Error::Training(format!("graph has no label `{target}`")))
}

/// Label names shared by every graph, sorted.
pub fn common_targets(graphs: &[MolGraph]) -> Vec<String> {
    let Some(first) = graphs.first() else { return Vec::new() };
    first.labels.keys().filter(|k| graphs.iter().all(|g| g.labels.contains_key(*k))).cloned().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean absolute error in label units, accumulated over the epoch's batches.
    pub train_loss: f64,
    /// Mean absolute error in label units on the validation set after the epoch.
    pub val_loss: f64,
    pub wall_seconds: f64,
}

pub struct TrainOutcome {
    /// Parameters with the lowest validation error.
    pub params: ParamStore,
    pub stats: LabelStats,
    pub metrics: Vec<EpochMetrics>,
}

/// Mean absolute error of the model in label units over `graphs`.
pub fn evaluate_mae(model: &Model, params: &ParamStore, stats: &LabelStats, graphs: &[&MolGraph]) -> Result<f64> {
    if graphs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for g in graphs {
        let pred = stats.restore(&model.predict_one(params, g)?);
        for (k, t) in stats.targets.iter().enumerate() {
            total += (pred[k] - label(g, t)?).abs();
        }
    }
    Ok(total / (graphs.len() * stats.targets.len()) as f64)
}

/// Trains with Adam on `train`, selecting the parameters with the lowest MAE
/// on `val` (on `train` itself when `val` is empty).
///
/// `on_epoch` sees every epoch's metrics as they are produced.
pub fn train(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    train: &[MolGraph],
    val: &[MolGraph],
    targets: &[String],
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    train_config.validate()?;
    if train.is_empty() {
        return Err(Error::Training("empty dataset".into()));
    }
    if targets.len() != model_config.tasks {
        return Err(Error::Config(format!("{} targets given for a model with {} tasks", targets.len(), model_config.tasks)));
    }
    let model = Model::new(model_config)?;
    let train_refs: Vec<&MolGraph> = train.iter().collect();
    let val_refs: Vec<&MolGraph> = if val.is_empty() { train.iter().collect() } else { val.iter().collect() };
    let stats = LabelStats::fit(&train_refs, targets)?;
    let standardised = train.iter().map(|g| stats.standardise(g)).collect::<Result<Vec<_>>>()?;

    let mut params = model.init_params(train_config.seed);
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut adam = Adam::new(train_config);
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut metrics = Vec::with_capacity(train_config.epochs);
    let start = Instant::now();

    for epoch in 1..=train_config.epochs {
        order.shuffle(&mut rng);
        let mut abs_err = 0.0;
        for (b, chunk) in order.chunks(train_config.batch_size).enumerate() {
            let graphs: Vec<&MolGraph> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = GraphBatch::new(&graphs)?;
            let target_vals: Vec<f64> = chunk.iter().flat_map(|&i| standardised[i].iter().copied()).collect();
            let target = Tensor::new(vec![chunk.len(), targets.len()], target_vals)?;
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &params, &batch)?;
            let loss = match train_config.loss {
                LossKind::Mae => tape.mae_loss(out, &target)?,
                LossKind::Mse => tape.mse_loss(out, &target)?,
            };
            let loss_value = tape.value(loss).item();
            if !loss_value.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, batch {b}; parameter norm {:e}",
                    params.global_norm()
                )));
            }
            for (row, p) in tape.value(out).data().chunks(targets.len()).zip(target.data().chunks(targets.len())) {
                abs_err += row.iter().zip(p).enumerate().map(|(k, (a, t))| (a - t).abs() * stats.std[k]).sum::<f64>();
            }
            let grads = tape.backward(loss)?;
            adam.step(&mut params, &grads);
        }
        let train_loss = abs_err / (train.len() * targets.len()) as f64;
        let val_loss = evaluate_mae(&model, &params, &stats, &val_refs)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite validation error after epoch {epoch}; parameter norm {:e}",
                params.global_norm()
            )));
        }
        if val_loss < best_val {
            best_val = val_loss;
            best = params.clone();
        }
        let m = EpochMetrics { epoch, train_loss, val_loss, wall_seconds: start.elapsed().as_secs_f64() };
        log::info!("epoch {epoch}: train MAE {train_loss:.6}, val MAE {val_loss:.6}");
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome { params: best, stats, metrics })
}

/// `epoch,train_loss,val_loss,wall_seconds` CSV.
pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,wall_seconds\n");
    for m in metrics {
        s.push_str(&format!("{},{},{},{:.3}\n", m.epoch, m.train_loss, m.val_loss, m.wall_seconds));
    }
    s
}
