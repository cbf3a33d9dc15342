use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Model, ModelConfig, ModelKind};
use crate::cg::EdgeBasis;
use crate::graph::{featurize, random_molecule, EdgeRule, GraphBatch, MolGraph};
use crate::layers::{conjugate_kernel, pairwise_kernel, rotate_feature_values, GraphContext, Pooling, SkipKind};
use crate::so3::random_rotation;
use crate::tensor::{ParamStore, Tape, Tensor};
use crate::{Error, Result};

/// Name of the stage that checks the first layer's kernels directly.
pub const KERNEL_STAGE: &str = "pairwise_conv";

#[derive(Clone, Debug)]
pub struct EquivarianceOptions {
    pub model: ModelKind,
    pub atoms: usize,
    /// Number of feature degrees (`0..degrees`).
    pub degrees: u32,
    pub channels: usize,
    pub layers: usize,
    pub heads: usize,
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    /// Multiplies the edge basis by a direction-dependent factor, which must
    /// make the check fail. Negative control only.
    #[doc(hidden)]
    pub sabotage: bool,
}

impl Default for EquivarianceOptions {
    fn default() -> Self {
        EquivarianceOptions {
            model: ModelKind::Se3t,
            atoms: 8,
            degrees: 3,
            channels: 8,
            layers: 2,
            heads: 4,
            trials: 20,
            tol: 1e-4,
            seed: 0,
            sabotage: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageDeviation {
    pub stage: String,
    /// Largest relative deviation from the transformed reference over all trials.
    pub max_rel: f64,
}

#[derive(Clone, Debug)]
pub struct EquivarianceReport {
    pub trials: usize,
    pub tol: f64,
    /// Kernel check, internal layers in execution order, pooled features, then
    /// one entry per model output.
    pub stages: Vec<StageDeviation>,
}

impl EquivarianceReport {
    pub fn first_violation(&self) -> Option<&StageDeviation> {
        self.stages.iter().find(|s| !(s.max_rel <= self.tol))
    }

    pub fn passed(&self) -> bool {
        self.first_violation().is_none()
    }

    pub fn worst(&self) -> f64 {
        self.worst_stage().map_or(0.0, |s| s.max_rel)
    }

    /// The stage with the largest deviation; NaN counts as largest.
    pub fn worst_stage(&self) -> Option<&StageDeviation> {
        self.stages.iter().max_by(|a, b| match (a.max_rel.is_nan(), b.max_rel.is_nan()) {
            (true, true) => std::cmp::Ordering::Equal,
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            _ => a.max_rel.total_cmp(&b.max_rel),
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        if self.trials == 0 {
            s.push_str("no trials\n");
            return s;
        }
        let _ = writeln!(s, "{:<24} {:>12}", "stage", "max_rel_dev");
        for st in &self.stages {
            let flag = if st.max_rel <= self.tol { "ok" } else { "FAIL" };
            let _ = writeln!(s, "{:<24} {:>12.3e}  {flag}", st.stage, st.max_rel);
        }
        match self.first_violation() {
            None => {
                let _ = writeln!(s, "PASS: max deviation {:.3e} <= tol {:.1e} over {} trials", self.worst(), self.tol, self.trials);
            }
            Some(v) => {
                let _ = write!(s, "FAIL: stage {} deviates by {:.3e} > tol {:.1e}", v.stage, v.max_rel, self.tol);
                if let Some(w) = self.worst_stage().filter(|w| w.stage != v.stage) {
                    let _ = write!(s, "; largest deviation {:.3e} at {}", w.max_rel, w.stage);
                }
                s.push('\n');
            }
        }
        s
    }
}

struct Snapshot {
    kernels: Vec<Tensor>,
    stages: Vec<(String, BTreeMap<u32, Tensor>)>,
    pooled: Tensor,
    output: Tensor,
}

fn sabotage_basis(basis: &mut EdgeBasis, rel_vec: &[[f64; 3]]) {
    let factor: Vec<f64> = rel_vec
        .iter()
        .map(|v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            1.0 + 0.5 * v[0] / n
        })
        .collect();
    basis.scale_edges(&factor);
}

fn snapshot(model: &Model, params: &ParamStore, graph: &MolGraph, sabotage: bool) -> Result<Snapshot> {
    let batch = GraphBatch::new(&[graph])?;
    let mut tape = Tape::new();
    let mut basis = EdgeBasis::new(&batch.rel_vec, model.config().max_degree())?;
    if sabotage {
        sabotage_basis(&mut basis, &batch.rel_vec);
    }
    let ctx = GraphContext::with_basis(&mut tape, &batch, basis)?;
    let mut kernels = Vec::new();
    for conv in model.first_layer_convs() {
        let r = conv.radial_coefficients(&mut tape, params, &ctx)?;
        kernels.push(pairwise_kernel(tape.value(r), ctx.basis(), conv.key, conv.c_in, conv.c_out)?);
    }
    let trace = model.trace(&mut tape, params, &batch, &ctx)?;
    Ok(Snapshot {
        kernels,
        stages: trace.stages.iter().map(|(n, h)| (n.clone(), h.values(&tape))).collect(),
        pooled: tape.value(trace.pooled).clone(),
        output: tape.value(trace.output).clone(),
    })
}

fn rel(expected: &Tensor, got: &Tensor) -> f64 {
    expected.max_abs_diff(got) / expected.max_abs().max(1e-12)
}

/// Builds a random molecule and randomly initialised model, then compares
/// `f(g x)` with `g f(x)` for `trials` random rototranslations at every stage.
pub fn check_equivariance(opts: &EquivarianceOptions) -> Result<EquivarianceReport> {
    if opts.atoms < 2 {
        return Err(Error::Config("check-equivariance needs at least 2 atoms".into()));
    }
    let config = ModelConfig {
        num_layers: opts.layers,
        channels: opts.channels,
        num_degrees: opts.degrees,
        heads: opts.heads,
        pooling: Pooling::Max,
        skip: SkipKind::Cat,
        model: opts.model,
        tasks: 1,
        ..ModelConfig::default()
    };
    let mut report = EquivarianceReport { trials: opts.trials, tol: opts.tol, stages: Vec::new() };
    if opts.trials == 0 {
        return Ok(report);
    }
    let model = Model::new(&config)?;
    let params = model.init_params(opts.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mol = random_molecule(&mut rng, opts.atoms);
    let base = snapshot(&model, &params, &featurize(&mol, EdgeRule::Full, &Default::default())?, opts.sabotage)?;

    let convs = model.first_layer_convs();
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let mut bump = |name: &str, v: f64| {
        let e = worst.entry(name.to_string()).or_insert(0.0);
        *e = if v.is_nan() || e.is_nan() { f64::NAN } else { e.max(v) };
    };
    for _ in 0..opts.trials {
        let rot = random_rotation(&mut rng);
        let shift = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let moved = featurize(&mol.transformed(&rot, shift), EdgeRule::Full, &Default::default())?;
        let snap = snapshot(&model, &params, &moved, opts.sabotage)?;
        for ((k0, k1), conv) in base.kernels.iter().zip(&snap.kernels).zip(&convs) {
            bump(KERNEL_STAGE, rel(&conjugate_kernel(k0, conv.key, conv.c_in, conv.c_out, &rot), k1));
        }
        for ((name, h0), (_, h1)) in base.stages.iter().zip(&snap.stages) {
            let expected = rotate_feature_values(h0, &rot);
            let dev = expected.iter().map(|(d, t)| rel(t, &h1[d])).fold(0.0, f64::max);
            bump(name, dev);
        }
        bump("pooling", rel(&base.pooled, &snap.pooled));
        for (t, (a, b)) in base.output.data().iter().zip(snap.output.data()).enumerate() {
            bump(&format!("output[{t}]"), (a - b).abs() / a.abs().max(1e-12));
        }
    }
    let mut order = vec![KERNEL_STAGE.to_string()];
    order.extend(base.stages.iter().map(|(n, _)| n.clone()));
    order.push("pooling".into());
    order.extend((0..base.output.len()).map(|t| format!("output[{t}]")));
    report.stages = order.into_iter().map(|stage| StageDeviation { max_rel: worst[&stage], stage }).collect();
    Ok(report)
}
