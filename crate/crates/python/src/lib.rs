//! Python bindings: `import se3kit`.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use se3kit::graph::{self, EdgeRule, FeaturizerConfig, MolGraph};
use se3kit::models::{self, EquivarianceOptions, LabelStats, ModelConfig, ModelKind, SavedModel, TrainConfig};
use se3kit::so3::{self, EulerAngles, HarmonicIndexTable, SphericalCoord};

fn err(e: se3kit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = se3kit::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Real spherical harmonics of degree `l`, ordered by ascending `m`.
#[pyfunction]
fn spherical_harmonics(l: u32, theta: f64, phi: f64) -> PyResult<Vec<f64>> {
    let table = HarmonicIndexTable::new(l);
    let coord = SphericalCoord { r: 1.0, theta, phi };
    Ok(so3::real_spherical_harmonics(&table, l, &[coord]).map_err(err)?.remove(0))
}

#[pyfunction]
fn wigner_d(l: u32, alpha: f64, beta: f64, gamma: f64) -> Vec<Vec<f64>> {
    rows(&so3::wigner_d(l, EulerAngles::new(alpha, beta, gamma)).entries)
}

/// Clebsch-Gordan block `Q_J` for `D^k ⊗ D^l`, shape `(2J+1, (2k+1)(2l+1))`.
#[pyfunction]
fn basis_q(j: u32, k: u32, l: u32) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&se3kit::cg::basis_transformation_q_j(j, k, l).map_err(err)?.entries))
}

/// A featurised molecular graph.
#[pyclass(name = "Graph", module = "se3kit", from_py_object)]
#[derive(Clone)]
struct PyGraph(MolGraph);

#[pymethods]
impl PyGraph {
    #[getter]
    fn num_nodes(&self) -> usize {
        self.0.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.0.num_edges()
    }

    #[getter]
    fn elements(&self) -> Vec<String> {
        self.0.elements.clone()
    }

    #[getter]
    fn positions(&self) -> Vec<[f64; 3]> {
        self.0.positions.clone()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges.clone()
    }

    #[getter]
    fn labels(&self) -> std::collections::BTreeMap<String, f64> {
        self.0.labels.clone()
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.0.num_nodes(), self.0.num_edges())
    }
}

fn unwrap_graphs(graphs: &[PyGraph]) -> Vec<MolGraph> {
    graphs.iter().map(|g| g.0.clone()).collect()
}

/// Parses XYZ frames and builds graphs with `rule` (`full`, `knn:K`, `radius:C`).
#[pyfunction]
#[pyo3(signature = (xyz, rule = "full"))]
fn featurize(xyz: &str, rule: &str) -> PyResult<Vec<PyGraph>> {
    let rule: EdgeRule = parse(rule)?;
    let config = FeaturizerConfig::default();
    let mols = graph::parse_xyz_frames(xyz, &config.alphabet).map_err(err)?;
    mols.iter().map(|m| graph::featurize(m, rule, &config).map(PyGraph).map_err(err)).collect()
}

/// Random molecules labelled with the `pair_decay` target.
#[pyfunction]
#[pyo3(signature = (count, min_atoms = 2, max_atoms = 8, seed = 0))]
fn synthetic_graphs(count: usize, min_atoms: usize, max_atoms: usize, seed: u64) -> PyResult<Vec<PyGraph>> {
    if min_atoms == 0 || min_atoms > max_atoms {
        return Err(PyValueError::new_err("need 1 <= min_atoms <= max_atoms"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    graph::synthetic_dataset(&mut rng, count, min_atoms, max_atoms)
        .iter()
        .map(|m| graph::featurize(m, EdgeRule::Full, &FeaturizerConfig::default()).map(PyGraph).map_err(err))
        .collect()
}

#[pyfunction]
fn graphs_to_json(graphs: Vec<PyGraph>) -> PyResult<String> {
    graph::graphs_to_json(&unwrap_graphs(&graphs)).map_err(err)
}

#[pyfunction]
fn graphs_from_json(text: &str) -> PyResult<Vec<PyGraph>> {
    Ok(graph::graphs_from_json(text).map_err(err)?.into_iter().map(PyGraph).collect())
}

/// Model configuration, parameters and label scaling.
#[pyclass(name = "Model", module = "se3kit")]
struct PyModel(SavedModel);

#[pymethods]
impl PyModel {
    /// A freshly initialised model predicting `targets`.
    #[new]
    #[pyo3(signature = (targets, model = "se3t", num_layers = 2, channels = 8, num_degrees = 2, heads = 4, seed = 0))]
    fn new(
        targets: Vec<String>,
        model: &str,
        num_layers: usize,
        channels: usize,
        num_degrees: u32,
        heads: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let config = ModelConfig {
            model: parse(model)?,
            num_layers,
            channels,
            num_degrees,
            heads,
            tasks: targets.len(),
            ..ModelConfig::default()
        };
        let params = models::Model::new(&config).map_err(err)?.init_params(seed);
        let stats = LabelStats { mean: vec![0.0; targets.len()], std: vec![1.0; targets.len()], targets };
        Ok(PyModel(SavedModel::new(config, &stats, params)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        models::load_params(&path).map(PyModel).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        models::save_params(&path, &self.0).map_err(err)
    }

    #[getter]
    fn targets(&self) -> Vec<String> {
        self.0.targets.clone()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.0.params.num_scalars()
    }

    /// One row of predictions per graph, in label units.
    fn predict(&self, py: Python<'_>, graphs: Vec<PyGraph>) -> PyResult<Vec<Vec<f64>>> {
        let graphs = unwrap_graphs(&graphs);
        py.detach(|| models::predict(&self.0, &graphs, models::eval_threads())).map_err(err)
    }
}

/// Trains on `graphs` (all of them; split beforehand if needed) and returns
/// the model with the best validation error plus per-epoch metrics.
#[pyfunction]
#[pyo3(signature = (
    graphs, targets, validation = Vec::new(), model = "tfn", num_layers = 2, channels = 8, num_degrees = 2,
    heads = 4, epochs = 100, batch_size = 16, learning_rate = 1e-3, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    graphs: Vec<PyGraph>,
    targets: Vec<String>,
    validation: Vec<PyGraph>,
    model: &str,
    num_layers: usize,
    channels: usize,
    num_degrees: u32,
    heads: usize,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<(PyModel, Vec<(usize, f64, f64, f64)>)> {
    let kind: ModelKind = parse(model)?;
    let train_set = unwrap_graphs(&graphs);
    let val_set = unwrap_graphs(&validation);
    let config = ModelConfig { model: kind, num_layers, channels, num_degrees, heads, tasks: targets.len(), ..ModelConfig::default() };
    let tc = TrainConfig { epochs, batch_size, learning_rate, seed, ..TrainConfig::default() };
    let outcome = py
        .detach(|| models::train(&config, &tc, &train_set, &val_set, &targets, |_| {}))
        .map_err(err)?;
    let metrics = outcome.metrics.iter().map(|m| (m.epoch, m.train_loss, m.val_loss, m.wall_seconds)).collect();
    Ok((PyModel(SavedModel::new(config, &outcome.stats, outcome.params)), metrics))
}

/// Runs the rototranslation check on a random graph; returns
/// `(passed, [(stage, max_relative_deviation)], report_text)`.
#[pyfunction]
#[pyo3(signature = (model = "se3t", atoms = 8, degrees = 3, channels = 8, layers = 2, heads = 4, trials = 20, tol = 1e-4, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn check_equivariance(
    py: Python<'_>,
    model: &str,
    atoms: usize,
    degrees: u32,
    channels: usize,
    layers: usize,
    heads: usize,
    trials: usize,
    tol: f64,
    seed: u64,
) -> PyResult<(bool, Vec<(String, f64)>, String)> {
    let opts = EquivarianceOptions { model: parse(model)?, atoms, degrees, channels, layers, heads, trials, tol, seed, ..Default::default() };
    let report = py.detach(|| models::check_equivariance(&opts)).map_err(err)?;
    let stages = report.stages.iter().map(|s| (s.stage.clone(), s.max_rel)).collect();
    Ok((report.passed(), stages, report.render()))
}

#[pymodule]
#[pyo3(name = "se3kit")]
fn se3kit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(spherical_harmonics, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_d, m)?)?;
    m.add_function(wrap_pyfunction!(basis_q, m)?)?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_graphs, m)?)?;
    m.add_function(wrap_pyfunction!(graphs_to_json, m)?)?;
    m.add_function(wrap_pyfunction!(graphs_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(check_equivariance, m)?)?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
