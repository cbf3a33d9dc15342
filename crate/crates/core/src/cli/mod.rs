//! The `se3kit` command line.
//!
//! Exit codes: 0 on success, 1 when the library reports an error or an
//! equivariance check fails, 2 on usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cg::basis_transformation_q_j;
use crate::graph::{featurize, graphs_from_json, graphs_to_json, parse_xyz_frames, EdgeRule, FeaturizerConfig, MolGraph};
use crate::models::{
    check_equivariance, common_targets, eval_threads, load_params, metrics_csv, predict, save_params, split_dataset,
    train, EquivarianceOptions, Model, ModelConfig, ModelKind, SavedModel, TrainConfig,
};
use crate::so3::{get_spherical_from_cartesian, wigner_d, EulerAngles, HarmonicIndexTable, SphericalCoord};
use crate::{Error, Result};


#[derive(Debug, Parser)]
#[command(name = "se3kit", version, about = "SE(3)-equivariant graph networks")]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one real spherical harmonic Y_l^m(theta, phi).
    Sh {
        #[arg(long)]
        l: u32,
        #[arg(long, allow_hyphen_values = true)]
        m: i32,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
    },
    /// Print the Wigner-D matrix D^l(alpha, beta, gamma), one row per line.
    Wigner {
        #[arg(long)]
        l: u32,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
    },
    /// Dump every Clebsch-Gordan block Q_J with k, l <= D as JSON.
    Basis {
        #[arg(long)]
        max_degree: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn XYZ frames into graph JSON.
    Featurize {
        #[arg(long = "in")]
        input: PathBuf,
        /// full, knn:K or radius:C
        #[arg(long, default_value = "full")]
        rule: EdgeRule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that predictions and internal features transform correctly
    /// under random rototranslations.
    CheckEquivariance(CheckArgs),
    /// Train a model; the data is split 80/10/10 into train, validation and test.
    Train {
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        data: PathBuf,
        /// JSON with optional "model" and "train" sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Predict every graph in a file as CSV.
    Predict {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, default_value = "se3t")]
    model: ModelKind,
    #[arg(long, default_value_t = 8)]
    atoms: usize,
    /// Number of feature degrees.
    #[arg(long, default_value_t = 3)]
    degrees: u32,
    #[arg(long, default_value_t = 8)]
    channels: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[cfg(any(test, feature = "sabotage"))]
    #[arg(long, hide = true)]
    sabotage: bool,
}

/// Contents of `train --config`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

enum Failure {
    Usage(String),
    Domain(Error),
    /// The command ran but its check did not pass; the report is already printed.
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(e.into())
    }
}

/// Runs the command line with process stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Runs the command line, writing results to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
        Err(Failure::Check) => 1,
    }
}

#[allow(clippy::needless_update)]
fn dispatch(cli: Cli, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Sh { l, m, theta, phi } => {
            if m.unsigned_abs() > l {
                return Err(Failure::Usage(format!("--m {m} is outside -{l}..={l}")));
            }
            let value = sh_value(l, m, theta, phi)?;
            writeln!(out, "{}", fmt_sig(value))?;
        }
        Command::Wigner { l, alpha, beta, gamma } => {
            write!(out, "{}", format_matrix(&wigner_d(l, EulerAngles::new(alpha, beta, gamma)).entries))?;
        }
        Command::Basis { max_degree, out: path } => {
            let doc = basis_json(max_degree)?;
            emit(out, path.as_deref(), &doc)?;
        }
        Command::Featurize { input, rule, out: path } => {
            let config = FeaturizerConfig::default();
            let text = read(&input)?;
            let graphs = parse_xyz_frames(&text, &config.alphabet)?
                .iter()
                .map(|m| featurize(m, rule, &config))
                .collect::<Result<Vec<_>>>()?;
            emit(out, path.as_deref(), &(graphs_to_json(&graphs)? + "\n"))?;
        }
        Command::CheckEquivariance(args) => {
            let opts = EquivarianceOptions {
                model: args.model,
                atoms: args.atoms,
                degrees: args.degrees,
                channels: args.channels,
                layers: args.layers,
                heads: args.heads,
                trials: args.trials,
                tol: args.tol,
                seed: seed.unwrap_or(0),
                #[cfg(any(test, feature = "sabotage"))]
                sabotage: args.sabotage,
                ..EquivarianceOptions::default()
            };
            if opts.atoms < 2 {
                return Err(Failure::Usage("--atoms must be at least 2".into()));
            }
            let report = check_equivariance(&opts)?;
            write!(out, "{}", report.render())?;
            if !report.passed() {
                return Err(Failure::Check);
            }
        }
        Command::Train { model, data, config, out: path, metrics } => {
            let mut file: TrainFile = match &config {
                Some(p) => serde_json::from_str(&read(p)?).map_err(Error::from)?,
                None => TrainFile::default(),
            };
            if let Some(kind) = model {
                file.model.model = kind;
            }
            if let Some(s) = seed {
                file.train.seed = s;
            }
            let summary = run_train(&file, &read_graphs(&data)?, &path, metrics.as_deref())?;
            write!(out, "{summary}")?;
        }
        Command::Predict { params, data, out: path } => {
            let saved = load_params(&params)?;
            let graphs = read_graphs(&data)?;
            let rows = predict(&saved, &graphs, eval_threads())?;
            emit(out, path.as_deref(), &predictions_csv(&saved.targets, &rows))?;
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_graphs(path: &Path) -> Result<Vec<MolGraph>> {
    graphs_from_json(&read(path)?)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sh_value(l: u32, m: i32, theta: f64, phi: f64) -> Result<f64> {
    let table = HarmonicIndexTable::new(l);
    // round trip through Cartesian so out-of-range angles are normalised
    let coord = get_spherical_from_cartesian(SphericalCoord { r: 1.0, theta, phi }.to_cartesian());
    let all = table.eval_all(l, &coord)?;
    Ok(all[HarmonicIndexTable::index(l, m)])
}

/// `%.12g`-style formatting.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..12).contains(&exp) {
        let s = trim(format!("{:.*}", (11 - exp).max(0) as usize, v));
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{v:.11e}");
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        format!("{}e{e}", trim(mant.to_string()))
    }
}

fn format_matrix(m: &nalgebra::DMatrix<f64>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_sig(m[(r, c)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// `{"J,k,l": row-major entries}` for all `k, l <= max_degree`.
pub fn basis_json(max_degree: u32) -> Result<String> {
    let mut doc = BTreeMap::new();
    for k in 0..=max_degree {
        for l in 0..=max_degree {
            for j in k.abs_diff(l)..=k + l {
                let q = basis_transformation_q_j(j, k, l)?;
                let e = &q.entries;
                let flat: Vec<f64> = (0..e.nrows()).flat_map(|r| (0..e.ncols()).map(move |c| e[(r, c)])).collect();
                doc.insert(format!("{j},{k},{l}"), flat);
            }
        }
    }
    Ok(serde_json::to_string(&doc)? + "\n")
}

fn run_train(file: &TrainFile, graphs: &[MolGraph], out: &Path, metrics: Option<&Path>) -> Result<String> {
    let first = graphs.first().ok_or_else(|| Error::Training("no graphs in the data file".into()))?;
    let targets = common_targets(graphs);
    if targets.is_empty() {
        return Err(Error::Training("the graphs share no labels to train on".into()));
    }
    let mut cfg = file.model.clone();
    cfg.tasks = targets.len();
    cfg.node_features = first.node_feat_dim;
    cfg.edge_features = first.edge_feat_dim;
    let split = split_dataset(graphs.len(), file.train.seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| graphs[i].clone()).collect::<Vec<_>>();
    let (train_set, val_set, test_set) = (pick(&split.train), pick(&split.val), pick(&split.test));

    let outcome = train(&cfg, &file.train, &train_set, &val_set, &targets, |_| {})?;
    let saved = SavedModel::new(cfg, &outcome.stats, outcome.params);
    save_params(out, &saved)?;
    if let Some(p) = metrics {
        std::fs::write(p, metrics_csv(&outcome.metrics))?;
    }

    let mut summary = String::new();
    if let Some(last) = outcome.metrics.last() {
        let best = outcome.metrics.iter().map(|m| m.val_loss).fold(f64::INFINITY, f64::min);
        let _ = writeln!(summary, "epochs {}: train MAE {:.6}, best val MAE {best:.6}", last.epoch, last.train_loss);
    }
    if !test_set.is_empty() {
        let model = Model::new(&saved.config)?;
        let refs: Vec<&MolGraph> = test_set.iter().collect();
        let mae = crate::models::evaluate_mae(&model, &saved.params, &saved.stats(), &refs)?;
        let _ = writeln!(summary, "test MAE {mae:.6} over {} graphs", test_set.len());
    }
    Ok(summary)
}

fn predictions_csv(targets: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = String::from("graph");
    for t in targets {
        s.push(',');
        s.push_str(t);
    }
    s.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{i},{}", cells.join(","));
    }
    s
}
