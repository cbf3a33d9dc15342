use super::SavedModel;
use crate::graph::MolGraph;
use crate::Result;

/// Environment variable capping evaluation threads.
pub const THREADS_ENV: &str = "SE3KIT_THREADS";

/// Thread count from `SE3KIT_THREADS`, else the available parallelism.
pub fn eval_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Predictions in label units, one row per graph. Graphs are split into
/// contiguous chunks across `threads` workers sharing the parameters; each
/// graph is evaluated on its own, so results do not depend on `threads`.
pub fn predict(saved: &SavedModel, graphs: &[MolGraph], threads: usize) -> Result<Vec<Vec<f64>>> {
    let model = saved.model()?;
    let threads = threads.clamp(1, graphs.len().max(1));
    let chunk = graphs.len().div_ceil(threads).max(1);
    let parts: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|s| {
        let handles: Vec<_> = graphs
            .chunks(chunk)
            .map(|part| {
                let model = &model;
                s.spawn(move || part.iter().map(|g| saved.predict(model, g)).collect::<Result<Vec<_>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("prediction worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(graphs.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
