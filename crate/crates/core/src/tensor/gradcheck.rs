use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamStore, Tape, Var};
use crate::Result;

/// Largest number of coordinates [`finite_diff_check`] perturbs.
pub const FD_MAX_COORDS: usize = 200;
const FD_SEED: u64 = 0xfd;

/// Compares tape gradients of the scalar built by `f` against central differences.
///
/// Perturbs at most [`FD_MAX_COORDS`] parameter coordinates, chosen with a fixed
/// seed, and returns the largest `|fd - ad| / max(|fd|, |ad|, 1e-6)`.
pub fn finite_diff_check<F>(params: &ParamStore, eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    let grads = tape.backward(loss)?;
    drop(tape);

    let coords: Vec<(String, usize)> =
        params.iter().flat_map(|(name, t)| (0..t.len()).map(move |i| (name.to_string(), i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(FD_SEED);
    let picked: Vec<usize> = if coords.len() <= FD_MAX_COORDS {
        (0..coords.len()).collect()
    } else {
        let mut v = sample(&mut rng, coords.len(), FD_MAX_COORDS).into_vec();
        v.sort_unstable();
        v
    };

    let eval = |p: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let v = f(&mut tape, p)?;
        Ok(tape.value(v).item())
    };
    let mut worst = 0.0f64;
    let mut work = params.clone();
    for c in picked {
        let (name, i) = &coords[c];
        let orig = work.get(name)?.data()[*i];
        work.get_mut(name).expect("present").data_mut()[*i] = orig + eps;
        let up = eval(&work)?;
        work.get_mut(name).expect("present").data_mut()[*i] = orig - eps;
        let down = eval(&work)?;
        work.get_mut(name).expect("present").data_mut()[*i] = orig;
        let fd = (up - down) / (2.0 * eps);
        let ad = grads[name].data()[*i];
        let rel = (fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}
