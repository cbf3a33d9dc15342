use std::collections::BTreeMap;

use rand::Rng;

use super::{Atom, Molecule};

/// Label name used by [`synthetic_dataset`].
pub const SYNTHETIC_TARGET: &str = "pair_decay";

const ELEMENTS: [&str; 5] = ["H", "C", "N", "O", "F"];
const MIN_SEPARATION: f64 = 0.9;

/// Random molecule with `n` atoms, no two closer than 0.9 Å, drawn from the
/// default alphabet.
pub fn random_molecule<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Molecule {
    let half = 0.9 * (n.max(1) as f64).cbrt();
    let mut atoms: Vec<Atom> = Vec::with_capacity(n);
    while atoms.len() < n {
        let p = [rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)];
        let clear = atoms.iter().all(|a| {
            let d: f64 = (0..3).map(|k| (a.position[k] - p[k]).powi(2)).sum();
            d.sqrt() >= MIN_SEPARATION
        });
        if clear {
            let element = ELEMENTS[rng.random_range(0..ELEMENTS.len())].to_string();
            atoms.push(Atom { element, position: p });
        }
    }
    Molecule { atoms, labels: BTreeMap::new() }
}

/// `sum_{i<j} exp(-d_ij)`, a smooth rotation- and permutation-invariant target.
pub fn pair_decay(mol: &Molecule) -> f64 {
    let mut s = 0.0;
    for i in 0..mol.len() {
        for j in i + 1..mol.len() {
            s += (-mol.distance(i, j)).exp();
        }
    }
    s
}

/// `count` random molecules with `min_atoms..=max_atoms` atoms, labelled with
/// [`pair_decay`] under [`SYNTHETIC_TARGET`].
pub fn synthetic_dataset<R: Rng + ?Sized>(rng: &mut R, count: usize, min_atoms: usize, max_atoms: usize) -> Vec<Molecule> {
    (0..count)
        .map(|_| {
            let n = rng.random_range(min_atoms..=max_atoms);
            let mut mol = random_molecule(rng, n);
            mol.labels.insert(SYNTHETIC_TARGET.to_string(), pair_decay(&mol));
            mol
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separation_and_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = synthetic_dataset(&mut rng, 20, 2, 8);
        for m in &data {
            assert!((2..=8).contains(&m.len()));
            for i in 0..m.len() {
                for j in i + 1..m.len() {
                    assert!(m.distance(i, j) >= MIN_SEPARATION);
                }
            }
            let want: f64 = (0..m.len())
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .map(|(i, j)| (-m.distance(i, j)).exp())
                .sum();
            assert!((m.labels[SYNTHETIC_TARGET] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn two_atoms_at_known_distance() {
        let mol = Molecule {
            atoms: vec![
                Atom { element: "H".into(), position: [0.0, 0.0, 0.0] },
                Atom { element: "H".into(), position: [0.0, 2.0, 0.0] },
            ],
            labels: BTreeMap::new(),
        };
        assert!((pair_decay(&mol) - (-2.0f64).exp()).abs() < 1e-15);
    }
}
