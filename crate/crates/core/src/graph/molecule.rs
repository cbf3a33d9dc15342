use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::so3::{rotate, Rot3};
use crate::{Error, Result};

const PERIODIC: [&str; 36] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K",
    "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
];

/// Atomic number of an element symbol (first four periods).
pub fn atomic_number(symbol: &str) -> Option<u32> {
    PERIODIC.iter().position(|s| *s == symbol).map(|i| i as u32 + 1)
}

/// Ordered set of element symbols accepted by the parser and one-hot encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet(Vec<String>);

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet(["H", "C", "N", "O", "F"].iter().map(|s| s.to_string()).collect())
    }
}

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        for s in &symbols {
            if atomic_number(s).is_none() {
                return Err(Error::Config(format!("unknown element symbol `{s}` in alphabet")));
            }
        }
        Ok(Alphabet(symbols))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.0.iter().position(|s| s == symbol)
    }

    pub fn symbols(&self) -> &[String] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    /// Cartesian position in angstrom.
    pub position: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub labels: BTreeMap<String, f64>,
}

impl Molecule {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.atoms[i].position, self.atoms[j].position);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// `p -> R p + t` for every atom.
    pub fn transformed(&self, rot: &Rot3, shift: [f64; 3]) -> Molecule {
        let mut out = self.clone();
        for a in &mut out.atoms {
            let p = rotate(rot, a.position);
            a.position = [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
        }
        out
    }

    /// Atom `i` of the result is atom `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        Molecule { atoms: perm.iter().map(|&p| self.atoms[p].clone()).collect(), labels: self.labels.clone() }
    }
}

fn parse_comment(line: &str) -> BTreeMap<String, f64> {
    line.split_whitespace()
        .filter_map(|tok| {
            let (k, v) = tok.split_once('=')?;
            Some((k.to_string(), v.parse::<f64>().ok()?))
        })
        .collect()
}

/// Parses one XYZ frame with the default element alphabet.
pub fn parse_xyz(text: &str) -> Result<Molecule> {
    parse_xyz_with(text, &Alphabet::default())
}

pub fn parse_xyz_with(text: &str, alphabet: &Alphabet) -> Result<Molecule> {
    let mut frames = parse_xyz_frames(text, alphabet)?;
    match frames.len() {
        1 => Ok(frames.remove(0)),
        0 => Err(Error::Parse { line: 1, msg: "empty input".into() }),
        n => Err(Error::Parse { line: 1, msg: format!("expected one frame, found {n}") }),
    }
}

/// Parses a concatenation of XYZ frames. The comment line may carry
/// `key=value` pairs, which become labels when the value is numeric.
pub fn parse_xyz_frames(text: &str, alphabet: &Alphabet) -> Result<Vec<Molecule>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let line_no = i + 1;
        let count: usize = lines[i]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: line_no, msg: format!("malformed atom count `{}`", lines[i].trim()) })?;
        if count == 0 {
            return Err(Error::Parse { line: line_no, msg: "atom count must be at least 1".into() });
        }
        let labels = lines.get(i + 1).map(|l| parse_comment(l)).unwrap_or_default();
        let mut atoms = Vec::with_capacity(count);
        for a in 0..count {
            let idx = i + 2 + a;
            let line_no = idx + 1;
            let line = lines
                .get(idx)
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected {count} atoms, found {a}") })?;
            let mut tok = line.split_whitespace();
            let element = tok.next().ok_or_else(|| Error::Parse { line: line_no, msg: "missing element".into() })?;
            if alphabet.index_of(element).is_none() {
                return Err(Error::Parse { line: line_no, msg: format!("unknown element `{element}`") });
            }
            let mut position = [0.0; 3];
            for (c, p) in position.iter_mut().enumerate() {
                let t = tok
                    .next()
                    .ok_or_else(|| Error::Parse { line: line_no, msg: format!("missing coordinate {}", c + 1) })?;
                *p = t
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line: line_no, msg: format!("non-numeric coordinate `{t}`") })?;
            }
            atoms.push(Atom { element: element.to_string(), position });
        }
        frames.push(Molecule { atoms, labels });
        i += 2 + count;
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_hydrogen() {
        let m = parse_xyz("1\n\nH 0 0 0").unwrap();
        assert_eq!(m.atoms, vec![Atom { element: "H".into(), position: [0.0; 3] }]);
        assert!(m.labels.is_empty());
    }

    #[test]
    fn labels_from_comment() {
        let m = parse_xyz("2\nu0=-0.5\nC 0 0 0\nO 0 0 1.2").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.labels["u0"], -0.5);
        assert_eq!(m.atoms[1].position, [0.0, 0.0, 1.2]);
    }

    #[test]
    fn unknown_element_reports_line() {
        match parse_xyz("2\n\nC 0 0 0\nXx 1 0 0") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("Xx"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_xyz("two\n\nH 0 0 0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_xyz("1\n\nH 0 zero 0"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_xyz("2\n\nH 0 0 0"), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn multiple_frames() {
        let text = "1\na=1\nH 0 0 0\n2\na=2\nH 0 0 0\nH 0 0 0.74\n";
        let f = parse_xyz_frames(text, &Alphabet::default()).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].labels["a"], 2.0);
        assert!(parse_xyz(text).is_err());
    }

    #[test]
    fn atomic_numbers() {
        assert_eq!(atomic_number("H"), Some(1));
        assert_eq!(atomic_number("C"), Some(6));
        assert_eq!(atomic_number("F"), Some(9));
        assert_eq!(atomic_number("Xx"), None);
    }
}
