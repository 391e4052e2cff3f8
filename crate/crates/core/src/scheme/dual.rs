use serde::{Deserialize, Serialize};

use super::basis_phi;
use crate::kernel::check_finite;
use crate::{Error, Result, Vector};

/// Serialized form of one atom `alpha delta_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRecord {
    pub t: f64,
    pub alpha: Vec<f64>,
}

/// A finite atomic `R^d`-valued measure `sum_j alpha_j delta_{t_j}` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMeasure {
    dim: usize,
    atoms: Vec<(f64, Vector)>,
}

impl DualMeasure {
    /// Atoms are sorted by time; times must lie in `[0, 1]`.
    pub fn new(dim: usize, mut atoms: Vec<(f64, Vector)>) -> Result<Self> {
        for (t, a) in &atoms {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::TimeOutOfRange(*t));
            }
            if a.len() != dim {
                return Err(Error::Dimension {
                    what: "atom weight",
                    expected: dim,
                    got: a.len(),
                });
            }
            check_finite(a, "atom weight")?;
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { dim, atoms })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, atoms: Vec::new() }
    }

    /// `alpha delta_t`.
    pub fn point(t: f64, alpha: Vector) -> Result<Self> {
        Self::new(alpha.len(), vec![(t, alpha)])
    }

    pub fn from_records(dim: usize, records: &[AtomRecord]) -> Result<Self> {
        Self::new(
            dim,
            records
                .iter()
                .map(|r| (r.t, Vector::from_column_slice(&r.alpha)))
                .collect(),
        )
    }

    pub fn to_records(&self) -> Vec<AtomRecord> {
        self.atoms
            .iter()
            .map(|(t, a)| AtomRecord {
                t: *t,
                alpha: a.iter().copied().collect(),
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(f64, Vector)] {
        &self.atoms
    }

    /// `lambda(T) = sum_j alpha_j`.
    pub fn total_mass(&self) -> Vector {
        self.atoms.iter().fold(Vector::zeros(self.dim), |acc, (_, a)| acc + a)
    }

    /// `sum_j |alpha_j|`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|(_, a)| a.norm()).sum()
    }

    /// Every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            atoms: self.atoms.iter().map(|(t, a)| (*t, a * c)).collect(),
        }
    }

    /// `lambda([s, 1])`: the atoms at or after `s`.
    pub fn tail_mass(&self, s: f64) -> Vector {
        self.atoms
            .iter()
            .filter(|(t, _)| *t >= s)
            .fold(Vector::zeros(self.dim), |acc, (_, a)| acc + a)
    }

    /// `int phi_{ni} d lambda = sum_j alpha_j phi_{ni}(t_j)`.
    pub fn basis_integral(&self, n: usize, i: usize) -> Vector {
        self.atoms
            .iter()
            .fold(Vector::zeros(self.dim), |acc, (t, a)| acc + a * basis_phi(n, i, *t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_sorted_and_validated() {
        let m = DualMeasure::new(
            1,
            vec![
                (0.9, Vector::from_element(1, 1.0)),
                (0.2, Vector::from_element(1, -2.0)),
            ],
        )
        .unwrap();
        assert_eq!(m.atoms()[0].0, 0.2);
        assert_eq!(m.total_mass()[0], -1.0);
        assert_eq!(m.total_variation(), 3.0);
        assert_eq!(m.tail_mass(0.2)[0], -1.0);
        assert_eq!(m.tail_mass(0.5)[0], 1.0);
        assert_eq!(m.tail_mass(0.95)[0], 0.0);
        assert!(DualMeasure::new(1, vec![(1.2, Vector::from_element(1, 1.0))]).is_err());
        assert!(DualMeasure::new(2, vec![(0.5, Vector::from_element(1, 1.0))]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let recs = vec![AtomRecord { t: 1.0, alpha: vec![0.5, -1.0] }];
        let m = DualMeasure::from_records(2, &recs).unwrap();
        assert_eq!(m.to_records(), recs);
    }
}
