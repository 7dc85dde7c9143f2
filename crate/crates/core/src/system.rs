//! Validated atomic systems and the energy/force result type.

use crate::error::{Error, Result};
use crate::geometry::{SimBox, Vec3};

/// A batch of one or more samples: positions (Å), species codes, per-atom
/// sample indices, an optional periodic cell and optional partial charges.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    positions: Vec<Vec3>,
    species: Vec<u32>,
    batch: Vec<usize>,
    cell: SimBox,
    charges: Option<Vec<f64>>,
    n_samples: usize,
}

impl System {
    /// Validates the arrays and builds a system. A missing `batch` means all
    /// atoms belong to sample 0.
    pub fn new(
        positions: Vec<Vec3>,
        species: Vec<u32>,
        batch: Option<Vec<usize>>,
        cell: Option<SimBox>,
        charges: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        if species.len() != n {
            return Err(Error::LengthMismatch {
                what: "species",
                expected: n,
                found: species.len(),
            });
        }
        let batch = batch.unwrap_or_else(|| vec![0; n]);
        if batch.len() != n {
            return Err(Error::LengthMismatch {
                what: "batch",
                expected: n,
                found: batch.len(),
            });
        }
        if let Some(q) = &charges {
            if q.len() != n {
                return Err(Error::LengthMismatch {
                    what: "charges",
                    expected: n,
                    found: q.len(),
                });
            }
        }
        if batch[0] != 0 {
            return Err(Error::NonContiguousBatch {
                index: 0,
                previous: 0,
                found: batch[0],
            });
        }
        for i in 1..n {
            let (prev, cur) = (batch[i - 1], batch[i]);
            if cur != prev && cur != prev + 1 {
                return Err(Error::NonContiguousBatch {
                    index: i,
                    previous: prev,
                    found: cur,
                });
            }
        }
        if let Some(i) = positions
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::NonFinitePosition(i));
        }
        let n_samples = batch[n - 1] + 1;
        Ok(System {
            positions,
            species,
            batch,
            cell: cell.unwrap_or_default(),
            charges,
            n_samples,
        })
    }

    /// Concatenates systems as consecutive samples of one batch. All parts
    /// must share the same cell; charges are kept only if every part has them.
    pub fn concatenate(parts: &[&System]) -> Result<Self> {
        let mut positions = Vec::new();
        let mut species = Vec::new();
        let mut batch = Vec::new();
        let mut charges = Some(Vec::new());
        let mut offset = 0;
        let cell = parts.first().map(|s| s.cell).unwrap_or_default();
        for part in parts {
            if part.cell != cell {
                return Err(Error::MalformedBox(
                    "concatenated systems must share one cell".into(),
                ));
            }
            positions.extend_from_slice(&part.positions);
            species.extend_from_slice(&part.species);
            batch.extend(part.batch.iter().map(|b| b + offset));
            offset += part.n_samples;
            charges = match (charges, &part.charges) {
                (Some(mut acc), Some(q)) => {
                    acc.extend_from_slice(q);
                    Some(acc)
                }
                _ => None,
            };
        }
        System::new(positions, species, Some(batch), Some(cell), charges)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn species(&self) -> &[u32] {
        &self.species
    }

    pub fn batch(&self) -> &[usize] {
        &self.batch
    }

    pub fn cell(&self) -> &SimBox {
        &self.cell
    }

    pub fn charges(&self) -> Option<&[f64]> {
        self.charges.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Returns a copy with new positions, keeping everything else.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "positions",
                expected: self.len(),
                found: positions.len(),
            });
        }
        if let Some(i) = positions
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::NonFinitePosition(i));
        }
        Ok(System {
            positions,
            ..self.clone()
        })
    }

    pub fn with_charges(mut self, charges: Vec<f64>) -> Result<Self> {
        if charges.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "charges",
                expected: self.len(),
                found: charges.len(),
            });
        }
        self.charges = Some(charges);
        Ok(self)
    }

    /// Atom index ranges `[start, end)` of each sample.
    pub fn sample_ranges(&self) -> Vec<(usize, usize)> {
        let mut ranges = Vec::with_capacity(self.n_samples);
        let mut start = 0;
        for i in 1..=self.len() {
            if i == self.len() || self.batch[i] != self.batch[start] {
                ranges.push((start, i));
                start = i;
            }
        }
        ranges
    }
}

/// Per-sample energies (eV), forces (eV/Å) and optional per-atom energies.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyForces {
    pub energy: Vec<f64>,
    pub forces: Option<Vec<Vec3>>,
    pub per_atom_energy: Option<Vec<f64>>,
}

impl EnergyForces {
    /// Zero energies for `n_samples` samples and zero forces / per-atom energies
    /// for `n_atoms` atoms.
    pub fn zeros(n_samples: usize, n_atoms: usize) -> Self {
        EnergyForces {
            energy: vec![0.0; n_samples],
            forces: Some(vec![[0.0; 3]; n_atoms]),
            per_atom_energy: Some(vec![0.0; n_atoms]),
        }
    }

    /// Builds the result from per-atom energies by summing them per sample.
    pub fn from_per_atom(per_atom: Vec<f64>, forces: Option<Vec<Vec3>>, batch: &[usize], n_samples: usize) -> Self {
        let mut energy = vec![0.0; n_samples];
        for (e, &b) in per_atom.iter().zip(batch) {
            energy[b] += e;
        }
        EnergyForces {
            energy,
            forces,
            per_atom_energy: Some(per_atom),
        }
    }

    /// Element-wise sum. Forces and per-atom energies are kept only when both
    /// operands carry them.
    pub fn add(&self, other: &EnergyForces) -> EnergyForces {
        let energy = self
            .energy
            .iter()
            .zip(&other.energy)
            .map(|(a, b)| a + b)
            .collect();
        let forces = match (&self.forces, &other.forces) {
            (Some(a), Some(b)) => Some(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| [x[0] + y[0], x[1] + y[1], x[2] + y[2]])
                    .collect(),
            ),
            _ => None,
        };
        let per_atom_energy = match (&self.per_atom_energy, &other.per_atom_energy) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        EnergyForces {
            energy,
            forces,
            per_atom_energy,
        }
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_batch_is_single_sample() {
        let s = System::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![1, 1], None, None, None).unwrap();
        assert_eq!(s.batch(), &[0, 0]);
        assert_eq!(s.n_samples(), 1);
    }

    #[test]
    fn gap_in_batch_codes_is_rejected() {
        let err = System::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0]],
            vec![1, 1],
            Some(vec![0, 2]),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonContiguousBatch { index: 1, .. }));
        assert!(err.to_string().contains("non-contiguous batch"));
    }

    #[test]
    fn decreasing_batch_codes_are_rejected() {
        let err = System::new(
            vec![[0.0; 3]; 3],
            vec![1; 3],
            Some(vec![0, 1, 0]),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonContiguousBatch { index: 2, .. }));
    }

    #[test]
    fn length_mismatches_are_reported_per_array() {
        let e = System::new(vec![[0.0; 3]; 2], vec![1], None, None, None).unwrap_err();
        assert!(matches!(e, Error::LengthMismatch { what: "species", .. }));
        let e = System::new(vec![[0.0; 3]; 2], vec![1, 1], Some(vec![0]), None, None).unwrap_err();
        assert!(matches!(e, Error::LengthMismatch { what: "batch", .. }));
        let e = System::new(vec![[0.0; 3]; 2], vec![1, 1], None, None, Some(vec![0.0])).unwrap_err();
        assert!(matches!(e, Error::LengthMismatch { what: "charges", .. }));
        let e = System::new(vec![], vec![], None, None, None).unwrap_err();
        assert!(matches!(e, Error::EmptySystem));
    }

    #[test]
    fn non_finite_positions_are_rejected() {
        let e = System::new(vec![[0.0, f64::NAN, 0.0]], vec![1], None, None, None).unwrap_err();
        assert!(matches!(e, Error::NonFinitePosition(0)));
    }

    #[test]
    fn concatenation_offsets_batches() {
        let a = System::new(vec![[0.0; 3]; 2], vec![1, 8], None, None, None).unwrap();
        let b = System::new(vec![[1.0; 3]; 3], vec![6, 6, 6], None, None, None).unwrap();
        let c = System::concatenate(&[&a, &b]).unwrap();
        assert_eq!(c.batch(), &[0, 0, 1, 1, 1]);
        assert_eq!(c.sample_ranges(), vec![(0, 2), (2, 5)]);
        assert_eq!(c.n_samples(), 2);
    }
}
