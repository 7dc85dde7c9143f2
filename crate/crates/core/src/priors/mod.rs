//! Analytic physical energy terms added on top of a learned potential.
//!
//! Every term returns per-sample energies, per-atom energies (pair energies
//! are split evenly between the two atoms) and exact analytic forces. Pair
//! terms accept half or full neighbor lists; with a full list each pair is
//! seen twice and weighted by one half.

mod d2_table;

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::cutoff::cosine_cutoff_with_grad;
use crate::error::{Error, Result};
use crate::geometry::scale;
use crate::neighbor::{build_neighbor_list, NeighborList, NeighborSpec, Strategy};
use crate::system::{EnergyForces, System};
use crate::units::{BOHR, COULOMB};

pub use d2_table::{builtin as d2_builtin, builtin_elements as d2_builtin_elements};

/// Per-element reference energies.
#[derive(Debug, Clone, PartialEq)]
pub struct Atomref {
    /// Indexed by atomic number.
    table: Vec<Option<f64>>,
    /// When set, the table is trained together with the network parameters.
    pub learnable: bool,
}

impl Atomref {
    pub fn new(entries: &[(u32, f64)], learnable: bool) -> Self {
        let max = entries.iter().map(|e| e.0).max().unwrap_or(0) as usize;
        let mut table = vec![None; max + 1];
        for &(z, e) in entries {
            table[z as usize] = Some(e);
        }
        Atomref { table, learnable }
    }

    pub fn get(&self, z: u32) -> Option<f64> {
        self.table.get(z as usize).copied().flatten()
    }

    pub fn entries(&self) -> Vec<(u32, f64)> {
        self.table
            .iter()
            .enumerate()
            .filter_map(|(z, e)| e.map(|e| (z as u32, e)))
            .collect()
    }

    /// Dense table of length `max_z`, zero for missing elements.
    pub fn dense(&self, max_z: usize) -> Vec<f64> {
        (0..max_z).map(|z| self.get(z as u32).unwrap_or(0.0)).collect()
    }

    pub fn evaluate(&self, system: &System) -> Result<EnergyForces> {
        let per_atom = system
            .species()
            .iter()
            .map(|&z| self.get(z).ok_or(Error::MissingElement(z)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(EnergyForces::from_per_atom(
            per_atom,
            Some(vec![[0.0; 3]; system.len()]),
            system.batch(),
            system.n_samples(),
        ))
    }
}

/// Coulomb interaction damped at short range by a half-cosine switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coulomb {
    pub switch_radius: f64,
}

impl Coulomb {
    pub fn new(switch_radius: f64) -> Result<Self> {
        if !(switch_radius > 0.0 && switch_radius.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "switch radius must be positive, got {switch_radius}"
            )));
        }
        Ok(Coulomb { switch_radius })
    }

    /// S(d) and S'(d): ½(1 − cos(πd/r_s)) below r_s, 1 beyond.
    fn switch(&self, d: f64) -> (f64, f64) {
        if d >= self.switch_radius {
            (1.0, 0.0)
        } else {
            let w = PI / self.switch_radius;
            (0.5 * (1.0 - (w * d).cos()), 0.5 * w * (w * d).sin())
        }
    }

    /// Pair energy and its distance derivative for charges `qq = q_i q_j`.
    pub fn pair(&self, qq: f64, d: f64) -> (f64, f64) {
        let (s, ds) = self.switch(d);
        let e = COULOMB * qq * s / d;
        (e, COULOMB * qq * (ds / d - s / (d * d)))
    }

    pub fn evaluate(&self, system: &System, list: &NeighborList) -> Result<EnergyForces> {
        let q = system.charges().ok_or(Error::MissingCharges)?;
        pair_sum(system, list, |i, j, d| Ok(self.pair(q[i] * q[j], d)))
    }
}

/// Grimme D2 dispersion with Fermi damping, multiplied by the cosine envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct D2 {
    pub s6: f64,
    pub d_steep: f64,
    /// `(C6 [eV·Å⁶], R0 [Å])` indexed by atomic number.
    table: Vec<Option<(f64, f64)>>,
}

impl D2 {
    pub const DEFAULT_D_STEEP: f64 = 20.0;

    /// D2 with the shipped H, C, N, O, F, S, Cl parameters.
    pub fn new(s6: f64) -> Result<Self> {
        let entries: Vec<(u32, f64, f64)> = d2_builtin_elements()
            .map(|z| {
                let (c6, r0) = d2_builtin(z).unwrap();
                (z, c6, r0)
            })
            .collect();
        D2::with_table(s6, D2::DEFAULT_D_STEEP, &entries)
    }

    /// Custom parameters as `(Z, C6 [eV·Å⁶], R0 [Å])`.
    pub fn with_table(s6: f64, d_steep: f64, entries: &[(u32, f64, f64)]) -> Result<Self> {
        if !(s6 > 0.0) {
            return Err(Error::InvalidPrior(format!("s6 must be positive, got {s6}")));
        }
        if !(d_steep > 0.0) {
            return Err(Error::InvalidPrior(format!(
                "damping steepness must be positive, got {d_steep}"
            )));
        }
        let max = entries.iter().map(|e| e.0).max().unwrap_or(0) as usize;
        let mut table = vec![None; max + 1];
        for &(z, c6, r0) in entries {
            table[z as usize] = Some((c6, r0));
        }
        Ok(D2 { s6, d_steep, table })
    }

    /// `(Z, C6, R0)` for every tabulated element.
    pub fn entries(&self) -> Vec<(u32, f64, f64)> {
        self.table
            .iter()
            .enumerate()
            .filter_map(|(z, e)| e.map(|(c6, r0)| (z as u32, c6, r0)))
            .collect()
    }

    pub fn params(&self, z: u32) -> Result<(f64, f64)> {
        self.table
            .get(z as usize)
            .copied()
            .flatten()
            .ok_or(Error::MissingElement(z))
    }

    /// Combined coefficient √(C6_i C6_j) and radius sum R0_i + R0_j.
    pub fn combine(&self, zi: u32, zj: u32) -> Result<(f64, f64)> {
        let (ci, ri) = self.params(zi)?;
        let (cj, rj) = self.params(zj)?;
        Ok(((ci * cj).sqrt(), ri + rj))
    }

    /// Undamped-by-envelope pair energy and derivative.
    fn raw_pair(&self, c6: f64, r_sum: f64, d: f64) -> (f64, f64) {
        let f = 1.0 / (1.0 + (-self.d_steep * (d / r_sum - 1.0)).exp());
        let df = self.d_steep / r_sum * f * (1.0 - f);
        let d6 = d.powi(6);
        let e = -self.s6 * c6 / d6 * f;
        let de = -self.s6 * c6 * (df / d6 - 6.0 * f / (d6 * d));
        (e, de)
    }

    pub fn evaluate(&self, system: &System, list: &NeighborList) -> Result<EnergyForces> {
        let z = system.species();
        let upper = list.cutoff_upper();
        pair_sum(system, list, |i, j, d| {
            let (c6, r_sum) = self.combine(z[i], z[j])?;
            Ok(enveloped(self.raw_pair(c6, r_sum, d), d, upper))
        })
    }
}

/// Ziegler-Biersack-Littmark screened nuclear repulsion, multiplied by the
/// cosine envelope.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Zbl;

const ZBL_COEFFS: [f64; 4] = [0.18175, 0.50986, 0.28022, 0.02817];
const ZBL_EXPONENTS: [f64; 4] = [3.19980, 0.94229, 0.40290, 0.20162];

impl Zbl {
    /// Universal screening length in Å.
    pub fn screening_length(zi: u32, zj: u32) -> f64 {
        0.8854 * BOHR / ((zi as f64).powf(0.23) + (zj as f64).powf(0.23))
    }

    fn raw_pair(zi: u32, zj: u32, d: f64) -> (f64, f64) {
        let a = Zbl::screening_length(zi, zj);
        let x = d / a;
        let mut phi = 0.0;
        let mut dphi = 0.0;
        for (c, k) in ZBL_COEFFS.iter().zip(ZBL_EXPONENTS) {
            let t = c * (-k * x).exp();
            phi += t;
            dphi -= k * t / a;
        }
        let pre = COULOMB * (zi * zj) as f64;
        (pre * phi / d, pre * (dphi / d - phi / (d * d)))
    }

    pub fn evaluate(&self, system: &System, list: &NeighborList) -> Result<EnergyForces> {
        let z = system.species();
        if let Some(&bad) = z.iter().find(|&&z| z == 0) {
            return Err(Error::InvalidAtomicNumber(bad));
        }
        let upper = list.cutoff_upper();
        pair_sum(system, list, |i, j, d| {
            Ok(enveloped(Zbl::raw_pair(z[i], z[j], d), d, upper))
        })
    }
}

fn enveloped((e, de): (f64, f64), d: f64, upper: f64) -> (f64, f64) {
    let (phi, dphi) = cosine_cutoff_with_grad(d, 0.0, upper);
    (e * phi, de * phi + e * dphi)
}

/// Sums a pair potential over a neighbor list. `pair(i, j, d)` returns the
/// pair energy and its derivative with respect to the distance.
fn pair_sum<F>(system: &System, list: &NeighborList, mut pair: F) -> Result<EnergyForces>
where
    F: FnMut(usize, usize, f64) -> Result<(f64, f64)>,
{
    if list.n_atoms() != system.len() {
        return Err(Error::LengthMismatch {
            what: "neighbor list atoms",
            expected: system.len(),
            found: list.n_atoms(),
        });
    }
    let weight = if list.is_full() { 0.5 } else { 1.0 };
    let mut per_atom = vec![0.0; system.len()];
    let mut forces = vec![[0.0; 3]; system.len()];
    let deltas = list.deltas();
    let distances = list.distances();
    for (k, i, j) in list.valid_pairs() {
        if i == j {
            continue;
        }
        let d = distances[k];
        let (e, de) = pair(i, j, d)?;
        let (e, de) = (e * weight, de * weight);
        per_atom[i] += 0.5 * e;
        per_atom[j] += 0.5 * e;
        let f = scale(deltas[k], de / d);
        for c in 0..3 {
            forces[i][c] -= f[c];
            forces[j][c] += f[c];
        }
    }
    Ok(EnergyForces::from_per_atom(
        per_atom,
        Some(forces),
        system.batch(),
        system.n_samples(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorTerm {
    Atomref(Atomref),
    Coulomb(Coulomb),
    D2(D2),
    Zbl(Zbl),
}

impl PriorTerm {
    pub fn name(&self) -> &'static str {
        match self {
            PriorTerm::Atomref(_) => "atomref",
            PriorTerm::Coulomb(_) => "coulomb",
            PriorTerm::D2(_) => "d2",
            PriorTerm::Zbl(_) => "zbl",
        }
    }

    pub fn evaluate(&self, system: &System, list: &NeighborList) -> Result<EnergyForces> {
        match self {
            PriorTerm::Atomref(t) => t.evaluate(system),
            PriorTerm::Coulomb(t) => t.evaluate(system, list),
            PriorTerm::D2(t) => t.evaluate(system, list),
            PriorTerm::Zbl(t) => t.evaluate(system, list),
        }
    }
}

/// Ordered list of prior terms whose contributions are summed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorStack {
    pub terms: Vec<PriorTerm>,
}

impl PriorStack {
    pub fn new(terms: Vec<PriorTerm>) -> Self {
        PriorStack { terms }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: PriorTerm) -> &mut Self {
        self.terms.push(term);
        self
    }

    pub fn evaluate(&self, system: &System, list: &NeighborList) -> Result<EnergyForces> {
        evaluate_prior_stack(system, list, self)
    }
}

/// Element-wise sum of all term outputs; zeros for an empty stack.
pub fn evaluate_prior_stack(
    system: &System,
    list: &NeighborList,
    stack: &PriorStack,
) -> Result<EnergyForces> {
    let mut total = EnergyForces::zeros(system.n_samples(), system.len());
    for term in &stack.terms {
        total = total.add(&term.evaluate(system, list)?);
    }
    Ok(total)
}

/// Single-term energies of an isolated dimer over a distance grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEnergyProfile {
    pub distances: Vec<f64>,
    pub energies: Vec<f64>,
}

impl PairEnergyProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "distance_angstrom,energy_ev")?;
        for (d, e) in self.distances.iter().zip(&self.energies) {
            writeln!(out, "{d},{e}")?;
        }
        Ok(())
    }
}

/// Evaluates `term` for a two-atom system at every distance in `distances`,
/// which must be strictly increasing inside `(0, cutoff]`.
pub fn dimer_scan(
    term: &PriorTerm,
    species: (u32, u32),
    charges: Option<(f64, f64)>,
    distances: &[f64],
    cutoff: f64,
) -> Result<PairEnergyProfile> {
    if distances.is_empty() {
        return Err(Error::InvalidGrid("empty distance grid".into()));
    }
    for (k, &d) in distances.iter().enumerate() {
        if !(d > 0.0 && d <= cutoff) {
            return Err(Error::InvalidGrid(format!(
                "distance {d} outside (0, {cutoff}]"
            )));
        }
        if k > 0 && d <= distances[k - 1] {
            return Err(Error::InvalidGrid("distances must be strictly increasing".into()));
        }
    }
    let spec = NeighborSpec::new(cutoff, 1).with_strategy(Strategy::Brute);
    let mut energies = Vec::with_capacity(distances.len());
    for &d in distances {
        let mut system = System::new(
            vec![[0.0; 3], [d, 0.0, 0.0]],
            vec![species.0, species.1],
            None,
            None,
            None,
        )?;
        if let Some((qi, qj)) = charges {
            system = system.with_charges(vec![qi, qj])?;
        }
        let list = build_neighbor_list(&system, &spec)?;
        energies.push(term.evaluate(&system, &list)?.energy[0]);
    }
    Ok(PairEnergyProfile {
        distances: distances.to_vec(),
        energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::COULOMB;

    fn dimer(d: f64, z: (u32, u32), q: Option<(f64, f64)>) -> System {
        let s = System::new(vec![[0.0; 3], [d, 0.0, 0.0]], vec![z.0, z.1], None, None, None).unwrap();
        match q {
            Some((a, b)) => s.with_charges(vec![a, b]).unwrap(),
            None => s,
        }
    }

    fn list(s: &System, cutoff: f64) -> NeighborList {
        build_neighbor_list(s, &NeighborSpec::new(cutoff, 64)).unwrap()
    }

    #[test]
    fn atomref_sums_entries() {
        let table = Atomref::new(&[(1, -0.5), (8, -75.0)], false);
        let s = System::new(vec![[0.0; 3]; 3], vec![1, 1, 8], None, None, None).unwrap();
        let out = table.evaluate(&s).unwrap();
        assert_eq!(out.energy, vec![-76.0]);
        assert!(out.forces.unwrap().iter().flatten().all(|&f| f == 0.0));
    }

    #[test]
    fn atomref_missing_element() {
        let table = Atomref::new(&[(1, -0.5), (8, -75.0)], false);
        let s = System::new(vec![[0.0; 3]; 2], vec![1, 6], None, None, None).unwrap();
        let err = table.evaluate(&s).unwrap_err();
        assert_eq!(err.to_string(), "missing reference for element 6");
    }

    #[test]
    fn atomref_per_batch() {
        let table = Atomref::new(&[(1, -0.5), (8, -75.0)], false);
        let s = System::new(vec![[0.0; 3]; 3], vec![1, 1, 8], Some(vec![0, 0, 1]), None, None)
            .unwrap();
        assert_eq!(table.evaluate(&s).unwrap().energy, vec![-1.0, -75.0]);
    }

    #[test]
    fn coulomb_beyond_switch_is_plain_coulomb() {
        let s = dimer(2.0, (1, 1), Some((1.0, -1.0)));
        let out = Coulomb::new(1.0).unwrap().evaluate(&s, &list(&s, 5.0)).unwrap();
        assert!((out.energy[0] - (-7.1998225)).abs() < 1e-12);
        assert!((out.energy[0] + COULOMB / 2.0).abs() < 1e-12);
    }

    #[test]
    fn coulomb_short_range_limit_is_finite() {
        let c = Coulomb::new(1.0).unwrap();
        // S(d)/d -> π²d/(4 r_s²) -> 0 as d -> 0.
        let e_small = c.pair(1.0, 1e-6).0;
        assert!(e_small.abs() < 1e-4);
        let e_smaller = c.pair(1.0, 1e-8).0;
        assert!(e_smaller.abs() < e_small.abs());
        // Leading term k_e π² d / (4 r_s²).
        let d = 1e-4;
        let lead = COULOMB * PI * PI * d / 4.0;
        assert!((c.pair(1.0, d).0 - lead).abs() / lead < 1e-6);
    }

    #[test]
    fn coulomb_without_charges_errors() {
        let s = dimer(2.0, (1, 1), None);
        assert!(matches!(
            Coulomb::new(1.0).unwrap().evaluate(&s, &list(&s, 5.0)),
            Err(Error::MissingCharges)
        ));
    }

    #[test]
    fn zero_charges_give_nothing() {
        let s = dimer(0.7, (1, 1), Some((0.0, 0.0)));
        let out = Coulomb::new(1.0).unwrap().evaluate(&s, &list(&s, 5.0)).unwrap();
        assert_eq!(out.energy[0], 0.0);
        assert!(out.forces.unwrap().iter().flatten().all(|&f| f == 0.0));
    }

    #[test]
    fn zbl_vanishes_at_cutoff() {
        let s = dimer(5.0, (1, 1), None);
        let out = Zbl.evaluate(&s, &list(&s, 5.0)).unwrap();
        assert_eq!(out.energy[0], 0.0);
    }

    #[test]
    fn zbl_reference_value() {
        // Independent scalar evaluation of the four-exponential formula.
        let s = dimer(1.0, (1, 1), None);
        let out = Zbl.evaluate(&s, &list(&s, 5.0)).unwrap();
        assert!((out.energy[0] - 0.927_764_745_341_616_8).abs() < 1e-12);
    }

    #[test]
    fn zbl_is_symmetric() {
        for (a, b) in [(1, 8), (6, 17), (7, 16)] {
            let e1 = Zbl.evaluate(&dimer(1.3, (a, b), None), &list(&dimer(1.3, (a, b), None), 5.0));
            let e2 = Zbl.evaluate(&dimer(1.3, (b, a), None), &list(&dimer(1.3, (b, a), None), 5.0));
            assert_eq!(e1.unwrap().energy, e2.unwrap().energy);
        }
    }

    #[test]
    fn zbl_rejects_zero_species() {
        let s = dimer(1.0, (0, 1), None);
        assert!(matches!(
            Zbl.evaluate(&s, &list(&s, 5.0)),
            Err(Error::InvalidAtomicNumber(0))
        ));
    }

    #[test]
    fn d2_table_transcription() {
        // 1 J·nm⁶/mol = 1e6 / 96485.33212 eV·Å⁶.
        let expected = [
            (1, 1.450_997_751_926_482, 1.001),
            (6, 18.137_471_899_081_03, 1.452),
            (8, 7.254_988_759_632_412, 1.342),
        ];
        for (z, c6, r0) in expected {
            let (got_c6, got_r0) = d2_builtin(z).unwrap();
            assert!((got_c6 - c6).abs() < 1e-12 * c6, "Z={z}: {got_c6}");
            assert_eq!(got_r0, r0);
        }
        assert_eq!(d2_builtin_elements().collect::<Vec<_>>(), vec![1, 6, 7, 8, 9, 16, 17]);
    }

    #[test]
    fn d2_reference_value() {
        let s = dimer(3.0, (1, 1), None);
        let out = D2::new(1.0).unwrap().evaluate(&s, &list(&s, 6.0)).unwrap();
        assert!((out.energy[0] - (-0.000_995_150_806_407_248_9)).abs() < 1e-15);
    }

    #[test]
    fn d2_combination_is_symmetric() {
        let d2 = D2::new(1.0).unwrap();
        for a in d2_builtin_elements() {
            for b in d2_builtin_elements() {
                assert_eq!(d2.combine(a, b).unwrap(), d2.combine(b, a).unwrap());
            }
        }
    }

    #[test]
    fn d2_unknown_element() {
        let s = dimer(3.0, (1, 26), None);
        assert!(matches!(
            D2::new(1.0).unwrap().evaluate(&s, &list(&s, 6.0)),
            Err(Error::MissingElement(26))
        ));
        assert!(matches!(D2::new(0.0), Err(Error::InvalidPrior(_))));
    }

    #[test]
    fn d2_approaches_zero_at_cutoff() {
        let d2 = D2::new(1.0).unwrap();
        let at = |d: f64| {
            let s = dimer(d, (6, 6), None);
            d2.evaluate(&s, &list(&s, 5.0)).unwrap().energy[0]
        };
        assert_eq!(at(5.0), 0.0);
        assert!(at(5.0 - 1e-4).abs() < 1e-9);
    }

    #[test]
    fn empty_stack_is_zero() {
        let s = dimer(1.0, (1, 1), None);
        let out = evaluate_prior_stack(&s, &list(&s, 5.0), &PriorStack::default()).unwrap();
        assert_eq!(out.energy, vec![0.0]);
        assert!(out.forces.unwrap().iter().flatten().all(|&f| f == 0.0));
    }

    #[test]
    fn single_term_stack_equals_term() {
        let s = System::new(vec![[0.0; 3]; 3], vec![1, 1, 8], None, None, None).unwrap();
        let table = Atomref::new(&[(1, -0.5), (8, -75.0)], false);
        let l = build_neighbor_list(&s, &NeighborSpec::new(1.0, 8).with_lower(0.5)).unwrap();
        let stack = PriorStack::new(vec![PriorTerm::Atomref(table.clone())]);
        assert_eq!(stack.evaluate(&s, &l).unwrap(), table.evaluate(&s).unwrap());
    }

    #[test]
    fn stack_is_sum_of_terms() {
        let s = System::new(
            vec![[0.0; 3], [1.1, 0.2, 0.0], [0.3, 1.4, 0.5], [2.0, 2.0, 0.4]],
            vec![1, 6, 8, 1],
            None,
            None,
            None,
        )
        .unwrap();
        let l = list(&s, 5.0);
        let zbl = PriorTerm::Zbl(Zbl);
        let d2 = PriorTerm::D2(D2::new(0.75).unwrap());
        let stacked = PriorStack::new(vec![zbl.clone(), d2.clone()]).evaluate(&s, &l).unwrap();
        let sep = zbl.evaluate(&s, &l).unwrap().add(&d2.evaluate(&s, &l).unwrap());
        assert!((stacked.energy[0] - sep.energy[0]).abs() < 1e-12);
        let (fa, fb) = (stacked.forces.unwrap(), sep.forces.unwrap());
        for (a, b) in fa.iter().zip(&fb) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_and_half_lists_agree() {
        let s = System::new(
            vec![[0.0; 3], [1.1, 0.2, 0.0], [0.3, 1.4, 0.5]],
            vec![1, 6, 8],
            None,
            None,
            Some(vec![0.2, -0.5, 0.3]),
        )
        .unwrap();
        let half = list(&s, 5.0);
        let full = build_neighbor_list(&s, &NeighborSpec::new(5.0, 64).with_full_list(true)).unwrap();
        for term in [
            PriorTerm::Zbl(Zbl),
            PriorTerm::D2(D2::new(1.0).unwrap()),
            PriorTerm::Coulomb(Coulomb::new(1.5).unwrap()),
        ] {
            let a = term.evaluate(&s, &half).unwrap();
            let b = term.evaluate(&s, &full).unwrap();
            assert!((a.energy[0] - b.energy[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn zbl_dimer_profile_is_monotone() {
        let grid: Vec<f64> = (1..=100).map(|k| 0.05 * k as f64).collect();
        let p = dimer_scan(&PriorTerm::Zbl(Zbl), (1, 1), None, &grid, 5.0).unwrap();
        assert!(p.energies.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0));
        assert_eq!(*p.energies.last().unwrap(), 0.0);
    }

    #[test]
    fn coulomb_opposite_charges_profile_is_attractive() {
        let grid: Vec<f64> = (10..=50).map(|k| 0.1 * k as f64).collect();
        let term = PriorTerm::Coulomb(Coulomb::new(1.0).unwrap());
        let p = dimer_scan(&term, (1, 1), Some((0.5, -0.5)), &grid, 5.0).unwrap();
        assert!(p.energies.iter().all(|&e| e <= 0.0));
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let t = PriorTerm::Zbl(Zbl);
        assert!(matches!(
            dimer_scan(&t, (1, 1), None, &[0.0, 1.0], 5.0),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            dimer_scan(&t, (1, 1), None, &[1.0, 0.5], 5.0),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            dimer_scan(&t, (1, 1), None, &[1.0, 6.0], 5.0),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn profile_csv() {
        let p = PairEnergyProfile {
            distances: vec![1.0, 2.0],
            energies: vec![0.5, 0.25],
        };
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "distance_angstrom,energy_ev\n1,0.5\n2,0.25\n"
        );
    }
}
