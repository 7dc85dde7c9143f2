//! A learned representation/output model plus physical priors, evaluated as
//! one potential.

use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::graph::GraphPotential;
use crate::neighbor::{build_neighbor_list, NeighborList, NeighborSpec, Strategy};
use crate::priors::{evaluate_prior_stack, PriorStack};
use crate::system::{EnergyForces, System};

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedPotential {
    pub network: Option<GraphPotential>,
    pub priors: PriorStack,
    /// Compute forces alongside energies.
    pub derivative: bool,
    cutoff_lower: f64,
    cutoff_upper: f64,
}

impl ComposedPotential {
    /// Network with optional priors; the neighbor cutoffs follow the network.
    pub fn with_network(network: GraphPotential, priors: PriorStack) -> Self {
        ComposedPotential {
            cutoff_lower: network.config.cutoff_lower,
            cutoff_upper: network.config.cutoff_upper,
            network: Some(network),
            priors,
            derivative: true,
        }
    }

    /// Priors only, evaluated on neighbor pairs up to `cutoff_upper`.
    pub fn priors_only(priors: PriorStack, cutoff_upper: f64) -> Self {
        ComposedPotential {
            network: None,
            priors,
            derivative: true,
            cutoff_lower: 0.0,
            cutoff_upper,
        }
    }

    pub fn cutoff_lower(&self) -> f64 {
        self.cutoff_lower
    }

    pub fn cutoff_upper(&self) -> f64 {
        self.cutoff_upper
    }

    /// Neighbor settings matching this potential: full list with the
    /// potential's cutoffs.
    pub fn neighbor_spec(&self, capacity: usize) -> NeighborSpec {
        NeighborSpec::new(self.cutoff_upper, capacity)
            .with_lower(self.cutoff_lower)
            .with_full_list(true)
    }

    pub fn evaluate(&self, system: &System, list: &NeighborList) -> Result<EnergyForces> {
        evaluate(self, system, list)
    }
}

/// Network energy plus the sum of prior energies, per sample; forces are
/// the negative gradient of the total when `derivative` is set.
pub fn evaluate(potential: &ComposedPotential, system: &System, list: &NeighborList) -> Result<EnergyForces> {
    if potential.network.is_none() && potential.priors.is_empty() {
        return Err(Error::EmptyPotential);
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    if !close(potential.cutoff_upper, list.cutoff_upper())
        || !close(potential.cutoff_lower, list.cutoff_lower())
    {
        return Err(Error::CutoffMismatch {
            expected_lower: potential.cutoff_lower,
            expected_upper: potential.cutoff_upper,
            found_lower: list.cutoff_lower(),
            found_upper: list.cutoff_upper(),
        });
    }
    let mut total = match &potential.network {
        Some(net) => net.evaluate(system, list, potential.derivative)?,
        None => EnergyForces::zeros(system.n_samples(), system.len()),
    };
    if !potential.priors.is_empty() {
        let priors = evaluate_prior_stack(system, list, &potential.priors)?;
        total = total.add(&priors);
    }
    if !potential.derivative {
        total.forces = None;
    }
    Ok(total)
}

/// Anything that maps a system to energies and forces.
pub trait ForceModel {
    fn compute(&self, system: &System) -> Result<EnergyForces>;
}

/// A composed potential bundled with neighbor-list construction. The list
/// capacity grows on overflow and is remembered for later calls.
#[derive(Debug)]
pub struct ForceField {
    pub potential: ComposedPotential,
    pub strategy: Strategy,
    capacity: Mutex<usize>,
}

impl ForceField {
    pub fn new(mut potential: ComposedPotential) -> Self {
        potential.derivative = true;
        ForceField {
            potential,
            strategy: Strategy::Auto,
            capacity: Mutex::new(64),
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn neighbors(&self, system: &System) -> Result<NeighborList> {
        let mut cap = self.capacity.lock().unwrap();
        let spec = self.potential.neighbor_spec(*cap).with_strategy(self.strategy);
        match build_neighbor_list(system, &spec) {
            Err(Error::Overflow { required, .. }) => {
                *cap = required + required / 4 + 1;
                build_neighbor_list(system, &spec.with_capacity(*cap))
            }
            other => other,
        }
    }
}

impl ForceModel for ForceField {
    fn compute(&self, system: &System) -> Result<EnergyForces> {
        let list = self.neighbors(system)?;
        evaluate(&self.potential, system, &list)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GNConfig;
    use crate::priors::{PriorTerm, Zbl, D2};

    fn h2() -> System {
        System::new(vec![[0.0; 3], [0.74, 0.0, 0.0]], vec![1, 1], None, None, None).unwrap()
    }

    fn small_net() -> GraphPotential {
        GraphPotential::new(
            GNConfig {
                embedding_dimension: 8,
                num_layers: 1,
                num_rbf: 6,
                cutoff_upper: 5.0,
                max_z: 10,
                ..GNConfig::default()
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn empty_potential_is_an_error() {
        let p = ComposedPotential::priors_only(PriorStack::default(), 5.0);
        let s = h2();
        let l = build_neighbor_list(&s, &p.neighbor_spec(8)).unwrap();
        assert!(matches!(evaluate(&p, &s, &l), Err(Error::EmptyPotential)));
    }

    #[test]
    fn priors_only_equals_stack() {
        let stack = PriorStack::new(vec![
            PriorTerm::Zbl(Zbl),
            PriorTerm::D2(D2::new(1.0).unwrap()),
        ]);
        let p = ComposedPotential::priors_only(stack.clone(), 5.0);
        let s = h2();
        let l = build_neighbor_list(&s, &p.neighbor_spec(8)).unwrap();
        assert_eq!(evaluate(&p, &s, &l).unwrap(), stack.evaluate(&s, &l).unwrap());
    }

    #[test]
    fn network_plus_zbl_is_additive() {
        let net = small_net();
        let stack = PriorStack::new(vec![PriorTerm::Zbl(Zbl)]);
        let both = ComposedPotential::with_network(net.clone(), stack.clone());
        let s = h2();
        let l = build_neighbor_list(&s, &both.neighbor_spec(8)).unwrap();
        let total = evaluate(&both, &s, &l).unwrap();
        let a = net.evaluate(&s, &l, true).unwrap();
        let b = stack.evaluate(&s, &l).unwrap();
        assert!((total.energy[0] - (a.energy[0] + b.energy[0])).abs() < 1e-12);
        let (ft, fa, fb) = (total.forces.unwrap(), a.forces.unwrap(), b.forces.unwrap());
        for i in 0..2 {
            for c in 0..3 {
                assert!((ft[i][c] - (fa[i][c] + fb[i][c])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_flag_controls_forces() {
        let mut p = ComposedPotential::with_network(small_net(), PriorStack::default());
        p.derivative = false;
        let s = h2();
        let l = build_neighbor_list(&s, &p.neighbor_spec(8)).unwrap();
        assert!(evaluate(&p, &s, &l).unwrap().forces.is_none());
    }

    #[test]
    fn cutoff_mismatch() {
        let p = ComposedPotential::priors_only(PriorStack::new(vec![PriorTerm::Zbl(Zbl)]), 5.0);
        let s = h2();
        let l = build_neighbor_list(&s, &NeighborSpec::new(4.0, 8)).unwrap();
        assert!(matches!(evaluate(&p, &s, &l), Err(Error::CutoffMismatch { .. })));
    }

    #[test]
    fn force_field_grows_capacity() {
        let p = ComposedPotential::priors_only(PriorStack::new(vec![PriorTerm::Zbl(Zbl)]), 5.0);
        let ff = ForceField::new(p);
        let positions = (0..30).map(|i| [0.3 * i as f64, 0.0, 0.0]).collect();
        let s = System::new(positions, vec![1; 30], None, None, None).unwrap();
        let out = ff.compute(&s).unwrap();
        assert!(out.forces.is_some());
        assert!(*ff.capacity.lock().unwrap() > 64);
    }
}
