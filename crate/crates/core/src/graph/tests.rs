use super::*;
use crate::neighbor::{build_neighbor_list, NeighborSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config(layers: usize) -> GNConfig {
    GNConfig {
        embedding_dimension: 6,
        num_layers: layers,
        num_rbf: 5,
        cutoff_lower: 0.0,
        cutoff_upper: 4.0,
        max_z: 10,
        activation: Activation::Silu,
        trainable_rbf: true,
        static_shapes: true,
        mean: 0.3,
        std: 1.7,
    }
}

fn full_list(system: &System, config: &GNConfig) -> NeighborList {
    let spec = NeighborSpec::new(config.cutoff_upper, 256)
        .with_lower(config.cutoff_lower)
        .with_full_list(true);
    build_neighbor_list(system, &spec).unwrap()
}

fn random_system(n: usize, seed: u64) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| [0; 3].map(|_| rng.gen_range(0.0..3.5)))
        .collect();
    let species = (0..n).map(|_| rng.gen_range(1..10)).collect();
    System::new(positions, species, None, None, None).unwrap()
}

fn energy_at(pot: &GraphPotential, system: &System, positions: Vec<Vec3>) -> f64 {
    let s = system.with_positions(positions).unwrap();
    let list = full_list(&s, &pot.config);
    pot.evaluate(&s, &list, false).unwrap().energy[0]
}

#[test]
fn scripted_forward_reference() {
    let config = GNConfig {
        embedding_dimension: 4,
        num_layers: 1,
        num_rbf: 4,
        cutoff_lower: 0.0,
        cutoff_upper: 5.0,
        max_z: 3,
        activation: Activation::Silu,
        trainable_rbf: false,
        static_shapes: false,
        mean: 0.1,
        std: 2.0,
    };
    let mut params = GNParams::init(&config, 0);
    let flat: Vec<f64> = (0..params.len())
        .map(|k| 0.5 * (1.3 * k as f64 + 0.7).sin())
        .collect();
    params.assign(&flat);
    let (means, betas) = rbf_initial_params(4, 0.0, 5.0);
    params.rbf_means = means;
    params.rbf_betas = betas;
    let system = System::new(
        vec![[0.0; 3], [1.2, 0.3, -0.4]],
        vec![1, 2],
        None,
        None,
        None,
    )
    .unwrap();
    let list = full_list(&system, &config);
    let (out, _) = forward(&params, &config, &system, &list).unwrap();
    let per_atom = out.per_atom_energy.unwrap();
    assert!((per_atom[0] - -0.477_632_263_363_948_93).abs() < 1e-12);
    assert!((per_atom[1] - -0.722_856_042_682_187_3).abs() < 1e-12);
    assert!((out.energy[0] - -1.200_488_306_046_136_2).abs() < 1e-12);
}

#[test]
fn zero_layers_ignores_geometry() {
    let config = tiny_config(0);
    let pot = GraphPotential::new(config.clone(), 3).unwrap();
    let system = random_system(5, 1);
    let list = full_list(&system, &config);
    let out = pot.evaluate(&system, &list, true).unwrap();
    assert!(out.forces.unwrap().iter().flatten().all(|&v| v == 0.0));

    let f = config.embedding_dimension;
    let mut expected = 0.0;
    for &z in system.species() {
        let x = &pot.params.embedding[z as usize * f..(z as usize + 1) * f];
        let mut a = vec![0.0; config.head_dimension()];
        pot.params.head1.apply(x, &mut a);
        let a: Vec<f64> = a.iter().map(|&v| config.activation.eval(v).0).collect();
        let mut y = [0.0];
        pot.params.head2.apply(&a, &mut y);
        expected += y[0] * config.std + config.mean;
    }
    assert!((out.energy[0] - expected).abs() < 1e-12);

    let moved = system
        .positions()
        .iter()
        .map(|p| [p[0] * 1.3, p[1] - 2.0, p[2]])
        .collect();
    assert_eq!(energy_at(&pot, &system, moved), out.energy[0]);
}

#[test]
fn permutation_permutes_per_atom_energies() {
    let config = tiny_config(2);
    let pot = GraphPotential::new(config.clone(), 5).unwrap();
    let system = random_system(6, 2);
    let perm = [3, 0, 5, 1, 4, 2];
    let permuted = System::new(
        perm.iter().map(|&i| system.positions()[i]).collect(),
        perm.iter().map(|&i| system.species()[i]).collect(),
        None,
        None,
        None,
    )
    .unwrap();
    let a = pot.evaluate(&system, &full_list(&system, &config), true).unwrap();
    let b = pot.evaluate(&permuted, &full_list(&permuted, &config), true).unwrap();
    assert!((a.energy[0] - b.energy[0]).abs() < 1e-10);
    let (ea, eb) = (a.per_atom_energy.unwrap(), b.per_atom_energy.unwrap());
    let (fa, fb) = (a.forces.unwrap(), b.forces.unwrap());
    for (new, &old) in perm.iter().enumerate() {
        assert!((eb[new] - ea[old]).abs() < 1e-10);
        for c in 0..3 {
            assert!((fb[new][c] - fa[old][c]).abs() < 1e-10);
        }
    }
}

#[test]
fn forces_match_finite_differences() {
    for layers in 0..=2 {
        let config = tiny_config(layers);
        let pot = GraphPotential::new(config.clone(), 11).unwrap();
        let system = random_system(5, 7);
        let list = full_list(&system, &config);
        let forces = pot.evaluate(&system, &list, true).unwrap().forces.unwrap();
        let h = 1e-4;
        for a in 0..system.len() {
            for c in 0..3 {
                let mut plus = system.positions().to_vec();
                let mut minus = plus.clone();
                plus[a][c] += h;
                minus[a][c] -= h;
                let fd = -(energy_at(&pot, &system, plus) - energy_at(&pot, &system, minus)) / (2.0 * h);
                let err = (fd - forces[a][c]).abs() / forces[a][c].abs().max(1e-3);
                assert!(err < 1e-6, "L={layers} atom {a} comp {c}: {fd} vs {}", forces[a][c]);
            }
        }
    }
}

#[test]
fn half_list_gives_same_result_as_full_list() {
    let config = tiny_config(2);
    let pot = GraphPotential::new(config.clone(), 2).unwrap();
    let system = random_system(6, 9);
    let half = build_neighbor_list(&system, &NeighborSpec::new(config.cutoff_upper, 256)).unwrap();
    let a = pot.evaluate(&system, &half, true).unwrap();
    let b = pot.evaluate(&system, &full_list(&system, &config), true).unwrap();
    assert!((a.energy[0] - b.energy[0]).abs() < 1e-12);
    for (x, y) in a.forces.unwrap().iter().zip(b.forces.unwrap()) {
        for c in 0..3 {
            assert!((x[c] - y[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn isolated_atom_and_pair_forces() {
    let config = tiny_config(2);
    let pot = GraphPotential::new(config.clone(), 4).unwrap();
    let single = System::new(vec![[1.0, 2.0, 3.0]], vec![6], None, None, None).unwrap();
    let f = pot
        .evaluate(&single, &full_list(&single, &config), true)
        .unwrap()
        .forces
        .unwrap();
    assert_eq!(f, vec![[0.0; 3]]);

    let pair = System::new(vec![[0.0; 3], [1.1, 0.4, -0.3]], vec![1, 8], None, None, None).unwrap();
    let f = pot
        .evaluate(&pair, &full_list(&pair, &config), true)
        .unwrap()
        .forces
        .unwrap();
    for c in 0..3 {
        assert_eq!(f[0][c], -f[1][c]);
    }
    assert!(f[0].iter().any(|&v| v != 0.0));
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let config = tiny_config(1);
    let pot = GraphPotential::new(config.clone(), 4).unwrap();
    let system = random_system(4, 3);
    let list = full_list(&system, &config);
    let (_, cache) = forward(&pot.params, &config, &system, &list).unwrap();
    let g = backward_params(&pot.params, &config, &system, &list, &cache, &[0.0]).unwrap();
    assert!(g.flatten().iter().all(|&v| v == 0.0));
}

#[test]
fn head_bias_gradient_counts_atoms() {
    let config = tiny_config(1);
    let pot = GraphPotential::new(config.clone(), 4).unwrap();
    let a = random_system(3, 3);
    let b = random_system(5, 4);
    let system = System::concatenate(&[&a, &b]).unwrap();
    let list = full_list(&system, &config);
    let (_, cache) = forward(&pot.params, &config, &system, &list).unwrap();
    let upstream = [0.4, -1.5];
    let g = backward_params(&pot.params, &config, &system, &list, &cache, &upstream).unwrap();
    let expected = (0.4 * 3.0 - 1.5 * 5.0) * config.std;
    assert!((g.head2.bias[0] - expected).abs() < 1e-12);
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let config = GNConfig {
        embedding_dimension: 3,
        num_rbf: 3,
        ..tiny_config(2)
    };
    let mut params = GNParams::init(&config, 8);
    params.atomref = Some(vec![0.05; config.max_z]);
    let a = random_system(3, 21);
    let b = random_system(4, 22);
    let system = System::concatenate(&[&a, &b]).unwrap();
    let list = full_list(&system, &config);
    let upstream = [0.7, -0.4];
    let (_, cache) = forward(&params, &config, &system, &list).unwrap();
    let grads = backward_params(&params, &config, &system, &list, &cache, &upstream)
        .unwrap()
        .flatten();
    let base = params.flatten();
    let objective = |flat: &[f64]| {
        let mut p = params.clone();
        p.assign(flat);
        let (out, _) = forward(&p, &config, &system, &list).unwrap();
        out.energy.iter().zip(&upstream).map(|(e, u)| e * u).sum::<f64>()
    };
    let h = 1e-5;
    for k in 0..base.len() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[k] += h;
        minus[k] -= h;
        let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
        let err = (fd - grads[k]).abs() / grads[k].abs().max(1e-4);
        assert!(err < 1e-5, "parameter {k}: fd {fd} vs analytic {}", grads[k]);
    }
}

#[test]
fn stale_cache_is_detected() {
    let config = tiny_config(1);
    let pot = GraphPotential::new(config.clone(), 4).unwrap();
    let system = random_system(4, 3);
    let list = full_list(&system, &config);
    let (_, cache) = forward(&pot.params, &config, &system, &list).unwrap();
    let mut other = pot.params.clone();
    other.head2.bias[0] += 1.0;
    assert!(matches!(
        backward_forces(&other, &config, &system, &list, &cache),
        Err(Error::StaleCache)
    ));
    let moved = random_system(4, 4);
    let moved_list = full_list(&moved, &config);
    assert!(matches!(
        backward_forces(&pot.params, &config, &moved, &moved_list, &cache),
        Err(Error::StaleCache)
    ));
}

#[test]
fn species_and_cutoff_errors() {
    let config = tiny_config(1);
    let pot = GraphPotential::new(config.clone(), 4).unwrap();
    let system = System::new(vec![[0.0; 3]], vec![10], None, None, None).unwrap();
    assert!(matches!(
        pot.evaluate(&system, &full_list(&system, &config), false),
        Err(Error::SpeciesOutOfRange { species: 10, .. })
    ));
    let ok = random_system(3, 1);
    let wrong = build_neighbor_list(&ok, &NeighborSpec::new(3.0, 64)).unwrap();
    assert!(matches!(
        pot.evaluate(&ok, &wrong, false),
        Err(Error::CutoffMismatch { .. })
    ));
}

#[test]
fn padding_is_inert() {
    let config = tiny_config(2);
    let pot = GraphPotential::new(config.clone(), 6).unwrap();
    let system = random_system(6, 13);
    let list = full_list(&system, &config);
    let reference = pot.evaluate(&system, &list, true).unwrap();
    for capacity in [list.count(), 4 * list.count()] {
        let sized = list.with_capacity(capacity).unwrap();
        let padded = pad_static(&system, &sized, &config).unwrap();
        let out = energy_and_forces_padded(&pot.params, &config, &padded, true).unwrap();
        assert_eq!(out.energy, reference.energy);
        let forces = out.forces.unwrap();
        assert_eq!(forces.len(), system.len() + 1);
        assert_eq!(forces[padded.ghost], [0.0; 3]);
        assert_eq!(&forces[..system.len()], &reference.forces.clone().unwrap()[..]);
    }
}

#[test]
fn padding_requires_static_shapes() {
    let config = GNConfig {
        static_shapes: false,
        ..tiny_config(1)
    };
    let system = random_system(3, 1);
    let list = full_list(&system, &config);
    assert!(matches!(
        pad_static(&system, &list, &config),
        Err(Error::InvalidConfig(_))
    ));
}
