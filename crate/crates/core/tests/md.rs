use nnpkit::md::*;
use nnpkit::potential::{ComposedPotential, ForceField, ForceModel};
use nnpkit::priors::{Coulomb, PriorStack, PriorTerm, Zbl, D2};
use nnpkit::trainer::load_extxyz;
use nnpkit::units::{ACCEL, BOLTZMANN};
use nnpkit::{EnergyForces, Result, System};

/// Independent isotropic springs tying every atom to the origin.
struct Springs {
    k: f64,
}

impl ForceModel for Springs {
    fn compute(&self, system: &System) -> Result<EnergyForces> {
        let x = system.positions();
        let energy = x.iter().flatten().map(|v| 0.5 * self.k * v * v).sum();
        Ok(EnergyForces {
            energy: vec![energy],
            forces: Some(x.iter().map(|p| [-self.k * p[0], -self.k * p[1], -self.k * p[2]]).collect()),
            per_atom_energy: None,
        })
    }
}

fn cluster() -> (System, ForceField) {
    let pos = vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 3.0, 0.0], [0.0, 3.0, 0.3]];
    let sys = System::new(pos, vec![17; 4], None, None, Some(vec![0.4, -0.4, 0.4, -0.4])).unwrap();
    let stack = PriorStack::new(vec![
        PriorTerm::D2(D2::new(0.75).unwrap()),
        PriorTerm::Coulomb(Coulomb::new(1.0).unwrap()),
        PriorTerm::Zbl(Zbl),
    ]);
    (sys, ForceField::new(ComposedPotential::priors_only(stack, 12.0)))
}

#[test]
fn equipartition_of_harmonic_oscillators() {
    let n = 8;
    let sys = System::new(vec![[0.0; 3]; n], vec![1; n], None, None, None).unwrap();
    let mass = 10.0;
    let t = 298.5;
    let mut st = MDState::new(sys, None, Some(vec![mass; n]), t, 21).unwrap();
    let model = Springs { k: 1.0 };
    let (mut sum, mut count) = (0.0, 0usize);
    for step in 0..100_000 {
        langevin_middle_step(&mut st, &model, 1.0, t, 5.0).unwrap();
        if step >= 5_000 {
            sum += st.velocities.iter().flatten().map(|v| v * v).sum::<f64>();
            count += 3 * n;
        }
    }
    let expected = BOLTZMANN * t / mass * ACCEL;
    let measured = sum / count as f64;
    assert!((measured / expected - 1.0).abs() < 0.05, "{measured} vs {expected}");
}

#[test]
fn energy_is_conserved_without_friction() {
    let (sys, ff) = cluster();
    let mut st = MDState::new(sys, None, None, 100.0, 7).unwrap();
    let (traj, _) = run_simulation(&mut st, &ff, 10_000, 0.1, 0.0, 0.0, 50).unwrap();
    let e0 = traj.frames[0].potential_energy.unwrap() + traj.frames[0].kinetic_energy;
    let worst = traj
        .frames
        .iter()
        .map(|f| (f.potential_energy.unwrap() + f.kinetic_energy - e0).abs())
        .fold(0.0, f64::max);
    assert!(worst / 4.0 < 1e-3, "drift {worst}");
    assert_eq!(traj.frames.len(), 1 + 10_000 / 50);
}

#[test]
fn seeded_runs_are_bitwise_identical_and_bounded() {
    let (sys, ff) = cluster();
    let run = || {
        let mut st = MDState::new(sys.clone(), None, None, 298.5, 99).unwrap();
        run_simulation(&mut st, &ff, 10_000, 1.0, 298.5, 1.0, 500).unwrap().0
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    for f in &a.frames {
        assert!(f.positions.iter().flatten().all(|x| x.abs() < 1e3));
    }
}

#[test]
fn trajectory_and_sidecar_files() {
    let (sys, ff) = cluster();
    let mut st = MDState::new(sys, None, None, 50.0, 1).unwrap();
    let (traj, report) = run_simulation(&mut st, &ff, 20, 0.5, 50.0, 1.0, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let xyz = dir.path().join("traj.xyz");
    traj.write_extxyz(&xyz).unwrap();
    let back = load_extxyz(&xyz).unwrap().frames().unwrap();
    assert_eq!(back.len(), 5);
    for (f, g) in traj.frames.iter().zip(&back) {
        assert_eq!(f.positions, g.positions);
        assert_eq!(Some(g.energy), f.potential_energy);
    }
    let meta = dir.path().join("traj.meta");
    traj.metadata.write(&meta, Some(&report)).unwrap();
    let text = std::fs::read_to_string(meta).unwrap();
    assert!(text.contains("steps: 20\n") && text.contains("ns_per_day: "));
    assert!(rmsd(&back[0].positions, &back[4].positions, true).unwrap() <= rmsd(&back[0].positions, &back[4].positions, false).unwrap());
}

#[test]
fn non_finite_forces_abort_with_step() {
    struct Blowup;
    impl ForceModel for Blowup {
        fn compute(&self, system: &System) -> Result<EnergyForces> {
            let mut out = EnergyForces::zeros(1, system.len());
            if system.positions()[0][0] > 0.05 {
                out.forces.as_mut().unwrap()[0][0] = f64::NAN;
            }
            Ok(out)
        }
    }
    let sys = System::new(vec![[0.0; 3]], vec![1], None, None, None).unwrap();
    let mut st = MDState::new(sys, Some(vec![[0.01, 0.0, 0.0]]), None, 0.0, 0).unwrap();
    let err = run_simulation(&mut st, &Blowup, 100, 1.0, 0.0, 0.0, 1).unwrap_err();
    assert!(matches!(err, nnpkit::Error::NonFiniteForces(6)), "{err}");
}
