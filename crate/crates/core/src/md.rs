//! Langevin molecular dynamics, trajectories, RMSD and throughput.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::elements;
use crate::error::{Error, Result};
use crate::geometry::{SimBox, Vec3};
use crate::potential::ForceModel;
use crate::system::System;
use crate::trainer::write_extxyz_frame;
use crate::units::{ACCEL, BOLTZMANN};

/// RNG stream reserved for velocity initialization; step `s` uses stream `s`.
const INIT_STREAM: u64 = u64::MAX;

/// Positions, velocities (Å/fs) and masses (amu) of a running simulation.
#[derive(Debug, Clone)]
pub struct MDState {
    pub system: System,
    pub velocities: Vec<Vec3>,
    pub masses: Vec<f64>,
    /// Elapsed time in fs.
    pub time: f64,
    pub step: u64,
    pub seed: u64,
    forces: Option<Vec<Vec3>>,
    potential_energy: Option<f64>,
}

impl MDState {
    /// Masses default to standard atomic weights; velocities default to a
    /// Maxwell-Boltzmann draw at `temperature`.
    pub fn new(
        system: System,
        velocities: Option<Vec<Vec3>>,
        masses: Option<Vec<f64>>,
        temperature: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = system.len();
        let masses = match masses {
            Some(m) => m,
            None => system
                .species()
                .iter()
                .map(|&z| elements::mass(z).ok_or(Error::InvalidAtomicNumber(z)))
                .collect::<Result<_>>()?,
        };
        if masses.len() != n {
            return Err(Error::LengthMismatch {
                what: "masses",
                expected: n,
                found: masses.len(),
            });
        }
        if let Some(bad) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidConfig(format!("masses must be positive, got {bad}")));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature must be non-negative, got {temperature}")));
        }
        let velocities = match velocities {
            Some(v) if v.len() != n => {
                return Err(Error::LengthMismatch {
                    what: "velocities",
                    expected: n,
                    found: v.len(),
                })
            }
            Some(v) => v,
            None => maxwell_boltzmann(&masses, temperature, seed),
        };
        Ok(MDState {
            system,
            velocities,
            masses,
            time: 0.0,
            step: 0,
            seed,
            forces: None,
            potential_energy: None,
        })
    }

    /// Kinetic energy in eV.
    pub fn kinetic_energy(&self) -> f64 {
        let sum: f64 = self
            .velocities
            .iter()
            .zip(&self.masses)
            .map(|(v, m)| m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
            .sum();
        0.5 * sum / ACCEL
    }

    /// Instantaneous kinetic temperature with 3N degrees of freedom.
    pub fn temperature(&self) -> f64 {
        2.0 * self.kinetic_energy() / (3.0 * self.masses.len() as f64 * BOLTZMANN)
    }

    /// Potential energy at the current positions, if already evaluated.
    pub fn potential_energy(&self) -> Option<f64> {
        self.potential_energy
    }

    pub fn forces(&self) -> Option<&[Vec3]> {
        self.forces.as_deref()
    }

    /// Evaluates forces at the current positions unless they are cached.
    pub fn ensure_forces(&mut self, model: &dyn ForceModel) -> Result<()> {
        if self.forces.is_none() {
            let out = model.compute(&self.system)?;
            let forces = out
                .forces
                .ok_or_else(|| Error::InvalidConfig("force model returned no forces".into()))?;
            if forces.iter().flatten().any(|f| !f.is_finite()) {
                return Err(Error::NonFiniteForces(self.step));
            }
            self.potential_energy = Some(out.energy.iter().sum());
            self.forces = Some(forces);
        }
        Ok(())
    }
}

/// Per-component velocities drawn from N(0, k_B T / m).
pub fn maxwell_boltzmann(masses: &[f64], temperature: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    masses
        .iter()
        .map(|&m| {
            let s = (BOLTZMANN * temperature / m * ACCEL).sqrt();
            let mut draw = || {
                let xi: f64 = StandardNormal.sample(&mut rng);
                s * xi
            };
            [draw(), draw(), draw()]
        })
        .collect()
}

/// One Langevin middle step: kick with the cached forces, half drift,
/// Ornstein-Uhlenbeck velocity update, half drift, then new forces.
///
/// `dt` in fs, `temperature` in K, `gamma` in 1/ps.
pub fn langevin_middle_step(
    state: &mut MDState,
    model: &dyn ForceModel,
    dt: f64,
    temperature: f64,
    gamma: f64,
) -> Result<()> {
    state.ensure_forces(model)?;
    let forces = state.forces.take().unwrap();
    let c1 = (-gamma * 1e-3 * dt).exp();
    let c2 = (1.0 - c1 * c1).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
    rng.set_stream(state.step);
    let mut positions = state.system.positions().to_vec();
    for (i, ((x, v), f)) in positions.iter_mut().zip(&mut state.velocities).zip(&forces).enumerate() {
        let m = state.masses[i];
        let sigma = (BOLTZMANN * temperature / m * ACCEL).sqrt();
        for c in 0..3 {
            v[c] += dt * f[c] / m * ACCEL;
            x[c] += 0.5 * dt * v[c];
            let xi: f64 = StandardNormal.sample(&mut rng);
            v[c] = c1 * v[c] + c2 * sigma * xi;
            x[c] += 0.5 * dt * v[c];
        }
    }
    state.system = state.system.with_positions(positions)?;
    state.step += 1;
    state.time += dt;
    state.potential_energy = None;
    state.ensure_forces(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFrame {
    pub step: u64,
    pub time: f64,
    pub positions: Vec<Vec3>,
    pub potential_energy: Option<f64>,
    pub kinetic_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub steps: u64,
    pub dt: f64,
    pub temperature: f64,
    pub gamma: f64,
    pub seed: u64,
    pub stride: u64,
    pub n_atoms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub stride: u64,
    pub species: Vec<u32>,
    pub cell: SimBox,
    pub frames: Vec<TrajectoryFrame>,
    pub metadata: RunMetadata,
}

impl Trajectory {
    pub fn write_extxyz(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for f in &self.frames {
            let extra = [
                ("step", f.step.to_string()),
                ("time_fs", format!("{:?}", f.time)),
                ("kinetic_energy", format!("{:?}", f.kinetic_energy)),
            ];
            write_extxyz_frame(
                &mut out,
                &f.positions,
                &self.species,
                f.potential_energy,
                None,
                Some(&self.cell),
                &extra,
            )
            .map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

impl RunMetadata {
    /// Flat `key: value` lines.
    pub fn to_text(&self, report: Option<&Throughput>) -> String {
        let mut s = format!(
            "steps: {}\ndt_fs: {}\ntemperature_k: {}\ngamma_per_ps: {}\nseed: {}\nstride: {}\nn_atoms: {}\n",
            self.steps, self.dt, self.temperature, self.gamma, self.seed, self.stride, self.n_atoms
        );
        if let Some(r) = report {
            s.push_str(&format!(
                "wall_seconds: {}\nmsteps_per_day: {}\nns_per_day: {}\n",
                r.wall_seconds, r.msteps_per_day, r.ns_per_day
            ));
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>, report: Option<&Throughput>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text(report)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub wall_seconds: f64,
    pub msteps_per_day: f64,
    pub ns_per_day: f64,
}

/// Million steps per day and ns per day for `steps` steps of `dt` fs taking
/// `wall_seconds`. One million steps per day at 1 fs is exactly 1 ns/day.
pub fn throughput(steps: f64, wall_seconds: f64, dt: f64) -> Throughput {
    let msteps_per_day = steps * 86400.0 / (wall_seconds * 1e6);
    Throughput {
        wall_seconds,
        msteps_per_day,
        ns_per_day: msteps_per_day * dt,
    }
}

fn capture(state: &MDState) -> TrajectoryFrame {
    TrajectoryFrame {
        step: state.step,
        time: state.time,
        positions: state.system.positions().to_vec(),
        potential_energy: state.potential_energy,
        kinetic_energy: state.kinetic_energy(),
    }
}

/// Runs `steps` Langevin steps, recording the initial frame and every
/// `stride`-th frame after it.
pub fn run_simulation(
    state: &mut MDState,
    model: &dyn ForceModel,
    steps: u64,
    dt: f64,
    temperature: f64,
    gamma: f64,
    stride: u64,
) -> Result<(Trajectory, Throughput)> {
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be at least 1".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "require dt > 0 and gamma >= 0, got dt={dt}, gamma={gamma}"
        )));
    }
    let start = Instant::now();
    state.ensure_forces(model)?;
    let mut frames = vec![capture(state)];
    for k in 1..=steps {
        langevin_middle_step(state, model, dt, temperature, gamma)?;
        if k % stride == 0 {
            frames.push(capture(state));
        }
    }
    let wall = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    let trajectory = Trajectory {
        stride,
        species: state.system.species().to_vec(),
        cell: *state.system.cell(),
        frames,
        metadata: RunMetadata {
            steps,
            dt,
            temperature,
            gamma,
            seed: state.seed,
            stride,
            n_atoms: state.system.len(),
        },
    };
    Ok((trajectory, throughput(steps as f64, wall, dt)))
}

/// Root mean square deviation in Å, optionally after optimal rigid
/// superposition of `frame` onto `reference`.
pub fn rmsd(reference: &[Vec3], frame: &[Vec3], align: bool) -> Result<f64> {
    if reference.len() != frame.len() {
        return Err(Error::AtomCountMismatch(reference.len(), frame.len()));
    }
    if reference.is_empty() {
        return Err(Error::EmptySystem);
    }
    let n = reference.len() as f64;
    let p: Vec<Vector3<f64>> = frame.iter().map(|v| Vector3::from(*v)).collect();
    let q: Vec<Vector3<f64>> = reference.iter().map(|v| Vector3::from(*v)).collect();
    if !align {
        let sum: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).norm_squared()).sum();
        return Ok((sum / n).sqrt());
    }
    let cp = p.iter().sum::<Vector3<f64>>() / n;
    let cq = q.iter().sum::<Vector3<f64>>() / n;
    let h: Matrix3<f64> = p
        .iter()
        .zip(&q)
        .map(|(a, b)| (a - cp) * (b - cq).transpose())
        .sum();
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rot = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let sum: f64 = p
        .iter()
        .zip(&q)
        .map(|(a, b)| (rot * (a - cp) - (b - cq)).norm_squared())
        .sum();
    Ok((sum / n).sqrt())
}
