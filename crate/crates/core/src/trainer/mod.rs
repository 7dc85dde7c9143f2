//! Datasets, splits, losses, optimization and checkpoints.

mod adam;
pub mod arrays;
mod checkpoint;
mod dataset;
mod loss;
mod schedule;
mod split;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use dataset::{
    container_arrays, load_binary_container, load_extxyz, load_structures, parse_extxyz, parse_structures, save_binary_container, save_extxyz,
    write_container, write_extxyz_frame, Dataset, Frame, Source, CONTAINER_MAGIC,
};
pub use loss::{ema_update, loss_and_metrics, Mode};
pub use schedule::{EpochOutcome, LrSchedule};
pub use split::{split, Split, SplitSize};

use crate::error::{Error, Result};
use crate::graph::{backward_forces, backward_params, forward, GNConfig, GNParams};
use crate::neighbor::{build_neighbor_list_growing, NeighborList, NeighborSpec};
use crate::priors::{PriorStack, PriorTerm};
use crate::system::{EnergyForces, System};

/// Training hyperparameters. Field names follow the usual configuration
/// vocabulary (`lr_warmup_steps`, `ema_alpha_y`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: GNConfig,
    pub batch_size: usize,
    pub num_epochs: usize,
    pub lr: f64,
    pub lr_warmup_steps: usize,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub lr_min: f64,
    pub early_stopping_patience: usize,
    pub y_weight: f64,
    pub neg_dy_weight: f64,
    pub ema_alpha_y: f64,
    pub ema_alpha_neg_dy: f64,
    pub train_size: SplitSize,
    pub val_size: SplitSize,
    pub seed: u64,
    pub max_num_neighbors: usize,
    /// Fit the per-atom mean and spread of the training targets into the
    /// model's output scaling before training.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: GNConfig::default(),
            batch_size: 32,
            num_epochs: 300,
            lr: 1e-3,
            lr_warmup_steps: 0,
            lr_factor: 0.8,
            lr_patience: 15,
            lr_min: 1e-7,
            early_stopping_patience: 150,
            y_weight: 1.0,
            neg_dy_weight: 0.0,
            ema_alpha_y: 1.0,
            ema_alpha_neg_dy: 1.0,
            train_size: SplitSize::Fraction(0.8),
            val_size: SplitSize::Fraction(0.1),
            seed: 1,
            max_num_neighbors: 32,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.neg_dy_weight != 0.0 {
            return Err(Error::InvalidConfig(
                "neg_dy_weight must be 0: training on forces needs second derivatives of the \
                 network (double backprop), which this trainer does not implement; force errors \
                 are still reported in validation and test metrics"
                    .into(),
            ));
        }
        if self.batch_size == 0 || self.max_num_neighbors == 0 {
            return Err(Error::InvalidConfig(
                "batch_size and max_num_neighbors must be at least 1".into(),
            ));
        }
        for (name, a) in [("ema_alpha_y", self.ema_alpha_y), ("ema_alpha_neg_dy", self.ema_alpha_neg_dy)] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must be in (0, 1], got {a}")));
            }
        }
        if !(self.y_weight >= 0.0 && self.y_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!("y_weight must be non-negative, got {}", self.y_weight)));
        }
        self.schedule().map(|_| ())
    }

    fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(
            self.lr,
            self.lr_warmup_steps,
            self.lr_factor,
            self.lr_patience,
            self.lr_min,
            self.early_stopping_patience,
        )
    }
}

/// Optimizer, schedule and smoothing state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub step: usize,
    pub epoch: usize,
    pub adam: Adam,
    pub schedule: LrSchedule,
    /// Smoothed validation energy MSE.
    pub ema_y: Option<f64>,
    /// Smoothed validation force MSE, when the data carry forces.
    pub ema_neg_dy: Option<f64>,
    /// Smoothed training loss.
    pub ema_train: Option<f64>,
    pub alpha_y: f64,
    pub alpha_neg_dy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate in effect at the end of the epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub train_loss_ema: f64,
    pub val: BTreeMap<String, f64>,
    /// Smoothed validation loss fed to the plateau detector.
    pub val_loss_ema: f64,
    pub improved: bool,
    pub lr_decayed: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Validation metrics of the freshly initialized model.
    pub initial_val: BTreeMap<String, f64>,
    pub history: Vec<EpochRecord>,
    /// Test metrics of the best parameters (empty without a test set).
    pub test: BTreeMap<String, f64>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// Validation metrics of the retained (best) parameters.
    pub fn best_val(&self) -> Option<&BTreeMap<String, f64>> {
        self.history
            .iter()
            .filter(|r| r.improved)
            .last()
            .map(|r| &r.val)
    }
}

/// One frame prepared for training: its system, target and prior offsets.
struct Prepared {
    system: System,
    energy: f64,
    forces: Option<Vec<[f64; 3]>>,
    prior: EnergyForces,
}

struct Context<'a> {
    config: &'a GNConfig,
    max_num_neighbors: usize,
}

impl Context<'_> {
    fn list(&self, system: &System) -> Result<NeighborList> {
        let spec = NeighborSpec::new(
            self.config.cutoff_upper,
            NeighborSpec::capacity_for(system.len(), self.max_num_neighbors),
        )
        .with_lower(self.config.cutoff_lower)
        .with_full_list(true);
        build_neighbor_list_growing(system, &spec)
    }

    fn batch(&self, frames: &[&Prepared]) -> Result<System> {
        let parts: Vec<&System> = frames.iter().map(|f| &f.system).collect();
        System::concatenate(&parts)
    }

    /// Model predictions (network plus priors) for a group of frames.
    fn predict(&self, params: &GNParams, frames: &[&Prepared], with_forces: bool) -> Result<EnergyForces> {
        let system = self.batch(frames)?;
        let list = self.list(&system)?;
        let (mut out, cache) = forward(params, self.config, &system, &list)?;
        if with_forces {
            out.forces = Some(backward_forces(params, self.config, &system, &list, &cache)?);
        }
        let mut forces = Vec::new();
        for (s, f) in frames.iter().enumerate() {
            out.energy[s] += f.prior.energy[0];
            if let Some(pf) = &f.prior.forces {
                forces.extend_from_slice(pf);
            }
        }
        if let Some(nf) = out.forces.as_mut() {
            for (a, b) in nf.iter_mut().zip(&forces) {
                for c in 0..3 {
                    a[c] += b[c];
                }
            }
        }
        out.per_atom_energy = None;
        Ok(out)
    }

    /// Metrics over `indices`, evaluated in batches of `batch_size`.
    fn evaluate(
        &self,
        params: &GNParams,
        data: &[Prepared],
        indices: &[usize],
        batch_size: usize,
        with_forces: bool,
        y_weight: f64,
        mode: Mode,
    ) -> Result<BTreeMap<String, f64>> {
        if indices.is_empty() {
            return Ok(BTreeMap::new());
        }
        let chunks: Vec<&[usize]> = indices.chunks(batch_size).collect();
        let parts = chunks
            .par_iter()
            .map(|chunk| {
                let frames: Vec<&Prepared> = chunk.iter().map(|&i| &data[i]).collect();
                self.predict(params, &frames, with_forces)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut pred = EnergyForces {
            energy: Vec::new(),
            forces: with_forces.then(Vec::new),
            per_atom_energy: None,
        };
        for p in parts {
            pred.energy.extend(p.energy);
            if let (Some(all), Some(f)) = (pred.forces.as_mut(), p.forces) {
                all.extend(f);
            }
        }
        let target = EnergyForces {
            energy: indices.iter().map(|&i| data[i].energy).collect(),
            forces: with_forces.then(|| {
                indices
                    .iter()
                    .flat_map(|&i| data[i].forces.clone().unwrap())
                    .collect()
            }),
            per_atom_energy: None,
        };
        loss_and_metrics(&pred, &target, y_weight, 0.0, mode)
    }
}

/// Splits a prior stack into the fixed terms and a learnable atomref table.
fn separate_learnable(stack: Option<&PriorStack>, max_z: usize) -> (PriorStack, Option<Vec<f64>>) {
    let mut fixed = PriorStack::default();
    let mut learnable = None;
    for term in stack.map(|s| s.terms.as_slice()).unwrap_or_default() {
        match term {
            PriorTerm::Atomref(a) if a.learnable => {
                let table = learnable.get_or_insert_with(|| vec![0.0; max_z]);
                for (t, v) in table.iter_mut().zip(a.dense(max_z)) {
                    *t += v;
                }
            }
            other => {
                fixed.push(other.clone());
            }
        }
    }
    (fixed, learnable)
}

/// Mini-batch Adam training of a graph network (plus optional priors) on
/// energies. Returns the best checkpoint together with the epoch history.
pub fn train(config: &TrainConfig, dataset: &Dataset, stack: Option<&PriorStack>) -> Result<TrainOutcome> {
    config.validate()?;
    let mut model = config.model.clone();
    let (priors, learnable_atomref) = separate_learnable(stack, model.max_z);
    let with_forces = dataset.has_forces()?;

    let split = split::split(dataset.len(), config.train_size, config.val_size, config.seed)?;
    let prior_ctx = Context {
        config: &config.model,
        max_num_neighbors: config.max_num_neighbors,
    };
    let data = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let frame = dataset.frame(i)?;
            let system = frame.to_system()?;
            for &z in system.species() {
                if z as usize >= model.max_z {
                    return Err(Error::SpeciesOutOfRange {
                        species: z,
                        max_z: model.max_z,
                    });
                }
            }
            let prior = if priors.is_empty() {
                EnergyForces::zeros(1, system.len())
            } else {
                priors.evaluate(&system, &prior_ctx.list(&system)?)?
            };
            Ok(Prepared {
                system,
                energy: frame.energy,
                forces: frame.forces,
                prior,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if config.standardize {
        let residuals: Vec<f64> = split
            .train
            .iter()
            .map(|&i| {
                let d = &data[i];
                let reference: f64 = learnable_atomref
                    .as_ref()
                    .map_or(0.0, |t| d.system.species().iter().map(|&z| t[z as usize]).sum());
                (d.energy - d.prior.energy[0] - reference) / d.system.len() as f64
            })
            .collect();
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        model.mean = mean;
        model.std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let ctx_model = model.clone();
    let ctx = Context {
        config: &ctx_model,
        max_num_neighbors: config.max_num_neighbors,
    };

    let mut params = GNParams::init(&model, config.seed);
    params.atomref = learnable_atomref;
    let mut state = TrainerState {
        step: 0,
        epoch: 0,
        adam: Adam::new(params.len()),
        schedule: config.schedule()?,
        ema_y: None,
        ema_neg_dy: None,
        ema_train: None,
        alpha_y: config.ema_alpha_y,
        alpha_neg_dy: config.ema_alpha_neg_dy,
    };
    let evaluate_val = |params: &GNParams| {
        ctx.evaluate(params, &data, &split.val, config.batch_size, with_forces, config.y_weight, Mode::Val)
    };
    let initial_val = evaluate_val(&params)?;
    let mut best = params.clone();
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut flat = params.flatten();
    let mut order = split.train.clone();

    for epoch in 1..=config.num_epochs {
        state.epoch = epoch;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let frames: Vec<&Prepared> = chunk.iter().map(|&i| &data[i]).collect();
            let system = ctx.batch(&frames)?;
            let list = ctx.list(&system)?;
            let (out, cache) = forward(&params, &model, &system, &list)?;
            let b = frames.len() as f64;
            let residual: Vec<f64> = frames
                .iter()
                .enumerate()
                .map(|(s, f)| out.energy[s] + f.prior.energy[0] - f.energy)
                .collect();
            let batch_loss = config.y_weight * residual.iter().map(|r| r * r).sum::<f64>() / b;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step: state.step,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss * b;
            let upstream: Vec<f64> = residual.iter().map(|r| 2.0 * config.y_weight * r / b).collect();
            let grads = backward_params(&params, &model, &system, &list, &cache, &upstream)?.flatten();
            let lr = state.schedule.lr_at(state.step);
            state.adam.step(&mut flat, &grads, lr);
            params.assign(&flat);
            state.step += 1;
        }
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: state.step,
                loss: f64::NAN,
            });
        }
        let train_loss = loss_sum / order.len() as f64;
        let train_ema = ema_update(state.ema_train, train_loss, state.alpha_y);
        state.ema_train = Some(train_ema);

        let val = evaluate_val(&params)?;
        let monitored = if let Some(&y_mse) = val.get("y_mse") {
            let ema_y = ema_update(state.ema_y, y_mse, state.alpha_y);
            state.ema_y = Some(ema_y);
            if let Some(&f_mse) = val.get("neg_dy_mse") {
                state.ema_neg_dy = Some(ema_update(state.ema_neg_dy, f_mse, state.alpha_neg_dy));
            }
            config.y_weight * ema_y + config.neg_dy_weight * state.ema_neg_dy.unwrap_or(0.0)
        } else {
            train_ema
        };
        if !monitored.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: state.step,
                loss: monitored,
            });
        }
        let outcome = state.schedule.end_epoch(monitored);
        if outcome.improved {
            best = params.clone();
        }
        history.push(EpochRecord {
            epoch,
            lr: state.schedule.lr,
            train_loss,
            train_loss_ema: train_ema,
            val,
            val_loss_ema: monitored,
            improved: outcome.improved,
            lr_decayed: outcome.lr_decayed,
        });
        if outcome.stop {
            stopped_early = true;
            break;
        }
    }

    let test = ctx.evaluate(&best, &data, &split.test, config.batch_size, with_forces, config.y_weight, Mode::Test)?;
    let mut stored = config.clone();
    stored.model = model;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: stored,
            params: best,
            priors,
            state,
            split,
        },
        initial_val,
        history,
        test,
        stopped_early,
    })
}

/// Frames of an isolated dimer `(zi, zj)` at uniformly drawn separations in
/// `[d_min, d_max]`, labelled with one prior term's energy and forces.
pub fn dimer_curve_frames(
    term: &PriorTerm,
    pair: (u32, u32),
    n: usize,
    (d_min, d_max): (f64, f64),
    cutoff: f64,
    seed: u64,
) -> Result<Vec<Frame>> {
    if !(d_min > 0.0 && d_min < d_max) {
        return Err(Error::InvalidGrid(format!("need 0 < d_min < d_max, got [{d_min}, {d_max}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stack = PriorStack::new(vec![term.clone()]);
    (0..n)
        .map(|_| {
            let d = rng.gen_range(d_min..=d_max);
            let positions = vec![[0.0; 3], [d, 0.0, 0.0]];
            let species = vec![pair.0, pair.1];
            let system = System::new(positions.clone(), species.clone(), None, None, None)?;
            let list = build_neighbor_list_growing(&system, &NeighborSpec::new(cutoff, 2).with_full_list(true))?;
            let out = stack.evaluate(&system, &list)?;
            Ok(Frame {
                positions,
                species,
                energy: out.energy[0],
                forces: out.forces,
                cell: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{Atomref, Zbl};

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            model: GNConfig {
                embedding_dimension: 8,
                num_layers: 1,
                num_rbf: 8,
                cutoff_upper: 5.0,
                max_z: 10,
                ..GNConfig::default()
            },
            batch_size: 8,
            num_epochs: 3,
            lr: 1e-3,
            train_size: SplitSize::Count(24),
            val_size: SplitSize::Count(8),
            ..TrainConfig::default()
        }
    }

    fn tiny_data() -> Dataset {
        let frames = dimer_curve_frames(&PriorTerm::Zbl(Zbl), (1, 1), 40, (0.8, 3.0), 5.0, 7).unwrap();
        Dataset::from_frames(frames).unwrap()
    }

    #[test]
    fn force_weight_is_rejected() {
        let cfg = TrainConfig {
            neg_dy_weight: 1.0,
            ..tiny_config()
        };
        let err = train(&cfg, &tiny_data(), None).unwrap_err();
        assert!(err.to_string().contains("double backprop"), "{err}");
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = train(&tiny_config(), &tiny_data(), None).unwrap();
        let b = train(&tiny_config(), &tiny_data(), None).unwrap();
        let bits = |o: &TrainOutcome| o.checkpoint.params.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.history.len(), 3);
        assert_eq!(a.checkpoint.state.step, 3 * 3);
        assert!(a.test.contains_key("y_l1") && a.test.contains_key("neg_dy_l1"));
        assert!(a.history[0].val.contains_key("neg_dy_mse"));
    }

    #[test]
    fn learnable_atomref_moves_into_parameters() {
        let stack = PriorStack::new(vec![
            PriorTerm::Atomref(Atomref::new(&[(1, -0.5)], true)),
            PriorTerm::Zbl(Zbl),
        ]);
        let out = train(&tiny_config(), &tiny_data(), Some(&stack)).unwrap();
        let ck = &out.checkpoint;
        assert_eq!(ck.priors.terms.len(), 1);
        let table = ck.params.atomref.as_ref().unwrap();
        assert_eq!(table.len(), 10);
        assert_ne!(table[1], -0.5);
    }

    #[test]
    fn species_beyond_table_is_rejected() {
        let frames = dimer_curve_frames(&PriorTerm::Zbl(Zbl), (1, 17), 40, (1.0, 3.0), 5.0, 7).unwrap();
        let err = train(&tiny_config(), &Dataset::from_frames(frames).unwrap(), None).unwrap_err();
        assert!(matches!(err, Error::SpeciesOutOfRange { .. }));
    }

    #[test]
    fn huge_learning_rate_diverges_with_diagnostic() {
        let cfg = TrainConfig {
            lr: 1e150,
            num_epochs: 50,
            standardize: false,
            ..tiny_config()
        };
        match train(&cfg, &tiny_data(), None) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch >= 1),
            Ok(_) => panic!("expected divergence"),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
