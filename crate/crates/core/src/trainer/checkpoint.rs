//! Versioned little-endian checkpoint: magic `MDKC`, u32 version, u32 array
//! count, then named arrays in the dataset-container encoding.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::adam::Adam;
use super::arrays::{scan_headers, Array};
use super::schedule::LrSchedule;
use super::split::{Split, SplitSize};
use super::{TrainConfig, TrainerState};
use crate::error::{Error, Result};
use crate::graph::{Activation, GNConfig, GNParams, GraphPotential};
use crate::potential::ComposedPotential;
use crate::priors::{Atomref, Coulomb, PriorStack, PriorTerm, Zbl, D2};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MDKC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to evaluate or inspect a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Best parameters seen during training (model standardization lives in
    /// `config.model`).
    pub params: GNParams,
    /// Fixed priors; a learnable atomref is carried in `params.atomref`.
    pub priors: PriorStack,
    pub state: TrainerState,
    pub split: Split,
}

impl Checkpoint {
    pub fn network(&self) -> GraphPotential {
        GraphPotential {
            config: self.config.model.clone(),
            params: self.params.clone(),
        }
    }

    /// The trained network plus its priors, ready for inference or MD.
    pub fn potential(&self) -> ComposedPotential {
        ComposedPotential::with_network(self.network(), self.priors.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arrays = encode(self);
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for a in &arrays {
            a.write(&mut out).expect("writing to a Vec cannot fail");
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated("checkpoint header".into()));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Corrupt("not a checkpoint file".into()));
        }
        if bytes.len() < 12 {
            return Err(Error::Truncated("checkpoint header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let arrays: BTreeMap<String, Array> = scan_headers(bytes, 12, count)?
            .into_iter()
            .map(|h| (h.name.clone(), h.decode(bytes)))
            .collect();
        decode(&Reader(arrays))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&ckpt.to_bytes()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

fn f64s(name: &str, v: Vec<f64>) -> Array {
    Array::f64(name, vec![v.len() as u64], v)
}

fn i64s(name: &str, v: Vec<i64>) -> Array {
    Array::i64(name, vec![v.len() as u64], v)
}

fn split_size(s: SplitSize) -> (i64, f64) {
    match s {
        SplitSize::Count(c) => (0, c as f64),
        SplitSize::Fraction(f) => (1, f),
    }
}

fn opt(v: Option<f64>) -> (i64, f64) {
    v.map_or((0, 0.0), |x| (1, x))
}

fn encode(ck: &Checkpoint) -> Vec<Array> {
    let c = &ck.config;
    let m = &c.model;
    let (train_kind, train_val) = split_size(c.train_size);
    let (val_kind, val_val) = split_size(c.val_size);
    let mut out = vec![
        i64s(
            "config.int",
            vec![
                m.embedding_dimension as i64,
                m.num_layers as i64,
                m.num_rbf as i64,
                m.max_z as i64,
                match m.activation {
                    Activation::Silu => 0,
                },
                m.trainable_rbf as i64,
                m.static_shapes as i64,
                c.batch_size as i64,
                c.num_epochs as i64,
                c.lr_warmup_steps as i64,
                c.lr_patience as i64,
                c.early_stopping_patience as i64,
                train_kind,
                val_kind,
                c.seed as i64,
                c.max_num_neighbors as i64,
                c.standardize as i64,
            ],
        ),
        f64s(
            "config.float",
            vec![
                m.cutoff_lower,
                m.cutoff_upper,
                m.mean,
                m.std,
                c.lr,
                c.lr_factor,
                c.lr_min,
                c.y_weight,
                c.neg_dy_weight,
                c.ema_alpha_y,
                c.ema_alpha_neg_dy,
                train_val,
                val_val,
            ],
        ),
    ];
    ck.params.for_each(|name, t| out.push(f64s(&format!("param.{name}"), t.to_vec())));

    out.push(i64s("prior.count", vec![ck.priors.terms.len() as i64]));
    for (k, term) in ck.priors.terms.iter().enumerate() {
        let p = format!("prior.{k}");
        match term {
            PriorTerm::Atomref(a) => {
                out.push(i64s(&format!("{p}.kind"), vec![0, a.learnable as i64]));
                let e = a.entries();
                out.push(i64s(&format!("{p}.z"), e.iter().map(|e| e.0 as i64).collect()));
                out.push(f64s(&format!("{p}.values"), e.iter().map(|e| e.1).collect()));
            }
            PriorTerm::Coulomb(c) => {
                out.push(i64s(&format!("{p}.kind"), vec![1]));
                out.push(f64s(&format!("{p}.values"), vec![c.switch_radius]));
            }
            PriorTerm::D2(d) => {
                out.push(i64s(&format!("{p}.kind"), vec![2]));
                let e = d.entries();
                out.push(i64s(&format!("{p}.z"), e.iter().map(|e| e.0 as i64).collect()));
                let mut v = vec![d.s6, d.d_steep];
                for &(_, c6, r0) in &e {
                    v.extend([c6, r0]);
                }
                out.push(f64s(&format!("{p}.values"), v));
            }
            PriorTerm::Zbl(_) => out.push(i64s(&format!("{p}.kind"), vec![3])),
        }
    }

    let st = &ck.state;
    let s = &st.schedule;
    let (has_y, ema_y) = opt(st.ema_y);
    let (has_f, ema_f) = opt(st.ema_neg_dy);
    let (has_t, ema_t) = opt(st.ema_train);
    out.push(i64s(
        "state.int",
        vec![
            st.step as i64,
            st.epoch as i64,
            st.adam.t as i64,
            s.warmup_steps as i64,
            s.lr_patience as i64,
            s.early_stopping_patience as i64,
            s.plateau_epochs as i64,
            s.epochs_since_best as i64,
            has_y,
            has_f,
            has_t,
        ],
    ));
    out.push(f64s(
        "state.float",
        vec![
            s.lr,
            s.lr_factor,
            s.lr_min,
            s.best,
            ema_y,
            ema_f,
            ema_t,
            st.alpha_y,
            st.alpha_neg_dy,
            st.adam.beta1,
            st.adam.beta2,
            st.adam.eps,
        ],
    ));
    out.push(f64s("state.adam_m", st.adam.m.clone()));
    out.push(f64s("state.adam_v", st.adam.v.clone()));

    out.push(i64s("split.seed", vec![ck.split.seed as i64]));
    for (name, idx) in [("train", &ck.split.train), ("val", &ck.split.val), ("test", &ck.split.test)] {
        out.push(i64s(&format!("split.{name}"), idx.iter().map(|&i| i as i64).collect()));
    }
    out
}

struct Reader(BTreeMap<String, Array>);

impl Reader {
    fn get(&self, name: &str) -> Result<&Array> {
        self.0
            .get(name)
            .ok_or_else(|| Error::Corrupt(format!("missing array `{name}`")))
    }

    fn f64s(&self, name: &str, len: Option<usize>) -> Result<&[f64]> {
        let v = self.get(name)?.as_f64().map_err(|e| Error::Corrupt(e.to_string()))?;
        check_len(name, v.len(), len)?;
        Ok(v)
    }

    fn i64s(&self, name: &str, len: Option<usize>) -> Result<&[i64]> {
        let v = self.get(name)?.as_i64().map_err(|e| Error::Corrupt(e.to_string()))?;
        check_len(name, v.len(), len)?;
        Ok(v)
    }

    fn indices(&self, name: &str) -> Result<Vec<usize>> {
        self.i64s(name, None)?
            .iter()
            .map(|&i| usize::try_from(i).map_err(|_| Error::Corrupt(format!("negative index in `{name}`"))))
            .collect()
    }
}

fn check_len(name: &str, found: usize, expected: Option<usize>) -> Result<()> {
    match expected {
        Some(n) if n != found => Err(Error::Corrupt(format!(
            "array `{name}` has {found} entries, expected {n}"
        ))),
        _ => Ok(()),
    }
}

fn usize_of(v: i64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Corrupt(format!("negative count {v}")))
}

fn split_size_of(kind: i64, value: f64) -> Result<SplitSize> {
    match kind {
        0 => Ok(SplitSize::Count(value as usize)),
        1 => Ok(SplitSize::Fraction(value)),
        k => Err(Error::Corrupt(format!("unknown split kind {k}"))),
    }
}

fn decode(r: &Reader) -> Result<Checkpoint> {
    let ci = r.i64s("config.int", Some(17))?;
    let cf = r.f64s("config.float", Some(13))?;
    let model = GNConfig {
        embedding_dimension: usize_of(ci[0])?,
        num_layers: usize_of(ci[1])?,
        num_rbf: usize_of(ci[2])?,
        max_z: usize_of(ci[3])?,
        activation: match ci[4] {
            0 => Activation::Silu,
            a => return Err(Error::Corrupt(format!("unknown activation code {a}"))),
        },
        trainable_rbf: ci[5] != 0,
        static_shapes: ci[6] != 0,
        cutoff_lower: cf[0],
        cutoff_upper: cf[1],
        mean: cf[2],
        std: cf[3],
    };
    model
        .validate()
        .map_err(|e| Error::Corrupt(format!("stored model configuration is invalid: {e}")))?;
    let config = TrainConfig {
        model: model.clone(),
        batch_size: usize_of(ci[7])?,
        num_epochs: usize_of(ci[8])?,
        lr_warmup_steps: usize_of(ci[9])?,
        lr_patience: usize_of(ci[10])?,
        early_stopping_patience: usize_of(ci[11])?,
        train_size: split_size_of(ci[12], cf[11])?,
        val_size: split_size_of(ci[13], cf[12])?,
        seed: ci[14] as u64,
        max_num_neighbors: usize_of(ci[15])?,
        standardize: ci[16] != 0,
        lr: cf[4],
        lr_factor: cf[5],
        lr_min: cf[6],
        y_weight: cf[7],
        neg_dy_weight: cf[8],
        ema_alpha_y: cf[9],
        ema_alpha_neg_dy: cf[10],
    };

    let mut params = GNParams::init(&model, 0);
    if r.0.contains_key("param.atomref") {
        params.atomref = Some(vec![0.0; model.max_z]);
    }
    let mut failure = None;
    params.for_each_mut(|name, t| {
        if failure.is_some() {
            return;
        }
        match r.f64s(&format!("param.{name}"), Some(t.len())) {
            Ok(v) => t.copy_from_slice(v),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let n_priors = usize_of(r.i64s("prior.count", Some(1))?[0])?;
    let mut priors = PriorStack::default();
    for k in 0..n_priors {
        let p = format!("prior.{k}");
        let kind = r.i64s(&format!("{p}.kind"), None)?;
        let bad = |e: Error| Error::Corrupt(format!("prior {k}: {e}"));
        let term = match kind.first() {
            Some(0) if kind.len() == 2 => {
                let z = r.i64s(&format!("{p}.z"), None)?;
                let v = r.f64s(&format!("{p}.values"), Some(z.len()))?;
                let entries: Vec<(u32, f64)> = z.iter().zip(v).map(|(&z, &e)| (z as u32, e)).collect();
                PriorTerm::Atomref(Atomref::new(&entries, kind[1] != 0))
            }
            Some(1) => PriorTerm::Coulomb(Coulomb::new(r.f64s(&format!("{p}.values"), Some(1))?[0]).map_err(bad)?),
            Some(2) => {
                let z = r.i64s(&format!("{p}.z"), None)?;
                let v = r.f64s(&format!("{p}.values"), Some(2 + 2 * z.len()))?;
                let entries: Vec<(u32, f64, f64)> = z
                    .iter()
                    .enumerate()
                    .map(|(e, &z)| (z as u32, v[2 + 2 * e], v[3 + 2 * e]))
                    .collect();
                PriorTerm::D2(D2::with_table(v[0], v[1], &entries).map_err(bad)?)
            }
            Some(3) => PriorTerm::Zbl(Zbl),
            _ => return Err(Error::Corrupt(format!("prior {k} has unknown kind {kind:?}"))),
        };
        priors.push(term);
    }

    let si = r.i64s("state.int", Some(11))?;
    let sf = r.f64s("state.float", Some(12))?;
    let n = params.len();
    let opt = |flag: i64, v: f64| (flag != 0).then_some(v);
    let state = TrainerState {
        step: usize_of(si[0])?,
        epoch: usize_of(si[1])?,
        adam: Adam {
            beta1: sf[9],
            beta2: sf[10],
            eps: sf[11],
            m: r.f64s("state.adam_m", Some(n))?.to_vec(),
            v: r.f64s("state.adam_v", Some(n))?.to_vec(),
            t: si[2] as u64,
        },
        schedule: LrSchedule {
            lr: sf[0],
            warmup_steps: usize_of(si[3])?,
            lr_factor: sf[1],
            lr_patience: usize_of(si[4])?,
            lr_min: sf[2],
            early_stopping_patience: usize_of(si[5])?,
            best: sf[3],
            plateau_epochs: usize_of(si[6])?,
            epochs_since_best: usize_of(si[7])?,
        },
        ema_y: opt(si[8], sf[4]),
        ema_neg_dy: opt(si[9], sf[5]),
        ema_train: opt(si[10], sf[6]),
        alpha_y: sf[7],
        alpha_neg_dy: sf[8],
    };

    let split = Split {
        seed: r.i64s("split.seed", Some(1))?[0] as u64,
        train: r.indices("split.train")?,
        val: r.indices("split.val")?,
        test: r.indices("split.test")?,
    };
    Ok(Checkpoint {
        config,
        params,
        priors,
        state,
        split,
    })
}
