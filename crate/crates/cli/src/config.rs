//! Flat `key: value` configuration files.
//!
//! One setting per line, `#` starts a comment, lists are written as
//! `[a, b, c]` (brackets optional). Every key is optional; see [`KEYS`] for
//! the defaults.

use std::fmt;
use std::path::Path;

use nnpkit::elements;
use nnpkit::graph::Activation;
use nnpkit::trainer::{SplitSize, TrainConfig};
use nnpkit::Strategy;

/// A configuration key with its default (in file syntax) and meaning.
#[derive(Debug, Clone, Copy)]
pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(key: &'static str, default: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, default, doc }
}

pub const KEYS: &[KeyDoc] = &[
    key("embedding_dimension", "128", "width of atom features"),
    key("num_layers", "2", "number of interaction layers"),
    key("num_rbf", "32", "number of expnorm radial basis functions"),
    key("cutoff_lower", "0.0", "lower cutoff in Angstrom"),
    key("cutoff_upper", "5.0", "upper cutoff in Angstrom"),
    key("max_z", "100", "size of the species embedding table"),
    key("activation", "silu", "activation function"),
    key("trainable_rbf", "false", "train the radial basis means and widths"),
    key("static_shapes", "false", "pad inputs to fixed shapes with a ghost atom"),
    key("max_num_neighbors", "32", "neighbor slots reserved per atom"),
    key("derivative", "true", "compute forces alongside energies"),
    key("neighbor_strategy", "auto", "neighbor search: brute, cell or auto"),
    key("batch_size", "32", "frames per optimizer step"),
    key("num_epochs", "300", "maximum number of epochs"),
    key("lr", "0.001", "peak learning rate"),
    key("lr_warmup_steps", "0", "linear warmup length in optimizer steps"),
    key("lr_factor", "0.8", "learning rate multiplier on plateau"),
    key("lr_patience", "15", "non-improving epochs before a decay"),
    key("lr_min", "1e-7", "learning rate floor"),
    key("early_stopping_patience", "150", "non-improving epochs before stopping"),
    key("y_weight", "1.0", "weight of the energy loss"),
    key("neg_dy_weight", "0.0", "weight of the force loss (must be 0)"),
    key("ema_alpha_y", "1.0", "smoothing factor of the energy loss (1 = none)"),
    key("ema_alpha_neg_dy", "1.0", "smoothing factor of the force loss"),
    key("train_size", "0.8", "training frames: count, or fraction if below 1"),
    key("val_size", "0.1", "validation frames: count, or fraction if below 1"),
    key("seed", "1", "seed for splits, initialization, dynamics and clouds"),
    key("standardize", "true", "fit output mean and scale to the training set"),
    key("prior_model", "[]", "prior terms: Atomref, Coulomb, D2, ZBL"),
    key("atomref", "[]", "reference energies as Z=energy (symbols allowed)"),
    key("atomref_learnable", "false", "train the atomref table with the network"),
    key("d2_s6", "0.75", "global D2 dispersion scale"),
    key("coulomb_switch", "1.0", "Coulomb short-range switching radius in Angstrom"),
    key("temperature", "298.5", "thermostat and initial temperature in K"),
    key("gamma", "1.0", "Langevin friction in 1/ps (0 = constant energy)"),
    key("timestep", "1.0", "integration timestep in fs"),
    key("steps", "1000", "number of dynamics steps"),
    key("stride", "10", "steps between saved frames"),
    key("bench_particles", "[1024, 4096, 16384, 65536]", "cloud sizes"),
    key("bench_batches", "[1]", "number of batches the cloud is split into"),
    key("bench_neighbors_per_particle", "64", "expected neighbors per particle"),
    key("bench_cutoff", "5.0", "neighbor cutoff in Angstrom"),
    key("bench_repetitions", "50", "timed repetitions averaged per row"),
    key("bench_warmup", "2", "untimed repetitions before measuring"),
    key("bench_strategies", "[cell, brute]", "neighbor strategies to compare"),
    key("bench_verify_pairs", "false", "check that every repetition finds the same pairs"),
    key("bench_layers", "[0, 1, 2]", "interaction layer counts of the model benchmark"),
    key("bench_structures", "[water_8, water_64, water_216]", "built-in structure names or extended XYZ paths"),
    key("scan_pair", "[H, H]", "species of the scanned dimer"),
    key("scan_charges", "[0.0, 0.0]", "partial charges of the scanned dimer"),
    key("scan_min", "0.5", "first scanned distance in Angstrom"),
    key("scan_max", "5.0", "last scanned distance in Angstrom"),
    key("scan_points", "100", "number of scanned distances"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Atomref,
    Coulomb,
    D2,
    Zbl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub prior_model: Vec<PriorKind>,
    pub atomref: Vec<(u32, f64)>,
    pub atomref_learnable: bool,
    pub d2_s6: f64,
    pub coulomb_switch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdConfig {
    pub temperature: f64,
    pub gamma: f64,
    pub timestep: f64,
    pub steps: u64,
    pub stride: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub particles: Vec<usize>,
    pub batches: Vec<usize>,
    pub neighbors_per_particle: f64,
    pub cutoff: f64,
    pub repetitions: usize,
    pub warmup: usize,
    pub strategies: Vec<Strategy>,
    pub verify_pairs: bool,
    pub layers: Vec<usize>,
    pub structures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub pair: (u32, u32),
    pub charges: (f64, f64),
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Model and training settings; `train.seed` is the global seed.
    pub train: TrainConfig,
    pub derivative: bool,
    pub neighbor_strategy: Strategy,
    pub priors: PriorConfig,
    pub md: MdConfig,
    pub bench: BenchConfig,
    pub scan: ScanConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            train: TrainConfig::default(),
            derivative: true,
            neighbor_strategy: Strategy::Auto,
            priors: PriorConfig {
                prior_model: Vec::new(),
                atomref: Vec::new(),
                atomref_learnable: false,
                d2_s6: 0.75,
                coulomb_switch: 1.0,
            },
            md: MdConfig {
                temperature: 298.5,
                gamma: 1.0,
                timestep: 1.0,
                steps: 1000,
                stride: 10,
            },
            bench: BenchConfig {
                particles: vec![1024, 4096, 16384, 65536],
                batches: vec![1],
                neighbors_per_particle: 64.0,
                cutoff: 5.0,
                repetitions: 50,
                warmup: 2,
                strategies: vec![Strategy::Cell, Strategy::Brute],
                verify_pairs: false,
                layers: vec![0, 1, 2],
                structures: ["water_8", "water_64", "water_216"].map(String::from).to_vec(),
            },
            scan: ScanConfig {
                pair: (1, 1),
                charges: (0.0, 0.0),
                min: 0.5,
                max: 5.0,
                points: 100,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// `path:line`, or just the path for whole-file problems.
    pub location: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Reads and parses a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        location: path.display().to_string(),
        message: format!("cannot read config: {e}"),
    })?;
    parse_config_str(&text, &path.display().to_string())
}

/// Parses config text; `origin` prefixes error locations.
pub fn parse_config_str(text: &str, origin: &str) -> Result<Config, ConfigError> {
    let mut config = Config::default();
    let mut seen: Vec<&str> = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let at = |message: String| ConfigError {
            location: format!("{origin}:{}", index + 1),
            message,
        };
        let line = strip_comment(raw).trim();
        if line.is_empty() || line == "---" {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| at(format!("expected `key: value`, got `{line}`")))?;
        let key = key.trim();
        let value = unquote(value.trim());
        let Some(doc) = KEYS.iter().find(|d| d.key == key) else {
            return Err(at(unknown_key_message(key)));
        };
        if seen.contains(&doc.key) {
            return Err(at(format!("duplicate key `{key}`")));
        }
        seen.push(doc.key);
        set(&mut config, doc.key, value).map_err(|m| at(format!("{key}: {m}")))?;
    }
    config.validate().map_err(|message| ConfigError {
        location: origin.to_string(),
        message,
    })?;
    Ok(config)
}

/// The documented defaults, one `key: value  # doc` line per key.
pub fn defaults_text() -> String {
    KEYS.iter()
        .map(|d| format!("{}: {}  # {}\n", d.key, d.default, d.doc))
        .collect()
}

fn unknown_key_message(key: &str) -> String {
    let best = KEYS
        .iter()
        .map(|d| (strsim::levenshtein(key, d.key), d.key))
        .min();
    match best {
        Some((distance, candidate)) if distance <= 3.max(key.len() / 3) => {
            format!("unknown key `{key}`; did you mean `{candidate}`?")
        }
        _ => format!("unknown key `{key}`"),
    }
}

fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (k, &b) in bytes.iter().enumerate() {
        if b == b'#' && (k == 0 || bytes[k - 1].is_ascii_whitespace()) {
            return &line[..k];
        }
    }
    line
}

fn unquote(s: &str) -> &str {
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn list(value: &str) -> Vec<&str> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .unwrap_or(value)
        .trim();
    if inner.is_empty() {
        return Vec::new();
    }
    inner.split(',').map(|s| unquote(s.trim())).collect()
}

fn int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn float(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got `{s}`")),
    }
}

fn boolean(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn species(s: &str) -> Result<u32, String> {
    if let Ok(z) = s.parse::<u32>() {
        return Ok(z);
    }
    elements::atomic_number(s).ok_or_else(|| format!("unknown element `{s}`"))
}

fn split_size(s: &str) -> Result<SplitSize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(SplitSize::Count(n));
    }
    let f = float(s)?;
    if (0.0..=1.0).contains(&f) {
        Ok(SplitSize::Fraction(f))
    } else {
        Err(format!("expected a count or a fraction in [0, 1], got `{s}`"))
    }
}

fn pair<T>(value: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<(T, T), String> {
    match list(value).as_slice() {
        [a, b] => Ok((item(a)?, item(b)?)),
        other => Err(format!("expected two entries, got {}", other.len())),
    }
}

fn prior_kind(s: &str) -> Result<PriorKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "atomref" => Ok(PriorKind::Atomref),
        "coulomb" => Ok(PriorKind::Coulomb),
        "d2" => Ok(PriorKind::D2),
        "zbl" => Ok(PriorKind::Zbl),
        _ => Err(format!("unknown prior `{s}` (expected Atomref, Coulomb, D2 or ZBL)")),
    }
}

fn atomref_entry(s: &str) -> Result<(u32, f64), String> {
    let (z, e) = s
        .split_once('=')
        .or_else(|| s.split_once(':'))
        .ok_or_else(|| format!("expected Z=energy, got `{s}`"))?;
    Ok((species(z.trim())?, float(e.trim())?))
}

fn set(c: &mut Config, key: &str, v: &str) -> Result<(), String> {
    let m = &mut c.train.model;
    match key {
        "embedding_dimension" => m.embedding_dimension = int(v)?,
        "num_layers" => m.num_layers = int(v)?,
        "num_rbf" => m.num_rbf = int(v)?,
        "cutoff_lower" => m.cutoff_lower = float(v)?,
        "cutoff_upper" => m.cutoff_upper = float(v)?,
        "max_z" => m.max_z = int(v)?,
        "activation" => {
            m.activation = match v.to_ascii_lowercase().as_str() {
                "silu" | "swish" => Activation::Silu,
                _ => return Err(format!("unsupported activation `{v}` (expected silu)")),
            }
        }
        "trainable_rbf" => m.trainable_rbf = boolean(v)?,
        "static_shapes" => m.static_shapes = boolean(v)?,
        "max_num_neighbors" => c.train.max_num_neighbors = int(v)?,
        "derivative" => c.derivative = boolean(v)?,
        "neighbor_strategy" => c.neighbor_strategy = v.to_ascii_lowercase().parse()?,
        "batch_size" => c.train.batch_size = int(v)?,
        "num_epochs" => c.train.num_epochs = int(v)?,
        "lr" => c.train.lr = float(v)?,
        "lr_warmup_steps" => c.train.lr_warmup_steps = int(v)?,
        "lr_factor" => c.train.lr_factor = float(v)?,
        "lr_patience" => c.train.lr_patience = int(v)?,
        "lr_min" => c.train.lr_min = float(v)?,
        "early_stopping_patience" => c.train.early_stopping_patience = int(v)?,
        "y_weight" => c.train.y_weight = float(v)?,
        "neg_dy_weight" => c.train.neg_dy_weight = float(v)?,
        "ema_alpha_y" => c.train.ema_alpha_y = float(v)?,
        "ema_alpha_neg_dy" => c.train.ema_alpha_neg_dy = float(v)?,
        "train_size" => c.train.train_size = split_size(v)?,
        "val_size" => c.train.val_size = split_size(v)?,
        "seed" => c.train.seed = int(v)?,
        "standardize" => c.train.standardize = boolean(v)?,
        "prior_model" => c.priors.prior_model = list(v).into_iter().map(prior_kind).collect::<Result<_, _>>()?,
        "atomref" => c.priors.atomref = list(v).into_iter().map(atomref_entry).collect::<Result<_, _>>()?,
        "atomref_learnable" => c.priors.atomref_learnable = boolean(v)?,
        "d2_s6" => c.priors.d2_s6 = float(v)?,
        "coulomb_switch" => c.priors.coulomb_switch = float(v)?,
        "temperature" => c.md.temperature = float(v)?,
        "gamma" => c.md.gamma = float(v)?,
        "timestep" => c.md.timestep = float(v)?,
        "steps" => c.md.steps = int(v)?,
        "stride" => c.md.stride = int(v)?,
        "bench_particles" => c.bench.particles = list(v).into_iter().map(int).collect::<Result<_, _>>()?,
        "bench_batches" => c.bench.batches = list(v).into_iter().map(int).collect::<Result<_, _>>()?,
        "bench_neighbors_per_particle" => c.bench.neighbors_per_particle = float(v)?,
        "bench_cutoff" => c.bench.cutoff = float(v)?,
        "bench_repetitions" => c.bench.repetitions = int(v)?,
        "bench_warmup" => c.bench.warmup = int(v)?,
        "bench_strategies" => {
            c.bench.strategies = list(v)
                .into_iter()
                .map(|s| s.to_ascii_lowercase().parse())
                .collect::<Result<_, _>>()?
        }
        "bench_verify_pairs" => c.bench.verify_pairs = boolean(v)?,
        "bench_layers" => c.bench.layers = list(v).into_iter().map(int).collect::<Result<_, _>>()?,
        "bench_structures" => c.bench.structures = list(v).into_iter().map(String::from).collect(),
        "scan_pair" => c.scan.pair = pair(v, species)?,
        "scan_charges" => c.scan.charges = pair(v, float)?,
        "scan_min" => c.scan.min = float(v)?,
        "scan_max" => c.scan.max = float(v)?,
        "scan_points" => c.scan.points = int(v)?,
        other => unreachable!("key `{other}` is documented but not handled"),
    }
    Ok(())
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.particles.is_empty() || self.batches.is_empty() {
            return Err("bench_particles and bench_batches must not be empty".into());
        }
        if self.particles.iter().chain(&self.batches).any(|&n| n == 0) {
            return Err("particle and batch counts must be at least 1".into());
        }
        if self.repetitions == 0 {
            return Err("bench_repetitions must be at least 1".into());
        }
        if !(self.neighbors_per_particle > 0.0) || !(self.cutoff > 0.0) {
            return Err("bench_neighbors_per_particle and bench_cutoff must be positive".into());
        }
        if self.strategies.is_empty() {
            return Err("bench_strategies must not be empty".into());
        }
        Ok(())
    }
}

impl Config {
    /// Cross-field checks not tied to a single line.
    pub fn validate(&self) -> Result<(), String> {
        self.bench.validate()?;
        if self.priors.prior_model.contains(&PriorKind::Atomref) && self.priors.atomref.is_empty() {
            return Err("prior_model lists Atomref but the atomref table is empty".into());
        }
        if self.md.stride == 0 {
            return Err("stride must be at least 1".into());
        }
        if self.scan.points < 2 || !(self.scan.min > 0.0 && self.scan.min < self.scan.max) {
            return Err("scan needs scan_points >= 2 and 0 < scan_min < scan_max".into());
        }
        Ok(())
    }
}
