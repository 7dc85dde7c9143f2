//! Neighbor-search and model-inference benchmarks.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nnpkit::graph::{GNConfig, GraphPotential};
use nnpkit::neighbor::build_neighbor_list_growing;
use nnpkit::trainer::{load_structures, parse_structures};
use nnpkit::{
    build_neighbor_list, canonicalize, Error, NeighborList, NeighborSpec, Result, SimBox, Strategy,
    System,
};

use crate::config::BenchConfig;

/// Header of the main neighbor benchmark CSV.
pub const NEIGHBOR_CSV_HEADER: &str = "particles,batch,cell_ms,brute_ms";
pub const CAPACITY_CSV_HEADER: &str =
    "particles,batch,strategy,strategy_used,capacity,pairs,mean_neighbors,retried";
pub const MODEL_CSV_HEADER: &str = "structure,atoms,layers,mean_neighbors,ms_per_step,msteps_per_day";

/// Edge of the cubic box in which `n` uniform particles have on average `k`
/// neighbors within `cutoff`.
pub fn cloud_box_edge(n: usize, k: f64, cutoff: f64) -> f64 {
    (n as f64 * 4.0 * PI * cutoff.powi(3) / (3.0 * k)).cbrt()
}

/// Uniform random particles in a periodic cubic box sized for `k` expected
/// neighbors per particle, split into `batches` contiguous samples.
pub fn generate_cloud(n: usize, k: f64, cutoff: f64, batches: usize, seed: u64) -> Result<System> {
    if batches == 0 || n < batches {
        return Err(Error::InvalidConfig(format!(
            "need particles >= batches >= 1, got {n} particles and {batches} batches"
        )));
    }
    if !(k > 0.0 && cutoff > 0.0) {
        return Err(Error::InvalidConfig("neighbor count and cutoff must be positive".into()));
    }
    let edge = cloud_box_edge(n, k, cutoff);
    if cutoff > edge / 2.0 {
        return Err(Error::CutoffTooLarge {
            cutoff,
            half_width: edge / 2.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| [0; 3].map(|_| rng.gen_range(0.0..edge)))
        .collect();
    let batch = (0..n).map(|i| i * batches / n).collect();
    System::new(positions, vec![1; n], Some(batch), Some(SimBox::cubic(edge)?), None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTiming {
    pub strategy: Strategy,
    /// What actually ran; a cell request can fall back to brute force in
    /// boxes too small for a grid.
    pub strategy_used: Strategy,
    pub mean_ms: f64,
    pub capacity: usize,
    pub pairs: usize,
    /// Whether the first attempt overflowed and was rerun with doubled
    /// capacity.
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRow {
    pub particles: usize,
    pub batch: usize,
    pub timings: Vec<StrategyTiming>,
}

impl NeighborRow {
    pub fn timing(&self, strategy: Strategy) -> Option<&StrategyTiming> {
        self.timings.iter().find(|t| t.strategy == strategy)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborReport {
    pub rows: Vec<NeighborRow>,
}

fn ms(t: Option<&StrategyTiming>) -> String {
    t.map(|t| format!("{:.6}", t.mean_ms)).unwrap_or_default()
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Brute => "brute",
        Strategy::Cell => "cell",
        Strategy::Auto => "auto",
    }
}

impl NeighborReport {
    /// `particles,batch,cell_ms,brute_ms`; a strategy that was not run
    /// leaves its column empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{NEIGHBOR_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.particles,
                r.batch,
                ms(r.timing(Strategy::Cell)),
                ms(r.timing(Strategy::Brute))
            )?;
        }
        Ok(())
    }

    /// Capacities and pair counts behind every timing.
    pub fn write_capacity_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CAPACITY_CSV_HEADER}")?;
        for r in &self.rows {
            for t in &r.timings {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{:.4},{}",
                    r.particles,
                    r.batch,
                    strategy_name(t.strategy),
                    strategy_name(t.strategy_used),
                    t.capacity,
                    t.pairs,
                    2.0 * t.pairs as f64 / r.particles as f64,
                    t.retried
                )?;
            }
        }
        Ok(())
    }
}

/// Initial half-list capacity: 20% above the expected pair count.
pub fn initial_capacity(n: usize, k: f64, batches: usize) -> usize {
    (1.2 * n as f64 * k / (2.0 * batches as f64)).ceil() as usize + 16
}

/// Times one strategy on one system. Every run rebuilds the list from
/// scratch; when `reference` is given, each timed run's canonical pairs must
/// equal it.
pub fn time_strategy(
    system: &System,
    cutoff: f64,
    strategy: Strategy,
    capacity: usize,
    warmup: usize,
    repetitions: usize,
    reference: Option<&[(usize, usize)]>,
) -> Result<(StrategyTiming, NeighborList)> {
    let mut spec = NeighborSpec::new(cutoff, capacity)
        .with_strategy(strategy)
        .with_deterministic(false);
    let mut retried = false;
    let mut total = 0.0;
    let mut last = None;
    let mut run = 0;
    while run < warmup + repetitions {
        let start = Instant::now();
        let list = match build_neighbor_list(system, &spec) {
            Err(Error::Overflow { .. }) if !retried => {
                retried = true;
                spec.capacity *= 2;
                continue;
            }
            other => other?,
        };
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        if run >= warmup {
            total += elapsed;
            if let Some(want) = reference {
                if canonicalize(list.pairs()) != want {
                    return Err(Error::Corrupt(format!(
                        "{} repetition {} found a different pair set",
                        strategy_name(strategy),
                        run - warmup
                    )));
                }
            }
        }
        last = Some(list);
        run += 1;
    }
    let list = last.expect("at least one repetition");
    let timing = StrategyTiming {
        strategy,
        strategy_used: list.strategy_used(),
        mean_ms: total / repetitions as f64,
        capacity: spec.capacity,
        pairs: list.count(),
        retried,
    };
    Ok((timing, list))
}

/// Runs every (particles, batch, strategy) combination of the config.
/// `progress` receives each finished row.
pub fn bench_neighbors(
    config: &BenchConfig,
    seed: u64,
    mut progress: impl FnMut(&NeighborRow),
) -> Result<NeighborReport> {
    config.validate().map_err(Error::InvalidConfig)?;
    let mut report = NeighborReport::default();
    for &n in &config.particles {
        for &batch in &config.batches {
            let system = generate_cloud(n, config.neighbors_per_particle, config.cutoff, batch, seed)?;
            let capacity = initial_capacity(n, config.neighbors_per_particle, batch);
            let mut reference: Option<Vec<(usize, usize)>> = None;
            let mut timings = Vec::new();
            for &strategy in &config.strategies {
                let (timing, list) = time_strategy(
                    &system,
                    config.cutoff,
                    strategy,
                    capacity,
                    config.warmup,
                    config.repetitions,
                    reference.as_deref(),
                )?;
                if config.verify_pairs && reference.is_none() {
                    reference = Some(canonicalize(list.pairs()));
                }
                timings.push(timing);
            }
            let row = NeighborRow {
                particles: n,
                batch,
                timings,
            };
            progress(&row);
            report.rows.push(row);
        }
    }
    Ok(report)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

const WATER_8: &str = include_str!("../data/water_8.xyz");
const WATER_64: &str = include_str!("../data/water_64.xyz");
const WATER_216: &str = include_str!("../data/water_216.xyz");

/// Names of the structures compiled into the binary.
pub const BUILTIN_STRUCTURES: [&str; 3] = ["water_8", "water_64", "water_216"];

#[derive(Debug, Clone)]
pub struct Structure {
    pub name: String,
    pub system: System,
}

/// A built-in structure by name, otherwise the first frame of an extended
/// XYZ file.
pub fn load_structure(name_or_path: &str) -> Result<Structure> {
    let builtin = match name_or_path {
        "water_8" => Some(WATER_8),
        "water_64" => Some(WATER_64),
        "water_216" => Some(WATER_216),
        _ => None,
    };
    let path = Path::new(name_or_path);
    let frames = match builtin {
        Some(text) => parse_structures(text, path)?,
        None => load_structures(path)?,
    };
    let frame = frames
        .into_iter()
        .next()
        .ok_or_else(|| Error::Corrupt(format!("{name_or_path} contains no frames")))?;
    let name = match builtin {
        Some(_) => name_or_path.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name_or_path.to_string()),
    };
    Ok(Structure {
        name,
        system: frame.to_system()?,
    })
}

/// Model settings of the inference benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBenchConfig {
    pub model: GNConfig,
    pub max_num_neighbors: usize,
    pub layers: Vec<usize>,
    pub warmup: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for ModelBenchConfig {
    fn default() -> Self {
        ModelBenchConfig {
            model: GNConfig {
                embedding_dimension: 128,
                num_rbf: 32,
                cutoff_lower: 0.0,
                cutoff_upper: 4.5,
                max_z: 100,
                ..GNConfig::default()
            },
            max_num_neighbors: 32,
            layers: vec![0, 1, 2],
            warmup: 2,
            repetitions: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTiming {
    pub structure: String,
    pub atoms: usize,
    pub layers: usize,
    pub mean_neighbors: f64,
    pub ms_per_step: f64,
}

impl ModelTiming {
    pub fn msteps_per_day(&self) -> f64 {
        msteps_per_day(self.ms_per_step)
    }
}

/// Million steps per day from milliseconds per step.
pub fn msteps_per_day(ms_per_step: f64) -> f64 {
    86.4 / ms_per_step
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelTable {
    pub layers: Vec<usize>,
    pub rows: Vec<ModelTiming>,
}

impl ModelTable {
    pub fn get(&self, structure: &str, layers: usize) -> Option<&ModelTiming> {
        self.rows
            .iter()
            .find(|r| r.structure == structure && r.layers == layers)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{MODEL_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.3},{:.6},{:.6}",
                r.structure,
                r.atoms,
                r.layers,
                r.mean_neighbors,
                r.ms_per_step,
                r.msteps_per_day()
            )?;
        }
        Ok(())
    }

    /// Million steps per day, one row per structure and one column per
    /// layer count.
    pub fn to_text(&self) -> String {
        let mut names: Vec<(&str, usize)> = Vec::new();
        for r in &self.rows {
            if !names.iter().any(|(n, _)| *n == r.structure) {
                names.push((&r.structure, r.atoms));
            }
        }
        let mut s = format!("{:<16}{:>8}", "structure", "atoms");
        for l in &self.layers {
            s.push_str(&format!("{:>12}", format!("{l}L")));
        }
        s.push('\n');
        for (name, atoms) in names {
            s.push_str(&format!("{name:<16}{atoms:>8}"));
            for &l in &self.layers {
                let cell = self
                    .get(name, l)
                    .map(|r| format!("{:.3}", r.msteps_per_day()))
                    .unwrap_or_else(|| "-".into());
                s.push_str(&format!("{cell:>12}"));
            }
            s.push('\n');
        }
        s.push_str("(million steps per day of energy and force evaluation)\n");
        s
    }
}

/// Time of one energy-and-forces evaluation including the neighbor search.
/// Zero-layer models never look at pairs, so they skip the search.
fn model_step(
    pot: &GraphPotential,
    system: &System,
    spec: &NeighborSpec,
) -> Result<(f64, usize)> {
    let start = Instant::now();
    let list = if pot.config.num_layers == 0 {
        NeighborList::empty(system.len(), pot.config.cutoff_lower, pot.config.cutoff_upper)
    } else {
        build_neighbor_list_growing(system, spec)?
    };
    let out = pot.evaluate(system, &list, true)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(out);
    Ok((elapsed, list.count()))
}

pub fn bench_model(
    config: &ModelBenchConfig,
    structures: &[Structure],
    mut progress: impl FnMut(&ModelTiming),
) -> Result<ModelTable> {
    if config.repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    let mut table = ModelTable {
        layers: config.layers.clone(),
        rows: Vec::new(),
    };
    for s in structures {
        let n = s.system.len();
        for &layers in &config.layers {
            let model = GNConfig {
                num_layers: layers,
                ..config.model.clone()
            };
            let pot = GraphPotential::new(model, config.seed)?;
            let spec = NeighborSpec::new(
                pot.config.cutoff_upper,
                NeighborSpec::capacity_for(n, config.max_num_neighbors),
            )
            .with_lower(pot.config.cutoff_lower)
            .with_full_list(true);
            let mut total = 0.0;
            let mut pairs = 0;
            for run in 0..config.warmup + config.repetitions {
                let (elapsed, count) = model_step(&pot, &s.system, &spec)?;
                if run >= config.warmup {
                    total += elapsed;
                    pairs = count;
                }
            }
            let timing = ModelTiming {
                structure: s.name.clone(),
                atoms: n,
                layers,
                mean_neighbors: pairs as f64 / n as f64,
                ms_per_step: total / config.repetitions as f64,
            };
            progress(&timing);
            table.rows.push(timing);
        }
    }
    Ok(table)
}
