//! The subcommands, independent of argument parsing.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nnpkit::md::{run_simulation, MDState};
use nnpkit::potential::{ComposedPotential, ForceField};
use nnpkit::priors::{dimer_scan, Atomref, Coulomb, PriorStack, PriorTerm, Zbl, D2};
use nnpkit::trainer::{
    load_binary_container, load_checkpoint, load_extxyz, load_structures, save_checkpoint, train,
    write_extxyz_frame, Dataset, CONTAINER_MAGIC,
};
use nnpkit::SimBox;

use crate::bench::{self, ModelBenchConfig};
use crate::config::{Config, PriorKind};
use crate::error::{io_error, CliError};

/// Prior terms named by `prior_model`, in order.
pub fn prior_stack(config: &Config) -> Result<PriorStack, CliError> {
    let p = &config.priors;
    let mut stack = PriorStack::default();
    for kind in &p.prior_model {
        let term = match kind {
            PriorKind::Atomref => PriorTerm::Atomref(Atomref::new(&p.atomref, p.atomref_learnable)),
            PriorKind::Coulomb => PriorTerm::Coulomb(Coulomb::new(p.coulomb_switch)?),
            PriorKind::D2 => PriorTerm::D2(D2::new(p.d2_s6)?),
            PriorKind::Zbl => PriorTerm::Zbl(Zbl),
        };
        stack.push(term);
    }
    Ok(stack)
}

/// Opens a dataset, choosing the binary container or extended XYZ reader
/// from the file's first bytes.
pub fn open_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut magic = [0u8; 4];
    let is_container = File::open(path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .map(|_| magic == *CONTAINER_MAGIC)
        .unwrap_or(false);
    Ok(if is_container {
        load_binary_container(path)?
    } else {
        load_extxyz(path)?
    })
}

/// Output destination: a file, or stdout when no path is given.
pub fn writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

/// Trains a model and writes the best checkpoint to `output` and the epoch
/// history next to it as `<output>.history.csv`.
pub fn train_command(config: &Config, dataset: &Path, output: &Path) -> Result<(), CliError> {
    let data = open_dataset(dataset)?;
    let stack = prior_stack(config)?;
    eprintln!("training on {} frames from {}", data.len(), dataset.display());
    let outcome = train(&config.train, &data, Some(&stack))?;
    save_checkpoint(&outcome.checkpoint, output)?;

    let history_path = sibling(output, ".history.csv");
    let mut out = writer(Some(&history_path))?;
    let w = |e| io_error(&history_path, e);
    writeln!(out, "epoch,lr,train_loss,train_loss_ema,val_loss,val_loss_ema,improved,lr_decayed").map_err(w)?;
    for r in &outcome.history {
        let val = r.val.get("loss").copied().unwrap_or(f64::NAN);
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.epoch, r.lr, r.train_loss, r.train_loss_ema, val, r.val_loss_ema, r.improved, r.lr_decayed
        )
        .map_err(w)?;
    }
    out.flush().map_err(w)?;

    if let Some(v) = outcome.initial_val.get("loss") {
        println!("initial validation loss: {v:e}");
    }
    if let Some(best) = outcome.best_val() {
        for (k, v) in best {
            println!("best validation {k}: {v:e}");
        }
    }
    for (k, v) in &outcome.test {
        println!("test {k}: {v:e}");
    }
    println!(
        "{} epochs{}; checkpoint written to {}",
        outcome.history.len(),
        if outcome.stopped_early { " (stopped early)" } else { "" },
        output.display()
    );
    Ok(())
}

fn potential(config: &Config, checkpoint: Option<&Path>) -> Result<ComposedPotential, CliError> {
    match checkpoint {
        Some(path) => Ok(load_checkpoint(path)?.potential()),
        None => {
            let stack = prior_stack(config)?;
            if stack.is_empty() {
                return Err(CliError::Usage(
                    "no checkpoint given and prior_model is empty: nothing to evaluate".into(),
                ));
            }
            Ok(ComposedPotential::priors_only(stack, config.train.model.cutoff_upper))
        }
    }
}

/// Langevin dynamics from the first frame of `structure`; the trajectory
/// goes to `output` and the run metadata to `<output>.meta`.
pub fn simulate_command(
    config: &Config,
    structure: &Path,
    checkpoint: Option<&Path>,
    output: &Path,
) -> Result<(), CliError> {
    let frame = load_structures(structure)?
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Data(format!("{} contains no frames", structure.display())))?;
    let field = ForceField::new(potential(config, checkpoint)?).with_strategy(config.neighbor_strategy);
    let md = &config.md;
    let mut state = MDState::new(frame.to_system()?, None, None, md.temperature, config.train.seed)?;
    let (trajectory, report) = run_simulation(
        &mut state,
        &field,
        md.steps,
        md.timestep,
        md.temperature,
        md.gamma,
        md.stride,
    )?;
    trajectory.write_extxyz(output)?;
    trajectory.metadata.write(sibling(output, ".meta"), Some(&report))?;
    println!(
        "{} steps, final temperature {:.2} K, {:.4} million steps/day ({:.4} ns/day)",
        md.steps,
        state.temperature(),
        report.msteps_per_day,
        report.ns_per_day
    );
    Ok(())
}

/// Energies and forces of every frame in `structures`, written as extended
/// XYZ.
pub fn infer_command(
    config: &Config,
    checkpoint: &Path,
    structures: &Path,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let mut pot = potential(config, Some(checkpoint))?;
    pot.derivative = config.derivative;
    let field = ForceField::new(pot.clone()).with_strategy(config.neighbor_strategy);
    let frames = load_structures(structures)?;
    let mut out = writer(output)?;
    let label = output.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"));
    for (k, frame) in frames.iter().enumerate() {
        let system = frame.to_system()?;
        let list = field.neighbors(&system)?;
        let result = pot.evaluate(&system, &list)?;
        let cell: Option<SimBox> = frame.cell.map(SimBox::from_vectors).transpose()?;
        write_extxyz_frame(
            &mut out,
            &frame.positions,
            &frame.species,
            Some(result.energy[0]),
            result.forces.as_deref(),
            cell.as_ref(),
            &[("frame", k.to_string())],
        )
        .map_err(|e| io_error(&label, e))?;
        if output.is_some() {
            println!("frame {k}: energy {:.10} eV", result.energy[0]);
        }
    }
    out.flush().map_err(|e| io_error(&label, e))
}

/// Neighbor benchmark; the capacity statistics go to
/// `<output>.capacity.csv`, or follow the main table on stdout.
pub fn bench_neighbors_command(config: &Config, output: Option<&Path>) -> Result<(), CliError> {
    let report = bench::bench_neighbors(&config.bench, config.train.seed, |row| {
        let parts: Vec<String> = row
            .timings
            .iter()
            .map(|t| format!("{:?} {:.3} ms{}", t.strategy, t.mean_ms, if t.retried { " (retried)" } else { "" }))
            .collect();
        eprintln!("particles {} batch {}: {}", row.particles, row.batch, parts.join(", "));
    })?;
    let label = output.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut out = writer(output)?;
    report.write_csv(&mut out).map_err(|e| io_error(&label, e))?;
    match output {
        Some(p) => {
            out.flush().map_err(|e| io_error(p, e))?;
            let cap = sibling(p, ".capacity.csv");
            let mut c = writer(Some(&cap))?;
            report.write_capacity_csv(&mut c).map_err(|e| io_error(&cap, e))?;
            c.flush().map_err(|e| io_error(&cap, e))
        }
        None => {
            writeln!(out).map_err(|e| io_error(&label, e))?;
            report.write_capacity_csv(&mut out).map_err(|e| io_error(&label, e))?;
            out.flush().map_err(|e| io_error(&label, e))
        }
    }
}

/// Inference benchmark over the configured structures and layer counts.
/// Prints the table; `output`, when given, receives the CSV.
pub fn bench_model_command(config: &Config, output: Option<&Path>) -> Result<(), CliError> {
    let structures = config
        .bench
        .structures
        .iter()
        .map(|s| bench::load_structure(s))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = ModelBenchConfig {
        layers: config.bench.layers.clone(),
        warmup: config.bench.warmup,
        repetitions: config.bench.repetitions,
        seed: config.train.seed,
        ..ModelBenchConfig::default()
    };
    let table = bench::bench_model(&settings, &structures, |t| {
        eprintln!("{} {}L: {:.4} ms/step", t.structure, t.layers, t.ms_per_step);
    })?;
    print!("{}", table.to_text());
    if let Some(p) = output {
        let mut out = writer(Some(p))?;
        table.write_csv(&mut out).map_err(|e| io_error(p, e))?;
        out.flush().map_err(|e| io_error(p, e))?;
    }
    Ok(())
}

/// Dimer energy of every configured prior term over the scan grid, one
/// column per term plus their sum.
pub fn scan_prior_command(config: &Config, output: Option<&Path>) -> Result<(), CliError> {
    let stack = prior_stack(config)?;
    if stack.is_empty() {
        return Err(CliError::Usage("prior_model is empty: nothing to scan".into()));
    }
    let s = &config.scan;
    let distances: Vec<f64> = (0..s.points)
        .map(|k| s.min + (s.max - s.min) * k as f64 / (s.points - 1) as f64)
        .collect();
    let charges = stack
        .terms
        .iter()
        .any(|t| matches!(t, PriorTerm::Coulomb(_)))
        .then_some(s.charges);
    let profiles = stack
        .terms
        .iter()
        .map(|t| dimer_scan(t, s.pair, charges, &distances, s.max))
        .collect::<Result<Vec<_>, _>>()?;

    let label = output.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"));
    let w = |e| io_error(&label, e);
    let mut out = writer(output)?;
    let names: Vec<String> = stack.terms.iter().map(|t| format!("{}_ev", t.name())).collect();
    writeln!(out, "distance_angstrom,{},total_ev", names.join(",")).map_err(w)?;
    for (k, d) in distances.iter().enumerate() {
        let values: Vec<f64> = profiles.iter().map(|p| p.energies[k]).collect();
        let cols: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{d},{},{}", cols.join(","), values.iter().sum::<f64>()).map_err(w)?;
    }
    out.flush().map_err(w)
}
