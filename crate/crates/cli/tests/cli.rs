use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nnpkit::priors::{PriorTerm, Zbl};
use nnpkit::trainer::{dimer_curve_frames, save_binary_container, save_extxyz, Frame};

fn nnpkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnpkit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(path).unwrap().trim_end().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn dimer_frames(n: usize) -> Vec<Frame> {
    dimer_curve_frames(&PriorTerm::Zbl(Zbl), (1, 1), n, (0.8, 3.0), 5.0, 2).unwrap()
}

const SMALL_MODEL: &str = "embedding_dimension: 8\nnum_layers: 1\nnum_rbf: 4\nmax_z: 10\nbatch_size: 8\n";

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let out = nnpkit(dir.path(), &[flag]);
        assert_eq!(code(&out), 0, "{flag}");
    }
    assert!(stdout(&nnpkit(dir.path(), &["--help"])).contains("bench-neighbors"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nnpkit(dir.path(), &[])), 1);
    assert_eq!(code(&nnpkit(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&nnpkit(dir.path(), &["scan-prior", "--bogus"])), 1);
    assert_eq!(code(&nnpkit(dir.path(), &["train"])), 1);
    assert_eq!(code(&nnpkit(dir.path(), &["scan-prior", "--threads", "0"])), 1);

    let cfg = write(dir.path(), "bad.yaml", "num_rbf: 8\ncutoff_uper: 5.0\n");
    let out = nnpkit(dir.path(), &["scan-prior", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bad.yaml:2") && stderr(&out).contains("did you mean `cutoff_upper`"), "{}", stderr(&out));

    let cfg = write(dir.path(), "typed.yaml", "num_layers: many\n");
    assert_eq!(code(&nnpkit(dir.path(), &["scan-prior", "--config", &cfg])), 1);
    assert_eq!(code(&nnpkit(dir.path(), &["scan-prior", "--config", "missing.yaml"])), 1);
    let empty = write(dir.path(), "empty.yaml", "");
    let out = nnpkit(dir.path(), &["scan-prior", "--config", &empty]);
    assert_eq!(code(&out), 1, "empty prior_model has nothing to scan");

    let cfg = write(dir.path(), "forces.yaml", "neg_dy_weight: 1.0\n");
    let data = dir.path().join("d.xyz");
    save_extxyz(&dimer_frames(10), &data).unwrap();
    let out = nnpkit(dir.path(), &["train", data.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("double backprop"));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nnpkit(dir.path(), &["train", "no_such_file.xyz"])), 2);
    let bad = write(dir.path(), "bad.xyz", "2\nenergy=1.0\nH 0 0 0\nXx 1 0 0\n");
    let out = nnpkit(dir.path(), &["train", &bad]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.xyz:4"), "{}", stderr(&out));
    let truncated = write(dir.path(), "cut.bin", "MDK1\u{1}");
    assert_eq!(code(&nnpkit(dir.path(), &["train", &truncated])), 2);
    let cfg = write(dir.path(), "zbl.yaml", "prior_model: [ZBL]\n");
    assert_eq!(code(&nnpkit(dir.path(), &["simulate", "nowhere.xyz", "--config", &cfg])), 2);
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.xyz");
    save_extxyz(&dimer_frames(40), &data).unwrap();
    let cfg = write(dir.path(), "hot.yaml", &format!("{SMALL_MODEL}lr: 1e150\nnum_epochs: 5\n"));
    let out = nnpkit(dir.path(), &["train", data.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn train_then_infer_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.bin");
    save_binary_container(&dimer_frames(60), &data).unwrap();
    let cfg = write(dir.path(), "c.yaml", &format!("{SMALL_MODEL}num_epochs: 3\nprior_model: [ZBL]\n"));
    let out = nnpkit(dir.path(), &["train", "d.bin", "--config", &cfg, "--output", "m.ckpt", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("m.ckpt").exists());
    let history = fs::read_to_string(dir.path().join("m.ckpt.history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next().unwrap(), golden("history.csv"));
    assert_eq!(lines.count(), 3);

    let probe = dir.path().join("probe.xyz");
    save_extxyz(&dimer_frames(3), &probe).unwrap();
    let out = nnpkit(dir.path(), &["infer", "m.ckpt", "probe.xyz", "--output", "pred.xyz"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 3);
    let pred = nnpkit::trainer::load_extxyz(dir.path().join("pred.xyz")).unwrap();
    assert_eq!(pred.len(), 3);
    assert!(pred.has_forces().unwrap());

    let md = write(dir.path(), "md.yaml", &format!("{SMALL_MODEL}steps: 20\nstride: 5\ntimestep: 0.5\n"));
    let out = nnpkit(dir.path(), &["simulate", "probe.xyz", "m.ckpt", "--config", &md, "--output", "t.xyz"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(nnpkit::trainer::load_extxyz(dir.path().join("t.xyz")).unwrap().len(), 5);
    let meta = fs::read_to_string(dir.path().join("t.xyz.meta")).unwrap();
    assert!(meta.contains("steps: 20") && meta.contains("msteps_per_day: "));
}

#[test]
fn simulate_with_priors_only_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let water = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/water_8.xyz");
    let cfg = write(dir.path(), "md.yaml", "prior_model: [ZBL, D2]\nsteps: 30\nstride: 10\ncutoff_upper: 6.0\n");
    let run = |out: &str| {
        let o = nnpkit(dir.path(), &["simulate", water.to_str().unwrap(), "--config", &cfg, "--output", out, "--seed", "9"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("a.xyz"), run("b.xyz"));
}

#[test]
fn scan_prior_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.yaml", "prior_model: [ZBL, D2]\nscan_pair: [O, H]\nscan_points: 7\n");
    let out = nnpkit(dir.path(), &["scan-prior", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], golden("scan.csv"));
    assert_eq!(lines.len(), 8);
    for l in &lines[1..] {
        let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 4);
        assert!((cols[1] + cols[2] - cols[3]).abs() < 1e-12);
    }
}

#[test]
fn bench_neighbors_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.yaml",
        "bench_particles: [300, 600]\nbench_batches: [1, 2, 3]\nbench_neighbors_per_particle: 16\n\
         bench_cutoff: 1.0\nbench_repetitions: 2\nbench_warmup: 1\nbench_verify_pairs: true\n",
    );
    let out = nnpkit(dir.path(), &["bench-neighbors", "--config", &cfg, "--output", "n.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let main = fs::read_to_string(dir.path().join("n.csv")).unwrap();
    let lines: Vec<&str> = main.lines().collect();
    assert_eq!(lines[0], golden("neighbors.csv"));
    assert_eq!(lines.len(), 1 + 2 * 3);
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert!(cols[2].parse::<f64>().unwrap() > 0.0 && cols[3].parse::<f64>().unwrap() > 0.0);
    }
    let cap = fs::read_to_string(dir.path().join("n.csv.capacity.csv")).unwrap();
    let cap_lines: Vec<&str> = cap.lines().collect();
    assert_eq!(cap_lines[0], golden("capacity.csv"));
    assert_eq!(cap_lines.len(), 1 + 2 * 3 * 2);
    assert!(cap_lines[1..].iter().all(|l| l.split(',').count() == 8));

    let cfg = write(dir.path(), "cell.yaml", "bench_particles: [200]\nbench_strategies: [cell]\nbench_neighbors_per_particle: 8\nbench_cutoff: 1.0\nbench_repetitions: 1\n");
    let out = nnpkit(dir.path(), &["bench-neighbors", "--config", &cfg]);
    assert_eq!(code(&out), 0);
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("200,1,") && row.ends_with(','), "{row}");

    let cfg = write(dir.path(), "dense.yaml", "bench_particles: [10]\nbench_neighbors_per_particle: 64\n");
    assert_eq!(code(&nnpkit(dir.path(), &["bench-neighbors", "--config", &cfg])), 1);
}

#[test]
fn bench_model_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.yaml", "bench_structures: [water_8]\nbench_repetitions: 2\nbench_warmup: 0\n");
    let out = nnpkit(dir.path(), &["bench-model", "--config", &cfg, "--output", "m.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.lines().next().unwrap().contains("0L") && table.contains("water_8"), "{table}");
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], golden("model.csv"));
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));

    let cfg = write(dir.path(), "missing.yaml", "bench_structures: [nowhere.xyz]\n");
    assert_eq!(code(&nnpkit(dir.path(), &["bench-model", "--config", &cfg])), 2);
}
