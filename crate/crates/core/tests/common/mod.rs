#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use motifps::data::{write_dataset, FactorBlock, MixedDataset, SurvivalOutcome};
use motifps::simulation::{planted_continuous, planted_factor};

/// Small two-study, two-group dataset with planted motifs and survival.
pub fn small_dataset(n: usize, seed: u64) -> MixedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cont = planted_continuous(n, 8, 3, 2, 1.0, 0.3, &mut rng);
    let fac = planted_factor(n, 6, 2, 2, 2, 0.05, &mut rng);
    let mut classes: Vec<usize> = (0..n).map(|i| i % 4).collect();
    classes.shuffle(&mut rng);
    let study: Vec<usize> = classes.iter().map(|c| c / 2 + 1).collect();
    let group: Vec<usize> = classes.iter().map(|c| c % 2 + 1).collect();
    let time: Vec<f64> = (0..n)
        .map(|i| {
            let rate = if group[i] == 1 { 0.5 } else { 1.0 };
            let u: f64 = rng.random_range(1e-6..1.0);
            ((-u.ln() / rate) * 100.0).round() / 100.0 + 0.01
        })
        .collect();
    let event: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.75).collect();
    let names = (0..8).map(|j| format!("c{j}")).collect();
    let fnames = (0..6).map(|j| format!("f{j}")).collect();
    MixedDataset::new(
        names,
        cont.values,
        vec![FactorBlock::new(fnames, fac.levels, 2).unwrap()],
        study,
        group,
        2,
        2,
        Some(SurvivalOutcome { time, event }),
    )
    .unwrap()
}

pub fn write_small_dataset(dir: &Path, n: usize, seed: u64) -> PathBuf {
    write_dataset(&small_dataset(n, seed), dir).unwrap();
    dir.to_path_buf()
}

pub fn motifps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motifps"))
        .args(args)
        .env_remove("MOTIFPS_SEED")
        .env("RUST_LOG", "error")
        .output()
        .expect("run motifps")
}

pub fn ok(args: &[&str]) -> Output {
    let out = motifps(args);
    assert!(
        out.status.success(),
        "motifps {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs every subcommand into `out` and returns the machine-readable files.
pub fn run_pipeline(data: &Path, out: &Path, seed: &str) -> Vec<PathBuf> {
    let p = |name: &str| out.join(name);
    ok(&[
        "fit-motifs", "--seed", seed, "--data", s(data), "--out", s(&p("fit.json")),
        "--trace-dir", s(&p("trace")), "--burn-in", "20", "--samples", "40",
        "--cond-burn-in", "10", "--cond-samples", "20",
    ]);
    ok(&[
        "estimate-mps", "--seed", seed, "--fit", s(&p("fit.json")), "--data", s(data),
        "--penalty", "lasso", "--cv", "3", "--n-lambda", "5", "--model", s(&p("model.json")),
        "--out", s(&p("pred.csv")), "--predict", s(data), "--predict-out", s(&p("test_pred.csv")),
    ]);
    ok(&[
        "weights", "--predictions", s(&p("pred.csv")), "--data", s(data), "--out",
        s(&p("weights.csv")), "--report", s(&p("weights.json")),
    ]);
    ok(&[
        "km", "--seed", seed, "--weights", s(&p("weights.csv")), "--data", s(data),
        "--bootstrap", "20", "--out", s(&p("curves.csv")), "--summary", s(&p("km.json")),
        "--svg", s(&p("km.svg")),
    ]);
    ok(&[
        "km", "--seed", seed, "--weights", s(&p("weights.csv")), "--data", s(data),
        "--method", "igo", "--bootstrap", "4", "--bootstrap-full", "--fit", s(&p("fit.json")),
        "--model", s(&p("model.json")), "--out", s(&p("curves_full.csv")),
    ]);
    ok(&[
        "simulate", "--seed", seed, "--n", "40", "--p1", "6", "--p2", "6", "--svd-rank", "5",
        "--studies", "2", "--groups", "2", "--replicates", "2", "--burn-in", "10",
        "--samples", "20", "--cond-burn-in", "5", "--cond-samples", "10",
        "--out", s(&p("sim")),
    ]);
    let mut files = vec![
        p("fit.json"), p("trace/summary.json"), p("trace/block1_hyper.csv"),
        p("trace/block1_rows.bin"), p("trace/block2_cols.bin"), p("model.json"),
        p("pred.csv"), p("test_pred.csv"), p("weights.csv"), p("weights.json"),
        p("curves.csv"), p("km.json"), p("km.svg"), p("curves_full.csv"),
    ];
    for f in ["report.csv", "report.txt", "report.json"] {
        files.push(out.join("sim").join(f));
    }
    files
}
