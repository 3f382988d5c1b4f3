#![allow(dead_code)]

pub mod gradients;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn scwls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scwls"))
        .args(args)
        .output()
        .expect("spawn scwls")
}

pub fn run_ok(args: &[&str]) {
    let out = scwls(args);
    assert!(
        out.status.success(),
        "scwls {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Runs every subcommand once into `dir` and returns the files written, in
/// a fixed order.
pub fn cli_pipeline(dir: &Path) -> Vec<PathBuf> {
    let config = dir.join("config.toml");
    std::fs::write(&config, "[adapt]\niterations = 3\n").unwrap();
    let scene = dir.join("scene.json");
    let seq = dir.join("seq");
    let pose = dir.join("pose.json");
    let ransac = dir.join("ransac.json");
    let poses = dir.join("poses.json");
    let refined = dir.join("refined.json");
    let fit = dir.join("fit.json");
    let fit_csv = dir.join("fit.csv");
    let theta = dir.join("theta.json");
    let adapted = dir.join("adapted.json");
    let adapt_csv = dir.join("adapt.csv");
    let eval = dir.join("eval.json");

    run_ok(&["simulate", "--seed", "7", "--out", p(&scene)]);
    run_ok(&["simulate", "--seed", "7", "--frames", "3", "--outliers", "0", "--out", p(&seq)]);
    run_ok(&["solve", p(&scene), "--out", p(&pose)]);
    run_ok(&["solve", p(&scene), "--method", "ransac", "--seed", "3", "--out", p(&ransac)]);
    run_ok(&["refine", p(&scene), "--pose", p(&ransac), "--out", p(&refined)]);
    run_ok(&[
        "fit", p(&scene), "--iters", "50", "--e2e-iters", "5", "--csv", p(&fit_csv), "--theta-out", p(&theta),
        "--out", p(&fit),
    ]);
    run_ok(&["solve", p(&seq), "--out", p(&poses)]);
    run_ok(&[
        "adapt", "--config", p(&config), "--pairs", p(&seq.join("pairs")), "--csv", p(&adapt_csv), "--out",
        p(&adapted),
    ]);
    run_ok(&["eval", "--poses", p(&poses), "--gt", p(&seq), "--out", p(&eval)]);

    let mut files = vec![scene];
    for k in 0..3 {
        files.push(seq.join(format!("frame_{k:03}.json")));
    }
    for k in 0..2 {
        files.push(seq.join("pairs").join(format!("pair_{k:03}.json")));
    }
    files.extend([pose, ransac, refined, fit, fit_csv, theta, poses, adapted, adapt_csv, eval]);
    files
}
