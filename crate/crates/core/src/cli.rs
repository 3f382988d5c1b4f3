//! Command-line front end. Every subcommand is a thin wrapper over the
//! library call of the same name.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adapt::{adapt_weights_with, sequence_pairs};
use crate::config::Config;
use crate::dlt::{ransac_dlt, wdlt_solve, WeightVector};
use crate::error::{Error, Result};
use crate::eval::{pose_error, summarize, weight_interpretability, EvalSummary, FrameEval};
use crate::geometry::Pose;
use crate::io;
use crate::losses::reproj_error;
use crate::refine::lm_refine;
use crate::simulator::{generate_scene, generate_sequence, ImagePairParams, SceneParams, SequenceParams, SyntheticScene};
use crate::weight_fit::{e2e_refine, fit_weights, E2eReport, FitMode, FitReport, WeightParams};

#[derive(Debug, Parser)]
#[command(name = "scwls", version, about = "Weighted-DLT camera re-localization toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Seed for every randomized step; required by randomized subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration overriding the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (directory for `simulate --frames`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene, or a sequence with image pairs.
    Simulate(SimulateArgs),
    /// Solve the pose of a scene (or each scene of a directory).
    Solve(SolveArgs),
    /// Refine a pose by inlier-set Levenberg–Marquardt.
    Refine(RefineArgs),
    /// Fit weight parameters to a scene from pose supervision.
    Fit(FitArgs),
    /// Adapt weight parameters on image pairs.
    Adapt(AdaptArgs),
    /// Evaluate estimated poses against ground-truth scenes.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.3)]
    pub outliers: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pixel_noise: f64,
    #[arg(long, default_value_t = 0.01)]
    pub coord_noise: f64,
    /// Generate a sequence of this many frames instead of a single scene.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Frame gap of the rendered image pairs (sequence mode).
    #[arg(long)]
    pub interval: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Wdlt,
    Ransac,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Scene file or directory of scene files.
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Wdlt)]
    pub method: Method,
    /// θ file; uniform weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub ransac_iters: usize,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    pub scene: PathBuf,
    /// Initial pose file.
    #[arg(long)]
    pub pose: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    ClassificationRegression,
    RegressionOnly,
}

impl From<ModeArg> for FitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ClassificationRegression => FitMode::ClassificationRegression,
            ModeArg::RegressionOnly => FitMode::RegressionOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::ClassificationRegression)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 5000)]
    pub iters: usize,
    /// Joint weight/coordinate iterations after the weight-only stage.
    #[arg(long, default_value_t = 0)]
    pub e2e_iters: usize,
    /// Loss-curve CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Fitted θ output.
    #[arg(long)]
    pub theta_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Directory of pair files.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Initial θ; optimistic constant start when absent.
    #[arg(long)]
    pub theta: Option<PathBuf>,
    /// Loss-curve CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pose file or pose-list file.
    #[arg(long)]
    pub poses: PathBuf,
    /// Ground-truth scene file or directory of scene files.
    #[arg(long)]
    pub gt: PathBuf,
    /// θ file for the interpretability coefficient.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

/// Parses `argv` and runs; returns the process exit status (0 success,
/// 1 runtime error, 2 usage error).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => io::write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_seed(common: &CommonArgs, what: &str) -> std::result::Result<u64, CliError> {
    common
        .seed
        .ok_or_else(|| CliError::Usage(format!("{what} is randomized and requires an explicit --seed")))
}

pub fn execute(cli: &Cli) -> std::result::Result<(), CliError> {
    let cfg = match &cli.common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let out = cli.common.out.as_deref();
    match &cli.command {
        Command::Simulate(a) => {
            let seed = require_seed(&cli.common, "simulate")?;
            simulate(a, seed, &cfg, out)?;
        }
        Command::Solve(a) => {
            let seed = match a.method {
                Method::Ransac => Some(require_seed(&cli.common, "solve --method ransac")?),
                Method::Wdlt => None,
            };
            solve(a, seed, &cfg, out)?;
        }
        Command::Refine(a) => {
            let scene = io::read_scene(&a.scene)?;
            let init = io::read_poses(&a.pose)?
                .into_iter()
                .next()
                .ok_or(Error::Empty("pose file"))?
                .1;
            let outcome = lm_refine(&init, &scene.observations(), &scene.intrinsics, &cfg.refine)?;
            emit(out, &io::pose_to_json(&outcome.pose))?;
        }
        Command::Fit(a) => fit(a, &cfg, out)?,
        Command::Adapt(a) => {
            let pairs = io::read_pairs(&a.pairs)?;
            let n = pairs[0].target_obs.len();
            let theta = match &a.theta {
                Some(p) => io::read_theta(p)?,
                None => WeightParams::optimistic(n),
            };
            let outcome = adapt_weights_with(&pairs, &theta, &cfg.adapt, &cfg.fit)?;
            if let Some(csv) = &a.csv {
                let mut text = String::from("iter,loss\n");
                for (i, l) in outcome.loss_curve.iter().enumerate() {
                    text.push_str(&format!("{i},{l:e}\n"));
                }
                io::write_file(csv, &text)?;
            }
            emit(out, &io::theta_to_json(&outcome.theta))?;
        }
        Command::Eval(a) => {
            let summary = evaluate(a)?;
            emit(out, &io::report_to_json(&summary))?;
        }
    }
    Ok(())
}

fn simulate(a: &SimulateArgs, seed: u64, cfg: &Config, out: Option<&Path>) -> Result<()> {
    let scene = SceneParams {
        n_points: a.n,
        pixel_noise_sigma: a.pixel_noise,
        coord_noise_sigma: a.coord_noise,
        outlier_fraction: a.outliers,
        ..SceneParams::default()
    };
    let Some(frames) = a.frames else {
        return emit(out, &io::scene_to_json(&generate_scene(&scene, seed)?));
    };
    let dir = out.ok_or_else(|| Error::InvalidParameter("simulate --frames needs --out DIR".into()))?;
    let interval = a.interval.unwrap_or(cfg.adapt.frame_interval);
    if interval == 0 || interval >= frames {
        return Err(Error::InvalidParameter(format!(
            "--interval must be in 1..{frames}, got {interval}"
        )));
    }
    let seq = generate_sequence(
        &SequenceParams {
            scene,
            n_frames: frames,
            ..SequenceParams::default()
        },
        seed,
    )?;
    for k in 0..frames {
        io::write_file(&dir.join(format!("frame_{k:03}.json")), &io::scene_to_json(&seq.frame_scene(k)))?;
    }
    let sources: Vec<usize> = (0..frames - interval).collect();
    let pairs = sequence_pairs(&seq, &sources, interval, &ImagePairParams::default())?;
    for (k, pair) in sources.iter().zip(&pairs) {
        io::write_file(&dir.join("pairs").join(format!("pair_{k:03}.json")), &io::pair_to_json(pair))?;
    }
    Ok(())
}

fn solve_one(scene: &SyntheticScene, a: &SolveArgs, seed: Option<u64>, cfg: &Config, w: &Option<WeightParams>) -> Result<Pose> {
    let obs = scene.observations();
    match a.method {
        Method::Wdlt => {
            let weights = match w {
                Some(p) => {
                    if p.len() != obs.len() {
                        return Err(Error::DimensionMismatch {
                            expected: obs.len(),
                            got: p.len(),
                        });
                    }
                    p.weights()
                }
                None => WeightVector::uniform(obs.len()),
            };
            wdlt_solve(&obs, &weights, &scene.intrinsics)
        }
        Method::Ransac => Ok(ransac_dlt(
            &obs,
            &scene.intrinsics,
            a.ransac_iters,
            cfg.refine.inlier_threshold,
            seed.expect("checked by the caller"),
        )?
        .pose),
    }
}

fn solve(a: &SolveArgs, seed: Option<u64>, cfg: &Config, out: Option<&Path>) -> Result<()> {
    let weights = a.weights.as_deref().map(io::read_theta).transpose()?;
    if a.scene.is_dir() {
        let mut poses = Vec::new();
        for file in io::json_files(&a.scene)? {
            let scene = io::read_scene(&file)?;
            poses.push((io::file_stem(&file), solve_one(&scene, a, seed, cfg, &weights)?));
        }
        emit(out, &io::pose_list_to_json(&poses))
    } else {
        let scene = io::read_scene(&a.scene)?;
        emit(out, &io::pose_to_json(&solve_one(&scene, a, seed, cfg, &weights)?))
    }
}

#[derive(Serialize)]
struct FitOutput<'a> {
    fit: &'a FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    e2e: Option<&'a E2eReport>,
}

fn fit(a: &FitArgs, cfg: &Config, out: Option<&Path>) -> Result<()> {
    let scene = io::read_scene(&a.scene)?;
    let mode = FitMode::from(a.mode);
    let report = fit_weights(&scene, &cfg.loss, &cfg.fit, mode, a.iters)?;
    let e2e = if a.e2e_iters > 0 {
        Some(e2e_refine(&scene, &report.final_params(), &cfg.loss, &cfg.fit, mode, a.e2e_iters)?)
    } else {
        None
    };
    let final_theta = e2e.as_ref().map_or_else(|| report.final_params(), |e| e.fit.final_params());
    if let Some(csv) = &a.csv {
        io::write_file(csv, &report.to_csv())?;
    }
    if let Some(path) = &a.theta_out {
        io::write_file(path, &io::theta_to_json(&final_theta))?;
    }
    emit(
        out,
        &io::report_to_json(&FitOutput {
            fit: &report,
            e2e: e2e.as_ref(),
        }),
    )
}

fn evaluate(a: &EvalArgs) -> Result<EvalSummary> {
    let estimates = io::read_poses(&a.poses)?;
    let gt_files = io::json_files(&a.gt)?;
    if gt_files.is_empty() {
        return Err(Error::Empty("ground-truth scenes"));
    }
    let weights = a.weights.as_deref().map(io::read_theta).transpose()?;
    let mut frames = Vec::with_capacity(estimates.len());
    for (name, pose) in &estimates {
        let file = if gt_files.len() == 1 && estimates.len() == 1 {
            gt_files[0].clone()
        } else {
            gt_files
                .iter()
                .find(|f| io::file_stem(f) == *name)
                .cloned()
                .ok_or_else(|| Error::InvalidParameter(format!("no ground-truth scene named {name:?}")))?
        };
        let scene = io::read_scene(&file)?;
        let err = pose_error(pose, &scene.gt_pose);
        let pearson = match &weights {
            Some(theta) => {
                if theta.len() != scene.len() {
                    return Err(Error::DimensionMismatch {
                        expected: scene.len(),
                        got: theta.len(),
                    });
                }
                let r: Vec<f64> = scene
                    .predicted_coords
                    .iter()
                    .zip(&scene.pixel_obs)
                    .map(|(s, p)| reproj_error(&scene.gt_pose, &scene.intrinsics, s, p).value())
                    .collect();
                Some(weight_interpretability(&theta.activated(), &r)?)
            }
            None => None,
        };
        frames.push(FrameEval {
            frame: name.clone(),
            translation_error_m: err.translation_error,
            rotation_error_deg: err.rotation_error,
            pearson,
        });
    }
    summarize(frames)
}
