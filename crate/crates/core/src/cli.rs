//! Command-line front end. Every subcommand is a thin adapter over the
//! library; exit codes are 0 (success), 1 (usage) and 2 (runtime failure).
//! Log verbosity follows `CANET_LOG` (`error`..`trace`, default `info`).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::canet::{
    check_model_gradients, init_params, load_checkpoint, restore_image, ModelConfig, ModelGradCheck,
    DEFAULT_OVERLAP, DEFAULT_TILE,
};
use crate::error::{Error, Result};
use crate::imaging::{read_ppm, write_ppm};
use crate::nn::WeightInit;
use crate::trainer::{evaluate, train, Task, TrainConfig};

pub const LOG_ENV: &str = "CANET_LOG";
/// `gradcheck` fails above this maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "canet", version, about = "CANet image restoration: denoising and JPEG artifact removal")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a degraded (noisy or JPEG-coded) copy of an image
    Degrade(DegradeArgs),
    /// Train a model on a directory of clean PPM/PGM images
    Train(TrainArgs),
    /// Restore an image with a trained checkpoint
    Restore(RestoreArgs),
    /// Degrade, restore and score every image in a directory
    Eval(EvalArgs),
    /// Check analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Print the exact parameter count of a model config
    Params(ParamsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskKind {
    /// Additive white Gaussian noise
    Awgn,
    /// JPEG compression artifacts
    Jpeg,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Degradation type
    #[arg(long, value_enum)]
    pub task: Option<TaskKind>,
    /// Noise standard deviation on the 0..255 scale (awgn)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// JPEG quality 1..=100 (jpeg)
    #[arg(long)]
    pub quality: Option<u32>,
}

impl TaskArgs {
    /// The task named by the flags; `None` when `--task` is absent.
    fn resolve(&self, fallback: Option<&Task>) -> std::result::Result<Option<Task>, String> {
        let kind = match self.task {
            Some(k) => k,
            None => {
                if self.sigma.is_some() || self.quality.is_some() {
                    return Err("--sigma/--quality need --task".into());
                }
                return Ok(None);
            }
        };
        let task = match kind {
            TaskKind::Awgn => {
                let default = match fallback {
                    Some(Task::Denoise { sigma }) => Some(*sigma),
                    _ => None,
                };
                Task::Denoise {
                    sigma: self.sigma.or(default).ok_or("--task awgn requires --sigma")?,
                }
            }
            TaskKind::Jpeg => {
                let default = match fallback {
                    Some(Task::Car { quality }) => Some(*quality),
                    _ => None,
                };
                Task::Car {
                    quality: self.quality.or(default).ok_or("--task jpeg requires --quality")?,
                }
            }
        };
        Ok(Some(task))
    }
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    /// Input PPM/PGM image
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Output PPM/PGM image
    #[arg(long = "out", value_name = "FILE")]
    pub output: PathBuf,
    /// Noise seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Code chroma at full resolution instead of 4:2:0 (jpeg)
    #[arg(long)]
    pub no_subsample: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of clean training images
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Model preset (tiny, default) or TOML training config file
    #[arg(long, value_name = "PRESET|FILE")]
    pub config: Option<String>,
    #[command(flatten)]
    pub task: TaskArgs,
    /// Training seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Adam steps
    #[arg(long)]
    pub steps: Option<usize>,
    /// Directory for best.cant, last.cant and train.log
    #[arg(long, value_name = "DIR")]
    pub checkpoint: Option<PathBuf>,
    /// Held-out directory evaluated every eval-every steps
    #[arg(long, value_name = "DIR")]
    pub eval: Option<PathBuf>,
    /// Learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Patches per batch
    #[arg(long)]
    pub batch: Option<usize>,
    /// Inference tile size for evaluation
    #[arg(long)]
    pub tile: Option<usize>,
    /// Tile overlap for evaluation
    #[arg(long)]
    pub overlap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RestoreArgs {
    /// Trained checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Degraded input image
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Restored output image
    #[arg(long = "out", value_name = "FILE")]
    pub output: PathBuf,
    /// Tile size
    #[arg(long, default_value_t = DEFAULT_TILE)]
    pub tile: usize,
    /// Overlap between neighbouring tiles
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    pub overlap: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Directory of clean test images
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[command(flatten)]
    pub task: TaskArgs,
    /// Base seed for the per-image degradations
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tile size
    #[arg(long, default_value_t = DEFAULT_TILE)]
    pub tile: usize,
    /// Overlap between neighbouring tiles
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    pub overlap: usize,
    /// Print one JSON record per image instead of a table
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Model preset (tiny, default) or TOML config file
    #[arg(long, value_name = "PRESET|FILE", default_value = "tiny")]
    pub config: String,
    /// Parameter and input seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side of the square test input
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Entries checked per parameter tensor
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    /// Initializer for the checked parameters
    #[arg(long, value_enum, default_value_t = InitKind::HeUniform)]
    pub init: InitKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    /// Bound sqrt(6/fan_in)
    HeUniform,
    /// Bound sqrt(1/fan_in)
    FanInUniform,
}

impl From<InitKind> for WeightInit {
    fn from(k: InitKind) -> Self {
        match k {
            InitKind::HeUniform => WeightInit::HeUniform,
            InitKind::FanInUniform => WeightInit::FanInUniform,
        }
    }
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Model preset (tiny, default) or TOML config file
    #[arg(long, value_name = "PRESET|FILE", default_value = "default")]
    pub config: String,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Preset name, TOML training config, or bare TOML model config.
pub fn resolve_config(spec: &str) -> Result<TrainConfig> {
    if let Some(model) = ModelConfig::preset(spec) {
        return Ok(TrainConfig {
            model,
            ..TrainConfig::default()
        });
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::config(format!(
            "{spec} is neither a preset (tiny, default) nor a file"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainConfig::from_toml(&text).or_else(|train_err| {
        toml::from_str::<ModelConfig>(&text)
            .map(|model| TrainConfig {
                model,
                ..TrainConfig::default()
            })
            .map_err(|_| train_err)
    })
}

fn usage(msg: impl Into<String>, sub: &str) -> Failure {
    let mut cmd = Cli::command();
    let synopsis = cmd
        .find_subcommand_mut(sub)
        .map(|c| c.clone().bin_name(format!("canet {sub}")).render_usage().to_string())
        .unwrap_or_default();
    Failure::Usage(format!("error: {}\n\n{synopsis}", msg.into()))
}

fn degrade(a: &DegradeArgs) -> std::result::Result<(), Failure> {
    let task = a
        .task
        .resolve(None)
        .map_err(|m| usage(m, "degrade"))?
        .ok_or_else(|| usage("--task is required", "degrade"))?;
    task.validate()?;
    let img = read_ppm(&a.input).map_err(Error::from)?;
    let out = match task {
        Task::Car { quality } if a.no_subsample => crate::imaging::jpeg_degrade(&img, quality, false)?,
        _ => task.degrade_image(&img, a.seed)?,
    };
    write_ppm(&out, &a.output).map_err(Error::from)?;
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> std::result::Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(spec) => resolve_config(spec)?,
        None => TrainConfig::default(),
    };
    if let Some(task) = a.task.resolve(Some(&cfg.task)).map_err(|m| usage(m, "train"))? {
        cfg.task = task;
    }
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.steps = a.steps.unwrap_or(cfg.steps);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.batch = a.batch.unwrap_or(cfg.batch);
    cfg.tile = a.tile.unwrap_or(cfg.tile);
    cfg.overlap = a.overlap.unwrap_or(cfg.overlap);
    cfg.eval_dir = a.eval.clone().or(cfg.eval_dir);
    let dir = a
        .checkpoint
        .clone()
        .or(cfg.checkpoint_dir.take())
        .unwrap_or_else(|| PathBuf::from("checkpoints"));
    cfg.checkpoint_dir = Some(dir.clone());

    let outcome = train(&a.data, &cfg)?;
    let log_path = dir.join("train.log");
    std::fs::write(&log_path, outcome.log.to_lines()).map_err(|e| Error::io(&log_path, e))?;
    let last = outcome.log.losses().last().copied().unwrap_or(f64::NAN);
    println!("trained {} steps, final loss {last:.6}", cfg.steps);
    if let Some(p) = outcome.best_psnr {
        println!("best eval psnr {p:.3} dB");
    }
    if let Some(path) = outcome.checkpoint {
        println!("checkpoint {}", path.display());
    }
    Ok(())
}

fn restore(a: &RestoreArgs) -> std::result::Result<(), Failure> {
    let model = load_checkpoint::<f32>(&a.checkpoint).map_err(Error::from)?.model;
    let img = read_ppm(&a.input).map_err(Error::from)?;
    let out = restore_image(&img, &model, a.tile, a.overlap)?;
    write_ppm(&out, &a.output).map_err(Error::from)?;
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> std::result::Result<(), Failure> {
    let stored = load_checkpoint::<f32>(&a.checkpoint).map_err(Error::from)?.meta.task;
    let task = match a.task.resolve(stored.as_ref()).map_err(|m| usage(m, "eval"))? {
        Some(t) => t,
        None => stored.ok_or_else(|| usage("checkpoint has no task; pass --task", "eval"))?,
    };
    let report = evaluate(&a.checkpoint, &a.data, &task, a.seed, a.tile, a.overlap)?;
    if a.json {
        print!("{}", report.to_records());
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn gradcheck(a: &GradcheckArgs) -> std::result::Result<(), Failure> {
    let model = resolve_config(&a.config)?.model;
    let opts = ModelGradCheck {
        seed: a.seed,
        size: a.size,
        samples_per_tensor: a.samples,
        init: a.init.into(),
        ..ModelGradCheck::default()
    };
    let report = check_model_gradients(&model, &opts)?;
    println!(
        "checked {} entries ({} below roundoff), max relative error {:.3e}",
        report.checked, report.unresolved, report.max_rel_error
    );
    if report.max_rel_error > GRADCHECK_TOLERANCE {
        return Err(Failure::Runtime(Error::contract(format!(
            "max relative error {:.3e} exceeds {GRADCHECK_TOLERANCE:e}",
            report.max_rel_error
        ))));
    }
    Ok(())
}

fn params(a: &ParamsArgs) -> std::result::Result<(), Failure> {
    let model = resolve_config(&a.config)?.model;
    println!("{}", init_params::<f32>(&model, 0)?.net.param_count());
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Degrade(a) => degrade(a),
        Command::Train(a) => train_cmd(a),
        Command::Restore(a) => restore(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Params(a) => params(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("{msg}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Help text of the top-level command and every subcommand, in order.
pub fn help_text() -> String {
    let mut cmd = Cli::command();
    let mut out = cmd.render_long_help().to_string();
    for sub in cmd.get_subcommands_mut() {
        let mut sub = sub.clone().bin_name(format!("canet {}", sub.get_name()));
        out.push_str(&format!("\n===== {} =====\n", sub.get_name()));
        out.push_str(&sub.render_long_help().to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn task_flags() {
        let t = |task, sigma, quality| TaskArgs { task, sigma, quality };
        assert_eq!(
            t(Some(TaskKind::Awgn), Some(50.0), None).resolve(None),
            Ok(Some(Task::Denoise { sigma: 50.0 }))
        );
        assert!(t(Some(TaskKind::Awgn), None, None).resolve(None).is_err());
        assert_eq!(
            t(Some(TaskKind::Jpeg), None, None).resolve(Some(&Task::Car { quality: 20 })),
            Ok(Some(Task::Car { quality: 20 }))
        );
        assert!(t(None, Some(3.0), None).resolve(None).is_err());
        assert_eq!(t(None, None, None).resolve(None), Ok(None));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["canet", "params", "--config", "tiny"]), 0);
        assert_eq!(run(["canet", "params", "--bogus"]), 1);
        assert_eq!(run(["canet"]), 1);
        assert_eq!(run(["canet", "--help"]), 0);
        assert_eq!(run(["canet", "degrade", "--in", "a.ppm", "--out", "b.ppm"]), 1);
        assert_eq!(
            run(["canet", "degrade", "--task", "awgn", "--sigma", "5", "--in", "/nonexistent.ppm", "--out", "b.ppm"]),
            2
        );
        assert_eq!(run(["canet", "params", "--config", "no-such-preset"]), 2);
    }

    #[test]
    fn config_resolution() {
        assert_eq!(resolve_config("tiny").unwrap().model, ModelConfig::tiny());
        let dir = tempfile::tempdir().unwrap();
        let model_only = dir.path().join("m.toml");
        std::fs::write(&model_only, "blocks = 1\nchannels = 16\nca_ratio = 4\n").unwrap();
        let cfg = resolve_config(model_only.to_str().unwrap()).unwrap();
        assert_eq!(cfg.model.blocks, 1);
        let train = dir.path().join("t.toml");
        std::fs::write(&train, "steps = 7\n[model]\nblocks = 2\n").unwrap();
        let cfg = resolve_config(train.to_str().unwrap()).unwrap();
        assert_eq!((cfg.steps, cfg.model.blocks), (7, 2));
        std::fs::write(&train, "stepz = 7\n").unwrap();
        assert!(resolve_config(train.to_str().unwrap()).is_err());
    }
}
