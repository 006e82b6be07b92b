//! Training, evaluation and the tiny-scale overfit protocol.

mod eval;
mod overfit;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canet::{encode_checkpoint, init_params, Model, ModelConfig, DEFAULT_OVERLAP, DEFAULT_TILE};
use crate::error::{Error, Result};
use crate::imaging::{add_awgn, add_awgn_float, jpeg_degrade, patch_coords, read_ppm, FloatImage, ImageBuffer};
use crate::nn::{adam_step, l2_loss, AdamConfig};
use crate::tensor::{Graph, Tensor};

pub use eval::{evaluate, evaluate_model};
pub use overfit::{ablation_sweep, overfit, AblationRow, OverfitConfig, OverfitResult};

/// Degradation a model is trained to undo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// Additive white Gaussian noise, σ on the 0..255 scale.
    Denoise { sigma: f64 },
    /// JPEG compression artifact reduction at the given quality.
    Car { quality: u32 },
}

impl Default for Task {
    fn default() -> Self {
        Task::Denoise { sigma: 25.0 }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Denoise { sigma } => write!(f, "denoise (sigma {sigma})"),
            Task::Car { quality } => write!(f, "jpeg artifacts (quality {quality})"),
        }
    }
}

impl Task {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Task::Denoise { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::config(format!("sigma must be finite and >= 0, got {sigma}")))
            }
            Task::Car { quality } if !(1..=100).contains(&quality) => {
                Err(Error::config(format!("JPEG quality {quality} outside 1..=100")))
            }
            _ => Ok(()),
        }
    }

    /// Training-time input: noise stays unclipped and unquantized.
    pub fn degrade_float(&self, clean: &FloatImage, seed: u64) -> Result<FloatImage> {
        match *self {
            Task::Denoise { sigma } => Ok(add_awgn_float(clean, sigma, seed)),
            Task::Car { quality } => Ok(jpeg_degrade(&clean.to_image(), quality, true)?.to_float()),
        }
    }

    /// Viewable degraded image (clipped and quantized).
    pub fn degrade_image(&self, clean: &ImageBuffer, seed: u64) -> Result<ImageBuffer> {
        match *self {
            Task::Denoise { sigma } => Ok(add_awgn(clean, sigma, seed).to_image()),
            Task::Car { quality } => jpeg_degrade(clean, quality, true),
        }
    }
}

/// Mixes a base seed with indices into an independent stream seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub batch: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Evaluate on `eval_dir` every this many steps; 0 disables.
    pub eval_every: usize,
    pub patch: usize,
    pub patches_per_image: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub eval_dir: Option<PathBuf>,
    pub max_grad_norm: Option<f64>,
    pub tile: usize,
    pub overlap: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::default(),
            batch: 16,
            steps: 1000,
            lr: 1e-4,
            seed: 0,
            eval_every: 100,
            patch: 48,
            patches_per_image: 16,
            checkpoint_dir: None,
            eval_dir: None,
            max_grad_norm: None,
            tile: DEFAULT_TILE,
            overlap: DEFAULT_OVERLAP,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            max_grad_norm: self.max_grad_norm,
            ..AdamConfig::with_lr(self.lr)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 || self.patches_per_image == 0 {
            return Err(Error::config("steps, batch and patches_per_image must be positive"));
        }
        if self.patch < 8 {
            return Err(Error::config(format!("patch size {} below 8", self.patch)));
        }
        self.task.validate()?;
        self.adam().validate()?;
        self.model.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    Step { step: usize, loss: f64 },
    Eval { step: usize, psnr: f64, ssim: f64 },
}

/// Append-only training record. Wall time is kept out of the line output
/// so seeded runs produce identical logs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    pub wall_time: Duration,
}

impl TrainLog {
    pub fn push(&mut self, record: LogRecord) {
        self.records.push(record);
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Step { loss, .. } => Some(*loss),
                LogRecord::Eval { .. } => None,
            })
            .collect()
    }

    pub fn evals(&self) -> Vec<(usize, f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| match *r {
                LogRecord::Eval { step, psnr, ssim } => Some((step, psnr, ssim)),
                LogRecord::Step { .. } => None,
            })
            .collect()
    }

    /// One JSON object per line.
    pub fn to_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}

/// State dumped when the loss stops being finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub grad_norms: Vec<(String, f64)>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loss {} at lr {}; gradient norms:", self.loss, self.lr)?;
        for (name, norm) in &self.grad_norms {
            write!(f, " {name}={norm:.3e}")?;
        }
        Ok(())
    }
}

/// Forward, L2 loss, backward and one Adam update on a fixed batch.
/// Returns the loss before the update.
pub fn train_step(
    model: &mut Model<f32>,
    adam: &AdamConfig,
    degraded: &Tensor<f32>,
    clean: &Tensor<f32>,
    step: usize,
) -> Result<f64> {
    let mut g = Graph::new();
    let x = g.constant(degraded.clone());
    let t = g.constant(clean.clone());
    let y = model.forward(&mut g, x)?;
    let loss_var = l2_loss(&mut g, y, t)?;
    let loss = g.value(loss_var).item()? as f64;
    let grads = g.backward(loss_var)?;
    model.params.accumulate(&g, &grads);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(Box::new(Diagnostic {
            step,
            lr: adam.lr,
            loss,
            grad_norms: model.params.grad_norms(),
        })));
    }
    adam_step(&mut model.params, adam)?;
    Ok(loss)
}

/// Loss of `model` on a batch without touching its parameters.
pub fn batch_loss(model: &Model<f32>, degraded: &Tensor<f32>, clean: &Tensor<f32>) -> Result<f64> {
    let mut g = Graph::new();
    let x = g.constant(degraded.clone());
    let t = g.constant(clean.clone());
    let y = model.forward(&mut g, x)?;
    let loss = l2_loss(&mut g, y, t)?;
    Ok(g.value(loss).item()? as f64)
}

/// A clean image and the name it is reported under.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedImage {
    pub name: String,
    pub image: ImageBuffer,
}

/// Every `.ppm`/`.pgm` file in `dir`, sorted by file name.
pub fn load_image_dir(dir: impl AsRef<Path>) -> Result<Vec<NamedImage>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "pgm" | "pnm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::config(format!("no PPM/PGM images in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            Ok(NamedImage {
                name: p.file_name().expect("file").to_string_lossy().into_owned(),
                image: read_ppm(&p)?,
            })
        })
        .collect()
}

/// Epoch-wise shuffled pool of `patches_per_image` crops from every image.
struct Sampler {
    images: Vec<FloatImage>,
    patch: usize,
    per_image: usize,
    seed: u64,
    epoch: u64,
    queue: Vec<(usize, usize, usize, u64)>,
}

impl Sampler {
    fn refill(&mut self) {
        let mut pool = Vec::new();
        for (i, img) in self.images.iter().enumerate() {
            let seed = derive_seed(self.seed, &[self.epoch, i as u64]);
            for (x, y) in patch_coords(img.width(), img.height(), self.patch, self.per_image, seed) {
                pool.push((i, x, y));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[self.epoch]));
        pool.shuffle(&mut rng);
        // Popped from the back, so reverse to consume in shuffled order.
        self.queue = pool
            .into_iter()
            .enumerate()
            .map(|(k, (i, x, y))| (i, x, y, derive_seed(self.seed, &[self.epoch, 1 << 32 | k as u64])))
            .rev()
            .collect();
        self.epoch += 1;
    }

    fn next(&mut self) -> (usize, usize, usize, u64) {
        if self.queue.is_empty() {
            self.refill();
        }
        self.queue.pop().expect("sampler has usable images")
    }
}

/// Result of [`train`]: the final and best-evaluated models with the log.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub last: Model<f32>,
    /// Best eval PSNR so far, or `last` when nothing was evaluated.
    pub best: Model<f32>,
    pub best_psnr: Option<f64>,
    pub log: TrainLog,
    pub checkpoint: Option<PathBuf>,
}

pub fn train(data_dir: impl AsRef<Path>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_set = load_image_dir(data_dir)?;
    let eval_set = match &cfg.eval_dir {
        Some(dir) => load_image_dir(dir)?,
        None => Vec::new(),
    };
    train_on_images(&train_set, &eval_set, cfg)
}

/// The training loop: sample a batch, degrade each patch with its own seed,
/// take one Adam step; evaluate periodically and keep the best model.
pub fn train_on_images(
    train_set: &[NamedImage],
    eval_set: &[NamedImage],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let c = cfg.model.in_channels;
    for img in train_set.iter().chain(eval_set) {
        if img.image.channels() != c {
            return Err(Error::config(format!(
                "{} has {} channels, model expects {c}",
                img.name,
                img.image.channels()
            )));
        }
    }
    let usable: Vec<FloatImage> = train_set
        .iter()
        .filter(|n| {
            let ok = n.image.width() >= cfg.patch && n.image.height() >= cfg.patch;
            if !ok {
                log::warn!("{} is smaller than the {} px patch; skipped", n.name, cfg.patch);
            }
            ok
        })
        .map(|n| n.image.to_float())
        .collect();
    if usable.is_empty() {
        return Err(Error::config("no training image is large enough for one patch"));
    }

    let mut model = init_params::<f32>(&cfg.model, cfg.seed)?;
    let adam = cfg.adam();
    let mut sampler = Sampler {
        images: usable,
        patch: cfg.patch,
        per_image: cfg.patches_per_image,
        seed: derive_seed(cfg.seed, &[0x0074_7261_696e]),
        epoch: 0,
        queue: Vec::new(),
    };
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut log = TrainLog::default();
    let mut best: Option<(f64, Model<f32>)> = None;
    let mut checkpoint = None;
    for step in 1..=cfg.steps {
        let mut clean = Vec::with_capacity(cfg.batch);
        let mut degraded = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let (i, x, y, seed) = sampler.next();
            let patch = sampler.images[i].crop(x, y, cfg.patch, cfg.patch)?;
            degraded.push(cfg.task.degrade_float(&patch, seed)?.to_tensor::<f32>());
            clean.push(patch.to_tensor::<f32>());
        }
        let loss = train_step(
            &mut model,
            &adam,
            &Tensor::stack(&degraded)?,
            &Tensor::stack(&clean)?,
            step,
        )?;
        log::debug!("step {step} loss {loss:.6}");
        log.push(LogRecord::Step { step, loss });

        if cfg.eval_every > 0 && !eval_set.is_empty() && (step % cfg.eval_every == 0 || step == cfg.steps) {
            let report = evaluate_model(&model, eval_set, &cfg.task, cfg.seed, cfg.tile, cfg.overlap)?;
            log::info!("step {step}: eval psnr {:.3} dB ssim {:.4}", report.psnr, report.ssim);
            log.push(LogRecord::Eval {
                step,
                psnr: report.psnr,
                ssim: report.ssim,
            });
            if best.as_ref().is_none_or(|(p, _)| report.psnr > *p) {
                if let Some(dir) = &cfg.checkpoint_dir {
                    let path = dir.join("best.cant");
                    write_checkpoint(&model, &cfg.task, &path)?;
                    checkpoint = Some(path);
                }
                best = Some((report.psnr, model.clone()));
            }
        }
    }

    if let Some(dir) = &cfg.checkpoint_dir {
        let path = dir.join("last.cant");
        write_checkpoint(&model, &cfg.task, &path)?;
        checkpoint.get_or_insert(path);
    }
    log.wall_time = start.elapsed();
    let (best_psnr, best) = match best {
        Some((p, m)) => (Some(p), m),
        None => (None, model.clone()),
    };
    Ok(TrainOutcome {
        last: model,
        best,
        best_psnr,
        log,
        checkpoint,
    })
}

fn write_checkpoint(model: &Model<f32>, task: &Task, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, Some(task))).map_err(|e| Error::io(path, e))
}
