use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{derive_seed, train_step, LogRecord, TrainLog};
use crate::canet::{init_params, Ablation, ModelConfig};
use crate::error::{Error, Result};
use crate::imaging::{add_awgn_float, patch_coords, FloatImage, ImageBuffer};
use crate::metrics::psnr_float;
use crate::nn::AdamConfig;
use crate::tensor::Tensor;

/// Memorisation run on a fixed batch of noisy patches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverfitConfig {
    pub model: ModelConfig,
    pub steps: usize,
    pub lr: f64,
    pub sigma: f64,
    pub patch: usize,
    pub patches: usize,
    pub seed: u64,
}

impl Default for OverfitConfig {
    fn default() -> Self {
        OverfitConfig {
            model: ModelConfig::tiny(),
            steps: 2000,
            lr: 1e-3,
            sigma: 25.0,
            patch: 48,
            patches: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverfitResult {
    pub params: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// PSNR of the noisy batch against the clean batch.
    pub noisy_psnr: f64,
    /// PSNR of the clamped network output after training.
    pub restored_psnr: f64,
    pub log: TrainLog,
}

impl OverfitResult {
    pub fn loss_ratio(&self) -> f64 {
        self.final_loss / self.initial_loss
    }

    pub fn gain_db(&self) -> f64 {
        self.restored_psnr - self.noisy_psnr
    }
}

fn batch_image(t: &Tensor<f32>) -> Result<FloatImage> {
    // Lay the batch out side by side so whole-batch PSNR is a single call.
    let s = t.shape();
    let tiles = (0..s.n)
        .map(|n| FloatImage::from_tensor(t, n))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(t.numel());
    for y in 0..s.h {
        for tile in &tiles {
            for x in 0..s.w {
                for c in 0..s.c {
                    data.push(tile.get(x, y, c));
                }
            }
        }
    }
    FloatImage::new(s.w * s.n, s.h, s.c, data)
}

/// Trains a fresh model for `cfg.steps` Adam steps on `cfg.patches` crops of
/// `source`, each with its own fixed σ-noise realisation.
pub fn overfit(source: &ImageBuffer, cfg: &OverfitConfig) -> Result<OverfitResult> {
    cfg.model.validate()?;
    if source.channels() != cfg.model.in_channels {
        return Err(Error::config(format!(
            "source has {} channels, model expects {}",
            source.channels(),
            cfg.model.in_channels
        )));
    }
    let coords = patch_coords(source.width(), source.height(), cfg.patch, cfg.patches, cfg.seed);
    if coords.is_empty() || cfg.steps == 0 {
        return Err(Error::config("overfit needs a source at least one patch wide and steps > 0"));
    }
    let start = Instant::now();
    let float = source.to_float();
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for (k, &(x, y)) in coords.iter().enumerate() {
        let patch = float.crop(x, y, cfg.patch, cfg.patch)?;
        let degraded = add_awgn_float(&patch, cfg.sigma, derive_seed(cfg.seed, &[k as u64]));
        clean.push(patch.to_tensor::<f32>());
        noisy.push(degraded.to_tensor::<f32>());
    }
    let (clean, noisy) = (Tensor::stack(&clean)?, Tensor::stack(&noisy)?);

    let mut model = init_params::<f32>(&cfg.model, cfg.seed)?;
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut log = TrainLog::default();
    for step in 1..=cfg.steps {
        let loss = train_step(&mut model, &adam, &noisy, &clean, step)?;
        log.push(LogRecord::Step { step, loss });
    }
    let final_loss = super::batch_loss(&model, &noisy, &clean)?;
    let restored = model.infer(&noisy)?.map(|v| v.clamp(0.0, 1.0));

    let clean_img = batch_image(&clean)?;
    let noisy_psnr = psnr_float(&batch_image(&noisy)?, &clean_img)?;
    let restored_psnr = psnr_float(&batch_image(&restored)?, &clean_img)?;
    log.wall_time = start.elapsed();
    let losses = log.losses();
    Ok(OverfitResult {
        params: model.params.param_count(),
        initial_loss: losses[0],
        final_loss,
        noisy_psnr,
        restored_psnr,
        log,
    })
}

/// One configuration of the ablation harness.
#[derive(Clone, Debug)]
pub struct AblationRow {
    pub label: String,
    pub result: OverfitResult,
}

impl AblationRow {
    pub fn summary(&self) -> String {
        let r = &self.result;
        format!(
            "{:<20} params {:>7}  loss {:.4} -> {:.4} ({:5.1}%)  psnr {:.2} -> {:.2} dB ({:+.2})  {:.1}s",
            self.label,
            r.params,
            r.initial_loss,
            r.final_loss,
            100.0 * r.loss_ratio(),
            r.noisy_psnr,
            r.restored_psnr,
            r.gain_db(),
            r.log.wall_time.as_secs_f64()
        )
    }

    pub fn wall_time(&self) -> Duration {
        self.result.log.wall_time
    }
}

/// The four component rows followed by block counts `blocks`, all on the
/// overfit protocol of `base`. A configuration that repeats an earlier row
/// reuses its result, since runs are deterministic.
pub fn ablation_sweep(
    source: &ImageBuffer,
    base: &OverfitConfig,
    blocks: impl IntoIterator<Item = usize>,
) -> Result<Vec<AblationRow>> {
    let mut variants: Vec<(String, ModelConfig)> = Ablation::ALL
        .iter()
        .map(|&row| (row.label().to_string(), base.model.clone().with_ablation(row)))
        .collect();
    for n in blocks {
        let model = ModelConfig {
            blocks: n,
            ..base.model.clone()
        };
        variants.push((format!("{n} block(s)"), model));
    }
    let mut rows: Vec<(ModelConfig, AblationRow)> = Vec::new();
    for (label, model) in variants {
        let result = match rows.iter().find(|(m, _)| *m == model) {
            Some((_, done)) => done.result.clone(),
            None => overfit(
                source,
                &OverfitConfig {
                    model: model.clone(),
                    ..base.clone()
                },
            )?,
        };
        let row = AblationRow { label, result };
        log::info!("{}", row.summary());
        rows.push((model, row));
    }
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}
