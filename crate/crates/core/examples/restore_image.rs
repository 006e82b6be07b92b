//! Train a small denoiser on crops of the bundled image, save it, reload
//! the checkpoint and restore a noisy copy tile by tile.
//!
//! `cargo run --release --example restore_image -- [steps]`

use canet::canet::{load_checkpoint, restore_image};
use canet::imaging::{sample_image, write_ppm};
use canet::metrics::{psnr, ssim};
use canet::trainer::{train_on_images, NamedImage, Task, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map_or(300, |s| s.parse().expect("steps"));
    let img = sample_image();
    let crop = |name: &str, x, y| -> canet::Result<NamedImage> {
        Ok(NamedImage {
            name: name.into(),
            image: img.crop(x, y, 64, 64)?,
        })
    };
    let train_set = [crop("tl", 0, 0)?, crop("tr", 64, 0)?, crop("bl", 0, 64)?];
    let held_out = [crop("br", 64, 64)?];

    let dir = std::env::temp_dir().join("canet_restore_example");
    let task = Task::Denoise { sigma: 25.0 };
    let cfg = TrainConfig {
        task: task.clone(),
        model: canet::canet::ModelConfig::tiny(),
        steps,
        batch: 4,
        lr: 1e-3,
        eval_every: 100,
        tile: 32,
        overlap: 8,
        checkpoint_dir: Some(dir.clone()),
        ..TrainConfig::default()
    };
    let outcome = train_on_images(&train_set, &held_out, &cfg)?;
    for (step, p, s) in outcome.log.evals() {
        println!("step {step:>5}  held-out psnr {p:.3} dB  ssim {s:.4}");
    }

    let model = load_checkpoint::<f32>(dir.join("best.cant"))?.model;
    let clean = &held_out[0].image;
    let noisy = task.degrade_image(clean, 99)?;
    let restored = restore_image(&noisy, &model, 32, 8)?;
    println!("noisy    psnr {:.3} dB  ssim {:.4}", psnr(&noisy, clean)?, ssim(&noisy, clean)?);
    println!("restored psnr {:.3} dB  ssim {:.4}", psnr(&restored, clean)?, ssim(&restored, clean)?);
    write_ppm(&restored, dir.join("restored.ppm"))?;
    println!("wrote {}", dir.join("restored.ppm").display());
    Ok(())
}
