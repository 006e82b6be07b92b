use std::path::Path;

use super::{derive_seed, load_image_dir, NamedImage, Task};
use crate::canet::{load_checkpoint, restore_image, Model};
use crate::error::{Error, Result};
use crate::metrics::{ImageMetrics, MetricReport};

/// Degrades each image with its own seed (`derive_seed(seed, [index])`),
/// restores it and scores the result against the clean original.
pub fn evaluate_model(
    model: &Model<f32>,
    images: &[NamedImage],
    task: &Task,
    seed: u64,
    tile: usize,
    overlap: usize,
) -> Result<MetricReport> {
    task.validate()?;
    let rows = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let degraded = task.degrade_image(&img.image, derive_seed(seed, &[i as u64]))?;
            let restored = restore_image(&degraded, model, tile, overlap)?;
            ImageMetrics::measure(img.name.clone(), &restored, &img.image)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_rows(rows))
}

/// Loads a checkpoint and evaluates it on every image in `clean_dir`.
/// A checkpoint trained for another task is rejected.
pub fn evaluate(
    checkpoint: impl AsRef<Path>,
    clean_dir: impl AsRef<Path>,
    task: &Task,
    seed: u64,
    tile: usize,
    overlap: usize,
) -> Result<MetricReport> {
    let ck = load_checkpoint::<f32>(checkpoint)?;
    if let Some(trained) = &ck.meta.task {
        if trained != task {
            return Err(Error::contract(format!(
                "checkpoint was trained for {trained}, asked to evaluate {task}"
            )));
        }
    }
    let images = load_image_dir(clean_dir)?;
    evaluate_model(&ck.model, &images, task, seed, tile, overlap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canet::{init_params, save_checkpoint, ModelConfig};
    use crate::imaging::{write_ppm, ImageBuffer};

    fn identity() -> Model<f32> {
        let mut m = init_params(&ModelConfig::tiny(), 0).unwrap();
        m.zero_tail();
        m
    }

    fn image() -> NamedImage {
        NamedImage {
            name: "ramp".into(),
            image: ImageBuffer::from_fn(40, 36, 3, |x, y, c| (60 + x * 2 + y + c * 20) as u8).unwrap(),
        }
    }

    #[test]
    fn identity_model_scores_the_degraded_input() {
        let task = Task::Car { quality: 20 };
        let report = evaluate_model(&identity(), &[image()], &task, 3, 48, 8).unwrap();
        let degraded = task.degrade_image(&image().image, derive_seed(3, &[0])).unwrap();
        let baseline = ImageMetrics::measure("ramp", &degraded, &image().image).unwrap();
        assert_eq!(report.per_image[0], baseline);
    }

    #[test]
    fn repeated_evaluation_is_identical() {
        let task = Task::Denoise { sigma: 25.0 };
        let m = init_params(&ModelConfig::tiny(), 1).unwrap();
        let a = evaluate_model(&m, &[image()], &task, 9, 24, 4).unwrap();
        let b = evaluate_model(&m, &[image()], &task, 9, 24, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn task_mismatch_is_a_contract_error() {
        let dir = tempfile::tempdir().unwrap();
        write_ppm(&image().image, dir.path().join("a.ppm")).unwrap();
        let ck = dir.path().join("m.cant");
        save_checkpoint(&identity(), Some(&Task::Denoise { sigma: 25.0 }), &ck).unwrap();
        let err = evaluate(&ck, dir.path(), &Task::Denoise { sigma: 50.0 }, 0, 48, 8).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        evaluate(&ck, dir.path(), &Task::Denoise { sigma: 25.0 }, 0, 48, 8).unwrap();
    }
}
