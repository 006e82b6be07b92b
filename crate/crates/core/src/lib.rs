//! CANet: concatenated attention blocks with pixel-wise and channel-wise
//! attention for image denoising and JPEG artifact removal, on a small
//! self-contained tensor and autodiff core.
//!
//! ```no_run
//! use canet::canet::{init_params, restore_image, ModelConfig};
//! use canet::imaging::{add_awgn, read_ppm};
//!
//! let clean = read_ppm("photo.ppm")?;
//! let noisy = add_awgn(&clean, 25.0, 7).to_image();
//! let model = init_params::<f32>(&ModelConfig::tiny(), 0)?;
//! let restored = restore_image(&noisy, &model, 48, 8)?;
//! # Ok::<(), canet::Error>(())
//! ```

pub mod attention;
pub mod canet;
pub mod cli;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
