//! Full network assembly.
//!
//! ```text
//! F0  = conv3x3(I_LQ)
//! F1  = ABlock1(F0)
//! Fn  = ABlock_n(ALayer(Fuse(concat(F_{n-1}, F_{n-2}))))      n >= 2
//! O_F = conv3x3(conv1x1(concat(F0 .. FN)))
//! O   = conv3x3(O_F) + I_LQ
//! ```
//!
//! `Fuse` is a 1x1 projection `2C -> C` when feature selection is on and a
//! 3x3 conv otherwise. In element-wise mode the concatenations become sums
//! and the projections (if any) are `C -> C`.

mod checkpoint;
mod config;
mod gradcheck;
mod restore;

use crate::attention::{ABlock, ABlockSpec, ALayer, AttentionSettings};
use crate::error::{Error, Result};
use crate::nn::{Conv2d, Layout, ParamId, ParamStore};
use crate::tensor::{Graph, Real, Tensor, Var};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    CheckpointError, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{Ablation, Combine, ModelConfig};
pub use gradcheck::{check_model_gradients, ModelGradCheck};
pub use restore::{restore_float, restore_image, DEFAULT_OVERLAP, DEFAULT_TILE};

/// Merge of the two previous block outputs ahead of blocks 2..N.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFusion {
    pub project: Option<Conv2d>,
    pub layer: ALayer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub entry: Option<LocalFusion>,
    pub block: ABlock,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalFusion {
    pub select: Option<Conv2d>,
    pub conv: Conv2d,
}

/// Parameter-free description of the network; values live in a
/// [`ParamStore`] built from [`Canet::layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct Canet {
    config: ModelConfig,
    layout: Layout,
    pub head: Conv2d,
    pub stages: Vec<Stage>,
    pub fusion: GlobalFusion,
    pub tail: Conv2d,
}

impl Canet {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        let attn = AttentionSettings {
            pixel: config.pixel_attention(),
            channel_ratio: config.ca_ratio,
            enabled: config.feature_attention,
        };
        let concat = config.combine == Combine::Concatenation;
        let mut layout = Layout::new();

        let head = Conv2d::new(&mut layout, "head", config.in_channels, c, 3);

        let mut stages = Vec::with_capacity(config.blocks);
        for n in 1..=config.blocks {
            let name = format!("block{n}");
            let entry = if n == 1 {
                None
            } else {
                let merged = if concat { 2 * c } else { c };
                let project = match (config.feature_selection, concat) {
                    (true, _) => Some(Conv2d::new(&mut layout, &format!("{name}.fuse"), merged, c, 1)),
                    (false, true) => {
                        Some(Conv2d::new(&mut layout, &format!("{name}.fuse"), merged, c, 3))
                    }
                    (false, false) => None,
                };
                let layer = ALayer::new(&mut layout, &format!("{name}.entry"), c, &attn)?;
                Some(LocalFusion { project, layer })
            };
            let block = ABlock::new(
                &mut layout,
                &name,
                ABlockSpec {
                    layers: config.layers_per_block,
                    channels: c,
                },
                &attn,
            )?;
            stages.push(Stage { entry, block });
        }

        let merged = if concat { (config.blocks + 1) * c } else { c };
        let fusion = if config.feature_selection {
            GlobalFusion {
                select: Some(Conv2d::new(&mut layout, "fusion.select", merged, c, 1)),
                conv: Conv2d::new(&mut layout, "fusion.conv", c, c, 3),
            }
        } else {
            GlobalFusion {
                select: None,
                conv: Conv2d::new(&mut layout, "fusion.conv", merged, c, 3),
            }
        };
        let tail = Conv2d::new(&mut layout, "tail", c, config.in_channels, 3);

        Ok(Canet {
            config: config.clone(),
            layout,
            head,
            stages,
            fusion,
            tail,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.param_count()
    }

    fn merge<T: Real>(&self, g: &mut Graph<T>, parts: &[Var]) -> Result<Var> {
        match self.config.combine {
            Combine::Concatenation => g.concat_channels(parts),
            Combine::ElementWise => {
                let mut acc = parts[0];
                for &p in &parts[1..] {
                    acc = g.add(acc, p)?;
                }
                Ok(acc)
            }
        }
    }

    /// Restored output for a `n x in_channels x h x w` input in `[0, 1]`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, input: Var) -> Result<Var> {
        let s = g.shape(input);
        if s.c != self.config.in_channels {
            return Err(Error::contract(format!(
                "model expects {} input channels, got {}",
                self.config.in_channels, s.c
            )));
        }
        let f0 = self.head.forward(g, p, input)?;
        let mut features = vec![f0];
        for stage in &self.stages {
            let prev = *features.last().expect("non-empty");
            let x = match &stage.entry {
                None => prev,
                Some(entry) => {
                    let older = features[features.len() - 2];
                    let mut h = self.merge(g, &[prev, older])?;
                    if let Some(project) = &entry.project {
                        h = project.forward(g, p, h)?;
                    }
                    entry.layer.forward(g, p, h)?
                }
            };
            features.push(stage.block.forward(g, p, x)?);
        }
        let mut h = self.merge(g, &features)?;
        if let Some(select) = &self.fusion.select {
            h = select.forward(g, p, h)?;
        }
        let fused = self.fusion.conv.forward(g, p, h)?;
        let residual = self.tail.forward(g, p, fused)?;
        g.add(residual, input)
    }

    /// Every parameter of the final projection conv.
    pub fn tail_param_ids(&self) -> [ParamId; 2] {
        self.tail.param_ids()
    }
}

/// Network description plus parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub net: Canet,
    pub params: ParamStore<T>,
}

/// Builds the network for `config` with fan-in uniform conv weights (scaled
/// by `config.weight_init`), zero biases and PReLU slopes of 0.25,
/// deterministically from `seed`.
pub fn init_params<T: Real>(config: &ModelConfig, seed: u64) -> Result<Model<T>> {
    let net = Canet::new(config)?;
    let params = ParamStore::init(net.layout(), seed, config.weight_init);
    Ok(Model { net, params })
}

/// Number of scalar learnable values.
pub fn param_count<T: Real>(params: &ParamStore<T>) -> usize {
    params.param_count()
}

impl<T: Real> Model<T> {
    pub fn new(net: Canet, params: ParamStore<T>) -> Result<Self> {
        params.check_layout(net.layout())?;
        Ok(Model { net, params })
    }

    pub fn config(&self) -> &ModelConfig {
        self.net.config()
    }

    pub fn forward(&self, g: &mut Graph<T>, input: Var) -> Result<Var> {
        self.net.forward(g, &self.params, input)
    }

    /// Forward pass on a plain tensor, discarding the tape.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let x = g.constant(input.clone());
        let y = self.forward(&mut g, x)?;
        Ok(g.value(y).clone())
    }

    /// Zeroes the final projection so the network starts as the identity.
    pub fn zero_tail(&mut self) {
        for id in self.net.tail_param_ids() {
            self.params.get_mut(id).value.fill(T::zero());
        }
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            net: self.net.clone(),
            params: self.params.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(c: usize, h: usize, w: usize, seed: u64) -> Tensor<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(Shape::new(1, c, h, w).unwrap(), |_, _, _, _| rng.random())
    }

    #[test]
    fn zero_tail_is_bitwise_identity() {
        let mut model = init_params::<f32>(&ModelConfig::tiny(), 4).unwrap();
        model.zero_tail();
        let x = random_input(3, 12, 10, 1);
        assert_eq!(model.infer(&x).unwrap(), x);
    }

    #[test]
    fn shape_is_preserved_for_odd_sizes() {
        let model = init_params::<f32>(&ModelConfig::tiny(), 4).unwrap();
        for (h, w) in [(8, 8), (31, 31), (48, 48), (9, 13)] {
            let y = model.infer(&random_input(3, h, w, 2)).unwrap();
            assert_eq!(y.shape(), Shape::new(1, 3, h, w).unwrap());
            assert!(y.all_finite());
        }
    }

    #[test]
    fn rejects_wrong_input_channels() {
        let model = init_params::<f32>(&ModelConfig::tiny(), 4).unwrap();
        assert!(matches!(
            model.infer(&random_input(1, 8, 8, 0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn grayscale_model() {
        let config = ModelConfig {
            in_channels: 1,
            ..ModelConfig::tiny()
        };
        let model = init_params::<f32>(&config, 4).unwrap();
        let y = model.infer(&random_input(1, 8, 8, 0)).unwrap();
        assert_eq!(y.shape().c, 1);
    }

    #[test]
    fn every_ablation_row_builds_and_runs() {
        let x = random_input(3, 8, 8, 3);
        let mut counts = Vec::new();
        for row in Ablation::ALL {
            let config = ModelConfig::tiny().with_ablation(row);
            let model = init_params::<f32>(&config, 1).unwrap();
            assert!(model.infer(&x).unwrap().all_finite(), "{row:?}");
            counts.push(model.net.param_count());
        }
        // Attention adds parameters on top of the feature-selection row.
        assert!(counts[3] > counts[2]);
    }

    #[test]
    fn param_names_follow_dotted_paths() {
        let net = Canet::new(&ModelConfig::tiny()).unwrap();
        let names: Vec<&str> = net.layout().specs().iter().map(|s| s.name.as_str()).collect();
        for expected in [
            "head.weight",
            "block1.layer2.pa.conv1.weight",
            "block1.layer1.ca.conv2.bias",
            "block2.fuse.weight",
            "block2.entry.conv1.weight",
            "fusion.select.weight",
            "fusion.conv.bias",
            "tail.weight",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }
}
