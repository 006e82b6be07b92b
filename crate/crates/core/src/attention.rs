//! Pixel attention, channel attention, the attention residual layer
//! (A-layer) and the recursive A-block.
//!
//! An A-layer computes `x + CA(PA(u))` with `u = conv3x3(prelu(conv3x3(x)))`.
//! Pixel attention gates every channel with one sigmoid map per position;
//! channel attention gates every position with one sigmoid weight per
//! channel derived from globally pooled statistics. Pixel attention always
//! runs first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv2d, Layout, ParamId, ParamStore, Prelu};
use crate::tensor::{Graph, Real, Var};

/// Channel schedule of the pixel attention branch, input width first.
/// The last entry is always 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelAttentionSpec {
    pub widths: Vec<usize>,
}

impl PixelAttentionSpec {
    /// `C -> C/2 -> C/8 -> 1`, never narrower than one channel.
    pub fn tapered(channels: usize) -> Self {
        PixelAttentionSpec {
            widths: vec![channels, (channels / 2).max(1), (channels / 8).max(1), 1],
        }
    }

    /// Schedule with explicit hidden widths between `channels` and 1.
    pub fn with_hidden(channels: usize, hidden: &[usize]) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(channels);
        widths.extend_from_slice(hidden);
        widths.push(1);
        PixelAttentionSpec { widths }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::config("pixel attention needs at least one 1x1 conv"));
        }
        if self.widths.contains(&0) {
            return Err(Error::config(format!(
                "pixel attention widths {:?} contain a zero stage",
                self.widths
            )));
        }
        if self.widths.last() != Some(&1) {
            return Err(Error::config(format!(
                "pixel attention must end in one channel, got {:?}",
                self.widths
            )));
        }
        Ok(())
    }
}

/// `C -> C/r -> C` squeeze and excitation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAttentionSpec {
    pub channels: usize,
    pub ratio: usize,
}

impl ChannelAttentionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratio == 0 || !self.channels.is_multiple_of(self.ratio) || self.channels < self.ratio {
            return Err(Error::config(format!(
                "channel attention: {} channels not divisible by ratio {}",
                self.channels, self.ratio
            )));
        }
        Ok(())
    }

    pub fn reduced(&self) -> usize {
        self.channels / self.ratio
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ABlockSpec {
    pub layers: usize,
    pub channels: usize,
}

impl ABlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.channels == 0 {
            return Err(Error::config(format!("degenerate A-block {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelAttention {
    pub convs: Vec<Conv2d>,
    pub acts: Vec<Prelu>,
    channels: usize,
}

impl PixelAttention {
    pub fn new(layout: &mut Layout, name: &str, spec: &PixelAttentionSpec) -> Result<Self> {
        spec.validate()?;
        let stages = spec.widths.len() - 1;
        let mut convs = Vec::with_capacity(stages);
        let mut acts = Vec::with_capacity(stages - 1);
        for (i, pair) in spec.widths.windows(2).enumerate() {
            convs.push(Conv2d::new(
                layout,
                &format!("{name}.conv{}", i + 1),
                pair[0],
                pair[1],
                1,
            ));
            if i + 1 < stages {
                acts.push(Prelu::new(layout, &format!("{name}.act{}", i + 1), pair[1]));
            }
        }
        Ok(PixelAttention {
            convs,
            acts,
            channels: spec.widths[0],
        })
    }

    /// The `n x 1 x h x w` gate `r_p`.
    pub fn attention_map<T: Real>(
        &self,
        g: &mut Graph<T>,
        p: &ParamStore<T>,
        x: Var,
    ) -> Result<Var> {
        let c = g.shape(x).c;
        if c != self.channels {
            return Err(Error::shape(format!(
                "pixel attention built for {} channels, got {c}",
                self.channels
            )));
        }
        let mut h = x;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(g, p, h)?;
            if let Some(act) = self.acts.get(i) {
                h = act.forward(g, p, h)?;
            }
        }
        Ok(g.sigmoid(h))
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let r = self.attention_map(g, p, x)?;
        g.broadcast_mul(x, r)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.convs.iter().flat_map(Conv2d::param_ids).collect();
        ids.extend(self.acts.iter().map(|a| a.slope));
        ids
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelAttention {
    pub squeeze: Conv2d,
    pub act: Prelu,
    pub excite: Conv2d,
}

impl ChannelAttention {
    pub fn new(layout: &mut Layout, name: &str, spec: ChannelAttentionSpec) -> Result<Self> {
        spec.validate()?;
        let r = spec.reduced();
        Ok(ChannelAttention {
            squeeze: Conv2d::new(layout, &format!("{name}.conv1"), spec.channels, r, 1),
            act: Prelu::new(layout, &format!("{name}.act1"), r),
            excite: Conv2d::new(layout, &format!("{name}.conv2"), r, spec.channels, 1),
        })
    }

    /// The `n x C x 1 x 1` gate `r_c`.
    pub fn attention_map<T: Real>(
        &self,
        g: &mut Graph<T>,
        p: &ParamStore<T>,
        x: Var,
    ) -> Result<Var> {
        let pooled = g.global_avg_pool(x);
        let h = self.squeeze.forward(g, p, pooled)?;
        let h = self.act.forward(g, p, h)?;
        let h = self.excite.forward(g, p, h)?;
        Ok(g.sigmoid(h))
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let r = self.attention_map(g, p, x)?;
        g.broadcast_mul(x, r)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.squeeze.param_ids().to_vec();
        ids.push(self.act.slope);
        ids.extend(self.excite.param_ids());
        ids
    }
}

/// Attention settings shared by every A-layer of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionSettings {
    pub pixel: PixelAttentionSpec,
    pub channel_ratio: usize,
    /// When false the layer is a plain residual conv pair.
    pub enabled: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ALayer {
    pub trunk1: Conv2d,
    pub act: Prelu,
    pub trunk2: Conv2d,
    pub pa: Option<PixelAttention>,
    pub ca: Option<ChannelAttention>,
    pub channels: usize,
}

impl ALayer {
    pub fn new(
        layout: &mut Layout,
        name: &str,
        channels: usize,
        attn: &AttentionSettings,
    ) -> Result<Self> {
        let trunk1 = Conv2d::new(layout, &format!("{name}.conv1"), channels, channels, 3);
        let act = Prelu::new(layout, &format!("{name}.act"), channels);
        let trunk2 = Conv2d::new(layout, &format!("{name}.conv2"), channels, channels, 3);
        let (pa, ca) = if attn.enabled {
            if attn.pixel.widths.first() != Some(&channels) {
                return Err(Error::config(format!(
                    "pixel attention schedule {:?} does not start at {channels} channels",
                    attn.pixel.widths
                )));
            }
            let pa = PixelAttention::new(layout, &format!("{name}.pa"), &attn.pixel)?;
            let ca = ChannelAttention::new(
                layout,
                &format!("{name}.ca"),
                ChannelAttentionSpec {
                    channels,
                    ratio: attn.channel_ratio,
                },
            )?;
            (Some(pa), Some(ca))
        } else {
            (None, None)
        };
        Ok(ALayer {
            trunk1,
            act,
            trunk2,
            pa,
            ca,
            channels,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let c = g.shape(x).c;
        if c != self.channels {
            return Err(Error::shape(format!(
                "A-layer built for {} channels, got {c}",
                self.channels
            )));
        }
        let u = self.trunk1.forward(g, p, x)?;
        let u = self.act.forward(g, p, u)?;
        let mut v = self.trunk2.forward(g, p, u)?;
        if let Some(pa) = &self.pa {
            v = pa.forward(g, p, v)?;
        }
        if let Some(ca) = &self.ca {
            v = ca.forward(g, p, v)?;
        }
        g.add(x, v)
    }

    pub fn trunk_param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.trunk1.param_ids().to_vec();
        ids.extend(self.trunk2.param_ids());
        ids
    }
}

/// `O_0 = x`, `O_1 = H_1(x)`, `O_n = H_n(O_{n-1} + O_{n-2})`; returns `O_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ABlock {
    pub layers: Vec<ALayer>,
}

impl ABlock {
    pub fn new(
        layout: &mut Layout,
        name: &str,
        spec: ABlockSpec,
        attn: &AttentionSettings,
    ) -> Result<Self> {
        spec.validate()?;
        let layers = (1..=spec.layers)
            .map(|i| ALayer::new(layout, &format!("{name}.layer{i}"), spec.channels, attn))
            .collect::<Result<_>>()?;
        Ok(ABlock { layers })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let mut older = x;
        let mut newer = self.layers[0].forward(g, p, x)?;
        for layer in &self.layers[1..] {
            let sum = g.add(newer, older)?;
            let next = layer.forward(g, p, sum)?;
            older = newer;
            newer = next;
        }
        Ok(newer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::WeightInit;
    use crate::tensor::{Shape, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Shape, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
    }

    fn settings(c: usize) -> AttentionSettings {
        AttentionSettings {
            pixel: PixelAttentionSpec::tapered(c),
            channel_ratio: 4,
            enabled: true,
        }
    }

    fn zero(store: &mut ParamStore<f64>, ids: &[ParamId]) {
        for &id in ids {
            store.get_mut(id).value.fill(0.0);
        }
    }

    #[test]
    fn spec_validation() {
        assert_eq!(PixelAttentionSpec::tapered(64).widths, vec![64, 32, 8, 1]);
        assert_eq!(PixelAttentionSpec::tapered(4).widths, vec![4, 2, 1, 1]);
        assert!(PixelAttentionSpec { widths: vec![8, 2] }.validate().is_err());
        assert!(ChannelAttentionSpec { channels: 64, ratio: 8 }.validate().is_ok());
        assert!(ChannelAttentionSpec { channels: 12, ratio: 8 }.validate().is_err());
    }

    #[test]
    fn zero_pixel_attention_halves_input() {
        let mut layout = Layout::new();
        let pa = PixelAttention::new(&mut layout, "pa", &PixelAttentionSpec::tapered(8)).unwrap();
        let mut store = ParamStore::<f64>::init(&layout, 1, WeightInit::HeUniform);
        zero(&mut store, &pa.param_ids());
        let mut g = Graph::new();
        let xt = random(Shape::new(2, 8, 5, 4).unwrap(), 2);
        let x = g.constant(xt.clone());
        let r = pa.attention_map(&mut g, &store, x).unwrap();
        assert_eq!(g.shape(r), Shape::new(2, 1, 5, 4).unwrap());
        let y = pa.forward(&mut g, &store, x).unwrap();
        for (a, b) in g.value(y).data().iter().zip(xt.data()) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn zero_channel_attention_halves_input() {
        let mut layout = Layout::new();
        let spec = ChannelAttentionSpec { channels: 8, ratio: 4 };
        let ca = ChannelAttention::new(&mut layout, "ca", spec).unwrap();
        let mut store = ParamStore::<f64>::init(&layout, 1, WeightInit::HeUniform);
        zero(&mut store, &ca.param_ids());
        let mut g = Graph::new();
        let xt = random(Shape::new(1, 8, 3, 3).unwrap(), 3);
        let x = g.constant(xt.clone());
        let r = ca.attention_map(&mut g, &store, x).unwrap();
        assert_eq!(g.shape(r), Shape::new(1, 8, 1, 1).unwrap());
        let y = ca.forward(&mut g, &store, x).unwrap();
        for (a, b) in g.value(y).data().iter().zip(xt.data()) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn channel_attention_rejects_indivisible_width() {
        let mut layout = Layout::new();
        let spec = ChannelAttentionSpec { channels: 10, ratio: 4 };
        assert!(matches!(
            ChannelAttention::new(&mut layout, "ca", spec),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pixel_attention_rejects_channel_mismatch() {
        let mut layout = Layout::new();
        let pa = PixelAttention::new(&mut layout, "pa", &PixelAttentionSpec::tapered(8)).unwrap();
        let store = ParamStore::<f64>::init(&layout, 1, WeightInit::HeUniform);
        let mut g = Graph::new();
        let x = g.constant(random(Shape::new(1, 4, 3, 3).unwrap(), 0));
        assert!(matches!(pa.forward(&mut g, &store, x), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_trunk_makes_alayer_identity() {
        let mut layout = Layout::new();
        let layer = ALayer::new(&mut layout, "l", 8, &settings(8)).unwrap();
        let mut store = ParamStore::<f64>::init(&layout, 5, WeightInit::HeUniform);
        zero(&mut store, &layer.trunk_param_ids());
        let xt = random(Shape::new(1, 8, 6, 7).unwrap(), 4);
        let mut g = Graph::new();
        let x = g.constant(xt.clone());
        let y = layer.forward(&mut g, &store, x).unwrap();
        assert_eq!(g.value(y), &xt);
    }

    #[test]
    fn ablock_single_layer_is_one_application() {
        let mut layout = Layout::new();
        let spec = ABlockSpec { layers: 1, channels: 8 };
        let block = ABlock::new(&mut layout, "b", spec, &settings(8)).unwrap();
        let store = ParamStore::<f64>::init(&layout, 9, WeightInit::HeUniform);
        let xt = random(Shape::new(1, 8, 4, 4).unwrap(), 5);
        let mut g = Graph::new();
        let x = g.constant(xt);
        let a = block.forward(&mut g, &store, x).unwrap();
        let b = block.layers[0].forward(&mut g, &store, x).unwrap();
        assert_eq!(g.value(a), g.value(b));
    }

    #[test]
    fn identity_layers_give_fibonacci_weights() {
        // With identity layers, O_n = O_{n-1} + O_{n-2}: 1, 2, 3, 5, 8 times x.
        let fib = [1.0, 2.0, 3.0, 5.0, 8.0];
        for (n, &k) in fib.iter().enumerate() {
            let mut layout = Layout::new();
            let spec = ABlockSpec {
                layers: n + 1,
                channels: 4,
            };
            let attn = AttentionSettings {
                pixel: PixelAttentionSpec::tapered(4),
                channel_ratio: 2,
                enabled: true,
            };
            let block = ABlock::new(&mut layout, "b", spec, &attn).unwrap();
            let mut store = ParamStore::<f64>::init(&layout, 1, WeightInit::HeUniform);
            for l in &block.layers {
                zero(&mut store, &l.trunk_param_ids());
            }
            let xt = random(Shape::new(1, 4, 3, 3).unwrap(), 6);
            let mut g = Graph::new();
            let x = g.constant(xt.clone());
            let y = block.forward(&mut g, &store, x).unwrap();
            for (a, b) in g.value(y).data().iter().zip(xt.data()) {
                assert!((a - k * b).abs() < 1e-12, "N={} coefficient {k}", n + 1);
            }
        }
    }
}
