//! Pixel and channel attention gates of an untrained A-layer on the
//! bundled image. The pixel gate is written as a PGM.

use canet::attention::{ChannelAttention, ChannelAttentionSpec, PixelAttention, PixelAttentionSpec};
use canet::imaging::{quantize, sample_image, write_ppm, ImageBuffer};
use canet::nn::{Conv2d, Layout, ParamStore, WeightInit};
use canet::tensor::Graph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channels = 16;
    let mut layout = Layout::new();
    let lift = Conv2d::new(&mut layout, "lift", 3, channels, 3);
    let pa = PixelAttention::new(&mut layout, "pa", &PixelAttentionSpec::with_hidden(channels, &[8, 4]))?;
    let ca = ChannelAttention::new(&mut layout, "ca", ChannelAttentionSpec { channels, ratio: 4 })?;
    let params = ParamStore::<f32>::init(&layout, 3, WeightInit::HeUniform);

    let img = sample_image();
    let mut g = Graph::new();
    let x = g.constant(img.to_float().to_tensor::<f32>());
    let features = lift.forward(&mut g, &params, x)?;
    let pixel = pa.attention_map(&mut g, &params, features)?;
    let channel = ca.attention_map(&mut g, &params, features)?;

    let map = g.value(pixel);
    let (lo, hi) = map.data().iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    println!("pixel gate {:?}: min {lo:.4} max {hi:.4}", map.shape().dims());
    println!("channel gate: {:?}", g.value(channel).data().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let pixels = map.data().iter().map(|&v| quantize((v - lo) * scale)).collect();
    let out = std::env::temp_dir().join("canet_pixel_gate.pgm");
    write_ppm(&ImageBuffer::new(img.width(), img.height(), 1, pixels)?, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
