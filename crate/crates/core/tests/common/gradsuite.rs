//! Gradient-check suites shared by the integration and acceptance tests.

use canet::attention::{
    ABlock, ABlockSpec, ALayer, AttentionSettings, ChannelAttention, ChannelAttentionSpec, PixelAttention,
    PixelAttentionSpec,
};
use canet::canet::{check_model_gradients, Ablation, ModelConfig, ModelGradCheck};
use canet::nn::{l2_loss, Conv2d, Layout, ParamStore, Parameter, Prelu, WeightInit};
use canet::tensor::{check_graph, finite_diff_check, GradCheckReport, Graph, Tensor, Var};
use canet::Result;

use super::{random_tensor, rng};

pub const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 2e-5;

/// Checks every parameter and the input of a layer under an L2 loss
/// against a random target.
pub fn check_layer<F>(layout: &Layout, input: Tensor<f64>, seed: u64, build: F) -> GradCheckReport
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>, Var) -> Result<Var>,
{
    let mut store = ParamStore::<f64>::init(layout, seed, WeightInit::HeUniform);
    // Nudge constants away from their initial values so zero biases and
    // equal slopes do not hide mistakes.
    let mut r = rng(seed);
    for p in store.iter_mut() {
        let noise = random_tensor(&mut r, p.value.shape().n, p.value.shape().c, p.value.shape().h, p.value.shape().w);
        for (v, e) in p.value.data_mut().iter_mut().zip(noise.data()) {
            *v += 0.1 * e;
        }
    }
    let s = input.shape();
    let mut g = Graph::new();
    let x = g.variable(input.clone());
    let y = build(&mut g, &store, x).unwrap();
    let ys = g.shape(y);
    let target = random_tensor(&mut r, ys.n, ys.c, ys.h, ys.w);
    let t = g.constant(target.clone());
    let loss = l2_loss(&mut g, y, t).unwrap();
    let grads = g.backward(loss).unwrap();
    store.accumulate(&g, &grads);

    let names: Vec<String> = store.iter().map(|p| p.name.clone()).collect();
    let mut values: Vec<Tensor<f64>> = store.iter().map(|p| p.value.clone()).collect();
    let mut analytic: Vec<Tensor<f64>> = store.iter().map(|p| p.grad.clone()).collect();
    values.push(input);
    analytic.push(grads.get(x).unwrap().clone());
    assert_eq!(analytic.last().unwrap().shape(), s);
    finite_diff_check(
        &mut values,
        &analytic,
        |vals| {
            let (input, params) = vals.split_last().unwrap();
            let store = ParamStore::from_parameters(
                names.iter().zip(params).map(|(n, v)| Parameter::new(n.clone(), v.clone())).collect(),
            );
            let mut g = Graph::new();
            let x = g.constant(input.clone());
            let t = g.constant(target.clone());
            let y = build(&mut g, &store, x).unwrap();
            let l = l2_loss(&mut g, y, t).unwrap();
            g.value(l).item().unwrap()
        },
        STEP,
        12,
        seed,
    )
}

pub fn op_reports() -> Vec<(&'static str, GradCheckReport)> {
    let mut r = rng(10);
    let mut out = Vec::new();
    let mut push = |name, rep: Result<GradCheckReport>| out.push((name, rep.unwrap()));

    let x = random_tensor(&mut r, 2, 3, 5, 4);
    let w = random_tensor(&mut r, 4, 3, 3, 3);
    let b = random_tensor(&mut r, 1, 4, 1, 1);
    push("conv2d 3x3", check_graph(vec![x.clone(), w, b], |g, v| { let y = g.conv2d(v[0], v[1], v[2], 1)?; Ok(g.sum(y)) }, STEP, 12, 1));
    let w1 = random_tensor(&mut r, 2, 3, 1, 1);
    let b1 = random_tensor(&mut r, 1, 2, 1, 1);
    push("conv2d 1x1", check_graph(vec![x.clone(), w1, b1], |g, v| {
        let y = g.conv2d(v[0], v[1], v[2], 0)?;
        let y = g.mul(y, y)?;
        Ok(g.sum(y))
    }, STEP, 12, 2));
    let slope = random_tensor(&mut r, 1, 3, 1, 1);
    push("prelu", check_graph(vec![x.clone(), slope], |g, v| {
        let y = g.prelu(v[0], v[1])?;
        let y = g.mul(y, y)?;
        Ok(g.sum(y))
    }, STEP, 12, 3));
    push("sigmoid", check_graph(vec![x.clone()], |g, v| {
        let y = g.sigmoid(v[0]);
        let y = g.mul(y, v[0])?;
        Ok(g.sum(y))
    }, STEP, 12, 4));
    push("global_avg_pool", check_graph(vec![x.clone()], |g, v| {
        let y = g.global_avg_pool(v[0]);
        let y = g.mul(y, y)?;
        Ok(g.sum(y))
    }, STEP, 12, 5));
    let x2 = random_tensor(&mut r, 2, 2, 5, 4);
    push("concat_channels", check_graph(vec![x.clone(), x2], |g, v| {
        let y = g.concat_channels(&[v[1], v[0], v[1]])?;
        let y = g.mul(y, y)?;
        Ok(g.sum(y))
    }, STEP, 12, 6));
    let x3 = random_tensor(&mut r, 2, 3, 5, 4);
    push("add and mul", check_graph(vec![x.clone(), x3], |g, v| {
        let s = g.add(v[0], v[1])?;
        let y = g.mul(s, v[0])?;
        Ok(g.sum(y))
    }, STEP, 12, 7));
    let pix = random_tensor(&mut r, 2, 1, 5, 4);
    push("broadcast_mul pixel", check_graph(vec![x.clone(), pix], |g, v| {
        let y = g.broadcast_mul(v[0], v[1])?;
        let y = g.mul(y, y)?;
        Ok(g.sum(y))
    }, STEP, 12, 8));
    let chan = random_tensor(&mut r, 2, 3, 1, 1);
    push("broadcast_mul channel", check_graph(vec![x.clone(), chan], |g, v| {
        let y = g.broadcast_mul(v[0], v[1])?;
        let y = g.mul(y, y)?;
        Ok(g.sum(y))
    }, STEP, 12, 9));
    let t = random_tensor(&mut r, 2, 3, 5, 4);
    push("l2_loss", check_graph(vec![x, t], |g, v| g.l2_loss(v[0], v[1]), STEP, 12, 10));
    out
}

pub fn layer_reports() -> Vec<(&'static str, GradCheckReport)> {
    let mut r = rng(20);
    let mut out = Vec::new();
    let c = 8;
    let attn = AttentionSettings {
        pixel: PixelAttentionSpec::with_hidden(c, &[4, 2]),
        channel_ratio: 4,
        enabled: true,
    };

    let mut l = Layout::new();
    let conv = Conv2d::new(&mut l, "conv", 3, 5, 3);
    out.push(("Conv2d layer", check_layer(&l, random_tensor(&mut r, 2, 3, 6, 5), 1, |g, p, x| conv.forward(g, p, x))));

    let mut l = Layout::new();
    let act = Prelu::new(&mut l, "act", 3);
    out.push(("PReLU layer", check_layer(&l, random_tensor(&mut r, 2, 3, 4, 4), 2, |g, p, x| act.forward(g, p, x))));

    let mut l = Layout::new();
    let pa = PixelAttention::new(&mut l, "pa", &attn.pixel).unwrap();
    out.push(("pixel attention", check_layer(&l, random_tensor(&mut r, 2, c, 5, 5), 3, |g, p, x| pa.forward(g, p, x))));

    let mut l = Layout::new();
    let ca = ChannelAttention::new(&mut l, "ca", ChannelAttentionSpec { channels: c, ratio: 4 }).unwrap();
    out.push(("channel attention", check_layer(&l, random_tensor(&mut r, 2, c, 5, 5), 4, |g, p, x| ca.forward(g, p, x))));

    let mut l = Layout::new();
    let layer = ALayer::new(&mut l, "layer", c, &attn).unwrap();
    out.push(("A-layer", check_layer(&l, random_tensor(&mut r, 1, c, 6, 6), 5, |g, p, x| layer.forward(g, p, x))));

    let mut l = Layout::new();
    let block = ABlock::new(&mut l, "block", ABlockSpec { layers: 3, channels: c }, &attn).unwrap();
    out.push(("A-block", check_layer(&l, random_tensor(&mut r, 1, c, 5, 5), 6, |g, p, x| block.forward(g, p, x))));

    let wide = AttentionSettings {
        pixel: PixelAttentionSpec::tapered(64),
        channel_ratio: 8,
        enabled: true,
    };
    let mut l = Layout::new();
    let block = ABlock::new(&mut l, "block", ABlockSpec { layers: 6, channels: 64 }, &wide).unwrap();
    out.push(("A-block N=6 C=64", check_layer(&l, random_tensor(&mut r, 1, 64, 4, 4), 7, |g, p, x| block.forward(g, p, x))));
    out
}

pub fn model_reports() -> Vec<(String, GradCheckReport)> {
    let mut out = vec![(
        "CANet-tiny".to_string(),
        check_model_gradients(&ModelConfig::tiny(), &ModelGradCheck::default()).unwrap(),
    )];
    for row in [Ablation::ElementWise, Ablation::Concatenation] {
        let cfg = ModelConfig::tiny().with_ablation(row);
        let opts = ModelGradCheck {
            samples_per_tensor: 2,
            ..ModelGradCheck::default()
        };
        out.push((format!("CANet-tiny {}", row.label()), check_model_gradients(&cfg, &opts).unwrap()));
    }
    out
}

