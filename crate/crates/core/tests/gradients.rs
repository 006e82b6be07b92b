//! Analytic gradients against central differences, in double precision.

mod common;

use canet::canet::{check_model_gradients, ModelConfig, ModelGradCheck};
use canet::nn::WeightInit;
use canet::tensor::GradCheckReport;
use common::gradsuite::{layer_reports, model_reports, op_reports, TOLERANCE};
use common::*;

fn assert_ok(name: &str, r: &GradCheckReport) {
    eprintln!("{name}: {r:?}");
    assert!(r.checked > r.unresolved, "{name}: nothing checked");
    assert!(r.max_rel_error < TOLERANCE, "{name}: {r:?}");
}

#[test]
fn every_operation() {
    for (name, r) in op_reports() {
        assert_ok(name, &r);
    }
}

#[test]
fn every_layer_type() {
    for (name, r) in layer_reports() {
        assert_ok(name, &r);
    }
}

#[test]
fn whole_models() {
    for (name, r) in model_reports() {
        assert_ok(&name, &r);
    }
}

#[test]
fn default_depth_is_finite_and_checkable() {
    // Full default depth at reduced width keeps the check affordable. Thirty
    // A-layers under Fibonacci sums push the loss to ~1e7, so difference
    // quotients only resolve the gradient to a few parts in 1e4.
    let cfg = ModelConfig {
        channels: 16,
        pa_hidden: None,
        ca_ratio: 8,
        ..ModelConfig::default()
    };
    let opts = ModelGradCheck {
        size: 8,
        samples_per_tensor: 1,
        init: WeightInit::FanInUniform,
        ..ModelGradCheck::default()
    };
    let r = check_model_gradients(&cfg, &opts).unwrap();
    eprintln!("default depth: {r:?}");
    assert!(r.checked > 10 * r.unresolved, "{r:?}");
    assert!(r.max_rel_error < 1e-2, "{r:?}");
    let full = canet::canet::init_params::<f32>(&ModelConfig::default(), 0).unwrap();
    let mut r = rng(5);
    let x = random_tensor(&mut r, 1, 3, 48, 48).map(|v| v.abs()).cast::<f32>();
    assert!(full.infer(&x).unwrap().all_finite());
}
