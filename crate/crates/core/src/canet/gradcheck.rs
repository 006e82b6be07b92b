use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{init_params, ModelConfig};
use crate::error::Result;
use crate::nn::{l2_loss, ParamStore, Parameter, WeightInit};
use crate::tensor::{finite_diff_check, GradCheckReport, Graph, Shape, Tensor};

/// Settings for [`check_model_gradients`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradCheck {
    pub seed: u64,
    pub size: usize,
    pub step: f64,
    pub samples_per_tensor: usize,
    /// Initializer for the checked parameters, overriding the config. The
    /// wider He-uniform draw keeps small gradients above the roundoff
    /// floor of the difference quotient.
    pub init: WeightInit,
}

impl Default for ModelGradCheck {
    fn default() -> Self {
        ModelGradCheck {
            seed: 0,
            size: 8,
            step: 2e-5,
            samples_per_tensor: 3,
            init: WeightInit::HeUniform,
        }
    }
}

/// Compares backprop against central differences for every parameter
/// tensor and the input of a double-precision model, under the L2 loss
/// against a random target.
pub fn check_model_gradients(config: &ModelConfig, opts: &ModelGradCheck) -> Result<GradCheckReport> {
    let config = &ModelConfig {
        weight_init: opts.init,
        ..config.clone()
    };
    let mut model = init_params::<f64>(config, opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6772_6164);
    let shape = Shape::new(1, config.in_channels, opts.size, opts.size)?;
    let input = Tensor::from_fn(shape, |_, _, _, _| rng.random::<f64>());
    let target = Tensor::from_fn(shape, |_, _, _, _| rng.random::<f64>());

    let mut g = Graph::new();
    let x = g.variable(input.clone());
    let t = g.constant(target.clone());
    let y = model.forward(&mut g, x)?;
    let loss = l2_loss(&mut g, y, t)?;
    let grads = g.backward(loss)?;
    model.params.accumulate(&g, &grads);

    let names: Vec<String> = model.params.iter().map(|p| p.name.clone()).collect();
    let mut values: Vec<Tensor<f64>> = model.params.iter().map(|p| p.value.clone()).collect();
    let mut analytic: Vec<Tensor<f64>> = model.params.iter().map(|p| p.grad.clone()).collect();
    values.push(input);
    analytic.push(grads.get(x).cloned().expect("input is a variable"));

    let net = model.net.clone();
    let report = finite_diff_check(
        &mut values,
        &analytic,
        |vals| {
            let (input, params) = vals.split_last().expect("input present");
            let store = ParamStore::from_parameters(
                names
                    .iter()
                    .zip(params)
                    .map(|(n, v)| Parameter::new(n.clone(), v.clone()))
                    .collect(),
            );
            let mut g = Graph::new();
            let x = g.constant(input.clone());
            let t = g.constant(target.clone());
            let y = net.forward(&mut g, &store, x).expect("shapes fixed");
            let l = l2_loss(&mut g, y, t).expect("shapes fixed");
            g.value(l).item().expect("scalar")
        },
        opts.step,
        opts.samples_per_tensor,
        opts.seed,
    );
    Ok(report)
}
