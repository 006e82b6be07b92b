//! Parameters, layers, the L2 loss and the Adam optimizer.

mod adam;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Gradients, Graph, Real, Shape, Tensor, Var};

pub use adam::{adam_step, AdamConfig};

/// Index of a parameter inside a [`Layout`] and its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform with a bound of `sqrt(gain / fan_in)`, the gain coming from
    /// the [`WeightInit`] scheme.
    FanInUniform { fan_in: usize },
    Constant(f64),
}

/// Scale of fan-in uniform weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightInit {
    /// Bound `sqrt(6/fan_in)`.
    HeUniform,
    /// Bound `sqrt(1/fan_in)`, the common framework default for convolutions.
    #[default]
    FanInUniform,
}

impl WeightInit {
    pub fn bound(self, fan_in: usize) -> f64 {
        let gain = match self {
            WeightInit::HeUniform => 6.0,
            WeightInit::FanInUniform => 1.0,
        };
        (gain / fan_in as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Shape,
    pub init: Init,
}

/// Ordered parameter declarations of a model, independent of element type.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    specs: Vec<ParamSpec>,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Shape, init: Init) -> ParamId {
        let name = name.into();
        debug_assert!(
            self.specs.iter().all(|s| s.name != name),
            "duplicate parameter {name}"
        );
        self.specs.push(ParamSpec { name, shape, init });
        ParamId(self.specs.len() - 1)
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Number of scalar learnable values.
    pub fn param_count(&self) -> usize {
        self.specs.iter().map(|s| s.shape.numel()).sum()
    }
}

/// A named tensor with its gradient and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
    pub step: u64,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let s = value.shape();
        Parameter {
            name: name.into(),
            value,
            grad: Tensor::zeros(s),
            m: Tensor::zeros(s),
            v: Tensor::zeros(s),
            step: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    grads_ready: bool,
}

impl<T: Real> ParamStore<T> {
    /// Draws every parameter from its declared initializer. One seeded
    /// stream is consumed in layout order, so equal seeds give bit-identical
    /// stores. Values are sampled in `f64` and rounded, so `f32` and `f64`
    /// stores agree up to that rounding.
    pub fn init(layout: &Layout, seed: u64, scheme: WeightInit) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layout
            .specs
            .iter()
            .map(|spec| {
                let value = match spec.init {
                    Init::Constant(c) => Tensor::full(spec.shape, T::lit(c)),
                    Init::FanInUniform { fan_in } => {
                        let bound = scheme.bound(fan_in);
                        let data = (0..spec.shape.numel())
                            .map(|_| T::lit(rng.random_range(-bound..=bound)))
                            .collect();
                        Tensor::from_vec(spec.shape, data).expect("spec shape")
                    }
                };
                Parameter::new(spec.name.clone(), value)
            })
            .collect();
        ParamStore {
            params,
            grads_ready: false,
        }
    }

    pub fn from_parameters(params: Vec<Parameter<T>>) -> Self {
        ParamStore {
            params,
            grads_ready: false,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Puts a parameter on the tape. Repeated binds in one graph share a leaf.
    pub fn bind(&self, graph: &mut Graph<T>, id: ParamId) -> Var {
        graph.bind(id.0, &self.params[id.0].value)
    }

    /// Adds the gradients of every bound parameter into `Parameter::grad`.
    /// Parameters the graph never touched keep their current gradient.
    pub fn accumulate(&mut self, graph: &Graph<T>, grads: &Gradients<T>) {
        for &(key, var) in graph.bindings() {
            if let Some(g) = grads.get(var) {
                self.params[key].grad.add_assign(g);
            }
        }
        self.grads_ready = true;
    }

    pub fn grads_ready(&self) -> bool {
        self.grads_ready
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
        self.grads_ready = false;
    }

    /// Euclidean norm of each parameter gradient, by name.
    pub fn grad_norms(&self) -> Vec<(String, f64)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.grad.sq_norm().as_f64().sqrt()))
            .collect()
    }

    /// Copies values converted to another element type; moments are reset.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore::from_parameters(
            self.params
                .iter()
                .map(|p| Parameter::new(p.name.clone(), p.value.cast()))
                .collect(),
        )
    }

    /// Checks that names and shapes match `layout` exactly, in order.
    pub fn check_layout(&self, layout: &Layout) -> Result<()> {
        if self.params.len() != layout.len() {
            return Err(Error::contract(format!(
                "store has {} parameters, layout expects {}",
                self.params.len(),
                layout.len()
            )));
        }
        for (p, s) in self.params.iter().zip(layout.specs()) {
            if p.name != s.name || p.value.shape() != s.shape {
                return Err(Error::contract(format!(
                    "parameter {} {} does not match layout entry {} {}",
                    p.name,
                    p.value.shape(),
                    s.name,
                    s.shape
                )));
            }
        }
        Ok(())
    }
}

/// `(1/N) * sum_i ||output_i - target_i||^2` over a batch of `N` samples.
pub fn l2_loss<T: Real>(graph: &mut Graph<T>, output: Var, target: Var) -> Result<Var> {
    graph.l2_loss(output, target)
}

/// 2-D convolution with bias and "same" zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl Conv2d {
    pub fn new(
        layout: &mut Layout,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    ) -> Self {
        assert!(kernel % 2 == 1, "kernel size must be odd");
        let fan_in = in_channels * kernel * kernel;
        let weight = layout.add(
            format!("{name}.weight"),
            Shape {
                n: out_channels,
                c: in_channels,
                h: kernel,
                w: kernel,
            },
            Init::FanInUniform { fan_in },
        );
        let bias = layout.add(
            format!("{name}.bias"),
            Shape {
                n: 1,
                c: out_channels,
                h: 1,
                w: 1,
            },
            Init::Constant(0.0),
        );
        Conv2d {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = p.bind(g, self.weight);
        let b = p.bind(g, self.bias);
        g.conv2d(x, w, b, self.kernel / 2)
    }

    pub fn param_ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

/// PReLU with one learnable slope per channel, initialised to 0.25.
#[derive(Clone, Debug, PartialEq)]
pub struct Prelu {
    pub slope: ParamId,
    pub channels: usize,
}

impl Prelu {
    pub const INIT_SLOPE: f64 = 0.25;

    pub fn new(layout: &mut Layout, name: &str, channels: usize) -> Self {
        let slope = layout.add(
            format!("{name}.slope"),
            Shape {
                n: 1,
                c: channels,
                h: 1,
                w: 1,
            },
            Init::Constant(Self::INIT_SLOPE),
        );
        Prelu { slope, channels }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let a = p.bind(g, self.slope);
        g.prelu(x, a)
    }
}
