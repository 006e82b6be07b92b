use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of a central-difference gradient check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over the resolved entries.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries whose gradient lies below the roundoff floor of the
    /// difference quotient, so neither side can be trusted to compare.
    pub unresolved: usize,
    /// `(tensor index, element index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        self.unresolved += other.unresolved;
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
            if other.worst.is_some() {
                self.worst = other.worst;
            }
        }
    }
}

/// `|a - b| / max(1e-8, |a| + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Multiple of `ε·|f| / h` below which a central difference carries no signal.
pub const ROUNDOFF_FACTOR: f64 = 64.0;

/// Compares `analytic` against `(f(θ+h) - f(θ-h)) / 2h` on up to
/// `samples_per_tensor` entries of each tensor in `values` (all entries when
/// the tensor is smaller). Entries are perturbed in place and restored.
///
/// When both gradients are smaller than `ROUNDOFF_FACTOR·ε·|f|/h` the entry
/// is counted as unresolved and left out of `max_rel_error`.
pub fn finite_diff_check<F>(
    values: &mut [Tensor<f64>],
    analytic: &[Tensor<f64>],
    mut f: F,
    step: f64,
    samples_per_tensor: usize,
    seed: u64,
) -> GradCheckReport
where
    F: FnMut(&[Tensor<f64>]) -> f64,
{
    assert_eq!(values.len(), analytic.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    for t in 0..values.len() {
        let len = values[t].numel();
        let picks: Vec<usize> = if len <= samples_per_tensor {
            (0..len).collect()
        } else {
            (0..samples_per_tensor).map(|_| rng.random_range(0..len)).collect()
        };
        for i in picks {
            let orig = values[t].data()[i];
            values[t].data_mut()[i] = orig + step;
            let plus = f(values);
            values[t].data_mut()[i] = orig - step;
            let minus = f(values);
            values[t].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[t].data()[i];
            report.checked += 1;
            let floor = ROUNDOFF_FACTOR * f64::EPSILON * plus.abs().max(minus.abs()) / step;
            if a.abs() < floor && numeric.abs() < floor {
                report.unresolved += 1;
                continue;
            }
            let err = relative_error(a, numeric);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((t, i, a, numeric));
            }
        }
    }
    report
}

/// Gradient check of a scalar graph built by `build` from leaf variables
/// holding `inputs`. Analytic gradients come from one backward pass.
pub fn check_graph<F>(
    inputs: Vec<Tensor<f64>>,
    build: F,
    step: f64,
    samples_per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let out = build(&mut g, &vars)?;
    let grads = g.backward(out)?;
    let analytic = vars
        .iter()
        .zip(&inputs)
        .map(|(&v, t)| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.shape()))
        })
        .collect::<Vec<_>>();
    let mut failure = None;
    let mut values = inputs;
    let report = finite_diff_check(
        &mut values,
        &analytic,
        |vals| {
            let mut g = Graph::new();
            let vars: Vec<Var> = vals.iter().map(|t| g.variable(t.clone())).collect();
            match build(&mut g, &vars).and_then(|out| g.value(out).item()) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        step,
        samples_per_tensor,
        seed,
    );
    match failure {
        Some(e) => Err(e),
        None if report.max_rel_error.is_nan() => {
            Err(Error::contract("gradient check produced NaN"))
        }
        None => Ok(report),
    }
}
