//! Backprop against central differences: a hand-built graph, then a
//! whole CANet-tiny.

use canet::canet::{check_model_gradients, ModelConfig, ModelGradCheck};
use canet::tensor::{check_graph, Shape, Tensor};

fn main() -> canet::Result<()> {
    let s = Shape::new(1, 2, 5, 5)?;
    let x = Tensor::from_fn(s, |_, c, y, x| ((c * 13 + y * 5 + x * 3) % 7) as f64 / 7.0 - 0.4);
    let w = Tensor::from_fn(Shape::new(2, 2, 3, 3)?, |o, c, y, x| ((o + 2 * c + y * x) % 5) as f64 * 0.1 - 0.2);
    let b = Tensor::from_vec(Shape::new(1, 2, 1, 1)?, vec![0.1, -0.1])?;
    let slope = Tensor::full(Shape::new(1, 2, 1, 1)?, 0.25);
    let report = check_graph(
        vec![x, w, b, slope],
        |g, v| {
            let y = g.conv2d(v[0], v[1], v[2], 1)?;
            let y = g.prelu(y, v[3])?;
            let gate = g.global_avg_pool(y);
            let gate = g.sigmoid(gate);
            let y = g.broadcast_mul(y, gate)?;
            let y = g.mul(y, y)?;
            Ok(g.sum(y))
        },
        2e-5,
        16,
        0,
    )?;
    println!("conv -> prelu -> channel gate: {report:?}");

    let report = check_model_gradients(&ModelConfig::tiny(), &ModelGradCheck::default())?;
    println!(
        "CANet-tiny: {} entries ({} below roundoff), max relative error {:.3e}",
        report.checked, report.unresolved, report.max_rel_error
    );
    Ok(())
}
