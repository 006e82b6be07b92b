//! The tape: build a small graph, run backward, read the gradients.

use canet::tensor::{Graph, Shape, Tensor};

fn main() -> canet::Result<()> {
    let mut g = Graph::<f64>::new();
    let x = g.variable(Tensor::from_vec(Shape::new(1, 1, 1, 3)?, vec![-2.0, 0.5, 3.0])?);
    let slope = g.variable(Tensor::scalar(0.25));
    let y = g.prelu(x, slope)?;
    let s = g.sigmoid(y);
    let prod = g.mul(y, s)?;
    let loss = g.sum(prod);
    println!("loss = sum(prelu(x) * sigmoid(prelu(x))) = {:.6}", g.value(loss).item()?);

    let grads = g.backward(loss)?;
    println!("d loss / d x     = {:?}", grads.get(x).unwrap().data());
    println!("d loss / d slope = {:?}", grads.get(slope).unwrap().data());
    println!("tape length      = {}", g.len());
    Ok(())
}
