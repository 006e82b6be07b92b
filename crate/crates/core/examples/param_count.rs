//! Exact parameter counts of the presets, the component ablations and
//! different depths.

use canet::canet::{Ablation, Canet, ModelConfig};

fn main() -> canet::Result<()> {
    for (name, cfg) in [("tiny", ModelConfig::tiny()), ("default", ModelConfig::default())] {
        println!("{name:<20} {:>9}", Canet::new(&cfg)?.param_count());
    }
    println!();
    for row in Ablation::ALL {
        let cfg = ModelConfig::default().with_ablation(row);
        println!("{:<20} {:>9}", row.label(), Canet::new(&cfg)?.param_count());
    }
    println!();
    for blocks in 1..=5 {
        let cfg = ModelConfig { blocks, ..ModelConfig::default() };
        println!("{:<20} {:>9}", format!("{blocks} block(s)"), Canet::new(&cfg)?.param_count());
    }
    let net = Canet::new(&ModelConfig::tiny())?;
    println!("\ntiny parameter tensors:");
    for spec in net.layout().specs() {
        println!("  {:<28} {:?}", spec.name, spec.shape.dims());
    }
    Ok(())
}
