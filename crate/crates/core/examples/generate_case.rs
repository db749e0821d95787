//! Generates a benchmark dataset with the forward solver and prints its moments.
//!
//! `cargo run --release --example generate_case -- k`

use pbe_discovery::solver::{case_spec, generate_case_with, moments, GenerationMode};

fn main() -> pbe_discovery::Result<()> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "k".into());
    let spec = case_spec(&id)?;
    println!("{} ({}): {}", spec.id, spec.name, spec.reference_model()?.render());
    let (field, _) = generate_case_with(&id, GenerationMode::Solver)?;
    println!("grid {} x {}", field.nx(), field.nt());
    let m = moments(&field);
    let step = (m.times.len() / 5).max(1);
    for k in (0..m.times.len()).step_by(step) {
        println!("t = {:6.2}  N = {:.6}  M = {:.6}", m.times[k], m.zeroth[k], m.first[k]);
    }
    Ok(())
}
