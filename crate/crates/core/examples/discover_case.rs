//! End-to-end discovery on a benchmark case with its own weights.
//!
//! `cargo run --release --example discover_case -- d`

use pbe_discovery::pipeline::{run_discovery, RunConfig};

fn main() -> pbe_discovery::Result<()> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "d".into());
    let report = run_discovery(&RunConfig::for_case(&id))?;
    print!("{}", report.summary());
    Ok(())
}
