//! Density snapshots of the data and the re-simulated identified model.

use pbe_discovery::pipeline::plot::snapshot_csv;
use pbe_discovery::pipeline::{load_input, run_discovery, RunConfig};

fn main() -> pbe_discovery::Result<()> {
    let config = RunConfig::for_case("g");
    let report = run_discovery(&config)?;
    let (field, _) = load_input(&config)?;
    let csv = snapshot_csv(&report, &field, 3)?;
    for line in csv.lines().step_by(50) {
        println!("{line}");
    }
    Ok(())
}
