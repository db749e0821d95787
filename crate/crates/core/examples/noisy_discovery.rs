//! Discovery from noisy, subsampled data: white noise, Savitzky–Golay
//! smoothing along x, polynomial-fit time derivatives, half of the rows.

use pbe_discovery::pipeline::{run_discovery, Preprocessing, RunConfig};

fn main() -> pbe_discovery::Result<()> {
    let mut config = RunConfig::for_case("a");
    config.preprocess = Preprocessing::noisy(0.01, 42).with_subsample(0.5, 7);
    println!("{}", config.to_toml_string()?);
    let report = run_discovery(&config)?;
    print!("{}", report.summary());
    Ok(())
}
