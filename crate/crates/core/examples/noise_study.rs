//! A small success-rate study on constant aggregation.

use pbe_discovery::pipeline::plot::study_csv;
use pbe_discovery::pipeline::study::{run_noise_study, StudyConfig};

fn main() -> pbe_discovery::Result<()> {
    let mut config = StudyConfig::new("a");
    config.levels = vec![0.0, 0.01];
    config.fractions = vec![0.2, 1.0];
    config.samples = 5;
    let result = run_noise_study(&config)?;
    print!("{}", study_csv(&result)?);
    Ok(())
}
