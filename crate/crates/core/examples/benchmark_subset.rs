//! Benchmark table for a few cases, with the weight-band and ablation scans.

use pbe_discovery::pipeline::benchmark::{run_benchmark, BenchmarkOptions};

fn main() {
    let mut options = BenchmarkOptions::for_cases(&["a", "c", "f"]);
    options.band = true;
    options.ablation = true;
    let table = run_benchmark(&options);
    print!("{}", table.to_markdown());
    for r in &table.rows {
        if let Some(a) = &r.ablation {
            println!(
                "{}: identified without Φ: {}, with Φ: {}",
                r.case, a.identified_without_penalty, a.identified_with_penalty
            );
        }
    }
}
