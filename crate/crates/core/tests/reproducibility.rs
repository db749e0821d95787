//! Seeded runs are byte-for-byte repeatable, within a process and across
//! processes, and the benchmark table for the growth cases is pinned.

use std::path::Path;
use std::process::Command;

use pbe_discovery::pipeline::plot::benchmark_csv;
use pbe_discovery::pipeline::{run_benchmark, run_discovery, BenchmarkOptions, Preprocessing, RunConfig};

fn noisy_config() -> RunConfig {
    let mut config = RunConfig::for_case("f");
    config.preprocess = Preprocessing::noisy(0.005, 17).with_subsample(0.6, 23);
    config
}

#[test]
fn seeded_discovery_reports_are_identical() {
    let a = run_discovery(&noisy_config()).unwrap().to_json().unwrap();
    let b = run_discovery(&noisy_config()).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let mut other = noisy_config();
    other.preprocess = Preprocessing::noisy(0.005, 18).with_subsample(0.6, 23);
    assert_ne!(a, run_discovery(&other).unwrap().to_json().unwrap());
}

fn study_in_new_process(dir: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_pbe"))
        .args(["study", "f", "--levels", "0,0.005", "--fractions", "0.5,1", "--samples", "3", "--seed", "11"])
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read_to_string(dir.join("study.json")).unwrap()
}

#[test]
fn study_matrix_survives_process_restart() {
    let tmp = tempfile::tempdir().unwrap();
    let first = study_in_new_process(&tmp.path().join("one"));
    let second = study_in_new_process(&tmp.path().join("two"));
    assert_eq!(first, second);
}

#[test]
fn growth_benchmark_matches_golden_table() {
    let table = run_benchmark(&BenchmarkOptions::for_cases(&["f", "g"]));
    let golden = include_str!("golden/benchmark_fg.csv");
    assert_eq!(benchmark_csv(&table).unwrap(), golden);
}
