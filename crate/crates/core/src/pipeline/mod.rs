//! Config-driven orchestration: discovery runs, the benchmark harness, the
//! noise and subsampling study, and plot-data emission.

pub mod benchmark;
pub mod config;
pub mod discover;
pub mod plot;
pub mod study;

pub use benchmark::{run_benchmark, BenchmarkOptions, BenchmarkRow, BenchmarkTable};
pub use config::{InputSource, LambdaSpec, NoiseConfig, Preprocessing, RunConfig, SmoothingConfig, SubsampleConfig, SweepConfig};
pub use discover::{
    build_pool, compare_with_case, discover_field, identify, load_input, preprocess, run_discovery, run_discovery_timed,
    select_model, DiscoveryReport, DiscoveryStatus, Identification, PreparedData, Timing, INPUT_ERROR_EXIT,
};
pub use study::{derive_seed, run_noise_study, StudyCell, StudyConfig, StudyResult};
