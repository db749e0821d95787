//! Long-format CSV for external plotting tools.

use std::path::Path;

use serde::Serialize;

use super::benchmark::BenchmarkTable;
use super::discover::DiscoveryReport;
use super::study::StudyResult;
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::solver::resimulate;

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv: {e}")))
}

#[derive(Debug, Serialize)]
struct StudyRecord {
    case: String,
    noise_percent: f64,
    data_percent: f64,
    samples: usize,
    successes: usize,
    success_rate: f64,
    mean_error_percent: Option<f64>,
    std_error_percent: Option<f64>,
}

/// One row per study cell.
pub fn study_csv(study: &StudyResult) -> Result<String> {
    let rows: Vec<StudyRecord> = study
        .cells
        .iter()
        .map(|c| StudyRecord {
            case: study.config.case.clone(),
            noise_percent: 100.0 * c.noise_level,
            data_percent: 100.0 * c.fraction,
            samples: c.samples,
            successes: c.successes,
            success_rate: c.success_rate,
            mean_error_percent: c.mean_error_percent,
            std_error_percent: c.std_error_percent,
        })
        .collect();
    to_csv(&rows)
}

#[derive(Debug, Serialize)]
struct BenchmarkRecord {
    case: String,
    system: String,
    reference: String,
    identified: String,
    matched: bool,
    average_error_percent: Option<String>,
    published_error_percent: Option<f64>,
    as_expected: bool,
}

/// One row per case, mirroring the results table. Timings are left out so
/// the file is stable across runs.
pub fn benchmark_csv(table: &BenchmarkTable) -> Result<String> {
    let rows: Vec<BenchmarkRecord> = table
        .rows
        .iter()
        .map(|r| BenchmarkRecord {
            case: r.case.clone(),
            system: r.system.clone(),
            reference: r.reference.clone(),
            identified: r.identified.clone(),
            matched: r.matched,
            average_error_percent: r.average_error_percent.map(|e| format!("{e:.4}")),
            published_error_percent: r.published_error_percent,
            as_expected: r.as_expected,
        })
        .collect();
    to_csv(&rows)
}

#[derive(Debug, Serialize)]
struct SnapshotRecord {
    series: &'static str,
    t: f64,
    x: f64,
    n: f64,
}

/// Indices of `count` time slices spread evenly from first to last.
pub fn snapshot_indices(nt: usize, count: usize) -> Vec<usize> {
    match (nt, count) {
        (0, _) | (_, 0) => Vec::new(),
        (_, 1) => vec![0],
        _ => {
            let mut v: Vec<usize> = (0..count).map(|k| k * (nt - 1) / (count - 1)).collect();
            v.dedup();
            v
        }
    }
}

/// Density snapshots of the data and, when the model can be simulated, of
/// the identified model started from the first data slice.
pub fn snapshot_csv(report: &DiscoveryReport, field: &DensityField, count: usize) -> Result<String> {
    let model = resimulate(&report.model.model, field).ok();
    let mut rows = Vec::new();
    for m in snapshot_indices(field.nt(), count) {
        let t = field.tgrid().points()[m];
        let series: [(&'static str, Option<&DensityField>); 2] = [("data", Some(field)), ("model", model.as_ref())];
        for (name, f) in series {
            let Some(f) = f else { continue };
            for (i, &x) in f.xgrid().points().iter().enumerate() {
                rows.push(SnapshotRecord {
                    series: name,
                    t,
                    x,
                    n: f.value(i, m),
                });
            }
        }
    }
    to_csv(&rows)
}

/// Writes `name` into `dir`, creating the directory.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::study::{StudyCell, StudyConfig};
    use crate::selector::SelectWeights;

    #[test]
    fn snapshot_indices_cover_ends() {
        assert_eq!(snapshot_indices(51, 5), vec![0, 12, 25, 37, 50]);
        assert_eq!(snapshot_indices(3, 5), vec![0, 1, 2]);
        assert!(snapshot_indices(0, 5).is_empty());
    }

    #[test]
    fn five_by_five_study_gives_25_rows() {
        let config = StudyConfig::new("a");
        let cells = config
            .levels
            .iter()
            .flat_map(|&l| {
                config.fractions.iter().map(move |&f| StudyCell {
                    noise_level: l,
                    fraction: f,
                    samples: 100,
                    successes: 0,
                    success_rate: 0.0,
                    mean_error_percent: None,
                    std_error_percent: None,
                    errors: 0,
                    seeds: Vec::new(),
                })
            })
            .collect();
        let study = StudyResult {
            version: "0".into(),
            config,
            weights: SelectWeights::default(),
            cells,
        };
        let text = study_csv(&study).unwrap();
        assert_eq!(text.lines().count(), 26);
        assert!(text.starts_with("case,noise_percent,data_percent"));
    }
}
