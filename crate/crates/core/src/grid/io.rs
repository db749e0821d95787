//! Density CSV layout: the first cell is empty, the rest of the first row holds
//! the time points, and every following row is `x_i, n(x_i, t_1), ..., n(x_i, t_k)`.
//! Values are written with 17 significant digits so a save/load cycle is exact.
//! An optional JSON sidecar next to the CSV carries provenance and metadata.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DensityField, InternalGrid, Provenance, TemporalGrid};
use crate::error::{Error, Result};

/// Provenance and free-form generation metadata stored beside a density CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub provenance: Provenance,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_cell(text: &str, line: usize, column: usize) -> Result<f64> {
    let trimmed = text.trim();
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumeric {
            line,
            column,
            text: text.to_string(),
        })
}

/// Reads a density CSV. A sidecar, when present, supplies the provenance;
/// otherwise the field is tagged [`Provenance::Imported`].
pub fn load_density(path: impl AsRef<Path>) -> Result<DensityField> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::MalformedHeader(e.to_string()))?,
        None => return Err(Error::MalformedHeader("file is empty".into())),
    };
    if header.len() < 2 {
        return Err(Error::MalformedHeader(
            "header needs an empty corner cell followed by time points".into(),
        ));
    }
    if !header[0].trim().is_empty() {
        return Err(Error::MalformedHeader(format!(
            "corner cell must be empty, found {:?}",
            &header[0]
        )));
    }
    let times = header
        .iter()
        .enumerate()
        .skip(1)
        .map(|(c, s)| parse_cell(s, 1, c + 1))
        .collect::<Result<Vec<_>>>()?;
    let nt = times.len();

    let mut xs = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in records.enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::NonNumeric {
            line,
            column: 0,
            text: e.to_string(),
        })?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != nt + 1 {
            return Err(Error::DimensionMismatch {
                line,
                expected: nt + 1,
                found: record.len(),
            });
        }
        xs.push(parse_cell(&record[0], line, 1)?);
        rows.push(
            record
                .iter()
                .enumerate()
                .skip(1)
                .map(|(c, s)| parse_cell(s, line, c + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(Error::MalformedHeader("no density rows after the header".into()));
    }

    let xgrid = InternalGrid::new(xs)?;
    let tgrid = TemporalGrid::new(times)?;
    let nx = xgrid.len();
    let mut values = vec![0.0; nx * nt];
    for (i, row) in rows.iter().enumerate() {
        for (m, &v) in row.iter().enumerate() {
            values[m * nx + i] = v;
        }
    }

    let provenance = match load_sidecar(path)? {
        Some(sc) => sc.provenance,
        None => Provenance::Imported,
    };
    DensityField::new(xgrid, tgrid, values, provenance)
}

/// Reads the sidecar next to `csv_path`, if one exists.
pub fn load_sidecar(csv_path: impl AsRef<Path>) -> Result<Option<Sidecar>> {
    let sc = sidecar_path(csv_path.as_ref());
    if !sc.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&sc).map_err(|e| Error::io(&sc, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

pub fn save_density(field: &DensityField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(file);
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));

    let mut header = Vec::with_capacity(field.nt() + 1);
    header.push(String::new());
    header.extend(field.tgrid().points().iter().map(|&t| fmt(t)));
    w.write_record(&header).map_err(to_io)?;

    let mut row = Vec::with_capacity(field.nt() + 1);
    for (i, &x) in field.xgrid().points().iter().enumerate() {
        row.clear();
        row.push(fmt(x));
        row.extend((0..field.nt()).map(|m| fmt(field.value(i, m))));
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the CSV plus a `.json` sidecar holding provenance and `metadata`.
pub fn save_density_with_sidecar(
    field: &DensityField,
    path: impl AsRef<Path>,
    metadata: serde_json::Value,
) -> Result<()> {
    let path = path.as_ref();
    save_density(field, path)?;
    let sc = Sidecar {
        provenance: field.provenance().clone(),
        metadata,
    };
    let sc_path = sidecar_path(path);
    std::fs::write(&sc_path, serde_json::to_string_pretty(&sc)?).map_err(|e| Error::io(&sc_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_zero_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "z.csv", ",0,0.1\n0.1,0,0\n0.2,0,0\n0.3,0,0\n");
        let f = load_density(&p).unwrap();
        assert_eq!(f.nx(), 3);
        assert_eq!(f.nt(), 2);
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(f.provenance(), &Provenance::Imported);
    }

    #[test]
    fn rejects_non_uniform_x() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "n.csv", ",0,0.1\n0.1,0,0\n0.2,0,0\n0.4,0,0\n");
        assert!(matches!(load_density(&p), Err(Error::NonUniformGrid { axis: "x", .. })));
    }

    #[test]
    fn distinct_failures() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = write(&dir, "h.csv", "x,0,0.1\n0.1,0,0\n");
        assert!(matches!(load_density(&bad_header), Err(Error::MalformedHeader(_))));
        let bad_cell = write(&dir, "c.csv", ",0,0.1\n0.1,0,abc\n0.2,0,0\n");
        assert!(matches!(
            load_density(&bad_cell),
            Err(Error::NonNumeric { line: 2, column: 3, .. })
        ));
        let short = write(&dir, "s.csv", ",0,0.1\n0.1,0\n0.2,0,0\n");
        assert!(matches!(
            load_density(&short),
            Err(Error::DimensionMismatch { line: 2, expected: 3, found: 2 })
        ));
        assert!(matches!(load_density(dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn save_then_load_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let x = InternalGrid::from_range(0.01, 2.01, 0.1).unwrap();
        let t = TemporalGrid::from_range(0.0, 1.0, 0.1).unwrap();
        let f = DensityField::from_fn(x, t, |x, t| (-x * (1.0 + t)).exp() / 3.0).unwrap();
        let p = dir.path().join("f.csv");
        save_density_with_sidecar(&f, &p, serde_json::json!({"case": "test"})).unwrap();
        let back = load_density(&p).unwrap();
        assert_eq!(back, f);
        assert_eq!(load_sidecar(&p).unwrap().unwrap().metadata["case"], "test");
    }
}
