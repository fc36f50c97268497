//! Flat CSV files: LF line endings, values in `{:.16e}` (17 significant
//! digits, enough to round-trip every `f64`).

use std::fs::File;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, Terminator, Writer, WriterBuilder};

use crate::discretize::{TimeGrid, TimeSeries};
use crate::{Error, Result};

use super::dataset::Dataset;

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_writer(path: &Path) -> Result<Writer<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_path(path)?)
}

/// Writes `series` with header `t,{letter}0,…`.
pub fn write_series(path: &Path, series: &TimeSeries, letter: char) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..series.dim()).map(|k| format!("{letter}{k}")));
    w.write_record(&header)?;
    for (i, &t) in series.grid().times().iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(series.state(i).iter().map(|&v| fmt_f64(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_series`].
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let mut r = ReaderBuilder::new().from_path(path)?;
    let dim = r.headers()?.len().saturating_sub(1);
    if dim == 0 {
        return Err(Error::Config(format!("{}: no state columns", path.display())));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record?;
        let mut fields = record.iter().map(|s| {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad number `{s}`: {e}", path.display())))
        });
        times.push(fields.next().transpose()?.unwrap_or(f64::NAN));
        for v in fields {
            values.push(v?);
        }
    }
    TimeSeries::from_column_slice(TimeGrid::new(times)?, dim, &values)
}

/// Observed and clean file paths for `stem` under `dir`.
pub fn dataset_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}_observed.csv")), dir.join(format!("{stem}_clean.csv")))
}

/// Writes `Y` (`t,y0,…`) and the sibling clean file (`t,x0,…`).
pub fn write_dataset(dir: &Path, stem: &str, dataset: &Dataset) -> Result<(PathBuf, PathBuf)> {
    let (observed, clean) = dataset_paths(dir, stem);
    write_series(&observed, &dataset.observed, 'y')?;
    write_series(&clean, &dataset.clean, 'x')?;
    Ok((observed, clean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate_dataset, NoiseKind, NoiseSpec};

    #[test]
    fn dataset_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let noise = NoiseSpec { kind: NoiseKind::Gaussian, variance: 0.7, seed: 3 };
        let ds = generate_dataset("rossler", None, None, &noise, 1).unwrap();
        let (obs, clean) = write_dataset(dir.path(), "r1", &ds).unwrap();
        let y = read_series(&obs).unwrap();
        let x = read_series(&clean).unwrap();
        let bits = |s: &TimeSeries| s.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&y), bits(&ds.observed));
        assert_eq!(bits(&x), bits(&ds.clean));
        assert_eq!(y.grid().times(), ds.grid.times());

        let text = std::fs::read_to_string(&obs).unwrap();
        assert!(text.starts_with("t,y0,y1,y2\n"));
        assert!(!text.contains('\r'));
        assert!(std::fs::read_to_string(&clean).unwrap().starts_with("t,x0,x1,x2\n"));
    }

    #[test]
    fn extreme_values_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.1, 0.30000000000000004]).unwrap();
        let vals = [f64::MIN_POSITIVE, -1e-300, 1.0 / 3.0, f64::MAX, -0.0, 5e-324];
        let s = TimeSeries::from_column_slice(grid, 2, &vals).unwrap();
        let path = dir.path().join("s.csv");
        write_series(&path, &s, 'y').unwrap();
        let back = read_series(&path).unwrap();
        let bits = |s: &TimeSeries| s.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&s));
        assert_eq!(back.grid().times(), s.grid().times());
    }
}
