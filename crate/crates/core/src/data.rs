//! Instances, tabular datasets, normalization and the CSV loader.

use std::collections::HashSet;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column name that carries categorical group labels in dataset files.
pub const GROUP_COLUMN: &str = "group";

/// The point being explained: `d >= 1` finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("instance has no features".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("instance value {i} is not finite")));
        }
        Ok(Instance(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Instance {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Instance {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Instance::new(v)
    }
}

impl From<Instance> for Vec<f64> {
    fn from(x: Instance) -> Self {
        x.0
    }
}

/// An `n × d` table of finite reals with optional target and group columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
    feature_names: Vec<String>,
    pub target: Option<Vec<f64>>,
    pub target_name: Option<String>,
    pub group_labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {r} has {} values, expected {d}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, feature_names)
    }

    /// Builds a dataset from row-major values.
    pub fn from_flat(values: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::InvalidInput("dataset has no features".into()));
        }
        if !values.len().is_multiple_of(d) {
            return Err(Error::InvalidInput("value count is not a multiple of d".into()));
        }
        let n = values.len() / d;
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset needs at least 2 rows, got {n}"
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "row {}, feature {} is not finite",
                k / d,
                k % d
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate feature name `{name}`")));
            }
        }
        Ok(Dataset {
            n,
            d,
            values,
            feature_names,
            target: None,
            target_name: None,
            group_labels: None,
        })
    }

    pub fn with_target(mut self, name: impl Into<String>, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: target.len(),
            });
        }
        self.target = Some(target);
        self.target_name = Some(name.into());
        Ok(self)
    }

    pub fn with_groups(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.group_labels = Some(labels);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Per-feature `(min, max)` over all rows.
    pub fn column_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.d];
        for row in self.rows() {
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        ranges
    }

    /// Index boundary of an ordered train/test split: rows `..k` train, `k..` test.
    pub fn split_index(&self, train_fraction: f64) -> usize {
        let k = (self.n as f64 * train_fraction).floor() as usize;
        k.clamp(1, self.n - 1)
    }

    /// Rows `range` as a new dataset (target and groups carried along).
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        let values = self.values[range.start * self.d..range.end * self.d].to_vec();
        let mut out = Dataset::from_flat(values, self.feature_names.clone())?;
        out.target = self.target.as_ref().map(|t| t[range.clone()].to_vec());
        out.target_name = self.target_name.clone();
        out.group_labels = self.group_labels.as_ref().map(|g| g[range].to_vec());
        Ok(out)
    }

    /// Applies `norm` to every row.
    pub fn normalized(&self, norm: &Normalization) -> Result<Dataset> {
        if norm.mean.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: norm.mean.len(),
            });
        }
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(self.d) {
            norm.normalize_in_place(row);
        }
        Ok(out)
    }
}

/// Per-feature z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Fits mean and sample standard deviation on rows `..fit_rows`.
    ///
    /// A zero-spread column keeps a unit scale so it maps to zero.
    pub fn fit(data: &Dataset, fit_rows: usize) -> Result<Self> {
        if fit_rows < 2 || fit_rows > data.n_rows() {
            return Err(Error::InvalidInput(format!(
                "normalization needs 2..={} rows, got {fit_rows}",
                data.n_rows()
            )));
        }
        let d = data.n_features();
        let mut mean = vec![0.0; d];
        for row in data.rows().take(fit_rows) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= fit_rows as f64);
        let mut var = vec![0.0; d];
        for row in data.rows().take(fit_rows) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / (fit_rows - 1) as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalization { mean, std })
    }

    pub fn identity(d: usize) -> Self {
        Normalization {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = raw.to_vec();
        self.normalize_in_place(&mut out);
        out
    }

    fn normalize_in_place(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

/// Reads a CSV dataset with a header row.
///
/// Every cell except the target column and a column named `group` must parse
/// as a number. Error positions are 1-based data rows (the header is not
/// counted) and 1-based columns.
pub fn load_dataset(path: impl AsRef<Path>, target_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, target_column, path)
}

pub fn read_dataset<R: std::io::Read>(
    reader: R,
    target_column: Option<&str>,
    origin: &Path,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(origin, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::parse(origin, "missing header row"));
    }
    let target_idx = match target_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::parse(origin, format!("target column `{name}` not found")))?,
        ),
        None => None,
    };
    let group_idx = header.iter().position(|h| h == GROUP_COLUMN);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| Some(c) != target_idx && Some(c) != group_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::parse(origin, "no feature columns"));
    }

    let mut values = Vec::new();
    let mut target = Vec::new();
    let mut groups = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::parse(origin, e))?;
        if record.len() != header.len() {
            return Err(Error::Cell {
                path: origin.to_path_buf(),
                row,
                column: record.len().min(header.len()) + 1,
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        let cell = |c: usize| -> Result<f64> {
            let text = record[c].trim();
            text.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Cell {
                    path: origin.to_path_buf(),
                    row,
                    column: c + 1,
                    message: format!("non-numeric value `{text}`"),
                })
        };
        for &c in &feature_cols {
            values.push(cell(c)?);
        }
        if let Some(t) = target_idx {
            target.push(cell(t)?);
        }
        if let Some(g) = group_idx {
            groups.push(record[g].trim().to_string());
        }
    }
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let mut data = Dataset::from_flat(values, names).map_err(|e| Error::parse(origin, e))?;
    if let Some(t) = target_idx {
        data = data.with_target(header[t].clone(), target)?;
    }
    if group_idx.is_some() {
        data = data.with_groups(groups)?;
    }
    Ok(data)
}

/// Writes `data` as CSV: features, then target, then `group`.
pub fn write_dataset<W: std::io::Write>(data: &Dataset, writer: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidInput(format!("csv write: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = data.feature_names.clone();
    if data.target.is_some() {
        header.push(data.target_name.clone().unwrap_or_else(|| "target".into()));
    }
    if data.group_labels.is_some() {
        header.push(GROUP_COLUMN.into());
    }
    w.write_record(&header).map_err(to_err)?;
    for (i, row) in data.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(t) = &data.target {
            rec.push(format!("{:?}", t[i]));
        }
        if let Some(g) = &data.group_labels {
            rec.push(g[i].clone());
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv write: {e}")))?;
    Ok(())
}

/// Writes a file atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, target: Option<&str>) -> Result<Dataset> {
        read_dataset(text.as_bytes(), target, Path::new("d.csv"))
    }

    #[test]
    fn three_rows_two_features() {
        let d = read("a,b\n1,2\n3,4\n5,6\n", None).unwrap();
        assert_eq!((d.n_rows(), d.n_features()), (3, 2));
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert!(d.target.is_none());
    }

    #[test]
    fn target_column_extracted() {
        let d = read("x1,Y,x2\n1,10,2\n3,30,4\n", Some("Y")).unwrap();
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.feature_names(), &["x1".to_string(), "x2".to_string()]);
        assert_eq!(d.target.as_deref(), Some(&[10.0, 30.0][..]));
    }

    #[test]
    fn group_column_becomes_labels() {
        let d = read("x1,x2,group\n1,2,A\n3,4,C\n", None).unwrap();
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.group_labels.as_ref().unwrap(), &["A", "C"]);
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let csv = "a,b\n1,2\n1,2\n1,2\n1,2\n1,oops\n";
        match read(csv, None).unwrap_err() {
            Error::Cell { row, column, .. } => assert_eq!((row, column), (5, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header_or_target() {
        assert!(read("", None).is_err());
        assert!(matches!(read("a,b\n1,2\n3,4\n", Some("Y")), Err(Error::Parse { .. })));
    }

    #[test]
    fn needs_two_rows() {
        assert!(read("a\n1\n", None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(vec![vec![0.1, -2.5], vec![1e-17, 3.0]], vec!["p".into(), "q".into()])
            .unwrap()
            .with_target("Y", vec![1.0, 2.0])
            .unwrap()
            .with_groups(vec!["A".into(), "B".into()])
            .unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), Some("Y"), Path::new("x")).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn instance_rejects_nan_and_empty() {
        assert!(Instance::new(vec![]).is_err());
        assert!(Instance::new(vec![1.0, f64::NAN]).is_err());
        assert!(Instance::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn normalization_round_trip() {
        let d = Dataset::new(
            vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![8.0, 5.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let norm = Normalization::fit(&d, 3).unwrap();
        assert_eq!(norm.std[1], 1.0);
        let raw = [2.345678, -7.125];
        let back = norm.denormalize(&norm.normalize(&raw));
        for (a, b) in raw.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
