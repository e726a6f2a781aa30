//! Shared numeric containers: dense matrices with observation masks, and
//! train/test datasets.
//!
//! Indices in code are 0-based. Missingness is carried by an explicit boolean
//! mask; zero-encoded missing values are only converted at I/O boundaries
//! via [`mask_of_zeros`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Mask = DMatrix<bool>;

/// A dense matrix paired with an observation mask (`true` = observed).
///
/// Hidden entries are stored as `0.0` and never read by distance or solver
/// code. Every row has at least one observed entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    data: Matrix,
    mask: Mask,
}

impl MaskedMatrix {
    pub fn new(mut data: Matrix, mask: Mask) -> Result<Self> {
        if data.shape() != mask.shape() {
            return Err(Error::validation(format!(
                "mask shape {:?} differs from data shape {:?}",
                mask.shape(),
                data.shape()
            )));
        }
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::validation("matrix must have at least one row and column"));
        }
        for i in 0..data.nrows() {
            let mut observed = 0;
            for j in 0..data.ncols() {
                if mask[(i, j)] {
                    observed += 1;
                    if !data[(i, j)].is_finite() {
                        return Err(Error::validation(format!("non-finite observed entry at ({i}, {j})")));
                    }
                } else {
                    data[(i, j)] = 0.0;
                }
            }
            if observed == 0 {
                return Err(Error::validation(format!("row {i} has no observed entries")));
            }
        }
        Ok(Self { data, mask })
    }

    /// Wraps a matrix with every entry observed.
    pub fn fully_observed(data: Matrix) -> Result<Self> {
        let mask = Mask::from_element(data.nrows(), data.ncols(), true);
        Self::new(data, mask)
    }

    /// Hides the entries where `mask` is false. Entries already hidden stay hidden.
    pub fn with_mask(&self, mask: &Mask) -> Result<Self> {
        if mask.shape() != self.mask.shape() {
            return Err(Error::validation("mask shape mismatch"));
        }
        let combined = self.mask.zip_map(mask, |a, b| a && b);
        Self::new(self.data.clone(), combined)
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Stored values; hidden entries read as zero.
    pub fn zero_filled(&self) -> &Matrix {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.mask[(i, j)].then(|| self.data[(i, j)])
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&b| !b).count()
    }

    /// The underlying matrix when nothing is missing.
    pub fn complete(&self) -> Result<&Matrix> {
        if self.is_complete() {
            Ok(&self.data)
        } else {
            Err(Error::validation(format!(
                "expected a fully observed matrix, {} entries missing",
                self.missing_count()
            )))
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.data.select_rows(rows), self.mask.select_rows(rows))
    }
}

/// Training and test data for one experiment.
///
/// `beta_true` has one column per latent cluster (a single column when the
/// coefficients are shared). The label vectors are present when the data was
/// generated with a known cluster structure.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x_train: MaskedMatrix,
    pub y_train: Vector,
    pub x_test: MaskedMatrix,
    pub y_test: Option<Vector>,
    pub beta_true: Option<Matrix>,
    pub train_labels: Option<Vec<usize>>,
    pub test_labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(x_train: MaskedMatrix, y_train: Vector, x_test: MaskedMatrix, y_test: Option<Vector>) -> Result<Self> {
        let ds = Self {
            x_train,
            y_train,
            x_test,
            y_test,
            beta_true: None,
            train_labels: None,
            test_labels: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_train.ncols() != self.x_test.ncols() {
            return Err(Error::validation(format!(
                "train has {} columns, test has {}",
                self.x_train.ncols(),
                self.x_test.ncols()
            )));
        }
        if self.y_train.len() != self.x_train.nrows() {
            return Err(Error::validation("y_train length differs from x_train rows"));
        }
        if let Some(y) = &self.y_test {
            if y.len() != self.x_test.nrows() {
                return Err(Error::validation("y_test length differs from x_test rows"));
            }
        }
        if let Some(beta) = &self.beta_true {
            if beta.nrows() != self.x_train.ncols() {
                return Err(Error::validation("beta_true rows differ from feature count"));
            }
        }
        if let Some(l) = &self.train_labels {
            if l.len() != self.x_train.nrows() {
                return Err(Error::validation("train_labels length differs from x_train rows"));
            }
        }
        if let Some(l) = &self.test_labels {
            if l.len() != self.x_test.nrows() {
                return Err(Error::validation("test_labels length differs from x_test rows"));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.x_train.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub has_header: bool,
    pub missing_token: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: false,
            missing_token: "NA".to_string(),
        }
    }
}

/// Reads a rectangular numeric CSV. Empty cells and cells equal to the
/// missing token become hidden entries.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<MaskedMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv(reader: impl std::io::Read, opts: &CsvOptions) -> Result<MaskedMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut observed = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        match ncols {
            None => ncols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Format(format!(
                    "record {} has {} fields, expected {c}",
                    line + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            if cell.is_empty() || cell == opts.missing_token {
                values.push(0.0);
                observed.push(false);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Format(format!("record {}, field {}: not a number: {cell:?}", line + 1, j + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::Format(format!(
                        "record {}, field {}: non-finite value",
                        line + 1,
                        j + 1
                    )));
                }
                values.push(v);
                observed.push(true);
            }
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or_else(|| Error::Format("empty file".into()))?;
    let data = Matrix::from_row_slice(nrows, ncols, &values);
    let mask = Mask::from_row_slice(nrows, ncols, &observed);
    MaskedMatrix::new(data, mask)
}

/// Writes values with the missing token at hidden entries. Finite values
/// round-trip exactly through [`load_csv`].
pub fn save_csv(x: &MaskedMatrix, path: impl AsRef<Path>, opts: &CsvOptions) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_masked_csv(x, &mut out, opts).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_masked_csv(x: &MaskedMatrix, out: &mut impl Write, opts: &CsvOptions) -> std::io::Result<()> {
    if opts.has_header {
        let header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
    }
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols())
            .map(|j| match x.get(i, j) {
                Some(v) => format!("{v}"),
                None => opts.missing_token.clone(),
            })
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Splits rows into disjoint train/test sets, using column `response_col` as
/// the response and the remaining columns as features.
///
/// The number of test rows is `round(m * test_fraction)` clamped to
/// `[1, m - 1]`. Rows keep their source order within each set.
pub fn split(data: &MaskedMatrix, response_col: usize, test_fraction: f64, seed: u64) -> Result<Dataset> {
    let (train_rows, test_rows) = split_indices(data.nrows(), test_fraction, seed)?;
    if response_col >= data.ncols() {
        return Err(Error::validation(format!(
            "response column {response_col} out of range for {} columns",
            data.ncols()
        )));
    }
    if data.ncols() < 2 {
        return Err(Error::validation(
            "need at least one feature column besides the response",
        ));
    }
    if (0..data.nrows()).any(|i| !data.is_observed(i, response_col)) {
        return Err(Error::validation("response column contains missing entries"));
    }
    let features: Vec<usize> = (0..data.ncols()).filter(|&j| j != response_col).collect();
    let x = MaskedMatrix::new(
        data.zero_filled().select_columns(&features),
        data.mask().select_columns(&features),
    )?;
    let y = data.zero_filled().column(response_col).into_owned();

    let x_train = x.select_rows(&train_rows)?;
    let x_test = x.select_rows(&test_rows)?;
    let y_train = y.select_rows(&train_rows);
    let y_test = y.select_rows(&test_rows);
    Dataset::new(x_train, y_train, x_test, Some(y_test))
}

/// Deterministic disjoint, exhaustive partition of `0..m` into (train, test).
pub fn split_indices(m: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::validation(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if m < 2 {
        return Err(Error::validation("need at least two rows to split"));
    }
    let n_test = ((m as f64 * test_fraction).round() as usize).clamp(1, m - 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut seeded(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Treats exact zeros as missing entries.
pub fn mask_of_zeros(x: &Matrix) -> Result<MaskedMatrix> {
    let mask = x.map(|v| v != 0.0);
    MaskedMatrix::new(x.clone(), mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<MaskedMatrix> {
        read_csv(s.as_bytes(), &CsvOptions::default())
    }

    #[test]
    fn parses_missing_token() {
        let x = parse("1,2\n3,NA").unwrap();
        assert_eq!(x.nrows(), 2);
        assert_eq!(x.get(1, 0), Some(3.0));
        assert_eq!(x.mask(), &Mask::from_row_slice(2, 2, &[true, true, true, false]));
    }

    #[test]
    fn single_cell() {
        let x = parse("5").unwrap();
        assert_eq!(x.get(0, 0), Some(5.0));
        assert!(x.is_complete());
    }

    #[test]
    fn empty_cells_are_missing() {
        let x = parse("NA,7\n,7\nNA,7").unwrap();
        for i in 0..3 {
            assert!(!x.is_observed(i, 0));
            assert!(x.is_observed(i, 1));
        }
    }

    #[test]
    fn header_row_is_skipped() {
        let opts = CsvOptions {
            has_header: true,
            missing_token: "?".into(),
        };
        let x = read_csv("a,b\n1,?\n".as_bytes(), &opts).unwrap();
        assert_eq!(x.nrows(), 1);
        assert!(!x.is_observed(0, 1));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(parse("1,2\n3"), Err(Error::Format(_))));
    }

    #[test]
    fn non_numeric_rejected() {
        assert!(matches!(parse("1,x"), Err(Error::Format(_))));
    }

    #[test]
    fn fully_missing_row_rejected() {
        assert!(matches!(parse("1,2\nNA,NA"), Err(Error::Validation(_))));
    }

    #[test]
    fn split_sizes() {
        let x = MaskedMatrix::fully_observed(Matrix::from_fn(10, 3, |i, j| (i * 3 + j) as f64)).unwrap();
        let ds = split(&x, 2, 0.2, 7).unwrap();
        assert_eq!(ds.x_train.nrows(), 8);
        assert_eq!(ds.x_test.nrows(), 2);
        assert_eq!(ds.n_features(), 2);
        // response column is the last one: value = 3i + 2
        for i in 0..8 {
            let row0 = ds.x_train.get(i, 0).unwrap();
            assert_eq!(ds.y_train[i], row0 + 2.0);
        }
    }

    #[test]
    fn split_half_is_partition() {
        let (train, test) = split_indices(4, 0.5, 11).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 2);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn split_is_deterministic() {
        assert_eq!(split_indices(50, 0.3, 3).unwrap(), split_indices(50, 0.3, 3).unwrap());
        assert_ne!(split_indices(50, 0.3, 3).unwrap(), split_indices(50, 0.3, 4).unwrap());
    }

    #[test]
    fn split_rejects_missing_response() {
        let x = parse("1,2\n3,NA\n4,5").unwrap();
        assert!(matches!(split(&x, 1, 0.5, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(split_indices(10, 0.0, 0).is_err());
        assert!(split_indices(10, 1.0, 0).is_err());
    }

    #[test]
    fn zeros_become_missing() {
        let x = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        let m = mask_of_zeros(&x).unwrap();
        assert_eq!(m.mask(), &Mask::from_row_slice(2, 2, &[false, true, true, false]));
    }

    #[test]
    fn nonzero_matrix_fully_observed() {
        let x = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 2.0, 0.5]);
        assert!(mask_of_zeros(&x).unwrap().is_complete());
    }

    #[test]
    fn zero_row_rejected() {
        let x = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 1.0]);
        assert!(matches!(mask_of_zeros(&x), Err(Error::Validation(_))));
    }

    #[test]
    fn hidden_entries_are_not_readable() {
        let data = Matrix::from_row_slice(1, 2, &[3.0, 9.0]);
        let mask = Mask::from_row_slice(1, 2, &[true, false]);
        let x = MaskedMatrix::new(data, mask).unwrap();
        assert_eq!(x.zero_filled()[(0, 1)], 0.0);
        assert_eq!(x.get(0, 1), None);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let data = Matrix::zeros(2, 2);
        let mask = Mask::from_element(2, 3, true);
        assert!(MaskedMatrix::new(data, mask).is_err());
    }
}
