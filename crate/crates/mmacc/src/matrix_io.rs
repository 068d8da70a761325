//! Headerless CSV for encoder matrices.
//!
//! One matrix row per line, comma separated. Values are written in the
//! shortest form that parses back to the same `f64`.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mmacc_core::EncoderMatrix;

#[derive(Debug)]
pub enum MatrixIoError {
    Io { path: PathBuf, source: io::Error },
    /// 1-based row and column of the offending field.
    Parse { row: usize, column: usize, message: String },
    Ragged { row: usize, expected: usize, found: usize },
    NegativeEntry { row: usize, column: usize, value: f64 },
    Empty,
    Matrix(mmacc_core::Error),
}

impl fmt::Display for MatrixIoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixIoError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            MatrixIoError::Parse { row, column, message } => {
                write!(f, "row {row}, column {column}: {message}")
            }
            MatrixIoError::Ragged { row, expected, found } => {
                write!(f, "row {row} has {found} fields, expected {expected}")
            }
            MatrixIoError::NegativeEntry { row, column, value } => {
                write!(f, "row {row}, column {column}: negative entry {value}")
            }
            MatrixIoError::Empty => write!(f, "matrix file contains no rows"),
            MatrixIoError::Matrix(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MatrixIoError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            MatrixIoError::Io { source, .. } => Some(source),
            MatrixIoError::Matrix(e) => Some(e),
            _ => None,
        }
    }
}

pub fn parse_csv(text: &str) -> Result<EncoderMatrix, MatrixIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| MatrixIoError::Parse {
            row,
            column: 1,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(MatrixIoError::Ragged {
                row,
                expected,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let column = j + 1;
            let value: f64 = field.parse().map_err(|_| MatrixIoError::Parse {
                row,
                column,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(MatrixIoError::Parse {
                    row,
                    column,
                    message: format!("{field:?} is not finite"),
                });
            }
            if value < 0.0 {
                return Err(MatrixIoError::NegativeEntry { row, column, value });
            }
            entries.push(value);
        }
        rows += 1;
    }
    let cols = cols.ok_or(MatrixIoError::Empty)?;
    EncoderMatrix::new(rows, cols, entries).map_err(MatrixIoError::Matrix)
}

pub fn load_csv(path: &Path) -> Result<EncoderMatrix, MatrixIoError> {
    let text = fs::read_to_string(path).map_err(|source| MatrixIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}

/// Writes any row-major grid of numbers as headerless CSV.
pub fn format_grid(rows: usize, cols: usize, values: &[f64]) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..rows {
        writer
            .write_record(values[i * cols..(i + 1) * cols].iter().map(|v| format!("{v:?}")))
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("ascii output")
}

pub fn format_csv(m: &EncoderMatrix) -> String {
    format_grid(m.rows(), m.cols(), m.entries())
}

pub fn save_csv(m: &EncoderMatrix, path: &Path) -> Result<(), MatrixIoError> {
    fs::write(path, format_csv(m)).map_err(|source| MatrixIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmacc_core::matrices;

    #[test]
    fn single_entry() {
        let m = parse_csv("1.0\n").unwrap();
        assert_eq!((m.rows(), m.cols(), m.entries()), (1, 1, &[1.0][..]));
    }

    #[test]
    fn ragged_rows() {
        assert!(matches!(
            parse_csv("1,0\n1\n"),
            Err(MatrixIoError::Ragged { row: 2, expected: 2, found: 1 })
        ));
    }

    #[test]
    fn bad_field_location() {
        let err = parse_csv("1,0\n0,x\n").unwrap_err();
        assert!(matches!(err, MatrixIoError::Parse { row: 2, column: 2, .. }));
        assert!(matches!(
            parse_csv("0.5,-1\n").unwrap_err(),
            MatrixIoError::NegativeEntry { row: 1, column: 2, .. }
        ));
        assert!(matches!(parse_csv("\n").unwrap_err(), MatrixIoError::Empty));
    }

    #[test]
    fn round_trip_is_exact() {
        for m in [matrices::binary_tree(4).unwrap(), matrices::prefix_opt(9).unwrap()] {
            let back = parse_csv(&format_csv(&m)).unwrap();
            assert_eq!(back, m);
        }
        let odd = EncoderMatrix::new(1, 3, vec![0.1 + 0.2, 1e-300, 123_456_789.123_456_79]).unwrap();
        let back = parse_csv(&format_csv(&odd)).unwrap();
        for (a, b) in odd.entries().iter().zip(back.entries()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
