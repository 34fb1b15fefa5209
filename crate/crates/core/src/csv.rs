//! Plain CSV tables of reals.
//!
//! Reals are written with 17 significant digits so that a write/read cycle is
//! lossless and repeated runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::linalg::DenseMatrix;
use crate::{Error, Result};

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format {
        what: "csv",
        detail: e.to_string(),
    }
}

/// A header line followed by rows of already-formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_reals(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        if !self.header.is_empty() {
            wtr.write_record(&self.header).map_err(csv_err)?;
        }
        for row in &self.rows {
            wtr.write_record(row).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    /// Parses a table whose first line is a header.
    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header = rdr
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    /// Cell values of the named column parsed as reals.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format {
                what: "csv",
                detail: format!("no column named {name:?}"),
            })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| parse_cell(row.get(idx).map(String::as_str), i + 2))
            .collect()
    }
}

fn parse_cell(cell: Option<&str>, line: usize) -> Result<f64> {
    let cell = cell.ok_or_else(|| Error::Format {
        what: "csv",
        detail: format!("line {line}: missing cell"),
    })?;
    let v: f64 = cell.parse().map_err(|_| Error::Format {
        what: "csv",
        detail: format!("line {line}: not a number: {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Format {
            what: "csv",
            detail: format!("line {line}: non-finite value"),
        });
    }
    Ok(v)
}

/// One matrix row per line, no header.
pub fn write_matrix<W: Write>(m: &DenseMatrix, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.rows() {
        wtr.write_record(m.row(i).iter().map(|v| fmt_f64(*v)))
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(r: R) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row: Result<Vec<f64>> = rec.iter().map(|c| parse_cell(Some(c), i + 1)).collect();
        rows.push(row?);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn save_matrix(m: &DenseMatrix, path: &Path) -> Result<()> {
    write_matrix(m, BufWriter::new(File::create(path)?))
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    read_matrix(File::open(path)?)
}

/// A vector is stored as a single column.
pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let m = load_matrix(path)?;
    if m.cols() != 1 {
        return Err(Error::Format {
            what: "csv",
            detail: format!("expected one column, found {}", m.cols()),
        });
    }
    Ok(m.as_slice().to_vec())
}

pub fn save_vector(v: &[f64], path: &Path) -> Result<()> {
    save_matrix(&DenseMatrix::from_row_major(v.len(), 1, v.to_vec())?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn table_roundtrip() {
        let mut t = Table::new(&["iter", "alpha"]);
        t.push(vec!["0".into(), fmt_f64(0.5)]);
        t.push(vec!["1".into(), fmt_f64(1e-300)]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,alpha\n0,5.0000000000000000e-1\n"));
        let back = Table::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("alpha").unwrap(), vec![0.5, 1e-300]);
        assert!(back.column("beta").is_err());
    }

    #[test]
    fn ragged_matrix_rejected() {
        assert!(read_matrix("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix("1,x\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn matrix_roundtrip_is_lossless(data in prop::collection::vec(-1e6f64..1e6, 12)) {
            let m = DenseMatrix::from_row_major(3, 4, data).unwrap();
            let mut buf = Vec::new();
            write_matrix(&m, &mut buf).unwrap();
            prop_assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
        }
    }
}
