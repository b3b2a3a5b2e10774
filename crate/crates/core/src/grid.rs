//! Labeled square matrices as delimited text: a header row of labels, then
//! one row per label whose first cell is the label itself.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::io::{fmt_f64, reader_for};

pub fn write_labeled_matrix<W: Write, L: ToString>(labels: &[L], values: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<String> = labels.iter().map(ToString::to_string).collect();
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..values.ncols()).map(|j| fmt_f64(values[(i, j)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labeled_matrix<R: Read>(mut input: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut rdr = reader_for(&text);
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_owned).collect();
    let n = labels.len();
    let mut values = DMatrix::zeros(n, n);
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i >= n || rec.len() != n + 1 {
            return Err(Error::Parse { row: i + 1, message: format!("expected {n} labeled columns") });
        }
        if rec[0] != labels[i] {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("row label {:?} does not match column label {:?}", &rec[0], labels[i]),
            });
        }
        for j in 0..n {
            values[(i, j)] = rec[j + 1].parse::<f64>().map_err(|e| Error::Parse {
                row: i + 1,
                message: format!("invalid number {:?}: {e}", &rec[j + 1]),
            })?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::DimensionMismatch { expected: n, found: rows });
    }
    Ok((labels, values))
}
