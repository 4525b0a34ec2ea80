//! Plain CSV of floats, one matrix row per line.

use std::io::{Read, Write};

use blockdialect::Matrix;

use crate::error::{CliError, Result};

pub fn read_matrix<R: Read>(r: R) -> Result<Matrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Format(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Format(format!("line {}: bad number {f:?}", rows + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(CliError::Format(format!("line {}: ragged row", rows + 1)));
        }
        data.extend(row);
        rows += 1;
    }
    Ok(Matrix::new(rows, cols.unwrap_or(0), data)?)
}

pub fn write_matrix<W: Write>(m: &Matrix<f64>, w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for r in 0..m.rows() {
        wr.write_record(m.row(r).iter().map(|x| x.to_string()))
            .map_err(|e| CliError::Format(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = Matrix::<f64>::from_fn(3, 4, |r, c| (r as f64 + 0.1) / (c as f64 + 3.0));
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        assert_eq!(read_matrix(&buf[..]).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(read_matrix("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix("1,x\n".as_bytes()).is_err());
    }
}
