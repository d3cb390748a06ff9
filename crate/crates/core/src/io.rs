//! File formats: matrix CSV (plain rows of decimals, rows are `i`, columns
//! are atoms), a JSON array of atom weights, and CSV/JSON report writers.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::WeightedSpace;
use crate::order_stats::BivariateFunction;

pub fn parse_matrix_csv(reader: impl Read) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::invalid(format!("row {}: `{field}` is not a finite number", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("matrix file has no rows"));
    }
    Ok(rows)
}

pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_matrix_csv(File::open(path)?)
}

pub fn read_weights_json(path: &Path) -> Result<Vec<f64>> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

/// Matrix plus optional weight sidecar; uniform atoms when no sidecar is given.
pub fn load_bivariate(matrix: &Path, weights: Option<&Path>) -> Result<BivariateFunction> {
    let rows = read_matrix_csv(matrix)?;
    match weights {
        None => BivariateFunction::from_matrix(rows),
        Some(w) => BivariateFunction::new(WeightedSpace::new(read_weights_json(w)?)?, rows),
    }
}

pub fn write_matrix_csv(writer: impl Write, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Header row from the field names of `T`, then one row per item.
pub fn write_csv<T: Serialize>(writer: impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(mut writer: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writeln!(writer)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn matrix_round_trip() {
        let rows = vec![vec![1.0, 0.5], vec![-2.25, 3.0]];
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,0.5\n-2.25,3\n");
        assert_eq!(parse_matrix_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn bad_matrix() {
        assert!(parse_matrix_csv("1,x\n".as_bytes()).is_err());
        assert!(parse_matrix_csv("".as_bytes()).is_err());
        assert!(parse_matrix_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(parse_matrix_csv("1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_header_from_fields() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[Row { a: 1, b: 0.5 }, Row { a: 2, b: 2.0 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,0.5\n2,2.0\n");
    }
}
