use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use super::{DatasetMeta, Source};
use crate::error::{Error, Result};

/// Reads comma-separated rows of numbers. With `skip_header` the first record is ignored.
pub fn read_csv<R: Read>(reader: R, skip_header: bool) -> Result<Array2<f64>> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        // 1-based line number as it appears in the file
        let line = record.position().map(|p| p.line() as usize).unwrap_or(rows + 1);
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow { row: line, expected, found: record.len() });
        }
        for (column, token) in record.iter().enumerate() {
            let v: f64 = token.parse().map_err(|_| Error::ParseNumber {
                row: line,
                column: column + 1,
                token: token.to_string(),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let dim = dim.ok_or(Error::EmptyDataset)?;
    Ok(Array2::from_shape_vec((rows, dim), values).expect("shape checked row by row"))
}

pub fn load_csv(path: impl AsRef<Path>, skip_header: bool) -> Result<(Array2<f64>, DatasetMeta)> {
    let data = read_csv(File::open(path)?, skip_header)?;
    let meta = DatasetMeta::new(&data, Source::Csv);
    Ok((data, meta))
}

/// Writes one row per line, every value with 17 significant digits.
pub fn write_csv<W: Write>(mut writer: W, data: ArrayView2<'_, f64>) -> Result<()> {
    let mut line = String::new();
    for row in data.outer_iter() {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_number(*v));
        }
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: impl AsRef<Path>, data: ArrayView2<'_, f64>) -> Result<()> {
    write_csv(std::io::BufWriter::new(File::create(path)?), data)
}

/// 17 significant digits, enough to round-trip any f64.
pub(crate) fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parses_simple_matrix() {
        let m = read_csv("1,2\n3,4\n".as_bytes(), false).unwrap();
        assert_eq!(m, array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn skips_header() {
        let m = read_csv("a,b\n1, 2\n".as_bytes(), true).unwrap();
        assert_eq!(m, array![[1.0, 2.0]]);
    }

    #[test]
    fn empty_file() {
        assert!(matches!(read_csv("".as_bytes(), false), Err(Error::EmptyDataset)));
    }

    #[test]
    fn ragged_row_reports_line() {
        let e = read_csv("1,2\n3,4\n5\n".as_bytes(), false).unwrap_err();
        assert!(matches!(e, Error::RaggedRow { row: 3, expected: 2, found: 1 }), "{e}");
    }

    #[test]
    fn bad_token_reports_position() {
        let e = read_csv("1,2\n3,x4\n".as_bytes(), false).unwrap_err();
        assert!(matches!(e, Error::ParseNumber { row: 2, column: 2, .. }), "{e}");
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE, 0.0, -0.0] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }
}
