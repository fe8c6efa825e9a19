//! CSV ingestion and result writing.

use std::io::{Read, Write};
use std::path::Path;

use crate::copula::Sample;
use crate::error::{Error, Result};

/// Reads numeric rows. A first row that does not parse as numbers is taken
/// as a header. Rows are 1-based in error messages, counting the header.
pub fn read_sample<R: Read>(reader: R) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| Error::Csv { row: line, msg: e.to_string() })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(vals) => {
                if let Some(col) = vals.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Csv { row: line, msg: format!("non-finite value in column {}", col + 1) });
                }
                if let Some(first) = rows.first() {
                    if first.len() != vals.len() {
                        return Err(Error::Csv {
                            row: line,
                            msg: format!("expected {} columns, found {}", first.len(), vals.len()),
                        });
                    }
                }
                rows.push(vals);
            }
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(Error::Csv { row: line, msg: e.to_string() }),
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidDims("no data rows".into()));
    }
    Sample::from_rows(&rows)
}

pub fn read_sample_path(path: impl AsRef<Path>) -> Result<Sample> {
    let f = std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_sample(f)
}

/// Writes a sample with a `x1,...,xd` header.
pub fn write_sample<W: Write>(s: &Sample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (1..=s.d()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for i in 0..s.n() {
        w.write_record(s.row(i).iter().map(|v| v.to_string())).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
