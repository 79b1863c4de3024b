//! CSV form of a [`ResultTable`].

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DoaError, Result};
use crate::harness::config::Estimator;
use crate::harness::experiment::{ResultRow, ResultTable};

pub const CSV_HEADER: [&str; 7] = [
    "snr_db",
    "estimator",
    "rmse_deg",
    "rmse_db",
    "prob_resolution",
    "mean_mu_opt",
    "crb_sqrt_deg",
];

/// Fixed six-decimal formatting; NaN is written as `NaN`.
fn fmt_value(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_csv<W: Write>(table: &ResultTable, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let table_err = |e: csv::Error| DoaError::Table(e.to_string());
    w.write_record(CSV_HEADER).map_err(table_err)?;
    for r in &table.rows {
        w.write_record([
            fmt_value(r.snr_db),
            r.estimator.name().to_string(),
            fmt_value(r.rmse_deg),
            fmt_value(r.rmse_db),
            fmt_value(r.prob_resolution),
            fmt_value(r.mean_mu_opt),
            fmt_value(r.crb_sqrt_deg),
        ])
        .map_err(table_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(table: &ResultTable) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf)?;
    String::from_utf8(buf).map_err(|e| DoaError::Table(e.to_string()))
}

pub fn write_csv_file(table: &ResultTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    write_csv(table, std::io::BufWriter::new(file))
}

pub fn read_csv<R: Read>(input: R) -> Result<ResultTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let table_err = |e: csv::Error| DoaError::Table(e.to_string());
    let header = rdr.headers().map_err(table_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(DoaError::Table(format!("unexpected header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(table_err)?;
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|e| DoaError::Table(format!("row {}: column {}: {e}", line + 1, CSV_HEADER[k])))
        };
        let estimator: Estimator = record[1]
            .parse()
            .map_err(|e: DoaError| DoaError::Table(format!("row {}: {e}", line + 1)))?;
        rows.push(ResultRow {
            snr_db: num(0)?,
            estimator,
            rmse_deg: num(2)?,
            rmse_db: num(3)?,
            prob_resolution: num(4)?,
            mean_mu_opt: num(5)?,
            crb_sqrt_deg: num(6)?,
        });
    }
    Ok(ResultTable { rows })
}

pub fn read_csv_file(path: &Path) -> Result<ResultTable> {
    read_csv(std::fs::File::open(path)?)
}
