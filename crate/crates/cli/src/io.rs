use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use ngp::report::FitReport;
use ngp::TimeSeries;

use crate::CliError;

/// Reads a `t,y` CSV. Extra columns are ignored; line numbers count the header as line 1.
pub fn read_series(path: &Path) -> Result<TimeSeries, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_series(&text, path)
}

pub fn parse_series(text: &str, path: &Path) -> Result<TimeSeries, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: unreadable header: {e}", path.display())))?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Validation(format!("{}: header must contain `t` and `y` columns", path.display()))
        })
    };
    let (ti, yi) = (column("t")?, column("y")?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Validation(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, name: &str| -> Result<f64, CliError> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                CliError::Validation(format!(
                    "{}: line {line}: cannot parse `{raw}` as a number in column `{name}`",
                    path.display()
                ))
            })
        };
        times.push(field(ti, "t")?);
        values.push(field(yi, "y")?);
    }
    TimeSeries::new(times, values).map_err(|e| CliError::from_core(e, Some(path)))
}

/// Writes to `path`, or to stdout when `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => File::create(p)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(&r).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn curves_csv(report: &FitReport) -> Result<Vec<u8>, CliError> {
    let n = report.eval_times.len();
    csv_bytes(
        &["t", "mean_u", "lower_u", "upper_u", "mean_du", "lower_du", "upper_du"],
        (0..n).map(|i| {
            [
                report.eval_times[i],
                report.posterior_mean_u[i],
                report.ci_lower_u[i],
                report.ci_upper_u[i],
                report.posterior_mean_du[i],
                report.ci_lower_du[i],
                report.ci_upper_du[i],
            ]
            .iter()
            .map(|v| v.to_string())
            .collect()
        }),
    )
}

pub fn columns_csv(header: &[&str], columns: &[&[f64]]) -> Result<Vec<u8>, CliError> {
    let n = columns.first().map_or(0, |c| c.len());
    csv_bytes(header, (0..n).map(|i| columns.iter().map(|c| c[i].to_string()).collect()))
}

pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    csv_bytes(header, rows.into_iter())
}
