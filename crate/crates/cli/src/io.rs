//! CSV reading and writing.

use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;

use crate::campaign::CampaignResult;
use crate::error::{CliError, Result};

/// Shortest representation that reads back to the same value; empty for NaN.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line() as usize);
    match (e.kind(), line) {
        (csv::ErrorKind::Io(_), _) => match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!(),
        },
        (_, Some(line)) => CliError::Schema { path: path.to_path_buf(), line, message: e.to_string() },
        (_, None) => CliError::Runtime(format!("{}: {e}", path.display())),
    }
}

pub fn write_results(path: &Path, res: &CampaignResult) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |e| csv_error(path, e);
    w.write_record(["domain", "pattern", "drift", "estimator", "replicate", "mdi", "seconds", "error"]).map_err(wrap)?;
    for r in &res.rows {
        w.write_record([
            fmt_f64(r.domain),
            r.pattern.as_str().to_string(),
            r.drift.clone(),
            r.estimator.clone(),
            r.replicate.to_string(),
            r.mdi.map(fmt_f64).unwrap_or_default(),
            r.seconds.map(|s| format!("{s:.6}")).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_summary(path: &Path, res: &CampaignResult) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |e| csv_error(path, e);
    w.write_record([
        "domain", "pattern", "drift", "estimator", "replicates", "failures", "mean_mdi", "sd_mdi", "se_mdi", "seconds",
    ])
    .map_err(wrap)?;
    for c in &res.cells {
        w.write_record([
            fmt_f64(c.domain),
            c.pattern.as_str().to_string(),
            c.drift.clone(),
            c.estimator.clone(),
            c.replicates.to_string(),
            c.failures.to_string(),
            fmt_f64(c.mean),
            fmt_f64(c.sd),
            fmt_f64(c.se),
            c.seconds.map(|s| format!("{s:.6}")).unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// A row of `summary.csv` as needed for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub domain: f64,
    pub pattern: String,
    pub drift: String,
    pub estimator: String,
    pub mean: Option<f64>,
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Schema {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let (cd, cp, cr, ce, cm) = (col("domain")?, col("pattern")?, col("drift")?, col("estimator")?, col("mean_mdi")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |i: usize| -> Result<Option<f64>> {
            let s = rec.get(i).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| CliError::Schema {
                path: path.to_path_buf(),
                line,
                message: format!("'{s}' is not a number"),
            })
        };
        let domain = num(cd)?.ok_or_else(|| CliError::Schema {
            path: path.to_path_buf(),
            line,
            message: "empty domain".into(),
        })?;
        out.push(SummaryRow {
            domain,
            pattern: rec[cp].to_string(),
            drift: rec[cr].to_string(),
            estimator: rec[ce].to_string(),
            mean: num(cm)?,
        });
    }
    Ok(out)
}

/// Writes a matrix with a header row of column names.
pub fn write_matrix(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |e| csv_error(path, e);
    w.write_record(names).map_err(wrap)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes rows that start with a text label followed by numbers.
pub fn write_labelled(path: &Path, header: &[String], labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |e| csv_error(path, e);
    w.write_record(header).map_err(wrap)?;
    for (label, row) in labels.iter().zip(m.row_iter()) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|v| fmt_f64(*v)));
        w.write_record(rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a numeric matrix; a first row without any number is taken as a header.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(k + 1);
        if k == 0 && rec.iter().all(|f| f.trim().parse::<f64>().is_err()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.trim().parse::<f64>().map_err(|_| CliError::Schema {
                    path: path.to_path_buf(),
                    line,
                    message: format!("field {} ('{f}') is not a number", j + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Schema { path: path.to_path_buf(), line: 1, message: "no matrix rows".into() });
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Coordinates and variables read from a data file.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub coord_names: [String; 2],
    pub coords: DMatrix<f64>,
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Reads a table with a header naming two coordinate columns (`lon`/`lat` or
/// `x`/`y`) and any number of variable columns. Every field must be a number.
pub fn read_data(path: &Path, delimiter: u8) -> Result<DataTable> {
    let schema = |line: usize, message: String| CliError::Schema { path: path.to_path_buf(), line, message };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (cx, cy) = match (find("lon"), find("lat"), find("x"), find("y")) {
        (Some(a), Some(b), _, _) => (a, b),
        (_, _, Some(a), Some(b)) => (a, b),
        _ => {
            let missing = if find("lon").is_none() && find("x").is_none() { "lon" } else { "lat" };
            return Err(schema(1, format!("missing coordinate column '{missing}' (expected lon,lat or x,y)")));
        }
    };
    let var_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != cx && j != cy).collect();
    if var_cols.is_empty() {
        return Err(schema(1, "no variable columns".into()));
    }
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |j: usize| -> Result<f64> {
            let s = &rec[j];
            let v: f64 = s
                .parse()
                .map_err(|_| schema(line, format!("column '{}': '{s}' is not a number", &headers[j])))?;
            if !v.is_finite() {
                return Err(schema(line, format!("column '{}': value is not finite", &headers[j])));
            }
            Ok(v)
        };
        coords.push([field(cx)?, field(cy)?]);
        values.push(var_cols.iter().map(|&j| field(j)).collect::<Result<Vec<f64>>>()?);
    }
    if values.is_empty() {
        return Err(schema(2, "no data rows".into()));
    }
    let n = values.len();
    Ok(DataTable {
        coord_names: [headers[cx].to_string(), headers[cy].to_string()],
        coords: DMatrix::from_fn(n, 2, |i, j| coords[i][j]),
        names: var_cols.iter().map(|&j| headers[j].to_string()).collect(),
        values: DMatrix::from_fn(n, var_cols.len(), |i, j| values[i][j]),
    })
}
