//! CSV helpers: the number format shared by every table and readers for
//! the tables `analyze` joins.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, Result};

/// Fixed notation with 9 significant digits; scientific outside
/// `1e-4 ..= 1e15` in magnitude.
pub fn fmt9(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0.00000000".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..=15).contains(&mag) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit
    let digits = s.chars().filter(char::is_ascii_digit).count();
    let leading_zeros = s
        .trim_start_matches('-')
        .chars()
        .take_while(|c| *c == '0' || *c == '.')
        .filter(|c| *c == '0')
        .count();
    if digits - leading_zeros > 9 && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

pub fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Data(format!("{} has no `{name}` column", path.display())))
}

/// `id -> mean` from an Elo table.
pub fn read_elo_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let (id, mean) = (column(&headers, "id", path)?, column(&headers, "mean", path)?);
    let mut out = BTreeMap::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let value: f64 = row[mean]
            .parse()
            .map_err(|_| CliError::Data(format!("{}: row {}: bad mean `{}`", path.display(), line + 2, &row[mean])))?;
        out.insert(row[id].to_owned(), value);
    }
    Ok(out)
}

/// Metric tables: `id -> (metric -> value)`; empty cells are absent.
pub struct MetricTable {
    pub metric_names: Vec<String>,
    pub rows: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn read_metrics_csv(path: &Path, metric_names: &[&str]) -> Result<MetricTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let id = column(&headers, "id", path)?;
    let cols: Vec<(String, usize)> = metric_names
        .iter()
        .map(|m| Ok((m.to_string(), column(&headers, m, path)?)))
        .collect::<Result<_>>()?;
    let mut rows = BTreeMap::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let mut values = BTreeMap::new();
        for (name, c) in &cols {
            let cell = row[*c].trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!("{}: row {}: bad {name} `{cell}`", path.display(), line + 2))
            })?;
            values.insert(name.clone(), v);
        }
        rows.insert(row[id].to_owned(), values);
    }
    Ok(MetricTable {
        metric_names: metric_names.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(1016.0), "1016.00000");
        assert_eq!(fmt9(0.981980506), "0.981980506");
        assert_eq!(fmt9(-12.5), "-12.5000000");
        assert_eq!(fmt9(0.0), "0.00000000");
        assert_eq!(fmt9(9.9999999999), "10.0000000");
        assert_eq!(fmt9(0.00123456789), "0.00123456789");
        assert_eq!(fmt9(1e-7), "1.00000000e-7");
        assert_eq!(fmt9(1e20), "1.00000000e20");
    }
}
