//! CSV input and output of observed datasets.

use std::io::{Read, Write};
use std::path::Path;

use dcma_core::genmodel::{ColumnNames, Dataset};
use dcma_core::numcore::Matrix;

use crate::config::ColumnRoles;
use crate::error::CliError;

/// Reads the mapped columns of a headed, comma-separated file. Unmapped
/// columns are ignored. Missing values are collected and reported together;
/// the first unparsable cell aborts.
pub fn read_dataset<R: Read>(input: R, roles: &ColumnRoles) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| CliError::config(format!("cannot read CSV header: {e}")))?
        .clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::config(format!("column '{name}' is not in the CSV header")))
    };
    let a_col = find(&roles.treatment)?;
    let y_col = find(&roles.outcome)?;
    let m_cols = roles.mediators.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    let z_cols = roles.covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    let mapped: Vec<(usize, &str)> = std::iter::once((a_col, roles.treatment.as_str()))
        .chain(m_cols.iter().zip(&roles.mediators).map(|(&c, n)| (c, n.as_str())))
        .chain(std::iter::once((y_col, roles.outcome.as_str())))
        .chain(z_cols.iter().zip(&roles.covariates).map(|(&c, n)| (c, n.as_str())))
        .collect();

    let mut a = Vec::new();
    let mut m = Vec::new();
    let mut z = Vec::new();
    let mut y = Vec::new();
    let mut missing: Vec<usize> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CliError::config(format!("CSV row {row}: {e}")))?;
        let mut values = Vec::with_capacity(mapped.len());
        let mut row_missing = false;
        for &(c, name) in &mapped {
            let cell = rec.get(c).unwrap_or("").trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                row_missing = true;
                values.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::config(format!("non-numeric value '{cell}' at row {row}, column '{name}'"))
            })?;
            if !v.is_finite() {
                return Err(CliError::config(format!(
                    "non-finite value '{cell}' at row {row}, column '{name}'"
                )));
            }
            values.push(v);
        }
        if row_missing {
            missing.push(row);
            continue;
        }
        let t = values[0];
        if t != 0.0 && t != 1.0 {
            return Err(CliError::config(format!(
                "treatment column '{}' must be 0 or 1, row {row} has {t}",
                roles.treatment
            )));
        }
        a.push(t as u8);
        let s = m_cols.len();
        m.extend_from_slice(&values[1..1 + s]);
        y.push(values[1 + s]);
        z.extend_from_slice(&values[2 + s..]);
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(20).map(usize::to_string).collect();
        let more = if missing.len() > 20 {
            format!(" and {} more", missing.len() - 20)
        } else {
            String::new()
        };
        return Err(CliError::config(format!(
            "missing values in mapped columns at rows {}{more}",
            shown.join(", ")
        )));
    }
    let n = a.len();
    if n == 0 {
        return Err(CliError::config("empty dataset"));
    }
    let names = ColumnNames {
        treatment: roles.treatment.clone(),
        covariates: roles.covariates.clone(),
        mediators: roles.mediators.clone(),
        outcome: roles.outcome.clone(),
    };
    let dataset = Dataset::new(
        a,
        Matrix::from_vec(n, z_cols.len(), z)?,
        Matrix::from_vec(n, m_cols.len(), m)?,
        y,
        names,
    )?;
    Ok(dataset)
}

pub fn load_dataset(path: &Path, roles: &ColumnRoles) -> Result<Dataset, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::config(format!("cannot open data file {}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(file), roles)
}

/// Header `A, Z.., M.., Y`; values use shortest round-trip formatting.
pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let n = data.names();
    let mut header = vec![n.treatment.clone()];
    header.extend(n.covariates.iter().cloned());
    header.extend(n.mediators.iter().cloned());
    header.push(n.outcome.clone());
    let io = |e: csv::Error| CliError::runtime(format!("cannot write CSV: {e}"));
    w.write_record(&header).map_err(io)?;
    for i in 0..data.len() {
        let mut rec = vec![data.treatment()[i].to_string()];
        rec.extend(data.covariates().row(i).iter().map(|v| format!("{v:?}")));
        rec.extend(data.mediators().row(i).iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", data.outcome()[i]));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
