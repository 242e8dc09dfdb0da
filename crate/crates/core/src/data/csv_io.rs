use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{Column, ColumnType, Dataset};
use super::roles::{Role, RoleMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    DropRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub name: String,
    pub role: Role,
    #[serde(rename = "type")]
    pub kind: ColumnType,
}

/// Summary of a CSV load: which rows were dropped and how each column was typed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    /// 1-based data row numbers (header excluded) dropped for missing values.
    pub dropped: Vec<usize>,
    pub columns: Vec<ColumnReport>,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_column(name: &str, cells: &[&str], rows: &[usize]) -> Result<Vec<f64>> {
    cells
        .iter()
        .zip(rows)
        .map(|(c, &r)| {
            c.trim().parse::<f64>().map_err(|_| Error::Parse {
                row: r + 1,
                column: name.to_string(),
                value: c.to_string(),
            })
        })
        .collect()
}

pub fn load_csv(path: impl AsRef<Path>, roles: &RoleMap, policy: MissingPolicy) -> Result<(Dataset, LoadReport)> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_reader(file, roles, policy)
}

/// Load comma-separated UTF-8 text with a header row.
pub fn load_csv_reader<R: Read>(reader: R, roles: &RoleMap, policy: MissingPolicy) -> Result<(Dataset, LoadReport)> {
    roles.validate_structure()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    for c in roles.role_columns() {
        if !headers.iter().any(|h| h == c) {
            return Err(Error::Schema(format!("role column `{c}` missing from CSV header")));
        }
    }
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let rows_read = records.len();

    let mut dropped = Vec::new();
    let mut kept = Vec::with_capacity(rows_read);
    for (r, rec) in records.iter().enumerate() {
        let missing = headers
            .iter()
            .enumerate()
            .find(|(j, _)| rec.get(*j).is_none_or(is_missing));
        match (missing, policy) {
            (None, _) => kept.push(r),
            (Some(_), MissingPolicy::DropRows) => dropped.push(r + 1),
            (Some((_, col)), MissingPolicy::Reject) => {
                return Err(Error::domain(col.as_str(), format!("missing value at row {}", r + 1)));
            }
        }
    }

    let mut columns = Vec::with_capacity(headers.len());
    for (j, name) in headers.iter().enumerate() {
        let cells: Vec<&str> = kept.iter().map(|&r| records[r].get(j).unwrap_or("")).collect();
        let col = match roles.role_of(name) {
            Role::Group => {
                let labels: Vec<String> = cells.iter().map(|c| c.trim().to_string()).collect();
                Column::categorical_from_labels(name, &labels, &roles.leading_group_levels())?
            }
            Role::Cluster => {
                let labels: Vec<String> = cells.iter().map(|c| c.trim().to_string()).collect();
                Column::categorical_from_labels(name, &labels, &[])?
            }
            Role::SystemFactor | Role::IndividualFactor => Column::binary(name, parse_column(name, &cells, &kept)?)?,
            Role::Outcome => Column::continuous(name, parse_column(name, &cells, &kept)?)?,
            _ => match parse_column(name, &cells, &kept) {
                Ok(v) if v.iter().all(|&x| x == 0.0 || x == 1.0) && !v.is_empty() => Column::binary(name, v)?,
                Ok(v) => Column::continuous(name, v)?,
                Err(_) => {
                    let labels: Vec<String> = cells.iter().map(|c| c.trim().to_string()).collect();
                    Column::categorical_from_labels(name, &labels, &[])?
                }
            },
        };
        columns.push(col);
    }
    let ds = Dataset::new(columns)?;
    roles.validate(&ds)?;
    let report = LoadReport {
        rows_read,
        rows_kept: ds.n_rows(),
        dropped,
        columns: ds
            .columns()
            .iter()
            .map(|c| ColumnReport {
                name: c.name().to_string(),
                role: roles.role_of(c.name()),
                kind: c.kind(),
            })
            .collect(),
    };
    Ok((ds, report))
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv_writer(ds, std::io::BufWriter::new(file))
}

/// Write with shortest round-trip float formatting, so reloading is bit-exact.
pub fn write_csv_writer<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.columns().iter().map(|c| c.name()))?;
    for r in 0..ds.n_rows() {
        w.write_record(ds.columns().iter().map(|c| c.render(r)))?;
    }
    w.flush()?;
    Ok(())
}
