use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    /// Continuous or binary values.
    Numeric(Vec<f64>),
    /// Level codes into `levels`; code 0 is the reference level.
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    kind: ColumnType,
    data: ColumnData,
}

impl Column {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(name, format!("non-finite value at row {}", i + 1)));
        }
        Ok(Self {
            name,
            kind: ColumnType::Continuous,
            data: ColumnData::Numeric(values),
        })
    }

    pub fn binary(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if let Some(i) = values.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::domain(
                name,
                format!("value {} at row {} is not 0 or 1", values[i], i + 1),
            ));
        }
        Ok(Self {
            name,
            kind: ColumnType::Binary,
            data: ColumnData::Numeric(values),
        })
    }

    /// Categorical column from level labels and codes. Code 0 is the
    /// reference level for indicator coding.
    pub fn categorical(name: impl Into<String>, levels: Vec<String>, codes: Vec<u32>) -> Result<Self> {
        let name = name.into();
        if levels.is_empty() && !codes.is_empty() {
            return Err(Error::domain(name, "categorical column without levels"));
        }
        if let Some(i) = codes.iter().position(|&c| c as usize >= levels.len()) {
            return Err(Error::domain(name, format!("level code out of range at row {}", i + 1)));
        }
        Ok(Self {
            name,
            kind: ColumnType::Categorical,
            data: ColumnData::Categorical { levels, codes },
        })
    }

    /// Categorical column from raw labels. Levels listed in `leading` come
    /// first in that order; remaining labels follow in sorted order.
    pub fn categorical_from_labels(name: impl Into<String>, labels: &[String], leading: &[String]) -> Result<Self> {
        let mut levels: Vec<String> = leading.to_vec();
        let mut rest: Vec<String> = labels
            .iter()
            .filter(|l| !levels.contains(l))
            .cloned()
            .collect();
        rest.sort();
        rest.dedup();
        levels.extend(rest);
        let lookup: HashMap<&str, u32> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = labels.iter().map(|l| lookup[l.as_str()]).collect();
        Self::categorical(name, levels, codes)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnType {
        self.kind
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical { levels, .. } => Some(levels),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn codes(&self) -> Option<&[u32]> {
        match &self.data {
            ColumnData::Categorical { codes, .. } => Some(codes),
            ColumnData::Numeric(_) => None,
        }
    }

    /// Cell rendered the way it is written to CSV.
    pub fn render(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Categorical { levels, codes } => levels[codes[row] as usize].clone(),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        };
        Column {
            name: self.name.clone(),
            kind: self.kind,
            data,
        }
    }
}

/// Immutable column store. Every column has the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_rows: usize,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, expected {}",
                    c.name,
                    c.len(),
                    n_rows
                )));
            }
            if index.insert(c.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(Self {
            n_rows,
            columns,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.index
            .get(name)
            .map(|&i| &self.columns[i])
            .ok_or_else(|| Error::Schema(format!("unknown column `{name}`")))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        self.column(name)?
            .numeric()
            .ok_or_else(|| Error::Schema(format!("column `{name}` is categorical, expected numeric")))
    }

    /// Copy with one numeric column replaced (or appended). The replacement
    /// keeps the original column type when the new values are compatible.
    pub fn with_numeric(&self, name: &str, values: Vec<f64>) -> Result<Dataset> {
        let col = match self.index.get(name).map(|&i| self.columns[i].kind) {
            Some(ColumnType::Binary) => Column::binary(name, values)?,
            Some(ColumnType::Categorical) => {
                return Err(Error::Schema(format!("column `{name}` is categorical")))
            }
            _ => Column::continuous(name, values)?,
        };
        self.with_column(col)
    }

    /// Copy with every row of binary column `name` set to `value`.
    pub fn with_constant(&self, name: &str, value: f64) -> Result<Dataset> {
        self.with_numeric(name, vec![value; self.n_rows])
    }

    /// Copy with categorical column `name` set to level code `code` on every row.
    pub fn with_level(&self, name: &str, code: u32) -> Result<Dataset> {
        let col = self.column(name)?;
        let levels = col
            .levels()
            .ok_or_else(|| Error::Schema(format!("column `{name}` is not categorical")))?
            .to_vec();
        self.with_column(Column::categorical(name, levels, vec![code; self.n_rows])?)
    }

    pub fn with_column(&self, column: Column) -> Result<Dataset> {
        if column.len() != self.n_rows {
            return Err(Error::Schema(format!(
                "column `{}` has {} rows, expected {}",
                column.name,
                column.len(),
                self.n_rows
            )));
        }
        let mut out = self.clone();
        match out.index.get(&column.name) {
            Some(&i) => out.columns[i] = column,
            None => {
                out.index.insert(column.name.clone(), out.columns.len());
                out.columns.push(column);
            }
        }
        Ok(out)
    }

    /// Rows in the given order (duplicates allowed, as in resampling).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            n_rows: rows.len(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            index: self.index.clone(),
        }
    }
}
