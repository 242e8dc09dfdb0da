use crate::error::{Error, Result};

/// Dense numeric design matrix, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    names: Vec<String>,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_columns(n_rows: usize, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut names = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(n_rows * columns.len());
        for (name, col) in columns {
            if col.len() != n_rows {
                return Err(Error::Dimension(format!(
                    "design column `{name}` has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            names.push(name);
            data.extend(col);
        }
        Ok(Self { n_rows, names, data })
    }

    /// Row-major convenience constructor, mostly for tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let columns = (0..n_cols)
            .map(|j| (format!("x{j}"), rows.iter().map(|r| r[j]).collect()))
            .collect();
        Self::from_columns(n_rows, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n_rows + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols()).map(|j| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for j in 0..self.n_cols() {
            let col = self.column(j);
            data.extend(rows.iter().map(|&r| col[r]));
        }
        DesignMatrix {
            n_rows: rows.len(),
            names: self.names.clone(),
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// X·beta.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (j, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.column(j)) {
                *o += b * x;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_access() {
        let m = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.column(1), &[2.0, 4.0, 6.0]);
        assert_eq!(m.row(2), vec![5.0, 6.0]);
        assert_eq!(m.mul_vec(&[1.0, -1.0]), vec![-1.0, -1.0, -1.0]);
        assert_eq!(m.select_rows(&[2, 0]).column(0), &[5.0, 1.0]);
    }
}
