use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A numeric design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl Frame {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Dimension(format!("duplicate column name {n}")));
            }
        }
        Ok(Frame { names, values })
    }

    /// A frame with `nrows` rows and no columns.
    pub fn empty(nrows: usize) -> Self {
        Frame { names: Vec::new(), values: DMatrix::zeros(nrows, 0) }
    }

    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let nrows = columns.first().map_or(0, |(_, v)| v.len());
        if columns.iter().any(|(_, v)| v.len() != nrows) {
            return Err(Error::Dimension("columns of unequal length".into()));
        }
        let names: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();
        let values = DMatrix::from_fn(nrows, columns.len(), |i, j| columns[j].1[i]);
        Frame::new(names, values)
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("row length differs from column count".into()));
        }
        let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Frame::new(names, values)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|j| self.column(j))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Columns by name, in the requested order.
    pub fn select(&self, names: &[String]) -> Result<Frame> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            match self.names.iter().position(|m| m == n) {
                Some(j) => idx.push(j),
                None => return Err(Error::Dimension(format!("column {n} missing from prediction data"))),
            }
        }
        Ok(self.select_indices(&idx))
    }

    pub fn select_mask(&self, mask: &[bool]) -> Frame {
        let idx: Vec<usize> = mask.iter().enumerate().filter(|(_, &k)| k).map(|(j, _)| j).collect();
        self.select_indices(&idx)
    }

    fn select_indices(&self, idx: &[usize]) -> Frame {
        let values = DMatrix::from_fn(self.nrows(), idx.len(), |i, k| self.values[(i, idx[k])]);
        Frame { names: idx.iter().map(|&j| self.names[j].clone()).collect(), values }
    }

    /// The subset of rows, in the given order.
    pub fn rows(&self, rows: &[usize]) -> Frame {
        let values = DMatrix::from_fn(rows.len(), self.ncols(), |i, j| self.values[(rows[i], j)]);
        Frame { names: self.names.clone(), values }
    }

    /// A copy with one column appended (or overwritten if the name exists).
    pub fn with_column(&self, name: &str, column: &[f64]) -> Result<Frame> {
        if column.len() != self.nrows() {
            return Err(Error::Dimension(format!("column {name} has wrong length")));
        }
        let mut cols: Vec<(String, Vec<f64>)> =
            (0..self.ncols()).map(|j| (self.names[j].clone(), self.column(j))).collect();
        match cols.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = column.to_vec(),
            None => cols.push((name.to_string(), column.to_vec())),
        }
        if cols.is_empty() {
            return Ok(Frame::empty(self.nrows()));
        }
        Frame::from_columns(cols)
    }
}
