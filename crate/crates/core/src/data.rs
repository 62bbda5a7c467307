use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SketchError};

/// Input matrix `X ∈ R^{d×n}`; columns are data points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    radius: f64,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(SketchError::InvalidDimension(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SketchError::InvalidParameter(
                "data matrix contains non-finite values".into(),
            ));
        }
        let radius = max_column_norm(&values);
        Ok(Self { values, radius })
    }

    /// Builds `X` from its columns, each of length `d`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != d) {
            return Err(SketchError::InvalidDimension(
                "all columns must have the same length".into(),
            ));
        }
        let vecs: Vec<DVector<f64>> = columns
            .iter()
            .map(|c| DVector::from_column_slice(c))
            .collect();
        if vecs.is_empty() || d == 0 {
            return Err(SketchError::InvalidDimension("no data points".into()));
        }
        Self::new(DMatrix::from_columns(&vecs))
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    /// `max_i ‖x_i‖₂`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.values.as_slice()[j * d..(j + 1) * d]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(SketchError::InvalidParameter("non-finite entry".into()));
        }
        self.values[(row, col)] = value;
        self.radius = max_column_norm(&self.values);
        Ok(())
    }

    /// Squared column norms `‖x_i‖²`.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.values
            .column_iter()
            .map(|c| c.norm_squared())
            .collect()
    }

    /// Inner-product matrix `XᵀX`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.values.transpose() * &self.values
    }
}

fn max_column_norm(values: &DMatrix<f64>) -> f64 {
    values
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}
