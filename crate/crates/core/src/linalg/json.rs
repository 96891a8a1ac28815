//! JSON exchange format for operators:
//! `{"dims": [{"label": "A", "dim": 2}], "matrix": {"re": [[..]], "im": [[..]]}}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CMatrix, DimsLabel, StateOperator, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemJson {
    pub label: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<SubsystemJson>,
    pub matrix: MatrixJson,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
        Self { re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.re.len();
        if self.im.len() != rows {
            return Err(Error::DimensionMismatch("re/im row count differs".into()));
        }
        let cols = self.re.first().map_or(0, |r| r.len());
        for (r, i) in self.re.iter().zip(&self.im) {
            if r.len() != cols || i.len() != cols {
                return Err(Error::DimensionMismatch("ragged matrix rows".into()));
            }
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }
}

impl StateJson {
    pub fn from_state(s: &StateOperator) -> Self {
        Self {
            dims: s
                .dims()
                .subsystems()
                .iter()
                .map(|x| SubsystemJson { label: x.label.clone(), dim: x.dim })
                .collect(),
            matrix: MatrixJson::from_matrix(s.matrix()),
        }
    }

    /// Validating conversion.
    pub fn to_state(&self) -> Result<StateOperator> {
        StateOperator::new(self.dims_label()?, self.matrix.to_matrix()?)
    }

    /// Conversion without the trace bound (Choi matrices of general CPMs).
    pub fn to_positive_operator(&self) -> Result<StateOperator> {
        StateOperator::new_unnormalized(self.dims_label()?, self.matrix.to_matrix()?)
    }

    pub fn dims_label(&self) -> Result<DimsLabel> {
        DimsLabel::new(self.dims.iter().map(|d| (d.label.clone(), d.dim)))
    }
}

impl StateOperator {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StateJson::from_state(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<StateJson>(text)?.to_state()
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
