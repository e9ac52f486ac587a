//! JSON matrix files: `{"n": int, "re": [[...]], "im": [[...]]}`, row-major.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&Matrix> for MatrixFile {
    fn from(m: &Matrix) -> Self {
        let n = m.n();
        let re = (0..n).map(|j| (0..n).map(|k| m[(j, k)].re).collect()).collect();
        let im = (0..n).map(|j| (0..n).map(|k| m[(j, k)].im).collect()).collect();
        Self { n, re, im }
    }
}

impl TryFrom<MatrixFile> for Matrix {
    type Error = Error;

    fn try_from(file: MatrixFile) -> Result<Matrix> {
        let n = file.n;
        if n == 0 {
            return Err(Error::Format("n must be positive".into()));
        }
        for (name, rows) in [("re", &file.re), ("im", &file.im)] {
            if rows.len() != n {
                return Err(Error::Format(format!(
                    "\"{name}\" has {} rows, expected {n}",
                    rows.len()
                )));
            }
            if let Some((j, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
                return Err(Error::Format(format!(
                    "\"{name}\" row {j} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        Ok(Matrix::from_fn(n, |j, k| {
            Complex64::new(file.re[j][k], file.im[j][k])
        }))
    }
}

pub fn matrix_from_json(text: &str) -> Result<Matrix> {
    let file: MatrixFile =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    file.try_into()
}

pub fn matrix_to_json(m: &Matrix) -> String {
    serde_json::to_string(&MatrixFile::from(m)).expect("matrix serialization cannot fail")
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    matrix_from_json(&text)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, matrix_to_json(m)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
