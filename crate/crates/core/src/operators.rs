//! Operators on `X_n` as dense matrices.
//!
//! Column `j` holds the coordinates of `T e_j`, so `entries[(i, j)] = ⟨T e_j, e_i*⟩`.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spaces::SpaceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpNormMode {
    Exact,
    Upper,
}

impl FromStr for OpNormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "upper" => Ok(Self::Upper),
            other => Err(Error::Unknown {
                kind: "operator norm mode",
                name: other.into(),
                known: "exact, upper".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    entries: DMatrix<f64>,
}

impl Operator {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, expected square",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidOperator("matrix is empty".into()));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let n = entries.nrows();
            return Err(Error::InvalidOperator(format!(
                "entry ({}, {}) is not finite",
                pos % n,
                pos / n
            )));
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidOperator(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_row_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// `⟨T e_j, e_i*⟩`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn diag(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(|j| self.entries[(j, j)])
    }

    /// `min_j |⟨T e_j, e_j*⟩|`; zero means no large diagonal.
    pub fn diagonal_delta(&self) -> f64 {
        self.diag().map(f64::abs).fold(f64::INFINITY, f64::min)
    }

    /// Signed minimum of the diagonal.
    pub fn min_diagonal(&self) -> f64 {
        self.diag().fold(f64::INFINITY, f64::min)
    }

    /// First index with a nonpositive diagonal entry, as an error.
    pub fn require_positive_diagonal(&self) -> Result<()> {
        match self.diag().enumerate().find(|(_, v)| *v <= 0.0) {
            Some((index, value)) => Err(Error::NonPositiveDiagonal { index, value }),
            None => Ok(()),
        }
    }

    fn require_nonzero_diagonal(&self) -> Result<()> {
        match self.diag().position(|v| v == 0.0) {
            Some(index) => Err(Error::SingularDiagonal { index }),
            None => Ok(()),
        }
    }

    /// The diagonal operator `D e_i = ⟨T e_i, e_i*⟩ e_i`.
    pub fn diagonal_part(&self) -> Operator {
        Operator {
            entries: DMatrix::from_diagonal(&self.entries.diagonal()),
        }
    }

    /// `D⁻¹`.
    pub fn diagonal_inverse(&self) -> Result<Operator> {
        self.require_nonzero_diagonal()?;
        Ok(Operator {
            entries: DMatrix::from_diagonal(&self.entries.diagonal().map(|v| 1.0 / v)),
        })
    }

    /// `M e_j = sign(⟨T e_j, e_j*⟩) e_j`; `T·M` then has positive diagonal `|⟨T e_j, e_j*⟩|`.
    pub fn multiplier(&self) -> Result<Operator> {
        self.require_nonzero_diagonal()?;
        Ok(Operator {
            entries: DMatrix::from_diagonal(&self.entries.diagonal().map(f64::signum)),
        })
    }

    /// `T·M`, the operator with the diagonal's signs removed.
    pub fn sign_normalized(&self) -> Result<Operator> {
        Ok(self.compose(&self.multiplier()?))
    }

    /// `D⁻¹T`: row `i` divided by the `i`-th diagonal entry.
    pub fn diagonal_normalized(&self) -> Result<DMatrix<f64>> {
        self.require_nonzero_diagonal()?;
        let mut m = self.entries.clone();
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row /= self.entries[(i, i)];
        }
        Ok(m)
    }

    /// `self ∘ other`, i.e. the matrix product `self · other`.
    pub fn compose(&self, other: &Operator) -> Operator {
        Operator {
            entries: &self.entries * &other.entries,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok((&self.entries * DVector::from_row_slice(x))
            .as_slice()
            .to_vec())
    }
}

/// Operator norm of `T` on the given space.
pub fn op_norm(space: &SpaceSpec, t: &Operator, mode: OpNormMode) -> Result<f64> {
    if t.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: t.dim(),
        });
    }
    matrix_norm(space, t.matrix(), mode)
}

/// Operator norm of a rectangular matrix from `X_{ncols}` to `X_{nrows}` in the space's family.
pub fn matrix_norm(space: &SpaceSpec, m: &DMatrix<f64>, mode: OpNormMode) -> Result<f64> {
    if m.nrows() > space.dim() || m.ncols() > space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: m.nrows().max(m.ncols()),
        });
    }
    match mode {
        OpNormMode::Exact => space.family().op_norm_exact(m),
        OpNormMode::Upper => space.family().op_norm_upper(m),
    }
}

/// The exact norm when the family supports it at this shape, otherwise the certified upper
/// bound. The flag reports which one was returned.
pub fn best_matrix_norm(space: &SpaceSpec, m: &DMatrix<f64>) -> Result<(f64, bool)> {
    if space.family().has_exact_op_norm(m) {
        Ok((matrix_norm(space, m, OpNormMode::Exact)?, true))
    } else {
        Ok((matrix_norm(space, m, OpNormMode::Upper)?, false))
    }
}

/// The pairing `⟨x, y⟩ = Σ x_i y_i`.
pub fn bilinear(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum())
}
