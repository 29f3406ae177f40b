//! Basis profile functions λ, μ, ν, τ.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::SpaceSpec;
use crate::error::{Error, Result};

/// Largest `m` accepted by [`TauMode::Brute`]; 2^{m(m−1)} sign matrices are enumerated.
pub const TAU_BRUTE_MAX: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    /// Max–min over every off-diagonal sign matrix.
    Brute,
    /// `min(λ(m−1), μ(m−1))`; exact for absolute symmetric norms.
    Symmetric,
    /// `C_u · min(λ(m), μ(m))`.
    Upper,
}

impl FromStr for TauMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Self::Brute),
            "symmetric" => Ok(Self::Symmetric),
            "upper" => Ok(Self::Upper),
            other => Err(Error::Unknown {
                kind: "tau mode",
                name: other.into(),
                known: "brute, symmetric, upper".into(),
            }),
        }
    }
}

/// ν(m); `exact` is false when the value is only the `C_s·min(λ, μ)` upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuValue {
    pub value: f64,
    pub exact: bool,
}

impl SpaceSpec {
    fn indicator(&self, m: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[..m].fill(1.0);
        x
    }

    /// `(λ(m), μ(m)) = (‖Σ_{j≤m} e_j‖, ‖Σ_{j≤m} e_j*‖)`.
    pub fn lambda_mu(&self, m: usize) -> Result<(f64, f64)> {
        if m == 0 || m > self.dim() {
            return Err(Error::OutOfRange(format!(
                "lambda/mu need 1 <= m <= {}, got {m}",
                self.dim()
            )));
        }
        let x = self.indicator(m);
        Ok((self.norm(&x)?, self.dual_norm(&x)?))
    }

    /// ν(m) = `C_s · min(λ(m−1), μ(m−1))`, exact when the space carries its true constants.
    pub fn nu(&self, m: usize) -> Result<NuValue> {
        if m < 2 || m > self.dim() {
            return Err(Error::OutOfRange(format!(
                "nu needs 2 <= m <= {}, got {m}",
                self.dim()
            )));
        }
        let (l, u) = self.lambda_mu(m - 1)?;
        Ok(NuValue {
            value: self.cs() * l.min(u),
            exact: self.has_exact_constants(),
        })
    }

    pub fn tau(&self, m: usize, mode: TauMode) -> Result<f64> {
        if m < 2 || m > self.dim() {
            return Err(Error::OutOfRange(format!(
                "tau needs 2 <= m <= {}, got {m}",
                self.dim()
            )));
        }
        match mode {
            TauMode::Symmetric => {
                if !self.is_symmetric() {
                    return Err(Error::Unsupported(format!(
                        "symmetric tau on the non-symmetric family `{}`",
                        self.family_name()
                    )));
                }
                let (l, u) = self.lambda_mu(m - 1)?;
                Ok(l.min(u))
            }
            TauMode::Upper => {
                let (l, u) = self.lambda_mu(m)?;
                Ok(self.cu() * l.min(u))
            }
            TauMode::Brute => self.tau_brute(m),
        }
    }

    fn tau_brute(&self, m: usize) -> Result<f64> {
        if m > TAU_BRUTE_MAX {
            return Err(Error::TooLarge {
                count: 1u128 << (m * (m - 1)),
                limit: 1u128 << (TAU_BRUTE_MAX * (TAU_BRUTE_MAX - 1)),
            });
        }
        let family = self.family();
        // Probe the dual once so an unsupported family errors instead of panicking below.
        family.dual_norm(&vec![0.0; m])?;
        let offdiag: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let count = 1u64 << offdiag.len();
        let best = (0..count)
            .into_par_iter()
            .map_init(
                || (vec![0.0; m * m], vec![0.0; m]),
                |(eps, buf), mask| {
                    for (bit, &(i, j)) in offdiag.iter().enumerate() {
                        eps[i * m + j] = if mask >> bit & 1 == 1 { -1.0 } else { 1.0 };
                    }
                    // max_j ‖Σ_{i≠j} ε_ij e_i‖
                    let mut col_max: f64 = 0.0;
                    for j in 0..m {
                        for i in 0..m {
                            buf[i] = if i == j { 0.0 } else { eps[i * m + j] };
                        }
                        col_max = col_max.max(family.norm(buf));
                    }
                    // max_i ‖Σ_{j≠i} ε_ij e_j*‖_*
                    let mut row_max: f64 = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            buf[j] = if i == j { 0.0 } else { eps[i * m + j] };
                        }
                        row_max = row_max.max(family.dual_norm(buf).unwrap_or(f64::INFINITY));
                    }
                    col_max.min(row_max)
                },
            )
            .reduce(|| 0.0, f64::max);
        Ok(best)
    }

    /// λ(m)·μ(m) ≤ 2·C_u·C_s·m, up to an absolute slack of 1e-12.
    pub fn check_lambda_mu_product(&self, m: usize) -> Result<bool> {
        let (l, u) = self.lambda_mu(m)?;
        Ok(l * u <= 2.0 * self.cu() * self.cs() * m as f64 + 1e-12)
    }
}
