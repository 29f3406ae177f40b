use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use super::NormFamily;
use crate::error::{Error, Result};
use crate::linalg;

/// ℓ^p with `p ∈ [1, ∞]`; `p = ∞` is stored as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lp {
    p: f64,
}

impl Lp {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidSpace(format!(
                "p must lie in [1, inf], got {p}"
            )));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Hölder conjugate exponent.
    pub fn conjugate(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else if self.p.is_infinite() {
            1.0
        } else {
            self.p / (self.p - 1.0)
        }
    }

    pub(crate) fn from_params(
        params: &serde_json::Map<String, Value>,
    ) -> Result<Arc<dyn NormFamily>> {
        let p = match params.get("p") {
            Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            Some(Value::String(s))
                if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity") =>
            {
                f64::INFINITY
            }
            _ => {
                return Err(Error::InvalidSpace(
                    "lp family needs `p` (a number >= 1 or \"inf\")".into(),
                ))
            }
        };
        Ok(Arc::new(Lp::new(p)?))
    }
}

pub(crate) fn lp_norm(p: f64, x: &[f64]) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        scale
            * x.iter()
                .map(|v| (v.abs() / scale).powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
    }
}

impl NormFamily for Lp {
    fn name(&self) -> &'static str {
        "lp"
    }

    fn params(&self) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        let p = if self.p.is_infinite() {
            json!("inf")
        } else {
            json!(self.p)
        };
        m.insert("p".into(), p);
        m
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn norm(&self, x: &[f64]) -> f64 {
        lp_norm(self.p, x)
    }

    fn dual_norm(&self, y: &[f64]) -> Result<f64> {
        Ok(lp_norm(self.conjugate(), y))
    }

    fn has_exact_op_norm(&self, _m: &DMatrix<f64>) -> bool {
        self.p == 1.0 || self.p == 2.0 || self.p.is_infinite()
    }

    fn op_norm_exact(&self, m: &DMatrix<f64>) -> Result<f64> {
        if self.p == 1.0 {
            Ok(linalg::max_col_abs_sum(m))
        } else if self.p.is_infinite() {
            Ok(linalg::max_row_abs_sum(m))
        } else if self.p == 2.0 {
            Ok(linalg::spectral_norm(m))
        } else {
            Err(Error::Unsupported(format!(
                "exact operator norm on lp with p = {}",
                self.p
            )))
        }
    }

    fn op_norm_upper(&self, m: &DMatrix<f64>) -> Result<f64> {
        if self.p == 1.0 || self.p.is_infinite() {
            self.op_norm_exact(m)
        } else if self.p == 2.0 {
            Ok(linalg::spectral_norm_upper(m))
        } else {
            // Riesz–Thorin between p = 1 and p = ∞
            let theta = 1.0 / self.p;
            Ok(linalg::max_col_abs_sum(m).powf(theta)
                * linalg::max_row_abs_sum(m).powf(1.0 - theta))
        }
    }
}
