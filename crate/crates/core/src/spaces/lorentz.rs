use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use super::NormFamily;
use crate::error::{Error, Result};

/// Domain dimensions up to this use extreme-point enumeration for the operator norm.
pub const LORENTZ_EXACT_MAX: usize = 12;

/// Lorentz sequence space `d(w, 1)`: `‖x‖ = Σ w_i x*_i` over the decreasing
/// rearrangement of `|x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lorentz {
    weights: Vec<f64>,
    partial: Vec<f64>,
}

impl Lorentz {
    /// Weights must be positive and nonincreasing with `w_1 = 1`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpace("lorentz weights are empty".into()));
        }
        if (weights[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpace(format!(
                "lorentz weights must start at 1, got {}",
                weights[0]
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "weight {i} = {w} is not positive"
                )));
            }
            if i > 0 && *w > weights[i - 1] {
                return Err(Error::InvalidSpace(format!(
                    "weights must be nonincreasing (w[{i}] = {w} > w[{}] = {})",
                    i - 1,
                    weights[i - 1]
                )));
            }
        }
        let partial = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Self { weights, partial })
    }

    /// `w_i = 1/i`, the harmonic weights.
    pub fn harmonic(len: usize) -> Result<Self> {
        Self::new((1..=len).map(|i| 1.0 / i as f64).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn from_params(
        params: &serde_json::Map<String, Value>,
    ) -> Result<Arc<dyn NormFamily>> {
        let weights = params
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidSpace("lorentz family needs a `weights` array".into()))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| Error::InvalidSpace("lorentz weights must be numbers".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Lorentz::new(weights)?))
    }

    fn decreasing_abs(x: &[f64]) -> Vec<f64> {
        let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        a.sort_unstable_by(|a, b| b.total_cmp(a));
        a
    }

    fn norm_of(&self, y: &DVector<f64>) -> f64 {
        self.norm(y.as_slice())
    }
}

impl NormFamily for Lorentz {
    fn name(&self) -> &'static str {
        "lorentz"
    }

    fn params(&self) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("weights".into(), json!(self.weights));
        m
    }

    fn max_len(&self) -> Option<usize> {
        Some(self.weights.len())
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn norm(&self, x: &[f64]) -> f64 {
        debug_assert!(x.len() <= self.weights.len());
        Self::decreasing_abs(x)
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum()
    }

    fn dual_norm(&self, y: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        let mut best: f64 = 0.0;
        for (k, a) in Self::decreasing_abs(y).iter().enumerate() {
            acc += a;
            best = best.max(acc / self.partial[k]);
        }
        Ok(best)
    }

    fn has_exact_op_norm(&self, m: &DMatrix<f64>) -> bool {
        m.ncols() <= LORENTZ_EXACT_MAX
    }

    /// Maximum of `‖Mx‖` over the extreme points `Σ_{j∈S} ±e_j / W_|S|` of the unit ball.
    fn op_norm_exact(&self, m: &DMatrix<f64>) -> Result<f64> {
        let k = m.ncols();
        if k > LORENTZ_EXACT_MAX {
            return Err(Error::Unsupported(format!(
                "exact lorentz operator norm for domain dimension {k} > {LORENTZ_EXACT_MAX}"
            )));
        }
        let mut best: f64 = 0.0;
        let mut y = DVector::zeros(m.nrows());
        for subset in 1u32..(1 << k) {
            let members: Vec<usize> = (0..k).filter(|j| subset >> j & 1 == 1).collect();
            let scale = 1.0 / self.partial[members.len() - 1];
            // the first member keeps sign + (x and −x have the same image norm)
            for signs in 0u32..(1 << (members.len() - 1)) {
                y.fill(0.0);
                for (pos, &j) in members.iter().enumerate() {
                    let s = if pos > 0 && signs >> (pos - 1) & 1 == 1 {
                        -scale
                    } else {
                        scale
                    };
                    y.axpy(s, &m.column(j), 1.0);
                }
                best = best.max(self.norm_of(&y));
            }
        }
        Ok(best)
    }

    fn op_norm_upper(&self, m: &DMatrix<f64>) -> Result<f64> {
        if self.has_exact_op_norm(m) {
            return self.op_norm_exact(m);
        }
        // ‖Mx‖ ≤ max_j ‖M e_j‖ · |S| / W_|S| on every extreme point, and s / W_s is nondecreasing
        let k = m.ncols();
        let max_col = m
            .column_iter()
            .map(|c| self.norm(c.as_slice()))
            .fold(0.0, f64::max);
        Ok(max_col * k as f64 / self.partial[k - 1])
    }
}
