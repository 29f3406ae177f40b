//! Growth of the selection guarantee with the dimension.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::Operator;
use crate::ribsel::{select_sigma, SelectOptions, SelectionParams};
use crate::spaces::SpaceSpec;

/// Seeds per size for the achieved-|σ| median.
pub const SEEDS_PER_SIZE: u64 = 5;

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub tau: f64,
    pub alpha: f64,
    pub guarantee_size: f64,
    /// Median |σ| of identity selections over [`SEEDS_PER_SIZE`] seeds; absent above the dense cap.
    pub achieved: Option<f64>,
    /// Fitted exponent of `guarantee_size` against `n`; absent for a single size.
    pub exponent: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// One row per size for `T = I` (δ = Γ = 1). Sizes must be strictly increasing.
pub fn scaling_table(
    make_space: impl Fn(usize) -> Result<SpaceSpec>,
    sizes: &[usize],
    eta: f64,
    seed: u64,
    max_dense: usize,
) -> Result<Vec<ScalingRow>> {
    if sizes.is_empty() || !sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::OutOfRange(
            "sizes must be nonempty and strictly increasing".into(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let space = make_space(n)?;
        let params = SelectionParams::from_constants(&space, 1.0, 1.0, eta, seed, 1)?;
        let achieved = if n <= max_dense {
            let t = Operator::identity(n);
            let sizes = (0..SEEDS_PER_SIZE)
                .map(|k| {
                    let opts = SelectOptions::new(eta, seed.wrapping_add(k));
                    select_sigma(&space, &t, &opts).map(|c| c.sigma.len() as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(median(sizes))
        } else {
            None
        };
        rows.push(ScalingRow {
            n,
            tau: params.tau,
            alpha: params.alpha,
            guarantee_size: params.guarantee_size(),
            achieved,
            exponent: None,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.n as f64, r.guarantee_size))
        .collect();
    let slope = log_log_slope(&points);
    for r in &mut rows {
        r.exponent = slope;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6)
            .map(|k| (k as f64, 3.0 * (k as f64).powf(0.7)))
            .collect();
        assert!((log_log_slope(&pts).unwrap() - 0.7).abs() < 1e-12);
        assert!(log_log_slope(&pts[..1]).is_none());
    }

    #[test]
    fn single_size_has_no_exponent() {
        let rows = scaling_table(|n| SpaceSpec::lp(2.0, n), &[64], 1.0, 1, 64).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].exponent.is_none());
        assert!(rows[0].achieved.is_some());
    }

    #[test]
    fn l1_grows_like_square_root() {
        let sizes: Vec<usize> = (6..=14).map(|k| 1 << k).collect();
        let rows = scaling_table(|n| SpaceSpec::lp(1.0, n), &sizes, 1.0, 1, 0).unwrap();
        assert!((rows[0].exponent.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unsorted_sizes() {
        assert!(scaling_table(|n| SpaceSpec::lp(2.0, n), &[128, 64], 1.0, 1, 0).is_err());
    }
}
