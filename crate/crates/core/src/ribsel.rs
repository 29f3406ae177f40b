//! Randomized restricted invertibility.
//!
//! Coordinates are kept independently with probability α. On the kept set σ the
//! diagonal-normalized operator `A = R_σ D⁻¹ T R_σ` is compared with the restriction `R_σ`;
//! a sample is accepted when |σ| is within αn/2 of αn and `‖A − R_σ‖ ≤ κ1/(1−κ2)`, which
//! makes `A` invertible on `X_σ` with `‖A⁻¹‖ ≤ (1−κ2)/(1−κ1−κ2) ≤ 1+η`. Every accepted
//! sample is re-verified by inverting the σ-submatrix directly, so a certificate never
//! depends on the probabilistic window being satisfied.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inverse, principal_submatrix, spectral_norm};
use crate::operators::{best_matrix_norm, op_norm, OpNormMode, Operator};
use crate::serde_util::{matrix_rows, one_based};
use crate::spaces::{SpaceSpec, TauMode};

pub const DEFAULT_MAX_TRIALS: u64 = 100_000;
/// Largest dimension the subset oracle will enumerate.
pub const ORACLE_MAX_DIM: usize = 14;
pub const RESIDUAL_TOL: f64 = 1e-10;
const TRIAL_CHUNK: u64 = 64;

/// `(κ1, κ2) = (min(1, η)/4, min(η, 1/(1+η))/4)`.
pub fn kappas(eta: f64) -> (f64, f64) {
    (eta.min(1.0) / 4.0, eta.min(1.0 / (1.0 + eta)) / 4.0)
}

/// `sqrt(δ·min(1,η)/(16Γ)) · sqrt(n/τ(n))`.
pub fn guarantee_size(delta: f64, gamma: f64, eta: f64, n: usize, tau: f64) -> f64 {
    (delta * eta.min(1.0) / (16.0 * gamma)).sqrt() * (n as f64 / tau).sqrt()
}

/// Both sides of the dimension window under which the sampling argument is a proof:
/// `δ·min(1,η)/(4Γn) ≤ τ(n) ≤ δ·min(1,η)/(2¹⁰Γ) · (16 + min(η, 1/(1+η))·n)²/n`.
pub fn window_check(delta: f64, gamma: f64, eta: f64, n: usize, tau: f64) -> (bool, bool) {
    let n = n as f64;
    let m = eta.min(1.0);
    let lower = delta * m / (4.0 * gamma * n) <= tau;
    let bracket = 16.0 + eta.min(1.0 / (1.0 + eta)) * n;
    let upper = tau <= delta * m / (1024.0 * gamma) * bracket * bracket / n;
    (lower, upper)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionParams {
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub tau: f64,
    pub tau_mode: TauMode,
    pub alpha: f64,
    /// α came out above 1 (lower window violated) and was clamped.
    pub alpha_clamped: bool,
    pub window_lower: bool,
    pub window_upper: bool,
    pub seed: u64,
    pub max_trials: u64,
}

impl SelectionParams {
    /// Parameters from explicit δ and Γ.
    pub fn from_constants(
        space: &SpaceSpec,
        delta: f64,
        gamma: f64,
        eta: f64,
        seed: u64,
        max_trials: u64,
    ) -> Result<Self> {
        let n = space.dim();
        if n < 2 {
            return Err(Error::OutOfRange("selection needs n >= 2".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if !(delta > 0.0 && gamma >= delta) {
            return Err(Error::OutOfRange(format!(
                "need 0 < delta <= gamma (delta = {delta}, gamma = {gamma})"
            )));
        }
        let tau_mode = if space.is_symmetric() {
            TauMode::Symmetric
        } else {
            TauMode::Upper
        };
        let tau = space.tau(n, tau_mode)?;
        let (kappa1, kappa2) = kappas(eta);
        let raw_alpha = (delta * kappa1 / gamma).sqrt() / (n as f64 * tau).sqrt();
        let (window_lower, window_upper) = window_check(delta, gamma, eta, n, tau);
        Ok(Self {
            n,
            delta,
            gamma,
            eta,
            kappa1,
            kappa2,
            tau,
            tau_mode,
            alpha: raw_alpha.min(1.0),
            alpha_clamped: raw_alpha > 1.0,
            window_lower,
            window_upper,
            seed,
            max_trials,
        })
    }

    pub fn window_satisfied(&self) -> bool {
        self.window_lower && self.window_upper
    }

    /// `κ1/(1−κ2)`, the largest accepted `‖A − R‖`.
    pub fn acceptance_threshold(&self) -> f64 {
        self.kappa1 / (1.0 - self.kappa2)
    }

    /// `(1−κ2)/(1−κ1−κ2)`.
    pub fn neumann_bound(&self) -> f64 {
        (1.0 - self.kappa2) / (1.0 - self.kappa1 - self.kappa2)
    }

    pub fn guarantee_size(&self) -> f64 {
        guarantee_size(self.delta, self.gamma, self.eta, self.n, self.tau)
    }

    /// `|size − αn| ≤ αn/2`.
    pub fn in_omega_prime(&self, size: usize) -> bool {
        let mean = self.alpha * self.n as f64;
        (size as f64 - mean).abs() <= mean / 2.0
    }

    /// Whether some `|σ| ∈ {0, …, n}` lies in Ω′.
    pub fn omega_prime_nonempty(&self) -> bool {
        let mean = self.alpha * self.n as f64;
        let low = (mean / 2.0).ceil().max(0.0) as usize;
        low <= self.n && self.in_omega_prime(low)
    }
}

/// δ from the diagonal and Γ from the certified upper operator norm.
pub fn compute_params(
    space: &SpaceSpec,
    t: &Operator,
    eta: f64,
    seed: u64,
    max_trials: u64,
) -> Result<SelectionParams> {
    let delta = t.diagonal_delta();
    if delta == 0.0 {
        let index = t.diag().position(|v| v == 0.0).unwrap_or(0);
        return Err(Error::SingularDiagonal { index });
    }
    let gamma = op_norm(space, t, OpNormMode::Upper)?;
    SelectionParams::from_constants(space, delta, gamma.max(delta), eta, seed, max_trials)
}

/// A-priori bounds on `E‖A − R‖`.
#[derive(Debug, Clone, Serialize)]
pub struct OffdiagBounds {
    /// `(α²/δ)·Σ_{i≠j} |⟨T e_i, e_j*⟩|`.
    pub entrywise: f64,
    /// `α²(Γ/δ)·n·max_i ‖Σ_{j≠i} ε_ij e_j*‖`, `ε_ij = sign⟨T e_i, e_j*⟩`.
    pub dual_rows: f64,
    /// `α²(Γ/δ)·n·max_j ‖Σ_{i≠j} ε_ij e_i‖`.
    pub primal_cols: f64,
    /// `min(dual_rows, primal_cols)`; at most κ1 when α is not clamped.
    pub combined: f64,
    pub kappa1: f64,
}

pub fn expected_offdiag_bound(
    space: &SpaceSpec,
    t: &Operator,
    params: &SelectionParams,
) -> Result<OffdiagBounds> {
    let n = t.dim();
    if n != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: n,
        });
    }
    let m = t.matrix();
    let a2 = params.alpha * params.alpha;
    let offsum: f64 = (0..n)
        .flat_map(|i| {
            (0..n)
                .filter(move |&j| j != i)
                .map(move |j| m[(j, i)].abs())
        })
        .sum();
    let sign = |v: f64| if v == 0.0 { 0.0 } else { v.signum() };
    let mut dual_max: f64 = 0.0;
    let mut primal_max: f64 = 0.0;
    let mut buf = vec![0.0; n];
    for i in 0..n {
        // vector over j of ε_ij = sign(m[j][i]), j ≠ i
        for j in 0..n {
            buf[j] = if j == i { 0.0 } else { sign(m[(j, i)]) };
        }
        dual_max = dual_max.max(space.dual_norm(&buf)?);
    }
    for j in 0..n {
        // vector over i of ε_ij, i ≠ j
        for i in 0..n {
            buf[i] = if i == j { 0.0 } else { sign(m[(j, i)]) };
        }
        primal_max = primal_max.max(space.norm(&buf)?);
    }
    let scale = a2 * params.gamma / params.delta * n as f64;
    let dual_rows = scale * dual_max;
    let primal_cols = scale * primal_max;
    Ok(OffdiagBounds {
        entrywise: a2 / params.delta * offsum,
        dual_rows,
        primal_cols,
        combined: dual_rows.min(primal_cols),
        kappa1: params.kappa1,
    })
}

/// One Bernoulli(α) sample.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub trial: u64,
    #[serde(with = "one_based")]
    pub sigma: Vec<usize>,
    pub in_omega_prime: bool,
    pub offdiag_norm: f64,
    pub offdiag_norm_exact: bool,
    pub accepted: bool,
}

impl Candidate {
    /// The selector vector `ξ ∈ {0,1}^n`.
    pub fn xi(&self, n: usize) -> Vec<u8> {
        let mut xi = vec![0; n];
        for &i in &self.sigma {
            xi[i] = 1;
        }
        xi
    }
}

/// `D⁻¹T` prepared once and sampled per trial.
pub struct TrialSampler<'a> {
    space: &'a SpaceSpec,
    params: &'a SelectionParams,
    normalized: DMatrix<f64>,
}

impl<'a> TrialSampler<'a> {
    pub fn new(space: &'a SpaceSpec, t: &Operator, params: &'a SelectionParams) -> Result<Self> {
        if t.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: t.dim(),
            });
        }
        Ok(Self {
            space,
            params,
            normalized: t.diagonal_normalized()?,
        })
    }

    pub fn normalized(&self) -> &DMatrix<f64> {
        &self.normalized
    }

    /// Trial `index` draws from the ChaCha stream `index` under the run's seed, so trials
    /// are reproducible in any evaluation order.
    pub fn trial(&self, index: u64) -> Result<Candidate> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(index);
        let alpha = self.params.alpha;
        let sigma: Vec<usize> = (0..self.params.n)
            .filter(|_| rng.random::<f64>() < alpha)
            .collect();
        let in_omega_prime = self.params.in_omega_prime(sigma.len());
        let (offdiag_norm, offdiag_norm_exact) = if sigma.is_empty() {
            (0.0, true)
        } else {
            let mut sub = principal_submatrix(&self.normalized, &sigma);
            sub.fill_diagonal(0.0);
            best_matrix_norm(&self.space.restrict(sigma.len())?, &sub)?
        };
        let accepted = in_omega_prime && offdiag_norm <= self.params.acceptance_threshold();
        Ok(Candidate {
            trial: index,
            sigma,
            in_omega_prime,
            offdiag_norm,
            offdiag_norm_exact,
            accepted,
        })
    }
}

pub fn sample_and_test(
    space: &SpaceSpec,
    t: &Operator,
    params: &SelectionParams,
    trial_index: u64,
) -> Result<Candidate> {
    TrialSampler::new(space, t, params)?.trial(trial_index)
}

/// `‖(R_σ D⁻¹ T R_σ)⁻¹‖` on `X_σ` from the normalized matrix; the flag is true when the
/// norm is exact rather than an upper bound.
pub fn sigma_inverse_norm(
    space: &SpaceSpec,
    normalized: &DMatrix<f64>,
    sigma: &[usize],
) -> Result<(f64, bool)> {
    if sigma.is_empty() {
        return Err(Error::OutOfRange("empty index set".into()));
    }
    let sub = principal_submatrix(normalized, sigma);
    let inv = inverse(&sub).ok_or_else(|| {
        Error::Singular(format!(
            "sigma-submatrix of size {} is singular",
            sigma.len()
        ))
    })?;
    best_matrix_norm(&space.restrict(sigma.len())?, &inv)
}

#[derive(Debug, Clone)]
pub struct SelectOptions {
    pub eta: f64,
    pub seed: u64,
    pub max_trials: u64,
    /// Replaces the computed upper operator norm; must still bound ‖T‖.
    pub gamma: Option<f64>,
}

impl SelectOptions {
    pub fn new(eta: f64, seed: u64) -> Self {
        Self {
            eta,
            seed,
            max_trials: DEFAULT_MAX_TRIALS,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionCertificate {
    #[serde(with = "one_based")]
    pub sigma: Vec<usize>,
    pub offdiag_norm: f64,
    pub inverse_norm: f64,
    pub inverse_norm_exact: bool,
    pub neumann_bound: f64,
    pub guarantee_size: f64,
    pub window_satisfied: bool,
    pub trials_used: u64,
    pub seed: u64,
    pub params: SelectionParams,
}

/// Samples until a trial is accepted, then certifies the inverse on the chosen σ.
///
/// Trials run in fixed-size chunks in parallel; the accepted trial is always the one with
/// the smallest index, independent of thread count.
pub fn select_sigma(
    space: &SpaceSpec,
    t: &Operator,
    opts: &SelectOptions,
) -> Result<SelectionCertificate> {
    let params = match opts.gamma {
        Some(gamma) => SelectionParams::from_constants(
            space,
            t.diagonal_delta(),
            gamma,
            opts.eta,
            opts.seed,
            opts.max_trials,
        )?,
        None => compute_params(space, t, opts.eta, opts.seed, opts.max_trials)?,
    };
    if t.diagonal_delta() == 0.0 {
        let index = t.diag().position(|v| v == 0.0).unwrap_or(0);
        return Err(Error::SingularDiagonal { index });
    }
    if !params.omega_prime_nonempty() {
        let mean = params.alpha * params.n as f64;
        return Err(Error::EmptyAcceptanceWindow {
            low: mean / 2.0,
            high: 1.5 * mean,
            mean,
        });
    }
    let sampler = TrialSampler::new(space, t, &params)?;
    let mut best: Option<Candidate> = None;
    let mut start = 0u64;
    while start < params.max_trials {
        let end = (start + TRIAL_CHUNK).min(params.max_trials);
        let batch = (start..end)
            .into_par_iter()
            .map(|i| sampler.trial(i))
            .collect::<Result<Vec<_>>>()?;
        for cand in batch {
            if cand.accepted {
                return certify(space, &sampler, &params, cand);
            }
            if better_failure(&cand, best.as_ref()) {
                best = Some(cand);
            }
        }
        start = end;
    }
    let deficit = best.as_ref().map_or(f64::INFINITY, |b| {
        b.offdiag_norm - params.acceptance_threshold()
    });
    Err(Error::TrialBudgetExhausted {
        trials: params.max_trials,
        best: best.map(Box::new),
        deficit,
    })
}

fn better_failure(cand: &Candidate, best: Option<&Candidate>) -> bool {
    match best {
        None => true,
        Some(b) => {
            (cand.in_omega_prime && !b.in_omega_prime)
                || (cand.in_omega_prime == b.in_omega_prime && cand.offdiag_norm < b.offdiag_norm)
        }
    }
}

fn certify(
    space: &SpaceSpec,
    sampler: &TrialSampler<'_>,
    params: &SelectionParams,
    cand: Candidate,
) -> Result<SelectionCertificate> {
    let (measured, exact) = sigma_inverse_norm(space, sampler.normalized(), &cand.sigma)?;
    let inverse_norm = if exact {
        measured
    } else {
        measured.min(1.0 / (1.0 - cand.offdiag_norm))
    };
    Ok(SelectionCertificate {
        sigma: cand.sigma,
        offdiag_norm: cand.offdiag_norm,
        inverse_norm,
        inverse_norm_exact: exact,
        neumann_bound: params.neumann_bound(),
        guarantee_size: params.guarantee_size(),
        window_satisfied: params.window_satisfied(),
        trials_used: cand.trial + 1,
        seed: params.seed,
        params: params.clone(),
    })
}

/// `E` (inclusion of `X_σ`) and `P = (R_σD⁻¹TR_σ)⁻¹R_σD⁻¹` with `PTE = I_σ`.
#[derive(Debug, Clone, Serialize)]
pub struct FactorizationCertificate {
    #[serde(with = "one_based")]
    pub sigma: Vec<usize>,
    #[serde(rename = "E", with = "matrix_rows")]
    pub e: DMatrix<f64>,
    #[serde(rename = "P", with = "matrix_rows")]
    pub p: DMatrix<f64>,
    /// Spectral norm of `PTE − I`.
    pub residual: f64,
    pub norm_e: f64,
    pub norm_p: f64,
    pub norm_product: f64,
    /// Whether both norms are exact; otherwise `norm_product` is an upper bound.
    pub norms_exact: bool,
    /// `C_u²(1+η)/δ`.
    pub bound: f64,
}

impl FactorizationCertificate {
    pub fn within_bound(&self) -> bool {
        self.norm_product <= self.bound * (1.0 + 1e-12)
    }
}

pub fn factorize(
    space: &SpaceSpec,
    t: &Operator,
    sigma: &[usize],
    eta: f64,
) -> Result<FactorizationCertificate> {
    let n = t.dim();
    if n != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: n,
        });
    }
    if sigma.is_empty() || sigma.iter().any(|&i| i >= n) || !sigma.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::OutOfRange(
            "sigma must be a nonempty increasing list of valid indices".into(),
        ));
    }
    let k = sigma.len();
    let normalized = t.diagonal_normalized()?;
    let s_inv = inverse(&principal_submatrix(&normalized, sigma))
        .ok_or_else(|| Error::Singular(format!("sigma-submatrix of size {k} is singular")))?;
    let e = DMatrix::from_fn(n, k, |i, j| if sigma[j] == i { 1.0 } else { 0.0 });
    // R_σ D⁻¹: rows σ of D⁻¹
    let rd = DMatrix::from_fn(k, n, |i, j| {
        if sigma[i] == j {
            1.0 / t.entry(j, j)
        } else {
            0.0
        }
    });
    let p = &s_inv * rd;
    let pte = &p * t.matrix() * &e;
    let residual = spectral_norm(&(pte - DMatrix::identity(k, k)));
    let (norm_e, exact_e) = best_matrix_norm(space, &e)?;
    let (norm_p, exact_p) = best_matrix_norm(space, &p)?;
    let delta = t.diagonal_delta();
    Ok(FactorizationCertificate {
        sigma: sigma.to_vec(),
        e,
        p,
        residual,
        norm_e,
        norm_p,
        norm_product: norm_e * norm_p,
        norms_exact: exact_e && exact_p,
        bound: space.cu().powi(2) * (1.0 + eta) / delta,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    #[serde(with = "one_based")]
    pub sigma: Vec<usize>,
    pub inverse_norm: f64,
    pub inverse_norm_exact: bool,
    pub subsets_checked: u64,
}

/// Largest σ with `‖(R_σD⁻¹TR_σ)⁻¹‖ ≤ 1+η`, lexicographically smallest among the largest.
pub fn oracle_max_sigma(space: &SpaceSpec, t: &Operator, eta: f64) -> Result<OracleResult> {
    let n = t.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::TooLarge {
            count: 1u128 << n,
            limit: 1u128 << ORACLE_MAX_DIM,
        });
    }
    if n != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: n,
        });
    }
    let normalized = t.diagonal_normalized()?;
    let limit = 1.0 + eta;
    let mut checked = 0u64;
    for size in (1..=n).rev() {
        let subsets: Vec<Vec<usize>> = (0..n).combinations(size).collect();
        let hit =
            subsets.par_iter().enumerate().find_map_first(|(pos, s)| {
                match sigma_inverse_norm(space, &normalized, s) {
                    Ok((v, exact)) if v <= limit => Some(Ok((pos, v, exact))),
                    Ok(_) | Err(Error::Singular(_)) => None,
                    Err(e) => Some(Err(e)),
                }
            });
        match hit {
            Some(Ok((pos, v, exact))) => {
                checked += pos as u64 + 1;
                return Ok(OracleResult {
                    sigma: subsets[pos].clone(),
                    inverse_norm: v,
                    inverse_norm_exact: exact,
                    subsets_checked: checked,
                });
            }
            Some(Err(e)) => return Err(e),
            None => checked += subsets.len() as u64,
        }
    }
    // singletons have inverse norm 1, so this is only reached for eta < 0
    Err(Error::OutOfRange(format!(
        "no subset meets the bound 1 + eta = {limit}"
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsymmetricBound {
    /// `n ≥ 1 + C_u·δ·min(1,η)/(4Γ)`.
    pub first_ok: bool,
    /// `n ≥ 2¹¹·C_s³/(δ²·min(1,η²)·min(η⁴, (1+η)⁻⁴))`.
    pub second_ok: bool,
    pub precondition_ok: bool,
    /// `4·(2C_u³C_s³)^{-1/4}·sqrt(δ·min(1,η)/Γ)·n^{1/4}` as stated for subsymmetric bases.
    pub stated_size: f64,
    /// The same with prefactor 1/4, from substituting `τ(n) ≤ sqrt(2C_u³C_s³(n−1))`
    /// into the general size guarantee.
    pub conservative_size: f64,
}

pub fn subsymmetric_bound(
    space: &SpaceSpec,
    n: usize,
    delta: f64,
    gamma: f64,
    eta: f64,
) -> SubsymmetricBound {
    let (cu, cs) = (space.cu(), space.cs());
    let nf = n as f64;
    let m = eta.min(1.0);
    let first_ok = nf >= 1.0 + cu * delta * m / (4.0 * gamma);
    let denom = delta * delta * (eta * eta).min(1.0) * eta.powi(4).min((1.0 + eta).powi(-4));
    let second_ok = nf >= 2048.0 * cs.powi(3) / denom;
    let core =
        (2.0 * cu.powi(3) * cs.powi(3)).powf(-0.25) * (delta * m / gamma).sqrt() * nf.powf(0.25);
    SubsymmetricBound {
        first_ok,
        second_ok,
        precondition_ok: first_ok && second_ok,
        stated_size: 4.0 * core,
        conservative_size: 0.25 * core,
    }
}
