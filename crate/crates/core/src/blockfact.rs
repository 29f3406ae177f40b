//! Block bases and the finite factorization `I_m = E T F`.
//!
//! A [`BlockSystem`] holds `m` interval-ordered blocks of size `L` with balanced signs. It
//! gives `b_j = Σ ε_k e_k` and `d_j = Σ ε_k e_k*`. `B` maps `e_j ↦ b_j` and `Q` maps
//! `x ↦ Σ ⟨x, d_j⟩ e_j`, so `QB = L·I`.

use itertools::Itertools;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse, spectral_norm};
use crate::operators::{best_matrix_norm, op_norm, OpNormMode, Operator};
use crate::serde_util::{matrix_rows, one_based_nested};
use crate::signavg::{balanced_signs, cross_value, omega_size, required_window, BRUTE_LIMIT};
use crate::spaces::SpaceSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSystem {
    #[serde(rename = "L")]
    len: usize,
    #[serde(with = "one_based_nested")]
    blocks: Vec<Vec<usize>>,
    signs: Vec<Vec<i8>>,
}

#[derive(Deserialize)]
struct RawBlockSystem {
    #[serde(rename = "L")]
    len: usize,
    blocks: Vec<Vec<usize>>,
    signs: Vec<Vec<i8>>,
}

impl BlockSystem {
    /// Blocks are 0-based here.
    pub fn new(len: usize, blocks: Vec<Vec<usize>>, signs: Vec<Vec<i8>>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidBlockSystem(msg));
        if len == 0 || len % 2 == 1 {
            return Err(Error::OddBlockSize(len));
        }
        if blocks.is_empty() {
            return bad("no blocks".into());
        }
        if blocks.len() != signs.len() {
            return bad(format!(
                "{} blocks but {} sign vectors",
                blocks.len(),
                signs.len()
            ));
        }
        for (j, (b, e)) in blocks.iter().zip(&signs).enumerate() {
            if b.len() != len || e.len() != len {
                return bad(format!("block {} does not have size L = {len}", j + 1));
            }
            if !b.windows(2).all(|w| w[0] < w[1]) {
                return bad(format!("block {} is not strictly increasing", j + 1));
            }
            if e.iter().any(|&s| s != 1 && s != -1) {
                return bad(format!("signs of block {} are not all +1/-1", j + 1));
            }
            if e.iter().map(|&s| i32::from(s)).sum::<i32>() != 0 {
                return bad(format!("signs of block {} are not balanced", j + 1));
            }
        }
        for (j, w) in blocks.windows(2).enumerate() {
            if w[0][len - 1] >= w[1][0] {
                return bad(format!(
                    "blocks {} and {} overlap or are out of order",
                    j + 1,
                    j + 2
                ));
            }
        }
        Ok(Self { len, blocks, signs })
    }

    /// Parses `{"L":2, "blocks":[[1,2],[3,4]], "signs":[[1,-1],[1,-1]]}` with 1-based indices.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: RawBlockSystem = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidBlockSystem(e.to_string()))?;
        let blocks = raw
            .blocks
            .into_iter()
            .map(|b| {
                b.into_iter()
                    .map(|i| {
                        i.checked_sub(1).ok_or_else(|| {
                            Error::InvalidBlockSystem("indices are 1-based; found 0".into())
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(raw.len, blocks, raw.signs)
    }

    /// Block size `L`.
    pub fn block_len(&self) -> usize {
        self.len
    }

    /// Number of blocks `m`.
    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn signs(&self) -> &[Vec<i8>] {
        &self.signs
    }

    /// One past the largest index used.
    pub fn span_end(&self) -> usize {
        self.blocks.last().map_or(0, |b| b[self.len - 1] + 1)
    }

    fn require_fits(&self, n: usize) -> Result<()> {
        if self.span_end() > n {
            return Err(Error::InsufficientDimension {
                needed: self.span_end(),
                have: n,
            });
        }
        Ok(())
    }

    pub fn b_vector(&self, j: usize, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (&k, &s) in self.blocks[j].iter().zip(&self.signs[j]) {
            v[k] = f64::from(s);
        }
        v
    }

    pub fn d_vector(&self, j: usize, n: usize) -> Vec<f64> {
        self.b_vector(j, n)
    }

    /// `⟨T b_from, d_to⟩`.
    pub fn pairing(&self, t: &DMatrix<f64>, from: usize, to: usize) -> f64 {
        cross_value(
            t,
            &self.blocks[from],
            &self.signs[from],
            &self.blocks[to],
            &self.signs[to],
        )
    }
}

fn same_family(a: &SpaceSpec, b: &SpaceSpec) -> bool {
    a.family_name() == b.family_name() && a.family().params() == b.family().params()
}

/// `(B, Q)`: `B` is `n×m` with columns `b_j`, `Q` is `m×n` with rows `d_j`.
pub fn build_bq(
    space_small: &SpaceSpec,
    space_big: &SpaceSpec,
    system: &BlockSystem,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !same_family(space_small, space_big) {
        return Err(Error::InvalidSpace(format!(
            "block operators need one family, got `{}` and `{}`",
            space_small.family_name(),
            space_big.family_name()
        )));
    }
    let (m, n) = (space_small.dim(), space_big.dim());
    if system.count() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: system.count(),
        });
    }
    system.require_fits(n)?;
    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        for (&k, &s) in system.blocks[j].iter().zip(&system.signs[j]) {
            b[(k, j)] = f64::from(s);
        }
    }
    let q = b.transpose();
    Ok((b, q))
}

/// `‖B‖` and `‖Q‖` measured in the big space's family, with exactness flags.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BqNorms {
    pub norm_b: f64,
    pub norm_q: f64,
    pub exact: bool,
    /// `C_u·C_s·L`.
    pub bound: f64,
}

pub fn bq_norms(
    space_big: &SpaceSpec,
    system: &BlockSystem,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<BqNorms> {
    let (norm_b, eb) = best_matrix_norm(space_big, b)?;
    let (norm_q, eq) = best_matrix_norm(space_big, q)?;
    Ok(BqNorms {
        norm_b,
        norm_q,
        exact: eb && eq,
        bound: space_big.cu() * space_big.cs() * system.block_len() as f64,
    })
}

/// `P x = Σ_j ⟨x, d_j⟩/⟨T̃ b_j, d_j⟩ · b_j` as an `n×n` matrix.
pub fn build_p(t_tilde: &Operator, system: &BlockSystem) -> Result<DMatrix<f64>> {
    let n = t_tilde.dim();
    system.require_fits(n)?;
    let mut p = DMatrix::zeros(n, n);
    for j in 0..system.count() {
        let c = system.pairing(t_tilde.matrix(), j, j);
        if c == 0.0 {
            return Err(Error::Singular(format!(
                "block diagonal <T b_{0}, d_{0}> vanishes",
                j + 1
            )));
        }
        for (&k, &ek) in system.blocks[j].iter().zip(&system.signs[j]) {
            for (&l, &el) in system.blocks[j].iter().zip(&system.signs[j]) {
                p[(k, l)] += f64::from(ek) * f64::from(el) / c;
            }
        }
    }
    Ok(p)
}

/// `η_i = 2^{−i−1}·κδ/(C_d·i)` for the 1-based block index `i`.
pub fn cross_tolerance(i: usize, kappa: f64, delta: f64, cd: f64) -> f64 {
    0.5f64.powi(i as i32 + 1) * kappa * delta / (cd * i as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct GreedyBlocks {
    pub system: BlockSystem,
    /// `⟨T̃ b_j, d_j⟩` per block.
    pub diagonal: Vec<f64>,
    /// Largest `|⟨T̃ b_j, d_i⟩|`, `i ≠ j`, over the whole system.
    pub gamma: f64,
    /// Per-block tolerance and whether the chosen block met it.
    pub tolerances: Vec<f64>,
    pub tolerance_met: Vec<bool>,
    /// `N` for the full block-search window.
    pub window: usize,
    /// Number of blocks searched over a full window of `N` fresh indices.
    pub full_windows: usize,
    pub threshold: f64,
    pub kappa: f64,
}

struct Scored {
    block: Vec<usize>,
    signs: Vec<i8>,
    value: f64,
    cross: f64,
}

/// Picks `m` blocks left to right. Each block comes from the next (at most `N`) fresh indices
/// and must reach `⟨T̃ b_i, d_i⟩ ≥ (1−κ)δL`. Among those, the first in lexicographic order
/// with cross terms within `η_i` wins, otherwise the one with the smallest cross terms.
///
/// Windows are truncated to leave `L` indices for each remaining block, so `n ≥ m·L`
/// suffices; `full_windows` reports how many searches saw all `N` indices.
pub fn greedy_blocks(
    space: &SpaceSpec,
    t: &Operator,
    m: usize,
    len: usize,
    kappa: f64,
) -> Result<GreedyBlocks> {
    if len == 0 || len % 2 == 1 {
        return Err(Error::OddBlockSize(len));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::OutOfRange(format!(
            "kappa must lie in (0, 1), got {kappa}"
        )));
    }
    if m == 0 {
        return Err(Error::OutOfRange("need at least one block".into()));
    }
    let n = t.dim();
    if n != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: n,
        });
    }
    if n < m * len {
        return Err(Error::InsufficientDimension {
            needed: m * len,
            have: n,
        });
    }
    let tt = t.sign_normalized()?;
    let delta = tt.min_diagonal();
    let norm = op_norm(space, &tt, OpNormMode::Upper)?;
    let window = required_window(space, norm, delta, kappa, len);
    let threshold = (1.0 - kappa) * delta * len as f64;
    let signs = balanced_signs(len)?;
    let mat = tt.matrix();

    let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut chosen_signs: Vec<Vec<i8>> = Vec::with_capacity(m);
    let mut diagonal = Vec::with_capacity(m);
    let mut tolerances = Vec::with_capacity(m);
    let mut tolerance_met = Vec::with_capacity(m);
    let mut full_windows = 0;
    let mut cursor = 0;
    for i in 0..m {
        let reserve = (m - i - 1) * len;
        let mut end = (cursor + window).min(n - reserve);
        if end - cursor >= window {
            full_windows += 1;
        }
        while end - cursor > len && omega_size(end - cursor, len) > BRUTE_LIMIT {
            end -= 1;
        }
        let cands: Vec<Vec<usize>> = (cursor..end).combinations(len).collect();
        let scored: Vec<Scored> = cands
            .par_iter()
            .flat_map_iter(|b| {
                let (prev_b, prev_e) = (&blocks, &chosen_signs);
                signs.iter().map(move |e| {
                    let value = cross_value(mat, b, e, b, e);
                    let cross = prev_b
                        .iter()
                        .zip(prev_e)
                        .map(|(pb, pe)| {
                            cross_value(mat, pb, pe, b, e)
                                .abs()
                                .max(cross_value(mat, b, e, pb, pe).abs())
                        })
                        .fold(0.0, f64::max);
                    Scored {
                        block: b.clone(),
                        signs: e.clone(),
                        value,
                        cross,
                    }
                })
            })
            .collect();
        let tol = cross_tolerance(i + 1, kappa, delta, space.cd());
        let qualifying = || scored.iter().filter(|s| s.value >= threshold);
        let pick = qualifying().find(|s| s.cross <= tol).or_else(|| {
            qualifying().fold(None, |best: Option<&Scored>, s| match best {
                Some(b) if b.cross <= s.cross => Some(b),
                _ => Some(s),
            })
        });
        let Some(pick) = pick else {
            let best = scored
                .iter()
                .map(|s| s.value)
                .fold(f64::NEG_INFINITY, f64::max);
            return Err(Error::SearchExhausted {
                evaluated: scored.len() as u128,
                best_value: best,
                threshold,
            });
        };
        tolerances.push(tol);
        tolerance_met.push(pick.cross <= tol);
        diagonal.push(pick.value);
        cursor = pick.block[len - 1] + 1;
        blocks.push(pick.block.clone());
        chosen_signs.push(pick.signs.clone());
    }
    let system = BlockSystem::new(len, blocks, chosen_signs)?;
    let gamma = (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| system.pairing(mat, j, i).abs())
        .fold(0.0, f64::max);
    Ok(GreedyBlocks {
        system,
        diagonal,
        gamma,
        tolerances,
        tolerance_met,
        window,
        full_windows,
        threshold,
        kappa,
    })
}

/// `1/(2 + 4C_u⁵C_s³/(ηδ))`.
pub fn default_kappa(space: &SpaceSpec, delta: f64, eta: f64) -> f64 {
    1.0 / (2.0 + 4.0 * space.cu().powi(5) * space.cs().powi(3) / (eta * delta))
}

/// `2C_u⁵C_s³/δ + η`.
pub fn factorization_target(space: &SpaceSpec, delta: f64, eta: f64) -> f64 {
    2.0 * space.cu().powi(5) * space.cs().powi(3) / delta + eta
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockFactorization {
    pub system: BlockSystem,
    /// `E = Q·V`, `m×n`.
    #[serde(rename = "E", with = "matrix_rows")]
    pub e: DMatrix<f64>,
    /// `F = M·B/L`, `n×m`.
    #[serde(rename = "F", with = "matrix_rows")]
    pub f: DMatrix<f64>,
    /// Spectral norm of `E T F − I_m`.
    pub residual: f64,
    pub norm_e: f64,
    pub norm_f: f64,
    pub norm_product: f64,
    pub norms_exact: bool,
    /// `‖G − I‖` with `G[i][j] = ⟨T̃b_j, d_i⟩/⟨T̃b_i, d_i⟩`.
    pub g_offdiag_norm: f64,
    /// `‖G − I‖ < 1`, so `G` is invertible by the Neumann series.
    pub neumann_certified: bool,
    pub target: f64,
    pub warning: Option<String>,
}

/// Builds `E` and `F` from a given block system.
///
/// `Z = span{b_j}` is handled in `b`-coordinates: there `P T̃ J` is the matrix `G`, so
/// `V = G⁻¹·diag(1/c)·Q` and `E = Q·B·V = L·V`.
pub fn factor_with_system(
    space: &SpaceSpec,
    t: &Operator,
    system: &BlockSystem,
    eta: f64,
) -> Result<BlockFactorization> {
    let n = t.dim();
    if n != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: n,
        });
    }
    system.require_fits(n)?;
    let m = system.count();
    let multiplier = t.multiplier()?;
    let tt = t.compose(&multiplier);
    let mat = tt.matrix();
    let c: Vec<f64> = (0..m).map(|i| system.pairing(mat, i, i)).collect();
    if let Some(j) = c.iter().position(|&v| v == 0.0) {
        return Err(Error::Singular(format!(
            "block diagonal <T b_{0}, d_{0}> vanishes",
            j + 1
        )));
    }
    let g = DMatrix::from_fn(m, m, |i, j| system.pairing(mat, j, i) / c[i]);
    let small = space.restrict(m)?;
    let (g_offdiag_norm, _) = best_matrix_norm(&small, &(&g - DMatrix::identity(m, m)))?;
    let neumann_certified = g_offdiag_norm < 1.0;
    let warning = (!neumann_certified).then(|| {
        format!(
            "||G - I|| = {g_offdiag_norm} >= 1; inverting G directly without a Neumann certificate"
        )
    });
    let g_inv = inverse(&g).ok_or_else(|| Error::Singular("block matrix G is singular".into()))?;
    let (b, q) = build_bq(&small, space, system)?;
    let p_coord = DMatrix::from_fn(m, n, |i, k| q[(i, k)] / c[i]);
    let lf = system.block_len() as f64;
    let e = (g_inv * p_coord) * lf;
    let f = multiplier.matrix() * &b / lf;
    let etf = &e * t.matrix() * &f;
    let residual = spectral_norm(&(etf - DMatrix::identity(m, m)));
    let (norm_e, ee) = best_matrix_norm(space, &e)?;
    let (norm_f, ef) = best_matrix_norm(space, &f)?;
    Ok(BlockFactorization {
        system: system.clone(),
        e,
        f,
        residual,
        norm_e,
        norm_f,
        norm_product: norm_e * norm_f,
        norms_exact: ee && ef,
        g_offdiag_norm,
        neumann_certified,
        target: factorization_target(space, tt.min_diagonal(), eta),
        warning,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoFactorization {
    pub blocks: GreedyBlocks,
    pub factorization: BlockFactorization,
}

/// Greedy blocks followed by [`factor_with_system`]; `kappa` defaults to [`default_kappa`].
pub fn demo_factorization(
    space: &SpaceSpec,
    t: &Operator,
    m: usize,
    len: usize,
    kappa: Option<f64>,
    eta: f64,
) -> Result<DemoFactorization> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "eta must be positive, got {eta}"
        )));
    }
    let delta = t.diagonal_delta();
    if delta == 0.0 {
        let index = t.diag().position(|v| v == 0.0).unwrap_or(0);
        return Err(Error::SingularDiagonal { index });
    }
    let kappa = kappa.unwrap_or_else(|| default_kappa(space, delta, eta));
    let blocks = greedy_blocks(space, t, m, len, kappa)?;
    let factorization = factor_with_system(space, t, &blocks.system, eta)?;
    Ok(DemoFactorization {
        blocks,
        factorization,
    })
}
