//! Balanced-sign combinatorics.
//!
//! For an index set `B` of even size `L`, the balanced signs are the `ε ∈ {±1}^B` with
//! `Σ ε_k = 0`. A pair `(B, ε)` defines `b = Σ ε_k e_k` and `d = Σ ε_k e_k*`, and
//! `⟨T b, d⟩ = Σ_{k,l ∈ B} ε_k ε_l ⟨T e_k, e_l*⟩`. Averaging this over every pair inside a
//! set `A` has a closed form, and the closed form is bounded below in terms of the diagonal
//! of `T`, `‖T‖` and ν; the block search exploits that to find a pair that keeps most of
//! the diagonal.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use nalgebra::DMatrix;
use num_integer::binomial;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{op_norm, OpNormMode, Operator};
use crate::spaces::SpaceSpec;

/// Cap on the number of `(B, ε)` outcomes any brute-force enumeration will visit.
pub const BRUTE_LIMIT: u128 = 1_000_000;

/// A block `B` (sorted, 0-based) with balanced signs and the value `⟨T b, d⟩` it achieved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockPair {
    pub block: Vec<usize>,
    pub signs: Vec<i8>,
    pub value: f64,
}

impl BlockPair {
    pub fn b_vector(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (&k, &s) in self.block.iter().zip(&self.signs) {
            v[k] = f64::from(s);
        }
        v
    }

    /// Same coordinates as `b`; the dual basis is the coordinate basis.
    pub fn d_vector(&self, n: usize) -> Vec<f64> {
        self.b_vector(n)
    }
}

fn check_even(len: usize) -> Result<()> {
    if len == 0 || len % 2 == 1 {
        return Err(Error::OddBlockSize(len));
    }
    Ok(())
}

/// Number of outcomes in Ω_L^A for |A| = `n`: `C(n, L)·C(L, L/2)`.
pub fn omega_size(n: usize, len: usize) -> u128 {
    if len > n {
        return 0;
    }
    binomial(n as u128, len as u128) * binomial(len as u128, (len / 2) as u128)
}

/// All balanced sign vectors of length `len`, lexicographic with `+1` before `−1`.
pub fn balanced_signs(len: usize) -> Result<Vec<Vec<i8>>> {
    check_even(len)?;
    let count = binomial(len as u128, (len / 2) as u128);
    if count > BRUTE_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: BRUTE_LIMIT,
        });
    }
    // bit (len-1-pos) set means ε_pos = −1, so ascending masks are lexicographic
    Ok((0u64..1 << len)
        .filter(|m| m.count_ones() as usize == len / 2)
        .map(|m| {
            (0..len)
                .map(|pos| if m >> (len - 1 - pos) & 1 == 1 { -1 } else { 1 })
                .collect()
        })
        .collect())
}

/// `E(B)` for an index set `B`; the vectors are indexed like `B`.
pub fn enumerate_balanced(block: &[usize]) -> Result<Vec<Vec<i8>>> {
    balanced_signs(block.len())
}

/// Average of `ε_k ε_l` over `E(B)` for positions `k ≠ l`, computed by enumeration.
pub fn pair_correlation_at(len: usize, k: usize, l: usize) -> Result<f64> {
    if k == l || k >= len || l >= len {
        return Err(Error::OutOfRange(format!(
            "need distinct positions below {len}, got {k} and {l}"
        )));
    }
    let signs = balanced_signs(len)?;
    let total: i64 = signs
        .iter()
        .map(|e| i64::from(e[k]) * i64::from(e[l]))
        .sum();
    Ok(total as f64 / signs.len() as f64)
}

/// Average of `ε_1 ε_2` over `E(B)` with `|B| = len`; equals `−1/(len − 1)`.
pub fn pair_correlation(len: usize) -> Result<f64> {
    pair_correlation_at(len, 0, 1)
}

/// `⟨T b, d⟩` for the block pair given by `block` and `signs`.
pub fn block_value(t: &DMatrix<f64>, block: &[usize], signs: &[i8]) -> f64 {
    cross_value(t, block, signs, block, signs)
}

/// `⟨T b_from, d_to⟩ = Σ_{k ∈ from, l ∈ to} ε_k ε_l T[l][k]`.
pub fn cross_value(
    t: &DMatrix<f64>,
    from: &[usize],
    from_signs: &[i8],
    to: &[usize],
    to_signs: &[i8],
) -> f64 {
    let mut acc = 0.0;
    for (&k, &ek) in from.iter().zip(from_signs) {
        for (&l, &el) in to.iter().zip(to_signs) {
            acc += f64::from(ek * el) * t[(l, k)];
        }
    }
    acc
}

fn check_index_set(t: &Operator, a: &[usize], len: usize) -> Result<()> {
    check_even(len)?;
    if len > a.len() {
        return Err(Error::OutOfRange(format!(
            "block size {len} exceeds |A| = {}",
            a.len()
        )));
    }
    if let Some(&bad) = a.iter().find(|&&k| k >= t.dim()) {
        return Err(Error::OutOfRange(format!(
            "index {bad} outside an operator of dimension {}",
            t.dim()
        )));
    }
    if a.iter().duplicates().next().is_some() {
        return Err(Error::OutOfRange("index set A has repeated entries".into()));
    }
    Ok(())
}

/// Mean of `⟨T b, d⟩` over Ω_L^A by the closed form `(L/N)·B1 − L/(N(N−1))·B2`,
/// with `B1` the diagonal sum and `B2` the off-diagonal sum of `T` on `A`.
pub fn cond_average_closed(t: &Operator, a: &[usize], len: usize) -> Result<f64> {
    check_index_set(t, a, len)?;
    let n = a.len() as f64;
    let l = len as f64;
    let m = t.matrix();
    let b1: f64 = a.iter().map(|&k| m[(k, k)]).sum();
    let total: f64 = a
        .iter()
        .flat_map(|&k| a.iter().map(move |&j| m[(j, k)]))
        .sum();
    let b2 = total - b1;
    Ok(l / n * b1 - l / (n * (n - 1.0)) * b2)
}

/// Mean of `⟨T b, d⟩` over Ω_L^A by visiting every outcome.
pub fn cond_average_brute(t: &Operator, a: &[usize], len: usize) -> Result<f64> {
    check_index_set(t, a, len)?;
    let count = omega_size(a.len(), len);
    if count > BRUTE_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: BRUTE_LIMIT,
        });
    }
    let signs = balanced_signs(len)?;
    let blocks: Vec<Vec<usize>> = a.iter().copied().combinations(len).collect();
    let m = t.matrix();
    let per_block: Vec<f64> = blocks
        .par_iter()
        .map(|b| signs.iter().map(|e| block_value(m, b, e)).sum())
        .collect();
    Ok(per_block.iter().sum::<f64>() / count as f64)
}

/// `[δ − C_d·‖T‖·ν(N)/(N−1)]·L` with δ the signed diagonal minimum and `‖T‖` the
/// certified upper operator norm.
pub fn diag_lower_bound(space: &SpaceSpec, t: &Operator, n_avg: usize, len: usize) -> Result<f64> {
    check_even(len)?;
    t.require_positive_diagonal()?;
    if n_avg < 2 || n_avg < len {
        return Err(Error::OutOfRange(format!(
            "need N >= max(2, L) (N = {n_avg}, L = {len})"
        )));
    }
    let delta = t.min_diagonal();
    let norm = op_norm(space, t, OpNormMode::Upper)?;
    let nu = space.nu(n_avg)?.value;
    Ok((delta - space.cd() * norm * nu / (n_avg as f64 - 1.0)) * len as f64)
}

/// `max(L, 1 + ⌈2·C_d²·C_u·C_s³·‖T‖²/(κ²δ²)⌉)`: the size of `A` for which the average,
/// and hence the best pair, reaches `(1−κ)δL`.
pub fn required_window(space: &SpaceSpec, norm: f64, delta: f64, kappa: f64, len: usize) -> usize {
    let ratio = 2.0 * space.cd().powi(2) * space.cu() * space.cs().powi(3) * norm * norm
        / (kappa * kappa * delta * delta);
    // saturating float → int cast
    let n = 1usize.saturating_add(ratio.ceil() as usize);
    n.max(len)
}

/// A way of finding a pair `(B, ε)` with `B ⊂ candidates`, `|B| = len`, `⟨T b, d⟩ ≥ threshold`.
pub trait BlockSearch: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn search(
        &self,
        t: &DMatrix<f64>,
        candidates: &[usize],
        len: usize,
        threshold: f64,
    ) -> Result<BlockPair>;
}

/// Visits every outcome and returns the best one (first in lexicographic order on ties).
#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveSearch;

impl BlockSearch for ExhaustiveSearch {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn search(
        &self,
        t: &DMatrix<f64>,
        candidates: &[usize],
        len: usize,
        threshold: f64,
    ) -> Result<BlockPair> {
        let count = omega_size(candidates.len(), len);
        if count > BRUTE_LIMIT {
            return Err(Error::TooLarge {
                count,
                limit: BRUTE_LIMIT,
            });
        }
        let signs = balanced_signs(len)?;
        let blocks: Vec<Vec<usize>> = candidates
            .iter()
            .copied()
            .sorted()
            .combinations(len)
            .collect();
        let best = blocks
            .par_iter()
            .enumerate()
            .flat_map_iter(|(bi, b)| {
                signs
                    .iter()
                    .enumerate()
                    .map(move |(si, e)| (block_value(t, b, e), bi, si))
            })
            .reduce_with(|x, y| {
                // larger value wins; ties go to the earlier outcome
                if y.0 > x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) {
                    y
                } else {
                    x
                }
            });
        let Some((value, bi, si)) = best else {
            return Err(Error::OutOfRange(format!(
                "block size {len} exceeds the {} candidates",
                candidates.len()
            )));
        };
        if value < threshold {
            return Err(Error::SearchExhausted {
                evaluated: count,
                best_value: value,
                threshold,
            });
        }
        Ok(BlockPair {
            block: blocks[bi].clone(),
            signs: signs[si].clone(),
            value,
        })
    }
}

/// Random outcomes until one reaches the threshold; budget `10·C(L, L/2)·|candidates|`.
#[derive(Debug, Clone, Copy)]
pub struct SampledSearch {
    pub seed: u64,
}

impl SampledSearch {
    pub fn budget(n: usize, len: usize) -> u128 {
        10 * binomial(len as u128, (len / 2) as u128) * n as u128
    }
}

impl BlockSearch for SampledSearch {
    fn name(&self) -> &'static str {
        "sampled"
    }

    fn search(
        &self,
        t: &DMatrix<f64>,
        candidates: &[usize],
        len: usize,
        threshold: f64,
    ) -> Result<BlockPair> {
        check_even(len)?;
        if len > candidates.len() {
            return Err(Error::OutOfRange(format!(
                "block size {len} exceeds the {} candidates",
                candidates.len()
            )));
        }
        let budget = Self::budget(candidates.len(), len);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut best_value = f64::NEG_INFINITY;
        for _ in 0..budget {
            let mut picked: Vec<(usize, i8)> = index::sample(&mut rng, candidates.len(), len)
                .into_iter()
                .map(|i| candidates[i])
                .zip((0..len).map(|p| if p < len / 2 { 1 } else { -1 }))
                .collect();
            // shuffle signs across positions, then sort by index
            let mut s: Vec<i8> = picked.iter().map(|p| p.1).collect();
            s.shuffle(&mut rng);
            for (p, sign) in picked.iter_mut().zip(s) {
                p.1 = sign;
            }
            picked.sort_unstable_by_key(|p| p.0);
            let block: Vec<usize> = picked.iter().map(|p| p.0).collect();
            let signs: Vec<i8> = picked.iter().map(|p| p.1).collect();
            let value = block_value(t, &block, &signs);
            if value >= threshold {
                return Ok(BlockPair {
                    block,
                    signs,
                    value,
                });
            }
            best_value = best_value.max(value);
        }
        Err(Error::SearchExhausted {
            evaluated: budget,
            best_value,
            threshold,
        })
    }
}

/// Exhaustive within [`BRUTE_LIMIT`], sampled beyond it.
#[derive(Debug, Clone, Copy)]
pub struct AutoSearch {
    pub seed: u64,
}

impl BlockSearch for AutoSearch {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn search(
        &self,
        t: &DMatrix<f64>,
        candidates: &[usize],
        len: usize,
        threshold: f64,
    ) -> Result<BlockPair> {
        if omega_size(candidates.len(), len) <= BRUTE_LIMIT {
            ExhaustiveSearch.search(t, candidates, len, threshold)
        } else {
            SampledSearch { seed: self.seed }.search(t, candidates, len, threshold)
        }
    }
}

type SearchCtor = fn(u64) -> Box<dyn BlockSearch>;

/// Name → block-search strategy.
pub struct BlockSearchRegistry {
    entries: BTreeMap<&'static str, SearchCtor>,
}

impl Default for BlockSearchRegistry {
    fn default() -> Self {
        let mut entries: BTreeMap<&'static str, SearchCtor> = BTreeMap::new();
        entries.insert("auto", |seed| Box::new(AutoSearch { seed }));
        entries.insert("exhaustive", |_| Box::new(ExhaustiveSearch));
        entries.insert("sampled", |seed| Box::new(SampledSearch { seed }));
        Self { entries }
    }
}

impl BlockSearchRegistry {
    pub fn register(&mut self, name: &'static str, ctor: SearchCtor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str, seed: u64) -> Result<Box<dyn BlockSearch>> {
        self.entries
            .get(name)
            .map(|ctor| ctor(seed))
            .ok_or_else(|| Error::Unknown {
                kind: "block search strategy",
                name: name.into(),
                known: self.names().join(", "),
            })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSearchOutcome {
    pub pair: BlockPair,
    /// `N`, the size of the searched set `A = {0, …, N−1}`.
    pub window: usize,
    pub threshold: f64,
    pub delta: f64,
    pub norm: f64,
    pub strategy: &'static str,
}

/// Finds `(B, ε)` inside `{0, …, N−1}` with `⟨T b, d⟩ ≥ (1−κ)δL`, `N` from
/// [`required_window`]. `t` must already have positive diagonal.
pub fn block_search(
    space: &SpaceSpec,
    t: &Operator,
    len: usize,
    kappa: f64,
    strategy: &dyn BlockSearch,
) -> Result<BlockSearchOutcome> {
    check_even(len)?;
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::OutOfRange(format!(
            "kappa must lie in (0, 1), got {kappa}"
        )));
    }
    t.require_positive_diagonal()?;
    let delta = t.min_diagonal();
    let norm = op_norm(space, t, OpNormMode::Upper)?;
    let window = required_window(space, norm, delta, kappa, len);
    if t.dim() < window {
        return Err(Error::InsufficientDimension {
            needed: window,
            have: t.dim(),
        });
    }
    let threshold = (1.0 - kappa) * delta * len as f64;
    let candidates: Vec<usize> = (0..window).collect();
    let pair = strategy.search(t.matrix(), &candidates, len, threshold)?;
    Ok(BlockSearchOutcome {
        pair,
        window,
        threshold,
        delta,
        norm,
        strategy: strategy.name(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_offdiag(n: usize, c: f64) -> Operator {
        Operator::from_matrix(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { c })).unwrap()
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(
            enumerate_balanced(&[1, 2]).unwrap(),
            vec![vec![1, -1], vec![-1, 1]]
        );
        assert_eq!(enumerate_balanced(&[0, 1, 2, 3]).unwrap().len(), 6);
        assert!(matches!(
            enumerate_balanced(&[0, 1, 2]),
            Err(Error::OddBlockSize(3))
        ));
        let four = balanced_signs(4).unwrap();
        assert!(four.windows(2).all(|w| {
            // + sorts before −
            let key = |v: &Vec<i8>| v.iter().map(|&s| (s < 0) as u8).collect::<Vec<_>>();
            key(&w[0]) < key(&w[1])
        }));
    }

    #[test]
    fn pair_correlation_examples() {
        assert_eq!(pair_correlation(2).unwrap(), -1.0);
        assert!((pair_correlation(4).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert!((pair_correlation(6).unwrap() + 0.2).abs() < 1e-15);
        assert!(pair_correlation(5).is_err());
    }

    #[test]
    fn closed_average_examples() {
        let a: Vec<usize> = (0..4).collect();
        assert_eq!(
            cond_average_closed(&Operator::identity(4), &a, 2).unwrap(),
            2.0
        );
        let ones = uniform_offdiag(4, 1.0);
        assert!(cond_average_closed(&ones, &a, 2).unwrap().abs() < 1e-15);
        let half = uniform_offdiag(5, 0.5);
        let a5: Vec<usize> = (0..5).collect();
        assert!((cond_average_closed(&half, &a5, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!(cond_average_closed(&half, &a5[..1], 2).is_err());
    }

    #[test]
    fn brute_average_examples() {
        let a: Vec<usize> = (0..4).collect();
        assert_eq!(
            cond_average_brute(&Operator::identity(4), &a, 2).unwrap(),
            2.0
        );
        assert!(
            cond_average_brute(&uniform_offdiag(4, 1.0), &a, 2)
                .unwrap()
                .abs()
                < 1e-15
        );
        let big = Operator::identity(60);
        let a60: Vec<usize> = (0..60).collect();
        assert!(matches!(
            cond_average_brute(&big, &a60, 6),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn lower_bound_examples() {
        let l2 = SpaceSpec::lp(2.0, 10).unwrap();
        let b = diag_lower_bound(&l2, &Operator::identity(10), 10, 2).unwrap();
        assert!((b - 4.0 / 3.0).abs() < 1e-9);
        let l1 = SpaceSpec::lp(1.0, 5).unwrap();
        let b = diag_lower_bound(&l1, &Operator::identity(5), 5, 2).unwrap();
        assert!((b - 1.5).abs() < 1e-12);
        let neg = Operator::diagonal(&[1.0, -1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            diag_lower_bound(&l1, &neg, 5, 2),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn block_search_identity() {
        let l2 = SpaceSpec::lp(2.0, 9).unwrap();
        let out = block_search(&l2, &Operator::identity(9), 2, 0.5, &ExhaustiveSearch).unwrap();
        assert_eq!(out.window, 9);
        assert_eq!(out.pair.value, 2.0);
        assert_eq!(out.pair.block, vec![0, 1]);
        let small = SpaceSpec::lp(2.0, 8).unwrap();
        assert!(matches!(
            block_search(&small, &Operator::identity(8), 2, 0.5, &ExhaustiveSearch),
            Err(Error::InsufficientDimension { needed: 9, have: 8 })
        ));
    }

    #[test]
    fn exhaustive_finds_pair_above_average() {
        // unit diagonal, off-diagonal 0.5: every pair with ε = (+,−) gives 2 − 2·0.5 = 1
        let t = uniform_offdiag(5, 0.5);
        let a: Vec<usize> = (0..5).collect();
        let pair = ExhaustiveSearch.search(t.matrix(), &a, 2, 0.8).unwrap();
        assert!(pair.value >= 0.8);
        assert!(pair.value >= cond_average_closed(&t, &a, 2).unwrap() - 1e-12);
    }

    #[test]
    fn sampled_and_auto_agree_on_threshold() {
        let t = uniform_offdiag(5, 0.5);
        let a: Vec<usize> = (0..5).collect();
        let s = SampledSearch { seed: 1 }
            .search(t.matrix(), &a, 2, 0.8)
            .unwrap();
        assert!(s.value >= 0.8);
        assert_eq!(s.signs.iter().map(|&x| i32::from(x)).sum::<i32>(), 0);
        let err = SampledSearch { seed: 1 }
            .search(t.matrix(), &a, 2, 5.0)
            .unwrap_err();
        assert!(err.is_budget_failure());
        assert!(AutoSearch { seed: 0 }
            .search(t.matrix(), &a, 2, 0.8)
            .is_ok());
    }

    #[test]
    fn registry_lookup() {
        let reg = BlockSearchRegistry::default();
        assert_eq!(reg.names(), vec!["auto", "exhaustive", "sampled"]);
        assert_eq!(reg.get("sampled", 3).unwrap().name(), "sampled");
        assert!(reg.get("greedy", 0).is_err());
    }
}
