//! Seeded random operators and block systems for checks and experiments.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::blockfact::BlockSystem;
use crate::operators::Operator;

/// Diagonal uniform in `[diag_lo, diag_hi]` (positive), off-diagonal uniform in
/// `[−off, off]`.
pub fn random_positive_diagonal<R: Rng>(
    rng: &mut R,
    n: usize,
    diag_lo: f64,
    diag_hi: f64,
    off: f64,
) -> Operator {
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.random_range(diag_lo..=diag_hi)
        } else {
            rng.random_range(-off..=off)
        }
    });
    Operator::from_matrix(m).expect("generated entries are finite")
}

/// Entries uniform in `[−1, 1]` everywhere.
pub fn random_dense<R: Rng>(rng: &mut R, n: usize) -> Operator {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    Operator::from_matrix(m).expect("generated entries are finite")
}

/// `I + ε·N` with `N` a random ±1 matrix vanishing on the diagonal.
pub fn perturbed_identity<R: Rng>(rng: &mut R, n: usize, eps: f64) -> Operator {
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if rng.random::<bool>() {
            eps
        } else {
            -eps
        }
    });
    Operator::from_matrix(m).expect("generated entries are finite")
}

/// `m` interval-ordered blocks of size `len` at random positions in `{0, …, n−1}`.
///
/// Panics if `m·len > n`.
pub fn random_block_system<R: Rng>(rng: &mut R, n: usize, m: usize, len: usize) -> BlockSystem {
    assert!(m * len <= n, "{m} blocks of size {len} do not fit in {n}");
    let mut picked = index::sample(rng, n, m * len).into_vec();
    picked.sort_unstable();
    let blocks: Vec<Vec<usize>> = picked
        .into_iter()
        .chunks(len)
        .into_iter()
        .map(Iterator::collect)
        .collect();
    let signs = (0..m)
        .map(|_| {
            let mut e: Vec<i8> = (0..len).map(|k| if k < len / 2 { 1 } else { -1 }).collect();
            e.shuffle(rng);
            e
        })
        .collect();
    BlockSystem::new(len, blocks, signs).expect("generated system is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_respect_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_positive_diagonal(&mut rng, 6, 1.0, 2.0, 0.1);
        assert!(t.min_diagonal() >= 1.0);
        let p = perturbed_identity(&mut rng, 5, 0.05);
        assert!(p.matrix().iter().all(|v| *v == 1.0 || v.abs() == 0.05));
        let s = random_block_system(&mut rng, 20, 3, 4);
        assert_eq!(s.count(), 3);
        assert!(s.span_end() <= 20);
    }

    #[test]
    fn generators_are_seeded() {
        let a = random_dense(&mut ChaCha8Rng::seed_from_u64(9), 4);
        let b = random_dense(&mut ChaCha8Rng::seed_from_u64(9), 4);
        assert_eq!(a, b);
    }
}
