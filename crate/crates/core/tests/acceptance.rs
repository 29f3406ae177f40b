//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Expected values come from oracles written here (plain loops, closed forms, SVD) rather
//! than from the library routines under test.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rib_core::blockfact::{build_bq, demo_factorization};
use rib_core::ribsel::{factorize, oracle_max_sigma, select_sigma, SelectOptions};
use rib_core::scaling::scaling_table;
use rib_core::signavg::{
    block_search, cond_average_brute, cond_average_closed, diag_lower_bound, pair_correlation_at,
    ExhaustiveSearch,
};
use rib_core::spaces::Lorentz;
use rib_core::testgen::{
    perturbed_identity, random_block_system, random_dense, random_positive_diagonal,
};
use rib_core::{Operator, SpaceSpec, TauMode};

const CORRELATION_TOL: f64 = 1e-14;
const AVERAGE_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;
const EXPONENT_TOL: f64 = 0.02;
const TAU_TOL: f64 = 1e-12;
const MAX_TRIALS: u64 = 100_000;

const C1_LIMIT: Duration = Duration::from_secs(1);
const C2_LIMIT: Duration = Duration::from_secs(10);
const C6_LIMIT: Duration = Duration::from_secs(60);
const C10_LIMIT: Duration = Duration::from_secs(120);

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    out.detail = format!("{} [{:.2}s]", out.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            out.passed = false;
            out.detail = format!("{} exceeds {:.0}s", out.detail, limit.as_secs_f64());
        }
    }
    out
}

fn lp_spaces(n: usize) -> Vec<(&'static str, f64, SpaceSpec)> {
    [("l1", 1.0), ("l2", 2.0), ("linf", f64::INFINITY)]
        .into_iter()
        .map(|(name, p)| (name, p, SpaceSpec::lp(p, n).unwrap()))
        .collect()
}

/// Operator norm on ℓᵖ for p ∈ {1, 2, ∞}, independent of the library.
fn oracle_op_norm(p: f64, m: &DMatrix<f64>) -> f64 {
    if p == 1.0 {
        m.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    } else if p.is_infinite() {
        m.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    } else {
        m.clone().svd(false, false).singular_values.max()
    }
}

/// `‖Σ_{j≤m} e_j‖` on ℓᵖ.
fn oracle_lambda(p: f64, m: usize) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        (m as f64).powf(1.0 / p)
    }
}

fn oracle_mu(p: f64, m: usize) -> f64 {
    let q = if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    };
    oracle_lambda(q, m)
}

/// Mean of `ε_k ε_l` over all balanced sign vectors of length `len`.
fn oracle_correlation(len: usize, k: usize, l: usize) -> f64 {
    let mut sum = 0i64;
    let mut count = 0i64;
    for mask in 0u32..(1 << len) {
        if mask.count_ones() as usize * 2 != len {
            continue;
        }
        let s = |i: usize| if mask >> i & 1 == 1 { -1i64 } else { 1 };
        sum += s(k) * s(l);
        count += 1;
    }
    sum as f64 / count as f64
}

/// Mean of `⟨T b, d⟩` over every block of size `len` in `{0..n}` and every balanced sign.
fn oracle_average(t: &DMatrix<f64>, len: usize) -> f64 {
    let n = t.nrows();
    let mut sum = 0.0;
    let mut count = 0usize;
    for block in (0..n).combinations(len) {
        for mask in 0u32..(1 << len) {
            if mask.count_ones() as usize * 2 != len {
                continue;
            }
            let s = |i: usize| if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
            for (a, &k) in block.iter().enumerate() {
                for (b, &l) in block.iter().enumerate() {
                    sum += s(a) * s(b) * t[(l, k)];
                }
            }
            count += 1;
        }
    }
    sum / count as f64
}

fn oracle_inverse_norm(m: &DMatrix<f64>) -> f64 {
    let inv = m.clone().try_inverse().expect("invertible");
    inv.svd(false, false).singular_values.max()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + x.ln() / k, b + y.ln() / k)
    });
    let sxy: f64 = points
        .iter()
        .map(|&(x, y)| (x.ln() - mx) * (y.ln() - my))
        .sum();
    let sxx: f64 = points.iter().map(|&(x, _)| (x.ln() - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for len in [2usize, 4, 6, 8] {
        let expect = -1.0 / (len as f64 - 1.0);
        for k in 0..len {
            for l in (0..len).filter(|&l| l != k) {
                let brute = oracle_correlation(len, k, l);
                let lib = pair_correlation_at(len, k, l).unwrap();
                worst = worst.max((brute - expect).abs()).max((lib - expect).abs());
            }
        }
    }
    outcome(worst <= CORRELATION_TOL, format!("max error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let len = if trial % 2 == 0 { 2 } else { 4 };
        let n = rng.random_range(len.max(2)..=8);
        let t = random_dense(&mut rng, n);
        let a: Vec<usize> = (0..n).collect();
        let closed = cond_average_closed(&t, &a, len).unwrap();
        let lib_brute = cond_average_brute(&t, &a, len).unwrap();
        let brute = oracle_average(t.matrix(), len);
        worst = worst
            .max((closed - brute).abs())
            .max((lib_brute - brute).abs());
    }
    outcome(
        worst <= AVERAGE_TOL,
        format!("100 operators, max |closed - brute| {worst:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let n = 10;
    let all: Vec<usize> = (0..n).collect();
    let mut violations = 0;
    let mut cases = 0;
    let mut min_slack = f64::INFINITY;
    for (_, p, space) in lp_spaces(n) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let off = [0.01, 0.05, 0.2, 1.0][trial % 4];
            let t = random_positive_diagonal(&mut rng, n, 0.5, 2.0, off);
            let delta = t.min_diagonal();
            let nu = oracle_lambda(p, n - 1).min(oracle_mu(p, n - 1));
            let norm = oracle_op_norm(p, t.matrix());
            for len in [2, 4] {
                let avg = cond_average_closed(&t, &all, len).unwrap();
                let oracle_bound = (delta - norm * nu / (n as f64 - 1.0)) * len as f64;
                let lib_bound = diag_lower_bound(&space, &t, n, len).unwrap();
                let slack = avg - oracle_bound.max(lib_bound);
                min_slack = min_slack.min(slack);
                cases += 1;
                if slack < 0.0 {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {cases} cases, min slack {min_slack:.3e}"),
    )
}

fn criterion_4() -> Outcome {
    let n = 48;
    let kappa = 0.5;
    let mut failures = 0;
    let mut max_window = 0;
    let mut mrng = ChaCha8Rng::seed_from_u64(4);
    for (_, p, space) in lp_spaces(n) {
        for _ in 0..50 {
            let t = random_positive_diagonal(&mut mrng, n, 1.0, 1.5, 0.01);
            let delta = t.min_diagonal();
            let norm = oracle_op_norm(p, t.matrix());
            let oracle_window =
                1 + (2.0 * norm * norm / (kappa * kappa * delta * delta)).ceil() as usize;
            match block_search(&space, &t, 2, kappa, &ExhaustiveSearch) {
                Ok(out) => {
                    max_window = max_window.max(out.window);
                    let pair = &out.pair;
                    let (k, l) = (pair.block[0], pair.block[1]);
                    let (ek, el) = (f64::from(pair.signs[0]), f64::from(pair.signs[1]));
                    let m = t.matrix();
                    let value = m[(k, k)] + m[(l, l)] + ek * el * (m[(l, k)] + m[(k, l)]);
                    let ok = value >= (1.0 - kappa) * delta * 2.0
                        && (value - pair.value).abs() <= 1e-12
                        && out.window >= oracle_window
                        && pair.block.iter().all(|&i| i < out.window);
                    if !ok {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    outcome(
        failures == 0,
        format!("{failures} failures in 150 searches, largest window {max_window}"),
    )
}

fn criterion_5() -> Outcome {
    let n = 24;
    let mut failures = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for (_, p, space) in lp_spaces(n) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let len = if trial % 2 == 0 { 2 } else { 4 };
            let m = rng.random_range(1..=n / len);
            let sys = random_block_system(&mut rng, n, m, len);
            let (b, q) = build_bq(&space.restrict(m).unwrap(), &space, &sys).unwrap();
            let exact = &q * &b == DMatrix::identity(m, m) * len as f64;
            let bound = space.cu() * space.cs() * len as f64;
            let excess = oracle_op_norm(p, &b).max(oracle_op_norm(p, &q)) - bound;
            worst_excess = worst_excess.max(excess);
            if !exact || excess > NORM_TOL {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!(
            "{failures} failures in 60 systems, max(||B||,||Q||) - CuCsL <= {worst_excess:.3e}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let eta: f64 = 1.0;
    let mut details = Vec::new();
    let mut passed = true;
    for n in [64usize, 256, 1024] {
        let mut rng = ChaCha8Rng::seed_from_u64(6 + n as u64);
        let t = perturbed_identity(&mut rng, n, 0.05);
        let space = SpaceSpec::lp(2.0, n).unwrap();
        let mut opts = SelectOptions::new(eta, 600 + n as u64);
        opts.max_trials = MAX_TRIALS;
        let cert = match select_sigma(&space, &t, &opts) {
            Ok(c) => c,
            Err(e) => {
                passed = false;
                details.push(format!("n={n}: {e}"));
                continue;
            }
        };
        let sub = DMatrix::from_fn(cert.sigma.len(), cert.sigma.len(), |i, j| {
            t.entry(cert.sigma[i], cert.sigma[j]) / t.entry(cert.sigma[i], cert.sigma[i])
        });
        let inv = oracle_inverse_norm(&sub);
        let f = factorize(&space, &t, &cert.sigma, eta).unwrap();
        let ok = inv <= 1.0 + eta
            && cert.sigma.len() as f64 >= cert.guarantee_size
            && f.residual <= RESIDUAL_TOL
            && f.norm_product <= f.bound;
        passed &= ok;
        details.push(format!(
            "n={n}: |sigma|={} >= {:.3}, inv={inv:.4}, residual={:.1e}, ||E||||P||={:.4} <= {:.1}, trials={}",
            cert.sigma.len(),
            cert.guarantee_size,
            f.residual,
            f.norm_product,
            f.bound,
            cert.trials_used
        ));
    }
    outcome(passed, details.join("; "))
}

fn criterion_7() -> Outcome {
    let eta: f64 = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut pairs = Vec::new();
    for trial in 0..20 {
        let n = rng.random_range(4..=12);
        let eps = [0.02, 0.05, 0.08, 0.1][trial % 4];
        let t = perturbed_identity(&mut rng, n, eps);
        let space = SpaceSpec::lp(2.0, n).unwrap();
        let sel = select_sigma(&space, &t, &SelectOptions::new(eta, 700 + trial as u64));
        let orc = oracle_max_sigma(&space, &t, eta).unwrap();
        let Ok(sel) = sel else {
            violations += 1;
            continue;
        };
        let check = |sigma: &[usize]| {
            let sub =
                DMatrix::from_fn(sigma.len(), sigma.len(), |i, j| t.entry(sigma[i], sigma[j]));
            oracle_inverse_norm(&sub) <= 1.0 + eta + 1e-12
        };
        if sel.sigma.len() > orc.sigma.len() || !check(&sel.sigma) || !check(&orc.sigma) {
            violations += 1;
        }
        pairs.push(format!("{}/{}", sel.sigma.len(), orc.sigma.len()));
    }
    outcome(
        violations == 0,
        format!(
            "{violations} violations; |select|/|oracle| = {}",
            pairs.join(" ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let eta: f64 = 1.0;
    let sizes: Vec<usize> = (6..=14).map(|k| 1usize << k).collect();
    let guarantee = |tau: f64, n: usize| (eta.min(1.0) / 16.0).sqrt() * (n as f64 / tau).sqrt();
    let l2_oracle: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| (n as f64, guarantee(((n - 1) as f64).sqrt(), n)))
        .collect();
    let l1_oracle: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| (n as f64, guarantee(1.0, n)))
        .collect();
    let l2 = scaling_table(|n| SpaceSpec::lp(2.0, n), &sizes, eta, 8, 0).unwrap();
    let l1 = scaling_table(|n| SpaceSpec::lp(1.0, n), &sizes, eta, 8, 0).unwrap();
    let rows_match = |rows: &[rib_core::scaling::ScalingRow], oracle: &[(f64, f64)]| {
        rows.iter()
            .zip(oracle)
            .all(|(r, o)| (r.guarantee_size - o.1).abs() <= 1e-12 * o.1)
    };
    let e2 = l2[0].exponent.unwrap();
    let e1 = l1[0].exponent.unwrap();
    let ok = (e2 - 0.25).abs() <= EXPONENT_TOL
        && (e1 - 0.5).abs() <= EXPONENT_TOL
        && (slope(&l2_oracle) - e2).abs() <= 1e-12
        && (slope(&l1_oracle) - e1).abs() <= 1e-12
        && rows_match(&l2, &l2_oracle)
        && rows_match(&l1, &l1_oracle);
    outcome(ok, format!("l2 exponent {e2:.4}, l1 exponent {e1:.4}"))
}

fn criterion_9() -> Outcome {
    let d = 256;
    let mut spaces: Vec<(String, Option<f64>, SpaceSpec)> = [1.0, 1.5, 2.0, 3.0, f64::INFINITY]
        .into_iter()
        .map(|p| (format!("l{p}"), Some(p), SpaceSpec::lp(p, d).unwrap()))
        .collect();
    let harmonic = std::sync::Arc::new(Lorentz::harmonic(d).unwrap());
    spaces.push(("lorentz".into(), None, SpaceSpec::new(harmonic, d).unwrap()));
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for (_, p, space) in &spaces {
        for m in 1..=d {
            let (l, u) = space.lambda_mu(m).unwrap();
            if let Some(p) = p {
                if (l - oracle_lambda(*p, m)).abs() > 1e-9 * l
                    || (u - oracle_mu(*p, m)).abs() > 1e-9 * u
                {
                    violations += 1;
                }
            }
            worst_ratio = worst_ratio.max(l * u / (2.0 * space.cu() * space.cs() * m as f64));
            if !space.check_lambda_mu_product(m).unwrap() {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{violations} violations over 6 families, max lambda*mu/(2CuCs m) = {worst_ratio:.4}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, p, space) in lp_spaces(5) {
        for m in 2..=5 {
            let closed = oracle_lambda(p, m - 1).min(oracle_mu(p, m - 1));
            let sym = space.tau(m, TauMode::Symmetric).unwrap();
            let brute = space.tau(m, TauMode::Brute).unwrap();
            worst = worst.max((sym - brute).abs()).max((closed - brute).abs());
        }
    }
    outcome(
        worst <= TAU_TOL,
        format!("max |symmetric - brute| {worst:.2e}"),
    )
}

fn criterion_11() -> Outcome {
    let eta: f64 = 1.0;
    let space = SpaceSpec::lp(2.0, 8).unwrap();
    let t = Operator::identity(8);
    let demo = demo_factorization(&space, &t, 4, 2, None, eta).unwrap();
    let f = &demo.factorization;
    let etf = &f.e * t.matrix() * &f.f;
    let residual = (etf - DMatrix::identity(4, 4)).abs().max();
    let target = 2.0 + eta;
    let product = oracle_op_norm(2.0, &f.e) * oracle_op_norm(2.0, &f.f);
    let ok = f.residual <= RESIDUAL_TOL
        && residual <= RESIDUAL_TOL
        && f.norm_product <= target
        && product <= target + NORM_TOL;
    outcome(
        ok,
        format!(
            "residual {:.1e}, norm product {:.4} <= {target}",
            f.residual, f.norm_product
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            "sign correlation equals -1/(L-1)",
            Some(C1_LIMIT),
            criterion_1,
        ),
        (
            "closed-form average equals brute force",
            Some(C2_LIMIT),
            criterion_2,
        ),
        (
            "average dominates the diagonal lower bound",
            None,
            criterion_3,
        ),
        (
            "exhaustive block search reaches (1-kappa)*delta*L",
            None,
            criterion_4,
        ),
        ("QB = L*I and ||B||, ||Q|| <= CuCsL", None, criterion_5),
        (
            "end-to-end selection and factorization on l2",
            Some(C6_LIMIT),
            criterion_6,
        ),
        ("selection never beats the subset oracle", None, criterion_7),
        (
            "guarantee size exponents 1/4 (l2) and 1/2 (l1)",
            None,
            criterion_8,
        ),
        ("lambda*mu <= 2CuCs m for m <= 256", None, criterion_9),
        (
            "symmetric tau equals brute-force tau",
            Some(C10_LIMIT),
            criterion_10,
        ),
        (
            "identity factors through I on l2_8 with m = 4",
            None,
            criterion_11,
        ),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let out = timed(limit, run);
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}: {name}: {}", i + 1, out.detail);
        if !out.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
