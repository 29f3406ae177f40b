//! Invariant suites run by `rib verify`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::blockfact::{bq_norms, build_bq};
use crate::error::{Error, Result};
use crate::signavg::{
    block_search, cond_average_brute, cond_average_closed, diag_lower_bound, pair_correlation_at,
    ExhaustiveSearch,
};
use crate::spaces::{SpaceSpec, TauMode, TAU_BRUTE_MAX};
use crate::testgen::{random_block_system, random_dense, random_positive_diagonal};

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: String,
    pub passed: bool,
    pub cases: usize,
    /// Largest observed violation margin or error, whichever the check measures.
    pub worst: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
}

pub trait VerifySuite: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, cfg: &VerifyConfig) -> Result<Vec<CheckRow>>;
}

/// Accumulates one check over many cases, keeping the first counterexample.
struct Tally {
    suite: &'static str,
    check: String,
    cases: usize,
    worst: f64,
    failed: Option<Value>,
}

impl Tally {
    fn new(suite: &'static str, check: impl Into<String>) -> Self {
        Self {
            suite,
            check: check.into(),
            cases: 0,
            worst: 0.0,
            failed: None,
        }
    }

    fn record(&mut self, error: f64, ok: bool, example: impl FnOnce() -> Value) {
        self.cases += 1;
        self.worst = self.worst.max(error);
        if !ok && self.failed.is_none() {
            self.failed = Some(example());
        }
    }

    fn finish(self) -> CheckRow {
        CheckRow {
            suite: self.suite,
            check: self.check,
            passed: self.failed.is_none(),
            cases: self.cases,
            worst: self.worst,
            counterexample: self.failed,
        }
    }
}

fn family_spaces(dim: usize) -> Vec<(&'static str, SpaceSpec)> {
    vec![
        ("l1", SpaceSpec::lp(1.0, dim).expect("valid")),
        ("l2", SpaceSpec::lp(2.0, dim).expect("valid")),
        ("linf", SpaceSpec::lp(f64::INFINITY, dim).expect("valid")),
    ]
}

pub struct AveragingSuite;

impl VerifySuite for AveragingSuite {
    fn name(&self) -> &'static str {
        "averaging"
    }

    fn run(&self, cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
        let mut rows = Vec::new();
        for len in [2usize, 4, 6, 8] {
            let expect = -1.0 / (len as f64 - 1.0);
            let mut tally = Tally::new(self.name(), format!("pair correlation L={len}"));
            for k in 0..len {
                for l in (0..len).filter(|&l| l != k) {
                    let err = (pair_correlation_at(len, k, l)? - expect).abs();
                    tally.record(
                        err,
                        err <= 1e-14,
                        || json!({"L": len, "k": k + 1, "l": l + 1}),
                    );
                }
            }
            rows.push(tally.finish());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut tally = Tally::new(self.name(), "closed form equals brute average");
        for _ in 0..cfg.trials {
            let len = if rng.random::<bool>() { 2 } else { 4 };
            let n = rng.random_range(len.max(2)..=8);
            let t = random_dense(&mut rng, n);
            let a: Vec<usize> = (0..n).collect();
            let closed = cond_average_closed(&t, &a, len)?;
            let brute = cond_average_brute(&t, &a, len)?;
            let err = (closed - brute).abs();
            tally.record(err, err <= 1e-12, || json!({"L": len, "T": t.rows()}));
        }
        rows.push(tally.finish());
        Ok(rows)
    }
}

pub struct DiagLemmaSuite;

impl VerifySuite for DiagLemmaSuite {
    fn name(&self) -> &'static str {
        "diaglemma"
    }

    fn run(&self, cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
        let mut rows = Vec::new();
        let n = 10;
        let all: Vec<usize> = (0..n).collect();
        for (label, space) in family_spaces(n) {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut tally =
                Tally::new(self.name(), format!("average above lower bound on {label}"));
            for _ in 0..cfg.trials {
                let off = [0.01, 0.1, 1.0][rng.random_range(0..3)];
                let t = random_positive_diagonal(&mut rng, n, 0.5, 2.0, off);
                for len in [2, 4] {
                    let avg = cond_average_closed(&t, &all, len)?;
                    let bound = diag_lower_bound(&space, &t, n, len)?;
                    let gap = bound - avg;
                    tally.record(
                        gap.max(0.0),
                        gap <= 1e-12,
                        || json!({"L": len, "average": avg, "bound": bound, "T": t.rows()}),
                    );
                }
            }
            rows.push(tally.finish());
        }
        let n = 48;
        for (label, space) in family_spaces(n) {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
            let mut tally = Tally::new(self.name(), format!("exhaustive block search on {label}"));
            for _ in 0..cfg.trials {
                let t = random_positive_diagonal(&mut rng, n, 1.0, 1.5, 0.01);
                match block_search(&space, &t, 2, 0.5, &ExhaustiveSearch) {
                    Ok(out) => {
                        let short = out.threshold - out.pair.value;
                        tally.record(short.max(0.0), short <= 0.0, || json!({"T": t.rows()}))
                    }
                    Err(e) => tally.record(
                        f64::INFINITY,
                        false,
                        || json!({"error": e.to_string(), "T": t.rows()}),
                    ),
                }
            }
            rows.push(tally.finish());
        }
        Ok(rows)
    }
}

pub struct BlocksSuite;

impl VerifySuite for BlocksSuite {
    fn name(&self) -> &'static str {
        "blocks"
    }

    fn run(&self, cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
        let n = 24;
        let mut rows = Vec::new();
        for (label, space) in family_spaces(n) {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut exact = Tally::new(self.name(), format!("QB = L*I on {label}"));
            let mut norms = Tally::new(self.name(), format!("||B||, ||Q|| <= Cu*Cs*L on {label}"));
            for _ in 0..cfg.trials {
                let len = if rng.random::<bool>() { 2 } else { 4 };
                let m = rng.random_range(1..=n / len);
                let sys = random_block_system(&mut rng, n, m, len);
                let (b, q) = build_bq(&space.restrict(m)?, &space, &sys)?;
                let qb = &q * &b;
                let target = nalgebra::DMatrix::<f64>::identity(m, m) * len as f64;
                let ok = qb == target;
                exact.record(if ok { 0.0 } else { 1.0 }, ok, || {
                    serde_json::to_value(&sys).unwrap_or_default()
                });
                let nm = bq_norms(&space, &sys, &b, &q)?;
                let excess = nm.norm_b.max(nm.norm_q) - nm.bound;
                norms.record(excess.max(0.0), excess <= 1e-12, || {
                    serde_json::to_value(&sys).unwrap_or_default()
                });
            }
            rows.push(exact.finish());
            rows.push(norms.finish());
        }
        Ok(rows)
    }
}

pub struct NormsSuite;

/// Largest `m` for the λ·μ product check.
pub const PRODUCT_MAX_M: usize = 256;

impl VerifySuite for NormsSuite {
    fn name(&self) -> &'static str {
        "norms"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
        let mut rows = Vec::new();
        let d = PRODUCT_MAX_M;
        let mut spaces = family_spaces(d);
        spaces.push(("l1.5", SpaceSpec::lp(1.5, d)?));
        spaces.push(("l3", SpaceSpec::lp(3.0, d)?));
        let harmonic = std::sync::Arc::new(crate::spaces::Lorentz::harmonic(d)?);
        spaces.push(("lorentz-harmonic", SpaceSpec::new(harmonic, d)?));
        for (label, space) in &spaces {
            let mut tally = Tally::new(self.name(), format!("lambda*mu <= 2*Cu*Cs*m on {label}"));
            for m in 1..=d {
                let (l, u) = space.lambda_mu(m)?;
                let excess = l * u - 2.0 * space.cu() * space.cs() * m as f64;
                let ok = space.check_lambda_mu_product(m)?;
                tally.record(
                    excess.max(0.0),
                    ok,
                    || json!({"m": m, "lambda": l, "mu": u}),
                );
            }
            rows.push(tally.finish());
        }
        for (label, space) in family_spaces(TAU_BRUTE_MAX) {
            let mut tally = Tally::new(
                self.name(),
                format!("symmetric tau equals brute tau on {label}"),
            );
            for m in 2..=TAU_BRUTE_MAX {
                let sym = space.tau(m, TauMode::Symmetric)?;
                let brute = space.tau(m, TauMode::Brute)?;
                let err = (sym - brute).abs();
                tally.record(
                    err,
                    err <= 1e-12,
                    || json!({"m": m, "symmetric": sym, "brute": brute}),
                );
            }
            rows.push(tally.finish());
        }
        Ok(rows)
    }
}

/// Name → suite; `all` runs every suite in name order.
pub struct VerifyRegistry {
    suites: BTreeMap<&'static str, Box<dyn VerifySuite>>,
}

impl Default for VerifyRegistry {
    fn default() -> Self {
        let mut reg = Self {
            suites: BTreeMap::new(),
        };
        reg.register(Box::new(AveragingSuite));
        reg.register(Box::new(DiagLemmaSuite));
        reg.register(Box::new(BlocksSuite));
        reg.register(Box::new(NormsSuite));
        reg
    }
}

impl VerifyRegistry {
    pub fn register(&mut self, suite: Box<dyn VerifySuite>) {
        self.suites.insert(suite.name(), suite);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.suites.keys().copied().collect()
    }

    pub fn run(&self, name: &str, cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
        if name == "all" {
            let mut rows = Vec::new();
            for suite in self.suites.values() {
                rows.extend(suite.run(cfg)?);
            }
            return Ok(rows);
        }
        let suite = self.suites.get(name).ok_or_else(|| Error::Unknown {
            kind: "verify suite",
            name: name.into(),
            known: format!("all, {}", self.names().join(", ")),
        })?;
        suite.run(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: VerifyConfig = VerifyConfig { trials: 5, seed: 3 };

    #[test]
    fn suites_pass_small() {
        let reg = VerifyRegistry::default();
        for name in ["averaging", "blocks", "diaglemma"] {
            let rows = reg.run(name, &CFG).unwrap();
            assert!(rows.iter().all(|r| r.passed), "{name}: {rows:?}");
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(
            VerifyRegistry::default().run("nope", &CFG),
            Err(Error::Unknown { .. })
        ));
    }
}
