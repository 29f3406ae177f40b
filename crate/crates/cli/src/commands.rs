use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Map, Value};

use rib_core::blockfact::demo_factorization;
use rib_core::io::{fmt_f64, read_matrix, read_space};
use rib_core::ribsel::{
    compute_params, expected_offdiag_bound, factorize, oracle_max_sigma, select_sigma,
    subsymmetric_bound, SelectOptions, RESIDUAL_TOL,
};
use rib_core::scaling::scaling_table;
use rib_core::spaces::Lorentz;
use rib_core::verify::{VerifyConfig, VerifyRegistry};
use rib_core::{op_norm, Error, OpNormMode, Operator, SpaceSpec, TauMode};

use crate::report::{to_value, Failure, RunReport, EXIT_BUDGET, EXIT_INPUT};
use crate::Format;

type CmdResult = Result<ExitCode, Failure>;

/// Matrices up to this dimension are echoed in full.
const ECHO_MAX_DIM: usize = 32;

fn load(space_path: &Path, matrix_path: &Path) -> Result<(SpaceSpec, Operator), Failure> {
    let space = read_space(space_path)
        .map_err(|e| Failure::input(format!("{}: {e}", space_path.display())))?;
    let t = read_matrix(matrix_path)
        .map_err(|e| Failure::input(format!("{}: {e}", matrix_path.display())))?;
    if space.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: t.dim(),
        }
        .into());
    }
    Ok((space, t))
}

fn echo(
    space_path: &Path,
    matrix_path: &Path,
    space: &SpaceSpec,
    t: &Operator,
    params: Value,
) -> Value {
    let mut matrix = Map::new();
    matrix.insert("path".into(), json!(matrix_path.display().to_string()));
    matrix.insert("dim".into(), json!(t.dim()));
    if t.dim() <= ECHO_MAX_DIM {
        matrix.insert("rows".into(), json!(t.rows()));
    }
    json!({
        "space_path": space_path.display().to_string(),
        "space": space.to_json(),
        "matrix": matrix,
        "params": params,
    })
}

fn with_budget_report(
    err: Error,
    command: &'static str,
    inputs: Value,
    started: Instant,
) -> Failure {
    let mut failure = Failure::from(err);
    if failure.code == EXIT_BUDGET {
        let outputs = json!({"error": failure.message});
        failure.report = Some(Box::new(RunReport::new(command, inputs, outputs, started)));
    }
    failure
}

pub fn analyze(space_path: &Path, matrix_path: &Path, eta: f64) -> CmdResult {
    let started = Instant::now();
    let (space, t) = load(space_path, matrix_path)?;
    let n = space.dim();
    let delta = t.diagonal_delta();
    let gamma = op_norm(&space, &t, OpNormMode::Upper)?;
    let gamma_exact = if space.family().has_exact_op_norm(t.matrix()) {
        Some(op_norm(&space, &t, OpNormMode::Exact)?)
    } else {
        None
    };
    let (lambda, mu) = space.lambda_mu(n)?;
    let mut out = json!({
        "n": n,
        "delta": delta,
        "gamma": gamma,
        "gamma_exact": gamma_exact,
        "lambda": lambda,
        "mu": mu,
    });
    let mut product_violation = None;
    for m in 1..=n {
        if !space.check_lambda_mu_product(m)? {
            product_violation = Some(m);
            break;
        }
    }
    out["lambda_mu_product_ok"] = json!(product_violation.is_none());
    out["lambda_mu_product_first_violation"] = json!(product_violation);
    if n >= 2 {
        let mode = if space.is_symmetric() {
            TauMode::Symmetric
        } else {
            TauMode::Upper
        };
        out["nu"] = to_value(&space.nu(n)?);
        out["tau"] = json!(space.tau(n, mode)?);
        out["tau_mode"] = to_value(&mode);
        if delta > 0.0 {
            let params = compute_params(&space, &t, eta, 0, 0)?;
            let mut p = to_value(&params);
            if let Some(map) = p.as_object_mut() {
                map.remove("seed");
                map.remove("max_trials");
            }
            out["selection"] = p;
            out["guarantee_size"] = json!(params.guarantee_size());
            out["window_satisfied"] = json!(params.window_satisfied());
            out["offdiag_bounds"] = to_value(&expected_offdiag_bound(&space, &t, &params)?);
            out["subsymmetric"] =
                to_value(&subsymmetric_bound(&space, n, delta, params.gamma, eta));
        }
    }
    let inputs = echo(space_path, matrix_path, &space, &t, json!({"eta": eta}));
    RunReport::new("analyze", inputs, out, started).print();
    Ok(ExitCode::SUCCESS)
}

pub fn select(
    space_path: &Path,
    matrix_path: &Path,
    eta: f64,
    seed: u64,
    max_trials: u64,
    gamma: Option<f64>,
    out: Option<&Path>,
) -> CmdResult {
    let started = Instant::now();
    let (space, t) = load(space_path, matrix_path)?;
    let params = json!({"eta": eta, "seed": seed, "max_trials": max_trials, "gamma": gamma});
    let inputs = echo(space_path, matrix_path, &space, &t, params);
    let opts = SelectOptions {
        eta,
        seed,
        max_trials,
        gamma,
    };
    let cert = match select_sigma(&space, &t, &opts) {
        Ok(c) => c,
        Err(Error::TrialBudgetExhausted {
            trials,
            best,
            deficit,
        }) => {
            let outputs = json!({
                "error": "trial budget exhausted",
                "trials": trials,
                "best_candidate": best.as_deref().map(to_value),
                "deficit": deficit,
            });
            return Err(Failure {
                code: EXIT_BUDGET,
                message: format!("no sample accepted in {trials} trials (deficit {deficit})"),
                report: Some(Box::new(RunReport::new("select", inputs, outputs, started))),
            });
        }
        Err(e) => return Err(with_budget_report(e, "select", inputs, started)),
    };
    let fact = factorize(&space, &t, &cert.sigma, eta)?;
    let accepted = fact.residual <= RESIDUAL_TOL;
    let outputs = json!({
        "selection": to_value(&cert),
        "factorization": to_value(&fact),
        "accepted": accepted,
    });
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&outputs).expect("outputs serialize");
        fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    RunReport::new("select", inputs, outputs, started).print();
    Ok(if accepted {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "error: factorization residual {} exceeds {RESIDUAL_TOL}",
            fact.residual
        );
        ExitCode::from(EXIT_BUDGET)
    })
}

pub fn verify(suite: &str, trials: usize, seed: u64) -> CmdResult {
    let started = Instant::now();
    let rows = VerifyRegistry::default().run(suite, &VerifyConfig { trials, seed })?;
    let passed = rows.iter().all(|r| r.passed);
    for r in &rows {
        eprintln!(
            "{} {}/{}: {} cases, worst {:.3e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.check,
            r.cases,
            r.worst
        );
    }
    let inputs = json!({"suite": suite, "trials": trials, "seed": seed});
    let outputs = json!({"passed": passed, "checks": to_value(&rows)});
    RunReport::new("verify", inputs, outputs, started).print();
    Ok(if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INPUT)
    })
}

pub fn oracle(space_path: &Path, matrix_path: &Path, eta: f64, seed: Option<u64>) -> CmdResult {
    let started = Instant::now();
    let (space, t) = load(space_path, matrix_path)?;
    let inputs = echo(
        space_path,
        matrix_path,
        &space,
        &t,
        json!({"eta": eta, "seed": seed}),
    );
    let best = oracle_max_sigma(&space, &t, eta)?;
    let mut outputs = json!({"oracle": to_value(&best), "size": best.sigma.len()});
    if let Some(seed) = seed {
        match select_sigma(&space, &t, &SelectOptions::new(eta, seed)) {
            Ok(cert) => {
                outputs["select"] = json!({
                    "sigma": cert.sigma.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    "size": cert.sigma.len(),
                    "inverse_norm": cert.inverse_norm,
                });
                outputs["oracle_dominates"] = json!(cert.sigma.len() <= best.sigma.len());
            }
            Err(e) => outputs["select"] = json!({"error": e.to_string()}),
        }
    }
    RunReport::new("oracle", inputs, outputs, started).print();
    Ok(ExitCode::SUCCESS)
}

pub fn scaling(
    family: &str,
    p: f64,
    sizes: &[usize],
    eta: f64,
    seed: u64,
    max_dense: usize,
    format: Format,
) -> CmdResult {
    let started = Instant::now();
    let make_space = |n: usize| -> rib_core::Result<SpaceSpec> {
        match family {
            "lp" => SpaceSpec::lp(p, n),
            "lorentz" => SpaceSpec::new(Arc::new(Lorentz::harmonic(n)?), n),
            other => Err(Error::Unknown {
                kind: "scaling family",
                name: other.into(),
                known: "lp, lorentz".into(),
            }),
        }
    };
    let rows = scaling_table(make_space, sizes, eta, seed, max_dense)?;
    match format {
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            let mut csv = String::from("n,tau,alpha,guarantee_size,achieved,exponent\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.n,
                    fmt_f64(r.tau),
                    fmt_f64(r.alpha),
                    fmt_f64(r.guarantee_size),
                    opt(r.achieved),
                    opt(r.exponent)
                );
            }
            print!("{csv}");
        }
        Format::Json => {
            let inputs = json!({
                "family": family, "p": p, "sizes": sizes, "eta": eta, "seed": seed, "max_dense": max_dense,
            });
            RunReport::new("scaling", inputs, json!({"rows": to_value(&rows)}), started).print();
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn demo_factor(
    space_path: &Path,
    matrix_path: &Path,
    m: usize,
    len: usize,
    kappa: Option<f64>,
    eta: f64,
) -> CmdResult {
    let started = Instant::now();
    let (space, t) = load(space_path, matrix_path)?;
    let inputs = echo(
        space_path,
        matrix_path,
        &space,
        &t,
        json!({"m": m, "L": len, "kappa": kappa, "eta": eta}),
    );
    let demo = demo_factorization(&space, &t, m, len, kappa, eta)
        .map_err(|e| with_budget_report(e, "demo-factor", inputs.clone(), started))?;
    let f = &demo.factorization;
    if let Some(w) = &f.warning {
        eprintln!("warning: {w}");
    }
    let ok = f.residual <= RESIDUAL_TOL;
    let outputs = json!({
        "certificate": to_value(f),
        "gamma": demo.blocks.gamma,
        "target": f.target,
        "within_target": f.norm_product <= f.target,
        "blocks": to_value(&demo.blocks),
    });
    RunReport::new("demo-factor", inputs, outputs, started).print();
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: residual {} exceeds {RESIDUAL_TOL}", f.residual);
        ExitCode::from(EXIT_BUDGET)
    })
}
