//! The twelve acceptance criteria, each asserted at its stated tolerance and
//! time budget. Runs without the libtest harness so the per-criterion lines
//! are always printed; every criterion runs even when an earlier one fails.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;
use vessel_cli::report::{CheckReport, Payload};
use vessel_cli::{run_scenario, RunOptions, Scenario};

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml" || e == "json"))
        .collect();
    v.sort();
    v
}

/// Runs the checks of `file` whose id is in `ids`.
fn run(file: &str, ids: &[&str]) -> Payload {
    let mut sc = Scenario::load(&scenario_dir().join(file)).unwrap();
    sc.checks.retain(|c| ids.contains(&c.def.id));
    assert!(!sc.checks.is_empty(), "{file} has none of {ids:?}");
    run_scenario(&sc, &RunOptions::default()).report.payload
}

struct Criterion {
    failures: Vec<String>,
}

impl Criterion {
    fn new() -> Self {
        Criterion { failures: vec![] }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    /// Every named residual of every `id` check in `p` is present, finite and
    /// at most `tol`.
    fn residual(&mut self, p: &Payload, id: &str, name: &str, tol: f64) {
        let checks: Vec<&CheckReport> = p.checks.iter().filter(|c| c.id == id).collect();
        if checks.is_empty() {
            self.fail(format!("{}: no {id} check", p.scenario));
        }
        for c in checks {
            if let Some(e) = &c.error {
                self.fail(format!("{}/{}: error {e}", p.scenario, c.name));
                continue;
            }
            match c.residuals.iter().find(|r| r.name == name) {
                Some(r) if r.value.is_finite() && r.value <= tol => {}
                Some(r) => self.fail(format!("{}/{}: {name} = {:e} > {tol:e}", p.scenario, c.name, r.value)),
                None => self.fail(format!("{}/{}: residual {name} missing", p.scenario, c.name)),
            }
        }
    }

    fn info(&mut self, p: &Payload, name: &str, key: &str) -> Value {
        let v = p.checks.iter().find(|c| c.name == name).and_then(|c| c.info.get(key)).cloned();
        if v.is_none() {
            self.fail(format!("{}/{name}: info {key} missing", p.scenario));
        }
        v.unwrap_or(Value::Null)
    }

    fn require(&mut self, ok: bool, msg: &str) {
        if !ok {
            self.fail(msg.to_string());
        }
    }
}

fn c1(c: &mut Criterion) {
    let p = run("genus1_zeta_pairs.toml", &["theta_identities"]);
    c.residual(&p, "theta_identities", "quasi_periodicity", 1e-10);
    c.residual(&p, "theta_identities", "parity", 1e-10);
    let n = c.info(&p, "theta_identities", "samples");
    c.require(n == 500, "theta sample count is not 500");
}

fn c2(c: &mut Criterion) {
    let p = run("genus1_zeta_pairs.toml", &["prime_form"]);
    c.require(p.environment.genus == 1, "prime form scenario is not genus 1");
    c.residual(&p, "prime_form", "zero_locus", 1e-10);
    c.residual(&p, "prime_form", "antisymmetry", 1e-10);
    c.residual(&p, "prime_form", "first_order_expansion", 1e-3);
    c.residual(&p, "prime_form", "off_diagonal_zeros", 0.0);
}

fn c3(c: &mut Criterion) {
    let p = run("genus1_zeta_pairs.toml", &["kernel_hermitian"]);
    c.residual(&p, "kernel_hermitian", "hermitian", 1e-9);
    c.residual(&p, "kernel_hermitian", "sign_law", 1e-9);
    c.residual(&p, "kernel_hermitian", "genus0_closed_form", 1e-14);
    let n = c.info(&p, "kernel_hermitian", "samples");
    c.require(n == 200, "kernel sample count is not 200");
    let sides = c.info(&p, "kernel_hermitian", "sign_law_samples_plus_minus");
    c.require(sides[0].as_u64() > Some(0) && sides[1].as_u64() > Some(0), "sign law not exercised on both halves");
}

fn c4(c: &mut Criterion) {
    for file in ["genus0_classical.toml", "genus1_zeta_pairs.toml"] {
        let p = run(file, &["collection_formula"]);
        for r in ["three_point", "through_infinity", "inverse_pair", "diagonal_limit"] {
            c.residual(&p, "collection_formula", r, 1e-8);
        }
        let n = c.info(&p, "collection_formula", "fibers");
        c.require(n == 50, "collection fibers is not 50");
    }
    let p = run("genus1_double_pole.toml", &["generalized_collection"]);
    c.residual(&p, "generalized_collection", "generalized_collection", 1e-7);
    let order = c.info(&p, "generalized_collection", "max_pole_order");
    c.require(order == 2, "generalized collection not run on a double pole");
}

fn c5(c: &mut Criterion) {
    let mut genera = vec![];
    for file in ["genus0_classical.toml", "genus1_zeta_pairs.toml", "genus1_double_pole.toml", "genus1_conjugate_poles.toml"] {
        let p = run(file, &["model_algebra"]);
        genera.push(p.environment.genus);
        for r in ["sum", "product", "commutator", "cayley_hamilton"] {
            c.residual(&p, "model_algebra", r, 1e-7);
        }
    }
    c.require(genera.contains(&0) && genera.contains(&1), "algebra not run on both genera");
}

fn c6(c: &mut Criterion) {
    for file in ["genus0_classical.toml", "genus1_zeta_pairs.toml"] {
        let p = run(file, &["resolvent_laws"]);
        c.residual(&p, "resolvent_laws", "inverse", 1e-9);
        c.residual(&p, "resolvent_laws", "resolvent_identity", 1e-9);
        let n = c.info(&p, "resolvent_laws", "pairs");
        c.require(n == 30, "resolvent pairs is not 30");
    }
}

fn c7(c: &mut Criterion) {
    let mut double = false;
    let mut pair = false;
    for file in ["genus0_classical.toml", "genus1_zeta_pairs.toml", "genus1_double_pole.toml", "genus1_conjugate_poles.toml"] {
        let p = run(file, &["structure_identity", "colligation"]);
        c.residual(&p, "structure_identity", "structure_identity", 1e-8);
        c.residual(&p, "structure_identity", "chart_rescaling", 1e-9);
        c.residual(&p, "colligation", "colligation_1", 1e-8);
        c.residual(&p, "colligation", "colligation_2", 1e-8);
        let layout = c.info(&p, "colligation", "layout");
        double |= layout["max_order"].as_u64() >= Some(2);
        pair |= layout["conjugate_pairs"].as_u64() >= Some(1);
    }
    c.require(double, "no double-pole colligation exercised");
    c.require(pair, "no conjugate-pair colligation exercised");
}

fn c8(c: &mut Criterion) {
    let ids = ["vessel_conditions", "discriminant_equality", "ccf_metric", "jcf_independence", "model_map_identity"];
    for file in ["genus0_classical.toml", "genus1_zeta_pairs.toml", "genus1_double_pole.toml", "genus1_conjugate_poles.toml"] {
        let p = run(file, &ids);
        for r in ["input", "output", "linkage"] {
            c.residual(&p, "vessel_conditions", r, 1e-8);
        }
        c.residual(&p, "discriminant_equality", "gamma_vs_gamma_tilde", 1e-8);
        c.residual(&p, "ccf_metric", "isometric_on_real_axis", 1e-8);
        c.residual(&p, "ccf_metric", "expansive_above", 1e-8);
        c.residual(&p, "jcf_independence", "direction_spread", 1e-7);
        c.residual(&p, "model_map_identity", "model_map", 1e-8);
    }
}

fn c9(c: &mut Criterion) {
    for file in ["genus0_classical.toml", "genus1_transfer.toml"] {
        let p = run(file, &["blaschke_inner", "kernel_psd", "njcf_consistency"]);
        c.residual(&p, "blaschke_inner", "factor_unimodular", 1e-8);
        c.residual(&p, "blaschke_inner", "symmetry", 1e-9);
        c.residual(&p, "njcf_consistency", "two_routes", 1e-6);
        let mut factors = vec![];
        for k in p.checks.iter().filter(|k| k.id == "kernel_psd") {
            let kernel = k.info.get("kernel").and_then(|v| v.as_str()).unwrap_or("");
            if kernel == "K_T" {
                let name = k.name.as_str();
                factors.push(name.chars().last().and_then(|d| d.to_digit(10)).unwrap_or(0));
            }
        }
        c.residual(&p, "kernel_psd", "min_eigenvalue", 1e-8);
        factors.sort();
        c.require(factors == vec![1, 2, 3], &format!("{file}: K_T batches not run for 1-3 factors"));
    }
}

fn c10(c: &mut Criterion) {
    let p = run("genus1_transfer.toml", &["beurling_orthogonality"]);
    c.residual(&p, "beurling_orthogonality", "orthogonality", 1e-5);
    c.residual(&p, "beurling_orthogonality", "refinement_ratio", 0.5);
    let p = run("genus1_zeta_pairs.toml", &["mm_duality"]);
    c.residual(&p, "mm_duality", "duality", 1e-5);
}

fn c11(c: &mut Criterion) {
    let p = run("genus0_classical.toml", &["hankel_inverse", "taylor_delta"]);
    c.residual(&p, "hankel_inverse", "right_inverse", 1e-10);
    c.residual(&p, "hankel_inverse", "left_inverse", 1e-10);
    c.residual(&p, "taylor_delta", "kronecker_delta", 1e-10);
}

fn cli_payload(path: &Path, seed: u64) -> (Option<i32>, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_vessel"))
        .args(["run", path.to_str().unwrap(), "--seed", &seed.to_string(), "--out", "-", "--quiet"])
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code(), v["payload"].clone())
}

fn c12(c: &mut Criterion) {
    for path in bundled() {
        let (code1, a) = cli_payload(&path, 3);
        let (code2, b) = cli_payload(&path, 3);
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        c.require(!a.is_null(), &format!("{name}: no report"));
        c.require(code1 == code2, &format!("{name}: exit codes differ"));
        c.require(a == b, &format!("{name}: payloads differ"));
        let injected = name.starts_with("injected_failure");
        c.require(injected == (code1 == Some(1)), &format!("{name}: exit code {code1:?}"));
        if injected {
            let witnessed = a["checks"]
                .as_array()
                .into_iter()
                .flatten()
                .flat_map(|k| k["residuals"].as_array().cloned().unwrap_or_default())
                .any(|r| r["passed"] == false && r["witness"].is_object());
            c.require(witnessed, "injected failure carries no witness");
        }
    }
}

fn main() -> std::process::ExitCode {
    let criteria: [(&str, fn(&mut Criterion), f64); 12] = [
        ("1 theta quasi-periodicity and parity", c1, 5.0),
        ("2 prime form", c2, 2.0),
        ("3 Cauchy kernel symmetry, sign law, genus-0 closed form", c3, 5.0),
        ("4 collection formulas", c4, 30.0),
        ("5 model-operator algebra", c5, 30.0),
        ("6 resolvent laws", c6, 10.0),
        ("7 structure identity and colligation", c7, 60.0),
        ("8 vessel conditions, discriminant, CCF, JCF, model map", c8, 120.0),
        ("9 transfer functions", c9, 120.0),
        ("10 Beurling desk check and duality", c10, 60.0),
        ("11 Hankel inverse and Taylor delta", c11, 10.0),
        ("12 CLI determinism and injected failure", c12, f64::INFINITY),
    ];
    let mut failed = vec![];
    for (name, f, budget) in criteria {
        let mut c = Criterion::new();
        let start = Instant::now();
        f(&mut c);
        let secs = start.elapsed().as_secs_f64();
        if secs > budget {
            c.fail(format!("took {secs:.2} s, budget {budget} s"));
        }
        let status = if c.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} criterion {name} ({secs:.2} s)");
        for f in &c.failures {
            println!("     {f}");
        }
        if !c.failures.is_empty() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: 12/12 criteria passed");
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
