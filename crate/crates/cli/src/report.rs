//! Running a resolved scenario and writing the JSON report and CSV tables.

use crate::checks::{Residual, Run, Table};
use crate::scenario::Scenario;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;
use vessel_core::transfer::torus_index;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub seed: u64,
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 0, tol_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TransferEnv {
    pub zeros: Vec<Value>,
    pub gain: f64,
    pub zeta_out: Vec<[f64; 2]>,
    pub torus_out: Option<u8>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Environment {
    pub core_version: &'static str,
    pub genus: usize,
    pub theta_tol: f64,
    pub zeta: Vec<[f64; 2]>,
    pub nu: Vec<u8>,
    pub functions: Vec<String>,
    pub model_space_dim: Option<usize>,
    pub gram_condition: Option<f64>,
    pub transfers: BTreeMap<String, TransferEnv>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub id: &'static str,
    pub modules: &'static [&'static str],
    pub anchor: &'static str,
    pub stream: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub residuals: Vec<Residual>,
    pub info: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
}

/// Everything that must be identical across runs with the same inputs.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Payload {
    pub schema: u32,
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub seed: u64,
    pub tol_scale: f64,
    pub environment: Environment,
    pub checks: Vec<CheckReport>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub checks: Vec<CheckTiming>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub payload: Payload,
    pub timing: Timing,
}

pub struct Outcome {
    pub report: Report,
    /// (check name, table) pairs in check order.
    pub tables: Vec<(String, Table)>,
}

/// FNV-1a of the check name: the check's ChaCha stream, stable under
/// reordering of the scenario.
pub fn stream_of(name: &str) -> u64 {
    name.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn environment(sc: &Scenario) -> Environment {
    let cj = |z: &vessel_core::Complex64| [z.re, z.im];
    let zeta = sc.ctx.zeta();
    Environment {
        core_version: env!("CARGO_PKG_VERSION"),
        genus: sc.curve.genus(),
        theta_tol: sc.curve.theta_tol(),
        zeta: zeta.zeta.iter().map(cj).collect(),
        nu: zeta.nu.clone(),
        functions: sc.functions.keys().cloned().collect(),
        model_space_dim: sc.model_space.as_ref().map(|m| m.dim()),
        gram_condition: sc.model_space.as_ref().map(|m| m.condition()),
        transfers: sc
            .transfers
            .iter()
            .map(|(k, t)| {
                let out = t.product.ctx_out().zeta();
                let env = TransferEnv {
                    zeros: t.product.zeros.iter().map(crate::checks::pj).collect(),
                    gain: t.gain,
                    zeta_out: out.zeta.iter().map(cj).collect(),
                    torus_out: torus_index(&sc.curve, out),
                };
                (k.clone(), env)
            })
            .collect(),
    }
}

fn run_one(sc: &Scenario, i: usize, opts: &RunOptions) -> (CheckReport, Vec<Table>, f64) {
    let inst = &sc.checks[i];
    let stream = stream_of(&inst.name);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    let start = Instant::now();
    let mut run = Run::new(sc, &inst.spec, inst.def, rng, opts.tol_scale);
    let error = (inst.def.run)(&mut run).err().map(|e| e.to_string());
    let secs = start.elapsed().as_secs_f64();
    let passed = error.is_none() && run.residuals.iter().all(|r| r.passed);
    let rep = CheckReport {
        name: inst.name.clone(),
        id: inst.def.id,
        modules: inst.def.modules,
        anchor: inst.def.anchor,
        stream,
        passed,
        error,
        residuals: run.residuals,
        info: run.info,
    };
    (rep, run.tables, secs)
}

/// Runs every check of the scenario. Checks execute in parallel; results keep
/// declaration order.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Outcome {
    let start = Instant::now();
    let results: Vec<_> = (0..sc.checks.len()).into_par_iter().map(|i| run_one(sc, i, opts)).collect();
    let mut checks = vec![];
    let mut tables = vec![];
    let mut timing = vec![];
    for (rep, tabs, secs) in results {
        timing.push(CheckTiming { name: rep.name.clone(), seconds: secs });
        tables.extend(tabs.into_iter().map(|t| (rep.name.clone(), t)));
        checks.push(rep);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let summary = Summary { checks: checks.len(), passed, failed: checks.len() - passed, all_passed: passed == checks.len() };
    let payload = Payload {
        schema: REPORT_SCHEMA,
        scenario: sc.name.clone(),
        description: sc.description.clone(),
        seed: opts.seed,
        tol_scale: opts.tol_scale,
        environment: environment(sc),
        checks,
        summary,
    };
    Outcome { report: Report { payload, timing: Timing { total_seconds: start.elapsed().as_secs_f64(), checks: timing } }, tables }
}

/// One file per table: `<check>.<table>.csv`.
pub fn write_tables(dir: &Path, tables: &[(String, Table)]) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = vec![];
    for (check, t) in tables {
        let path = dir.join(format!("{check}.{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for row in &t.rows {
            w.write_record(row.iter().map(|x| format!("{x:e}")))?;
        }
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

/// Human-readable one-line-per-check summary.
pub fn summary_lines(p: &Payload) -> Vec<String> {
    let mut lines = vec![];
    for c in &p.checks {
        let worst = c
            .residuals
            .iter()
            .filter(|r| !r.passed)
            .chain(c.residuals.iter())
            .next()
            .map(|r| format!("{} = {:.3e} (tol {:.1e})", r.name, r.value, r.tol))
            .unwrap_or_default();
        let status = if c.passed { "PASS" } else { "FAIL" };
        match &c.error {
            Some(e) => lines.push(format!("{status} {:<28} error: {e}", c.name)),
            None => lines.push(format!("{status} {:<28} {worst}", c.name)),
        }
    }
    lines.push(format!("{}/{} checks passed", p.summary.passed, p.summary.checks));
    lines
}
