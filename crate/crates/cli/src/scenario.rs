//! Scenario files: curve, torus point, named functions, model space,
//! transfer functions and the list of checks to run.
//!
//! TOML and JSON share one schema (`schema = 1`). Parsing happens in two
//! passes: serde builds the raw tree, then `resolve` constructs the numerical
//! objects and reports unresolved names or invalid values with the field path
//! and, when it can be located, the source line.

use crate::checks::{self, CheckDef, Need};
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use vessel_core::kernels::KernelContext;
use vessel_core::meromorphic::MeromorphicFn;
use vessel_core::model_ops::ModelSpace;
use vessel_core::surface::{RealCurve, SurfacePoint};
use vessel_core::transfer::BlaschkeProduct;
use vessel_core::Complex64 as C;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { file: None, line: None, column: None, field: Some(field.into()), message: message.into() }
    }

    fn at(mut self, line: Option<usize>) -> Self {
        if self.line.is_none() {
            self.line = line;
        }
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.file {
            write!(f, "{}:", p.display())?;
        }
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{l}:{c}: ")?,
            (Some(l), None) => write!(f, "{l}: ")?,
            _ => {
                if self.file.is_some() {
                    write!(f, " ")?;
                }
            }
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

// ---- raw schema ----

/// A surface point: `[re, im]` or the string `"inf"` (genus 0 only).
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PointSpec {
    Finite([f64; 2]),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Genus0,
    /// Γ = [i t0].
    Rectangular { t0: f64 },
    /// Γ = [tau], tau given as [re, im].
    Genus1 { tau: [f64; 2] },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaSpec {
    #[serde(default)]
    pub nu: Vec<u8>,
    #[serde(default)]
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Identity,
    Constant { value: [f64; 2] },
    /// Coefficients in ascending powers (genus 0).
    Rational { num: Vec<[f64; 2]>, den: Vec<[f64; 2]> },
    ZetaPair { a: PointSpec, b: PointSpec },
    WpLike { a: PointSpec },
    Sum { of: Vec<String> },
    Product { of: Vec<String> },
    Scale { f: String, by: [f64; 2] },
    Shift { f: String, by: [f64; 2] },
    /// (m0 f + m1)/(m2 f + m3).
    Mobius { f: String, m: [[f64; 2]; 4] },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpaceSpec {
    pub points: Vec<PointSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub name: String,
    pub zeros: Vec<PointSpec>,
    #[serde(default)]
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Catalog identifier.
    pub id: String,
    /// Report label; defaults to the id and must be unique.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub y: Option<String>,
    #[serde(default)]
    pub y1: Option<String>,
    #[serde(default)]
    pub y2: Option<String>,
    #[serde(default)]
    pub transfer: Option<String>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub curve: CurveSpec,
    #[serde(default)]
    pub zeta: Option<ZetaSpec>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    pub model_space: Option<ModelSpaceSpec>,
    #[serde(default)]
    pub transfers: Vec<TransferSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

// ---- resolved scenario ----

#[derive(Debug, Clone)]
pub struct Transfer {
    pub product: BlaschkeProduct,
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub struct CheckInstance {
    pub name: String,
    pub def: &'static CheckDef,
    pub spec: CheckSpec,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub curve: RealCurve,
    pub ctx: KernelContext,
    pub functions: BTreeMap<String, MeromorphicFn>,
    pub model_space: Option<ModelSpace>,
    pub transfers: BTreeMap<String, Transfer>,
    pub checks: Vec<CheckInstance>,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(p: &Path) -> Format {
        match p.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map(|i| before.len() - i).unwrap_or(before.len() + 1);
    (line, col)
}

/// First line mentioning `needle` as a quoted string or table key.
fn locate(src: &str, needle: &str) -> Option<usize> {
    let quoted = format!("\"{needle}\"");
    let table = format!(".{needle}]");
    let key = format!("{needle} =");
    src.lines()
        .position(|l| {
            let t = l.trim_start();
            l.contains(&quoted) || l.contains(&table) || t.starts_with(&key)
        })
        .map(|i| i + 1)
}

/// Line of the `idx`-th occurrence of an array-of-tables header or, in
/// JSON, of the `idx`-th object in that array (best effort).
fn locate_nth(src: &str, array: &str, idx: usize) -> Option<usize> {
    let header = format!("[[{array}]]");
    let hits: Vec<usize> = src.lines().enumerate().filter(|(_, l)| l.trim() == header).map(|(i, _)| i + 1).collect();
    hits.get(idx).cloned()
}

pub fn parse(src: &str, format: Format) -> Result<ScenarioFile, ConfigError> {
    match format {
        Format::Toml => toml::from_str::<ScenarioFile>(src).map_err(|e| {
            let (line, column) = match e.span() {
                Some(s) => {
                    let (l, c) = line_col(src, s.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            ConfigError { file: None, line, column, field: None, message: e.message().trim().to_string() }
        }),
        Format::Json => serde_json::from_str::<ScenarioFile>(src).map_err(|e| ConfigError {
            file: None,
            line: Some(e.line()),
            column: Some(e.column()),
            field: None,
            message: e.to_string(),
        }),
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: Some(path.to_path_buf()),
            line: None,
            column: None,
            field: None,
            message: format!("cannot read scenario: {e}"),
        })?;
        Scenario::from_source(&src, Format::from_path(path)).map_err(|mut e| {
            e.file = Some(path.to_path_buf());
            e
        })
    }

    pub fn from_source(src: &str, format: Format) -> Result<Scenario, ConfigError> {
        let raw = parse(src, format)?;
        resolve(raw, src)
    }
}

fn point(curve: &RealCurve, p: &PointSpec, field: &str) -> Result<SurfacePoint, ConfigError> {
    match p {
        PointSpec::Finite([re, im]) => {
            if !(re.is_finite() && im.is_finite()) {
                return Err(ConfigError::new(field, "point coordinates must be finite"));
            }
            Ok(SurfacePoint::new(C::new(*re, *im)))
        }
        PointSpec::Named(s) if s == "inf" => {
            if curve.genus() == 0 {
                Ok(SurfacePoint::Infinity)
            } else {
                Err(ConfigError::new(field, "\"inf\" is only a point of the genus-0 curve"))
            }
        }
        PointSpec::Named(s) => Err(ConfigError::new(field, format!("expected [re, im] or \"inf\", got \"{s}\""))),
    }
}

fn cplx(v: [f64; 2]) -> C {
    C::new(v[0], v[1])
}

fn build_function(
    name: &str,
    specs: &BTreeMap<String, FunctionSpec>,
    curve: &RealCurve,
    done: &mut BTreeMap<String, MeromorphicFn>,
    stack: &mut Vec<String>,
    src: &str,
) -> Result<MeromorphicFn, ConfigError> {
    if let Some(f) = done.get(name) {
        return Ok(f.clone());
    }
    let field = format!("functions.{name}");
    if stack.iter().any(|s| s == name) {
        return Err(ConfigError::new(field, format!("cyclic definition through {}", stack.join(" -> "))).at(locate(src, name)));
    }
    let spec = specs.get(name).ok_or_else(|| ConfigError::new(field.clone(), "undefined function"))?;
    stack.push(name.to_string());
    let mut dep = |n: &str, sub: &str| -> Result<MeromorphicFn, ConfigError> {
        if !specs.contains_key(n) {
            return Err(ConfigError::new(format!("{field}.{sub}"), format!("unknown function \"{n}\"")).at(locate(src, n)));
        }
        build_function(n, specs, curve, done, stack, src)
    };
    let core = |e: vessel_core::Error| ConfigError::new(format!("functions.{name}"), e.to_string()).at(locate(src, name));
    let f = match spec {
        FunctionSpec::Identity => MeromorphicFn::identity(curve).map_err(core)?,
        FunctionSpec::Constant { value } => MeromorphicFn::constant(curve, cplx(*value)).map_err(core)?,
        FunctionSpec::Rational { num, den } => {
            MeromorphicFn::rational(curve, num.iter().map(|v| cplx(*v)).collect(), den.iter().map(|v| cplx(*v)).collect()).map_err(core)?
        }
        FunctionSpec::ZetaPair { a, b } => {
            let a = point(curve, a, &format!("{field}.a"))?;
            let b = point(curve, b, &format!("{field}.b"))?;
            MeromorphicFn::zeta_pair(curve, &a, &b).map_err(core)?
        }
        FunctionSpec::WpLike { a } => {
            let a = point(curve, a, &format!("{field}.a"))?;
            MeromorphicFn::wp_like(curve, &a).map_err(core)?
        }
        FunctionSpec::Sum { of } | FunctionSpec::Product { of } => {
            if of.is_empty() {
                return Err(ConfigError::new(format!("{field}.of"), "needs at least one function").at(locate(src, name)));
            }
            let is_sum = matches!(spec, FunctionSpec::Sum { .. });
            let mut acc = dep(&of[0], "of")?;
            for n in &of[1..] {
                let g = dep(n, "of")?;
                acc = if is_sum { acc.add(&g) } else { acc.mul(&g) }.map_err(core)?;
            }
            acc
        }
        FunctionSpec::Scale { f, by } => dep(f, "f")?.scale(cplx(*by)).map_err(core)?,
        FunctionSpec::Shift { f, by } => dep(f, "f")?.shift(cplx(*by)).map_err(core)?,
        FunctionSpec::Mobius { f, m } => dep(f, "f")?.mobius([cplx(m[0]), cplx(m[1]), cplx(m[2]), cplx(m[3])]).map_err(core)?,
    };
    stack.pop();
    done.insert(name.to_string(), f.clone());
    Ok(f)
}

fn resolve(raw: ScenarioFile, src: &str) -> Result<Scenario, ConfigError> {
    if raw.schema != SCHEMA_VERSION {
        return Err(ConfigError::new("schema", format!("unsupported schema {} (expected {SCHEMA_VERSION})", raw.schema)).at(locate(src, "schema")));
    }
    if raw.name.trim().is_empty() {
        return Err(ConfigError::new("name", "must not be empty").at(locate(src, "name")));
    }
    let curve_err = |e: vessel_core::Error| ConfigError::new("curve", e.to_string()).at(locate(src, "kind"));
    let curve = match &raw.curve {
        CurveSpec::Genus0 => RealCurve::genus0(),
        CurveSpec::Rectangular { t0 } => RealCurve::rectangular(*t0).map_err(curve_err)?,
        CurveSpec::Genus1 { tau } => RealCurve::genus1(cplx(*tau)).map_err(curve_err)?,
    };
    let zeta = match &raw.zeta {
        None if curve.genus() > 0 => {
            return Err(ConfigError::new("zeta", "a torus point {nu, a} is required for genus ≥ 1"));
        }
        None => curve.torii_point(&[], &[]),
        Some(z) => curve.torii_point(&z.nu, &z.a),
    }
    .map_err(|e| ConfigError::new("zeta", e.to_string()).at(locate(src, "nu")))?;
    let ctx = KernelContext::new(&curve, zeta).map_err(|e| ConfigError::new("zeta", e.to_string()))?;

    let mut functions = BTreeMap::new();
    for name in raw.functions.keys() {
        build_function(name, &raw.functions, &curve, &mut functions, &mut vec![], src)?;
    }

    let model_space = match &raw.model_space {
        None => None,
        Some(m) => {
            let mut pts = vec![];
            for (i, p) in m.points.iter().enumerate() {
                let field = format!("model_space.points[{i}]");
                let q = point(&curve, p, &field)?;
                for (j, o) in pts.iter().enumerate() {
                    if curve.same_point(&q, o, 1e-9) {
                        return Err(ConfigError::new(field, format!("coincides with model_space.points[{j}]")).at(locate(src, "points")));
                    }
                }
                pts.push(q);
            }
            Some(ModelSpace::new(ctx.clone(), pts).map_err(|e| ConfigError::new("model_space", e.to_string()).at(locate(src, "points")))?)
        }
    };

    let mut transfers = BTreeMap::new();
    for (i, t) in raw.transfers.iter().enumerate() {
        let field = format!("transfers[{i}]");
        let line = locate_nth(src, "transfers", i).or_else(|| locate(src, &t.name));
        if transfers.contains_key(&t.name) {
            return Err(ConfigError::new(format!("{field}.name"), format!("duplicate transfer \"{}\"", t.name)).at(line));
        }
        let gain = t.gain.unwrap_or(1.0);
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(ConfigError::new(format!("{field}.gain"), "must be positive").at(line));
        }
        let zeros = t
            .zeros
            .iter()
            .enumerate()
            .map(|(k, p)| point(&curve, p, &format!("{field}.zeros[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let product = BlaschkeProduct::new(&ctx, zeros).map_err(|e| ConfigError::new(field.clone(), e.to_string()).at(line))?;
        let product = if gain != 1.0 { product.scaled(gain) } else { product };
        transfers.insert(t.name.clone(), Transfer { product, gain });
    }

    let mut checks_out = vec![];
    let mut names = BTreeSet::new();
    for (i, c) in raw.checks.iter().enumerate() {
        let field = format!("checks[{i}]");
        let line = locate_nth(src, "checks", i);
        let def = checks::lookup(&c.id)
            .ok_or_else(|| ConfigError::new(format!("{field}.id"), format!("unknown check \"{}\" (see list-checks)", c.id)).at(locate(src, &c.id).or(line)))?;
        let name = c.name.clone().unwrap_or_else(|| c.id.clone());
        if !names.insert(name.clone()) {
            return Err(ConfigError::new(format!("{field}.name"), format!("duplicate check name \"{name}\"")).at(line));
        }
        if let Some(t) = c.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::new(format!("{field}.tol"), "tolerance must be positive").at(line));
            }
        }
        for (key, val) in [("y", &c.y), ("y1", &c.y1), ("y2", &c.y2)] {
            if let Some(n) = val {
                if !functions.contains_key(n) {
                    return Err(ConfigError::new(format!("{field}.{key}"), format!("unknown function \"{n}\"")).at(locate(src, n).or(line)));
                }
            }
        }
        if let Some(n) = &c.transfer {
            if !transfers.contains_key(n) {
                return Err(ConfigError::new(format!("{field}.transfer"), format!("unknown transfer \"{n}\"")).at(locate(src, n).or(line)));
            }
        }
        if c.samples == Some(0) {
            return Err(ConfigError::new(format!("{field}.samples"), "must be positive").at(line));
        }
        if let Some(n) = c.nodes {
            if n < 8 {
                return Err(ConfigError::new(format!("{field}.nodes"), "need at least 8 quadrature nodes").at(line));
            }
        }
        for need in def.needs {
            let missing = match need {
                Need::Y => c.y.is_none().then_some("y"),
                Need::Y1Y2 => (c.y1.is_none() || c.y2.is_none()).then_some("y1/y2"),
                Need::Transfer => c.transfer.is_none().then_some("transfer"),
                Need::ModelSpace => model_space.is_none().then_some("model_space"),
            };
            if let Some(m) = missing {
                let f = if m == "model_space" { "model_space".to_string() } else { format!("{field}.{m}") };
                return Err(ConfigError::new(f, format!("required by check \"{}\"", def.id)).at(line));
            }
        }
        checks_out.push(CheckInstance { name, def, spec: c.clone() });
    }

    Ok(Scenario {
        name: raw.name,
        description: raw.description,
        curve,
        ctx,
        functions,
        model_space,
        transfers,
        checks: checks_out,
        output: raw.output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema = 1
name = "t"
curve = { kind = "rectangular", t0 = 0.8 }
zeta = { nu = [0], a = [0.3] }

[functions.y1]
kind = "zeta_pair"
a = [0.3, 0.4]
b = [0.6, 0.0]
"#;

    #[test]
    fn minimal_toml_resolves() {
        let s = Scenario::from_source(BASE, Format::Toml).unwrap();
        assert_eq!(s.functions.len(), 1);
        assert!(s.checks.is_empty());
    }

    #[test]
    fn json_matches_toml() {
        let j = r#"{"schema": 1, "name": "t", "curve": {"kind": "genus0"},
            "functions": {"z": {"kind": "identity"}, "w": {"kind": "shift", "f": "z", "by": [1, 0]}},
            "checks": [{"id": "hankel_inverse"}]}"#;
        let s = Scenario::from_source(j, Format::Json).unwrap();
        assert_eq!(s.functions.len(), 2);
        assert_eq!(s.checks[0].name, "hankel_inverse");
    }

    #[test]
    fn unknown_field_has_line() {
        let src = format!("{BASE}\n[[checks]]\nid = \"hankel_inverse\"\ntolerance = 1e-3\n");
        let e = Scenario::from_source(&src, Format::Toml).unwrap_err();
        assert!(e.message.contains("tolerance"), "{e}");
        assert_eq!(e.line, Some(src.lines().position(|l| l.starts_with("tolerance")).unwrap() + 1));
    }

    #[test]
    fn unresolved_function_is_reported() {
        let src = format!("{BASE}\n[[checks]]\nid = \"kernel_hermitian\"\n\n[[checks]]\nid = \"collection_formula\"\ny = \"y9\"\n");
        let e = Scenario::from_source(&src, Format::Toml).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("checks[1].y"));
        assert_eq!(e.line, Some(src.lines().position(|l| l.contains("\"y9\"")).unwrap() + 1));
    }

    #[test]
    fn schema_and_tolerance_rules() {
        let e = Scenario::from_source(&BASE.replace("schema = 1", "schema = 2"), Format::Toml).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("schema"));
        let src = format!("{BASE}\n[[checks]]\nid = \"hankel_inverse\"\ntol = -1.0\n");
        let e = Scenario::from_source(&src, Format::Toml).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("checks[0].tol"));
        let src = format!("{BASE}\n[[checks]]\nid = \"no_such_check\"\n");
        assert_eq!(Scenario::from_source(&src, Format::Toml).unwrap_err().field.as_deref(), Some("checks[0].id"));
    }

    #[test]
    fn repeated_model_points_rejected() {
        let src = format!("{BASE}\n[model_space]\npoints = [[0.1, 0.2], [0.3, 0.1], [1.1, 0.2]]\n");
        let e = Scenario::from_source(&src, Format::Toml).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("model_space.points[2]"));
    }

    #[test]
    fn cycles_and_missing_requirements() {
        let src = "schema = 1\nname = \"c\"\ncurve = { kind = \"genus0\" }\n[functions.a]\nkind = \"scale\"\nf = \"b\"\nby = [2, 0]\n[functions.b]\nkind = \"shift\"\nf = \"a\"\nby = [1, 0]\n";
        let e = Scenario::from_source(src, Format::Toml).unwrap_err();
        assert!(e.message.contains("cyclic"), "{e}");
        let src = "schema = 1\nname = \"c\"\ncurve = { kind = \"genus0\" }\n[[checks]]\nid = \"colligation\"\n";
        let e = Scenario::from_source(src, Format::Toml).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("checks[0].y1/y2"));
    }

    #[test]
    fn genus1_requires_zeta() {
        let src = "schema = 1\nname = \"c\"\ncurve = { kind = \"rectangular\", t0 = 0.8 }\n";
        assert_eq!(Scenario::from_source(src, Format::Toml).unwrap_err().field.as_deref(), Some("zeta"));
    }
}
