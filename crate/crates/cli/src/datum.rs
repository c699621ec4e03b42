//! Loading and emitting spectral-datum files.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use spectra::eigen::SpectralDatum;
use spectra::operators::{fraction_string, CompactOperator, DecayProfile, Rational, ValBound};
use spectra::{AffinoidElement, Chart, Matrix, PadicScalar};

use crate::render::{monomial_name, Entry};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatumFile {
    pub p: u64,
    pub relative_precision: u32,
    pub x_degree_cap: usize,
    pub base: BaseSpec,
    pub module: ModuleSpec,
    pub phi: MatrixSpec,
    #[serde(default)]
    pub hecke: BTreeMap<String, MatrixSpec>,
    #[serde(default)]
    pub samples: Vec<Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaseSpec {
    Field,
    Affinoid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        var: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        vars: Vec<String>,
        degree_bound: u32,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpec {
    pub size: usize,
    #[serde(default)]
    pub decay: DecaySpec,
}

/// Rationals are written as integers or `"n/d"` strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Text(String),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DecaySpec {
    #[default]
    Finite,
    Geometric { offset: Num, rate: Num },
    Stepped { offset: Num, step: u32, rate: Num },
    Explicit { head: Vec<Num>, rate: Num },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatrixSpec {
    /// Row-major entries.
    Dense { rows: Vec<Vec<Value>> },
    Diagonal { entries: Vec<Value> },
    /// Offset `k` holds the entries `(i, i + k)`.
    Banded { bands: BTreeMap<String, Vec<Value>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadErrorKind {
    Parse,
    Schema,
    Validation,
}

/// Violations with JSON-pointer locations.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadError {
    pub kind: LoadErrorKind,
    pub violations: Vec<(String, String)>,
}

impl LoadError {
    fn one(kind: LoadErrorKind, at: &str, msg: impl Into<String>) -> Self {
        LoadError { kind, violations: vec![(at.to_string(), msg.into())] }
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            LoadErrorKind::Parse => "parse error",
            LoadErrorKind::Schema => "schema error",
            LoadErrorKind::Validation => "validation error",
        };
        write!(f, "{kind}:")?;
        for (at, msg) in &self.violations {
            write!(f, " {}: {msg};", if at.is_empty() { "/" } else { at })?;
        }
        Ok(())
    }
}

impl std::error::Error for LoadError {}

/// A datum together with the parameters it was loaded with.
#[derive(Clone, Debug)]
pub struct Session<C> {
    pub datum: SpectralDatum<C>,
    pub samples: Vec<Vec<PadicScalar>>,
    pub p: u64,
    pub rel: u32,
}

#[derive(Clone, Debug)]
pub enum Loaded {
    Field(Session<PadicScalar>),
    Affinoid(Session<AffinoidElement>),
}

impl Loaded {
    pub fn p(&self) -> u64 {
        match self {
            Loaded::Field(s) => s.p,
            Loaded::Affinoid(s) => s.p,
        }
    }
}

struct Ctx {
    p: u64,
    rel: u32,
    chart: Option<Arc<Chart>>,
}

impl Ctx {
    fn scalar(&self, v: &Value, at: &str) -> Result<PadicScalar, LoadError> {
        let schema = |m: String| LoadError::one(LoadErrorKind::Schema, at, m);
        match v {
            Value::Number(n) => {
                let n = n.as_i64().ok_or_else(|| schema(format!("{n} is not an integer")))?;
                Ok(PadicScalar::from_int(self.p, n, self.rel))
            }
            Value::String(s) if s.contains("(mod") || s.trim() == "0" => {
                PadicScalar::parse_canonical(self.p, s).map_err(|e| schema(e.to_string()))
            }
            Value::String(s) => PadicScalar::parse(self.p, s, self.rel).map_err(|e| schema(e.to_string())),
            other => Err(schema(format!("expected a p-adic literal, found {other}"))),
        }
    }

    fn affinoid(&self, chart: &Arc<Chart>, v: &Value, at: &str) -> Result<AffinoidElement, LoadError> {
        let schema = |m: String| LoadError::one(LoadErrorKind::Schema, at, m);
        match v {
            Value::Array(cs) => {
                let cs = cs.iter().enumerate().map(|(k, c)| self.scalar(c, &format!("{at}/{k}"))).collect::<Result<Vec<_>, _>>()?;
                AffinoidElement::from_coeffs(chart, &cs).map_err(|e| schema(e.to_string()))
            }
            Value::Object(terms) => {
                let mut out = Vec::with_capacity(terms.len());
                for (key, c) in terms {
                    let m = parse_monomial(chart, key).ok_or_else(|| schema(format!("bad monomial {key:?}")))?;
                    out.push((m, self.scalar(c, &format!("{at}/{}", pointer_escape(key)))?));
                }
                let e = AffinoidElement::from_terms(chart, out);
                e.check_degree().map_err(|e| schema(e.to_string()))?;
                Ok(e)
            }
            _ => Ok(AffinoidElement::constant(chart, self.scalar(v, at)?)),
        }
    }
}

fn pointer_escape(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}

/// `"1"`, `"T1"`, `"T1^2*T2"`.
pub fn parse_monomial(chart: &Chart, key: &str) -> Option<Vec<u32>> {
    let mut m = vec![0u32; chart.nvars()];
    let key = key.trim();
    if key == "1" {
        return Some(m);
    }
    for factor in key.split('*') {
        let (name, e) = match factor.trim().split_once('^') {
            Some((n, e)) => (n.trim(), e.trim().parse().ok()?),
            None => (factor.trim(), 1),
        };
        m[chart.var_index(name)?] += e;
    }
    Some(m)
}

pub fn parse_rational(n: &Num, at: &str) -> Result<Rational, LoadError> {
    match n {
        Num::Int(k) => Ok(Rational::from_integer(*k)),
        Num::Text(s) => spectra::eigen::parse_slope(s).map_err(|e| LoadError::one(LoadErrorKind::Schema, at, e.to_string())),
    }
}

fn decay_profile(d: &DecaySpec) -> Result<DecayProfile, LoadError> {
    let at = "/module/decay";
    Ok(match d {
        DecaySpec::Finite => DecayProfile::Finite,
        DecaySpec::Geometric { offset, rate } => {
            DecayProfile::Geometric { offset: parse_rational(offset, &format!("{at}/offset"))?, rate: parse_rational(rate, &format!("{at}/rate"))? }
        }
        DecaySpec::Stepped { offset, step, rate } => DecayProfile::Stepped {
            offset: parse_rational(offset, &format!("{at}/offset"))?,
            step: *step,
            rate: parse_rational(rate, &format!("{at}/rate"))?,
        },
        DecaySpec::Explicit { head, rate } => DecayProfile::Explicit {
            head: head
                .iter()
                .enumerate()
                .map(|(k, h)| parse_rational(h, &format!("{at}/head/{k}")).map(ValBound::Finite))
                .collect::<Result<_, _>>()?,
            rate: parse_rational(rate, &format!("{at}/rate"))?,
        },
    })
}

fn build_matrix<C: Entry>(
    spec: &MatrixSpec,
    n: usize,
    like: &C,
    at: &str,
    entry: &dyn Fn(&Value, &str) -> Result<C, LoadError>,
) -> Result<Matrix<C>, LoadError> {
    let schema = |at: &str, m: String| LoadError::one(LoadErrorKind::Schema, at, m);
    let mut m = Matrix::zeros(n, n, like);
    match spec {
        MatrixSpec::Dense { rows } => {
            if rows.len() != n {
                return Err(schema(&format!("{at}/rows"), format!("expected {n} rows, found {}", rows.len())));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(schema(&format!("{at}/rows/{i}"), format!("expected {n} entries, found {}", row.len())));
                }
                for (j, v) in row.iter().enumerate() {
                    m[(i, j)] = entry(v, &format!("{at}/rows/{i}/{j}"))?;
                }
            }
        }
        MatrixSpec::Diagonal { entries } => {
            if entries.len() != n {
                return Err(schema(&format!("{at}/entries"), format!("expected {n} entries, found {}", entries.len())));
            }
            for (i, v) in entries.iter().enumerate() {
                m[(i, i)] = entry(v, &format!("{at}/entries/{i}"))?;
            }
        }
        MatrixSpec::Banded { bands } => {
            for (key, band) in bands {
                let here = format!("{at}/bands/{}", pointer_escape(key));
                let k: i64 = key.trim().parse().map_err(|_| schema(&here, format!("bad band offset {key:?}")))?;
                let len = n.saturating_sub(k.unsigned_abs() as usize);
                if band.len() != len {
                    return Err(schema(&here, format!("band {k} needs {len} entries, found {}", band.len())));
                }
                for (t, v) in band.iter().enumerate() {
                    let (i, j) = if k >= 0 { (t, t + k as usize) } else { (t + k.unsigned_abs() as usize, t) };
                    m[(i, j)] = entry(v, &format!("{here}/{t}"))?;
                }
            }
        }
    }
    Ok(m)
}

fn build_session<C: Entry>(
    f: &DatumFile,
    like: C,
    rel: u32,
    entry: &dyn Fn(&Value, &str) -> Result<C, LoadError>,
    ctx: &Ctx,
    nvars: usize,
) -> Result<Session<C>, LoadError> {
    let n = f.module.size;
    let decay = decay_profile(&f.module.decay)?;
    let phi = build_matrix(&f.phi, n, &like, "/phi", entry)?;
    let phi = CompactOperator::new(phi, decay).map_err(|e| LoadError::one(LoadErrorKind::Validation, "/phi", e.to_string()))?;
    let mut hecke = Vec::with_capacity(f.hecke.len());
    for (name, spec) in &f.hecke {
        if name == "phi" {
            return Err(LoadError::one(LoadErrorKind::Schema, "/hecke/phi", "the name phi is reserved"));
        }
        hecke.push((name.clone(), build_matrix(spec, n, &like, &format!("/hecke/{}", pointer_escape(name)), entry)?));
    }
    let mut samples = Vec::with_capacity(f.samples.len());
    for (k, s) in f.samples.iter().enumerate() {
        samples.push(parse_sample(ctx, s, nvars, &format!("/samples/{k}"))?);
    }
    let datum = SpectralDatum::new(phi, hecke, f.x_degree_cap);
    let report = spectra::eigen::validate_datum(&datum);
    if !report.is_ok() {
        let violations = report
            .violations
            .iter()
            .map(|v| {
                let at = match v {
                    spectra::eigen::Violation::NonCommuting { left, right, .. } => format!("/hecke/{}", pointer_escape(if left == "phi" { right } else { left })),
                    spectra::eigen::Violation::SizeMismatch { name, .. } => format!("/hecke/{}", pointer_escape(name)),
                    spectra::eigen::Violation::NotCompact(_) => "/module/decay".to_string(),
                };
                (at, v.to_string())
            })
            .collect();
        return Err(LoadError { kind: LoadErrorKind::Validation, violations });
    }
    Ok(Session { datum, samples, p: f.p, rel })
}

fn parse_sample(ctx: &Ctx, v: &Value, nvars: usize, at: &str) -> Result<Vec<PadicScalar>, LoadError> {
    let coords = match v {
        Value::Array(cs) => cs.iter().enumerate().map(|(k, c)| ctx.scalar(c, &format!("{at}/{k}"))).collect::<Result<Vec<_>, _>>()?,
        other => vec![ctx.scalar(other, at)?; nvars],
    };
    if coords.len() != nvars {
        return Err(LoadError::one(LoadErrorKind::Schema, at, format!("expected {nvars} coordinates, found {}", coords.len())));
    }
    Ok(coords)
}

/// Parses a sample given on the command line: comma-separated coordinates,
/// or a single literal used for every coordinate.
pub fn parse_sample_arg(loaded: &Loaded, s: &str) -> Result<Vec<PadicScalar>, LoadError> {
    let (p, rel, nvars) = match loaded {
        Loaded::Field(x) => (x.p, x.rel, 0),
        Loaded::Affinoid(x) => (x.p, x.rel, x.datum.like().chart().nvars()),
    };
    let ctx = Ctx { p, rel, chart: None };
    let parts: Vec<Value> = s.split(',').map(|t| Value::String(t.trim().to_string())).collect();
    let v = if s.trim().is_empty() { Value::Array(Vec::new()) } else if parts.len() == 1 && nvars != 1 { parts[0].clone() } else { Value::Array(parts) };
    parse_sample(&ctx, &v, nvars, "/--samples")
}

/// Parses and validates a datum document.
pub fn load_str(text: &str, precision: Option<u32>) -> Result<Loaded, LoadError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| LoadError::one(LoadErrorKind::Parse, "", e.to_string()))?;
    let f: DatumFile = serde_json::from_value(raw).map_err(|e| LoadError::one(LoadErrorKind::Schema, "", e.to_string()))?;
    load_file(&f, precision)
}

pub fn load_path(path: &std::path::Path, precision: Option<u32>) -> Result<Loaded, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::one(LoadErrorKind::Parse, "", format!("{}: {e}", path.display())))?;
    load_str(&text, precision)
}

pub fn load_file(f: &DatumFile, precision: Option<u32>) -> Result<Loaded, LoadError> {
    let rel = precision.unwrap_or(f.relative_precision);
    let schema = |at: &str, m: String| LoadError::one(LoadErrorKind::Schema, at, m);
    // probes the prime and precision before anything is built from them
    PadicScalar::try_from_int(f.p, 1, rel).map_err(|e| schema("/p", e.to_string()))?;
    if f.module.size == 0 {
        return Err(schema("/module/size", "the module must be nonzero".into()));
    }
    match &f.base {
        BaseSpec::Field => {
            let ctx = Ctx { p: f.p, rel, chart: None };
            let entry = |v: &Value, at: &str| ctx.scalar(v, at);
            Ok(Loaded::Field(build_session(f, PadicScalar::zero(f.p), rel, &entry, &ctx, 0)?))
        }
        BaseSpec::Affinoid { var, vars, degree_bound } => {
            let mut names: Vec<&str> = vars.iter().map(String::as_str).collect();
            if let Some(v) = var {
                names.insert(0, v);
            }
            if names.is_empty() {
                return Err(schema("/base", "an affinoid base needs at least one variable".into()));
            }
            let chart = Chart::new(f.p, &names, *degree_bound, rel);
            let ctx = Ctx { p: f.p, rel, chart: Some(chart.clone()) };
            let entry = |v: &Value, at: &str| ctx.affinoid(ctx.chart.as_ref().expect("chart"), v, at);
            let nvars = chart.nvars();
            Ok(Loaded::Affinoid(build_session(f, AffinoidElement::zero(&chart), rel, &entry, &ctx, nvars)?))
        }
    }
}

fn rational_num(r: &Rational) -> Num {
    if r.is_integer() {
        Num::Int(r.to_integer())
    } else {
        Num::Text(fraction_string(r))
    }
}

fn decay_spec(d: &DecayProfile) -> DecaySpec {
    match d {
        DecayProfile::Finite => DecaySpec::Finite,
        DecayProfile::Geometric { offset, rate } => DecaySpec::Geometric { offset: rational_num(offset), rate: rational_num(rate) },
        DecayProfile::Stepped { offset, step, rate } => DecaySpec::Stepped { offset: rational_num(offset), step: *step, rate: rational_num(rate) },
        DecayProfile::Explicit { head, rate } => DecaySpec::Explicit {
            head: head.iter().map(|h| h.finite().map(|r| rational_num(&r)).unwrap_or(Num::Text("inf".into()))).collect(),
            rate: rational_num(rate),
        },
    }
}

fn dense<C: Entry>(m: &Matrix<C>) -> MatrixSpec {
    MatrixSpec::Dense { rows: (0..m.rows()).map(|i| m.row(i).iter().map(Entry::render).collect()).collect() }
}

/// Writes a session back out as a datum file with dense matrices.
pub fn emit<C: Entry>(s: &Session<C>) -> DatumFile {
    let like = s.datum.like();
    let vars = spectra::eigen::EigenBase::variables(like);
    let base = if vars.is_empty() {
        BaseSpec::Field
    } else {
        BaseSpec::Affinoid { var: None, vars: vars.clone(), degree_bound: C::degree_bound(like) }
    };
    DatumFile {
        p: s.p,
        relative_precision: s.rel,
        x_degree_cap: s.datum.degree_cap,
        base,
        module: ModuleSpec { size: s.datum.phi.size(), decay: decay_spec(s.datum.phi.decay()) },
        phi: dense(s.datum.phi.matrix()),
        hecke: s.datum.hecke.iter().map(|(n, t)| (n.clone(), dense(t))).collect(),
        samples: s.samples.iter().map(|pt| Value::Array(pt.iter().map(Entry::render).collect())).collect(),
    }
}

pub fn emit_loaded(l: &Loaded) -> DatumFile {
    match l {
        Loaded::Field(s) => emit(s),
        Loaded::Affinoid(s) => emit(s),
    }
}

/// Same operators, decay, cap and samples at precision.
pub fn equivalent<C: Entry>(a: &Session<C>, b: &Session<C>) -> bool {
    let (da, db) = (&a.datum, &b.datum);
    a.p == b.p
        && da.degree_cap == db.degree_cap
        && da.phi.decay() == db.phi.decay()
        && da.phi.size() == db.phi.size()
        && da.phi.matrix().agrees_with(db.phi.matrix())
        && da.hecke.len() == db.hecke.len()
        && da.hecke.iter().zip(&db.hecke).all(|((n1, t1), (n2, t2))| n1 == n2 && t1.agrees_with(t2))
        && a.samples.len() == b.samples.len()
        && a.samples.iter().zip(&b.samples).all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(u, v)| u.agrees_with(v)))
}

pub fn equivalent_loaded(a: &Loaded, b: &Loaded) -> bool {
    match (a, b) {
        (Loaded::Field(x), Loaded::Field(y)) => equivalent(x, y),
        (Loaded::Affinoid(x), Loaded::Affinoid(y)) => equivalent(x, y) && x.datum.like().chart().vars == y.datum.like().chart().vars,
        _ => false,
    }
}

/// Human-readable name of a monomial in the algebra generators.
pub fn generator_monomial(names: &[String], m: &[u32]) -> String {
    monomial_name(names, m)
}
