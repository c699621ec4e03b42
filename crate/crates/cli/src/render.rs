//! Canonical JSON renderings of ring elements and exact rationals.

use serde_json::{json, Map, Value};

use spectra::eigen::EigenBase;
use spectra::newton::NewtonPolygon;
use spectra::operators::{fraction_string, Rational, ValBound};
use spectra::poly::Poly;
use spectra::{AffinoidElement, Matrix, PadicScalar};

/// Coefficient rings the front end can read and write.
pub trait Entry: EigenBase {
    fn render(&self) -> Value;
    /// Degree bound of the chart (0 over the field).
    fn degree_bound(like: &Self) -> u32;
}

impl Entry for PadicScalar {
    fn render(&self) -> Value {
        Value::String(self.canonical())
    }

    fn degree_bound(_: &Self) -> u32 {
        0
    }
}

impl Entry for AffinoidElement {
    /// `{monomial: coefficient}`; the zero element is `{}`.
    fn render(&self) -> Value {
        let vars = &self.chart().vars;
        let terms: Map<String, Value> = self.terms().map(|(m, c)| (monomial_name(vars, m), Value::String(c.canonical()))).collect();
        Value::Object(terms)
    }

    fn degree_bound(like: &Self) -> u32 {
        like.chart().degree_bound
    }
}

/// `"1"` or `"T1^2*T2"`.
pub fn monomial_name(names: &[String], m: &[u32]) -> String {
    let parts: Vec<String> = names
        .iter()
        .zip(m)
        .filter(|(_, e)| **e > 0)
        .map(|(n, e)| if *e == 1 { n.clone() } else { format!("{n}^{e}") })
        .collect();
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

pub fn rational(r: &Rational) -> Value {
    Value::String(fraction_string(r))
}

pub fn valbound(v: &ValBound) -> Value {
    match v {
        ValBound::Finite(r) => rational(r),
        ValBound::Infinite => Value::String("inf".into()),
    }
}

pub fn poly<C: Entry>(q: &Poly<C>) -> Value {
    Value::Array(q.coeffs().iter().map(Entry::render).collect())
}

pub fn vector<C: Entry>(v: &[C]) -> Value {
    Value::Array(v.iter().map(Entry::render).collect())
}

/// Row-major.
pub fn matrix<C: Entry>(m: &Matrix<C>) -> Value {
    Value::Array((0..m.rows()).map(|i| vector(&m.row(i))).collect())
}

pub fn polygon(np: &NewtonPolygon) -> Value {
    let vertices: Vec<Value> = np.vertices.iter().map(|(x, y)| json!({ "x": x, "y": rational(y) })).collect();
    let mut x = 0;
    let segments: Vec<Value> = np
        .slopes()
        .into_iter()
        .map(|(s, len)| {
            let seg = json!({ "slope": rational(&s), "length": len, "x_start": x });
            x += len;
            seg
        })
        .collect();
    let terminal = match &np.terminal {
        spectra::newton::Terminal::Finite => json!({ "kind": "finite" }),
        spectra::newton::Terminal::Open { next_slope_at_least } => {
            json!({ "kind": "open", "next_slope_at_least": next_slope_at_least.as_ref().map(rational) })
        }
    };
    json!({ "vertices": vertices, "segments": segments, "terminal": terminal })
}
