//! Command dispatch and report assembly.

use serde_json::{json, Map, Value};

use spectra::eigen::{
    base_change_piece, build_local_piece, fiber_eigensystems, slope_datum_search, Eigensystem, EigensystemReport, LocalEigenpiece,
};
use spectra::fredholm::{base_change_series, berkowitz, char_series, char_series_subset_oracle, tail_bound_violation, FredholmSeries, SeriesTail};
use spectra::newton::{newton_polygon, polygon_of_poly, slope_factorization, zero_order};
use spectra::operators::{lower_valuation, CompactOperator, Rational, ValBound};
use spectra::poly::Poly;
use spectra::riesz::{kernel_basis, projector_laws, q_star, restrict, same_span, slope_decomposition, Route, SlopeDecomposition};
use spectra::{Coeff, Error, Matrix, PadicScalar, Valuation};

use crate::datum::{emit, load_file, Loaded, Session};
use crate::render::{self, Entry};

/// Largest window on which the subset expansion is run by `verify`.
const ORACLE_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Charpoly,
    Polygon,
    Factor,
    Riesz,
    Eigen,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Charpoly => "charpoly",
            Command::Polygon => "polygon",
            Command::Factor => "factor",
            Command::Riesz => "riesz",
            Command::Eigen => "eigen",
            Command::Verify => "verify",
        }
    }

    pub fn needs_slope(self) -> bool {
        matches!(self, Command::Factor | Command::Riesz | Command::Eigen)
    }

    /// Commands whose payload has a tabular form.
    pub fn has_table(self) -> bool {
        matches!(self, Command::Polygon | Command::Eigen)
    }
}

#[derive(Clone, Debug)]
pub struct Request {
    pub command: Command,
    pub slope: Option<Rational>,
    pub degree: Option<usize>,
    pub samples: Option<Vec<Vec<PadicScalar>>>,
    pub seed: u64,
}

impl Request {
    /// Flag combinations the command accepts.
    pub fn check(&self) -> Result<(), String> {
        if self.command.needs_slope() && self.slope.is_none() {
            return Err(format!("{} needs --slope", self.command.name()));
        }
        if self.command == Command::Charpoly && self.degree.is_none() {
            return Err("charpoly needs --degree".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_tsv(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub payload: Value,
    pub table: Option<Table>,
    pub slack: Value,
    /// Some checked property failed (`verify` only).
    pub failed: bool,
}

pub fn run(loaded: &Loaded, req: &Request) -> Result<Outcome, Error> {
    match loaded {
        Loaded::Field(s) => run_on(s, req),
        Loaded::Affinoid(s) => run_on(s, req),
    }
}

/// Samples from the flags, then the file, then a default set.
fn samples<C: Entry>(s: &Session<C>, req: &Request) -> Vec<Vec<PadicScalar>> {
    if let Some(pts) = &req.samples {
        return pts.clone();
    }
    if !s.samples.is_empty() {
        return s.samples.clone();
    }
    let nvars = C::variables(s.datum.like()).len();
    if nvars == 0 {
        return vec![Vec::new()];
    }
    let p = s.p as i64;
    [0, 1, p, 1 + p].iter().map(|&x| vec![PadicScalar::from_int(s.p, x, s.rel); nvars]).collect()
}

fn series<C: Entry>(s: &Session<C>, req: &Request) -> Result<FredholmSeries<C>, Error> {
    char_series(&s.datum.phi, req.degree.unwrap_or(s.datum.degree_cap))
}

pub fn run_on<C: Entry>(s: &Session<C>, req: &Request) -> Result<Outcome, Error> {
    let plain = |payload: Value| Outcome { payload, table: None, slack: json!({}), failed: false };
    match req.command {
        Command::Charpoly => {
            let f = series(s, req)?;
            Ok(plain(charpoly_payload(s, &f)))
        }
        Command::Polygon => {
            let f = series(s, req)?;
            let np = newton_polygon(&f);
            let table = Table {
                header: vec!["slope".into(), "length".into(), "x_start".into()],
                rows: polygon_rows(&np),
            };
            Ok(Outcome { payload: render::polygon(&np), table: Some(table), slack: json!({}), failed: false })
        }
        Command::Factor => {
            let f = series(s, req)?;
            let h = req.slope.expect("checked");
            let fact = slope_factorization(&f, h)?;
            let q_poly = polygon_of_poly(&fact.q)?;
            Ok(plain(json!({
                "h": render::rational(&h),
                "degree": fact.degree(),
                "q": render::poly(&fact.q),
                "s": render::vector(fact.s.coeffs()),
                "q_slopes": q_poly.slope_multiset().iter().map(render::rational).collect::<Vec<_>>(),
                "bezout": {
                    "u": render::poly(&fact.bezout.u),
                    "v": render::poly(&fact.bezout.v),
                    "resultant": fact.bezout.resultant.render(),
                },
                "round_trip": fact.round_trip(&f),
            })))
        }
        Command::Riesz => {
            let f = series(s, req)?;
            let h = req.slope.expect("checked");
            let dec = slope_decomposition(&s.datum.phi, &f, h)?;
            let slack = json!({ "riesz_digits": dec.riesz.slack });
            Ok(Outcome { payload: riesz_payload(&dec), table: None, slack, failed: false })
        }
        Command::Eigen => eigen(s, req),
        Command::Verify => Ok(verify(s, req)),
    }
}

fn polygon_rows(np: &spectra::newton::NewtonPolygon) -> Vec<Vec<String>> {
    let mut x = 0;
    np.slopes()
        .into_iter()
        .map(|(sl, len)| {
            let row = vec![spectra::operators::fraction_string(&sl), len.to_string(), x.to_string()];
            x += len;
            row
        })
        .collect()
}

fn charpoly_payload<C: Entry>(s: &Session<C>, f: &FredholmSeries<C>) -> Value {
    let bounds = s.datum.phi.column_bounds();
    let tail = match f.tail() {
        SeriesTail::Exact => "exact",
        SeriesTail::Columns(_) => "columns",
        SeriesTail::Absent => "absent",
    };
    json!({
        "degree": f.degree_cap(),
        "coefficients": render::vector(f.coeffs()),
        "coefficient_bounds": (0..=f.degree_cap()).map(|n| render::valbound(&bounds.coefficient_bound(n))).collect::<Vec<_>>(),
        "tail": tail,
        "tail_violation": tail_bound_violation(f, &bounds),
    })
}

fn riesz_payload<C: Entry>(dec: &SlopeDecomposition<C>) -> Value {
    let r = &dec.riesz;
    json!({
        "h": render::rational(&dec.h),
        "rank": r.rank(),
        "route": match r.route { Route::Resolvant => "resolvant", Route::LinearAlgebra => "linear_algebra" },
        "q": render::poly(&r.q),
        "char_on_n": render::poly(&r.char_on_n),
        "char_on_complement": render::poly(&r.char_on_complement),
        "kernel_basis": r.kernel_basis.iter().map(|v| render::vector(v)).collect::<Vec<_>>(),
        "projector": render::matrix(&r.projector),
        "slopes": dec.slopes.iter().map(render::rational).collect::<Vec<_>>(),
    })
}

fn system_json(s: &Eigensystem) -> Value {
    let fp: Map<String, Value> = s.fingerprints.iter().map(|(n, f)| (n.clone(), render::vector(f))).collect();
    json!({
        "fingerprints": fp,
        "slope": s.slope.as_ref().map(render::rational),
        "multiplicity": s.multiplicity,
        "residue_degree": s.residue_degree,
        "reduced": s.reduced,
        "unsplit": s.unsplit,
    })
}

fn point_string(pt: &[PadicScalar]) -> String {
    if pt.is_empty() {
        "-".into()
    } else {
        pt.iter().map(|x| x.canonical()).collect::<Vec<_>>().join(",")
    }
}

fn algebra_json<C: Entry>(piece: &LocalEigenpiece<C>) -> Value {
    let alg = &piece.algebra;
    json!({
        "dim": alg.dim(),
        "basis": alg.basis.iter().map(|b| render::monomial_name(&alg.names, &b.monomial)).collect::<Vec<_>>(),
        "table": alg.table.iter().map(|row| row.iter().map(|v| render::vector(v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "commutative": alg.is_commutative(),
        "nilpotents": alg.radical.iter().map(|f| json!({ "element": render::vector(&f.element), "index": f.index })).collect::<Vec<_>>(),
        "has_nilpotents": alg.has_nilpotents(),
        "structural_map": piece.structural_map_holds(),
    })
}

fn eigen<C: Entry>(s: &Session<C>, req: &Request) -> Result<Outcome, Error> {
    let h = req.slope.expect("checked");
    let piece = build_local_piece(&s.datum, h)?;
    let pts = samples(s, req);
    let mut fibers = Vec::with_capacity(pts.len());
    let mut rows = Vec::new();
    for pt in &pts {
        let rep = fiber_eigensystems(&piece, pt, req.seed)?;
        let bc = base_change_piece(&piece, pt)?;
        for (k, sys) in rep.systems.iter().enumerate() {
            let fp: Vec<String> = sys
                .fingerprints
                .iter()
                .map(|(n, f)| format!("{n}=[{}]", f.iter().map(|c| c.canonical()).collect::<Vec<_>>().join("; ")))
                .collect();
            rows.push(vec![
                point_string(pt),
                k.to_string(),
                sys.slope.as_ref().map(spectra::operators::fraction_string).unwrap_or_else(|| "-".into()),
                sys.multiplicity.to_string(),
                sys.residue_degree.to_string(),
                sys.reduced.to_string(),
                fp.join(" "),
            ]);
        }
        fibers.push(json!({
            "point": render::vector(pt),
            "systems": rep.systems.iter().map(system_json).collect::<Vec<_>>(),
            "total_degree": rep.total_degree(),
            "base_change": {
                "source_dim": bc.source_dim,
                "target_dim": bc.target_dim,
                "surjective": bc.surjective,
                "kernel_dim": bc.kernel_dim,
                "nilpotency_index": bc.nilpotency_index,
                "tables_match": bc.tables_match,
            },
        }));
    }
    let slope_datum = if C::variables(s.datum.like()).is_empty() {
        Value::Null
    } else {
        let r = slope_datum_search(&piece.series, h, &pts)?;
        json!({
            "degree": r.degree,
            "fiber_degrees": r.fiber_degrees,
            "valid": r.is_valid(),
            "violation": r.violation,
        })
    };
    let payload = json!({
        "h": render::rational(&h),
        "rank": piece.rank(),
        "q": render::poly(piece.q()),
        "algebra": algebra_json(&piece),
        "slope_datum": slope_datum,
        "fibers": fibers,
    });
    let table = Table {
        header: ["point", "system", "slope", "multiplicity", "residue_degree", "reduced", "fingerprints"].map(String::from).to_vec(),
        rows,
    };
    Ok(Outcome { payload, table: Some(table), slack: json!({ "riesz_digits": piece.riesz.slack }), failed: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skipped,
}

struct Check {
    module: &'static str,
    name: &'static str,
    status: Status,
    detail: String,
}

fn check(module: &'static str, name: &'static str, r: Result<(bool, String), Error>) -> Check {
    let (status, detail) = match r {
        Ok((true, d)) => (Status::Pass, d),
        Ok((false, d)) => (Status::Fail, d),
        Err(e) => (Status::Fail, e.to_string()),
    };
    Check { module, name, status, detail }
}

fn skipped(module: &'static str, name: &'static str, why: &str) -> Check {
    Check { module, name, status: Status::Skipped, detail: why.into() }
}

fn ok(b: bool) -> Result<(bool, String), Error> {
    Ok((b, String::new()))
}

fn operator_checks<C: Entry>(s: &Session<C>, pts: &[Vec<PadicScalar>], out: &mut Vec<Check>) {
    let phi = &s.datum.phi;
    out.push(check("operators", "compactness", ok(phi.verify_compactness().is_certified())));
    out.push(check(
        "operators",
        "compose_norm",
        phi.compose(phi).map(|c| {
            let (lhs, rhs) = (c.norm_valuation(), phi.norm_valuation().plus(phi.norm_valuation()));
            (lhs >= rhs, format!("v(phi^2) = {lhs}, 2 v(phi) = {rhs}"))
        }),
    ));
    out.push(check("operators", "truncation_monotone", (|| {
        let mut last = ValBound::int(i64::MIN / 4);
        for m in 0..=phi.size() {
            let (t, err) = phi.truncate_finite_rank(m)?;
            let diff = phi.matrix().sub(t.matrix());
            let actual = diff.entries().filter(|x| !x.is_zero()).map(lower_valuation).min().unwrap_or(ValBound::Infinite);
            if err < last || actual < err {
                return Ok((false, format!("at m = {m}: bound {err}, actual {actual}")));
            }
            last = err;
        }
        ok(true)
    })()));
    out.push(check("operators", "base_change_compose", (|| {
        for pt in pts {
            let hom = C::fiber_hom(s.datum.like(), pt)?;
            let m = phi.matrix();
            let lhs = m.mul(m).apply_hom(&hom)?;
            let hm = m.apply_hom(&hom)?;
            if !lhs.agrees_with(&hm.mul(&hm)) {
                return Ok((false, format!("fails at {}", point_string(pt))));
            }
        }
        ok(true)
    })()));
}

fn fredholm_checks<C: Entry>(s: &Session<C>, f: &FredholmSeries<C>, pts: &[Vec<PadicScalar>], out: &mut Vec<Check>) {
    let phi = &s.datum.phi;
    let d = f.degree_cap();
    out.push(check("fredholm", "swap_identity", (|| {
        for (name, t) in &s.datum.hecke {
            let a = char_series(&phi.with_matrix(phi.matrix().mul(t))?, d)?;
            let b = char_series(&phi.with_matrix(t.mul(phi.matrix()))?, d)?;
            if !a.agrees_with(&b) {
                return Ok((false, format!("phi {name} and {name} phi differ")));
            }
        }
        ok(true)
    })()));
    out.push(if phi.is_finite() {
        check("fredholm", "block_multiplicativity", (|| {
            let sum = CompactOperator::finite(phi.matrix().direct_sum(phi.matrix()))?;
            let g = char_series(&sum, 2 * d)?;
            let sq = f.poly().times(f.poly());
            ok(g.poly().agrees_with(&sq.truncated(2 * d + 1)))
        })())
    } else {
        skipped("fredholm", "block_multiplicativity", "needs a finite module")
    });
    out.push(check("fredholm", "base_change_commutes", (|| {
        for pt in pts {
            let hom = C::fiber_hom(s.datum.like(), pt)?;
            let a = base_change_series(f, &hom)?;
            let b = char_series(&phi.base_change(&hom)?, d)?;
            if !a.agrees_with(&b) {
                return Ok((false, format!("fails at {}", point_string(pt))));
            }
        }
        ok(true)
    })()));
    out.push(check("fredholm", "tail_bound", Ok(match tail_bound_violation(f, &phi.column_bounds()) {
        None => (true, String::new()),
        Some(n) => (false, format!("coefficient {n} exceeds its bound")),
    })));
    out.push(if phi.size() <= ORACLE_LIMIT {
        check("fredholm", "oracle_equivalence", char_series_subset_oracle(phi, d).map(|g| (g.agrees_with(f), String::new())))
    } else {
        skipped("fredholm", "oracle_equivalence", "window too large for the subset expansion")
    });
}

fn leibniz<C: Coeff>(a: &Poly<C>, b: &Poly<C>, s: usize) -> bool {
    let lhs = a.times(b).delta(s);
    let rhs = (0..=s).fold(Poly::zero(a.zero_elem()), |acc, i| acc.plus(&a.delta(i).times(&b.delta(s - i))));
    lhs.agrees_with(&rhs)
}

fn newton_checks<C: Entry>(f: &FredholmSeries<C>, h: Rational, out: &mut Vec<Check>) {
    let fact = match slope_factorization(f, h) {
        Ok(x) => x,
        Err(e) => {
            for name in ["factorization_polygons", "round_trip", "delta_leibniz"] {
                out.push(check("newton", name, Err(e.clone())));
            }
            return;
        }
    };
    out.push(check("newton", "factorization_polygons", (|| {
        let want: Vec<Rational> = newton_polygon(f).slope_multiset().into_iter().filter(|x| *x <= h).collect();
        let got = polygon_of_poly(&fact.q)?.slope_multiset();
        let rest_ok = newton_polygon(&fact.s).slope_multiset().iter().all(|x| *x > h);
        ok(want == got && rest_ok)
    })()));
    out.push(check("newton", "round_trip", ok(fact.round_trip(f))));
    out.push(if matches!(f.tail(), SeriesTail::Exact) {
        check("newton", "zero_order", (|| {
            let one = f.poly().zero_elem().one_like();
            let k = zero_order(f, &one)?;
            let factor = Poly::one_minus(&one).pow(k as u32);
            let (g, r) = f.poly().trimmed().div_rem(&factor)?;
            ok(r.is_zero() && g.eval(&one).is_unit())
        })())
    } else {
        skipped("newton", "zero_order", "needs a polynomial series")
    });
    out.push(check("newton", "delta_leibniz", ok((0..=3).all(|k| leibniz(&fact.q, fact.s.poly(), k)))));
}

fn riesz_checks<C: Entry>(s: &Session<C>, f: &FredholmSeries<C>, h: Rational, out: &mut Vec<Check>) {
    let phi = s.datum.phi.matrix();
    let n = phi.rows();
    let dec = match slope_decomposition(&s.datum.phi, f, h) {
        Ok(d) => d,
        Err(e) => {
            for name in ["projector_laws", "complementarity", "multiplicativity", "route_agreement", "invertibility_witness", "eigenvalue_slopes"] {
                out.push(check("riesz", name, Err(e.clone())));
            }
            return;
        }
    };
    let r = &dec.riesz;
    let p = &r.projector;
    out.push(check("riesz", "projector_laws", ok(projector_laws(p, phi) == (true, true))));
    out.push(check("riesz", "complementarity", (|| {
        let comp = r.complement_projector();
        let sum_ok = p.add(&comp).agrees_with(&Matrix::identity(n, phi.zero_elem()));
        let cols: Vec<Vec<C>> = r.kernel_basis.iter().cloned().chain((0..n).map(|j| comp.column(j))).collect();
        let like = phi.zero_elem();
        let joined = Matrix::from_columns(&cols, n, like);
        ok(sum_ok && C::frac_rank(&joined) == n)
    })()));
    out.push(check("riesz", "multiplicativity", {
        let prod = r.char_on_n.times(&r.char_on_complement);
        let m = f.coeffs().len().min(prod.len());
        ok(prod.truncated(m).agrees_with(&f.poly().truncated(m)))
    }));
    out.push(check("riesz", "route_agreement", (|| {
        let psi = q_star(&r.q).eval_matrix(phi);
        let lin = kernel_basis(&psi, r.q.len() - 1)?;
        ok(same_span(&lin, &r.kernel_basis, phi.zero_elem())?)
    })()));
    out.push(check("riesz", "invertibility_witness", (|| {
        let Some(phi_n) = restrict(phi, &r.kernel_basis)? else { return Ok((false, "N is not stable".into())) };
        let want: Rational = dec.slopes.iter().sum();
        if phi_n.rows() == 0 {
            return ok(want == Rational::from_integer(0));
        }
        let det = berkowitz(&phi_n).pop().expect("nonempty");
        match det.valuation() {
            Valuation::Finite(v) => Ok((Rational::from_integer(v) == want, format!("v(det) = {v}, slope sum = {want}"))),
            Valuation::Infinity => Ok((false, "det vanishes at precision".into())),
        }
    })()));
    out.push(check("riesz", "eigenvalue_slopes", ok(dec.slopes.iter().all(|x| *x <= h))));
}

fn reduced_view(rep: &EigensystemReport) -> Vec<Vec<(String, Vec<String>)>> {
    let mut v: Vec<Vec<(String, Vec<String>)>> = rep
        .systems
        .iter()
        .map(|s| s.fingerprints.iter().map(|(n, f)| (n.clone(), f.iter().map(|c| c.canonical()).collect())).collect())
        .collect();
    v.sort();
    v
}

fn same_reduced(a: &EigensystemReport, b: &EigensystemReport) -> bool {
    a.systems.len() == b.systems.len()
        && a.systems.iter().all(|x| {
            b.systems.iter().any(|y| {
                x.fingerprints.len() == y.fingerprints.len()
                    && x.fingerprints.iter().zip(&y.fingerprints).all(|((n1, f1), (n2, f2))| {
                        n1 == n2 && f1.len() == f2.len() && f1.iter().zip(f2).all(|(c1, c2)| c1.agrees_with(c2))
                    })
            })
        })
}

fn eigen_checks<C: Entry>(s: &Session<C>, h: Rational, pts: &[Vec<PadicScalar>], seed: u64, out: &mut Vec<Check>) {
    let piece = match build_local_piece(&s.datum, h) {
        Ok(x) => x,
        Err(e) => {
            for name in ["commutative", "structural_map", "nilpotent_flags", "eigensystem_count", "slope_bound", "specialization_compatibility", "base_change_rigidity"] {
                out.push(check("eigen", name, Err(e.clone())));
            }
            return;
        }
    };
    let alg = &piece.algebra;
    let r = piece.rank();
    out.push(check("eigen", "commutative", ok(alg.is_commutative() && alg.dim() <= r * r)));
    out.push(check("eigen", "structural_map", ok(piece.structural_map_holds() && (!s.datum.hecke.is_empty() || alg.dim() == r))));
    out.push(check("eigen", "nilpotent_flags", ok(alg.radical.iter().all(|fl| match fl.index {
        Some(k) => alg.element(&fl.element, s.datum.like()).pow(k as u32).is_zero(),
        None => true,
    }))));
    let reports: Vec<Result<EigensystemReport, Error>> = pts.iter().map(|pt| fiber_eigensystems(&piece, pt, seed)).collect();
    out.push(check("eigen", "eigensystem_count", (|| {
        for rep in &reports {
            let rep = rep.as_ref().map_err(Clone::clone)?;
            if rep.total_degree() != r {
                return Ok((false, format!("degree {} at {}, rank {r}", rep.total_degree(), point_string(&rep.point))));
            }
        }
        ok(true)
    })()));
    out.push(check("eigen", "slope_bound", (|| {
        for rep in &reports {
            let rep = rep.as_ref().map_err(Clone::clone)?;
            if rep.systems.iter().any(|x| x.slope.is_some_and(|v| v > h)) {
                return Ok((false, format!("slope above h at {}", point_string(&rep.point))));
            }
        }
        ok(true)
    })()));
    out.push(check("eigen", "specialization_compatibility", (|| {
        for (pt, rep) in pts.iter().zip(&reports) {
            let rep = rep.as_ref().map_err(Clone::clone)?;
            let fiber = build_local_piece(&s.datum.specialize(pt)?, h)?;
            let direct = fiber_eigensystems(&fiber, &[], seed)?;
            if !same_reduced(rep, &direct) {
                return Ok((false, format!("{:?} vs {:?} at {}", reduced_view(rep), reduced_view(&direct), point_string(pt))));
            }
        }
        ok(true)
    })()));
    out.push(check("eigen", "base_change_rigidity", (|| {
        for pt in pts {
            let bc = base_change_piece(&piece, pt)?;
            if !bc.surjective {
                return Ok((false, format!("not surjective at {}", point_string(pt))));
            }
        }
        ok(true)
    })()));
}

fn cli_checks<C: Entry>(s: &Session<C>, req: &Request, out: &mut Vec<Check>) {
    out.push(check("cli", "round_trip", (|| {
        let back = load_file(&emit(s), None).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let same = match (&back, C::variables(s.datum.like()).is_empty()) {
            (Loaded::Field(b), true) => emit(b) == emit(s),
            (Loaded::Affinoid(b), false) => emit(b) == emit(s),
            _ => false,
        };
        ok(same)
    })()));
    out.push(check("cli", "determinism", (|| {
        let again = Request { command: Command::Polygon, ..req.clone() };
        let a = run_on(s, &again)?;
        let b = run_on(s, &again)?;
        ok(serde_json::to_string(&a.payload).ok() == serde_json::to_string(&b.payload).ok())
    })()));
}

fn verify<C: Entry>(s: &Session<C>, req: &Request) -> Outcome {
    let pts = samples(s, req);
    let mut out = Vec::new();
    operator_checks(s, &pts, &mut out);
    match series(s, req) {
        Ok(f) => {
            fredholm_checks(s, &f, &pts, &mut out);
            match req.slope {
                Some(h) => {
                    newton_checks(&f, h, &mut out);
                    riesz_checks(s, &f, h, &mut out);
                    eigen_checks(s, h, &pts, req.seed, &mut out);
                }
                None => {
                    for (m, n) in [("newton", "slope dependent"), ("riesz", "slope dependent"), ("eigen", "slope dependent")] {
                        out.push(skipped(m, "all", &format!("{n}: pass --slope")));
                    }
                }
            }
        }
        Err(e) => out.push(check("fredholm", "char_series", Err(e))),
    }
    cli_checks(s, req, &mut out);
    let failed = out.iter().any(|c| c.status == Status::Fail);
    let props: Vec<Value> = out
        .iter()
        .map(|c| {
            json!({
                "module": c.module,
                "name": c.name,
                "status": match c.status { Status::Pass => "pass", Status::Fail => "fail", Status::Skipped => "skipped" },
                "detail": c.detail,
            })
        })
        .collect();
    Outcome { payload: json!({ "properties": props, "passed": !failed }), table: None, slack: json!({}), failed }
}

/// Variant name of an error, for the report.
pub fn error_kind(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

/// Full report around an outcome or an error.
pub fn report(datum: &str, req: &Request, precision: Option<u32>, result: &Result<Outcome, Error>) -> Value {
    let request = json!({
        "command": req.command.name(),
        "datum": datum,
        "slope": req.slope.as_ref().map(render::rational),
        "degree": req.degree,
        "samples": req.samples.as_ref().map(|pts| pts.iter().map(|pt| render::vector(pt)).collect::<Vec<_>>()),
        "precision": precision,
        "seed": req.seed,
    });
    match result {
        Ok(o) => json!({
            "request": request,
            "status": if o.failed { "fail" } else { "ok" },
            "payload": o.payload,
            "slack": o.slack,
        }),
        Err(e) => json!({
            "request": request,
            "status": "error",
            "error": { "kind": error_kind(e), "message": e.to_string() },
            "slack": {},
        }),
    }
}
