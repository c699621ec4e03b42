//! End-to-end acceptance suite. Prints one line per criterion and exits
//! non-zero if any criterion fails, except the documented ones listed in
//! `KNOWN_UNATTAINABLE`.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectra::eigen::{
    base_change_piece, build_local_piece, fiber_eigensystems, glue_check, worked_example, EigenBase, EigensystemReport,
    LocalEigenpiece, SpectralDatum,
};
use spectra::fredholm::{char_series, char_series_subset_oracle, tail_bound_violation, FredholmSeries};
use spectra::newton::{newton_polygon, polygon_of_poly, slope, slope_factorization, Terminal};
use spectra::operators::{CompactOperator, DecayProfile, Rational};
use spectra::riesz::{kernel_basis, q_star, riesz_from_factorization, riesz_from_zero, same_span};
use spectra::{AffinoidElement, Chart, Coeff, Matrix, PadicScalar};

/// Criterion 5 asks for `c_1 = 1 mod 2^24` on a 16 x 16 window, where the
/// true coefficient is `1 - 2^16`.
const KNOWN_UNATTAINABLE: &[usize] = &[5];

const REL: u32 = 20;

#[derive(Default)]
struct Suite {
    series: usize,
    tail_violations: Vec<String>,
    systems: usize,
    slope_violations: Vec<String>,
}

impl Suite {
    fn record_series<C: Coeff>(&mut self, what: &str, phi: &CompactOperator<C>, f: &FredholmSeries<C>) {
        self.series += 1;
        if let Some(n) = tail_bound_violation(f, &phi.column_bounds()) {
            self.tail_violations.push(format!("{what}: c_{n} = {} against {}", f.coeffs()[n], phi.column_bounds().coefficient_bound(n)));
        }
    }

    fn record_systems(&mut self, what: &str, h: Rational, rep: &EigensystemReport) {
        for s in &rep.systems {
            self.systems += 1;
            if s.slope.map_or(false, |v| v > h) {
                self.slope_violations.push(format!("{what}: slope {:?} > {h}", s.slope));
            }
        }
    }
}

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Debug>(what: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{what}: {e:?}")
}

// ---------- random models ----------

fn sc(p: u64, n: i64) -> PadicScalar {
    PadicScalar::from_int(p, n, REL)
}

fn random_entry(rng: &mut ChaCha8Rng, p: u64) -> PadicScalar {
    if rng.gen_bool(0.2) {
        return PadicScalar::zero(p);
    }
    let e = rng.gen_range(0..3u32);
    let u = BigInt::from(rng.gen_range(1..i64::MAX / 4));
    PadicScalar::from_bigint(p, &(BigInt::from(p).pow(e) * u), REL)
}

fn random_matrix(rng: &mut ChaCha8Rng, p: u64, n: usize, column_decay: bool) -> Matrix<PadicScalar> {
    let rows = (0..n)
        .map(|_| {
            (0..n)
                .map(|j| {
                    let x = random_entry(rng, p);
                    if column_decay {
                        x.mul(&sc(p, (p as i64).pow(j as u32)))
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    Matrix::from_rows(rows, &PadicScalar::zero(p))
}

/// Integer matrix with an integer inverse, as a product of elementary moves.
fn unimodular(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let id = |n: usize| (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect::<Vec<Vec<i64>>>();
    let (mut g, mut g_inv) = (id(n), id(n));
    if n < 2 {
        return (g, g_inv);
    }
    for _ in 0..2 * n {
        let i = rng.gen_range(0..n);
        let j = (i + rng.gen_range(1..n)) % n;
        let c = [-2, -1, 1, 2][rng.gen_range(0..4)];
        // g <- g E, E = 1 + c e_ij adds c * column i to column j
        for row in g.iter_mut() {
            row[j] += c * row[i];
        }
        // g_inv <- E^-1 g_inv subtracts c * row j from row i
        let rj = g_inv[j].clone();
        for (x, y) in g_inv[i].iter_mut().zip(rj) {
            *x -= c * y;
        }
    }
    (g, g_inv)
}

fn int_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn conjugate(g: &(Vec<Vec<i64>>, Vec<Vec<i64>>), m: &[Vec<i64>]) -> Vec<Vec<i64>> {
    int_mul(&int_mul(&g.0, m), &g.1)
}

fn to_padic(p: u64, m: &[Vec<i64>]) -> Matrix<PadicScalar> {
    Matrix::from_rows(m.iter().map(|r| r.iter().map(|&x| sc(p, x)).collect()).collect(), &PadicScalar::zero(p))
}

fn unit(rng: &mut ChaCha8Rng, p: u64) -> i64 {
    loop {
        let u = rng.gen_range(1..(p * p) as i64 + 1);
        if u % p as i64 != 0 {
            return u;
        }
    }
}

/// Block upper-triangular model: Jordan blocks `[[l, 1], [0, l]]` and scalars,
/// with `l = p^e u`. Returns the matrix and the valuations of its eigenvalues.
fn block_model(rng: &mut ChaCha8Rng, p: u64, n: usize) -> (Vec<Vec<i64>>, Vec<u32>) {
    let mut m = vec![vec![0i64; n]; n];
    let mut vals = Vec::new();
    let mut i = 0;
    while i < n {
        let e = rng.gen_range(0..3u32);
        let l = (p as i64).pow(e) * unit(rng, p);
        m[i][i] = l;
        vals.push(e);
        if i + 1 < n && rng.gen_bool(0.3) {
            m[i + 1][i + 1] = l;
            m[i][i + 1] = 1;
            vals.push(e);
            i += 1;
        }
        i += 1;
    }
    (m, vals)
}

// ---------- exact oracle over Q ----------

fn q(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn rank_q(mut a: Vec<Vec<BigRational>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, piv);
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = &a[i][c] / &a[r][c];
                let pr = a[r].clone();
                for (x, y) in a[i].iter_mut().zip(&pr) {
                    *x -= &f * y;
                }
            }
        }
        r += 1;
    }
    r
}

fn shifted_power(m: &[Vec<i64>], l: i64) -> Vec<Vec<BigRational>> {
    let n = m.len();
    let a: Vec<Vec<BigRational>> = (0..n).map(|i| (0..n).map(|j| q(m[i][j] - if i == j { l } else { 0 })).collect()).collect();
    let mut out: Vec<Vec<BigRational>> = (0..n).map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect();
    for _ in 0..n {
        out = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| &out[i][k] * &a[k][j]).sum()).collect()).collect();
    }
    out
}

/// Coefficients of `det(x - m)` by Faddeev-LeVerrier, constant term first.
fn char_poly_q(m: &[Vec<i64>]) -> Vec<BigRational> {
    let n = m.len();
    let a: Vec<Vec<BigRational>> = m.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect();
    let mut coeffs = vec![BigRational::zero(); n + 1];
    coeffs[n] = BigRational::one();
    let mut mk: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next: Vec<Vec<BigRational>> = (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| &a[i][l] * &mk[l][j]).sum()).collect()).collect();
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &coeffs[n - k + 1];
        }
        let am: Vec<Vec<BigRational>> = (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| &a[i][l] * &next[l][j]).sum()).collect()).collect();
        let tr: BigRational = (0..n).map(|i| am[i][i].clone()).sum();
        coeffs[n - k] = -tr / q(k as i64);
        mk = next;
    }
    coeffs
}

/// Integer roots, by testing every divisor of the lowest nonzero coefficient.
fn integer_roots(m: &[Vec<i64>]) -> Vec<i64> {
    let cp = char_poly_q(m);
    let low = cp.iter().find(|c| !c.is_zero()).expect("monic").to_integer().abs();
    let low: i64 = low.try_into().expect("small");
    let eval = |x: i64| cp.iter().rev().fold(BigRational::zero(), |acc, c| acc * q(x) + c);
    let mut cands: Vec<i64> = (1..).take_while(|d| d * d <= low).filter(|d| low % d == 0).flat_map(|d| [d, -d, low / d, -low / d]).collect();
    cands.push(0);
    cands.sort();
    cands.dedup();
    cands.into_iter().filter(|&x| eval(x).is_zero()).collect()
}

/// `(lambda(phi), lambda(t), dim)` for every joint generalized eigenspace.
fn oracle_systems(phi: &[Vec<i64>], t: &[Vec<i64>]) -> Vec<(i64, i64, usize)> {
    let n = phi.len();
    let mut out = Vec::new();
    for l in integer_roots(phi).into_iter().filter(|&l| l != 0) {
        for mu in integer_roots(t) {
            let mut stacked = shifted_power(phi, l);
            stacked.extend(shifted_power(t, mu));
            let dim = n - rank_q(stacked);
            if dim > 0 {
                out.push((l, mu, dim));
            }
        }
    }
    out.sort();
    out
}

// ---------- criteria ----------

fn criterion_1(suite: &mut Suite) -> Outcome {
    let start = Instant::now();
    for p in [2u64, 5] {
        let d = worked_example(p, REL);
        let f = char_series(&d.phi, 4).map_err(fail("char_series"))?;
        suite.record_series("worked example", &d.phi, &f);
        let like = d.like();
        let want = [1, -2, 1, 0, 0];
        ensure(f.coeffs().iter().zip(want).all(|(c, w)| c.agrees_with(&like.int_like(w))), || format!("p = {p}: series is not (1 - X)^2"))?;
        let piece = build_local_piece(&d, slope(0, 1)).map_err(fail("local piece"))?;
        ensure(piece.algebra.has_nilpotents(), || format!("p = {p}: no nilpotent flagged"))?;
        let origin = vec![PadicScalar::zero(p); 2];
        let rep = fiber_eigensystems(&piece, &origin, 0).map_err(fail("fiber"))?;
        suite.record_systems("worked example", piece.h, &rep);
        ensure(rep.systems.len() == 1 && rep.systems[0].reduced, || format!("p = {p}: fiber at the origin is not a single reduced point"))?;
        let bc = base_change_piece(&piece, &origin).map_err(fail("base change"))?;
        ensure(bc.surjective && bc.kernel_dim > 0 && bc.nilpotency_index >= 1, || format!("p = {p}: {bc:?}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.2} s"))?;
    Ok(format!("p = 2, 5: (1-X)^2, nilpotents, reduced origin fiber with nilpotent kernel ({secs:.3} s)"))
}

fn criterion_2(suite: &mut Suite, rng: &mut ChaCha8Rng) -> Outcome {
    let mut count = 0;
    for k in 0..210 {
        let p = [2u64, 3, 5][k % 3];
        let n = rng.gen_range(1..=6);
        let phi = CompactOperator::finite(random_matrix(rng, p, n, false)).map_err(fail("operator"))?;
        let f = char_series(&phi, n).map_err(fail("char_series"))?;
        let o = char_series_subset_oracle(&phi, n).map_err(fail("oracle"))?;
        suite.record_series("oracle", &phi, &f);
        ensure(f.coeffs().len() == o.coeffs().len() && f.coeffs().iter().zip(o.coeffs()).all(|(a, b)| a.agrees_with(b)), || {
            format!("p = {p}, size {n}: {} vs {}", f.poly(), o.poly())
        })?;
        count += 1;
    }
    Ok(format!("{count} random matrices agree with the subset expansion"))
}

fn criterion_3(suite: &mut Suite, rng: &mut ChaCha8Rng) -> Outcome {
    let (mut count, mut windowed_count) = (0, 0);
    for k in 0..120 {
        let p = [2u64, 3, 5][k % 3];
        let windowed = k % 4 == 0;
        let n = rng.gen_range(if windowed { 4 } else { 1 }..=8);
        let make = |m: Matrix<PadicScalar>| {
            if windowed {
                CompactOperator::new(m, DecayProfile::geometric(0, 1))
            } else {
                CompactOperator::finite(m)
            }
        };
        let phi = make(random_matrix(rng, p, n, windowed)).map_err(fail("operator"))?;
        let v = make(random_matrix(rng, p, n, windowed)).map_err(fail("operator"))?;
        let pv = phi.compose(&v).map_err(fail("compose"))?;
        let vp = v.compose(&phi).map_err(fail("compose"))?;
        // a window certifies only the leading coefficients
        let both = |d: usize| Some((char_series(&pv, d).ok()?, char_series(&vp, d).ok()?));
        let (a, b) = (1..=n).rev().find_map(both).ok_or_else(|| format!("p = {p}, size {n}: no coefficient certified"))?;
        suite.record_series("swap", &pv, &a);
        suite.record_series("swap", &vp, &b);
        ensure(a.agrees_with(&b), || format!("p = {p}, size {n}: {} vs {}", a.poly(), b.poly()))?;
        count += 1;
        windowed_count += usize::from(windowed);
    }
    Ok(format!("{count} pairs ({windowed_count} windowed) satisfy det(1 - X phi v) = det(1 - X v phi)"))
}

fn criterion_5(suite: &mut Suite) -> Outcome {
    let p = 2;
    let n = 16;
    let z = PadicScalar::zero(p);
    let entries: Vec<PadicScalar> = (0..n).map(|j| PadicScalar::from_int(p, 1 << j, 24)).collect();
    let phi = CompactOperator::finite(Matrix::diagonal(&entries, &z)).map_err(fail("operator"))?;
    let f = char_series(&phi, n).map_err(fail("char_series"))?;
    suite.record_series("diag(2^j)", &phi, &f);

    let np = newton_polygon(&f);
    let want: Vec<(usize, Rational)> = (0..=n).map(|k| (k, Rational::from_integer((k * k.saturating_sub(1) / 2) as i64))).collect();
    ensure(np.vertices == want && np.terminal == Terminal::Finite, || format!("polygon {np}"))?;

    let fact = slope_factorization(&f, slope(5, 2)).map_err(fail("factorization"))?;
    let slopes = polygon_of_poly(&fact.q).map_err(fail("polygon of Q"))?.slope_multiset();
    ensure(fact.degree() == 3 && slopes == vec![slope(0, 1), slope(1, 1), slope(2, 1)], || format!("Q has slopes {slopes:?}"))?;

    // the same model as a window onto diag(2^j, j >= 0)
    let window = CompactOperator::new(Matrix::diagonal(&entries, &z), DecayProfile::geometric(0, 1)).map_err(fail("operator"))?;
    let g = char_series(&window, n).map_err(fail("char_series"))?;
    suite.record_series("diag(2^j) window", &window, &g);

    let c1 = &f.coeffs()[1];
    let finite_value = PadicScalar::from_int(p, 1 - (1 << 16), 24);
    ensure(c1.agrees_with(&finite_value), || format!("c_1 = {c1}"))?;
    let g1 = &g.coeffs()[1];
    if c1.agrees_with(&PadicScalar::from_int(p, 1, 24)) {
        Ok("vertices (n, n(n-1)/2), c_1 = 1 mod 2^24, deg Q = 3 with slopes 0, 1, 2".into())
    } else {
        Err(format!(
            "vertices and h = 5/2 factorization hold; c_1 = 1 - 2^16 = {c1} is not 1 mod 2^24 (the window series gives {g1}, i.e. 1 mod 2^{})",
            g1.abs_precision().unwrap_or(0)
        ))
    }
}

fn criterion_6(suite: &mut Suite, rng: &mut ChaCha8Rng) -> Outcome {
    let mut count = 0;
    let mut slack = 0;
    for k in 0..60 {
        let p = [2u64, 3, 5][k % 3];
        let n = rng.gen_range(2..=5);
        let (model, vals) = block_model(rng, p, n);
        let g = unimodular(rng, n);
        let phi = CompactOperator::finite(to_padic(p, &conjugate(&g, &model))).map_err(fail("operator"))?;
        let f = char_series(&phi, n).map_err(fail("char_series"))?;
        suite.record_series("riesz", &phi, &f);
        let h = rng.gen_range(0..3i64);
        let expected = vals.iter().filter(|&&e| i64::from(e) <= h).count();

        let fact = slope_factorization(&f, slope(h, 1)).map_err(fail("factorization"))?;
        ensure(fact.round_trip(&f), || format!("case {k}: F != Q S"))?;
        let dec = riesz_from_factorization(&phi, &f, &fact).map_err(fail("riesz"))?;
        ensure(dec.rank() == fact.degree() && dec.rank() == expected, || format!("case {k}: rank {} vs deg Q {} vs {expected}", dec.rank(), fact.degree()))?;
        ensure(dec.char_on_n.agrees_with(&fact.q), || format!("case {k}: char on N is {} not {}", dec.char_on_n, fact.q))?;

        // both routes, recomputed independently
        let lin = kernel_basis(&q_star(&fact.q).eval_matrix(phi.matrix()), fact.degree()).map_err(fail("kernel"))?;
        let like = PadicScalar::zero(p);
        let proj_cols: Vec<Vec<PadicScalar>> = (0..n).map(|j| dec.projector.column(j)).filter(|c| c.iter().any(|x| !x.is_zero())).collect();
        ensure(same_span(&lin, &proj_cols, &like).map_err(fail("span"))?, || format!("case {k}: routes disagree"))?;
        if expected > 0 {
            // a root of the slope-0 part, when there is one, also goes through the zero route
            let unit_roots: Vec<i64> = (0..n).filter(|&i| vals[i] == 0).map(|i| model[i][i]).collect();
            if let Some(&l) = unit_roots.first() {
                let inv = sc(p, l).inverse_to_precision().map_err(fail("inverse"))?;
                let mult = unit_roots.iter().filter(|&&x| sc(p, x).agrees_with(&sc(p, l))).count();
                let zr = riesz_from_zero(&phi, &f, &inv, mult).map_err(fail("zero route"))?;
                ensure(zr.rank() == mult, || format!("case {k}: zero route rank {}", zr.rank()))?;
            }
        }
        slack = slack.max(dec.slack);
        count += 1;
    }
    Ok(format!("{count} conjugated block models: routes agree, rank = deg Q, char(phi|N) = Q, F = Q S (max slack {slack})"))
}

fn check_base_change<C: EigenBase>(suite: &mut Suite, what: &str, piece: &LocalEigenpiece<C>, point: &[PadicScalar], identity: bool) -> Result<(), String> {
    let bc = base_change_piece(piece, point).map_err(fail("base change"))?;
    ensure(bc.surjective, || format!("{what}: not surjective"))?;
    ensure(bc.kernel_dim == 0 || (1..=piece.rank().max(1)).contains(&bc.nilpotency_index), || format!("{what}: kernel not nilpotent within rank: {bc:?}"))?;
    if identity {
        ensure(bc.is_isomorphism() && bc.tables_match, || format!("{what}: identity base change is not an isomorphism: {bc:?}"))?;
    }
    let rep = fiber_eigensystems(piece, point, 0).map_err(fail("fiber"))?;
    suite.record_systems(what, piece.h, &rep);
    Ok(())
}

fn diagonal_family(p: u64) -> SpectralDatum<AffinoidElement> {
    let chart = Chart::univariate(p, 2, REL);
    let c = |n| AffinoidElement::from_int(&chart, n);
    let w = AffinoidElement::variable(&chart, "w").expect("chart variable");
    let phi = Matrix::diagonal(&[c(1).plus(&w.scale(&sc(p, p as i64))), c(1), c(p as i64)], &c(0));
    let t = Matrix::diagonal(&[w, c(2), c(3)], &c(0));
    SpectralDatum::new(CompactOperator::finite(phi).expect("square"), vec![("t".into(), t)], 3)
}

fn criterion_8(suite: &mut Suite, rng: &mut ChaCha8Rng) -> Outcome {
    let mut count = 0;
    for p in [2u64, 5] {
        let d = worked_example(p, REL);
        let piece = build_local_piece(&d, slope(0, 1)).map_err(fail("local piece"))?;
        for pt in [[0, 0], [p as i64, 0], [0, 1], [1, 1]] {
            let point: Vec<PadicScalar> = pt.iter().map(|&x| sc(p, x)).collect();
            check_base_change(suite, &format!("worked example at {pt:?}"), &piece, &point, false)?;
            count += 1;
        }
        let d = diagonal_family(p);
        for h in [0, 1] {
            let piece = build_local_piece(&d, slope(h, 1)).map_err(fail("local piece"))?;
            for x in [0, 1, p as i64] {
                check_base_change(suite, &format!("diagonal family at w = {x}"), &piece, &[sc(p, x)], false)?;
                count += 1;
            }
        }
    }
    for k in 0..20 {
        let p = [3u64, 5][k % 2];
        let n = rng.gen_range(1..=4);
        let (model, _) = block_model(rng, p, n);
        let g = unimodular(rng, n);
        let t: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if i == j { unit(rng, p) } else { 0 }).collect()).collect();
        // t commutes with the model only where the model is diagonal; use a polynomial in phi instead
        let t = if model.iter().enumerate().any(|(i, r)| r.iter().enumerate().any(|(j, &x)| i != j && x != 0)) { int_mul(&model, &model) } else { t };
        let d = SpectralDatum::new(
            CompactOperator::finite(to_padic(p, &conjugate(&g, &model))).map_err(fail("operator"))?,
            vec![("t".into(), to_padic(p, &conjugate(&g, &t)))],
            n,
        );
        let piece = build_local_piece(&d, slope(2, 1)).map_err(fail("local piece"))?;
        check_base_change(suite, &format!("field datum {k}"), &piece, &[], true)?;
        count += 1;
    }
    Ok(format!("{count} specializations: surjective with nilpotent kernel; identity cases isomorphic with equal tables"))
}

fn criterion_9(rng: &mut ChaCha8Rng) -> Outcome {
    let mut count = 0;
    for k in 0..24 {
        let p = [3u64, 5][k % 2];
        let n = rng.gen_range(2..=4);
        let phi: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if i == j { (p as i64).pow(rng.gen_range(0..3)) * unit(rng, p) } else { 0 }).collect()).collect();
        let t: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if i == j { rng.gen_range(1..6) } else { 0 }).collect()).collect();
        let conjugated = k % 2 == 1;
        let g = if conjugated { unimodular(rng, n) } else { unimodular(rng, 1) };
        let (phi, t) = if conjugated { (conjugate(&g, &phi), conjugate(&g, &t)) } else { (phi, t) };
        let d = SpectralDatum::new(CompactOperator::finite(to_padic(p, &phi)).map_err(fail("operator"))?, vec![("t".into(), to_padic(p, &t))], n);
        let h1 = rng.gen_range(-1..2i64);
        let h2 = h1 + rng.gen_range(0..2i64);
        let inner = build_local_piece(&d, slope(h1, 1)).map_err(fail("inner piece"))?;
        let outer = build_local_piece(&d, slope(h2, 1)).map_err(fail("outer piece"))?;
        let rep = glue_check(&inner, &outer, d.phi.matrix()).map_err(fail("glue"))?;
        ensure(rep.passes(), || format!("case {k} (h = {h1}, {h2}, conjugated {conjugated}): {rep:?}"))?;
        count += 1;
    }
    Ok(format!("{count} nested instances glue and intertwine the Hecke restrictions"))
}

fn criterion_10(suite: &mut Suite, rng: &mut ChaCha8Rng) -> Outcome {
    let mut count = 0;
    for k in 0..40 {
        let p = [3u64, 5][k % 2];
        let n = rng.gen_range(1..=4);
        let (model, _) = block_model(rng, p, n);
        // t is a polynomial in the model plus a diagonal part on its scalar blocks
        let mut t = int_mul(&model, &model);
        for i in 0..n {
            let in_jordan = (i + 1 < n && model[i][i + 1] != 0) || (i > 0 && model[i - 1][i] != 0);
            if !in_jordan {
                t[i][i] = rng.gen_range(-3..4);
            }
        }
        let g = unimodular(rng, n);
        let (phi, t) = (conjugate(&g, &model), conjugate(&g, &t));
        let d = SpectralDatum::new(CompactOperator::finite(to_padic(p, &phi)).map_err(fail("operator"))?, vec![("t".into(), to_padic(p, &t))], n);
        let h = slope(3, 1);
        let piece = build_local_piece(&d, h).map_err(fail("local piece"))?;
        let rep = fiber_eigensystems(&piece, &[], k as u64).map_err(fail("fiber"))?;
        suite.record_systems("oracle fiber", h, &rep);

        let want = oracle_systems(&phi, &t);
        let mut got = Vec::new();
        for s in &rep.systems {
            let (Some(l), Some(mu)) = (s.eigenvalue("phi"), s.eigenvalue("t")) else {
                return Err(format!("case {k}: non-rational system {s:?}"));
            };
            let find = |v: &PadicScalar, cands: &[i64]| cands.iter().copied().find(|&c| v.agrees_with(&sc(p, c)));
            let ls: Vec<i64> = want.iter().map(|w| w.0).collect();
            let ms: Vec<i64> = want.iter().map(|w| w.1).collect();
            match (find(&l, &ls), find(&mu, &ms)) {
                (Some(a), Some(b)) => got.push((a, b, s.multiplicity * s.residue_degree)),
                _ => return Err(format!("case {k}: system ({l}, {mu}) not among {want:?}")),
            }
        }
        got.sort();
        ensure(got == want, || format!("case {k}: {got:?} vs oracle {want:?}"))?;
        count += 1;
    }
    Ok(format!("{count} fibers of size <= 4 match the simultaneous-eigenspace oracle"))
}

fn run(results: &mut Vec<(usize, Outcome, f64)>, n: usize, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let out = match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into())),
    };
    results.push((n, out, start.elapsed().as_secs_f64()));
}

fn main() {
    let mut suite = Suite::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut results = Vec::new();
    run(&mut results, 1, || criterion_1(&mut suite));
    run(&mut results, 2, || criterion_2(&mut suite, &mut rng));
    run(&mut results, 3, || criterion_3(&mut suite, &mut rng));
    run(&mut results, 5, || criterion_5(&mut suite));
    run(&mut results, 6, || criterion_6(&mut suite, &mut rng));
    run(&mut results, 8, || criterion_8(&mut suite, &mut rng));
    run(&mut results, 9, || criterion_9(&mut rng));
    run(&mut results, 10, || criterion_10(&mut suite, &mut rng));
    let tail = if suite.tail_violations.is_empty() {
        Ok(format!("{} series, zero violations", suite.series))
    } else {
        Err(format!("{} violations: {:?}", suite.tail_violations.len(), suite.tail_violations))
    };
    results.push((4, tail, 0.0));
    let slopes = if suite.slope_violations.is_empty() {
        Ok(format!("{} eigensystems, zero violations", suite.systems))
    } else {
        Err(format!("{} violations: {:?}", suite.slope_violations.len(), suite.slope_violations))
    };
    results.push((7, slopes, 0.0));
    results.sort_by_key(|r| r.0);

    let mut unexpected = 0;
    for (n, out, secs) in &results {
        match out {
            Ok(msg) => println!("criterion {n:>2} PASS  {msg} [{secs:.2} s]"),
            Err(msg) => {
                let known = KNOWN_UNATTAINABLE.contains(n);
                if !known {
                    unexpected += 1;
                }
                println!("criterion {n:>2} FAIL{}  {msg} [{secs:.2} s]", if known { " (documented)" } else { "" });
            }
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
