//! Spectral data, local eigenpieces, fiber eigensystems and the base change
//! and glueing checks.

use std::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fredholm::{berkowitz, char_series, FredholmSeries, SeriesTail};
use crate::linalg::{independent_subset, kernel_scalar, rank, solve_scalar, Linear};
use crate::matrix::Matrix;
use crate::newton::{newton_polygon, slope_factorization, Factorable};
use crate::operators::{fraction_string, CompactOperator, Compactness, Rational, ValBound};
use crate::poly::Poly;
use crate::riesz::{q_star, refine_factorization, restrict, riesz_from_factorization, same_span, RieszDecomposition};
use crate::rings::{AffinoidElement, Chart, Coeff, PadicScalar, RingHom, Valuation};

/// Random generic elements tried before giving up on a fiber.
const SPLIT_RETRIES: usize = 8;
/// Residue-class refinements allowed when separating roots.
const SPLIT_DEPTH: usize = 48;

/// Coefficient rings that can serve as the base of a spectral datum.
pub trait EigenBase: Factorable {
    /// Names of the chart variables (none over the field).
    fn variables(like: &Self) -> Vec<String>;
    /// The specialization at a point of the chart.
    fn fiber_hom(like: &Self, point: &[PadicScalar]) -> Result<RingHom>;
}

impl EigenBase for PadicScalar {
    fn variables(_: &Self) -> Vec<String> {
        Vec::new()
    }

    fn fiber_hom(_: &Self, point: &[PadicScalar]) -> Result<RingHom> {
        if !point.is_empty() {
            return Err(Error::SizeMismatch("the field has no fiber coordinates".into()));
        }
        Ok(RingHom::Identity)
    }
}

impl EigenBase for AffinoidElement {
    fn variables(like: &Self) -> Vec<String> {
        like.chart().vars.clone()
    }

    fn fiber_hom(like: &Self, point: &[PadicScalar]) -> Result<RingHom> {
        RingHom::at_point(like.chart(), point)
    }
}

/// `phi` together with commuting Hecke operators.
#[derive(Clone, Debug)]
pub struct SpectralDatum<C> {
    pub phi: CompactOperator<C>,
    pub hecke: Vec<(String, Matrix<C>)>,
    pub degree_cap: usize,
}

impl<C: EigenBase> SpectralDatum<C> {
    pub fn new(phi: CompactOperator<C>, hecke: Vec<(String, Matrix<C>)>, degree_cap: usize) -> Self {
        SpectralDatum { phi, hecke, degree_cap }
    }

    pub fn like(&self) -> &C {
        self.phi.matrix().zero_elem()
    }

    /// The datum over the residue field of a point.
    pub fn specialize(&self, point: &[PadicScalar]) -> Result<SpectralDatum<PadicScalar>> {
        let hom = C::fiber_hom(self.like(), point)?;
        let phi = CompactOperator::new(to_scalars(self.phi.matrix(), &hom)?, self.phi.decay().clone())?;
        let hecke = self.hecke.iter().map(|(n, t)| Ok((n.clone(), to_scalars(t, &hom)?))).collect::<Result<_>>()?;
        Ok(SpectralDatum { phi, hecke, degree_cap: self.degree_cap })
    }

    /// `phi` first, then the Hecke operators.
    pub fn generators(&self) -> Vec<(String, Matrix<C>)> {
        std::iter::once(("phi".to_string(), self.phi.matrix().clone())).chain(self.hecke.iter().cloned()).collect()
    }
}

/// A matrix over a chart specialized to `Q_p`.
pub fn to_scalars<C: Coeff>(m: &Matrix<C>, hom: &RingHom) -> Result<Matrix<PadicScalar>> {
    m.apply_hom(hom)?.as_scalar_matrix().ok_or_else(|| Error::InvalidInput("specialization leaves chart variables".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonCommuting { left: String, right: String, valuation: ValBound },
    SizeMismatch { name: String, rows: usize, cols: usize },
    NotCompact(String),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonCommuting { left, right, valuation } => write!(f, "[{left}, {right}] != 0 (valuation {valuation})"),
            Violation::SizeMismatch { name, rows, cols } => write!(f, "{name} is {rows}x{cols}"),
            Violation::NotCompact(why) => write!(f, "phi is not certified compact: {why}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatumReport {
    pub compactness: Compactness,
    pub violations: Vec<Violation>,
}

impl DatumReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Commutativity of all generators and compactness of `phi`.
pub fn validate_datum<C: EigenBase>(d: &SpectralDatum<C>) -> DatumReport {
    let mut violations = Vec::new();
    let compactness = d.phi.verify_compactness();
    if !matches!(compactness, Compactness::Certified { .. }) {
        violations.push(Violation::NotCompact(format!("{compactness:?}")));
    }
    let n = d.phi.size();
    let gens = d.generators();
    for (name, t) in &gens {
        if t.rows() != n || t.cols() != n {
            violations.push(Violation::SizeMismatch { name: name.clone(), rows: t.rows(), cols: t.cols() });
        }
    }
    if !violations.is_empty() {
        return DatumReport { compactness, violations };
    }
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            let c = gens[i].1.commutator(&gens[j].1);
            if !c.is_zero() {
                let valuation = c.entries().filter(|x| !x.is_zero()).map(|x| ValBound::from(x.valuation())).min().unwrap_or(ValBound::Infinite);
                violations.push(Violation::NonCommuting { left: gens[i].0.clone(), right: gens[j].0.clone(), valuation });
            }
        }
    }
    DatumReport { compactness, violations }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlopeDatumReport {
    pub h: Rational,
    /// Degree of the slope `<= h` part over the whole chart.
    pub degree: usize,
    /// Degree at each sample; `None` where the break is not certified.
    pub fiber_degrees: Vec<Option<usize>>,
    /// First sample whose degree differs.
    pub violation: Option<usize>,
}

impl SlopeDatumReport {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// Samples the fibers of `F` and checks that the slope `<= h` part keeps the
/// degree it has for the Gauss norm.
pub fn slope_datum_search<C: EigenBase>(f: &FredholmSeries<C>, h: Rational, samples: &[Vec<PadicScalar>]) -> Result<SlopeDatumReport> {
    let degree = newton_polygon(f).break_at(h)?;
    let like = f.poly().zero_elem().clone();
    let mut fiber_degrees = Vec::with_capacity(samples.len());
    let mut violation = None;
    for (i, pt) in samples.iter().enumerate() {
        if pt.iter().any(|x| matches!(x.valuation(), Valuation::Finite(v) if v < 0)) {
            return Err(Error::DomainViolation(format!("sample {i} lies outside the closed unit polydisc")));
        }
        let g = f.base_change(&C::fiber_hom(&like, pt)?)?;
        let deg = newton_polygon(&g).break_at(h).ok();
        if deg != Some(degree) && violation.is_none() {
            violation = Some(i);
        }
        fiber_degrees.push(deg);
    }
    Ok(SlopeDatumReport { h, degree, fiber_degrees, violation })
}

/// An element of the eigenalgebra given as a monomial in the generators.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement<C> {
    pub monomial: Vec<u32>,
    pub matrix: Matrix<C>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NilpotentFlag<C> {
    /// Coordinates on the monomial basis.
    pub element: Vec<C>,
    /// Smallest power that vanishes at precision, if at most the rank.
    pub index: Option<usize>,
}

impl<C> NilpotentFlag<C> {
    pub fn is_nilpotent(&self) -> bool {
        self.index.is_some()
    }
}

/// The algebra of `r x r` matrices generated by the named generators.
#[derive(Clone, Debug)]
pub struct Eigenalgebra<C> {
    pub names: Vec<String>,
    pub generators: Vec<Matrix<C>>,
    pub rank: usize,
    /// Monomial generating set, reduced in graded lexicographic order.
    pub basis: Vec<AlgebraElement<C>>,
    /// `table[i][j]`: coordinates of `basis[i] * basis[j]`.
    pub table: Vec<Vec<Vec<C>>>,
    /// Elements of the kernel of the trace form, with their nilpotency.
    pub radical: Vec<NilpotentFlag<C>>,
}

fn flatten<C: Coeff>(m: &Matrix<C>) -> Vec<C> {
    m.entries().cloned().collect()
}

impl<C: Linear> Eigenalgebra<C> {
    /// Closes `1` and the generators under products.
    pub fn generate(names: Vec<String>, generators: Vec<Matrix<C>>, rank: usize, like: &C) -> Result<Self> {
        let mut basis: Vec<AlgebraElement<C>> = Vec::new();
        if rank > 0 {
            basis.push(AlgebraElement { monomial: vec![0; generators.len()], matrix: Matrix::identity(rank, like) });
        }
        let cap = rank * rank;
        let mut frontier: Vec<usize> = (0..basis.len()).collect();
        while !frontier.is_empty() && basis.len() < cap {
            let mut cands: Vec<AlgebraElement<C>> = Vec::new();
            for &b in &frontier {
                for (i, g) in generators.iter().enumerate() {
                    let mut mono = basis[b].monomial.clone();
                    mono[i] += 1;
                    if cands.iter().any(|c| c.monomial == mono) {
                        continue;
                    }
                    cands.push(AlgebraElement { monomial: mono, matrix: basis[b].matrix.mul(g).map(|x| x.fit()) });
                }
            }
            cands.sort_by_key(|c| (c.monomial.iter().sum::<u32>(), Reverse(c.monomial.clone())));
            frontier.clear();
            for c in cands {
                if basis.len() >= cap {
                    break;
                }
                let cols: Vec<Vec<C>> = basis.iter().map(|b| flatten(&b.matrix)).collect();
                if !C::in_span(&cols, &flatten(&c.matrix), like)? {
                    frontier.push(basis.len());
                    basis.push(c);
                }
            }
        }
        let mut alg = Eigenalgebra { names, generators, rank, basis, table: Vec::new(), radical: Vec::new() };
        alg.table = alg.multiplication_table(like)?;
        alg.radical = alg.trace_radical(like)?;
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn basis_columns(&self) -> Vec<Vec<C>> {
        self.basis.iter().map(|b| flatten(&b.matrix)).collect()
    }

    /// Coordinates of `m` on the basis.
    pub fn coordinates(&self, m: &Matrix<C>, like: &C) -> Result<Option<Vec<C>>> {
        let a = Matrix::from_columns(&self.basis_columns(), self.rank * self.rank, like);
        C::solve(&a, &flatten(m))
    }

    pub fn element(&self, coords: &[C], like: &C) -> Matrix<C> {
        self.basis.iter().zip(coords).fold(Matrix::zeros(self.rank, self.rank, like), |acc, (b, x)| acc.add(&b.matrix.scale(x)))
    }

    fn multiplication_table(&self, like: &C) -> Result<Vec<Vec<Vec<C>>>> {
        let mut table = Vec::with_capacity(self.dim());
        for bi in &self.basis {
            let mut row = Vec::with_capacity(self.dim());
            for bj in &self.basis {
                let prod = bi.matrix.mul(&bj.matrix).map(|x| x.fit());
                row.push(self.coordinates(&prod, like)?.ok_or_else(|| Error::PrecisionExhausted("product leaves the algebra at precision".into()))?);
            }
            table.push(row);
        }
        Ok(table)
    }

    /// Products of basis elements commute.
    pub fn is_commutative(&self) -> bool {
        self.basis.iter().enumerate().all(|(i, a)| self.basis[i + 1..].iter().all(|b| a.matrix.commutator(&b.matrix).is_zero()))
    }

    fn trace_radical(&self, like: &C) -> Result<Vec<NilpotentFlag<C>>> {
        let m = self.dim();
        if m == 0 {
            return Ok(Vec::new());
        }
        let gram = Matrix::from_fn(m, m, like, |i, j| self.basis[i].matrix.mul(&self.basis[j].matrix).trace());
        let ker = C::kernel(&gram)?;
        Ok(ker
            .into_iter()
            .map(|x| {
                let e = self.element(&x, like);
                let mut pw = e.clone();
                let mut index = None;
                for k in 1..=self.rank.max(1) {
                    if pw.is_zero() {
                        index = Some(k);
                        break;
                    }
                    pw = pw.mul(&e).map(|x| x.fit());
                }
                NilpotentFlag { element: x, index }
            })
            .collect())
    }

    /// Some nonzero element of the trace radical is nilpotent.
    pub fn has_nilpotents(&self) -> bool {
        self.radical.iter().any(|f| f.is_nilpotent())
    }
}

/// `N = Ker Q*(phi)` with the restricted operators and their algebra.
#[derive(Clone, Debug)]
pub struct LocalEigenpiece<C> {
    pub h: Rational,
    pub series: FredholmSeries<C>,
    pub riesz: RieszDecomposition<C>,
    pub phi_n: Matrix<C>,
    pub hecke_n: Vec<(String, Matrix<C>)>,
    pub algebra: Eigenalgebra<C>,
}

impl<C: EigenBase> LocalEigenpiece<C> {
    pub fn rank(&self) -> usize {
        self.riesz.rank()
    }

    pub fn q(&self) -> &Poly<C> {
        &self.riesz.q
    }

    pub fn basis(&self) -> &[Vec<C>] {
        &self.riesz.kernel_basis
    }

    pub fn like(&self) -> &C {
        self.series.poly().zero_elem()
    }

    /// `Q(phi^-1) = 0` on `N`, checked as `Q*(phi|N) = 0`.
    pub fn structural_map_holds(&self) -> bool {
        self.rank() == 0 || q_star(self.q()).eval_matrix(&self.phi_n).is_zero()
    }

    /// Restricted generators, `phi` first.
    pub fn restricted(&self) -> Vec<(String, Matrix<C>)> {
        std::iter::once(("phi".to_string(), self.phi_n.clone())).chain(self.hecke_n.iter().cloned()).collect()
    }
}

/// Cuts out the slope `<= h` part of the datum and the algebra acting on it.
pub fn build_local_piece<C: EigenBase>(d: &SpectralDatum<C>, h: Rational) -> Result<LocalEigenpiece<C>> {
    let report = validate_datum(d);
    if !report.is_ok() {
        let v: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidInput(v.join("; ")));
    }
    let series = char_series(&d.phi, d.degree_cap)?;
    let fact = slope_factorization(&series, h)?;
    let riesz = riesz_from_factorization(&d.phi, &series, &fact)?;
    let basis = riesz.kernel_basis.clone();
    let like = d.like().clone();
    let stable = |name: &str, t: &Matrix<C>| -> Result<Matrix<C>> {
        restrict(t, &basis)?.ok_or_else(|| Error::NonStableKernel(format!("{name} moves N off itself")))
    };
    let phi_n = stable("phi", d.phi.matrix())?;
    let hecke_n = d.hecke.iter().map(|(n, t)| Ok((n.clone(), stable(n, t)?))).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = std::iter::once("phi".to_string()).chain(hecke_n.iter().map(|(n, _)| n.clone())).collect();
    let gens: Vec<Matrix<C>> = std::iter::once(phi_n.clone()).chain(hecke_n.iter().map(|(_, t)| t.clone())).collect();
    let algebra = Eigenalgebra::generate(names, gens, basis.len(), &like)?;
    Ok(LocalEigenpiece { h, series, riesz, phi_n, hecke_n, algebra })
}

/// One maximal ideal of a fiber algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigensystem {
    /// Monic minimal polynomial (lowest degree first) of each generator on
    /// the local factor.
    pub fingerprints: Vec<(String, Vec<PadicScalar>)>,
    /// Valuation of the `phi` eigenvalue; `None` if it is zero.
    pub slope: Option<Rational>,
    /// Degree of the residue field.
    pub residue_degree: usize,
    pub multiplicity: usize,
    pub reduced: bool,
    /// Some fingerprint could not be proved irreducible.
    pub unsplit: bool,
}

impl Eigensystem {
    /// The eigenvalue of a generator when it lies in `Q_p`.
    pub fn eigenvalue(&self, name: &str) -> Option<PadicScalar> {
        let (_, f) = self.fingerprints.iter().find(|(n, _)| n == name)?;
        (f.len() == 2).then(|| f[0].neg())
    }

    fn sort_key(&self) -> (Option<Rational>, Vec<String>) {
        (self.slope, self.fingerprints.iter().flat_map(|(_, f)| f.iter().map(|c| c.canonical())).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigensystemReport {
    pub point: Vec<PadicScalar>,
    pub systems: Vec<Eigensystem>,
}

impl EigensystemReport {
    /// `sum multiplicity * residue degree`.
    pub fn total_degree(&self) -> usize {
        self.systems.iter().map(|s| s.multiplicity * s.residue_degree).sum()
    }
}

/// Seed for the random generic elements: `SPECTRA_SEED` or 0.
pub fn seed_from_env() -> u64 {
    std::env::var("SPECTRA_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0)
}

/// Eigensystems of the piece over the residue field at `point`.
pub fn fiber_eigensystems<C: EigenBase>(piece: &LocalEigenpiece<C>, point: &[PadicScalar], seed: u64) -> Result<EigensystemReport> {
    let hom = C::fiber_hom(piece.like(), point)?;
    let gens: Vec<(String, Matrix<PadicScalar>)> =
        piece.restricted().into_iter().map(|(n, m)| Ok((n, to_scalars(&m, &hom)?))).collect::<Result<_>>()?;
    let systems = decompose_fiber(&gens, seed)?;
    Ok(EigensystemReport { point: point.to_vec(), systems })
}

/// Splits `L^r` under commuting matrices into joint generalized eigenspaces.
pub fn decompose_fiber(gens: &[(String, Matrix<PadicScalar>)], seed: u64) -> Result<Vec<Eigensystem>> {
    let Some((_, first)) = gens.first() else { return Ok(Vec::new()) };
    let r = first.rows();
    if r == 0 {
        return Ok(Vec::new());
    }
    let p = first.zero_elem().prime();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::new();
    for _ in 0..SPLIT_RETRIES {
        let g = gens.iter().fold(Matrix::zeros(r, r, &PadicScalar::zero(p)), |acc, (_, m)| {
            acc.add(&m.scale_scalar(&PadicScalar::from_int(p, rng.gen_range(1..=97), 20)))
        });
        match try_decompose(gens, &g) {
            Ok(mut systems) => {
                systems.sort_by_key(|s| s.sort_key());
                return Ok(systems);
            }
            Err(e) => last = e,
        }
    }
    Err(Error::SplitFailure(last))
}

fn try_decompose(gens: &[(String, Matrix<PadicScalar>)], g: &Matrix<PadicScalar>) -> std::result::Result<Vec<Eigensystem>, String> {
    let r = g.rows();
    let zero = g.zero_elem().clone();
    let chi = monic_char(g);
    let factors = primary_factors(&chi).map_err(|e| e.to_string())?;
    let total: usize = factors.iter().map(|f| f.exponent * f.degree()).sum();
    if total != r {
        return Err(format!("factors of the generic characteristic polynomial cover {total} of {r} dimensions"));
    }
    let mut out = Vec::new();
    for fac in factors {
        let m = fac.poly.eval_matrix(g).pow(fac.exponent as u32);
        let space = kernel_scalar(&m).map_err(|e| e.to_string())?;
        if space.len() != fac.exponent * fac.degree() {
            return Err(format!("generalized eigenspace of {} has dimension {}", fac.poly, space.len()));
        }
        let mut fingerprints = Vec::new();
        let mut reduced = true;
        let mut unsplit = !fac.certified;
        let mut slope = None;
        for (name, t) in gens {
            let tv = restrict(t, &space).map_err(|e| e.to_string())?.ok_or_else(|| format!("{name} does not preserve a generalized eigenspace"))?;
            let chi_t = monic_char(&tv);
            let sq = squarefree_part(&chi_t).map_err(|e| e.to_string())?;
            let parts = split_squarefree(&sq, 0).map_err(|e| e.to_string())?;
            if parts.len() != 1 {
                return Err(format!("{name} has {} distinct factors on one local piece", parts.len()));
            }
            let (mu, cert) = &parts[0];
            unsplit |= !cert;
            if !mu.eval_matrix(&tv).is_zero() {
                reduced = false;
            }
            if name == "phi" {
                slope = root_slope(mu);
            }
            fingerprints.push((name.clone(), mu.coeffs().to_vec()));
        }
        let _ = &zero;
        out.push(Eigensystem { fingerprints, slope, residue_degree: fac.degree(), multiplicity: fac.exponent, reduced, unsplit });
    }
    Ok(out)
}

/// `det(X - m)` lowest degree first.
fn monic_char(m: &Matrix<PadicScalar>) -> Poly<PadicScalar> {
    let mut c = berkowitz(m);
    c.reverse();
    Poly::new(c, m.zero_elem())
}

/// Common valuation of the roots of an irreducible monic polynomial.
fn root_slope(mu: &Poly<PadicScalar>) -> Option<Rational> {
    let n = mu.len() as i64 - 1;
    match mu.coeff(0).valuation() {
        Valuation::Finite(v) => Some(Rational::new(v, n)),
        Valuation::Infinity => None,
    }
}

#[derive(Clone, Debug)]
struct PrimaryFactor {
    poly: Poly<PadicScalar>,
    exponent: usize,
    certified: bool,
}

impl PrimaryFactor {
    fn degree(&self) -> usize {
        self.poly.len() - 1
    }
}

fn squarefree_part(f: &Poly<PadicScalar>) -> Result<Poly<PadicScalar>> {
    let g = f.gcd(&f.derivative())?;
    let (q, _) = f.div_rem(&g)?;
    q.monic()
}

/// `f = prod mu_i^e_i` with distinct monic irreducible (or unsplit) `mu_i`.
fn primary_factors(f: &Poly<PadicScalar>) -> Result<Vec<PrimaryFactor>> {
    let sq = squarefree_part(f)?;
    let mut out: Vec<PrimaryFactor> = Vec::new();
    for (mu, certified) in split_squarefree(&sq, 0)? {
        if out.iter().any(|o| o.poly.agrees_with(&mu)) {
            continue;
        }
        let mut rest = f.clone();
        let mut e = 0;
        loop {
            let (q, r) = rest.div_rem(&mu)?;
            if !r.is_zero() || q.is_zero() && rest.degree() != mu.degree() {
                break;
            }
            e += 1;
            rest = q;
            if rest.degree().unwrap_or(0) == 0 {
                break;
            }
        }
        if e == 0 {
            return Err(Error::Indeterminate(format!("{mu} does not divide the characteristic polynomial at precision")));
        }
        out.push(PrimaryFactor { poly: mu, exponent: e, certified });
    }
    Ok(out)
}

/// Distinct monic factors of a squarefree monic polynomial, each flagged
/// when it is proved irreducible.
fn split_squarefree(f: &Poly<PadicScalar>, depth: usize) -> Result<Vec<(Poly<PadicScalar>, bool)>> {
    let f = f.monic()?;
    let n = f.len() - 1;
    let zero = f.zero_elem().clone();
    let p = zero.prime();
    let one = PadicScalar::one(p, zero.working_rel());
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![(f, true)]);
    }
    if f.coeff(0).is_zero() {
        let x = Poly::new(vec![zero, one], &zero);
        let (rest, _) = f.div_rem(&x)?;
        let mut out = vec![(x, true)];
        out.extend(split_squarefree(&rest, depth)?);
        return Ok(out);
    }
    if depth > SPLIT_DEPTH {
        return Ok(vec![(f, false)]);
    }
    let rev = FredholmSeries::new(f.reversed(n).coeffs().to_vec(), SeriesTail::Exact)?;
    let slopes = newton_polygon(&rev).slopes();
    if slopes.len() > 1 {
        let fac = slope_factorization(&rev, slopes[0].0)?;
        let k = fac.degree();
        let s = fac.s.poly().trimmed();
        if s.len() != n - k + 1 {
            return Ok(vec![(f, false)]);
        }
        let mut out = split_squarefree(&fac.q.reversed(k), depth)?;
        out.extend(split_squarefree(&s.reversed(n - k), depth)?);
        return Ok(out);
    }
    let sigma = slopes[0].0;
    if !sigma.is_integer() {
        return Ok(vec![(f, *sigma.denom() as usize == n)]);
    }
    let sigma = sigma.to_integer();
    // roots of g are the units lambda / p^sigma
    let g = Poly::new((0..=n).map(|i| f.coeff(i).shift(sigma * (i as i64 - n as i64))).collect(), &zero);
    let unscale = |h: &Poly<PadicScalar>| -> Result<Poly<PadicScalar>> {
        let k = h.len() - 1;
        Poly::new((0..=k).map(|i| h.coeff(i).shift(sigma * (k as i64 - i as i64))).collect(), &zero).monic()
    };
    let residue = if p <= 1000 {
        (1..p as i64).find(|&a| {
            let v = g.eval(&PadicScalar::from_int(p, a, zero.working_rel()));
            v.is_zero() || matches!(v.valuation(), Valuation::Finite(x) if x > 0)
        })
    } else {
        None
    };
    let Some(alpha) = residue else {
        // a polynomial of degree <= 3 without roots is irreducible
        return Ok(vec![(f, n <= 3 && p <= 1000)]);
    };
    let a = PadicScalar::from_int(p, alpha, zero.working_rel());
    let shifted = g.compose_linear(&one, &a);
    let mut out = Vec::new();
    for (h, cert) in split_squarefree(&shifted, depth + 1)? {
        let back = h.compose_linear(&one, &a.neg());
        out.push((unscale(&back)?, cert));
    }
    Ok(out)
}

/// How a specialization compares with the algebra over the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseChangeReport {
    /// `dim T_A (x) L`.
    pub source_dim: usize,
    /// `dim T_L`, rebuilt from the specialized generators.
    pub target_dim: usize,
    pub surjective: bool,
    pub kernel_dim: usize,
    /// Largest nilpotency index among the kernel generators.
    pub nilpotency_index: usize,
    /// Multiplication tables agree entrywise (only meaningful for an
    /// isomorphism with the same monomials).
    pub tables_match: bool,
}

impl BaseChangeReport {
    pub fn is_isomorphism(&self) -> bool {
        self.surjective && self.kernel_dim == 0
    }
}

fn mul_coords(table: &[Vec<Vec<PadicScalar>>], x: &[PadicScalar], y: &[PadicScalar], zero: &PadicScalar) -> Vec<PadicScalar> {
    let m = x.len();
    let mut out = vec![*zero; m];
    for i in 0..m {
        if x[i].is_zero() {
            continue;
        }
        for j in 0..m {
            if y[j].is_zero() {
                continue;
            }
            let c = x[i].mul(&y[j]);
            for k in 0..m {
                out[k] = out[k].add(&c.mul(&table[i][j][k]));
            }
        }
    }
    out
}

fn in_span_scalar(cols: &[Vec<PadicScalar>], v: &[PadicScalar], zero: &PadicScalar) -> bool {
    if cols.is_empty() {
        return v.iter().all(|x| x.is_zero());
    }
    solve_scalar(&Matrix::from_columns(cols, v.len(), zero), v).is_some()
}

/// Compares `T_A (x) L` with the algebra rebuilt over `L` at `point`.
pub fn base_change_piece<C: EigenBase>(piece: &LocalEigenpiece<C>, point: &[PadicScalar]) -> Result<BaseChangeReport> {
    let like = piece.like().clone();
    let hom = C::fiber_hom(&like, point)?;
    let alg = &piece.algebra;
    let m = alg.dim();
    let r = alg.rank;
    let p = like.prime();
    let zero = PadicScalar::zero(p);
    // relations among the monomial generators over the chart
    let relations: Vec<Vec<C>> = if m == 0 {
        Vec::new()
    } else {
        let a = Matrix::from_columns(&alg.basis_columns(), r * r, &like);
        if C::frac_rank(&a) == m { Vec::new() } else { C::kernel(&a)? }
    };
    let spec = |x: &C| -> Result<PadicScalar> {
        x.apply_hom(&hom)?.as_scalar().ok_or_else(|| Error::InvalidInput("specialization leaves chart variables".into()))
    };
    let rel_l: Vec<Vec<PadicScalar>> = relations.iter().map(|v| v.iter().map(&spec).collect::<Result<_>>()).collect::<Result<_>>()?;
    let rel_idx = independent_subset(&rel_l, m, &zero);
    let rel_l: Vec<Vec<PadicScalar>> = rel_idx.iter().map(|&i| rel_l[i].clone()).collect();
    let basis_l: Vec<Matrix<PadicScalar>> = alg.basis.iter().map(|b| to_scalars(&b.matrix, &hom)).collect::<Result<_>>()?;
    let table_l: Vec<Vec<Vec<PadicScalar>>> =
        alg.table.iter().map(|row| row.iter().map(|v| v.iter().map(&spec).collect::<Result<_>>()).collect::<Result<_>>()).collect::<Result<_>>()?;
    let source_dim = m - rel_l.len();

    let gens_l: Vec<Matrix<PadicScalar>> = alg.generators.iter().map(|g| to_scalars(g, &hom)).collect::<Result<_>>()?;
    let target = Eigenalgebra::generate(alg.names.clone(), gens_l, r, &zero)?;
    let target_dim = target.dim();

    let eval = if m == 0 { Matrix::zeros(0, 0, &zero) } else { Matrix::from_columns(&basis_l.iter().map(flatten).collect::<Vec<_>>(), r * r, &zero) };
    let surjective = m == 0 || rank(&eval) == target_dim;
    let mut kernel_gens: Vec<Vec<PadicScalar>> = Vec::new();
    if m > 0 {
        let mut span = rel_l.clone();
        for v in kernel_scalar(&eval)? {
            if !in_span_scalar(&span, &v, &zero) {
                span.push(v.clone());
                kernel_gens.push(v);
            }
        }
    }
    let mut nilpotency_index = 0;
    for x in &kernel_gens {
        let mut pw = x.clone();
        let mut index = None;
        for k in 1..=m.max(1) {
            if in_span_scalar(&rel_l, &pw, &zero) {
                index = Some(k);
                break;
            }
            pw = mul_coords(&table_l, &pw, x, &zero);
        }
        match index {
            Some(k) => nilpotency_index = nilpotency_index.max(k),
            None => return Err(Error::NonNilpotentKernel(format!("kernel element {x:?} is not nilpotent within {m} steps"))),
        }
    }
    let tables_match = target.dim() == m
        && target.basis.iter().zip(&alg.basis).all(|(a, b)| a.monomial == b.monomial)
        && target.table.iter().flatten().flatten().zip(table_l.iter().flatten().flatten()).all(|(a, b)| a.agrees_with(b));
    Ok(BaseChangeReport { source_dim, target_dim, surjective, kernel_dim: kernel_gens.len(), nilpotency_index, tables_match })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlueReport {
    pub inner_rank: usize,
    pub outer_rank: usize,
    /// The idempotent carries `N2` onto `N1`.
    pub kernel_matches: bool,
    /// Per generator: `t|N1 = Pf o t|N2 o incl`.
    pub intertwines: Vec<(String, bool)>,
}

impl GlueReport {
    pub fn passes(&self) -> bool {
        self.kernel_matches && self.intertwines.iter().all(|(_, ok)| *ok)
    }
}

/// Compares nested pieces `h1 <= h2` of the same datum.
pub fn glue_check<C: EigenBase>(inner: &LocalEigenpiece<C>, outer: &LocalEigenpiece<C>, phi: &Matrix<C>) -> Result<GlueReport> {
    if inner.h > outer.h {
        return Err(Error::InvalidInput("the inner piece must have the smaller slope bound".into()));
    }
    let like = inner.like().clone();
    let n = phi.rows();
    let refinement = refine_factorization(phi, inner.q(), outer.q())?;
    let kernel_matches = same_span(&refinement.inner, inner.basis(), &like)? && same_span(&refinement.outer, outer.basis(), &like)?;
    let r1 = inner.rank();
    let r2 = outer.rank();
    if r1 == 0 {
        let intertwines = inner.restricted().into_iter().map(|(name, _)| (name, true)).collect();
        return Ok(GlueReport { inner_rank: 0, outer_rank: r2, kernel_matches, intertwines });
    }
    // coordinates of N1 in the basis of N2, and Pf in that basis
    let b2 = Matrix::from_columns(outer.basis(), n, &like);
    let mut incl_cols = Vec::with_capacity(r1);
    for v in inner.basis() {
        incl_cols.push(C::solve(&b2, v)?.ok_or_else(|| Error::NonStableKernel("N1 is not inside N2".into()))?);
    }
    let incl = Matrix::from_columns(&incl_cols, r2, &like);
    let pf = basis_change(&refinement.idempotent, &refinement.outer, outer.basis(), n, &like)?;
    let mut intertwines = Vec::new();
    for ((name, t1), (_, t2)) in inner.restricted().into_iter().zip(outer.restricted()) {
        let lhs = incl.mul(&t1);
        let rhs = pf.mul(&t2).mul(&incl);
        intertwines.push((name, lhs.agrees_with(&rhs)));
    }
    let fixes = pf.mul(&incl).agrees_with(&incl);
    Ok(GlueReport { inner_rank: r1, outer_rank: r2, kernel_matches: kernel_matches && fixes, intertwines })
}

/// Rewrites an endomorphism given on basis `from` in the basis `to` of the
/// same span.
fn basis_change<C: Linear>(m: &Matrix<C>, from: &[Vec<C>], to: &[Vec<C>], n: usize, like: &C) -> Result<Matrix<C>> {
    let bt = Matrix::from_columns(to, n, like);
    let bf = Matrix::from_columns(from, n, like);
    let solve_all = |target: &Matrix<C>| -> Result<Matrix<C>> {
        let mut cols = Vec::with_capacity(target.cols());
        for j in 0..target.cols() {
            cols.push(C::solve(&bt, &target.column(j))?.ok_or_else(|| Error::NonStableKernel("bases span different modules".into()))?);
        }
        Ok(Matrix::from_columns(&cols, to.len(), like))
    };
    // m acts as x -> bf m bf^-1 x; in `to` coordinates: bt^-1 bf m bf^-1 bt
    let to_in_from = {
        let mut cols = Vec::with_capacity(to.len());
        for v in to {
            cols.push(C::solve(&bf, v)?.ok_or_else(|| Error::NonStableKernel("bases span different modules".into()))?);
        }
        Matrix::from_columns(&cols, from.len(), like)
    };
    solve_all(&bf.mul(m).mul(&to_in_from))
}

/// Parses a slope such as `5/2` or `-1`.
pub fn parse_slope(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("bad slope {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let d: i64 = b.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational::new(a.trim().parse().map_err(|_| bad())?, d))
        }
        None => {
            if let Ok(n) = s.trim().parse::<i64>() {
                return Ok(Rational::from_integer(n));
            }
            // decimals such as 2.5
            let (i, f) = s.trim().split_once('.').ok_or_else(bad)?;
            let den = 10i64.checked_pow(f.len() as u32).ok_or_else(bad)?;
            let num: i64 = format!("{i}{f}").parse().map_err(|_| bad())?;
            Ok(Rational::new(num, den))
        }
    }
}

/// `h` rendered as a fraction.
pub fn slope_string(h: &Rational) -> String {
    fraction_string(h)
}

/// The chart of the worked example: `Q_p<T1, T2>`, degree bound 2.
pub fn example_chart(p: u64, rel: u32) -> std::sync::Arc<Chart> {
    Chart::new(p, &["T1", "T2"], 2, rel)
}

/// `phi = [[1, T1], [0, 1]]`, `t = [[0, T2], [0, 0]]` on `A^2`.
pub fn worked_example(p: u64, rel: u32) -> SpectralDatum<AffinoidElement> {
    let chart = example_chart(p, rel);
    let c = |n| AffinoidElement::from_int(&chart, n);
    let t1 = AffinoidElement::variable(&chart, "T1").expect("chart variable");
    let t2 = AffinoidElement::variable(&chart, "T2").expect("chart variable");
    let phi = Matrix::from_rows(vec![vec![c(1), t1], vec![c(0), c(1)]], &c(0));
    let t = Matrix::from_rows(vec![vec![c(0), t2], vec![c(0), c(0)]], &c(0));
    SpectralDatum::new(CompactOperator::finite(phi).expect("square"), vec![("t".to_string(), t)], 4)
}
