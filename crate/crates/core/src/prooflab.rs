//! Executable machinery for cyclic operations of prime arity composed
//! over p x p matrices: the star-composed operation t (s applied to the
//! columns, then s to the results), areas, covers, g-equivalence,
//! tameness, prefix and step matrices, cyclic shifts, and the
//! pigeonhole refutation construction run against a black-box
//! operation.
//!
//! Matrix text format: a line with `p`, then p rows of p space
//! separated entries.

use num_bigint::BigInt;
use num_rational::BigRational;
use std::fmt;

use crate::structure::{Assignment, RelationalStructure};
use crate::Error;

/// A square p x p matrix over a finite domain, row major. Most
/// operations require zero-one entries; t evaluation accepts general
/// element matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    p: usize,
    data: Vec<usize>,
}

impl Matrix {
    pub fn new(p: usize, data: Vec<usize>) -> Result<Self, Error> {
        if p < 2 {
            return Err(Error::Range(format!("matrix side must be >= 2, got {p}")));
        }
        if data.len() != p * p {
            return Err(Error::DimensionMismatch(format!(
                "expected {p}x{p} = {} entries, got {}",
                p * p,
                data.len()
            )));
        }
        Ok(Matrix { p, data })
    }

    pub fn zeros(p: usize) -> Self {
        Matrix { p, data: vec![0; p * p] }
    }

    pub fn ones(p: usize) -> Self {
        Matrix { p, data: vec![1; p * p] }
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.data[row * self.p + col]
    }

    /// Row-major flattened view: the tuple form of the matrix.
    pub fn as_flat(&self) -> &[usize] {
        &self.data
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&x| x <= 1)
    }

    fn require_binary(&self) -> Result<(), Error> {
        if let Some(pos) = self.data.iter().position(|&x| x > 1) {
            return Err(Error::NonBinaryEntry(format!(
                "entry {} at row {}, column {}",
                self.data[pos],
                pos / self.p,
                pos % self.p
            )));
        }
        Ok(())
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&x| x == 1).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.p);
        for r in 0..self.p {
            let row: Vec<String> =
                (0..self.p).map(|c| self.get(r, c).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, Error> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, msg: "empty matrix".into() })?;
        let p: usize = header
            .parse()
            .map_err(|_| Error::Parse { line: hline, msg: "expected matrix side".into() })?;
        let mut data = Vec::with_capacity(p * p);
        for (ln, l) in lines {
            for tok in l.split_whitespace() {
                data.push(tok.parse().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("bad entry `{tok}`"),
                })?);
            }
        }
        Matrix::new(p, data).map_err(|e| Error::Parse { line: hline, msg: e.to_string() })
    }
}

/// The row-major prefix matrix with `i` leading ones.
pub fn tau(i: usize, p: usize) -> Result<Matrix, Error> {
    if i > p * p {
        return Err(Error::Range(format!("tau index {i} exceeds {p}^2")));
    }
    let mut data = vec![0; p * p];
    for e in data.iter_mut().take(i) {
        *e = 1;
    }
    Matrix::new(p, data)
}

/// The column-prefix matrix whose i-th column begins with `heights[i]`
/// ones followed by zeros. Height 0 (an empty column) is admitted.
pub fn rho(heights: &[usize]) -> Result<Matrix, Error> {
    let p = heights.len();
    if let Some(&k) = heights.iter().find(|&&k| k > p) {
        return Err(Error::Range(format!("column height {k} exceeds {p}")));
    }
    let mut m = Matrix::zeros(p);
    if p < 2 {
        return Err(Error::Range(format!("matrix side must be >= 2, got {p}")));
    }
    for (col, &k) in heights.iter().enumerate() {
        for row in 0..k {
            m.data[row * p + col] = 1;
        }
    }
    Ok(m)
}

/// A step matrix rho(k, ..., k, l, ..., l) with m columns of height k.
pub fn step_matrix(p: usize, k: usize, l: usize, m: usize) -> Result<Matrix, Error> {
    if m > p {
        return Err(Error::Range(format!("step position {m} exceeds {p}")));
    }
    let mut heights = vec![k; m];
    heights.extend(std::iter::repeat(l).take(p - m));
    rho(&heights)
}

/// If the matrix has the shape rho(k,...,k,l,...,l) with k >= l,
/// returns (k, l, m). A constant-height matrix reports step 0 with
/// m = p.
pub fn almost_rectangle_shape(x: &Matrix) -> Option<(usize, usize, usize)> {
    let p = x.side();
    let mut heights = Vec::with_capacity(p);
    for col in 0..p {
        let h = (0..p).take_while(|&row| x.get(row, col) == 1).count();
        // a prefix column is all ones then all zeros
        if (h..p).any(|row| x.get(row, col) != 0) {
            return None;
        }
        heights.push(h);
    }
    let k = heights[0];
    let m = heights.iter().take_while(|&&h| h == k).count();
    if m == p {
        return Some((k, k, p));
    }
    let l = heights[m];
    if k < l || heights[m..].iter().any(|&h| h != l) {
        return None;
    }
    Some((k, l, m))
}

/// True iff the matrix is an almost rectangle for the given template
/// size: a two-level column-prefix matrix with step at most
/// `5 * c_size`.
pub fn is_almost_rectangle(x: &Matrix, c_size: usize) -> bool {
    match almost_rectangle_shape(x) {
        Some((k, l, _)) => k - l <= 5 * c_size,
        None => false,
    }
}

/// The fraction of ones, exact.
pub fn area(x: &Matrix) -> Result<BigRational, Error> {
    x.require_binary()?;
    Ok(BigRational::new(
        BigInt::from(x.count_ones()),
        BigInt::from(x.side() * x.side()),
    ))
}

pub fn one_third() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(3))
}

/// Cyclic shift flavors. Amounts are taken modulo the period (p, or
/// p^2 for the flat shift) and may not exceed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftMode {
    /// Each column shifted down; one amount per column, or a single
    /// amount applied to all.
    ColumnsDown,
    /// All rows shifted left by the same amount.
    RowsLeft,
    /// The row-major flattening cyclically shifted to the right.
    FlatCyclicRight,
}

pub fn shift(x: &Matrix, mode: ShiftMode, amounts: &[usize]) -> Result<Matrix, Error> {
    let p = x.side();
    let check = |a: usize, period: usize| -> Result<usize, Error> {
        if a > period {
            return Err(Error::Range(format!("shift amount {a} exceeds period {period}")));
        }
        Ok(a % period)
    };
    match mode {
        ShiftMode::ColumnsDown => {
            let per_column: Vec<usize> = match amounts.len() {
                1 => vec![check(amounts[0], p)?; p],
                n if n == p => {
                    amounts.iter().map(|&a| check(a, p)).collect::<Result<_, _>>()?
                }
                n => {
                    return Err(Error::DimensionMismatch(format!(
                        "need 1 or {p} shift amounts, got {n}"
                    )))
                }
            };
            let mut out = Matrix::zeros(p);
            for col in 0..p {
                let a = per_column[col];
                for row in 0..p {
                    out.data[row * p + col] = x.get((row + p - a) % p, col);
                }
            }
            Ok(out)
        }
        ShiftMode::RowsLeft => {
            if amounts.len() != 1 {
                return Err(Error::DimensionMismatch(format!(
                    "rows-left takes one amount, got {}",
                    amounts.len()
                )));
            }
            let a = check(amounts[0], p)?;
            let mut out = Matrix::zeros(p);
            for row in 0..p {
                for col in 0..p {
                    out.data[row * p + col] = x.get(row, (col + a) % p);
                }
            }
            Ok(out)
        }
        ShiftMode::FlatCyclicRight => {
            if amounts.len() != 1 {
                return Err(Error::DimensionMismatch(format!(
                    "flat-cyclic takes one amount, got {}",
                    amounts.len()
                )));
            }
            let period = p * p;
            let a = check(amounts[0], period)?;
            let data = (0..period).map(|i| x.data[(i + period - a) % period]).collect();
            Matrix::new(p, data)
        }
    }
}

/// A p-ary operation given by an evaluation procedure; used where
/// materializing a table of size d^p is impossible.
pub struct BlackBoxOperation {
    name: String,
    arity: usize,
    cyclic: bool,
    eval: Box<dyn Fn(&[usize]) -> usize + Send + Sync>,
}

impl fmt::Debug for BlackBoxOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxOperation")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("cyclic", &self.cyclic)
            .finish()
    }
}

impl BlackBoxOperation {
    pub fn from_fn(
        name: impl Into<String>,
        arity: usize,
        cyclic: bool,
        eval: impl Fn(&[usize]) -> usize + Send + Sync + 'static,
    ) -> Self {
        BlackBoxOperation { name: name.into(), arity, cyclic, eval: Box::new(eval) }
    }

    /// Sum of the arguments modulo 2.
    pub fn parity(arity: usize) -> Self {
        Self::from_fn("parity", arity, true, |args| {
            args.iter().filter(|&&x| x == 1).count() % 2
        })
    }

    /// 1 iff more than half the arguments are 1.
    pub fn threshold_half(arity: usize) -> Self {
        Self::from_fn("threshold-half", arity, true, move |args| {
            usize::from(2 * args.iter().filter(|&&x| x == 1).count() > arity)
        })
    }

    /// 1 iff at least `k` arguments are 1.
    pub fn threshold_at_least(arity: usize, k: usize) -> Self {
        Self::from_fn(format!("threshold>={k}"), arity, true, move |args| {
            usize::from(args.iter().filter(|&&x| x == 1).count() >= k)
        })
    }

    pub fn projection(arity: usize, i: usize) -> Self {
        Self::from_fn(format!("projection-{i}"), arity, false, move |args| args[i])
    }

    pub fn from_table(table: &crate::poly::OperationTable) -> Self {
        let cyclic = table.arity() >= 2 && crate::poly::is_cyclic(table).unwrap_or(false);
        let t = table.clone();
        Self::from_fn("table", table.arity(), cyclic, move |args| t.apply(args))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn declared_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn eval(&self, args: &[usize]) -> usize {
        debug_assert_eq!(args.len(), self.arity);
        (self.eval)(args)
    }

    /// Spot check of the declared cyclicity flag on sampled tuples.
    pub fn spot_check_cyclic(&self, domain_size: usize, samples: usize, seed: u64) -> bool {
        let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..samples {
            let args: Vec<usize> =
                (0..self.arity).map(|_| (next() as usize) % domain_size).collect();
            let mut shifted = args.clone();
            shifted.rotate_left(1);
            if self.eval(&args) != self.eval(&shifted) {
                return false;
            }
        }
        true
    }
}

/// The star composition: s applied to each column of X, then s to the
/// column results. Costs exactly p + 1 evaluations of s.
pub fn eval_t(s: &BlackBoxOperation, x: &Matrix) -> Result<usize, Error> {
    let p = s.arity();
    if x.side() != p {
        return Err(Error::DimensionMismatch(format!(
            "matrix side {} does not match operation arity {p}",
            x.side()
        )));
    }
    let mut col = vec![0usize; p];
    let mut results = Vec::with_capacity(p);
    for j in 0..p {
        for (i, c) in col.iter_mut().enumerate() {
            *c = x.get(i, j);
        }
        results.push(s.eval(&col));
    }
    Ok(s.eval(&results))
}

/// True iff in every entry position exactly one of the three matrices
/// has a one.
pub fn is_cover(x: &Matrix, y: &Matrix, z: &Matrix) -> Result<bool, Error> {
    if x.side() != y.side() || y.side() != z.side() {
        return Err(Error::DimensionMismatch(format!(
            "cover sides {} / {} / {}",
            x.side(),
            y.side(),
            z.side()
        )));
    }
    for m in [x, y, z] {
        m.require_binary()?;
    }
    Ok(x
        .as_flat()
        .iter()
        .zip(y.as_flat())
        .zip(z.as_flat())
        .all(|((&a, &b), &c)| a + b + c == 1))
}

/// Builds a cover from three column-height vectors summing to p per
/// column: the first matrix is rho(xs) and the others are column
/// prefixes shifted down past the blocks above them.
pub fn prefix_cover(
    xs: &[usize],
    ys: &[usize],
    zs: &[usize],
) -> Result<(Matrix, Matrix, Matrix), Error> {
    let p = xs.len();
    if ys.len() != p || zs.len() != p {
        return Err(Error::DimensionMismatch("height vectors differ in length".into()));
    }
    if let Some(col) = (0..p).find(|&c| xs[c] + ys[c] + zs[c] != p) {
        return Err(Error::NotACover(format!(
            "column {col} heights sum to {}, need {p}",
            xs[col] + ys[col] + zs[col]
        )));
    }
    let x = rho(xs)?;
    let y = shift(&rho(ys)?, ShiftMode::ColumnsDown, xs)?;
    let zshift: Vec<usize> = xs.iter().zip(ys).map(|(&a, &b)| (a + b) % p).collect();
    let z = shift(&rho(zs)?, ShiftMode::ColumnsDown, &zshift)?;
    Ok((x, y, z))
}

/// g(t(X)) = g(t(Y))?
pub fn g_equivalent(
    x: &Matrix,
    y: &Matrix,
    s: &BlackBoxOperation,
    g: &Assignment,
) -> Result<bool, Error> {
    Ok(apply_g(g, eval_t(s, x)?)? == apply_g(g, eval_t(s, y)?)?)
}

fn apply_g(g: &Assignment, value: usize) -> Result<usize, Error> {
    if value >= g.len() {
        return Err(Error::PartialAssignment(format!(
            "g covers 0..{}, operation produced {value}",
            g.len()
        )));
    }
    Ok(g.get(value))
}

/// Which precondition of the cover lemma was found violated when the
/// conclusion failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverLemmaFailure {
    /// The template's relation does not contain the three unit triples.
    MissingUnitTriples,
    /// g is not a homomorphism from the template to NAE.
    GNotHomomorphism,
    /// s does not preserve the template's relation; the witness is the
    /// image triple (t(X), t(Y), t(Z)) outside R.
    NotAPolymorphism { image: [usize; 3] },
    /// Preconditions look fine on every check we can run (should not
    /// happen; kept for honesty about black-box operations).
    Undetermined,
}

/// Outcome of the cover lemma check: under the lemma's preconditions
/// `pass` is guaranteed; on failure the report identifies the violated
/// precondition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverLemmaReport {
    pub pass: bool,
    pub g_values: [usize; 3],
    pub failure: Option<CoverLemmaFailure>,
}

/// Checks that a cover's images under g . t are not all equal. The
/// template `c` must have a single ternary relation containing the unit
/// triples, `s` must preserve it, and `g` must map `c` into NAE.
pub fn check_cover_lemma(
    x: &Matrix,
    y: &Matrix,
    z: &Matrix,
    s: &BlackBoxOperation,
    c: &RelationalStructure,
    g: &Assignment,
) -> Result<CoverLemmaReport, Error> {
    if !is_cover(x, y, z)? {
        return Err(Error::NotACover("matrices do not form a cover".into()));
    }
    let tx = eval_t(s, x)?;
    let ty = eval_t(s, y)?;
    let tz = eval_t(s, z)?;
    let gv = [apply_g(g, tx)?, apply_g(g, ty)?, apply_g(g, tz)?];
    let pass = !(gv[0] == gv[1] && gv[1] == gv[2]);
    if pass {
        return Ok(CoverLemmaReport { pass, g_values: gv, failure: None });
    }

    // conclusion failed: identify the violated precondition
    let failure = diagnose_cover_failure(c, g, [tx, ty, tz]);
    Ok(CoverLemmaReport { pass, g_values: gv, failure: Some(failure) })
}

fn diagnose_cover_failure(
    c: &RelationalStructure,
    g: &Assignment,
    image: [usize; 3],
) -> CoverLemmaFailure {
    let r = c.relation(0);
    let units = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    if r.arity() != 3 || units.iter().any(|u| !r.contains(u)) {
        return CoverLemmaFailure::MissingUnitTriples;
    }
    // g must send every R-tuple to a not-all-equal triple over {0,1}
    let g_ok = g.len() == c.domain_size()
        && g.values().iter().all(|&v| v <= 1)
        && r.tuples().iter().all(|t| {
            let im: Vec<usize> = t.iter().map(|&e| g.get(e)).collect();
            !(im[0] == im[1] && im[1] == im[2])
        });
    if !g_ok {
        return CoverLemmaFailure::GNotHomomorphism;
    }
    // entrywise the cover triples are unit triples in R, so if s (hence
    // t) preserved R the image triple would be in R
    if !r.contains(&image) {
        return CoverLemmaFailure::NotAPolymorphism { image };
    }
    CoverLemmaFailure::Undetermined
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaSide {
    BelowOneThird,
    AboveOneThird,
}

/// Tameness verdict: a matrix with area below 1/3 is compared to the
/// all-zero matrix, one with area above 1/3 to the all-one matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TameReport {
    pub tame: bool,
    pub side: AreaSide,
    pub area: BigRational,
    pub g_t_x: usize,
    pub g_t_reference: usize,
}

pub fn is_tame(
    x: &Matrix,
    s: &BlackBoxOperation,
    g: &Assignment,
) -> Result<TameReport, Error> {
    let lambda = area(x)?;
    let third = one_third();
    if lambda == third {
        return Err(Error::Range("area equals 1/3, tameness is undefined".into()));
    }
    let p = x.side();
    let (side, reference) = if lambda < third {
        (AreaSide::BelowOneThird, Matrix::zeros(p))
    } else {
        (AreaSide::AboveOneThird, Matrix::ones(p))
    };
    let g_t_x = apply_g(g, eval_t(s, x)?)?;
    let g_t_reference = apply_g(g, eval_t(s, &reference)?)?;
    Ok(TameReport { tame: g_t_x == g_t_reference, side, area: lambda, g_t_x, g_t_reference })
}

/// Full trace of the pigeonhole refutation construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefutationReport {
    pub p: usize,
    pub c_size: usize,
    pub m: usize,
    pub l1: usize,
    pub l2: usize,
    pub k: usize,
    pub area_x1: BigRational,
    pub area_x2: BigRational,
    pub t_x1: usize,
    pub t_x2: usize,
    pub t_zero: usize,
    pub t_one: usize,
    /// distinct prefix-column values seen while scanning the interval
    pub scanned_values: usize,
    pub pigeonhole_found: bool,
    pub t_values_equal: bool,
    pub area_straddle: bool,
    /// increasing k by one flips the area of X1 above 1/3
    pub k_increment_flips: bool,
    /// number of integers in the scanned open interval
    pub interval_integers: usize,
    pub x1_step: usize,
    pub x2_step: usize,
    pub almost_rectangles: bool,
    pub x1_equiv_zero: bool,
    pub x2_equiv_one: bool,
    pub zero_equiv_one: bool,
    /// X1 ~ 0 and X2 ~ 1 while 0 is not equivalent to 1: together with
    /// t(X1) = t(X2) this is the contradiction
    pub contradiction_applies: bool,
    /// result of the optional R-membership check on the unit triples
    pub unit_triples_in_r: Option<bool>,
}

impl fmt::Display for RefutationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "c_size = {}", self.c_size)?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "l1 = {}", self.l1)?;
        writeln!(f, "l2 = {}", self.l2)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "area_x1 = {}", self.area_x1)?;
        writeln!(f, "area_x2 = {}", self.area_x2)?;
        writeln!(f, "t_x1 = {}", self.t_x1)?;
        writeln!(f, "t_x2 = {}", self.t_x2)?;
        writeln!(f, "t_zero = {}", self.t_zero)?;
        writeln!(f, "t_one = {}", self.t_one)?;
        writeln!(f, "scanned_values = {}", self.scanned_values)?;
        writeln!(f, "interval_integers = {}", self.interval_integers)?;
        writeln!(f, "pigeonhole_found = {}", self.pigeonhole_found)?;
        writeln!(f, "t_values_equal = {}", self.t_values_equal)?;
        writeln!(f, "area_straddle = {}", self.area_straddle)?;
        writeln!(f, "k_increment_flips = {}", self.k_increment_flips)?;
        writeln!(f, "x1_step = {}", self.x1_step)?;
        writeln!(f, "x2_step = {}", self.x2_step)?;
        writeln!(f, "almost_rectangles = {}", self.almost_rectangles)?;
        writeln!(f, "x1_equiv_zero = {}", self.x1_equiv_zero)?;
        writeln!(f, "x2_equiv_one = {}", self.x2_equiv_one)?;
        writeln!(f, "zero_equiv_one = {}", self.zero_equiv_one)?;
        writeln!(f, "contradiction_applies = {}", self.contradiction_applies)
    }
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Runs the refutation construction: with m = (p-1)/2, scan the open
/// interval (p/3 - 2|C|, p/3) for l1 < l2 whose prefix columns get
/// equal s-values (pigeonhole), take the maximal k keeping the area of
/// X1 = rho(k x m, l1 ...) below 1/3, and report that t(X1) = t(X2)
/// while the areas straddle 1/3, plus whether the tameness-based
/// contradiction applies under (s, g).
///
/// `r_member`, when supplied, records whether the three unit triples
/// lie in the template relation.
pub fn refute_cyclic(
    s: &BlackBoxOperation,
    c_size: usize,
    g: &Assignment,
    r_member: Option<&dyn Fn(usize, usize, usize) -> bool>,
    allow_small_p: bool,
) -> Result<RefutationReport, Error> {
    let p = s.arity();
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p <= 60 * c_size && !allow_small_p {
        return Err(Error::BoundViolation(format!(
            "need p > 60|C| = {}, got p = {p} (pass the override to experiment below the bound)",
            60 * c_size
        )));
    }
    if let Some(&v) = g.values().iter().find(|&&v| v > 1) {
        return Err(Error::DomainMismatch(format!(
            "g must map into {{0,1}}, found {v}"
        )));
    }

    let m = (p - 1) / 2;

    // integers strictly inside (p/3 - 2C, p/3): p - 6C < 3l < p
    let candidates: Vec<usize> = (0..=p)
        .filter(|&l| 3 * l < p && 3 * l + 6 * c_size > p)
        .collect();
    let interval_integers = candidates.len();

    // prefix-column values; first repeated value gives (l1, l2)
    let mut seen: Vec<(usize, usize)> = Vec::new(); // (value, l)
    let mut found = None;
    for &l in &candidates {
        let mut args = vec![0usize; p];
        for a in args.iter_mut().take(l) {
            *a = 1;
        }
        let v = s.eval(&args);
        if let Some(&(_, l1)) = seen.iter().find(|&&(sv, _)| sv == v) {
            found = Some((l1, l));
            break;
        }
        seen.push((v, l));
    }
    let scanned_values = seen.len();
    let Some((l1, l2)) = found else {
        return Err(Error::PigeonholeFailure(format!(
            "{scanned_values} distinct values on {interval_integers} prefix columns; \
             the operation takes more than {c_size} values on this family"
        )));
    };

    // maximal k with 3(m k + (p - m) l1) < p^2
    let budget = p * p;
    let fixed = 3 * (p - m) * l1;
    if fixed >= budget || m == 0 {
        return Err(Error::BoundViolation(format!(
            "no k yields area below 1/3 at p = {p}, l1 = {l1}"
        )));
    }
    let mut k = (budget - fixed - 1) / (3 * m);
    if k > p {
        k = p;
    }

    let x1 = step_matrix(p, k, l1, m)?;
    let x2 = step_matrix(p, k, l2, m)?;
    let area_x1 = area(&x1)?;
    let area_x2 = area(&x2)?;
    let third = one_third();

    let t_x1 = eval_t(s, &x1)?;
    let t_x2 = eval_t(s, &x2)?;
    let zeros = Matrix::zeros(p);
    let ones = Matrix::ones(p);
    let t_zero = eval_t(s, &zeros)?;
    let t_one = eval_t(s, &ones)?;

    let k_increment_flips = if k < p {
        let bumped = area(&step_matrix(p, k + 1, l1, m)?)?;
        bumped > third
    } else {
        true // k is already the full column height
    };

    let x1_step = k.saturating_sub(l1);
    let x2_step = k.saturating_sub(l2);
    let almost_rectangles = k >= l2
        && is_almost_rectangle(&x1, c_size)
        && is_almost_rectangle(&x2, c_size);

    let g_t_x1 = apply_g(g, t_x1)?;
    let g_t_x2 = apply_g(g, t_x2)?;
    let g_t_zero = apply_g(g, t_zero)?;
    let g_t_one = apply_g(g, t_one)?;

    let x1_equiv_zero = g_t_x1 == g_t_zero;
    let x2_equiv_one = g_t_x2 == g_t_one;
    let zero_equiv_one = g_t_zero == g_t_one;

    let unit_triples_in_r = r_member
        .map(|f| f(1, 0, 0) && f(0, 1, 0) && f(0, 0, 1));

    Ok(RefutationReport {
        p,
        c_size,
        m,
        l1,
        l2,
        k,
        area_straddle: area_x1 < third && third < area_x2,
        area_x1,
        area_x2,
        t_x1,
        t_x2,
        t_zero,
        t_one,
        scanned_values,
        pigeonhole_found: true,
        t_values_equal: t_x1 == t_x2,
        k_increment_flips,
        interval_integers,
        x1_step,
        x2_step,
        almost_rectangles,
        x1_equiv_zero,
        x2_equiv_one,
        zero_equiv_one,
        contradiction_applies: x1_equiv_zero && x2_equiv_one && !zero_equiv_one,
        unit_triples_in_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::OperationTable;
    use crate::structure::builtin_template;
    use num_traits::Zero;

    fn parity_table(p: usize) -> BlackBoxOperation {
        BlackBoxOperation::parity(p)
    }

    #[test]
    fn eval_t_examples() {
        // parity of the total number of ones
        let s = parity_table(3);
        let x = tau(4, 3).unwrap();
        assert_eq!(eval_t(&s, &x).unwrap(), 0);
        assert_eq!(eval_t(&s, &tau(1, 3).unwrap()).unwrap(), 1);

        // first projection: t(X) = x11
        let proj = BlackBoxOperation::projection(3, 0);
        let mut data = vec![0; 9];
        data[0] = 7;
        let x = Matrix::new(3, data).unwrap();
        assert_eq!(eval_t(&proj, &x).unwrap(), 7);

        // dimension mismatch
        assert!(matches!(
            eval_t(&s, &tau(0, 5).unwrap()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn area_examples() {
        assert!(area(&Matrix::zeros(5)).unwrap().is_zero());
        let r = area(&tau(8, 5).unwrap()).unwrap();
        assert_eq!(r, BigRational::new(BigInt::from(8), BigInt::from(25)));
        let mut bad = Matrix::zeros(3);
        bad.data[0] = 2;
        assert!(matches!(area(&bad), Err(Error::NonBinaryEntry(_))));
    }

    #[test]
    fn area_never_one_third_for_prime_side() {
        // p^2 = 1 mod 3 for prime p > 3, so count/p^2 = 1/3 needs 3 | p^2
        for p in [5usize, 7, 11, 13] {
            for count in 0..=(p * p) {
                let lambda =
                    BigRational::new(BigInt::from(count), BigInt::from(p * p));
                assert_ne!(lambda, one_third(), "p = {p}, count = {count}");
            }
        }
    }

    #[test]
    fn tau_and_rho_shapes() {
        assert_eq!(tau(0, 5).unwrap(), Matrix::zeros(5));
        assert_eq!(tau(25, 5).unwrap(), Matrix::ones(5));
        assert!(tau(26, 5).is_err());

        assert_eq!(rho(&[5, 5, 5, 5, 5]).unwrap(), Matrix::ones(5));
        let x = rho(&[2, 2, 1]).unwrap();
        assert_eq!(area(&x).unwrap(), BigRational::new(BigInt::from(5), BigInt::from(9)));
        assert!(rho(&[3, 0, 1]).is_ok()); // height 0 admitted
        assert!(rho(&[4, 0, 1]).is_err()); // exceeds side 3
    }

    #[test]
    fn almost_rectangle_predicate() {
        let x = step_matrix(7, 4, 2, 3).unwrap();
        assert_eq!(almost_rectangle_shape(&x), Some((4, 2, 3)));
        assert!(is_almost_rectangle(&x, 1)); // step 2 <= 5
        let wide = step_matrix(7, 7, 0, 3).unwrap();
        assert_eq!(almost_rectangle_shape(&wide), Some((7, 0, 3)));
        assert!(!is_almost_rectangle(&wide, 1)); // step 7 > 5

        // three-level matrices are not almost rectangles
        let three = rho(&[3, 2, 1]).unwrap();
        assert_eq!(almost_rectangle_shape(&three), None);
        // ascending steps are not of the form rho(k..k, l..l)
        let asc = rho(&[1, 1, 3]).unwrap();
        assert_eq!(almost_rectangle_shape(&asc), None);
        // constant heights: step 0
        assert_eq!(almost_rectangle_shape(&rho(&[2, 2, 2]).unwrap()), Some((2, 2, 3)));
    }

    #[test]
    fn cover_examples() {
        let p = 3;
        assert!(is_cover(&Matrix::ones(p), &Matrix::zeros(p), &Matrix::zeros(p)).unwrap());
        assert!(!is_cover(&Matrix::zeros(p), &Matrix::zeros(p), &Matrix::zeros(p)).unwrap());

        // tau(q), tau(q) shifted q right, tau(q+1) shifted 2q right at p=5
        let q = 8; // 25 = 3*8 + 1
        let x = tau(q, 5).unwrap();
        let y = shift(&tau(q, 5).unwrap(), ShiftMode::FlatCyclicRight, &[q]).unwrap();
        let z = shift(&tau(q + 1, 5).unwrap(), ShiftMode::FlatCyclicRight, &[2 * q]).unwrap();
        assert!(is_cover(&x, &y, &z).unwrap());
    }

    #[test]
    fn cover_entries_are_unit_triples() {
        let (x, y, z) = prefix_cover(&[2, 1, 3], &[1, 2, 0], &[0, 0, 0]).unwrap();
        assert!(is_cover(&x, &y, &z).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let t = [x.get(i, j), y.get(i, j), z.get(i, j)];
                assert_eq!(t.iter().sum::<usize>(), 1);
            }
        }
    }

    #[test]
    fn shifts_are_pure_and_periodic() {
        let x = tau(7, 4).unwrap();
        assert_eq!(shift(&x, ShiftMode::RowsLeft, &[0]).unwrap(), x);
        assert_eq!(shift(&x, ShiftMode::FlatCyclicRight, &[16]).unwrap(), x);
        assert_eq!(shift(&x, ShiftMode::ColumnsDown, &[4]).unwrap(), x);
        assert!(shift(&x, ShiftMode::RowsLeft, &[5]).is_err());

        // shift right by q then further by p^2 - q returns to start
        let y = shift(&x, ShiftMode::FlatCyclicRight, &[5]).unwrap();
        let back = shift(&y, ShiftMode::FlatCyclicRight, &[11]).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn shift_invariance_of_t_for_cyclic_operations() {
        // rows-left and columns-down shifts do not change t when s is
        // cyclic; the flat cyclic shift is covered by the t-cyclicity
        // acceptance test
        let mut state = 0xabcdefu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        for p in [3usize, 5] {
            for _ in 0..50 {
                // random cyclic table: constant on rotation orbits
                let table = random_cyclic_table(p, 2, &mut next);
                let s = BlackBoxOperation::from_table(&table);
                assert!(s.declared_cyclic());
                let x = Matrix::new(p, (0..p * p).map(|_| next() % 2).collect()).unwrap();
                let t0 = eval_t(&s, &x).unwrap();

                let rl = shift(&x, ShiftMode::RowsLeft, &[next() % p]).unwrap();
                assert_eq!(eval_t(&s, &rl).unwrap(), t0);

                let amounts: Vec<usize> = (0..p).map(|_| next() % p).collect();
                let cd = shift(&x, ShiftMode::ColumnsDown, &amounts).unwrap();
                assert_eq!(eval_t(&s, &cd).unwrap(), t0);

                let fc = shift(&x, ShiftMode::FlatCyclicRight, &[next() % (p * p)]).unwrap();
                assert_eq!(eval_t(&s, &fc).unwrap(), t0);
            }
        }
    }

    fn random_cyclic_table(
        arity: usize,
        domain: usize,
        next: &mut impl FnMut() -> usize,
    ) -> OperationTable {
        use crate::structure::{tuple_of_rank, tuple_rank};
        let size = domain.pow(arity as u32);
        let mut values = vec![usize::MAX; size];
        for rank in 0..size {
            if values[rank] != usize::MAX {
                continue;
            }
            let v = next() % domain;
            let mut t = tuple_of_rank(rank, domain, arity);
            for _ in 0..arity {
                values[tuple_rank(&t, domain)] = v;
                t.rotate_left(1);
            }
        }
        OperationTable::new(arity, domain, values).unwrap()
    }

    #[test]
    fn g_equivalence_basics() {
        let s = parity_table(3);
        let id = Assignment::identity(2);
        let x = tau(1, 3).unwrap();
        let y = tau(2, 3).unwrap();
        assert!(g_equivalent(&x, &x, &s, &id).unwrap());
        assert!(!g_equivalent(&x, &y, &s, &id).unwrap());
    }

    #[test]
    fn two_block_property() {
        // with a two-valued g, X !~ Y and Y !~ Z forces X ~ Z
        let s = parity_table(3);
        let id = Assignment::identity(2);
        let mut state = 5u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        for _ in 0..100 {
            let mk = |next: &mut dyn FnMut() -> usize| {
                Matrix::new(3, (0..9).map(|_| next() % 2).collect()).unwrap()
            };
            let x = mk(&mut next);
            let y = mk(&mut next);
            let z = mk(&mut next);
            if !g_equivalent(&x, &y, &s, &id).unwrap()
                && !g_equivalent(&y, &z, &s, &id).unwrap()
            {
                assert!(g_equivalent(&x, &z, &s, &id).unwrap());
            }
        }
    }

    #[test]
    fn tameness_examples() {
        let s = parity_table(3);
        let id = Assignment::identity(2);
        assert!(is_tame(&Matrix::zeros(3), &s, &id).unwrap().tame);
        assert!(is_tame(&Matrix::ones(3), &s, &id).unwrap().tame);

        // tau(1) at p=3: area 1/9 < 1/3 but t = 1 != t(zeros) = 0
        let report = is_tame(&tau(1, 3).unwrap(), &s, &id).unwrap();
        assert_eq!(report.side, AreaSide::BelowOneThird);
        assert!(!report.tame);

        // area exactly 1/3 is rejected (possible only for p = 3 here)
        assert!(matches!(
            is_tame(&tau(3, 3).unwrap(), &s, &id),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn cover_lemma_with_projections() {
        let c = builtin_template("one-in-three").unwrap();
        let id = Assignment::identity(2);
        let proj = BlackBoxOperation::projection(3, 1);
        let (x, y, z) = prefix_cover(&[1, 2, 0], &[1, 1, 2], &[1, 0, 1]).unwrap();
        let report = check_cover_lemma(&x, &y, &z, &proj, &c, &id).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn cover_lemma_diagnoses_non_polymorphism() {
        let c = builtin_template("one-in-three").unwrap();
        let id = Assignment::identity(2);
        // constant 1 does not preserve R: (1,1,1) is not in R
        let bad = BlackBoxOperation::from_fn("const1", 3, true, |_| 1);
        let (x, y, z) = prefix_cover(&[1, 2, 0], &[1, 1, 2], &[1, 0, 1]).unwrap();
        let report = check_cover_lemma(&x, &y, &z, &bad, &c, &id).unwrap();
        assert!(!report.pass);
        assert_eq!(
            report.failure,
            Some(CoverLemmaFailure::NotAPolymorphism { image: [1, 1, 1] })
        );
        // not-a-cover precondition
        assert!(matches!(
            check_cover_lemma(&x, &y, &x, &bad, &c, &id),
            Err(Error::NotACover(_))
        ));
    }

    #[test]
    fn refutation_at_paper_scale() {
        let id = Assignment::identity(2);
        let t13 = builtin_template("one-in-three").unwrap();
        let member = |a: usize, b: usize, c: usize| t13.relation(0).contains(&[a, b, c]);
        for s in [BlackBoxOperation::parity(127), BlackBoxOperation::threshold_half(127)] {
            let report = refute_cyclic(&s, 2, &id, Some(&member), false).unwrap();
            assert_eq!(report.m, 63);
            assert!(report.pigeonhole_found);
            assert!(report.t_values_equal);
            assert!(report.area_straddle);
            assert!(report.k_increment_flips);
            assert!(report.almost_rectangles);
            assert!(report.x1_step <= 10 && report.x2_step <= 10);
            assert!(report.l1 < report.l2);
            assert!(report.interval_integers > 2);
            assert_eq!(report.unit_triples_in_r, Some(true));
            // l bounds: p - 6C < 3l < p
            assert!(3 * report.l1 > 127 - 12 && 3 * report.l2 < 127);
        }
    }

    #[test]
    fn refutation_rejects_bad_parameters() {
        let id = Assignment::identity(2);
        assert!(matches!(
            refute_cyclic(&BlackBoxOperation::parity(9), 2, &id, None, true),
            Err(Error::NotPrime(9))
        ));
        assert!(matches!(
            refute_cyclic(&BlackBoxOperation::parity(13), 2, &id, None, false),
            Err(Error::BoundViolation(_))
        ));
        // injective-on-the-family operation defeats the pigeonhole
        let inj = BlackBoxOperation::from_fn("count", 127, true, |args| {
            args.iter().filter(|&&x| x == 1).count()
        });
        let g = Assignment::constant(128, 0);
        assert!(matches!(
            refute_cyclic(&inj, 2, &g, None, false),
            Err(Error::PigeonholeFailure(_))
        ));
    }

    #[test]
    fn matrix_text_roundtrip() {
        let x = tau(3, 3).unwrap();
        let text = x.to_text();
        assert_eq!(text, "3\n1 1 1\n0 0 0\n0 0 0\n");
        assert_eq!(Matrix::from_text(&text).unwrap(), x);
        assert!(Matrix::from_text("").is_err());
        assert!(Matrix::from_text("2\n1 0 0\n").is_err());
    }
}
