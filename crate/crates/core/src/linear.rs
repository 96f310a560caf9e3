//! Exact linear algebra over the integers and rationals: Hermite normal
//! form by unimodular column operations, integer (Diophantine) system
//! solving with a kernel lattice basis, and rational solving that
//! avoids a forbidden coordinate value.
//!
//! All arithmetic is arbitrary precision; there is no floating point
//! anywhere in this module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::Error;

/// Dense matrix of arbitrary-precision integers, row major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self, Error> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(IntMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        IntMatrix::from_rows(
            rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect(),
        )
        .expect("literal rows are rectangular")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &BigInt {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix, Error> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = IntMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let add = a * other.get(k, j);
                    let cur = out.get(i, j) + add;
                    out.set(i, j, cur);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Result<Vec<BigInt>, Error> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, vector has {}",
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * &v[j]).sum())
            .collect())
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + a, r * self.cols + b);
        }
    }

    fn negate_col(&mut self, c: usize) {
        for r in 0..self.rows {
            let v = -self.get(r, c).clone();
            self.set(r, c, v);
        }
    }

    /// col_dst -= q * col_src
    fn shear_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for r in 0..self.rows {
            let v = self.get(r, dst) - q * self.get(r, src);
            self.set(r, dst, v);
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Result<BigInt, Error> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch("determinant of non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut m = self.data.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m[k * n + k].is_zero() {
                match (k + 1..n).find(|&r| !m[r * n + k].is_zero()) {
                    Some(r) => {
                        for c in 0..n {
                            m.swap(k * n + c, r * n + c);
                        }
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j];
                    m[i * n + j] = num / &prev;
                }
            }
            prev = m[k * n + k].clone();
        }
        Ok(sign * m[(n - 1) * n + (n - 1)].clone())
    }
}

/// A·x = b with exact integer entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerLinearSystem {
    pub a: IntMatrix,
    pub b: Vec<BigInt>,
}

impl IntegerLinearSystem {
    pub fn new(a: IntMatrix, b: Vec<BigInt>) -> Result<Self, Error> {
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, rhs has {} entries",
                a.rows(),
                b.len()
            )));
        }
        Ok(IntegerLinearSystem { a, b })
    }
}

/// Particular solution plus a basis of the homogeneous solutions;
/// `A·particular = b` and `A·basis_i = 0` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSolutionSpace<T> {
    pub particular: Vec<T>,
    pub basis: Vec<Vec<T>>,
}

/// The column-style Hermite normal form of `a`: returns `(h, u)` with
/// `a·u = h`, `u` square and unimodular (`|det u| = 1`), `h` with a
/// descending pivot staircase, positive pivots, entries left of each
/// pivot reduced into `[0, pivot)`, and entries right of each pivot
/// zero.
pub fn hermite_normal_form(a: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let mut h = a.clone();
    let mut u = IntMatrix::identity(a.cols());
    let mut hnf = HnfState { h: &mut h, u: &mut u };
    hnf.reduce();
    (h, u)
}

struct HnfState<'m> {
    h: &'m mut IntMatrix,
    u: &'m mut IntMatrix,
}

impl HnfState<'_> {
    fn swap_cols(&mut self, a: usize, b: usize) {
        self.h.swap_cols(a, b);
        self.u.swap_cols(a, b);
    }

    fn negate_col(&mut self, c: usize) {
        self.h.negate_col(c);
        self.u.negate_col(c);
    }

    fn shear_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        self.h.shear_col(dst, src, q);
        self.u.shear_col(dst, src, q);
    }

    fn reduce(&mut self) {
        let rows = self.h.rows();
        let cols = self.h.cols();
        let mut c = 0; // next pivot column
        for r in 0..rows {
            if c == cols {
                break;
            }
            // Euclidean elimination: shrink entries in row r, columns c..,
            // until only column c is nonzero there.
            loop {
                let pivot = (c..cols)
                    .filter(|&j| !self.h.get(r, j).is_zero())
                    .min_by_key(|&j| self.h.get(r, j).abs());
                let Some(p) = pivot else { break };
                self.swap_cols(c, p);
                if self.h.get(r, c).is_negative() {
                    self.negate_col(c);
                }
                let mut done = true;
                for j in c + 1..cols {
                    if self.h.get(r, j).is_zero() {
                        continue;
                    }
                    let q = div_round(self.h.get(r, j), self.h.get(r, c));
                    self.shear_col(j, c, &q);
                    if !self.h.get(r, j).is_zero() {
                        done = false;
                    }
                }
                if done {
                    break;
                }
            }
            if self.h.get(r, c).is_zero() {
                continue; // no pivot in this row
            }
            // Reduce entries left of the pivot into [0, pivot).
            for j in 0..c {
                let q = div_floor(self.h.get(r, j), self.h.get(r, c));
                self.shear_col(j, c, &q);
            }
            c += 1;
        }
    }
}

/// Quotient rounding to nearest (ties toward zero); keeps remainders
/// at most half the divisor during Euclidean elimination.
fn div_round(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = num_integer::Integer::div_rem(a, b);
    let two_r = BigInt::from(2) * r.abs();
    if two_r > b.abs() {
        if (a.is_negative()) ^ (b.is_negative()) {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

fn div_floor(a: &BigInt, b: &BigInt) -> BigInt {
    num_integer::Integer::div_floor(a, b)
}

/// Pivot columns of a matrix in column HNF shape: for each pivot column
/// `i`, the row of its lowest "staircase" entry.
fn pivot_rows(h: &IntMatrix) -> Vec<usize> {
    // By construction pivots appear in column order with strictly
    // increasing rows; the pivot of column i is the first row r where
    // h[r][i] != 0 and h[r][j] == 0 for all j > i.
    let mut pivots = Vec::new();
    let mut col = 0;
    for r in 0..h.rows() {
        if col == h.cols() {
            break;
        }
        if !h.get(r, col).is_zero() && (col + 1..h.cols()).all(|j| h.get(r, j).is_zero()) {
            pivots.push(r);
            col += 1;
        }
    }
    pivots
}

/// Solves A·x = b over the integers. Returns a particular solution and
/// a lattice basis spanning all homogeneous integer solutions, or
/// `None` as a definitive certificate that no integer solution exists.
pub fn solve_integer_system(
    sys: &IntegerLinearSystem,
) -> Option<AffineSolutionSpace<BigInt>> {
    let (h, u) = hermite_normal_form(&sys.a);
    let pivots = pivot_rows(&h);
    let rank = pivots.len();
    let n = sys.a.cols();

    // Solve H·y = b on the pivot staircase; non-pivot rows are pure
    // consistency constraints.
    let mut y = vec![BigInt::zero(); n];
    let mut next_pivot = 0;
    for r in 0..h.rows() {
        let acc: BigInt = (0..rank).map(|j| h.get(r, j) * &y[j]).sum();
        if next_pivot < rank && pivots[next_pivot] == r {
            let i = next_pivot;
            let rhs = &sys.b[r] - acc;
            let (q, rem) = num_integer::Integer::div_rem(&rhs, h.get(r, i));
            if !rem.is_zero() {
                return None; // pivot does not divide: no integer solution
            }
            y[i] = q;
            next_pivot += 1;
        } else if acc != sys.b[r] {
            return None; // inconsistent row
        }
    }

    let particular = u.mul_vec(&y).expect("dimensions agree");
    let basis = (rank..n)
        .map(|j| (0..n).map(|i| u.get(i, j).clone()).collect())
        .collect();
    Some(AffineSolutionSpace { particular, basis })
}

/// Outcome of rational solving with a forbidden coordinate value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RationalAvoidOutcome {
    Solution(Vec<BigRational>),
    /// No rational solution at all.
    Unsolvable,
    /// The system is solvable, but this coordinate is identically equal
    /// to the forbidden value on the whole solution space.
    ForcedCoordinate { index: usize },
}

/// Solves A·x = b over the rationals and returns an exact solution in
/// which no coordinate equals `forbidden`.
///
/// Every coordinate is an affine function of the free parameters; a
/// coordinate that depends on some parameter misses `forbidden` for all
/// but one value of that parameter once the others are fixed, so
/// parameters are chosen one at a time from 0, 1, 2, ... skipping
/// values that would pin any still-affected coordinate to `forbidden`.
pub fn solve_rational_avoiding(
    sys: &IntegerLinearSystem,
    forbidden: &BigRational,
) -> RationalAvoidOutcome {
    let (h, u) = hermite_normal_form(&sys.a);
    let pivots = pivot_rows(&h);
    let rank = pivots.len();
    let n = sys.a.cols();

    let mut y = vec![BigRational::zero(); n];
    let mut next_pivot = 0;
    for r in 0..h.rows() {
        let acc: BigRational = (0..rank)
            .map(|j| BigRational::from(h.get(r, j).clone()) * &y[j])
            .sum();
        if next_pivot < rank && pivots[next_pivot] == r {
            let i = next_pivot;
            let rhs = BigRational::from(sys.b[r].clone()) - acc;
            y[i] = rhs / BigRational::from(h.get(r, i).clone());
            next_pivot += 1;
        } else if acc != BigRational::from(sys.b[r].clone()) {
            return RationalAvoidOutcome::Unsolvable;
        }
    }

    // x(t) = particular + sum_j t_j * basis_j over parameters t.
    let particular: Vec<BigRational> = {
        let yv = y;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| BigRational::from(u.get(i, j).clone()) * &yv[j])
                    .sum()
            })
            .collect()
    };
    let basis: Vec<Vec<BigRational>> = (rank..n)
        .map(|j| (0..n).map(|i| BigRational::from(u.get(i, j).clone())).collect())
        .collect();

    let mut current = particular;
    for param in 0..basis.len() {
        // A coordinate becomes frozen after this parameter is fixed iff
        // no later parameter moves it.
        let later_moves = |i: usize| (param + 1..basis.len()).any(|j| !basis[j][i].is_zero());
        let mut t = BigRational::zero();
        'search: loop {
            for i in 0..n {
                if basis[param][i].is_zero() || later_moves(i) {
                    continue;
                }
                if &current[i] + &basis[param][i] * &t == *forbidden {
                    t += BigRational::one();
                    continue 'search;
                }
            }
            break;
        }
        for i in 0..n {
            let delta = &basis[param][i] * &t;
            current[i] += delta;
        }
    }

    if let Some(i) = (0..n).find(|&i| current[i] == *forbidden) {
        // Only coordinates no parameter moves can still be forbidden.
        return RationalAvoidOutcome::ForcedCoordinate { index: i };
    }
    RationalAvoidOutcome::Solution(current)
}
