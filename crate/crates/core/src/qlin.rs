//! Exact rational linear algebra.
//!
//! Matrices carry `BigRational` entries and are never rounded. Rank, kernel,
//! image and solving all go through a fraction-free (Bareiss) elimination on
//! the integer matrix obtained by clearing denominators row by row, so no
//! intermediate value ever leaves `Z`.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt;
use thiserror::Error;

pub type Rat = BigRational;

pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_int(p: i64) -> Rat {
    Rat::from(BigInt::from(p))
}

/// Canonical `p/q` form, lowest terms, `q > 0`.
pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `p/q` or a bare integer `p`.
pub fn rat_from_str(s: &str) -> Result<Rat, QlinError> {
    let parse_int = |t: &str| {
        t.trim()
            .parse::<BigInt>()
            .map_err(|_| QlinError::BadRational(s.to_string()))
    };
    match s.split_once('/') {
        Some((p, q)) => {
            let denom = parse_int(q)?;
            if denom.is_zero() {
                return Err(QlinError::BadRational(s.to_string()));
            }
            Ok(Rat::new(parse_int(p)?, denom))
        }
        None => Ok(Rat::from(parse_int(s)?)),
    }
}

#[derive(Debug, Error)]
pub enum QlinError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("no solution: b is not in the image of A")]
    NoSolution,
    #[error("not a rational: {0}")]
    BadRational(String),
}

/// A vector in `Q^n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QVec(pub Vec<Rat>);

impl QVec {
    pub fn zeros(n: usize) -> Self {
        QVec(vec![Rat::zero(); n])
    }

    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = vec![Rat::zero(); n];
        v[k] = Rat::one();
        QVec(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn add(&self, other: &QVec) -> QVec {
        assert_eq!(self.dim(), other.dim());
        QVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &QVec) -> QVec {
        assert_eq!(self.dim(), other.dim());
        QVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: &Rat) -> QVec {
        QVec(self.0.iter().map(|a| a * c).collect())
    }

    /// Sum of absolute values of the coordinates.
    pub fn l1(&self) -> Rat {
        self.0.iter().map(Signed::abs).sum()
    }

    /// Weighted sum of absolute values; `weights` must be strictly positive.
    pub fn weighted_l1(&self, weights: &[Rat]) -> Rat {
        assert_eq!(self.dim(), weights.len());
        self.0.iter().zip(weights).map(|(a, w)| a.abs() * w).sum()
    }
}

impl fmt::Debug for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", rat_to_string(a))?;
        }
        write!(f, ")")
    }
}

/// A dense `rows x cols` matrix over `Q`, row major.
#[derive(Clone, PartialEq, Eq)]
pub struct QMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Rat>,
}

impl fmt::Debug for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{} ", rat_to_string(self.get(r, c)))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMatrix {
            rows,
            cols,
            entries: vec![Rat::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.set(k, k, Rat::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == nc));
        QMatrix {
            rows: nr,
            cols: nc,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| rat_int(x)).collect())
                .collect(),
        )
    }

    pub fn get(&self, r: usize, c: usize) -> &Rat {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rat) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> QVec {
        QVec(self.entries[r * self.cols..(r + 1) * self.cols].to_vec())
    }

    pub fn col(&self, c: usize) -> QVec {
        QVec((0..self.rows).map(|r| self.get(r, c).clone()).collect())
    }

    pub fn transpose(&self) -> QMatrix {
        let mut t = QMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && *self == QMatrix::identity(self.rows)
    }

    /// `self * v` with `v` a column vector of length `cols`.
    pub fn apply(&self, v: &QVec) -> QVec {
        assert_eq!(self.cols, v.dim(), "apply: dimension mismatch");
        QVec(
            (0..self.rows)
                .map(|r| (0..self.cols).map(|c| self.get(r, c) * &v.0[c]).sum())
                .collect(),
        )
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, rhs.rows, "mul: dimension mismatch");
        let mut out = QMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = Rat::zero();
                for k in 0..self.cols {
                    acc += self.get(r, k) * rhs.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn pow(&self, mut e: usize) -> QMatrix {
        assert_eq!(self.rows, self.cols);
        let mut acc = QMatrix::identity(self.rows);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Every entry is `0`, `+c` or `-c` with exactly one nonzero per row and
    /// per column. These are precisely the maps that preserve a weighted
    /// `l1` norm for suitable weights.
    pub fn is_monomial(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            if (0..self.cols).filter(|&c| !self.get(r, c).is_zero()).count() != 1 {
                return false;
            }
        }
        for c in 0..self.cols {
            if (0..self.rows).filter(|&r| !self.get(r, c).is_zero()).count() != 1 {
                return false;
            }
        }
        true
    }

    /// Reduced row echelon form together with the pivot columns.
    ///
    /// Elimination runs fraction-free (Bareiss) on the integer matrix
    /// obtained by clearing denominators per row; the final normalization to
    /// unit pivots is a single exact division per row.
    fn rref(&self) -> (QMatrix, Vec<usize>) {
        // Clear denominators row by row: kernel and row space are unchanged.
        let mut m: Vec<Vec<BigInt>> = (0..self.rows)
            .map(|r| {
                let lcm = (0..self.cols).fold(BigInt::one(), |acc, c| {
                    num::integer::lcm(acc, self.get(r, c).denom().clone())
                });
                (0..self.cols)
                    .map(|c| {
                        let e = self.get(r, c);
                        e.numer() * (&lcm / e.denom())
                    })
                    .collect()
            })
            .collect();

        // Forward phase, fraction-free: every row below the pivot is scaled
        // and reduced, and the previous pivot divides exactly.
        let mut pivots = Vec::new();
        let mut prev = BigInt::one();
        let mut row = 0;
        for col in 0..self.cols {
            let Some(pr) = (row..self.rows).find(|&r| !m[r][col].is_zero()) else {
                continue;
            };
            m.swap(row, pr);
            let pivot = m[row][col].clone();
            for r in (row + 1)..self.rows {
                let factor = m[r][col].clone();
                for c in 0..self.cols {
                    let v = &m[r][c] * &pivot - &factor * &m[row][c];
                    m[r][c] = &v / &prev;
                }
            }
            prev = pivot;
            pivots.push(col);
            row += 1;
            if row == self.rows {
                break;
            }
        }

        // Backward phase in exact rationals: unit pivots, zeros above.
        let mut out = QMatrix::zeros(self.rows, self.cols);
        for (r, &pc) in pivots.iter().enumerate() {
            let p = Rat::from(m[r][pc].clone());
            for c in 0..self.cols {
                out.set(r, c, Rat::from(m[r][c].clone()) / p.clone());
            }
        }
        for (r, &pc) in pivots.iter().enumerate().rev() {
            for upper in 0..r {
                let factor = out.get(upper, pc).clone();
                if factor.is_zero() {
                    continue;
                }
                for c in 0..self.cols {
                    let v = out.get(upper, c) - &factor * out.get(r, c);
                    out.set(upper, c, v);
                }
            }
        }
        (out, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `ker(self)`, free-variable convention: each free column
    /// contributes one vector with a `1` in that slot.
    pub fn kernel(&self) -> Vec<QVec> {
        let (r, pivots) = self.rref();
        let is_pivot: Vec<Option<usize>> = {
            let mut v = vec![None; self.cols];
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = Some(i);
            }
            v
        };
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if is_pivot[free].is_some() {
                continue;
            }
            let mut vec = vec![Rat::zero(); self.cols];
            vec[free] = Rat::one();
            for (i, &pc) in pivots.iter().enumerate() {
                vec[pc] = -r.get(i, free).clone();
            }
            basis.push(QVec(vec));
        }
        basis
    }

    /// Basis of the column space: the pivot columns of the original matrix.
    pub fn image(&self) -> Vec<QVec> {
        let (_, pivots) = self.rref();
        pivots.iter().map(|&c| self.col(c)).collect()
    }

    /// Solve `self * x = b`; `Err(NoSolution)` when `b` is outside the image.
    pub fn solve(&self, b: &QVec) -> Result<QVec, QlinError> {
        if b.dim() != self.rows {
            return Err(QlinError::DimMismatch(format!(
                "solve: {} rows vs b of length {}",
                self.rows,
                b.dim()
            )));
        }
        let mut aug = QMatrix::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, self.cols, b.0[r].clone());
        }
        let (r, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return Err(QlinError::NoSolution);
        }
        let mut x = vec![Rat::zero(); self.cols];
        for (i, &pc) in pivots.iter().enumerate() {
            x[pc] = r.get(i, self.cols).clone();
        }
        Ok(QVec(x))
    }

    /// Inverse of a square matrix, `None` when singular.
    pub fn inverse(&self) -> Option<QMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut aug = QMatrix::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, n + r, Rat::one());
        }
        let (rr, pivots) = aug.rref();
        if pivots.len() != n || pivots.iter().enumerate().any(|(i, &c)| i != c) {
            return None;
        }
        let mut inv = QMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                inv.set(r, c, rr.get(r, n + c).clone());
            }
        }
        Some(inv)
    }

    /// Dimension of the span of `vecs` inside `Q^n`.
    pub fn span_dim(vecs: &[QVec], n: usize) -> usize {
        if vecs.is_empty() {
            return 0;
        }
        QMatrix::from_rows(vecs.iter().map(|v| {
            assert_eq!(v.dim(), n);
            v.0.clone()
        }).collect())
        .rank()
    }
}
