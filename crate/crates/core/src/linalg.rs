//! Dense complex linear algebra.
//!
//! [`ComplexMatrix`] is a row-major `N x M` array of `Complex64`. The cubic
//! kernels (products, LU, QR, Hessenberg/QR eigenvalues) run on `faer` with
//! sequential parallelism, so results never depend on the thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};

use faer::linalg::matmul::matmul as faer_matmul;
use faer::linalg::triangular_solve;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(n, m, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    pub(crate) fn from_faer(m: MatRef<'_, Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn view(&self) -> MatRef<'_, Complex64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    pub(crate) fn view_mut(&mut self) -> MatMut<'_, Complex64> {
        MatMut::from_row_major_slice_mut(&mut self.data, self.rows, self.cols)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    /// Multiplies column `j` by `d[j]`, i.e. returns `self * diag(d)`.
    pub fn scale_columns(&self, d: &[Complex64]) -> Self {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols) {
            for (z, &s) in row.iter_mut().zip(d) {
                *z *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// `z I - self`.
    pub fn shifted_negation(&self, z: Complex64) -> Self {
        let mut m = self.scaled(Complex64::new(-1.0, 0.0));
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += z;
        }
        m
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    faer_matmul(
        out.view_mut(),
        Accum::Replace,
        a.view(),
        b.view(),
        Complex64::new(1.0, 0.0),
        Par::Seq,
    );
    Ok(out)
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    (0..a.rows.min(a.cols)).map(|i| a[(i, i)]).sum()
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64> {
    if a.cols != b.rows || a.rows != b.cols {
        return Err(Error::DimensionMismatch(format!(
            "Tr of {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.rows {
        let row = a.row(i);
        for (j, &x) in row.iter().enumerate() {
            acc += x * b[(j, i)];
        }
    }
    Ok(acc)
}

/// LU factorization with partial pivoting, `P A = L U`.
///
/// `L` (unit lower) and `U` share one row-major buffer. `perm[i]` is the row
/// of `A` that ends up in row `i` of `P A`.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    lu: ComplexMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Sign of the row permutation, `+1` or `-1`.
    pub fn permutation_sign(&self) -> f64 {
        self.sign
    }

    pub fn lower(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.n, self.n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)],
            std::cmp::Ordering::Equal => Complex64::new(1.0, 0.0),
            std::cmp::Ordering::Less => Complex64::new(0.0, 0.0),
        })
    }

    pub fn upper(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.n, self.n, |i, j| {
            if i <= j {
                self.lu[(i, j)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Applies the row permutation: returns `P m`.
    pub fn permute_rows(&self, m: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(self.perm[i], j)])
    }

    pub fn det(&self) -> Complex64 {
        let prod: Complex64 = (0..self.n).map(|i| self.lu[(i, i)]).product();
        prod * self.sign
    }

    /// `log |det A|`, summed in log space so large `N` does not overflow.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.n).map(|i| self.lu[(i, i)].norm().ln()).sum()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for a {}x{} system",
                b.len(),
                self.n,
                self.n
            )));
        }
        let n = self.n;
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut acc = y[i];
            for k in 0..i {
                acc -= row[k] * y[k];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= row[k] * y[k];
            }
            y[i] = acc / row[i];
        }
        b.copy_from_slice(&y);
        Ok(())
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Solves `A X = B` for a matrix right-hand side.
    pub fn solve_matrix(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.rows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side with {} rows for a {}x{} system",
                b.rows(),
                self.n,
                self.n
            )));
        }
        let mut rhs = Mat::<Complex64>::from_fn(self.n, b.cols(), |i, j| b[(self.perm[i], j)]);
        let lu = self.lu.view();
        triangular_solve::solve_unit_lower_triangular_in_place(lu, rhs.as_mut(), Par::Seq);
        triangular_solve::solve_upper_triangular_in_place(lu, rhs.as_mut(), Par::Seq);
        Ok(ComplexMatrix::from_faer(rhs.as_ref()))
    }

    pub fn invert(&self) -> ComplexMatrix {
        self.solve_matrix(&ComplexMatrix::identity(self.n))
            .expect("identity has matching dimension")
    }
}

pub fn lu_factor(a: &ComplexMatrix) -> Result<LuFactors> {
    a.require_square("LU factorization")?;
    if !a.is_finite() {
        return Err(Error::NonFinite("LU input"));
    }
    let n = a.rows;
    let threshold = SINGULAR_PIVOT_RTOL * frobenius_norm(a);
    let plu = a.view().partial_piv_lu();
    let (fwd, _) = plu.P().arrays();
    let perm = fwd.to_vec();
    let l = plu.L();
    let u = plu.U();
    let lu = ComplexMatrix::from_fn(n, n, |i, j| if i > j { l[(i, j)] } else { u[(i, j)] });

    let min_pivot = (0..n).map(|i| lu[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(min_pivot >= threshold) || min_pivot == 0.0 {
        return Err(Error::SingularMatrix {
            pivot: min_pivot,
            threshold,
        });
    }
    Ok(LuFactors {
        n,
        lu,
        sign: permutation_sign(&perm),
        perm,
    })
}

pub fn lu_det(f: &LuFactors) -> Complex64 {
    f.det()
}

pub fn lu_invert(f: &LuFactors) -> ComplexMatrix {
    f.invert()
}

/// Determinant via LU; a singular matrix has determinant zero.
pub fn det(a: &ComplexMatrix) -> Result<Complex64> {
    match lu_factor(a) {
        Ok(f) => Ok(f.det()),
        Err(Error::SingularMatrix { .. }) => Ok(Complex64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}

fn permutation_sign(perm: &[usize]) -> f64 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1.0;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = perm[k];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Householder QR, `A = Q R` with `Q` unitary and `R` upper triangular.
pub fn qr_factor(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    a.require_square("QR factorization")?;
    if !a.is_finite() {
        return Err(Error::NonFinite("QR input"));
    }
    let qr = a.view().qr();
    let q = ComplexMatrix::from_faer(qr.compute_Q().as_ref());
    let r = ComplexMatrix::from_faer(qr.R());
    Ok((q, r))
}

/// All eigenvalues of a square matrix (Hessenberg reduction followed by
/// shifted QR iterations), in no particular order.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    a.require_square("eigenvalues")?;
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    a.view()
        .eigenvalues()
        .map_err(|_| Error::NoConvergence { dim: a.rows })
}

/// Lazily built powers `A^n` for positive and negative `n`.
///
/// Negative powers come from one LU factorization of `A`; every power is
/// computed at most once.
pub struct PowerLadder<'a> {
    base: &'a ComplexMatrix,
    positive: Vec<ComplexMatrix>,
    lu: Option<LuFactors>,
    negative: Vec<ComplexMatrix>,
}

impl<'a> PowerLadder<'a> {
    pub fn new(base: &'a ComplexMatrix) -> Result<Self> {
        base.require_square("matrix powers")?;
        Ok(Self {
            base,
            positive: Vec::new(),
            lu: None,
            negative: Vec::new(),
        })
    }

    pub fn base(&self) -> &ComplexMatrix {
        self.base
    }

    pub fn lu(&mut self) -> Result<&LuFactors> {
        if self.lu.is_none() {
            self.lu = Some(lu_factor(self.base)?);
        }
        Ok(self.lu.as_ref().expect("just set"))
    }

    /// `A^n` for `n != 0`.
    pub fn power(&mut self, n: i32) -> Result<&ComplexMatrix> {
        assert!(n != 0, "A^0 is not tracked by the ladder");
        let k = n.unsigned_abs() as usize;
        if n > 0 {
            while self.positive.len() < k {
                let next = match self.positive.last() {
                    None => self.base.clone(),
                    Some(p) => matmul(p, self.base)?,
                };
                self.positive.push(next);
            }
            Ok(&self.positive[k - 1])
        } else {
            if self.negative.is_empty() {
                let inv = self.lu()?.invert();
                self.negative.push(inv);
            }
            while self.negative.len() < k {
                let next = matmul(self.negative.last().expect("nonempty"), &self.negative[0])?;
                self.negative.push(next);
            }
            Ok(&self.negative[k - 1])
        }
    }

    /// `Tr A^n`, using `Tr A^{p+q} = Tr(A^p A^q)` so only half the ladder is built.
    pub fn trace_power(&mut self, n: i32) -> Result<Complex64> {
        assert!(n != 0, "Tr A^0 is not tracked by the ladder");
        let k = n.unsigned_abs() as i32;
        let hi = (k + 1) / 2;
        let lo = k / 2;
        let sign = n.signum();
        if lo == 0 {
            return Ok(trace(self.power(sign * hi)?));
        }
        self.power(sign * hi)?;
        let a = self.power(sign * lo)?.clone();
        let b = self.power(sign * hi)?;
        trace_of_product(b, &a)
    }

    /// `Tr(A^n M)`.
    pub fn trace_power_times(&mut self, n: i32, m: &ComplexMatrix) -> Result<Complex64> {
        let p = self.power(n)?;
        trace_of_product(p, m)
    }
}

/// `Tr A^n` for `-n_minus <= n <= n_plus`, `n != 0`.
pub fn power_traces(a: &ComplexMatrix, n_plus: u32, n_minus: u32) -> Result<BTreeMap<i32, Complex64>> {
    let mut ladder = PowerLadder::new(a)?;
    let mut out = BTreeMap::new();
    for n in 1..=n_plus as i32 {
        out.insert(n, ladder.trace_power(n)?);
    }
    for n in 1..=n_minus as i32 {
        out.insert(-n, ladder.trace_power(-n)?);
    }
    Ok(out)
}
