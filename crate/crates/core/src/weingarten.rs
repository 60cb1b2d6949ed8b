//! Exact unitary Weingarten calculus in rational arithmetic.
//!
//! `E[u_{i1 j1} .. u_{ik jk} conj(u_{i'1 j'1}) .. conj(u_{i'k j'k})]` equals
//! `sum_{s, t in S_k} [i_l = i'_{s(l)}] [j_l = j'_{t(l)}] Wg(t s^-1)`. All
//! index tuples in this module are 0-based.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Largest supported moment order.
pub const MAX_ORDER: usize = 6;

/// Default cap on the number of index assignments in brute-force sums.
pub const DEFAULT_TERM_BUDGET: u128 = 10_000_000;

/// Exact complex rational.
pub type QComplex = Complex<BigRational>;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn q_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

fn qc_zero() -> QComplex {
    Complex::new(BigRational::zero(), BigRational::zero())
}

pub fn qc_to_complex64(z: &QComplex) -> Complex64 {
    Complex64::new(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN))
}

/// Element of `S_k` in one-line notation on `{0, .., k-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &x in &images {
            if x >= images.len() || seen[x] {
                return Err(Error::DimensionMismatch(format!("{images:?} is not a permutation")));
            }
            seen[x] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(k: usize) -> Self {
        Self { images: (0..k).collect() }
    }

    /// Permutation with the given cycles; unlisted points are fixed.
    pub fn from_cycles(k: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..k).collect();
        for c in cycles {
            for (pos, &x) in c.iter().enumerate() {
                if x >= k {
                    return Err(Error::DimensionMismatch(format!("point {x} outside S_{k}")));
                }
                images[x] = c[(pos + 1) % c.len()];
            }
        }
        Self::new(images)
    }

    /// Canonical representative of a cycle type: consecutive blocks.
    pub fn class_representative(cycle_type: &[usize]) -> Self {
        let k = cycle_type.iter().sum();
        let mut start = 0;
        let mut cycles = Vec::new();
        for &len in cycle_type {
            cycles.push((start..start + len).collect());
            start += len;
        }
        Self::from_cycles(k, &cycles).expect("blocks partition 0..k")
    }

    pub fn k(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    /// `(self * other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.k(), other.k());
        Self {
            images: other.images.iter().map(|&x| self.images[x]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.k()];
        for (x, &y) in self.images.iter().enumerate() {
            inv[y] = x;
        }
        Self { images: inv }
    }

    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.k()];
        let mut out = Vec::new();
        for start in 0..self.k() {
            if seen[start] {
                continue;
            }
            let mut c = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                c.push(x);
                x = self.images[x];
            }
            out.push(c);
        }
        out
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles().len()
    }

    /// Cycle lengths in decreasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    /// Minimal number of transpositions, `k - #cycles`.
    pub fn length(&self) -> usize {
        self.k() - self.num_cycles()
    }

    /// All of `S_k` in lexicographic order.
    pub fn all(k: usize) -> Vec<Self> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if prefix.len() == used.len() {
                out.push(Permutation { images: prefix.clone() });
                return;
            }
            for x in 0..used.len() {
                if !used[x] {
                    used[x] = true;
                    prefix.push(x);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[x] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
        out
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation without fixed points, `id` for the identity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles: Vec<Vec<usize>> = self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if cycles.is_empty() {
            return write!(f, "id");
        }
        for c in cycles {
            let body: Vec<String> = c.iter().map(usize::to_string).collect();
            let sep = if self.k() > 10 { "," } else { "" };
            write!(f, "({})", body.join(sep))?;
        }
        Ok(())
    }
}

/// Partitions of `k` in decreasing order, each with decreasing parts.
pub fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(prefix.clone());
            return;
        }
        for part in (1..=rest.min(max)).rev() {
            prefix.push(part);
            rec(rest - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

fn catalan(n: usize) -> i64 {
    let mut c: i64 = 1;
    for i in 0..n as i64 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// `prod over cycles C of (-1)^{|C|-1} Cat_{|C|-1}`.
pub fn moebius(sigma: &Permutation) -> i64 {
    sigma
        .cycles()
        .iter()
        .map(|c| {
            let m = c.len() - 1;
            if m % 2 == 0 {
                catalan(m)
            } else {
                -catalan(m)
            }
        })
        .product()
}

/// Exact Weingarten values of `S_k` at dimension `N`, indexed by cycle type.
#[derive(Clone, Debug)]
pub struct WgTable {
    k: usize,
    dim: usize,
    values: BTreeMap<Vec<usize>, BigRational>,
}

impl WgTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn by_cycle_type(&self, cycle_type: &[usize]) -> &BigRational {
        &self.values[cycle_type]
    }

    pub fn wg(&self, sigma: &Permutation) -> &BigRational {
        assert_eq!(sigma.k(), self.k);
        self.by_cycle_type(&sigma.cycle_type())
    }

    /// `(representative, value)` pairs, identity class first.
    pub fn entries(&self) -> Vec<(Permutation, BigRational)> {
        partitions(self.k)
            .into_iter()
            .rev()
            .map(|t| {
                let v = self.values[&t].clone();
                (Permutation::class_representative(&t), v)
            })
            .collect()
    }
}

impl fmt::Display for WgTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries().iter().map(|(p, v)| format!("{p}: {v}")).collect();
        write!(f, "{}", parts.join(", "))
    }
}

/// Solves the Gram system `sum_t N^{#cycles(s t^-1)} Wg(t) = [s = id]`.
///
/// `Wg` is a class function, so one equation per conjugacy class suffices;
/// each coefficient sums the Gram entries over a whole class.
pub fn wg_table(k: usize, dim: usize) -> Result<WgTable> {
    if k > MAX_ORDER {
        return Err(Error::OrderTooLarge { k });
    }
    if k == 0 || dim == 0 {
        return Err(Error::InvalidPlan("Weingarten order and dimension must be positive".into()));
    }
    let classes = partitions(k);
    let index: BTreeMap<&Vec<usize>, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let p = classes.len();
    let perms = Permutation::all(k);
    let n_pow: Vec<BigRational> = (0..=k).map(|e| q(dim as i64).pow(e as i32)).collect();

    let mut rows = vec![vec![BigRational::zero(); p + 1]; p];
    for (r, class) in classes.iter().enumerate() {
        let sigma = Permutation::class_representative(class);
        for tau in &perms {
            let c = sigma.compose(&tau.inverse()).num_cycles();
            let col = index[&tau.cycle_type()];
            rows[r][col] += &n_pow[c];
        }
        if class.iter().all(|&x| x == 1) {
            rows[r][p] = BigRational::one();
        }
    }
    let solution = solve_rational(rows).ok_or(Error::GramSingular { k, dim })?;
    Ok(WgTable {
        k,
        dim,
        values: classes.into_iter().zip(solution).collect(),
    })
}

/// Gaussian elimination on an augmented system; `None` if singular.
fn solve_rational(mut m: Vec<Vec<BigRational>>) -> Option<Vec<BigRational>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let inv = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= &factor * y;
            }
        }
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

fn same_multiset(x: &[usize], y: &[usize]) -> bool {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Permutations `s` with `x[l] = y[s(l)]` for all `l`.
fn matchings(x: &[usize], y: &[usize]) -> Vec<Permutation> {
    fn rec(x: &[usize], y: &[usize], used: &mut [bool], prefix: &mut Vec<usize>, out: &mut Vec<Permutation>) {
        let l = prefix.len();
        if l == x.len() {
            out.push(Permutation { images: prefix.clone() });
            return;
        }
        for m in 0..y.len() {
            if !used[m] && y[m] == x[l] {
                used[m] = true;
                prefix.push(m);
                rec(x, y, used, prefix, out);
                prefix.pop();
                used[m] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(x, y, &mut vec![false; y.len()], &mut Vec::new(), &mut out);
    out
}

/// `E[prod_l u_{i_l j_l} prod_l conj(u_{i'_l j'_l})]` for a Haar unitary of
/// the table's dimension.
pub fn mixed_moment(i: &[usize], j: &[usize], ip: &[usize], jp: &[usize], table: &WgTable) -> Result<BigRational> {
    let k = i.len();
    if j.len() != k || ip.len() != jp.len() {
        return Err(Error::DimensionMismatch("row and column index tuples differ in length".into()));
    }
    if ip.len() != k || !same_multiset(i, ip) || !same_multiset(j, jp) {
        return Ok(BigRational::zero());
    }
    if k == 0 {
        return Ok(BigRational::one());
    }
    if k != table.k {
        return Err(Error::DimensionMismatch(format!("order {k} moment with an order {} table", table.k)));
    }
    if i.iter().chain(j).any(|&x| x >= table.dim) {
        return Err(Error::DimensionMismatch(format!("index outside 0..{}", table.dim)));
    }
    let sigmas = matchings(i, ip);
    let taus = matchings(j, jp);
    let mut acc = BigRational::zero();
    for s in &sigmas {
        let s_inv = s.inverse();
        for t in &taus {
            acc += table.wg(&t.compose(&s_inv));
        }
    }
    Ok(acc)
}

/// Dense square matrix of exact complex rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMatrix {
    dim: usize,
    data: Vec<QComplex>,
}

impl ExactMatrix {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> QComplex) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| Complex::new(q((r == c) as i64), BigRational::zero()))
    }

    /// From integer `(re, im)` entries in row-major order.
    pub fn from_gaussian_integers(rows: &[Vec<(i64, i64)>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("exact matrix must be square".into()));
        }
        Ok(Self::from_fn(n, |r, c| Complex::new(q(rows[r][c].0), q(rows[r][c].1))))
    }

    /// Exact binary expansion of every entry.
    pub fn from_complex(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("exact matrix must be square".into()));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("exact conversion"));
        }
        Ok(Self::from_fn(m.rows(), |r, c| Complex::new(q_from_f64(m[(r, c)].re), q_from_f64(m[(r, c)].im))))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &QComplex {
        &self.data[r * self.dim + c]
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |r, c| {
            let mut acc = qc_zero();
            for k in 0..self.dim {
                acc = acc + self.get(r, k).clone() * other.get(k, c).clone();
            }
            acc
        })
    }

    pub fn trace(&self) -> QComplex {
        (0..self.dim).fold(qc_zero(), |acc, i| acc + self.get(i, i).clone())
    }
}

/// `E Tr(A V B V^*) Tr(C V D V^*)` for Haar `V`, in closed form.
pub fn exact_two_trace(a: &ExactMatrix, b: &ExactMatrix, c: &ExactMatrix, d: &ExactMatrix) -> Result<QComplex> {
    let n = a.dim;
    if [b.dim, c.dim, d.dim].iter().any(|&x| x != n) {
        return Err(Error::DimensionMismatch("two-trace formula needs equal sizes".into()));
    }
    if n < 2 {
        return Err(Error::GramSingular { k: 2, dim: n });
    }
    let nn = n as i64;
    let c1 = Complex::new(BigRational::new(BigInt::from(1), BigInt::from(nn * nn - 1)), BigRational::zero());
    let c2 = Complex::new(BigRational::new(BigInt::from(-1), BigInt::from(nn * (nn * nn - 1))), BigRational::zero());
    let (ta, tb, tc, td) = (a.trace(), b.trace(), c.trace(), d.trace());
    let tac = a.mul(c).trace();
    let tbd = b.mul(d).trace();
    let first = ta.clone() * tc.clone() * tb.clone() * td.clone() + tac.clone() * tbd.clone();
    let second = ta * tc * tbd + tac * tb * td;
    Ok(c1 * first + c2 * second)
}

/// Same expectation by expanding every index and applying [`mixed_moment`].
pub fn two_trace_brute_force(a: &ExactMatrix, b: &ExactMatrix, c: &ExactMatrix, d: &ExactMatrix) -> Result<QComplex> {
    let n = a.dim;
    if [b.dim, c.dim, d.dim].iter().any(|&x| x != n) {
        return Err(Error::DimensionMismatch("two-trace expansion needs equal sizes".into()));
    }
    let table = wg_table(2, n)?;
    let mut acc = qc_zero();
    let zero = qc_zero();
    // A_{i1 i2} V_{i2 i3} B_{i3 i4} conj(V_{i1 i4}) C_{k1 k2} V_{k2 k3} D_{k3 k4} conj(V_{k1 k4})
    for i1 in 0..n {
        for i2 in 0..n {
            let wa = a.get(i1, i2);
            if *wa == zero {
                continue;
            }
            for i3 in 0..n {
                for i4 in 0..n {
                    let wb = b.get(i3, i4);
                    if *wb == zero {
                        continue;
                    }
                    for k1 in 0..n {
                        for k2 in 0..n {
                            let wc = c.get(k1, k2);
                            if *wc == zero {
                                continue;
                            }
                            for k3 in 0..n {
                                for k4 in 0..n {
                                    let wd = d.get(k3, k4);
                                    if *wd == zero {
                                        continue;
                                    }
                                    let m = mixed_moment(&[i2, k2], &[i3, k3], &[i1, k1], &[i4, k4], &table)?;
                                    if m.is_zero() {
                                        continue;
                                    }
                                    let w = wa.clone() * wb.clone() * wc.clone() * wd.clone();
                                    acc = acc + w * Complex::new(m, BigRational::zero());
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// One factor `Tr(A^power M)` of a trace word, optionally conjugated.
#[derive(Clone, Debug)]
pub struct TraceFactor {
    pub power: i32,
    /// `None` stands for the identity.
    pub weight: Option<ExactMatrix>,
    pub conjugated: bool,
}

impl TraceFactor {
    pub fn power(power: i32) -> Self {
        Self {
            power,
            weight: None,
            conjugated: false,
        }
    }

    pub fn conj_power(power: i32) -> Self {
        Self {
            power,
            weight: None,
            conjugated: true,
        }
    }
}

/// A Haar entry `u_{row col}` (or its conjugate) with an `s_var^exp` factor.
struct Slot {
    conj: bool,
    row: usize,
    col: usize,
    s_var: usize,
    s_exp: i32,
}

/// Exact `E prod_f Tr(A^{n_f} M_f)` (conjugated where flagged) for
/// `A = U diag(s)` with Haar `U`, by summing over every index assignment.
pub fn exact_trace_moment(word: &[TraceFactor], s: &[f64]) -> Result<QComplex> {
    exact_trace_moment_with_budget(word, s, DEFAULT_TERM_BUDGET)
}

pub fn exact_trace_moment_with_budget(word: &[TraceFactor], s: &[f64], budget: u128) -> Result<QComplex> {
    let n = s.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty singular value list".into()));
    }
    if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidProfile("singular values must be finite and >= 0".into()));
    }
    let mut slots = Vec::new();
    // (var a, var b, matrix, conj): weight entry M_{x_a x_b}
    let mut weights: Vec<(usize, usize, &ExactMatrix, bool)> = Vec::new();
    let mut vars = 0usize;
    for f in word {
        if f.power == 0 {
            return Err(Error::InvalidPlan("A^0 factors are not random".into()));
        }
        if let Some(m) = &f.weight {
            if m.dim != n {
                return Err(Error::DimensionMismatch("trace weight size differs from N".into()));
            }
        }
        let len = f.power.unsigned_abs() as usize;
        let first = vars;
        let chain: Vec<usize> = (first..first + len).collect();
        vars += len;
        let closing = if f.weight.is_some() {
            vars += 1;
            first + len
        } else {
            first
        };
        for step in 0..len {
            let p = chain[step];
            let qv = if step + 1 < len { chain[step + 1] } else { closing };
            // A_{pq} = u_{pq} s_q ; (A^-1)_{pq} = s_p^-1 conj(u_{qp})
            let slot = if f.power > 0 {
                Slot { conj: f.conjugated, row: p, col: qv, s_var: qv, s_exp: 1 }
            } else {
                Slot { conj: !f.conjugated, row: qv, col: p, s_var: p, s_exp: -1 }
            };
            slots.push(slot);
        }
        if let Some(m) = &f.weight {
            weights.push((closing, first, m, f.conjugated));
        }
    }
    let k_u = slots.iter().filter(|x| !x.conj).count();
    let k_c = slots.len() - k_u;
    if k_u != k_c {
        return Ok(qc_zero());
    }
    if k_u > MAX_ORDER {
        return Err(Error::OrderTooLarge { k: k_u });
    }
    if s.iter().any(|&x| x == 0.0) && slots.iter().any(|x| x.s_exp < 0) {
        return Err(Error::SingularMatrix { pivot: 0.0, threshold: 0.0 });
    }
    let terms = (n as u128).checked_pow(vars as u32).unwrap_or(u128::MAX);
    if terms > budget {
        return Err(Error::ComplexityBudgetExceeded { terms, budget });
    }
    if k_u == 0 {
        return Ok(Complex::new(BigRational::one(), BigRational::zero()));
    }
    let table = wg_table(k_u, n)?;
    let s_q: Vec<BigRational> = s.iter().map(|&x| q_from_f64(x)).collect();
    let s_inv: Vec<BigRational> = s_q.iter().map(|x| if x.is_zero() { x.clone() } else { x.recip() }).collect();

    let mut x = vec![0usize; vars];
    let mut acc = qc_zero();
    let (mut i, mut j, mut ip, mut jp) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    loop {
        i.clear();
        j.clear();
        ip.clear();
        jp.clear();
        for sl in &slots {
            if sl.conj {
                ip.push(x[sl.row]);
                jp.push(x[sl.col]);
            } else {
                i.push(x[sl.row]);
                j.push(x[sl.col]);
            }
        }
        let m = mixed_moment(&i, &j, &ip, &jp, &table)?;
        if !m.is_zero() {
            let mut w = m;
            for sl in &slots {
                let v = x[sl.s_var];
                w *= if sl.s_exp > 0 { &s_q[v] } else { &s_inv[v] };
            }
            let mut term = Complex::new(w, BigRational::zero());
            for &(ra, cb, mat, conj) in &weights {
                let e = mat.get(x[ra], x[cb]);
                term = term * if conj { e.conj() } else { e.clone() };
            }
            acc = acc + term;
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == vars {
                return Ok(acc);
            }
            x[pos] += 1;
            if x[pos] < n {
                break;
            }
            x[pos] = 0;
            pos += 1;
        }
    }
}
