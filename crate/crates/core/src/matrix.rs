//! Dense rational and integer matrices, and Smith normal form.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ZMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl ZMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        ZMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(ZMatrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().map(|&x| BigInt::from(x)).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, other: &ZMatrix) -> ZMatrix {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = ZMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * &v[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> ZMatrix {
        let mut out = ZMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn to_q(&self) -> QMatrix {
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| BigRational::from_integer(x.clone())).collect(),
        }
    }

    pub fn determinant(&self) -> BigInt {
        self.to_q().determinant().to_integer()
    }

    /// gcd of all entries (0 for the zero matrix).
    pub fn content(&self) -> BigInt {
        self.data.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.data
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += q * row[src]
    fn add_row(&mut self, dst: usize, src: usize, q: &BigInt) {
        for j in 0..self.cols {
            let t = self.get(src, j) * q;
            self.data[dst * self.cols + j] += t;
        }
    }

    /// col[dst] += q * col[src]
    fn add_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        for i in 0..self.rows {
            let t = self.get(i, src) * q;
            self.data[i * self.cols + dst] += t;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let x = &mut self.data[i * self.cols + j];
            *x = -std::mem::take(x);
        }
    }

    fn negate_col(&mut self, j: usize) {
        for i in 0..self.rows {
            let x = &mut self.data[i * self.cols + j];
            *x = -std::mem::take(x);
        }
    }
}

impl fmt::Debug for ZMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_string()).collect())
            .collect();
        write!(f, "{rows:?}")
    }
}

/// `U · m · W = diag(d)` with `U`, `W` unimodular and `d_1 | d_2 | …`.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: ZMatrix,
    pub u_inv: ZMatrix,
    pub w: ZMatrix,
    pub diagonal: Vec<BigInt>,
}

impl Smith {
    pub fn d_matrix(&self) -> ZMatrix {
        let n = self.diagonal.len();
        let mut d = ZMatrix::zero(n, n);
        for (i, x) in self.diagonal.iter().enumerate() {
            d.set(i, i, x.clone());
        }
        d
    }

    /// Order of Z^n / m Z^n.
    pub fn cokernel_order(&self) -> BigInt {
        self.diagonal.iter().product()
    }

    /// Representatives of Z^n / m Z^n, each as an integer vector.
    pub fn cokernel_representatives(&self) -> Vec<Vec<BigInt>> {
        let ds: Vec<BigInt> = self.diagonal.clone();
        self.box_images(&ds.iter().map(|_| BigInt::one()).collect::<Vec<_>>(), &ds)
    }

    /// Representatives of m Z^n / e Z^n where `e` is a multiple of the
    /// largest invariant factor.
    pub fn image_mod(&self, e: &BigInt) -> Vec<Vec<BigInt>> {
        let steps = self.diagonal.clone();
        let bounds: Vec<BigInt> = self.diagonal.iter().map(|d| e / d).collect();
        self.box_images(&steps, &bounds)
    }

    /// `U^{-1}·(s_i·step_i)` for `0 <= s_i < bound_i`.
    fn box_images(&self, steps: &[BigInt], bounds: &[BigInt]) -> Vec<Vec<BigInt>> {
        let n = steps.len();
        let mut out = Vec::new();
        let mut s = vec![BigInt::zero(); n];
        loop {
            let v: Vec<BigInt> = (0..n).map(|i| &s[i] * &steps[i]).collect();
            out.push(self.u_inv.apply(&v));
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                s[i] += 1;
                if s[i] < bounds[i] {
                    break;
                }
                s[i] = BigInt::zero();
                i += 1;
            }
        }
    }
}

pub fn smith_normal_form(m: &ZMatrix) -> Result<Smith> {
    if m.rows != m.cols {
        return Err(Error::Dimension("Smith form needs a square matrix".into()));
    }
    if m.determinant().is_zero() {
        return Err(Error::Singular);
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut u = ZMatrix::identity(n);
    let mut u_inv = ZMatrix::identity(n);
    let mut w = ZMatrix::identity(n);
    for t in 0..n {
        loop {
            // smallest nonzero entry of the trailing block moves to (t, t)
            let mut best: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    let x = a.get(i, j);
                    if !x.is_zero()
                        && best.map_or(true, |(bi, bj)| x.abs() < a.get(bi, bj).abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let (bi, bj) = best.expect("nonsingular matrix has a nonzero block");
            if bi != t {
                a.swap_rows(bi, t);
                u.swap_rows(bi, t);
                u_inv.swap_cols(bi, t);
            }
            if bj != t {
                a.swap_cols(bj, t);
                w.swap_cols(bj, t);
            }
            let piv = a.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..n {
                let q = a.get(i, t).div_floor(&piv);
                if !q.is_zero() {
                    let nq = -&q;
                    a.add_row(i, t, &nq);
                    u.add_row(i, t, &nq);
                    u_inv.add_col(t, i, &q);
                }
                if !a.get(i, t).is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..n {
                let q = a.get(t, j).div_floor(&piv);
                if !q.is_zero() {
                    let nq = -&q;
                    a.add_col(j, t, &nq);
                    w.add_col(j, t, &nq);
                }
                if !a.get(t, j).is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..n)
                .flat_map(|i| (t + 1..n).map(move |j| (i, j)))
                .find(|&(i, j)| !(a.get(i, j) % &piv).is_zero());
            match bad {
                Some((i, _)) => {
                    let one = BigInt::one();
                    a.add_row(t, i, &one);
                    u.add_row(t, i, &one);
                    u_inv.add_col(i, t, &(-one));
                }
                None => break,
            }
        }
        if a.get(t, t).is_negative() {
            a.negate_row(t);
            u.negate_row(t);
            u_inv.negate_col(t);
        }
    }
    Ok(Smith {
        diagonal: (0..n).map(|i| a.get(i, i).clone()).collect(),
        u,
        u_inv,
        w,
    })
}

impl QMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        QMatrix { rows, cols, data: vec![BigRational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigRational::one();
        }
        m
    }

    pub fn scalar(n: usize, q: &BigRational) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.data[i * n + i] = q.clone();
        }
        m
    }

    pub fn diagonal(d: &[BigRational]) -> Self {
        let n = d.len();
        let mut m = Self::zero(n, n);
        for (i, x) in d.iter().enumerate() {
            m.data[i * n + i] = x.clone();
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, data: Vec<BigRational>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension("entry count does not match shape".into()));
        }
        Ok(QMatrix { rows, cols, data })
    }

    pub fn from_int_rows(rows: &[Vec<i64>]) -> Result<Self> {
        Ok(ZMatrix::from_rows(rows)?.to_q())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigRational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.data
    }

    pub fn mul(&self, other: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = QMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn scale(&self, q: &BigRational) -> QMatrix {
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * q).collect(),
        }
    }

    pub fn transpose(&self) -> QMatrix {
        let mut out = QMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn apply(&self, v: &[BigRational]) -> Vec<BigRational> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(BigRational::zero(), |acc, j| acc + self.get(i, j) * &v[j])
            })
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.data.iter().all(|x| x.is_integer())
    }

    pub fn to_z(&self) -> Option<ZMatrix> {
        if !self.is_integral() {
            return None;
        }
        Some(ZMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_integer()).collect(),
        })
    }

    /// lcm of all entry denominators.
    pub fn denominator(&self) -> BigInt {
        self.data.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()))
    }

    pub fn determinant(&self) -> BigRational {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = BigRational::one();
        for c in 0..n {
            let Some(pr) = (c..n).find(|&r| !a[r * n + c].is_zero()) else {
                return BigRational::zero();
            };
            if pr != c {
                for j in 0..n {
                    a.swap(pr * n + j, c * n + j);
                }
                det = -det;
            }
            let piv = a[c * n + c].clone();
            det *= &piv;
            for r in c + 1..n {
                if a[r * n + c].is_zero() {
                    continue;
                }
                let f = &a[r * n + c] / &piv;
                for j in c..n {
                    let t = &f * &a[c * n + j];
                    a[r * n + j] -= t;
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Result<QMatrix> {
        if self.rows != self.cols {
            return Err(Error::Dimension("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut inv = QMatrix::identity(n).data;
        for c in 0..n {
            let pr = (c..n).find(|&r| !a[r * n + c].is_zero()).ok_or(Error::Singular)?;
            if pr != c {
                for j in 0..n {
                    a.swap(pr * n + j, c * n + j);
                    inv.swap(pr * n + j, c * n + j);
                }
            }
            let piv = a[c * n + c].clone();
            for j in 0..n {
                a[c * n + j] /= &piv;
                inv[c * n + j] /= &piv;
            }
            for r in 0..n {
                if r == c || a[r * n + c].is_zero() {
                    continue;
                }
                let f = a[r * n + c].clone();
                for j in 0..n {
                    let t = &f * &a[c * n + j];
                    a[r * n + j] -= t;
                    let t = &f * &inv[c * n + j];
                    inv[r * n + j] -= t;
                }
            }
        }
        Ok(QMatrix { rows: n, cols: n, data: inv })
    }
}

impl fmt::Debug for QMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_string()).collect())
            .collect();
        write!(f, "{rows:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(rows: &[Vec<i64>]) -> ZMatrix {
        ZMatrix::from_rows(rows).unwrap()
    }

    fn check_smith(m: &ZMatrix) -> Smith {
        let s = smith_normal_form(m).unwrap();
        assert_eq!(s.u.mul(m).mul(&s.w), s.d_matrix());
        assert_eq!(s.u.mul(&s.u_inv), ZMatrix::identity(m.rows()));
        assert_eq!(s.u.determinant().abs(), BigInt::one());
        assert_eq!(s.w.determinant().abs(), BigInt::one());
        for w in s.diagonal.windows(2) {
            assert!((&w[1] % &w[0]).is_zero());
        }
        assert_eq!(s.cokernel_order(), m.determinant().abs());
        s
    }

    #[test]
    fn smith_examples() {
        let s = check_smith(&z(&[vec![1, 0], vec![0, 3]]));
        assert_eq!(s.diagonal, vec![BigInt::from(1), BigInt::from(3)]);
        let s = check_smith(&z(&[vec![2, 1], vec![0, 2]]));
        assert_eq!(s.diagonal, vec![BigInt::from(1), BigInt::from(4)]);
        let s = check_smith(&ZMatrix::identity(4));
        assert_eq!(s.cokernel_order(), BigInt::one());
        check_smith(&z(&[vec![6, 4, 0], vec![2, 8, 2], vec![0, 6, 10]]));
    }

    #[test]
    fn singular_is_rejected() {
        assert!(matches!(
            smith_normal_form(&z(&[vec![1, 2], vec![2, 4]])),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn cokernel_representatives_are_distinct_classes() {
        let m = z(&[vec![2, 1], vec![0, 2]]);
        let s = check_smith(&m);
        let reps = s.cokernel_representatives();
        assert_eq!(reps.len(), 4);
        // x, y equivalent iff m^{-1}(x - y) integral
        let minv = m.to_q().inverse().unwrap();
        for (i, x) in reps.iter().enumerate() {
            for y in &reps[i + 1..] {
                let d: Vec<BigRational> =
                    x.iter().zip(y).map(|(a, b)| BigRational::from_integer(a - b)).collect();
                assert!(!minv.apply(&d).iter().all(|c| c.is_integer()));
            }
        }
    }

    #[test]
    fn inverse_and_determinant() {
        let m = QMatrix::from_int_rows(&[vec![2, 1], vec![1, 1]]).unwrap();
        assert_eq!(m.mul(&m.inverse().unwrap()), QMatrix::identity(2));
        assert_eq!(m.determinant(), BigRational::one());
    }
}
