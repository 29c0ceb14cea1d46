//! Exact coefficients in Z_(p) and the small amount of elementary number
//! theory the rest of the engine leans on.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A reduced rational number. Elements of Z_(p) are the coefficients whose
/// denominator is prime to p; that condition depends on the configured prime
/// and is checked with [`Coefficient::is_p_integral`] rather than stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coefficient(BigRational);

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient(BigRational::zero())
    }

    pub fn one() -> Self {
        Coefficient(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Coefficient(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Coefficient(BigRational::from_integer(n))
    }

    pub fn from_ratio(r: BigRational) -> Self {
        Coefficient(r)
    }

    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let den = den.into();
        if den.is_zero() {
            return Err(Error::Malformed("zero denominator".into()));
        }
        Ok(Coefficient(BigRational::new(num.into(), den)))
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    /// Always positive.
    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn pow(&self, e: u32) -> Self {
        Coefficient(num_traits::pow(self.0.clone(), e as usize))
    }

    /// `b^e` for a small integer base.
    pub fn int_pow(b: u64, e: u32) -> Self {
        Coefficient::from_bigint(num_traits::pow(BigInt::from(b), e as usize))
    }

    /// `b^{-e}`; the caller guarantees `b` is a unit where it matters.
    pub fn int_pow_inv(b: u64, e: u32) -> Self {
        Coefficient(BigRational::new(
            BigInt::one(),
            num_traits::pow(BigInt::from(b), e as usize),
        ))
    }

    pub fn p_valuation(&self, p: u64) -> Result<i64> {
        if self.is_zero() {
            return Err(Error::ZeroInput);
        }
        Ok(big_valuation(self.numer(), p) as i64 - big_valuation(self.denom(), p) as i64)
    }

    pub fn is_p_integral(&self, p: u64) -> bool {
        !(self.denom() % p).is_zero()
    }

    pub fn is_p_unit(&self, p: u64) -> bool {
        !self.is_zero() && self.is_p_integral(p) && !(self.numer() % p).is_zero()
    }

    /// Division inside Z_(p): only units may be inverted.
    pub fn checked_div(&self, other: &Coefficient, p: u64) -> Result<Coefficient> {
        if !other.is_p_unit(p) {
            return Err(Error::NonUnit(p));
        }
        Ok(Coefficient(&self.0 / &other.0))
    }

    /// Plain field division; used where the divisor is known to be a unit.
    pub fn div_exact(&self, other: &Coefficient) -> Coefficient {
        assert!(!other.is_zero(), "division by zero coefficient");
        Coefficient(&self.0 / &other.0)
    }

    /// The integer representative in `[0, p^e)` of a p-integral coefficient.
    pub fn residue_mod_prime_power(&self, p: u64, e: u32) -> BigInt {
        let m = num_traits::pow(BigInt::from(p), e as usize);
        if e == 0 {
            return BigInt::zero();
        }
        let den = self.denom().mod_floor(&m);
        let inv = big_mod_inverse(&den, &m).expect("denominator must be prime to p");
        (self.numer() * inv).mod_floor(&m)
    }

    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.numer().to_i64()
        } else {
            None
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Malformed(format!("coefficient {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                Coefficient::new(n, d)
            }
            None => Ok(Coefficient::from_bigint(s.parse().map_err(|_| bad())?)),
        }
    }
}

impl serde::Serialize for Coefficient {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Coefficient {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Coefficient {
    fn from(n: i64) -> Self {
        Coefficient::from_int(n)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident) => {
        impl $tr<&Coefficient> for &Coefficient {
            type Output = Coefficient;
            fn $m(self, rhs: &Coefficient) -> Coefficient {
                Coefficient((&self.0).$m(&rhs.0))
            }
        }
        impl $tr<Coefficient> for Coefficient {
            type Output = Coefficient;
            fn $m(self, rhs: Coefficient) -> Coefficient {
                Coefficient(self.0.$m(rhs.0))
            }
        }
        impl $tr<&Coefficient> for Coefficient {
            type Output = Coefficient;
            fn $m(self, rhs: &Coefficient) -> Coefficient {
                Coefficient(self.0.$m(&rhs.0))
            }
        }
        impl $atr<&Coefficient> for Coefficient {
            fn $am(&mut self, rhs: &Coefficient) {
                self.0.$am(&rhs.0);
            }
        }
        impl $atr<Coefficient> for Coefficient {
            fn $am(&mut self, rhs: Coefficient) {
                self.0.$am(rhs.0);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);

impl Neg for Coefficient {
    type Output = Coefficient;
    fn neg(self) -> Coefficient {
        Coefficient(-self.0)
    }
}

impl Neg for &Coefficient {
    type Output = Coefficient;
    fn neg(self) -> Coefficient {
        Coefficient(-&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

pub fn coeff_arith(a: &Coefficient, b: &Coefficient, op: ArithOp) -> Coefficient {
    match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
    }
}

pub fn p_valuation(a: &Coefficient, p: u64) -> Result<i64> {
    a.p_valuation(p)
}

fn big_valuation(n: &BigInt, p: u64) -> u32 {
    if n.is_zero() {
        return 0;
    }
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

fn big_mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// Chinese remaindering of `(value, modulus)` pairs with pairwise coprime
/// moduli. Returns `(x, product)` with `0 <= x < product`.
pub fn crt_combine(parts: &[(i64, u64)]) -> Result<(u64, u64)> {
    let mut x: u128 = 0;
    let mut m: u64 = 1;
    for &(v, n) in parts {
        if n == 0 {
            return Err(Error::Malformed("zero modulus".into()));
        }
        if gcd(m, n) != 1 {
            return Err(Error::NonCoprimeModuli(m, n));
        }
        let v = v.rem_euclid(n as i64) as u64;
        // x' = x + m * ((v - x) * m^{-1} mod n)
        let minv = mod_inverse(m % n, n).unwrap_or(0);
        let diff = (v + n - (x % n as u128) as u64) % n;
        let t = (diff as u128 * minv as u128) % n as u128;
        x += m as u128 * t;
        m = m.checked_mul(n).ok_or_else(|| Error::Malformed("modulus overflow".into()))?;
        x %= m as u128;
    }
    Ok((x as u64, m))
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let e = (a as i128 % m as i128).extended_gcd(&(m as i128));
    if e.gcd == 1 {
        Some(e.x.rem_euclid(m as i128) as u64)
    } else {
        None
    }
}

pub fn mod_pow(b: u64, mut e: u64, m: u64) -> u64 {
    let m = m as u128;
    let mut r: u128 = 1 % m;
    let mut b = b as u128 % m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r as u64
}

pub fn is_prime(n: u64) -> bool {
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

/// Prime factorization by trial division, primes ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn prime_divisors(n: u64) -> Vec<u64> {
    factorize(n).into_iter().map(|(p, _)| p).collect()
}

/// Divisors ascending.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let cur = ds.clone();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            ds.extend(cur.iter().map(|d| d * pk));
        }
    }
    ds.sort_unstable();
    ds
}

/// Exponent of `l` in `n` (`n > 0`).
pub fn valuation(mut n: u64, l: u64) -> u32 {
    debug_assert!(n > 0);
    let mut v = 0;
    while n % l == 0 {
        n /= l;
        v += 1;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Coefficient {
        s.parse().unwrap()
    }

    #[test]
    fn rational_addition_and_cancellation() {
        assert_eq!(c("1/3") + c("1/3"), c("2/3"));
        assert_eq!(c("1/2") * c("2/7"), c("1/7"));
        assert!(coeff_arith(&c("5/3"), &Coefficient::zero(), ArithOp::Mul).is_zero());
    }

    #[test]
    fn valuations() {
        assert_eq!(c("25/3").p_valuation(5).unwrap(), 2);
        assert_eq!(c("1").p_valuation(7).unwrap(), 0);
        assert_eq!(c("7/2").p_valuation(5).unwrap(), 0);
        assert_eq!(Coefficient::zero().p_valuation(5), Err(Error::ZeroInput));
    }

    #[test]
    fn units_and_division() {
        assert!(c("3/7").is_p_unit(5));
        assert!(!c("10/7").is_p_unit(5));
        assert_eq!(c("1").checked_div(&c("5"), 5), Err(Error::NonUnit(5)));
        assert_eq!(c("2").checked_div(&c("3"), 5).unwrap(), c("2/3"));
    }

    #[test]
    fn residues_mod_prime_powers() {
        // 1/3 mod 25: 3 * 17 = 51 = 1 mod 25
        assert_eq!(c("1/3").residue_mod_prime_power(5, 2), BigInt::from(17));
        assert_eq!(c("-1").residue_mod_prime_power(5, 1), BigInt::from(4));
    }

    #[test]
    fn crt_examples() {
        assert_eq!(crt_combine(&[(1, 9), (3, 7)]).unwrap(), (10, 63));
        assert_eq!(crt_combine(&[(0, 9), (0, 7)]).unwrap(), (0, 63));
        assert_eq!(crt_combine(&[(2, 3)]).unwrap(), (2, 3));
        assert_eq!(crt_combine(&[(1, 6), (1, 4)]), Err(Error::NonCoprimeModuli(6, 4)));
    }

    #[test]
    fn divisor_lists() {
        assert_eq!(divisors(63), vec![1, 3, 7, 9, 21, 63]);
        assert_eq!(factorize(360), vec![(2, 3), (3, 2), (5, 1)]);
    }

    #[test]
    fn display_roundtrip() {
        for s in ["0/1", "-3/4", "12/1"] {
            assert_eq!(c(s).to_string(), s);
        }
        assert_eq!(c("6/-4").to_string(), "-3/2");
    }
}
