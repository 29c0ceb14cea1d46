use std::fmt;

use smallvec::SmallVec;

use crate::arith::{crt_combine, factorize, gcd, mod_inverse, valuation};
use crate::error::{Error, Result};
use crate::residue::ResidueVector;

pub type Entries = SmallVec<[u32; 16]>;

/// An element of GSp_{2n}(Z/N), row-major.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteLevelElement {
    level: u64,
    dim: usize,
    entries: Entries,
}

/// `gᵗ J g` for a square matrix given by an entry accessor, as a flat
/// row-major vector of `i128`.
pub(crate) fn gram(dim: usize, get: impl Fn(usize, usize) -> i128) -> Vec<i128> {
    let n = dim / 2;
    let mut out = vec![0i128; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            let mut s = 0i128;
            for i in 0..n {
                s += get(i, a) * get(n + i, b) - get(n + i, a) * get(i, b);
            }
            out[a * dim + b] = s;
        }
    }
    out
}

impl FiniteLevelElement {
    /// Validates `gᵗ J g ≡ c·J (mod N)` with `c` a unit.
    pub fn new(genus: usize, level: u64, rows: &[Vec<i64>]) -> Result<Self> {
        let dim = 2 * genus;
        if genus == 0 || rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension(format!("expected a {dim}x{dim} matrix")));
        }
        if level < 1 || level > u32::MAX as u64 {
            return Err(Error::Malformed(format!("unsupported level {level}")));
        }
        let m = level as i64;
        let entries = rows.iter().flatten().map(|&x| x.rem_euclid(m) as u32).collect();
        let g = FiniteLevelElement { level, dim, entries };
        g.validate()?;
        Ok(g)
    }

    pub(crate) fn from_entries_unchecked(level: u64, dim: usize, entries: Entries) -> Self {
        FiniteLevelElement { level, dim, entries }
    }

    fn validate(&self) -> Result<()> {
        if self.level == 1 {
            return Ok(());
        }
        let c = self.compute_similitude().ok_or_else(|| {
            Error::NotSimilitude(format!("{self:?} is not a similitude mod {}", self.level))
        })?;
        if gcd(c, self.level) != 1 {
            return Err(Error::NotSimilitude(format!("similitude {c} is not a unit mod {}", self.level)));
        }
        Ok(())
    }

    fn compute_similitude(&self) -> Option<u64> {
        let n = self.dim / 2;
        let m = self.level as i128;
        let gr = gram(self.dim, |i, j| self.get(i, j) as i128);
        let c = gr[n].rem_euclid(m);
        for a in 0..self.dim {
            for b in 0..self.dim {
                let want = if b == a + n && a < n {
                    c
                } else if a == b + n && b < n {
                    -c
                } else {
                    0
                };
                if (gr[a * self.dim + b] - want).rem_euclid(m) != 0 {
                    return None;
                }
            }
        }
        Some(c as u64)
    }

    pub fn identity(genus: usize, level: u64) -> Self {
        let dim = 2 * genus;
        let mut entries: Entries = SmallVec::from_elem(0, dim * dim);
        if level > 1 {
            for i in 0..dim {
                entries[i * dim + i] = 1;
            }
        }
        FiniteLevelElement { level, dim, entries }
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn genus(&self) -> usize {
        self.dim / 2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.dim + j] as u64
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) as i64).collect())
            .collect()
    }

    /// The multiplier `c` with `gᵗ J g = c J`.
    pub fn similitude(&self) -> u64 {
        if self.level == 1 {
            return 0;
        }
        let n = self.dim / 2;
        let gr = gram(self.dim, |i, j| self.get(i, j) as i128);
        gr[n].rem_euclid(self.level as i128) as u64
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.genus(), self.level)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.level, other.level, "levels differ in product");
        let d = self.dim;
        let m = self.level;
        let mut entries: Entries = SmallVec::from_elem(0, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut s: u64 = 0;
                for k in 0..d {
                    s += self.get(i, k) * other.get(k, j) % m;
                }
                entries[i * d + j] = (s % m) as u32;
            }
        }
        FiniteLevelElement { level: m, dim: d, entries }
    }

    /// `g^{-1} = c^{-1} J^{-1} gᵗ J`.
    pub fn inverse(&self) -> Self {
        if self.level == 1 {
            return self.clone();
        }
        let d = self.dim;
        let n = d / 2;
        let m = self.level;
        let cinv = mod_inverse(self.similitude(), m).expect("similitude is a unit");
        // (J^{-1} gᵗ J)_{ab}; J^{-1} = -J, (J x)_i = x_{n+i}, (J x)_{n+i} = -x_i
        let gt = |i: usize, j: usize| self.get(j, i) as i128;
        let mut entries: Entries = SmallVec::from_elem(0, d * d);
        for a in 0..d {
            for b in 0..d {
                // (gᵗ J)_{r b} = sum_s gt(r, s) J_{s b}
                let gtj = |r: usize| -> i128 {
                    if b < n {
                        -gt(r, n + b)
                    } else {
                        gt(r, b - n)
                    }
                };
                // (-J y)_a
                let v = if a < n { -gtj(n + a) } else { gtj(a - n) };
                let v = (v.rem_euclid(m as i128) as u64 * cinv) % m;
                entries[a * d + b] = v as u32;
            }
        }
        FiniteLevelElement { level: m, dim: d, entries }
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::identity(self.genus(), self.level);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Image of the element in GSp(Z/M) for `M | N`.
    pub fn reduce(&self, m: u64) -> Result<Self> {
        if m == 0 || self.level % m != 0 {
            return Err(Error::ModulusMismatch(format!(
                "cannot reduce level {} to {m}",
                self.level
            )));
        }
        Ok(FiniteLevelElement {
            level: m,
            dim: self.dim,
            entries: self.entries.iter().map(|&x| (x as u64 % m) as u32).collect(),
        })
    }

    /// The action at level `n` of the element of GSp(Ẑ) that agrees with `self`
    /// at the primes of its level and is the identity at every other prime.
    /// Fails when some prime power of `n` is finer than the element's level.
    pub fn at_level(&self, n: u64) -> Result<Self> {
        if self.level % n == 0 {
            return self.reduce(n);
        }
        let d = self.dim;
        let parts: Vec<(u64, u64)> = factorize(n)
            .into_iter()
            .map(|(l, e)| (l, l.pow(e)))
            .collect();
        for &(l, q) in &parts {
            if self.level % l == 0 && valuation(self.level, l) < valuation(q, l) {
                return Err(Error::ModulusMismatch(format!(
                    "element of level {} does not determine an action mod {n}",
                    self.level
                )));
            }
        }
        let mut entries: Entries = SmallVec::from_elem(0, d * d);
        for i in 0..d {
            for j in 0..d {
                let comps: Vec<(i64, u64)> = parts
                    .iter()
                    .map(|&(l, q)| {
                        let x = if self.level % l == 0 {
                            self.get(i, j) % q
                        } else {
                            (i == j) as u64
                        };
                        (x as i64, q)
                    })
                    .collect();
                entries[i * d + j] = crt_combine(&comps).expect("coprime prime powers").0 as u32;
            }
        }
        Ok(FiniteLevelElement { level: n, dim: d, entries })
    }

    /// `g·v` for a residue vector whose modulus divides the level.
    pub fn apply(&self, v: &ResidueVector) -> ResidueVector {
        let m = v.modulus();
        debug_assert!(self.level % m == 0 || m == 1);
        let d = self.dim;
        let c = v.coords();
        let out: crate::residue::Coords = (0..d)
            .map(|i| {
                let mut s: u64 = 0;
                for k in 0..d {
                    s += (self.get(i, k) % m) * c[k] % m;
                }
                s % m
            })
            .collect();
        ResidueVector::from_reduced(m, out)
    }
}

impl fmt::Debug for FiniteLevelElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} mod {}", self.rows(), self.level)
    }
}

/// Combines prime-power components (each `(q, element mod q)`) into one
/// element by CRT.
pub fn crt_element(dim: usize, comps: &[(u64, FiniteLevelElement)]) -> FiniteLevelElement {
    let level: u64 = comps.iter().map(|(q, _)| q).product();
    let mut entries: Entries = SmallVec::from_elem(0, dim * dim);
    for idx in 0..dim * dim {
        let parts: Vec<(i64, u64)> = comps
            .iter()
            .map(|(q, g)| (g.entries[idx] as i64, *q))
            .collect();
        entries[idx] = crt_combine(&parts).expect("coprime components").0 as u32;
    }
    FiniteLevelElement { level, dim, entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(FiniteLevelElement::new(1, 9, &[vec![1, 1], vec![0, 1]]).is_ok());
        // det 3 is not a unit mod 9
        assert!(FiniteLevelElement::new(1, 9, &[vec![3, 0], vec![0, 1]]).is_err());
        // genus 2: a GL2 block on (e1, e2) without its dual is not symplectic
        let bad = vec![
            vec![1, 1, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
        ];
        assert!(FiniteLevelElement::new(2, 3, &bad).is_err());
    }

    #[test]
    fn inverse_and_similitude() {
        let g = FiniteLevelElement::new(2, 7, &[
            vec![1, 0, 2, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 3, 0],
            vec![0, 0, 0, 3],
        ])
        .unwrap();
        assert_eq!(g.similitude(), 3);
        assert!(g.mul(&g.inverse()).is_identity());
        assert!(g.inverse().mul(&g).is_identity());
    }

    #[test]
    fn identity_away_lift() {
        let u = FiniteLevelElement::new(1, 9, &[vec![2, 0], vec![0, 1]]).unwrap();
        let at63 = u.at_level(63).unwrap();
        assert_eq!(at63.reduce(9).unwrap(), u);
        assert!(at63.reduce(7).unwrap().is_identity());
        assert!(u.at_level(27).is_err());
        assert_eq!(u.at_level(3).unwrap(), u.reduce(3).unwrap());
    }
}
