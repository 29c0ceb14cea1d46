//! Vectors of V_Z / N V_Z.

use std::fmt;

use smallvec::SmallVec;

use crate::arith::gcd;
use crate::error::{Error, Result};

pub type Coords = SmallVec<[u64; 4]>;

/// A class in (Z/N)^{2n}; coordinates always lie in `[0, N)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResidueVector {
    modulus: u64,
    coords: Coords,
}

impl ResidueVector {
    pub fn new(modulus: u64, coords: &[i64]) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::Malformed("residue modulus must be positive".into()));
        }
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "residue vector needs an even positive length, got {}",
                coords.len()
            )));
        }
        let m = modulus as i64;
        Ok(ResidueVector {
            modulus,
            coords: coords.iter().map(|&c| c.rem_euclid(m) as u64).collect(),
        })
    }

    /// Coordinates already reduced; unchecked apart from a debug assertion.
    pub fn from_reduced(modulus: u64, coords: Coords) -> Self {
        debug_assert!(coords.iter().all(|&c| c < modulus));
        ResidueVector { modulus, coords }
    }

    pub fn from_u64s(modulus: u64, coords: &[u64]) -> Self {
        ResidueVector {
            modulus,
            coords: coords.iter().map(|&c| c % modulus).collect(),
        }
    }

    pub fn zero(dim: usize, modulus: u64) -> Self {
        ResidueVector { modulus, coords: SmallVec::from_elem(0, dim) }
    }

    /// The i-th standard basis vector.
    pub fn unit(dim: usize, i: usize, modulus: u64) -> Self {
        let mut v = Self::zero(dim, modulus);
        v.coords[i] = 1 % modulus;
        v
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn genus(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// Big-endian base-N index; index order agrees with lexicographic order.
    pub fn index(&self) -> u64 {
        self.coords.iter().fold(0, |acc, &c| acc * self.modulus + c)
    }

    pub fn from_index(mut idx: u64, modulus: u64, dim: usize) -> Self {
        let mut coords: Coords = SmallVec::from_elem(0, dim);
        for i in (0..dim).rev() {
            coords[i] = idx % modulus;
            idx /= modulus;
        }
        ResidueVector { modulus, coords }
    }

    /// Number of classes in (Z/N)^dim.
    pub fn count(modulus: u64, dim: usize) -> u64 {
        modulus.pow(dim as u32)
    }

    /// Every class mod N in index order.
    pub fn all(modulus: u64, dim: usize) -> impl Iterator<Item = ResidueVector> {
        (0..Self::count(modulus, dim)).map(move |i| Self::from_index(i, modulus, dim))
    }

    /// gcd of the coordinates and N; equals N for the zero class.
    pub fn content(&self) -> u64 {
        self.coords.iter().fold(self.modulus, |g, &c| gcd(g, c))
    }

    /// Not divisible by any prime dividing N.
    pub fn is_primitive(&self) -> bool {
        self.content() == 1
    }

    pub fn reduce(&self, m: u64) -> Result<Self> {
        if m == 0 || self.modulus % m != 0 {
            return Err(Error::ModulusMismatch(format!(
                "cannot reduce mod {} to mod {m}",
                self.modulus
            )));
        }
        Ok(ResidueVector {
            modulus: m,
            coords: self.coords.iter().map(|&c| c % m).collect(),
        })
    }

    /// The class of `d·ṽ` mod `n`, for the lift ṽ with coordinates in `[0, N)`.
    pub fn scaled_into(&self, d: u64, n: u64) -> Self {
        ResidueVector {
            modulus: n,
            coords: self
                .coords
                .iter()
                .map(|&c| ((c as u128 * d as u128) % n as u128) as u64)
                .collect(),
        }
    }

    /// The canonical lift read mod a different modulus.
    pub fn lift_into(&self, n: u64) -> Self {
        ResidueVector {
            modulus: n,
            coords: self.coords.iter().map(|&c| c % n).collect(),
        }
    }

    pub fn add(&self, other: &ResidueVector) -> Self {
        debug_assert_eq!(self.modulus, other.modulus);
        ResidueVector {
            modulus: self.modulus,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| (a + b) % self.modulus)
                .collect(),
        }
    }

    /// All classes mod `N·t` lying over this class mod N, in index order.
    pub fn fibre(&self, t: u64) -> Vec<ResidueVector> {
        let n = self.modulus;
        let nt = n * t;
        let dim = self.dim();
        ResidueVector::all(t, dim)
            .map(|w| ResidueVector {
                modulus: nt,
                coords: self
                    .coords
                    .iter()
                    .zip(w.coords())
                    .map(|(&c, &x)| c + n * x)
                    .collect(),
            })
            .collect()
    }

    /// If every coordinate is divisible by `l` (and `l | N`), the class of
    /// `ṽ/l` mod `N/l`.
    pub fn divide(&self, l: u64) -> Option<Self> {
        if self.modulus % l != 0 || self.coords.iter().any(|&c| c % l != 0) {
            return None;
        }
        Some(ResidueVector {
            modulus: self.modulus / l,
            coords: self.coords.iter().map(|&c| c / l).collect(),
        })
    }
}

impl fmt::Debug for ResidueVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} mod {}", self.coords.as_slice(), self.modulus)
    }
}

impl fmt::Display for ResidueVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        write!(f, "({}) mod {}", parts.join(","), self.modulus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_and_order() {
        let all: Vec<_> = ResidueVector::all(9, 2).collect();
        assert_eq!(all.len(), 81);
        for (i, v) in all.iter().enumerate() {
            assert_eq!(v.index(), i as u64);
            assert_eq!(&ResidueVector::from_index(i as u64, 9, 2), v);
        }
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
    }

    #[test]
    fn primitivity_and_content() {
        let v = ResidueVector::new(63, &[21, 0]).unwrap();
        assert_eq!(v.content(), 21);
        assert!(!v.is_primitive());
        assert!(ResidueVector::new(63, &[3, 7]).unwrap().is_primitive());
        assert_eq!(ResidueVector::zero(2, 9).content(), 9);
    }

    #[test]
    fn fibres_and_division() {
        let v = ResidueVector::new(3, &[1, 0]).unwrap();
        let f = v.fibre(3);
        assert_eq!(f.len(), 9);
        assert!(f.iter().all(|u| u.reduce(3).unwrap() == v));
        let w = ResidueVector::new(9, &[3, 6]).unwrap();
        assert_eq!(w.divide(3).unwrap(), ResidueVector::new(3, &[1, 2]).unwrap());
        assert!(v.divide(3).is_none());
    }

    #[test]
    fn rejects_odd_dimension() {
        assert!(matches!(ResidueVector::new(3, &[1, 2, 0]), Err(Error::Dimension(_))));
    }
}
