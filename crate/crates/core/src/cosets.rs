//! Compact open subsets of V_{A_f} built from scaled lattice cosets
//! `(1/a)(v + N V_Ẑ)`, and the layout shared with Schwartz functions.
//!
//! A [`LatticeSum`] stores a common scale `a`, a common level `N` and a map
//! from residues mod N to weights; absent residues carry the zero weight.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::arith::{gcd, lcm, prime_divisors};
use crate::error::{Error, Result};
use crate::matrix::{smith_normal_form, ZMatrix};
use crate::residue::{Coords, ResidueVector};
use crate::symplectic::{AdelicGroupElement, CongruenceSubgroup, FiniteLevelElement};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LatticeSum<T> {
    dim: usize,
    scale: u64,
    level: u64,
    entries: BTreeMap<ResidueVector, T>,
}

impl<T: fmt::Debug> fmt::Debug for LatticeSum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(1/{})·{{", self.scale)?;
        for (i, (v, t)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}: {t:?}", v.coords())?;
        }
        write!(f, "}} mod {}", self.level)
    }
}

/// Which way a group element moves a set: `Preimage` gives `g·S`, the
/// support of `x ↦ φ(g^{-1}x)`; `Image` gives `g^{-1}·S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Image,
    Preimage,
}

fn checked_mul(a: u64, b: u64) -> Result<u64> {
    a.checked_mul(b)
        .filter(|&x| x <= u32::MAX as u64)
        .ok_or_else(|| Error::Precondition(format!("level {a}·{b} is out of range")))
}

impl<T: Clone + PartialEq> LatticeSum<T> {
    pub fn new(dim: usize, scale: u64, level: u64) -> Result<Self> {
        if scale == 0 || level == 0 || dim == 0 || dim % 2 != 0 {
            return Err(Error::Malformed(format!(
                "scale {scale}, level {level}, dimension {dim}"
            )));
        }
        Ok(LatticeSum { dim, scale, level, entries: BTreeMap::new() })
    }

    pub fn from_entries(
        dim: usize,
        scale: u64,
        level: u64,
        entries: impl IntoIterator<Item = (ResidueVector, T)>,
    ) -> Result<Self> {
        let mut s = Self::new(dim, scale, level)?;
        for (v, t) in entries {
            if v.modulus() != level || v.dim() != dim {
                return Err(Error::ModulusMismatch(format!("{v:?} at level {level}")));
            }
            s.entries.insert(v, t);
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn genus(&self) -> usize {
        self.dim / 2
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn entries(&self) -> &BTreeMap<ResidueVector, T> {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut BTreeMap<ResidueVector, T> {
        &mut self.entries
    }

    pub fn into_entries(self) -> BTreeMap<ResidueVector, T> {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, v: &ResidueVector) -> Option<&T> {
        self.entries.get(v)
    }

    /// Same object at level `n`, a multiple of the current level.
    pub fn refine(&self, n: u64) -> Result<Self> {
        if n == self.level {
            return Ok(self.clone());
        }
        if n % self.level != 0 {
            return Err(Error::ModulusMismatch(format!("{n} is not a multiple of {}", self.level)));
        }
        let t = n / self.level;
        let mut entries = BTreeMap::new();
        for (v, w) in &self.entries {
            for u in v.fibre(t) {
                entries.insert(u, w.clone());
            }
        }
        Ok(LatticeSum { dim: self.dim, scale: self.scale, level: n, entries })
    }

    /// Same object with scale `a`, a multiple of the current scale.
    pub fn rescale(&self, a: u64) -> Result<Self> {
        if a == self.scale {
            return Ok(self.clone());
        }
        if a % self.scale != 0 {
            return Err(Error::ModulusMismatch(format!("{a} is not a multiple of {}", self.scale)));
        }
        let t = a / self.scale;
        let level = checked_mul(self.level, t)?;
        let entries = self
            .entries
            .iter()
            .map(|(v, w)| (v.scaled_into(t, level), w.clone()))
            .collect();
        Ok(LatticeSum { dim: self.dim, scale: a, level, entries })
    }

    /// Common scale (the lcm), then common level.
    pub fn align(&self, other: &Self) -> Result<(Self, Self)> {
        if self.dim != other.dim {
            return Err(Error::Dimension("genus mismatch".into()));
        }
        let a = lcm(self.scale, other.scale);
        let x = self.rescale(a)?;
        let y = other.rescale(a)?;
        let n = lcm(x.level, y.level);
        Ok((x.refine(n)?, y.refine(n)?))
    }

    fn descend_scale(&self, l: u64) -> Option<Self> {
        if self.scale % l != 0 || self.level % l != 0 {
            return None;
        }
        let mut entries = BTreeMap::new();
        for (v, w) in &self.entries {
            entries.insert(v.divide(l)?, w.clone());
        }
        Some(LatticeSum { dim: self.dim, scale: self.scale / l, level: self.level / l, entries })
    }

    fn descend_level(&self, l: u64) -> Option<Self> {
        if self.level % l != 0 {
            return None;
        }
        let m = self.level / l;
        let fibre = l.pow(self.dim as u32) as usize;
        let mut groups: BTreeMap<ResidueVector, (usize, &T)> = BTreeMap::new();
        for (v, w) in &self.entries {
            let r = v.reduce(m).expect("divisor");
            match groups.get_mut(&r) {
                Some((count, first)) => {
                    if *first != w {
                        return None;
                    }
                    *count += 1;
                }
                None => {
                    groups.insert(r, (1, w));
                }
            }
        }
        if groups.values().any(|(c, _)| *c != fibre) {
            return None;
        }
        let entries = groups.into_iter().map(|(r, (_, w))| (r, w.clone())).collect();
        Some(LatticeSum { dim: self.dim, scale: self.scale, level: m, entries })
    }

    /// The unique representation with minimal scale and then minimal level.
    pub fn minimize(&self) -> Self {
        let mut cur = self.clone();
        if cur.entries.is_empty() {
            return LatticeSum { dim: cur.dim, scale: 1, level: 1, entries: BTreeMap::new() };
        }
        'scale: loop {
            for l in prime_divisors(cur.scale) {
                if let Some(next) = cur.descend_scale(l) {
                    cur = next;
                    continue 'scale;
                }
            }
            break;
        }
        'level: loop {
            for l in prime_divisors(cur.level) {
                if let Some(next) = cur.descend_level(l) {
                    cur = next;
                    continue 'level;
                }
            }
            break;
        }
        cur
    }

    /// Applies `x ↦ (r/s)·x`.
    pub fn apply_center(&self, r: u64, s: u64) -> Result<Self> {
        let g = gcd(r, s);
        let (r, s) = (r / g, s / g);
        let level = checked_mul(self.level, r)?;
        let scale = checked_mul(self.scale, s)?;
        let entries = self
            .entries
            .iter()
            .map(|(v, w)| (v.scaled_into(r, level), w.clone()))
            .collect();
        Ok(LatticeSum { dim: self.dim, scale, level, entries })
    }

    /// Applies `x ↦ m·x` for an integral invertible matrix.
    pub fn apply_integral(&self, m: &ZMatrix) -> Result<Self> {
        if m.rows() != self.dim {
            return Err(Error::Dimension("matrix size".into()));
        }
        if *m == ZMatrix::identity(self.dim) {
            return Ok(self.clone());
        }
        let smith = smith_normal_form(m)?;
        let e = smith.diagonal.last().expect("nonempty").clone();
        let e64 = e.to_u64().ok_or_else(|| Error::Precondition("invariant factor too large".into()))?;
        let level = checked_mul(self.level, e64)?;
        let nb = BigInt::from(self.level);
        let lb = BigInt::from(level);
        let image: Vec<Vec<BigInt>> = smith.image_mod(&e);
        let mut entries = BTreeMap::new();
        for (v, w) in &self.entries {
            let vb: Vec<BigInt> = v.coords().iter().map(|&c| BigInt::from(c)).collect();
            let mv = m.apply(&vb);
            for t in &image {
                let coords: Coords = mv
                    .iter()
                    .zip(t)
                    .map(|(x, y)| {
                        let z = (x + &nb * y) % &lb;
                        let z = if z < BigInt::zero() { z + &lb } else { z };
                        z.to_u64().expect("reduced")
                    })
                    .collect();
                entries.insert(ResidueVector::from_reduced(level, coords), w.clone());
            }
        }
        Ok(LatticeSum { dim: self.dim, scale: self.scale, level, entries })
    }

    /// Applies a finite-level unit (identity away from the primes of its
    /// level).
    pub fn apply_unit(&self, u: &FiniteLevelElement) -> Result<Self> {
        let g = u.at_level(self.level)?;
        let entries = self.entries.iter().map(|(v, w)| (g.apply(v), w.clone())).collect();
        Ok(LatticeSum { dim: self.dim, scale: self.scale, level: self.level, entries })
    }

    /// `g·S` (preimage direction) or `g^{-1}·S` (image direction), minimized.
    pub fn transform(&self, g: &AdelicGroupElement, dir: Direction) -> Result<Self> {
        if g.genus() != self.genus() {
            return Err(Error::Dimension("genus mismatch".into()));
        }
        let q = g.center_scale();
        let (qn, qd) = (ratio_u64(q.numer())?, ratio_u64(q.denom())?);
        let c = ratio_u64(g.integral_similitude())?;
        let out = match dir {
            Direction::Preimage => {
                let mut s = self.clone();
                if let Some(u) = g.unit_part() {
                    s = s.refine(lcm(s.level, u.level()))?.apply_unit(u)?;
                }
                s = s.apply_integral(g.integral_part())?.minimize();
                s.apply_center(qn, qd)?
            }
            Direction::Image => {
                let mut s = self.apply_center(qd, qn)?.minimize();
                s = s.apply_integral(&g.integral_adjoint())?.minimize();
                s = s.apply_center(1, c)?.minimize();
                if let Some(u) = g.unit_part() {
                    s = s.refine(lcm(s.level, u.level()))?.apply_unit(&u.inverse())?;
                }
                s
            }
        };
        Ok(out.minimize())
    }

    pub fn check_admissible(&self, cp: u64) -> Result<()> {
        if gcd(self.scale, cp) != 1 || gcd(self.level, cp) != 1 {
            return Err(Error::Inadmissible(format!(
                "scale {} / level {} not prime to {cp}",
                self.scale, self.level
            )));
        }
        Ok(())
    }

    /// Weight at a rational point `x`, or `None` off the support.
    pub fn lookup(&self, x: &[BigRational]) -> Option<&T> {
        let a = BigRational::from_integer(BigInt::from(self.scale));
        let n = BigInt::from(self.level);
        let mut coords = Coords::new();
        for xi in x {
            let y = xi * &a;
            if !y.is_integer() {
                return None;
            }
            let r = ((y.to_integer() % &n) + &n) % &n;
            coords.push(r.to_u64().expect("reduced"));
        }
        self.entries.get(&ResidueVector::from_reduced(self.level, coords))
    }

    /// True when every generator of `K` permutes the weighted residues.
    pub fn is_invariant(&self, k: &CongruenceSubgroup) -> Result<bool> {
        let n = lcm(self.level, k.level());
        let s = self.refine(n)?;
        let k = k.at_level(n)?;
        for g in k.generators() {
            for (v, w) in &s.entries {
                if s.entries.get(&g.apply(v)) != Some(w) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn ratio_u64(x: &BigInt) -> Result<u64> {
    x.to_u64().ok_or_else(|| Error::Precondition(format!("{x} is out of range")))
}

/// `(1/a)(v + N V_Ẑ)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementaryCoset {
    pub scale: u64,
    pub residue: ResidueVector,
}

impl ElementaryCoset {
    pub fn new(scale: u64, residue: ResidueVector) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Malformed("scale must be positive".into()));
        }
        Ok(ElementaryCoset { scale, residue })
    }

    pub fn level(&self) -> u64 {
        self.residue.modulus()
    }

    pub fn contains_zero(&self) -> bool {
        self.residue.is_zero()
    }

    pub fn to_set(&self) -> CompactOpenSet {
        CompactOpenSet(LatticeSum {
            dim: self.residue.dim(),
            scale: self.scale,
            level: self.level(),
            entries: BTreeMap::from([(self.residue.clone(), ())]),
        })
    }
}

/// A finite union of elementary cosets, kept at a common scale and level.
#[derive(Clone, Debug)]
pub struct CompactOpenSet(pub LatticeSum<()>);

impl PartialEq for CompactOpenSet {
    fn eq(&self, other: &Self) -> bool {
        let a = self.0.minimize();
        let b = other.0.minimize();
        a == b
    }
}

impl Eq for CompactOpenSet {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Subtract,
}

impl CompactOpenSet {
    pub fn empty(dim: usize) -> Self {
        CompactOpenSet(LatticeSum { dim, scale: 1, level: 1, entries: BTreeMap::new() })
    }

    /// `(1/a)(R + N V_Ẑ)` for a set `R` of residues mod `N`.
    pub fn from_residues(
        dim: usize,
        scale: u64,
        level: u64,
        residues: impl IntoIterator<Item = ResidueVector>,
    ) -> Result<Self> {
        Ok(CompactOpenSet(LatticeSum::from_entries(
            dim,
            scale,
            level,
            residues.into_iter().map(|v| (v, ())),
        )?))
    }

    /// `(1/a)·V_Ẑ`.
    pub fn lattice(dim: usize, scale: u64) -> Self {
        CompactOpenSet(LatticeSum {
            dim,
            scale,
            level: 1,
            entries: BTreeMap::from([(ResidueVector::zero(dim, 1), ())]),
        })
    }

    pub fn scale(&self) -> u64 {
        self.0.scale
    }

    pub fn level(&self) -> u64 {
        self.0.level
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn residues(&self) -> impl Iterator<Item = &ResidueVector> {
        self.0.entries.keys()
    }

    pub fn residue_set(&self) -> BTreeSet<ResidueVector> {
        self.0.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.0.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.entries.is_empty()
    }

    /// Contains a neighbourhood of zero.
    pub fn contains_zero(&self) -> bool {
        self.0.entries.contains_key(&ResidueVector::zero(self.0.dim, self.0.level))
    }

    pub fn contains(&self, x: &[BigRational]) -> bool {
        self.0.lookup(x).is_some()
    }

    pub fn refine(&self, n: u64) -> Result<Self> {
        Ok(CompactOpenSet(self.0.refine(n)?))
    }

    pub fn minimize(&self) -> Self {
        CompactOpenSet(self.0.minimize())
    }

    pub fn set_op(&self, other: &Self, op: SetOp) -> Result<Self> {
        let (a, b) = self.0.align(&other.0)?;
        let mut out = a.clone();
        match op {
            SetOp::Union => out.entries.extend(b.entries),
            SetOp::Intersect => out.entries.retain(|v, _| b.entries.contains_key(v)),
            SetOp::Subtract => out.entries.retain(|v, _| !b.entries.contains_key(v)),
        }
        Ok(CompactOpenSet(out.minimize()))
    }

    pub fn apply_element(&self, g: &AdelicGroupElement, dir: Direction, cp: u64) -> Result<Self> {
        g.validate(cp)?;
        let out = self.0.transform(g, dir)?;
        out.check_admissible(cp)?;
        Ok(CompactOpenSet(out))
    }

    pub fn is_invariant(&self, k: &CongruenceSubgroup) -> Result<bool> {
        self.0.is_invariant(k)
    }
}

/// Common scale (lcm of scales) and common level; with a target level the
/// result is refined to it. Scales and levels must be prime to `cp`.
pub fn canonicalize(
    dim: usize,
    cosets: &[ElementaryCoset],
    target_level: Option<u64>,
    cp: u64,
) -> Result<CompactOpenSet> {
    for c in cosets {
        if gcd(c.scale, cp) != 1 || gcd(c.level(), cp) != 1 {
            return Err(Error::Inadmissible(format!(
                "coset with scale {} and level {} is not prime to {cp}",
                c.scale,
                c.level()
            )));
        }
        if c.residue.dim() != dim {
            return Err(Error::Dimension("coset dimension".into()));
        }
    }
    let a = cosets.iter().fold(1, |a, c| lcm(a, c.scale));
    let mut parts = Vec::with_capacity(cosets.len());
    for c in cosets {
        parts.push(c.to_set().0.rescale(a)?);
    }
    let mut n = parts.iter().fold(1, |n, p| lcm(n, p.level));
    if let Some(t) = target_level {
        n = lcm(n, t);
    }
    let mut out = LatticeSum::<()>::new(dim, a, n)?;
    for p in parts {
        out.entries.extend(p.refine(n)?.entries);
    }
    Ok(CompactOpenSet(out))
}

/// Random rational points whose denominators divide `den`, with numerators
/// in `[-box_size, box_size]`, for membership testing.
pub fn sample_points(
    rng: &mut impl rand::Rng,
    dim: usize,
    den: u64,
    box_size: i64,
    count: usize,
) -> Vec<Vec<BigRational>> {
    let dens = crate::arith::divisors(den);
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let d = dens[rng.gen_range(0..dens.len())];
                    BigRational::new(
                        BigInt::from(rng.gen_range(-box_size..=box_size)),
                        BigInt::from(d),
                    )
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::QMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rv(m: u64, c: &[i64]) -> ResidueVector {
        ResidueVector::new(m, c).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn coset(a: u64, m: u64, c: &[i64]) -> ElementaryCoset {
        ElementaryCoset::new(a, rv(m, c)).unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        let s = canonicalize(2, &[coset(1, 3, &[1, 0])], Some(9), 10).unwrap();
        assert_eq!(s.level(), 9);
        assert_eq!(s.len(), 9);
        let s = canonicalize(2, &[coset(1, 3, &[1, 0]), coset(1, 3, &[1, 0])], None, 10).unwrap();
        assert_eq!(s.len(), 1);
        let parts = [coset(1, 3, &[1, 0]), coset(3, 3, &[1, 0])];
        let s = canonicalize(2, &parts, None, 10).unwrap();
        assert_eq!((s.scale(), s.level(), s.len()), (3, 9, 10));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for x in sample_points(&mut rng, 2, 9, 30, 200) {
            let want = parts.iter().any(|c| c.to_set().contains(&x));
            assert_eq!(s.contains(&x), want);
        }
        assert!(canonicalize(2, &[coset(1, 5, &[1, 0])], None, 10).is_err());
    }

    #[test]
    fn set_op_examples() {
        let a = coset(1, 3, &[1, 0]).to_set();
        assert_eq!(a.set_op(&a, SetOp::Union).unwrap(), a);
        let whole = CompactOpenSet::lattice(2, 1).refine(3).unwrap();
        let zero = coset(1, 3, &[0, 0]).to_set();
        let d = whole.set_op(&zero, SetOp::Subtract).unwrap();
        assert_eq!(d.level(), 3);
        assert_eq!(d.len(), 8);
        let b = coset(1, 9, &[1, 3]).to_set();
        assert_eq!(a.set_op(&b, SetOp::Intersect).unwrap(), b);
    }

    #[test]
    fn apply_element_examples() {
        let a = coset(1, 3, &[1, 0]).to_set();
        let id = AdelicGroupElement::identity(1);
        assert_eq!(a.apply_element(&id, Direction::Preimage, 10).unwrap(), a);
        let z3 = AdelicGroupElement::center(1, q(3, 1)).unwrap();
        let v = CompactOpenSet::lattice(2, 1);
        let three_v = coset(1, 3, &[0, 0]).to_set();
        assert_eq!(v.apply_element(&z3, Direction::Preimage, 10).unwrap(), three_v);
        let g = AdelicGroupElement::from_rational(&QMatrix::diagonal(&[q(1, 1), q(1, 3)])).unwrap();
        let got = a.apply_element(&g, Direction::Preimage, 10).unwrap();
        let want = CompactOpenSet::from_residues(2, 1, 3, (0..3).map(|b| rv(3, &[1, b]))).unwrap();
        assert_eq!(got, want);
        assert_eq!(got.apply_element(&g, Direction::Image, 10).unwrap(), a);
        let z5 = AdelicGroupElement::center(1, q(5, 1)).unwrap();
        assert!(v.apply_element(&z5, Direction::Preimage, 10).is_err());
    }

    #[test]
    fn invariance_examples() {
        let full = CongruenceSubgroup::full(1, 3);
        let nonzero = CompactOpenSet::from_residues(
            2,
            1,
            3,
            ResidueVector::all(3, 2).filter(|v| !v.is_zero()),
        )
        .unwrap();
        assert!(nonzero.is_invariant(&full).unwrap());
        let single = coset(1, 3, &[1, 0]).to_set();
        assert!(!single.is_invariant(&full).unwrap());
        let k3 = CongruenceSubgroup::principal(1, 3, 3).unwrap();
        assert!(single.is_invariant(&k3).unwrap());
        // refining both sides does not change the answer
        assert!(!single.is_invariant(&full.at_level(9).unwrap()).unwrap());
    }

    #[test]
    fn minimize_is_intrinsic() {
        let s = coset(1, 3, &[1, 0]).to_set().0.rescale(7).unwrap().refine(63).unwrap();
        let m = s.minimize();
        assert_eq!((m.scale(), m.level(), m.entries().len()), (1, 3, 1));
    }
}
