//! Schwartz functions on V_{A_f} ∖ {0} that are full at the primes of `cp`:
//! finite sums `Σ c_v ch((1/a)(v + N V_Ẑ))` over nonzero residues.

use std::collections::BTreeMap;
use std::fmt;

use crate::arith::{lcm, Coefficient};
use crate::cosets::{CompactOpenSet, Direction, LatticeSum};
use crate::error::{Error, Result};
use crate::residue::ResidueVector;
use crate::symplectic::subgroup::lift_element;
use crate::symplectic::{coset_representatives, AdelicGroupElement, CongruenceSubgroup, FiniteLevelElement};

/// Always stored in minimal form, so equality is structural.
#[derive(Clone, PartialEq, Eq)]
pub struct SchwartzFunction(LatticeSum<Coefficient>);

impl fmt::Debug for SchwartzFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl SchwartzFunction {
    pub fn zero(dim: usize) -> Self {
        SchwartzFunction(LatticeSum::new(dim, 1, 1).expect("valid shape"))
    }

    pub fn new(
        dim: usize,
        scale: u64,
        level: u64,
        coeffs: impl IntoIterator<Item = (ResidueVector, Coefficient)>,
    ) -> Result<Self> {
        let mut acc: BTreeMap<ResidueVector, Coefficient> = BTreeMap::new();
        for (v, c) in coeffs {
            if v.is_zero() && !c.is_zero() {
                return Err(Error::Precondition(
                    "the zero residue cannot carry a coefficient".into(),
                ));
            }
            *acc.entry(v).or_insert_with(Coefficient::zero) += c;
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(Self::from_layout(LatticeSum::from_entries(dim, scale, level, acc)?))
    }

    fn from_layout(l: LatticeSum<Coefficient>) -> Self {
        SchwartzFunction(l.minimize())
    }

    /// `ξ_{v,N} = ch(v + N V_Ẑ)`.
    pub fn xi(v: &ResidueVector) -> Result<Self> {
        Self::new(v.dim(), 1, v.modulus(), [(v.clone(), Coefficient::one())])
    }

    /// Characteristic function of a set that avoids a neighbourhood of 0.
    pub fn characteristic(s: &CompactOpenSet) -> Result<Self> {
        if s.contains_zero() {
            return Err(Error::Precondition("support meets every neighbourhood of 0".into()));
        }
        Self::new(s.dim(), s.scale(), s.level(), s.residues().map(|v| (v.clone(), Coefficient::one())))
    }

    pub fn layout(&self) -> &LatticeSum<Coefficient> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn genus(&self) -> usize {
        self.0.genus()
    }

    pub fn scale(&self) -> u64 {
        self.0.scale()
    }

    pub fn level(&self) -> u64 {
        self.0.level()
    }

    pub fn coefficients(&self) -> &BTreeMap<ResidueVector, Coefficient> {
        self.0.entries()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> CompactOpenSet {
        CompactOpenSet::from_residues(self.dim(), self.scale(), self.level(), self.coefficients().keys().cloned())
            .expect("consistent layout")
    }

    /// Coefficients at the given scale and level (both multiples of the
    /// minimal ones).
    pub fn expanded(&self, scale: u64, level: u64) -> Result<BTreeMap<ResidueVector, Coefficient>> {
        let l = self.0.rescale(scale)?;
        Ok(l.refine(level)?.into_entries())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (mut a, b) = self.0.align(&other.0)?;
        for (v, c) in b.into_entries() {
            let e = a.entries_mut().entry(v.clone()).or_insert_with(Coefficient::zero);
            *e += c;
            if e.is_zero() {
                a.entries_mut().remove(&v);
            }
        }
        Ok(Self::from_layout(a))
    }

    pub fn scaled(&self, c: &Coefficient) -> Self {
        if c.is_zero() {
            return Self::zero(self.dim());
        }
        let mut l = self.0.clone();
        for x in l.entries_mut().values_mut() {
            *x = &*x * c;
        }
        Self::from_layout(l)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(&Coefficient::from_int(-1)))
    }

    pub fn sum<'a>(dim: usize, items: impl IntoIterator<Item = &'a SchwartzFunction>) -> Result<Self> {
        let mut acc = Self::zero(dim);
        for x in items {
            acc = acc.add(x)?;
        }
        Ok(acc)
    }

    /// `(g·φ)(x) = φ(g^{-1}x)`.
    pub fn act(&self, g: &AdelicGroupElement, cp: u64) -> Result<Self> {
        g.validate(cp)?;
        let out = self.0.transform(g, Direction::Preimage)?;
        out.check_admissible(cp)?;
        Ok(Self::from_layout(out))
    }

    /// Action of an element of a congruence subgroup given at its level;
    /// any lift gives the same result on functions invariant under the
    /// kernel at that level.
    pub fn act_finite(&self, g: &FiniteLevelElement) -> Result<Self> {
        let n = lcm(self.level(), g.level());
        let lifted = lift_element(g, n)?;
        let l = self.0.refine(n)?;
        let moved = l.apply_unit(&lifted)?;
        Ok(Self::from_layout(moved))
    }

    pub fn is_invariant(&self, k: &CongruenceSubgroup) -> Result<bool> {
        self.0.is_invariant(k)
    }

    fn require_invariant(&self, k: &CongruenceSubgroup) -> Result<()> {
        if self.is_invariant(k)? {
            Ok(())
        } else {
            Err(Error::NotInvariant(format!("function is not {}-invariant", k.label())))
        }
    }

    /// `pr^*` from `K` to `L ⊆ K`: the same function.
    pub fn restrict(&self, k: &CongruenceSubgroup, l: &CongruenceSubgroup) -> Result<Self> {
        self.require_invariant(k)?;
        if !l.is_subgroup_of(k) {
            return Err(Error::NotContained(format!("{} ⊄ {}", l.label(), k.label())));
        }
        Ok(self.clone())
    }

    /// `pr_*` from `L` to `K ⊇ L`: the sum of translates over `K/L`.
    pub fn induce(&self, l: &CongruenceSubgroup, k: &CongruenceSubgroup) -> Result<Self> {
        self.require_invariant(l)?;
        let reps = coset_representatives(k, l)?;
        self.sum_translates(&reps)
    }

    /// `Σ_γ γ·φ` over the given finite-level elements.
    pub fn sum_translates(&self, reps: &[FiniteLevelElement]) -> Result<Self> {
        let Some(first) = reps.first() else {
            return Ok(Self::zero(self.dim()));
        };
        let n = lcm(self.level(), first.level());
        let base = self.0.refine(n)?;
        let mut acc: BTreeMap<ResidueVector, Coefficient> = BTreeMap::new();
        for g in reps {
            let lifted = lift_element(g, n)?;
            for (v, c) in base.entries() {
                let e = acc.entry(lifted.apply(v)).or_insert_with(Coefficient::zero);
                *e += c;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(Self::from_layout(LatticeSum::from_entries(self.dim(), self.scale(), n, acc)?))
    }

    /// All coefficients are p-integral.
    pub fn is_p_integral(&self, p: u64) -> bool {
        self.coefficients().values().all(|c| c.is_p_integral(p))
    }

    pub fn check_admissible(&self, cp: u64) -> Result<()> {
        self.0.check_admissible(cp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::QMatrix;
    use num_rational::BigRational;

    fn rv(m: u64, c: &[i64]) -> ResidueVector {
        ResidueVector::new(m, c).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn nonzero(level: u64) -> SchwartzFunction {
        SchwartzFunction::new(
            2,
            1,
            level,
            ResidueVector::all(level, 2).filter(|v| !v.is_zero()).map(|v| (v, Coefficient::one())),
        )
        .unwrap()
    }

    #[test]
    fn act_examples() {
        let x = SchwartzFunction::xi(&rv(3, &[1, 0])).unwrap();
        assert_eq!(x.act(&AdelicGroupElement::identity(1), 10).unwrap(), x);
        let z3 = AdelicGroupElement::center(1, q(3, 1)).unwrap();
        let got = nonzero(3).act(&z3, 10).unwrap();
        let want = SchwartzFunction::new(
            2,
            1,
            9,
            ResidueVector::all(9, 2)
                .filter(|v| v.content() == 3)
                .map(|v| (v, Coefficient::one())),
        )
        .unwrap();
        assert_eq!(got, want);
        let g = AdelicGroupElement::from_rational(&QMatrix::diagonal(&[q(1, 1), q(1, 3)])).unwrap();
        let got = x.act(&g, 10).unwrap();
        let want = SchwartzFunction::new(2, 1, 3, (0..3).map(|b| (rv(3, &[1, b]), Coefficient::one()))).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn invariance_examples() {
        let x = SchwartzFunction::xi(&rv(3, &[1, 0])).unwrap();
        let k3 = CongruenceSubgroup::principal(1, 3, 3).unwrap();
        let full = CongruenceSubgroup::full(1, 3);
        assert!(x.is_invariant(&k3).unwrap());
        assert!(!x.is_invariant(&full).unwrap());
        assert!(nonzero(3).is_invariant(&full).unwrap());
    }

    #[test]
    fn restrict_and_induce() {
        let k3 = CongruenceSubgroup::principal(1, 3, 9).unwrap();
        let k9 = CongruenceSubgroup::principal(1, 9, 9).unwrap();
        let x = SchwartzFunction::xi(&rv(3, &[1, 0])).unwrap();
        let r = x.restrict(&k3, &k9).unwrap();
        assert_eq!(r.expanded(1, 9).unwrap().len(), 9);
        let back = r.induce(&k9, &k3).unwrap();
        assert_eq!(back, x.scaled(&Coefficient::from_int(81)));

        let y = SchwartzFunction::xi(&rv(9, &[1, 0])).unwrap();
        let got = y.induce(&k9, &k3).unwrap();
        let want = SchwartzFunction::xi(&rv(3, &[1, 0])).unwrap().scaled(&Coefficient::from_int(9));
        assert_eq!(got, want);
        assert!(y.induce(&k9, &k9).unwrap() == y);
        assert!(SchwartzFunction::zero(2).restrict(&k3, &k9).unwrap().is_zero());
        assert!(matches!(y.restrict(&k3, &k9), Err(Error::NotInvariant(_))));
    }

    #[test]
    fn zero_residue_rejected() {
        assert!(SchwartzFunction::new(2, 1, 3, [(rv(3, &[0, 0]), Coefficient::one())]).is_err());
        let whole = CompactOpenSet::lattice(2, 1);
        assert!(SchwartzFunction::characteristic(&whole).is_err());
    }

    #[test]
    fn action_composes() {
        let g = AdelicGroupElement::from_rational(&QMatrix::from_int_rows(&[vec![1, 1], vec![0, 3]]).unwrap())
            .unwrap();
        let h = AdelicGroupElement::from_rational(&QMatrix::diagonal(&[q(1, 7), q(1, 1)])).unwrap();
        let u = FiniteLevelElement::new(1, 9, &[vec![2, 1], vec![1, 1]]).unwrap();
        let h = h.with_unit(u).unwrap();
        let x = SchwartzFunction::xi(&rv(9, &[1, 3])).unwrap().add(&nonzero(3)).unwrap();
        let lhs = x.act(&h, 10).unwrap().act(&g, 10).unwrap();
        let rhs = x.act(&g.mul(&h).unwrap(), 10).unwrap();
        assert_eq!(lhs, rhs);
    }
}
