//! Elements `z_q · m · u` of GSp_{2n}(A_f): a central scalar, an integral
//! similitude with positive multiplier, and a finite-level unit that acts as
//! given at the primes of its level and trivially elsewhere.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::element::FiniteLevelElement;
use super::{is_symplectic_similitude, symplectic_adjoint};
use crate::arith::{gcd, lcm};
use crate::error::{Error, Result};
use crate::matrix::{QMatrix, ZMatrix};

#[derive(Clone, PartialEq, Eq)]
pub struct AdelicGroupElement {
    genus: usize,
    center: BigRational,
    integral: ZMatrix,
    similitude: BigInt,
    unit: Option<FiniteLevelElement>,
}

fn big_gcd_u64(x: &BigInt, m: u64) -> u64 {
    let r = (x.abs() % BigInt::from(m)).to_u64().expect("residue fits");
    gcd(r, m)
}

impl AdelicGroupElement {
    pub fn new(
        center: BigRational,
        integral: ZMatrix,
        unit: Option<FiniteLevelElement>,
    ) -> Result<Self> {
        if integral.rows() != integral.cols() || integral.rows() % 2 != 0 || integral.rows() == 0 {
            return Err(Error::Dimension("integral part must be 2n x 2n".into()));
        }
        let genus = integral.rows() / 2;
        if !center.is_positive() {
            return Err(Error::Precondition(format!("center scale {center} must be positive")));
        }
        let (ok, c) = is_symplectic_similitude(&integral.to_q())?;
        let c = match (ok, c) {
            (true, Some(c)) if c.is_positive() => c.to_integer(),
            (true, Some(c)) => {
                return Err(Error::NotSimilitude(format!("multiplier {c} is not positive")))
            }
            _ => return Err(Error::NotSimilitude(format!("{integral:?}"))),
        };
        if let Some(u) = &unit {
            if u.genus() != genus {
                return Err(Error::Dimension("unit part has the wrong genus".into()));
            }
        }
        let unit = unit.filter(|u| !u.is_identity() && u.level() > 1);
        Ok(AdelicGroupElement { genus, center, integral, similitude: c, unit })
    }

    pub fn identity(genus: usize) -> Self {
        AdelicGroupElement {
            genus,
            center: BigRational::one(),
            integral: ZMatrix::identity(2 * genus),
            similitude: BigInt::one(),
            unit: None,
        }
    }

    /// The central element `z_q = q·Id`.
    pub fn center(genus: usize, q: BigRational) -> Result<Self> {
        Self::new(q, ZMatrix::identity(2 * genus), None)
    }

    pub fn unit(u: FiniteLevelElement) -> Self {
        let genus = u.genus();
        Self::new(BigRational::one(), ZMatrix::identity(2 * genus), Some(u)).expect("unit element")
    }

    /// Factors a rational similitude as `z_{C/D} · m` with `D` the common
    /// denominator and `C` the content of `D·g`.
    pub fn from_rational(g: &QMatrix) -> Result<Self> {
        let d = g.denominator();
        let dg = g.scale(&BigRational::from_integer(d.clone())).to_z().expect("cleared denominators");
        let c = dg.content();
        if c.is_zero() {
            return Err(Error::Singular);
        }
        let m = dg.to_q().scale(&BigRational::new(BigInt::one(), c.clone())).to_z().expect("content divides");
        Self::new(BigRational::new(c, d), m, None)
    }

    /// Unit part attached on the right.
    pub fn with_unit(&self, u: FiniteLevelElement) -> Result<Self> {
        if self.unit.is_some() {
            return Err(Error::Precondition("element already carries a unit part".into()));
        }
        Self::new(self.center.clone(), self.integral.clone(), Some(u))
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn center_scale(&self) -> &BigRational {
        &self.center
    }

    pub fn integral_part(&self) -> &ZMatrix {
        &self.integral
    }

    /// Multiplier of the integral part.
    pub fn integral_similitude(&self) -> &BigInt {
        &self.similitude
    }

    pub fn unit_part(&self) -> Option<&FiniteLevelElement> {
        self.unit.as_ref()
    }

    pub fn is_identity(&self) -> bool {
        self.center.is_one() && self.integral == ZMatrix::identity(2 * self.genus) && self.unit.is_none()
    }

    pub fn is_rational(&self) -> bool {
        self.unit.is_none()
    }

    /// `J^{-1} mᵗ J = c·m^{-1}`, integral.
    pub fn integral_adjoint(&self) -> ZMatrix {
        symplectic_adjoint(&self.integral)
    }

    /// `q·m` when there is no unit part.
    pub fn rational_matrix(&self) -> Option<QMatrix> {
        self.unit.is_none().then(|| self.integral.to_q().scale(&self.center))
    }

    /// Rejects elements whose scalings are not units away from `cp`.
    pub fn validate(&self, cp: u64) -> Result<()> {
        let bad = |x: &BigInt| big_gcd_u64(x, cp) != 1;
        if bad(self.center.numer()) || bad(self.center.denom()) {
            return Err(Error::Inadmissible(format!(
                "center scale {} is not prime to {cp}",
                self.center
            )));
        }
        if bad(&self.similitude) {
            return Err(Error::Inadmissible(format!(
                "integral multiplier {} is not prime to {cp}",
                self.similitude
            )));
        }
        Ok(())
    }

    /// `c(g)` as a rational number, when there is no unit part.
    pub fn similitude(&self) -> Option<BigRational> {
        let q = &self.center;
        self.unit.is_none().then(|| q * q * BigRational::from_integer(self.similitude.clone()))
    }

    /// Product, when it stays inside the factored class: the right factor
    /// may carry a unit part, the left one may not (unless both are units).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.genus != other.genus {
            return Err(Error::Dimension("genus mismatch".into()));
        }
        match (&self.unit, &other.unit) {
            (None, _) => {
                let center = &self.center * &other.center;
                let m = self.integral.mul(&other.integral);
                let content = m.content();
                let m = m.to_q().scale(&BigRational::new(BigInt::one(), content.clone())).to_z().expect("content");
                Self::new(center * BigRational::from_integer(content), m, other.unit.clone())
            }
            (Some(u), None) if other.center.is_one() && other.integral == ZMatrix::identity(2 * self.genus) => {
                Ok(self.clone().replace_unit(Some(u.clone())))
            }
            (Some(u), Some(v))
                if other.center.is_one() && other.integral == ZMatrix::identity(2 * self.genus) =>
            {
                let l = lcm(u.level(), v.level());
                let w = u.at_level(l)?.mul(&v.at_level(l)?);
                Ok(self.clone().replace_unit(Some(w)))
            }
            _ => Err(Error::Precondition(
                "a unit followed by a non-unit leaves the factored class".into(),
            )),
        }
    }

    fn replace_unit(mut self, u: Option<FiniteLevelElement>) -> Self {
        self.unit = u.filter(|u| !u.is_identity() && u.level() > 1);
        self
    }

    /// Inverse, when it stays inside the factored class.
    pub fn inverse(&self) -> Result<Self> {
        match &self.unit {
            None => {
                let adj = self.integral_adjoint();
                let c = BigRational::from_integer(self.similitude.clone());
                let content = adj.content();
                let m = adj.to_q().scale(&BigRational::new(BigInt::one(), content.clone())).to_z().expect("content");
                Self::new(
                    BigRational::from_integer(content) / (&self.center * c),
                    m,
                    None,
                )
            }
            Some(u) if self.center.is_one() && self.integral == ZMatrix::identity(2 * self.genus) => {
                Ok(Self::unit(u.inverse()))
            }
            _ => Err(Error::Precondition("inverse leaves the factored class".into())),
        }
    }

    /// Integer `D` with `D·m^{-1}` integral, namely the multiplier divided
    /// by the content of the adjoint.
    pub fn inverse_denominator(&self) -> BigInt {
        let adj = self.integral_adjoint();
        let g = adj.content().gcd(&self.similitude);
        &self.similitude / g
    }
}

impl fmt::Debug for AdelicGroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z_{} · {:?}", self.center, self.integral)?;
        if let Some(u) = &self.unit {
            write!(f, " · {u:?}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn factoring() {
        let g = QMatrix::diagonal(&[q(1, 1), q(1, 3)]);
        let a = AdelicGroupElement::from_rational(&g).unwrap();
        assert_eq!(*a.center_scale(), q(1, 3));
        assert_eq!(*a.integral_part(), ZMatrix::from_rows(&[vec![3, 0], vec![0, 1]]).unwrap());
        assert_eq!(a.rational_matrix().unwrap(), g);
        let z3 = AdelicGroupElement::from_rational(&QMatrix::scalar(2, &q(3, 1))).unwrap();
        assert_eq!(*z3.center_scale(), q(3, 1));
        assert!(z3.integral_part() == &ZMatrix::identity(2));
    }

    #[test]
    fn products_and_inverses() {
        let g = AdelicGroupElement::from_rational(&QMatrix::from_int_rows(&[vec![2, 1], vec![1, 1]]).unwrap()).unwrap();
        let h = AdelicGroupElement::from_rational(&QMatrix::diagonal(&[q(1, 3), q(1, 1)])).unwrap();
        let gh = g.mul(&h).unwrap();
        assert_eq!(
            gh.rational_matrix().unwrap(),
            g.rational_matrix().unwrap().mul(&h.rational_matrix().unwrap())
        );
        let hi = h.inverse().unwrap();
        assert!(h.mul(&hi).unwrap().is_identity());
        let u = FiniteLevelElement::new(1, 9, &[vec![1, 1], vec![0, 1]]).unwrap();
        let hu = h.with_unit(u.clone()).unwrap();
        assert!(AdelicGroupElement::unit(u).mul(&h).is_err());
        assert!(hu.validate(10).is_ok());
        let z5 = AdelicGroupElement::center(1, q(5, 1)).unwrap();
        assert!(z5.validate(10).is_err());
    }

    #[test]
    fn negative_multiplier_is_rejected() {
        let g = QMatrix::diagonal(&[q(1, 1), q(-1, 1)]);
        assert!(AdelicGroupElement::from_rational(&g).is_err());
    }
}
