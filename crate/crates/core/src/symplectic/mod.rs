//! GSp_{2n} over Q, Z and Z/N, with J = [[0, I], [-I, 0]].

pub mod adelic;
pub mod element;
pub mod generators;
pub mod subgroup;

pub use adelic::AdelicGroupElement;
pub use element::FiniteLevelElement;
pub use generators::{generators_mod_n, gsp_order, kernel_generators, kernel_order};
pub use subgroup::{
    coset_representatives, double_coset_representatives, index, stabilizer, CongruenceSubgroup,
    DoubleCoset, SubgroupKind,
};

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::matrix::{QMatrix, ZMatrix};

/// `J^{-1} Mᵗ J` for a square matrix of even size; equals `c·M^{-1}` when
/// `Mᵗ J M = c J`.
pub fn symplectic_adjoint_q(m: &QMatrix) -> QMatrix {
    let d = m.rows();
    let n = d / 2;
    let mut out = QMatrix::zero(d, d);
    // (J^{-1} Mᵗ J)_{ab} = sum J^{-1}_{a r} M_{s r} J_{s b}
    // J e_{n+i} = e_i, J e_i = -e_{n+i}; J^{-1} = -J
    let jcol = |b: usize| -> (usize, bool) { if b < n { (n + b, false) } else { (b - n, true) } };
    let jinv_row = |a: usize| -> (usize, bool) { if a < n { (n + a, false) } else { (a - n, true) } };
    for a in 0..d {
        let (r, pos_r) = jinv_row(a);
        for b in 0..d {
            let (s, pos_s) = jcol(b);
            let v = m.get(s, r).clone();
            let v = if pos_r == pos_s { v } else { -v };
            out.set(a, b, v);
        }
    }
    out
}

pub fn symplectic_adjoint(m: &ZMatrix) -> ZMatrix {
    symplectic_adjoint_q(&m.to_q()).to_z().expect("adjoint of an integral matrix")
}

/// Decides whether `Mᵗ J M = c J` for some `c ≠ 0`, returning `c`.
pub fn is_symplectic_similitude(m: &QMatrix) -> Result<(bool, Option<BigRational>)> {
    let d = m.rows();
    if d != m.cols() || d == 0 || d % 2 != 0 {
        return Err(Error::Dimension(format!("{}x{} is not 2n x 2n", m.rows(), m.cols())));
    }
    let prod = m.mul(&symplectic_adjoint_q(m));
    let c = prod.get(0, 0).clone();
    if c.is_zero() {
        return Ok((false, None));
    }
    let ok = (0..d).all(|i| (0..d).all(|j| *prod.get(i, j) == if i == j { c.clone() } else { BigRational::zero() }));
    Ok(if ok { (true, Some(c)) } else { (false, None) })
}

/// A rational symplectic similitude with its verified multiplier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimilitudeMatrix {
    matrix: QMatrix,
    similitude: BigRational,
}

impl SimilitudeMatrix {
    pub fn new(matrix: QMatrix) -> Result<Self> {
        match is_symplectic_similitude(&matrix)? {
            (true, Some(c)) => Ok(SimilitudeMatrix { matrix, similitude: c }),
            _ => Err(Error::NotSimilitude(format!("{matrix:?}"))),
        }
    }

    pub fn matrix(&self) -> &QMatrix {
        &self.matrix
    }

    pub fn similitude(&self) -> &BigRational {
        &self.similitude
    }

    pub fn genus(&self) -> usize {
        self.matrix.rows() / 2
    }

    pub fn mul(&self, other: &Self) -> Self {
        SimilitudeMatrix {
            matrix: self.matrix.mul(&other.matrix),
            similitude: &self.similitude * &other.similitude,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv = self.similitude.recip();
        SimilitudeMatrix {
            matrix: symplectic_adjoint_q(&self.matrix).scale(&inv),
            similitude: inv,
        }
    }

    pub fn is_integral(&self) -> bool {
        self.matrix.is_integral()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn similitude_examples() {
        let (ok, c) = is_symplectic_similitude(&QMatrix::identity(2)).unwrap();
        assert!(ok && c == Some(num_traits::One::one()));
        let (ok, c) = is_symplectic_similitude(&QMatrix::diagonal(&[q(1, 1), q(1, 3)])).unwrap();
        assert!(ok && c == Some(q(1, 3)));
        let z = QMatrix::from_int_rows(&[vec![0, 0], vec![1, 2]]).unwrap();
        assert_eq!(is_symplectic_similitude(&z).unwrap(), (false, None));
        assert!(is_symplectic_similitude(&QMatrix::identity(3)).is_err());
    }

    #[test]
    fn genus_two_adjoint() {
        let m = QMatrix::from_int_rows(&[
            vec![1, 0, 2, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 3, 0],
            vec![0, 0, 0, 3],
        ])
        .unwrap();
        let s = SimilitudeMatrix::new(m.clone()).unwrap();
        assert_eq!(*s.similitude(), q(3, 1));
        assert_eq!(s.mul(&s.inverse()).matrix(), &QMatrix::identity(4));
        // a GL_2 block without its dual
        let bad = QMatrix::from_int_rows(&[
            vec![1, 1, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
        ])
        .unwrap();
        assert!(SimilitudeMatrix::new(bad).is_err());
    }
}
