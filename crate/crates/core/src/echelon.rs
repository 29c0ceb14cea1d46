//! Hermite echelon forms for submodules of a free Z_(p)-module with sparse,
//! totally ordered coordinates.
//!
//! Each pivot row has leading coefficient exactly `p^e`. Reduction modulo the
//! submodule walks columns in increasing order; at a pivot column the
//! coefficient is replaced by its integer representative in `[0, p^e)` (so
//! unit pivots clear the column). The reduced vector depends only on the
//! submodule and the column order, never on the insertion history.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::arith::Coefficient;

pub type SparseVec = BTreeMap<u64, Coefficient>;

#[derive(Clone, Debug)]
struct Pivot {
    exponent: u32,
    /// Entries strictly to the right of the pivot column.
    tail: SparseVec,
}

#[derive(Clone, Debug)]
pub struct ZpEchelon {
    p: u64,
    pivots: BTreeMap<u64, Pivot>,
}

pub fn add_scaled(target: &mut SparseVec, factor: &Coefficient, src: &SparseVec) {
    for (&col, c) in src {
        let e = target.entry(col).or_insert_with(Coefficient::zero);
        *e += factor * c;
        if e.is_zero() {
            target.remove(&col);
        }
    }
}

impl ZpEchelon {
    pub fn new(p: u64) -> Self {
        ZpEchelon { p, pivots: BTreeMap::new() }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// `(column, exponent)` for every pivot, in column order.
    pub fn pivot_exponents(&self) -> Vec<(u64, u32)> {
        self.pivots.iter().map(|(&c, pv)| (c, pv.exponent)).collect()
    }

    /// All pivots are units: the submodule is a direct summand.
    pub fn is_saturated(&self) -> bool {
        self.pivots.values().all(|pv| pv.exponent == 0)
    }

    pub fn has_pivot(&self, col: u64) -> bool {
        self.pivots.contains_key(&col)
    }

    fn p_pow(&self, e: u32) -> Coefficient {
        Coefficient::int_pow(self.p, e)
    }

    /// Adds a p-integral row to the generating set.
    pub fn insert(&mut self, mut row: SparseVec) {
        row.retain(|_, c| !c.is_zero());
        while let Some((&col, lead)) = row.iter().next() {
            let lead = lead.clone();
            let v = lead
                .p_valuation(self.p)
                .expect("nonzero leading coefficient") as u32;
            match self.pivots.get(&col) {
                Some(pv) if v >= pv.exponent => {
                    // row -= (lead / p^e) * pivot_row
                    let factor = lead.div_exact(&self.p_pow(pv.exponent));
                    row.remove(&col);
                    let neg = -factor;
                    let tail = pv.tail.clone();
                    add_scaled(&mut row, &neg, &tail);
                }
                Some(_) => {
                    let old = self.pivots.remove(&col).expect("pivot present");
                    self.install(col, v, lead, row);
                    let mut back = old.tail;
                    back.insert(col, self.p_pow(old.exponent));
                    row = back;
                }
                None => {
                    self.install(col, v, lead, row);
                    return;
                }
            }
        }
    }

    fn install(&mut self, col: u64, v: u32, lead: Coefficient, mut row: SparseVec) {
        // divide by the unit part of the leading coefficient
        let unit = lead.div_exact(&self.p_pow(v));
        row.remove(&col);
        for c in row.values_mut() {
            *c = c.div_exact(&unit);
        }
        self.pivots.insert(col, Pivot { exponent: v, tail: row });
    }

    /// Reduces each pivot tail against the later pivots, which keeps later
    /// reductions from cascading.
    pub fn interreduce(&mut self) {
        let cols: Vec<u64> = self.pivots.keys().rev().copied().collect();
        for col in cols {
            let tail = self.pivots[&col].tail.clone();
            let reduced = self.reduce(tail);
            self.pivots.get_mut(&col).expect("pivot present").tail = reduced;
        }
    }

    /// Canonical representative of `x` modulo the submodule.
    pub fn reduce(&self, mut x: SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        while let Some((col, a)) = x.pop_first() {
            if a.is_zero() {
                continue;
            }
            match self.pivots.get(&col) {
                None => {
                    out.insert(col, a);
                }
                Some(pv) => {
                    let r = if pv.exponent == 0 {
                        BigInt::zero()
                    } else {
                        a.residue_mod_prime_power(self.p, pv.exponent)
                    };
                    let r = Coefficient::from_bigint(r);
                    let q = (&a - &r).div_exact(&self.p_pow(pv.exponent));
                    if !q.is_zero() {
                        add_scaled(&mut x, &(-q), &pv.tail);
                    }
                    if !r.is_zero() {
                        out.insert(col, r);
                    }
                }
            }
        }
        out
    }

    pub fn contains(&self, x: &SparseVec) -> bool {
        self.reduce(x.clone()).is_empty()
    }

    /// The pivot rows as full vectors.
    pub fn rows(&self) -> Vec<SparseVec> {
        self.pivots
            .iter()
            .map(|(&c, pv)| {
                let mut r = pv.tail.clone();
                r.insert(c, self.p_pow(pv.exponent));
                r
            })
            .collect()
    }
}

/// Elementary-divisor exponents of the span of `rows` (one per pivot).
pub fn span_profile(p: u64, rows: impl IntoIterator<Item = SparseVec>) -> (usize, Vec<u32>) {
    let mut ech = ZpEchelon::new(p);
    for r in rows {
        ech.insert(r);
    }
    let ex: Vec<u32> = ech.pivot_exponents().into_iter().map(|(_, e)| e).collect();
    (ech.rank(), ex)
}

pub fn unit_vector(col: u64) -> SparseVec {
    let mut v = SparseVec::new();
    v.insert(col, Coefficient::one());
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[(u64, i64)]) -> SparseVec {
        entries.iter().map(|&(c, x)| (c, Coefficient::from_int(x))).collect()
    }

    #[test]
    fn unit_pivot_clears_column() {
        let mut e = ZpEchelon::new(5);
        e.insert(v(&[(0, 3), (1, 6)]));
        // (1,0) = (1/3)(3,6) - 2(0,1): reduces to -2 e_1
        assert_eq!(e.reduce(v(&[(0, 1)])), v(&[(1, -2)]));
    }

    #[test]
    fn non_unit_pivot_keeps_residue() {
        let mut e = ZpEchelon::new(5);
        e.insert(v(&[(0, 5), (1, 1)]));
        // 7 e_0 = 5 e_0 + 2 e_0 -> residue 2 at col 0, minus e_1
        assert_eq!(e.reduce(v(&[(0, 7)])), v(&[(0, 2), (1, -1)]));
        assert!(e.contains(&v(&[(0, 10), (1, 2)])));
        assert!(!e.contains(&v(&[(0, 1)])));
    }

    #[test]
    fn smaller_valuation_displaces_pivot() {
        let mut e = ZpEchelon::new(5);
        e.insert(v(&[(0, 25)]));
        e.insert(v(&[(0, 5), (1, 1)]));
        // span: 25 e0, 5 e0 + e1  => pivots (0, 5) and (1, ±5)
        assert_eq!(e.rank(), 2);
        assert_eq!(e.pivot_exponents(), vec![(0, 1), (1, 1)]);
    }

    #[test]
    fn reduction_is_independent_of_insertion_order() {
        let rows = vec![
            v(&[(0, 2), (2, 5), (3, 1)]),
            v(&[(1, 5), (2, 1)]),
            v(&[(0, 10), (1, 25), (3, 7)]),
            v(&[(2, 25), (3, 5)]),
        ];
        let probe = v(&[(0, 3), (1, 4), (2, 9), (3, 11)]);
        let mut reference = None;
        for perm in [[0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]] {
            let mut e = ZpEchelon::new(5);
            for i in perm {
                e.insert(rows[i].clone());
            }
            let r1 = e.reduce(probe.clone());
            e.interreduce();
            assert_eq!(e.reduce(probe.clone()), r1);
            match &reference {
                None => reference = Some(r1),
                Some(r) => assert_eq!(r, &r1),
            }
        }
    }
}
