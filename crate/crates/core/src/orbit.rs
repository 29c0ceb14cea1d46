//! Orbits of GSp_{2n}(Z), of the congruence kernels K_{R,I} over a DVR, and
//! of K_M on V/N, in closed form, together with brute-force oracles.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::arith::{crt_combine, factorize, gcd, valuation};
use crate::cosets::{CompactOpenSet, ElementaryCoset};
use crate::error::{Error, Result};
use crate::matrix::ZMatrix;
use crate::residue::{Coords, ResidueVector};
use crate::symplectic::{generators_mod_n, kernel_generators, CongruenceSubgroup, FiniteLevelElement};

/// Row operations on a vector and an accumulated witness matrix.
struct Reducer {
    n: usize,
    v: Vec<BigInt>,
    w: Vec<Vec<BigInt>>,
}

impl Reducer {
    /// `row_dst += x · row_src`.
    fn add_row(&mut self, dst: usize, src: usize, x: &BigInt) {
        if x.is_zero() {
            return;
        }
        let t = &self.v[src] * x;
        self.v[dst] += t;
        let src_row = self.w[src].clone();
        for (a, b) in self.w[dst].iter_mut().zip(&src_row) {
            *a += b * x;
        }
    }

    /// Long root element in the `(i, n+i)` plane: `up` adds to coordinate i.
    fn long(&mut self, i: usize, up: bool, x: &BigInt) {
        let n = self.n;
        if up {
            self.add_row(i, n + i, x);
        } else {
            self.add_row(n + i, i, x);
        }
    }

    /// `diag(A, (Aᵗ)^{-1})` with `A = I + x E_{ij}`.
    fn short(&mut self, i: usize, j: usize, x: &BigInt) {
        let n = self.n;
        self.add_row(i, j, x);
        self.add_row(n + j, n + i, &-x);
    }

    fn negate_plane(&mut self, i: usize) {
        let n = self.n;
        for r in [i, n + i] {
            self.v[r] = -std::mem::take(&mut self.v[r]);
            for a in self.w[r].iter_mut() {
                *a = -std::mem::take(a);
            }
        }
    }

    /// Euclid on coordinates `(a, b)` with `op(true, x)` doing `a += x b` and
    /// `op(false, x)` doing `b += x a`; ends with `b = 0`.
    fn euclid(&mut self, a: usize, b: usize, op: &dyn Fn(&mut Self, bool, &BigInt)) {
        loop {
            if self.v[b].is_zero() {
                return;
            }
            let q = self.v[a].div_floor(&self.v[b]);
            op(self, true, &-q);
            if self.v[a].is_zero() {
                op(self, true, &BigInt::from(1));
                op(self, false, &BigInt::from(-1));
                return;
            }
            let q = self.v[b].div_floor(&self.v[a]);
            op(self, false, &-q);
        }
    }
}

/// `witness · v = alpha · e_1` with `alpha = gcd(v) ≥ 0` and `witness` a
/// product of root elements of Sp_{2n}(Z).
pub fn euclidean_reduce(v: &[i64]) -> Result<(BigInt, ZMatrix)> {
    let d = v.len();
    if d == 0 || d % 2 != 0 {
        return Err(Error::Dimension(format!("vector of length {d}")));
    }
    let n = d / 2;
    let mut w = vec![vec![BigInt::zero(); d]; d];
    for (i, row) in w.iter_mut().enumerate() {
        row[i] = BigInt::from(1);
    }
    let mut r = Reducer { n, v: v.iter().map(|&x| BigInt::from(x)).collect(), w };
    for i in 0..n {
        r.euclid(i, n + i, &|r: &mut Reducer, up, x| r.long(i, up, x));
    }
    for j in 1..n {
        r.euclid(0, j, &|r: &mut Reducer, first, x| {
            if first {
                r.short(0, j, x)
            } else {
                r.short(j, 0, x)
            }
        });
    }
    if r.v[0].is_negative() {
        r.negate_plane(0);
    }
    let mut m = ZMatrix::zero(d, d);
    for (i, row) in r.w.into_iter().enumerate() {
        for (j, x) in row.into_iter().enumerate() {
            m.set(i, j, x);
        }
    }
    Ok((r.v[0].clone(), m))
}

/// `K_{R,I} v + J V_R` over `R = Z_ℓ`, with `I = ℓ^i`, `J = ℓ^j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrbitDescriptor {
    /// `ℓ^e V ∖ ℓ^{e+1} V`, where `ℓ^e` generates `I_v`.
    Sphere { ell: u64, exponent: u32 },
    /// `base + ℓ^exponent V`.
    Coset { ell: u64, base: Vec<i64>, exponent: u32 },
}

impl OrbitDescriptor {
    /// The residues mod `ℓ^j` making up the set, `j` at least the
    /// descriptor's own precision.
    pub fn residues(&self, dim: usize, j: u32) -> BTreeSet<ResidueVector> {
        match self {
            OrbitDescriptor::Sphere { ell, exponent } => {
                let q = ell.pow(j);
                ResidueVector::all(q, dim)
                    .filter(|x| !x.is_zero() && valuation(x.content(), *ell) == *exponent)
                    .collect()
            }
            OrbitDescriptor::Coset { ell, base, exponent } => {
                let q = ell.pow(j);
                let e = (*exponent).min(j);
                let b = ResidueVector::new(ell.pow(e), base).expect("even dimension");
                b.fibre(ell.pow(j - e)).into_iter().map(|x| x.lift_into(q)).collect()
            }
        }
    }
}

fn ell_valuation_of_vector(v: &[i64], ell: u64) -> Option<u32> {
    let g = v.iter().fold(0u64, |g, &x| gcd(g, x.unsigned_abs()));
    (g != 0).then(|| valuation(g, ell))
}

/// The two-case description of `K_{R,I} v + J V_R`.
pub fn local_orbit(v: &[i64], ell: u64, i: u32, j: u32) -> OrbitDescriptor {
    let dv = ell_valuation_of_vector(v, ell);
    match dv {
        Some(e) if i == 0 && e < j => OrbitDescriptor::Sphere { ell, exponent: e },
        _ => {
            // J + I·I_v
            let exponent = match dv {
                Some(e) => j.min(i + e),
                None => j,
            };
            let q = ell.pow(exponent) as i64;
            let base = v.iter().map(|&x| x.rem_euclid(q.max(1))).collect();
            OrbitDescriptor::Coset { ell, base, exponent }
        }
    }
}

/// `K_M v + N V_Ẑ` as a set of residues mod N, assembled prime by prime.
pub fn global_orbit_set(v: &[i64], m: u64, n: u64) -> Result<CompactOpenSet> {
    let dim = v.len();
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Dimension(format!("vector of length {dim}")));
    }
    if m == 0 || n % m != 0 {
        return Err(Error::ModulusMismatch(format!("{m} does not divide {n}")));
    }
    let mut local: Vec<(u64, Vec<ResidueVector>)> = Vec::new();
    for (ell, e) in factorize(n) {
        let q = ell.pow(e);
        let desc = local_orbit(v, ell, valuation(m, ell), e);
        local.push((q, desc.residues(dim, e).into_iter().collect()));
    }
    let mut out: Vec<ResidueVector> = vec![ResidueVector::zero(dim, 1)];
    let mut modulus = 1u64;
    for (q, set) in local {
        let mut next = Vec::with_capacity(out.len() * set.len());
        for x in &out {
            for y in &set {
                let coords: Coords = (0..dim)
                    .map(|k| {
                        crt_combine(&[(x.coords()[k] as i64, modulus), (y.coords()[k] as i64, q)])
                            .expect("coprime")
                            .0
                    })
                    .collect();
                next.push(ResidueVector::from_reduced(modulus * q, coords));
            }
        }
        out = next;
        modulus *= q;
    }
    CompactOpenSet::from_residues(dim, 1, n, out)
}

/// `K_M v + N V_Ẑ` written as a signed sum of single cosets `w + B V_Ẑ`
/// with `B | N`, by expanding each sphere as a difference of lattices.
pub fn sphere_difference_decomposition(v: &[i64], m: u64, n: u64) -> Result<Vec<(i8, ElementaryCoset)>> {
    let dim = v.len();
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Dimension(format!("vector of length {dim}")));
    }
    if m == 0 || n % m != 0 {
        return Err(Error::ModulusMismatch(format!("{m} does not divide {n}")));
    }
    // per prime: either a sphere (two alternatives) or a fixed coset
    enum Local {
        Sphere { ell: u64, e: u32 },
        Coset { q: u64, base: Vec<i64> },
    }
    let mut parts = Vec::new();
    for (ell, e) in factorize(n) {
        match local_orbit(v, ell, valuation(m, ell), e) {
            OrbitDescriptor::Sphere { ell, exponent } => parts.push(Local::Sphere { ell, e: exponent }),
            OrbitDescriptor::Coset { ell, base, exponent } => {
                parts.push(Local::Coset { q: ell.pow(exponent), base })
            }
        }
    }
    let spheres = parts.iter().filter(|p| matches!(p, Local::Sphere { .. })).count();
    let mut out = Vec::new();
    for mask in 0u32..(1 << spheres) {
        let mut sign = 1i8;
        let mut comps: Vec<(Vec<i64>, u64)> = Vec::new();
        let mut s = 0;
        for p in &parts {
            match p {
                Local::Sphere { ell, e } => {
                    let deeper = mask >> s & 1 == 1;
                    s += 1;
                    if deeper {
                        sign = -sign;
                    }
                    let q = ell.pow(e + deeper as u32);
                    comps.push((vec![0; dim], q));
                }
                Local::Coset { q, base } => comps.push((base.clone(), *q)),
            }
        }
        let b: u64 = comps.iter().map(|(_, q)| q).product();
        let coords: Vec<i64> = (0..dim)
            .map(|k| {
                let parts: Vec<(i64, u64)> = comps.iter().map(|(w, q)| (w[k], *q)).collect();
                crt_combine(&parts).expect("coprime").0 as i64
            })
            .collect();
        out.push((sign, ElementaryCoset::new(1, ResidueVector::new(b, &coords)?)?));
    }
    Ok(out)
}

/// Orbit of `v` under the group generated by `gens`, by breadth-first search.
pub fn orbit_bfs_oracle(v: &ResidueVector, gens: &[FiniteLevelElement]) -> Result<BTreeSet<ResidueVector>> {
    for g in gens {
        if g.level() % v.modulus() != 0 || g.genus() != v.genus() {
            return Err(Error::ModulusMismatch(format!(
                "generator at level {} against vector mod {}",
                g.level(),
                v.modulus()
            )));
        }
    }
    let mut seen = BTreeSet::from([v.clone()]);
    let mut queue = VecDeque::from([v.clone()]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = g.apply(&x);
            if seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    Ok(seen)
}

/// Orbit labels of every residue mod N under `gens` (labels index the
/// smallest member's orbit in index order).
pub fn orbit_partition(dim: usize, level: u64, gens: &[FiniteLevelElement]) -> Vec<u32> {
    let count = ResidueVector::count(level, dim) as usize;
    let mut label = vec![u32::MAX; count];
    let mut next = 0u32;
    for start in 0..count {
        if label[start] != u32::MAX {
            continue;
        }
        label[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let x = ResidueVector::from_index(i as u64, level, dim);
            for g in gens {
                let j = g.apply(&x).index() as usize;
                if label[j] == u32::MAX {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Generators of the image of K_M in GSp(Z/N).
pub fn principal_generators(genus: usize, m: u64, n: u64) -> Result<Vec<FiniteLevelElement>> {
    if m == 1 {
        Ok(generators_mod_n(genus, n))
    } else {
        kernel_generators(genus, n, m)
    }
}

/// Splits a `K`-invariant set into `K`-orbits, each with its smallest
/// residue as base point.
pub fn invariant_set_to_orbit_sum(
    c: &CompactOpenSet,
    k: &CongruenceSubgroup,
    n: u64,
) -> Result<Vec<(ResidueVector, CompactOpenSet)>> {
    let level = crate::arith::lcm(crate::arith::lcm(n, c.level()), k.level());
    let c = c.refine(level)?;
    let k = k.at_level(level)?;
    let residues = c.residue_set();
    let gens = k.generators();
    let mut done: BTreeSet<ResidueVector> = BTreeSet::new();
    let mut out = Vec::new();
    for v in &residues {
        if done.contains(v) {
            continue;
        }
        let orbit = orbit_bfs_oracle(v, gens)?;
        if !orbit.is_subset(&residues) {
            return Err(Error::NotInvariant(format!("orbit of {v:?} leaves the set")));
        }
        done.extend(orbit.iter().cloned());
        out.push((v.clone(), CompactOpenSet::from_residues(c.dim(), c.scale(), level, orbit)?));
    }
    Ok(out)
}

/// Residues mod N fixed by every element of K_M.
pub fn fixed_vectors(genus: usize, m: u64, n: u64) -> Result<BTreeSet<ResidueVector>> {
    let gens = principal_generators(genus, m, n)?;
    Ok(ResidueVector::all(n, 2 * genus)
        .filter(|v| gens.iter().all(|g| g.apply(v) == *v))
        .collect())
}

/// Groups residues by orbit label.
pub fn orbits_from_partition(dim: usize, level: u64, labels: &[u32]) -> BTreeMap<u32, Vec<ResidueVector>> {
    let mut out: BTreeMap<u32, Vec<ResidueVector>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        out.entry(l).or_default().push(ResidueVector::from_index(i as u64, level, dim));
    }
    out
}

/// Closed form against oracle for every `v mod N` and every `M | N`;
/// returns the number of (v, M) pairs compared.
pub fn verify_closed_form(genus: usize, n: u64) -> Result<usize> {
    let dim = 2 * genus;
    let mut checked = 0;
    for m in crate::arith::divisors(n) {
        let gens = principal_generators(genus, m, n)?;
        let labels = orbit_partition(dim, n, &gens);
        let orbits = orbits_from_partition(dim, n, &labels);
        let mut cache: HashMap<u32, BTreeSet<ResidueVector>> = HashMap::new();
        for v in ResidueVector::all(n, dim) {
            let lab = labels[v.index() as usize];
            let want = cache
                .entry(lab)
                .or_insert_with(|| orbits[&lab].iter().cloned().collect());
            let coords: Vec<i64> = v.coords().iter().map(|&x| x as i64).collect();
            let got = global_orbit_set(&coords, m, n)?;
            if got.residue_set() != *want {
                return Err(Error::Precondition(format!(
                    "orbit of {v:?} under K_{m} at level {n}: closed form {} residues, oracle {}",
                    got.len(),
                    want.len()
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::is_symplectic_similitude;

    fn rv(m: u64, c: &[i64]) -> ResidueVector {
        ResidueVector::new(m, c).unwrap()
    }

    fn check_reduce(v: &[i64]) -> BigInt {
        let (alpha, w) = euclidean_reduce(v).unwrap();
        let vb: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
        let out = w.apply(&vb);
        assert_eq!(out[0], alpha);
        assert!(out[1..].iter().all(|x| x.is_zero()));
        let (ok, c) = is_symplectic_similitude(&w.to_q()).unwrap();
        assert!(ok && c.unwrap() == num_rational::BigRational::from_integer(1.into()));
        alpha
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(check_reduce(&[4, 6]), BigInt::from(2));
        assert_eq!(check_reduce(&[0, 5, 0, 3]), BigInt::from(1));
        let (alpha, w) = euclidean_reduce(&[0, 0]).unwrap();
        assert!(alpha.is_zero());
        assert_eq!(w, ZMatrix::identity(2));
        assert_eq!(check_reduce(&[-6, 0, 0, -9]), BigInt::from(3));
        assert_eq!(check_reduce(&[0, -7]), BigInt::from(7));
    }

    #[test]
    fn local_orbit_examples() {
        let d = local_orbit(&[1, 0], 3, 1, 3);
        assert_eq!(d, OrbitDescriptor::Coset { ell: 3, base: vec![1, 0], exponent: 1 });
        let gens = kernel_generators(1, 27, 3).unwrap();
        let bfs = orbit_bfs_oracle(&rv(27, &[1, 0]), &gens).unwrap();
        assert_eq!(bfs.len(), 81);
        assert_eq!(d.residues(2, 3), bfs);

        let d = local_orbit(&[3, 0], 3, 0, 2);
        assert_eq!(d, OrbitDescriptor::Sphere { ell: 3, exponent: 1 });
        let bfs = orbit_bfs_oracle(&rv(9, &[3, 0]), &generators_mod_n(1, 9)).unwrap();
        assert_eq!(bfs.len(), 8);
        assert_eq!(d.residues(2, 2), bfs);

        let d = local_orbit(&[1, 0], 3, 0, 1);
        assert_eq!(d.residues(2, 1).len(), 8);
    }

    #[test]
    fn local_case_split_matches_bfs() {
        for (ell, j) in [(3u64, 2u32), (2, 3)] {
            let q = ell.pow(j);
            for i in 0..=j {
                let gens = if i == 0 {
                    generators_mod_n(1, q)
                } else {
                    kernel_generators(1, q, ell.pow(i)).unwrap()
                };
                for v in ResidueVector::all(q, 2) {
                    let coords: Vec<i64> = v.coords().iter().map(|&x| x as i64).collect();
                    let d = local_orbit(&coords, ell, i, j);
                    assert_eq!(d.residues(2, j), orbit_bfs_oracle(&v, &gens).unwrap(), "{v:?} i={i}");
                }
            }
        }
    }

    #[test]
    fn global_examples() {
        let s = global_orbit_set(&[1, 0], 1, 3).unwrap();
        assert_eq!(s.len(), 8);
        let s = global_orbit_set(&[1, 0], 3, 9).unwrap();
        assert_eq!(s.len(), 9);
        let s = global_orbit_set(&[3, 0], 3, 9).unwrap();
        assert_eq!(s.residue_set(), BTreeSet::from([rv(9, &[3, 0])]));
        assert_eq!(global_orbit_set(&[0, 0], 3, 9).unwrap().len(), 1);
    }

    #[test]
    fn closed_form_small_levels() {
        assert_eq!(verify_closed_form(1, 9).unwrap(), 81 * 3);
        assert_eq!(verify_closed_form(1, 21).unwrap(), 441 * 4);
        assert_eq!(verify_closed_form(2, 3).unwrap(), 81 * 2);
    }

    #[test]
    fn oracle_examples() {
        let full = generators_mod_n(1, 3);
        assert_eq!(orbit_bfs_oracle(&rv(3, &[1, 0]), &full).unwrap().len(), 8);
        assert_eq!(orbit_bfs_oracle(&rv(3, &[1, 2]), &[]).unwrap().len(), 1);
        assert_eq!(orbit_bfs_oracle(&rv(9, &[0, 0]), &generators_mod_n(1, 9)).unwrap().len(), 1);
    }

    fn signed_count(pieces: &[(i8, ElementaryCoset)], n: u64) -> BTreeMap<ResidueVector, i64> {
        let mut acc: BTreeMap<ResidueVector, i64> = BTreeMap::new();
        for (s, c) in pieces {
            for r in c.to_set().refine(n).unwrap().residues() {
                *acc.entry(r.clone()).or_default() += *s as i64;
            }
        }
        acc.retain(|_, x| *x != 0);
        acc
    }

    #[test]
    fn sphere_decomposition_examples() {
        let p = sphere_difference_decomposition(&[1, 0], 1, 3).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].0, p[0].1.level()), (1, 1));
        assert_eq!((p[1].0, p[1].1.level(), p[1].1.contains_zero()), (-1, 3, true));
        let p = sphere_difference_decomposition(&[1, 0], 3, 9).unwrap();
        assert_eq!(p, vec![(1, ElementaryCoset::new(1, rv(3, &[1, 0])).unwrap())]);
        let p = sphere_difference_decomposition(&[3, 0], 1, 9).unwrap();
        assert_eq!(p.iter().map(|(s, c)| (*s, c.level())).collect::<Vec<_>>(), vec![(1, 3), (-1, 9)]);
    }

    #[test]
    fn sphere_decomposition_sums_to_orbit() {
        for n in [9u64, 21, 63] {
            for m in crate::arith::divisors(n) {
                for v in ResidueVector::all(n, 2).step_by(7) {
                    let coords: Vec<i64> = v.coords().iter().map(|&x| x as i64).collect();
                    let pieces = sphere_difference_decomposition(&coords, m, n).unwrap();
                    let want: BTreeMap<ResidueVector, i64> = global_orbit_set(&coords, m, n)
                        .unwrap()
                        .residues()
                        .map(|r| (r.clone(), 1))
                        .collect();
                    assert_eq!(signed_count(&pieces, n), want);
                }
            }
        }
    }

    #[test]
    fn orbit_sum_examples() {
        let full = CongruenceSubgroup::full(1, 3);
        let nonzero =
            CompactOpenSet::from_residues(2, 1, 3, ResidueVector::all(3, 2).filter(|v| !v.is_zero())).unwrap();
        let parts = invariant_set_to_orbit_sum(&nonzero, &full, 3).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].0, rv(3, &[0, 1]));

        let k9 = CongruenceSubgroup::principal(1, 9, 9).unwrap();
        let single = CompactOpenSet::from_residues(2, 1, 9, [rv(9, &[1, 0]), rv(9, &[2, 2])]).unwrap();
        assert_eq!(invariant_set_to_orbit_sum(&single, &k9, 9).unwrap().len(), 2);

        let full9 = CongruenceSubgroup::full(1, 9);
        let c = CompactOpenSet::from_residues(2, 1, 9, ResidueVector::all(9, 2).filter(|v| !v.is_zero())).unwrap();
        let parts = invariant_set_to_orbit_sum(&c, &full9, 9).unwrap();
        assert_eq!(parts.len(), 2);
        let one = CompactOpenSet::from_residues(2, 1, 3, [rv(3, &[1, 0])]).unwrap();
        assert!(matches!(invariant_set_to_orbit_sum(&one, &full, 3), Err(Error::NotInvariant(_))));
    }

    #[test]
    fn fixed_point_remark() {
        let fixed = fixed_vectors(1, 3, 9).unwrap();
        let want: BTreeSet<ResidueVector> = ResidueVector::all(9, 2).filter(|v| v.content() % 3 == 0).collect();
        assert_eq!(fixed, want);
        assert_eq!(fixed.len(), 9);
    }
}
