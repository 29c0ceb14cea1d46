//! Explicit generating sets for GSp_{2n}(Z/N) and for kernels of reduction,
//! together with the order formulas they are tested against.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigUint;
use num_traits::One;
use smallvec::SmallVec;

use super::element::{crt_element, Entries, FiniteLevelElement};
use crate::arith::{factorize, gcd, valuation};
use crate::error::{Error, Result};

/// `I + x·E_{ij}` style elements from a list of `(row, col, value)` edits to
/// the identity, reduced mod `q`.
fn elementary(dim: usize, q: u64, edits: &[(usize, usize, i64)]) -> FiniteLevelElement {
    let mut e: Entries = SmallVec::from_elem(0, dim * dim);
    for i in 0..dim {
        e[i * dim + i] = (1 % q) as u32;
    }
    for &(i, j, x) in edits {
        let cur = e[i * dim + j] as i64;
        e[i * dim + j] = (cur + x).rem_euclid(q as i64) as u32;
    }
    FiniteLevelElement::from_entries_unchecked(q, dim, e)
}

/// Root elements `x_α(x)` for every root of Sp_{2n}.
pub fn root_elements(genus: usize, q: u64, x: i64) -> Vec<FiniteLevelElement> {
    let n = genus;
    let d = 2 * n;
    let mut out = Vec::new();
    for i in 0..n {
        out.push(elementary(d, q, &[(i, n + i, x)]));
        out.push(elementary(d, q, &[(n + i, i, x)]));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                // diag(A, A^{-t}) with A = I + x E_ij
                out.push(elementary(d, q, &[(i, j, x), (n + j, n + i, -x)]));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(elementary(d, q, &[(i, n + j, x), (j, n + i, x)]));
            out.push(elementary(d, q, &[(n + i, j, x), (n + j, i, x)]));
        }
    }
    out
}

/// The symplectic Weyl element on the plane (e_i, e_{n+i}):
/// `e_i ↦ -e_{n+i}`, `e_{n+i} ↦ e_i`.
pub fn weyl_swap(genus: usize, q: u64, i: usize) -> FiniteLevelElement {
    let n = genus;
    elementary(2 * n, q, &[(i, i, -1), (n + i, n + i, -1), (i, n + i, 1), (n + i, i, -1)])
}

/// `diag(1,…,1, λ,…,λ)`, similitude λ.
pub fn similitude_diagonal(genus: usize, q: u64, lambda: u64) -> FiniteLevelElement {
    let n = genus;
    let edits: Vec<(usize, usize, i64)> =
        (0..n).map(|i| (n + i, n + i, lambda as i64 - 1)).collect();
    elementary(2 * n, q, &edits)
}

/// `diag(…, t at i, …, t^{-1} at n+i, …)`.
pub fn torus_element(genus: usize, q: u64, i: usize, t: u64) -> FiniteLevelElement {
    let n = genus;
    let tinv = crate::arith::mod_inverse(t % q, q).expect("torus parameter must be a unit");
    elementary(
        2 * n,
        q,
        &[(i, i, t as i64 - 1), (n + i, n + i, tinv as i64 - 1)],
    )
}

/// A generating set of `{u ∈ (Z/q)^× : u ≡ 1 mod ℓ^b}`, found greedily.
fn unit_subgroup_generators(q: u64, modulus_b: u64) -> Vec<u64> {
    let members: Vec<u64> = (1..q.max(2))
        .filter(|&u| gcd(u, q) == 1 && (u % modulus_b.max(1)) == 1 % modulus_b.max(1))
        .collect();
    let mut gens = Vec::new();
    let mut span: HashSet<u64> = HashSet::from([1 % q]);
    for &u in &members {
        if span.contains(&u) {
            continue;
        }
        gens.push(u);
        // close the span under multiplication by the current generators
        let mut queue: VecDeque<u64> = span.iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            for &g in &gens {
                let y = x * g % q;
                if span.insert(y) {
                    queue.push_back(y);
                }
            }
        }
    }
    gens
}

/// Generators of the kernel of GSp_{2n}(Z/ℓ^a) → GSp_{2n}(Z/ℓ^b); `b = 0`
/// gives the whole group, `b >= a` gives nothing.
fn local_generators(genus: usize, l: u64, a: u32, b: u32) -> Vec<FiniteLevelElement> {
    let q = l.pow(a);
    if b >= a {
        return Vec::new();
    }
    let mut out = Vec::new();
    if b == 0 {
        out.extend(root_elements(genus, q, 1));
        for i in 0..genus {
            out.push(weyl_swap(genus, q, i));
        }
        for lam in unit_subgroup_generators(q, 1) {
            out.push(similitude_diagonal(genus, q, lam));
        }
    } else {
        let lb = l.pow(b);
        out.extend(root_elements(genus, q, lb as i64));
        for t in unit_subgroup_generators(q, lb) {
            for i in 0..genus {
                out.push(torus_element(genus, q, i, t));
            }
            out.push(similitude_diagonal(genus, q, t));
        }
    }
    out.retain(|g| !g.is_identity());
    out
}

/// Embeds an element mod `q` (a prime power exactly dividing `level`) into
/// level `level`, trivial at the other primes.
fn embed(level: u64, q: u64, g: &FiniteLevelElement) -> FiniteLevelElement {
    if q == level {
        return g.clone();
    }
    let rest = level / q;
    let id = FiniteLevelElement::identity(g.genus(), rest);
    crt_element(g.dim(), &[(q, g.clone()), (rest, id)])
}

/// Generators of `ker(GSp_{2n}(Z/N) → GSp_{2n}(Z/M))` for `M | N`.
pub fn kernel_generators(genus: usize, level: u64, m: u64) -> Result<Vec<FiniteLevelElement>> {
    if m == 0 || level % m != 0 {
        return Err(Error::ModulusMismatch(format!("{m} does not divide {level}")));
    }
    let mut out = Vec::new();
    for (l, a) in factorize(level) {
        let b = if m % l == 0 { valuation(m, l) } else { 0 };
        let q = l.pow(a);
        for g in local_generators(genus, l, a, b) {
            out.push(embed(level, q, &g));
        }
    }
    Ok(out)
}

/// A generating set of GSp_{2n}(Z/N).
pub fn generators_mod_n(genus: usize, level: u64) -> Vec<FiniteLevelElement> {
    kernel_generators(genus, level, 1).expect("1 divides every level")
}

/// `|GSp_{2n}(Z/N)|`.
pub fn gsp_order(genus: usize, level: u64) -> BigUint {
    let n = genus as u32;
    let mut total = BigUint::one();
    for (l, a) in factorize(level) {
        let lb = BigUint::from(l);
        let mut f = BigUint::from(l - 1) * lb.pow(n * n);
        for i in 1..=n {
            f *= lb.pow(2 * i) - BigUint::one();
        }
        f *= lb.pow((a - 1) * (2 * n * n + n + 1));
        total *= f;
    }
    total
}

/// `|ker(GSp_{2n}(Z/N) → GSp_{2n}(Z/M))|`.
pub fn kernel_order(genus: usize, level: u64, m: u64) -> BigUint {
    gsp_order(genus, level) / gsp_order(genus, m)
}

/// The closure of a generating set, with a Schreier tree: `parent[i]` is
/// `(j, s)` such that `elements[i] = gens[s] · elements[j]`.
pub struct Closure {
    pub elements: Vec<FiniteLevelElement>,
    pub index: HashMap<FiniteLevelElement, usize>,
    pub parent: Vec<Option<(usize, usize)>>,
}

impl Closure {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, g: &FiniteLevelElement) -> bool {
        self.index.contains_key(g)
    }

    /// Generator indices `s_1, …, s_r` with `g = gens[s_1] ⋯ gens[s_r]`.
    pub fn word(&self, g: &FiniteLevelElement) -> Option<Vec<usize>> {
        let mut i = *self.index.get(g)?;
        let mut w = Vec::new();
        while let Some((j, s)) = self.parent[i] {
            w.push(s);
            i = j;
        }
        Some(w)
    }
}

/// Breadth-first closure; errors once more than `limit` elements appear.
pub fn closure(
    genus: usize,
    level: u64,
    gens: &[FiniteLevelElement],
    limit: usize,
) -> Result<Closure> {
    let id = FiniteLevelElement::identity(genus, level);
    let mut elements = vec![id.clone()];
    let mut index = HashMap::from([(id, 0usize)]);
    let mut parent = vec![None];
    let mut head = 0;
    while head < elements.len() {
        let x = elements[head].clone();
        for (s, g) in gens.iter().enumerate() {
            let y = g.mul(&x);
            if !index.contains_key(&y) {
                if elements.len() >= limit {
                    return Err(Error::Precondition(format!(
                        "group closure at level {level} exceeds {limit} elements"
                    )));
                }
                index.insert(y.clone(), elements.len());
                elements.push(y);
                parent.push(Some((head, s)));
            }
        }
        head += 1;
    }
    Ok(Closure { elements, index, parent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::ResidueVector;

    fn closure_len(genus: usize, level: u64, gens: &[FiniteLevelElement]) -> usize {
        closure(genus, level, gens, 1 << 22).unwrap().len()
    }

    #[test]
    fn generators_are_similitudes() {
        for (n, level) in [(1, 9), (1, 63), (2, 9), (2, 21), (3, 4)] {
            for g in generators_mod_n(n, level) {
                FiniteLevelElement::new(n, level, &g.rows()).unwrap();
            }
        }
    }

    #[test]
    fn full_group_orders() {
        assert_eq!(closure_len(1, 3, &generators_mod_n(1, 3)), 48);
        assert_eq!(closure_len(1, 2, &generators_mod_n(1, 2)), 6);
        assert_eq!(gsp_order(1, 3), BigUint::from(48u32));
        for level in [4u64, 5, 8, 9, 12, 21] {
            assert_eq!(
                BigUint::from(closure_len(1, level, &generators_mod_n(1, level))),
                gsp_order(1, level),
                "level {level}"
            );
        }
        assert_eq!(gsp_order(2, 3), BigUint::from(103680u32));
    }

    #[test]
    fn genus_two_transitive_mod_two() {
        let gens = generators_mod_n(2, 2);
        let start = ResidueVector::new(2, &[1, 0, 0, 0]).unwrap();
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = vec![start];
        while let Some(v) = queue.pop() {
            for g in &gens {
                let w = g.apply(&v);
                if seen.insert(w.clone()) {
                    queue.push(w);
                }
            }
        }
        assert_eq!(seen.len(), 15);
    }

    #[test]
    fn kernel_orders() {
        // |ker(GL2(Z/9) -> GL2(Z/3))| = 3^4
        let k = kernel_generators(1, 9, 3).unwrap();
        assert_eq!(closure_len(1, 9, &k), 81);
        assert_eq!(kernel_order(1, 9, 3), BigUint::from(81u32));
        assert_eq!(closure_len(1, 63, &kernel_generators(1, 63, 21).unwrap()), 81);
        assert_eq!(closure_len(1, 21, &kernel_generators(1, 21, 3).unwrap()), 2016);
        assert_eq!(closure_len(1, 16, &kernel_generators(1, 16, 2).unwrap()), 4096);
        assert_eq!(
            BigUint::from(closure_len(1, 16, &kernel_generators(1, 16, 2).unwrap())),
            kernel_order(1, 16, 2)
        );
        // genus 2, ℓ = 3: ℓ^(2n²+n+1) = 3^11
        assert_eq!(kernel_order(2, 9, 3), BigUint::from(3u32).pow(11));
    }

    #[test]
    fn reduction_is_surjective() {
        let big = closure(1, 9, &generators_mod_n(1, 9), 1 << 20).unwrap();
        let images: HashSet<_> = big.elements.iter().map(|g| g.reduce(3).unwrap()).collect();
        assert_eq!(images.len(), 48);
    }

    #[test]
    fn schreier_words_evaluate() {
        let gens = generators_mod_n(1, 7);
        let c = closure(1, 7, &gens, 1 << 20).unwrap();
        for g in c.elements.iter().step_by(97) {
            let w = c.word(g).unwrap();
            let mut x = FiniteLevelElement::identity(1, 7);
            for &s in w.iter().rev() {
                x = gens[s].mul(&x);
            }
            assert_eq!(&x, g);
        }
    }
}
