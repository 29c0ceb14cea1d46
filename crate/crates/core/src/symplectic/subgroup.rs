//! Congruence subgroups, always represented by their image in GSp_{2n}(Z/N)
//! at an explicit level N; the profinite subgroup is the full preimage.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::element::FiniteLevelElement;
use super::generators::{
    closure, generators_mod_n, gsp_order, kernel_generators, kernel_order, root_elements,
    similitude_diagonal, Closure,
};
use crate::arith::{crt_combine, factorize, gcd, mod_inverse};
use crate::error::{Error, Result};
use crate::residue::ResidueVector;

/// Largest closure the engine will enumerate.
pub const CLOSURE_LIMIT: usize = 1 << 21;

pub type CosetKey = Vec<u64>;

#[derive(Clone)]
pub enum SubgroupKind {
    /// K_M, the kernel of reduction mod M.
    Principal(u64),
    /// GSp(Ẑ).
    Full,
    /// Elements of `parent` fixing a vector whose modulus divides the level.
    Stabilizer { parent: CongruenceSubgroup, vector: ResidueVector },
    /// `left ∩ γ·right·γ^{-1}`.
    Intersection { left: CongruenceSubgroup, right: CongruenceSubgroup, gamma: FiniteLevelElement },
    /// `γ·inner·γ^{-1}`.
    Conjugate { inner: CongruenceSubgroup, gamma: FiniteLevelElement },
    /// Preimage of the group generated by explicit elements.
    Generated(Vec<FiniteLevelElement>),
}

struct Inner {
    genus: usize,
    level: u64,
    kind: SubgroupKind,
    generators: OnceLock<Vec<FiniteLevelElement>>,
    closure: OnceLock<std::result::Result<Arc<Closure>, Error>>,
}

#[derive(Clone)]
pub struct CongruenceSubgroup(Arc<Inner>);

impl fmt::Debug for CongruenceSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl CongruenceSubgroup {
    fn make(genus: usize, level: u64, kind: SubgroupKind) -> Self {
        CongruenceSubgroup(Arc::new(Inner {
            genus,
            level,
            kind,
            generators: OnceLock::new(),
            closure: OnceLock::new(),
        }))
    }

    /// K_M anchored at level N (`M | N`).
    pub fn principal(genus: usize, m: u64, level: u64) -> Result<Self> {
        if m == 0 || level % m != 0 {
            return Err(Error::ModulusMismatch(format!("K_{m} cannot be anchored at level {level}")));
        }
        Ok(Self::make(genus, level, SubgroupKind::Principal(m)))
    }

    pub fn full(genus: usize, level: u64) -> Self {
        Self::make(genus, level, SubgroupKind::Full)
    }

    pub fn generated(genus: usize, level: u64, gens: Vec<FiniteLevelElement>) -> Result<Self> {
        for g in &gens {
            if g.level() != level || g.genus() != genus {
                return Err(Error::ModulusMismatch(format!(
                    "generator {g:?} does not live at level {level}, genus {genus}"
                )));
            }
        }
        Ok(Self::make(genus, level, SubgroupKind::Generated(gens)))
    }

    /// Stabilizer of `v + MV` in `parent`; `M` must divide the level.
    pub fn stabilizer(parent: &CongruenceSubgroup, v: &ResidueVector) -> Result<Self> {
        if parent.level() % v.modulus() != 0 || v.genus() != parent.genus() {
            return Err(Error::ModulusMismatch(format!(
                "vector {v:?} is incompatible with level {}",
                parent.level()
            )));
        }
        Ok(Self::make(
            parent.genus(),
            parent.level(),
            SubgroupKind::Stabilizer { parent: parent.clone(), vector: v.clone() },
        ))
    }

    /// `left ∩ γ·right·γ^{-1}` at the common level.
    pub fn intersection(
        left: &CongruenceSubgroup,
        right: &CongruenceSubgroup,
        gamma: &FiniteLevelElement,
    ) -> Result<Self> {
        if left.level() != right.level() || gamma.level() != left.level() {
            return Err(Error::ModulusMismatch("intersection needs a common level".into()));
        }
        Ok(Self::make(
            left.genus(),
            left.level(),
            SubgroupKind::Intersection { left: left.clone(), right: right.clone(), gamma: gamma.clone() },
        ))
    }

    pub fn conjugate(inner: &CongruenceSubgroup, gamma: &FiniteLevelElement) -> Result<Self> {
        if gamma.level() != inner.level() {
            return Err(Error::ModulusMismatch("conjugating element at a different level".into()));
        }
        if gamma.is_identity() {
            return Ok(inner.clone());
        }
        Ok(Self::make(
            inner.genus(),
            inner.level(),
            SubgroupKind::Conjugate { inner: inner.clone(), gamma: gamma.clone() },
        ))
    }

    pub fn genus(&self) -> usize {
        self.0.genus
    }

    pub fn level(&self) -> u64 {
        self.0.level
    }

    pub fn kind(&self) -> &SubgroupKind {
        &self.0.kind
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn label(&self) -> String {
        match &self.0.kind {
            SubgroupKind::Principal(m) => format!("K_{m}@{}", self.level()),
            SubgroupKind::Full => format!("K_1@{}", self.level()),
            SubgroupKind::Stabilizer { parent, vector } => {
                format!("Stab({:?} in {})", vector.coords(), parent.label())
            }
            SubgroupKind::Intersection { left, right, gamma } => {
                format!("({} ∩ γ{}γ⁻¹, γ={:?})", left.label(), right.label(), gamma.rows())
            }
            SubgroupKind::Conjugate { inner, gamma } => {
                format!("γ{}γ⁻¹ (γ={:?})", inner.label(), gamma.rows())
            }
            SubgroupKind::Generated(g) => format!("⟨{} gens⟩@{}", g.len(), self.level()),
        }
    }

    /// Membership in Υ: level at least 3 and prime to `cp`.
    pub fn is_admissible(&self, cp: u64) -> bool {
        self.level() >= 3 && gcd(self.level(), cp) == 1
    }

    /// The principal level M when this is literally K_M.
    pub fn principal_level(&self) -> Option<u64> {
        match self.0.kind {
            SubgroupKind::Principal(m) => Some(m),
            SubgroupKind::Full => Some(1),
            _ => None,
        }
    }

    pub fn contains(&self, g: &FiniteLevelElement) -> bool {
        debug_assert_eq!(g.level(), self.level());
        match &self.0.kind {
            SubgroupKind::Principal(m) => *m == 1 || g.reduce(*m).map_or(false, |x| x.is_identity()),
            SubgroupKind::Full => true,
            SubgroupKind::Stabilizer { parent, vector } => {
                parent.contains(g) && g.apply(vector) == *vector
            }
            SubgroupKind::Intersection { left, right, gamma } => {
                left.contains(g) && right.contains(&gamma.inverse().mul(g).mul(gamma))
            }
            SubgroupKind::Conjugate { inner, gamma } => {
                inner.contains(&gamma.inverse().mul(g).mul(gamma))
            }
            SubgroupKind::Generated(_) => match self.closure() {
                Ok(c) => c.contains(g),
                Err(_) => false,
            },
        }
    }

    /// A complete invariant of the left coset `gK`.
    pub fn coset_key(&self, g: &FiniteLevelElement) -> CosetKey {
        match &self.0.kind {
            SubgroupKind::Principal(m) => {
                if *m == 1 {
                    Vec::new()
                } else {
                    g.entries().iter().map(|&x| x as u64 % m).collect()
                }
            }
            SubgroupKind::Full => Vec::new(),
            SubgroupKind::Stabilizer { parent, vector } => {
                let mut k = parent.coset_key(g);
                k.extend(g.apply(vector).coords());
                k
            }
            SubgroupKind::Intersection { left, right, gamma } => {
                let mut k = left.coset_key(g);
                k.extend(right.coset_key(&g.mul(gamma)));
                k
            }
            SubgroupKind::Conjugate { inner, gamma } => inner.coset_key(&g.mul(gamma)),
            SubgroupKind::Generated(_) => {
                let c = self.closure().expect("closure of a generated subgroup");
                let best = c
                    .elements
                    .iter()
                    .map(|h| g.mul(h))
                    .min()
                    .expect("nonempty closure");
                best.entries().iter().map(|&x| x as u64).collect()
            }
        }
    }

    /// A generating set of the image mod N.
    pub fn generators(&self) -> &[FiniteLevelElement] {
        self.0.generators.get_or_init(|| self.compute_generators())
    }

    fn compute_generators(&self) -> Vec<FiniteLevelElement> {
        let n = self.genus();
        let level = self.level();
        match &self.0.kind {
            SubgroupKind::Principal(m) => {
                kernel_generators(n, level, *m).expect("principal level divides the anchor")
            }
            SubgroupKind::Full => generators_mod_n(n, level),
            SubgroupKind::Stabilizer { parent, vector } => {
                let v = vector.clone();
                schreier_generators(n, level, parent.generators(), v, |g, x| g.apply(x), |x| x.clone())
            }
            SubgroupKind::Intersection { left, right, gamma } => {
                // stabilizer in `left` of the coset γ·right
                let r = right.clone();
                schreier_generators(n, level, left.generators(), gamma.clone(), |g, x| g.mul(x), move |x| {
                    r.coset_key(x)
                })
            }
            SubgroupKind::Conjugate { inner, gamma } => {
                let gi = gamma.inverse();
                inner.generators().iter().map(|h| gamma.mul(h).mul(&gi)).collect()
            }
            SubgroupKind::Generated(g) => g.clone(),
        }
    }

    pub fn closure(&self) -> Result<Arc<Closure>> {
        self.0
            .closure
            .get_or_init(|| {
                closure(self.genus(), self.level(), self.generators(), CLOSURE_LIMIT).map(Arc::new)
            })
            .clone()
    }

    /// Order of the image mod N.
    pub fn order(&self) -> Result<BigUint> {
        match &self.0.kind {
            SubgroupKind::Principal(m) => Ok(kernel_order(self.genus(), self.level(), *m)),
            SubgroupKind::Full => Ok(gsp_order(self.genus(), self.level())),
            _ => Ok(BigUint::from(self.closure()?.len())),
        }
    }

    /// `self ⊆ other` (same level), tested on generators.
    pub fn is_subgroup_of(&self, other: &CongruenceSubgroup) -> bool {
        self.level() == other.level() && self.generators().iter().all(|g| other.contains(g))
    }

    /// The same profinite subgroup anchored at a multiple `n` of the level.
    pub fn at_level(&self, n: u64) -> Result<Self> {
        let level = self.level();
        if n == level {
            return Ok(self.clone());
        }
        if n % level != 0 {
            return Err(Error::ModulusMismatch(format!("{n} is not a multiple of {level}")));
        }
        let g = self.genus();
        Ok(match &self.0.kind {
            SubgroupKind::Principal(m) => Self::principal(g, *m, n)?,
            SubgroupKind::Full => Self::full(g, n),
            SubgroupKind::Stabilizer { parent, vector } => Self::stabilizer(&parent.at_level(n)?, vector)?,
            SubgroupKind::Intersection { left, right, gamma } => {
                Self::intersection(&left.at_level(n)?, &right.at_level(n)?, &lift_element(gamma, n)?)?
            }
            SubgroupKind::Conjugate { inner, gamma } => {
                Self::conjugate(&inner.at_level(n)?, &lift_element(gamma, n)?)?
            }
            SubgroupKind::Generated(gens) => {
                let mut lifted = Vec::with_capacity(gens.len());
                for x in gens {
                    lifted.push(lift_element(x, n)?);
                }
                lifted.extend(kernel_generators(g, n, level)?);
                Self::generated(g, n, lifted)?
            }
        })
    }

    /// The largest principal congruence subgroup K_M ⊆ self, `M | N`.
    pub fn principal_core(&self) -> u64 {
        let n = self.genus();
        let level = self.level();
        let divs = crate::arith::divisors(level);
        for m in divs {
            let ker = kernel_generators(n, level, m).expect("divisor");
            if ker.iter().all(|g| self.contains(g)) {
                return m;
            }
        }
        level
    }
}

/// Orbit of `base` under `gens` together with a transversal, then the
/// Schreier generators of the stabilizer, pruned against their running
/// closure where that stays small.
fn schreier_generators<T, K, A, F>(
    genus: usize,
    level: u64,
    gens: &[FiniteLevelElement],
    base: T,
    act: A,
    key: F,
) -> Vec<FiniteLevelElement>
where
    T: Clone,
    K: Eq + Hash + Clone,
    A: Fn(&FiniteLevelElement, &T) -> T,
    F: Fn(&T) -> K,
{
    let id = FiniteLevelElement::identity(genus, level);
    let mut points = vec![base.clone()];
    let mut trans = vec![id.clone()];
    let mut index: HashMap<K, usize> = HashMap::from([(key(&base), 0)]);
    let mut head = 0;
    while head < points.len() {
        let x = points[head].clone();
        for g in gens {
            let y = act(g, &x);
            let k = key(&y);
            if !index.contains_key(&k) {
                index.insert(k, points.len());
                points.push(y);
                trans.push(g.mul(&trans[head]));
            }
        }
        head += 1;
    }
    let inverses: Vec<FiniteLevelElement> = trans.iter().map(|t| t.inverse()).collect();
    let mut candidates: Vec<FiniteLevelElement> = Vec::new();
    let mut seen = HashSet::new();
    for (i, x) in points.iter().enumerate() {
        for g in gens {
            let j = index[&key(&act(g, x))];
            let s = inverses[j].mul(g).mul(&trans[i]);
            if !s.is_identity() && seen.insert(s.clone()) {
                candidates.push(s);
            }
        }
    }
    prune_generators(genus, level, candidates)
}

/// Keeps only generators not already in the span of earlier ones, as long
/// as the span can be enumerated.
fn prune_generators(genus: usize, level: u64, candidates: Vec<FiniteLevelElement>) -> Vec<FiniteLevelElement> {
    const PRUNE_LIMIT: usize = 1 << 18;
    let id = FiniteLevelElement::identity(genus, level);
    let mut span: HashSet<FiniteLevelElement> = HashSet::from([id]);
    let mut accepted: Vec<FiniteLevelElement> = Vec::new();
    for (idx, s) in candidates.iter().enumerate() {
        if span.contains(s) {
            continue;
        }
        accepted.push(s.clone());
        // extend the span: new elements are products x·s, closed under all gens
        let mut queue: VecDeque<FiniteLevelElement> =
            span.iter().map(|x| x.mul(s)).filter(|y| !span.contains(y)).collect();
        while let Some(y) = queue.pop_front() {
            if !span.insert(y.clone()) {
                continue;
            }
            if span.len() > PRUNE_LIMIT {
                accepted.extend(candidates[idx + 1..].iter().cloned());
                return accepted;
            }
            for g in &accepted {
                let z = y.mul(g);
                if !span.contains(&z) {
                    queue.push_back(z);
                }
            }
        }
    }
    accepted
}

/// Left coset representatives of `K/L`, by breadth-first search over cosets.
pub fn coset_representatives(
    k: &CongruenceSubgroup,
    l: &CongruenceSubgroup,
) -> Result<Vec<FiniteLevelElement>> {
    if k.level() != l.level() {
        return Err(Error::ModulusMismatch(format!(
            "{} and {} are anchored at different levels",
            k.label(),
            l.label()
        )));
    }
    if !l.is_subgroup_of(k) {
        return Err(Error::NotContained(format!("{} ⊄ {}", l.label(), k.label())));
    }
    let id = FiniteLevelElement::identity(k.genus(), k.level());
    let mut reps = vec![id.clone()];
    let mut keys = HashSet::from([l.coset_key(&id)]);
    let mut head = 0;
    while head < reps.len() {
        let r = reps[head].clone();
        for s in k.generators() {
            let x = s.mul(&r);
            if keys.insert(l.coset_key(&x)) {
                reps.push(x);
            }
        }
        head += 1;
    }
    Ok(reps)
}

/// `[K:L]`.
pub fn index(k: &CongruenceSubgroup, l: &CongruenceSubgroup) -> Result<usize> {
    Ok(coset_representatives(k, l)?.len())
}

/// Stabilizer of a residue vector in `K`; the vector's modulus must equal
/// the level.
pub fn stabilizer(k: &CongruenceSubgroup, v: &ResidueVector) -> Result<CongruenceSubgroup> {
    if v.modulus() != k.level() {
        return Err(Error::ModulusMismatch(format!(
            "vector mod {} against level {}",
            v.modulus(),
            k.level()
        )));
    }
    if v.is_zero() {
        return Ok(k.clone());
    }
    CongruenceSubgroup::stabilizer(k, v)
}

#[derive(Clone, Debug)]
pub struct DoubleCoset {
    pub gamma: FiniteLevelElement,
    /// `L ∩ γ L' γ^{-1}`.
    pub intersection: CongruenceSubgroup,
    /// Number of left `L'`-cosets in `L γ L'`.
    pub cosets: usize,
}

/// Representatives of `L\K/L'` with their intersection subgroups.
pub fn double_coset_representatives(
    l: &CongruenceSubgroup,
    k: &CongruenceSubgroup,
    lp: &CongruenceSubgroup,
) -> Result<Vec<DoubleCoset>> {
    if !l.is_subgroup_of(k) {
        return Err(Error::NotContained(format!("{} ⊄ {}", l.label(), k.label())));
    }
    let cosets = coset_representatives(k, lp)?;
    let keys: HashMap<CosetKey, usize> =
        cosets.iter().enumerate().map(|(i, x)| (lp.coset_key(x), i)).collect();
    let mut assigned = vec![false; cosets.len()];
    let mut out = Vec::new();
    for start in 0..cosets.len() {
        if assigned[start] {
            continue;
        }
        assigned[start] = true;
        let mut queue = vec![start];
        let mut count = 0;
        while let Some(i) = queue.pop() {
            count += 1;
            for h in l.generators() {
                let j = keys[&lp.coset_key(&h.mul(&cosets[i]))];
                if !assigned[j] {
                    assigned[j] = true;
                    queue.push(j);
                }
            }
        }
        let gamma = cosets[start].clone();
        out.push(DoubleCoset {
            intersection: CongruenceSubgroup::intersection(l, lp, &gamma)?,
            gamma,
            cosets: count,
        });
    }
    Ok(out)
}

type SpTreeKey = (usize, u64);

fn sp_tree(genus: usize, level: u64) -> Result<Arc<(Vec<FiniteLevelElement>, Closure)>> {
    static CACHE: OnceLock<Mutex<HashMap<SpTreeKey, Arc<(Vec<FiniteLevelElement>, Closure)>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(&(genus, level)) {
        return Ok(t.clone());
    }
    let gens = root_elements(genus, level, 1);
    let c = closure(genus, level, &gens, CLOSURE_LIMIT)?;
    let t = Arc::new((gens, c));
    cache.lock().expect("cache lock").insert((genus, level), t.clone());
    Ok(t)
}

/// A lift of `g` from its level to the multiple `n`: the symplectic part is
/// written as a word in integral root elements, the similitude is lifted by
/// CRT to a unit mod `n`.
pub fn lift_element(g: &FiniteLevelElement, n: u64) -> Result<FiniteLevelElement> {
    let m = g.level();
    if n == m {
        return Ok(g.clone());
    }
    if n % m != 0 {
        return Err(Error::ModulusMismatch(format!("{n} is not a multiple of {m}")));
    }
    let genus = g.genus();
    if m == 1 {
        return Ok(FiniteLevelElement::identity(genus, n));
    }
    let c = g.similitude();
    let cinv = mod_inverse(c, m).expect("unit similitude");
    let sp = g.mul(&similitude_diagonal(genus, m, cinv));
    let tree = sp_tree(genus, m)?;
    let word = tree.1.word(&sp).ok_or_else(|| {
        Error::Precondition(format!("{sp:?} not reached by root elements mod {m}"))
    })?;
    let gens_n = root_elements(genus, n, 1);
    let mut x = FiniteLevelElement::identity(genus, n);
    for &s in word.iter().rev() {
        x = gens_n[s].mul(&x);
    }
    // similitude lift: ≡ c mod m, a unit mod n
    let rest: u64 = factorize(n)
        .into_iter()
        .filter(|(l, _)| m % l != 0)
        .map(|(l, e)| l.pow(e))
        .product();
    let mpart = n / rest;
    let (c_lift, _) = crt_combine(&[(c as i64, mpart), (1, rest)])?;
    let lifted = x.mul(&similitude_diagonal(genus, n, c_lift));
    debug_assert_eq!(lifted.reduce(m)?, *g);
    Ok(lifted)
}

/// Index of a subgroup in the full group mod N, as u64 (desk scale).
pub fn full_index(k: &CongruenceSubgroup) -> Result<u64> {
    let o = gsp_order(k.genus(), k.level()) / k.order()?;
    o.to_u64().ok_or_else(|| Error::Precondition("index overflows u64".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(m: u64, c: &[i64]) -> ResidueVector {
        ResidueVector::new(m, c).unwrap()
    }

    #[test]
    fn coset_examples() {
        let k3 = CongruenceSubgroup::principal(1, 3, 9).unwrap();
        let k9 = CongruenceSubgroup::principal(1, 9, 9).unwrap();
        assert_eq!(coset_representatives(&k3, &k9).unwrap().len(), 81);
        assert_eq!(coset_representatives(&k3, &k3).unwrap().len(), 1);
        let full = CongruenceSubgroup::full(1, 3);
        let st = stabilizer(&full, &rv(3, &[1, 0])).unwrap();
        assert_eq!(coset_representatives(&full, &st).unwrap().len(), 8);
        assert_eq!(st.order().unwrap(), BigUint::from(6u32));
        assert!(matches!(coset_representatives(&st, &full), Err(Error::NotContained(_))));
    }

    #[test]
    fn stabilizer_examples() {
        let full = CongruenceSubgroup::full(1, 3);
        assert!(stabilizer(&full, &rv(3, &[0, 0])).unwrap().ptr_eq(&full));
        let k9 = CongruenceSubgroup::principal(1, 9, 9).unwrap();
        let s = stabilizer(&k9, &rv(9, &[2, 5])).unwrap();
        assert_eq!(index(&k9, &s).unwrap(), 1);
        assert!(stabilizer(&full, &rv(9, &[1, 0])).is_err());
    }

    #[test]
    fn orbit_stabilizer_counts() {
        for level in [2u64, 3] {
            let full = CongruenceSubgroup::full(1, level);
            let total = full.closure().unwrap().len();
            for v in ResidueVector::all(level, 2) {
                let st = stabilizer(&full, &v).unwrap();
                let idx = index(&full, &st).unwrap();
                assert_eq!(idx * st.closure().unwrap().len(), total);
            }
        }
    }

    #[test]
    fn tower_law() {
        let k1 = CongruenceSubgroup::full(1, 9);
        let k3 = CongruenceSubgroup::principal(1, 3, 9).unwrap();
        let k9 = CongruenceSubgroup::principal(1, 9, 9).unwrap();
        let a = index(&k1, &k3).unwrap();
        let b = index(&k3, &k9).unwrap();
        assert_eq!(a * b, index(&k1, &k9).unwrap());
        assert_eq!(a, 48);
    }

    #[test]
    fn double_cosets() {
        let k = CongruenceSubgroup::full(1, 3);
        let dc = double_coset_representatives(&k, &k, &k).unwrap();
        assert_eq!(dc.len(), 1);
        let k3 = CongruenceSubgroup::principal(1, 3, 9).unwrap();
        let k9 = CongruenceSubgroup::principal(1, 9, 9).unwrap();
        assert_eq!(double_coset_representatives(&k9, &k3, &k9).unwrap().len(), 81);
        let a = stabilizer(&k, &rv(3, &[1, 0])).unwrap();
        let b = stabilizer(&k, &rv(3, &[0, 1])).unwrap();
        let dc = double_coset_representatives(&a, &k, &b).unwrap();
        let total: usize = dc.iter().map(|d| d.cosets).sum();
        assert_eq!(total, 8);
        // |LγL'| = |L|·|L'|/|L_γ| sums to |K|
        let la = a.order().unwrap();
        let lb = b.order().unwrap();
        let sum: BigUint = dc
            .iter()
            .map(|d| &la * &lb / d.intersection.order().unwrap())
            .sum();
        assert_eq!(sum, BigUint::from(48u32));
    }

    #[test]
    fn refinement_preserves_subgroups() {
        let full = CongruenceSubgroup::full(1, 3);
        let st = stabilizer(&full, &rv(3, &[1, 0])).unwrap();
        let st9 = st.at_level(9).unwrap();
        assert_eq!(st9.order().unwrap(), BigUint::from(6u32 * 81));
        let g = CongruenceSubgroup::generated(1, 3, st.generators().to_vec()).unwrap();
        let g9 = g.at_level(9).unwrap();
        assert_eq!(g9.order().unwrap(), st9.order().unwrap());
        for x in st9.closure().unwrap().elements.iter().step_by(17) {
            assert!(g9.contains(x));
        }
    }

    #[test]
    fn lifts_reduce_back() {
        let c = closure(1, 21, &generators_mod_n(1, 21), CLOSURE_LIMIT).unwrap();
        for g in c.elements.iter().step_by(1013) {
            assert_eq!(lift_element(g, 63).unwrap().reduce(21).unwrap(), *g);
        }
    }

    #[test]
    fn principal_core() {
        let k3 = CongruenceSubgroup::principal(1, 3, 21).unwrap();
        assert_eq!(k3.principal_core(), 3);
        let full = CongruenceSubgroup::full(1, 9);
        let st = stabilizer(&full, &rv(9, &[1, 0])).unwrap();
        assert_eq!(st.principal_core(), 9);
    }
}
