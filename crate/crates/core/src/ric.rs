//! Property checks for RIC functors on congruence subgroups: the axioms
//! (C1)-(C3), Galois (G), cohomological (Co) and Mackey (M). Morphisms are
//! checked on restriction and conjugation squares; when the target is Mackey
//! with injective restrictions, the induction squares must then follow.
//!
//! The harness only talks to a [`FunctorInstance`]; the Schwartz-function and
//! formal-Eisenstein instances below are two implementations among possible
//! others. Values live in a finite window: everything is anchored at one
//! level `N`, and a module `M(K)` is spanned by the traces of `N`-level
//! generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith::{lcm, Coefficient};
use crate::config::EngineConfig;
use crate::echelon::{SparseVec, ZpEchelon};
use crate::eisenstein::{level_module, orbit_transversal, FormalEisensteinClass};
use crate::error::{Error, Result};
use crate::residue::ResidueVector;
use crate::schwartz::SchwartzFunction;
use crate::symplectic::generators::root_elements;
use crate::symplectic::{
    coset_representatives, double_coset_representatives, generators_mod_n, CongruenceSubgroup, FiniteLevelElement,
};

/// What the harness needs from a functor `M` on subgroups anchored at a
/// common level.
pub trait FunctorInstance {
    type Value: Clone + fmt::Debug;

    fn name(&self) -> String;

    /// A spanning set of `M(K)` inside the window.
    fn basis(&self, k: &CongruenceSubgroup) -> Result<Vec<Self::Value>>;

    /// `pr^*: M(K) → M(L)` for `L ⊆ K`.
    fn restrict(&self, x: &Self::Value, k: &CongruenceSubgroup, l: &CongruenceSubgroup) -> Result<Self::Value>;

    /// `pr_*: M(L) → M(K)` for `L ⊆ K`.
    fn induce(&self, x: &Self::Value, l: &CongruenceSubgroup, k: &CongruenceSubgroup) -> Result<Self::Value>;

    /// `M(K) → M(γKγ^{-1})`.
    fn conjugate(&self, x: &Self::Value, gamma: &FiniteLevelElement) -> Result<Self::Value>;

    fn add(&self, x: &Self::Value, y: &Self::Value) -> Result<Self::Value>;

    fn scale(&self, x: &Self::Value, c: &Coefficient) -> Self::Value;

    fn zero(&self) -> Self::Value;

    fn equal(&self, x: &Self::Value, y: &Self::Value) -> Result<bool>;

    /// Coordinates in a fixed ambient free Z_(p)-module containing every
    /// `M(K)` of the window.
    fn coordinates(&self, x: &Self::Value) -> Result<SparseVec>;

    /// A Z_(p)-basis of `M(L)` permuted by conjugation, when one is known.
    fn permutation_basis(&self, l: &CongruenceSubgroup) -> Result<Option<Vec<Self::Value>>>;

    /// Whether (G) is part of the pass/fail gate for this instance.
    fn galois_required(&self) -> bool {
        true
    }

    fn prime(&self) -> u64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Axiom {
    C1,
    C2,
    C3,
    G,
    Co,
    M,
    #[serde(rename = "res-conj-ind")]
    ResConjInd,
}

impl Axiom {
    pub fn id(self) -> &'static str {
        match self {
            Axiom::C1 => "C1",
            Axiom::C2 => "C2",
            Axiom::C3 => "C3",
            Axiom::G => "G",
            Axiom::Co => "Co",
            Axiom::M => "M",
            Axiom::ResConjInd => "res-conj-ind",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Verified,
    Falsified,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub status: Status,
    /// Excluded from the pass/fail gate.
    pub informational: bool,
    pub checks: usize,
    /// Replayable description of the first failing configuration.
    pub witness: Option<String>,
    pub detail: String,
}

impl AxiomReport {
    /// Verified, or outside the gate.
    pub fn passes(&self) -> bool {
        self.informational || self.status == Status::Verified
    }
}

/// Subgroups and elements to test, all anchored at one level.
#[derive(Clone, Debug)]
pub struct HarnessConfig {
    pub level: u64,
    pub subgroups: Vec<CongruenceSubgroup>,
    /// `(L, K)` index pairs with `L ⊆ K`.
    pub pairs: Vec<(usize, usize)>,
    /// `(L, K, L')` with `L, L' ⊆ K`.
    pub triples: Vec<(usize, usize, usize)>,
    /// Elements of the full group used for (C2).
    pub elements: Vec<FiniteLevelElement>,
}

impl HarnessConfig {
    /// The standard battery: principal subgroups for every level, the full
    /// group, stabilizers of `e_1` and `e_{n+1}` mod the smallest level, the
    /// stabilizer of `e_1` mod the window inside the smallest principal
    /// subgroup, and `K_N` with a root element of the smallest level
    /// adjoined.
    pub fn standard(genus: usize, levels: &[u64], seed: u64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Malformed("no levels".into()));
        }
        let n = levels.iter().fold(1, |a, &b| lcm(a, b));
        let m = *levels.iter().min().expect("nonempty");
        let dim = 2 * genus;
        let mut subgroups = Vec::new();
        let full = CongruenceSubgroup::full(genus, n);
        subgroups.push(full.clone());
        let mut principal = Vec::new();
        let mut sorted: Vec<u64> = levels.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for &l in &sorted {
            principal.push(subgroups.len());
            subgroups.push(CongruenceSubgroup::principal(genus, l, n)?);
        }
        let e1 = ResidueVector::unit(dim, 0, m);
        let f1 = ResidueVector::unit(dim, genus, m);
        let stab_e = subgroups.len();
        subgroups.push(CongruenceSubgroup::stabilizer(&full, &e1)?);
        let stab_f = subgroups.len();
        subgroups.push(CongruenceSubgroup::stabilizer(&full, &f1)?);
        let km = &subgroups[principal[0]].clone();
        let mut fine_stab = None;
        if n > m {
            fine_stab = Some(subgroups.len());
            subgroups.push(CongruenceSubgroup::stabilizer(km, &ResidueVector::unit(dim, 0, n))?);
        }
        let kn_idx = *principal.last().expect("nonempty");
        let mut generated = None;
        if n > m {
            let mut gens = subgroups[kn_idx].generators().to_vec();
            gens.push(root_elements(genus, n, m as i64)[0].clone());
            generated = Some(subgroups.len());
            subgroups.push(CongruenceSubgroup::generated(genus, n, gens)?);
        }

        let mut pairs = Vec::new();
        for &p in &principal {
            pairs.push((p, 0));
        }
        for w in principal.windows(2) {
            pairs.push((w[1], w[0]));
        }
        pairs.push((stab_e, 0));
        pairs.push((principal[0], stab_e));
        if let Some(s) = fine_stab {
            pairs.push((s, principal[0]));
            pairs.push((kn_idx, s));
        }
        if let Some(g) = generated {
            pairs.push((g, principal[0]));
            pairs.push((kn_idx, g));
        }
        pairs.retain(|&(l, k)| subgroups[l].is_subgroup_of(&subgroups[k]) && l != k);

        let mut triples = vec![(principal[0], 0, stab_e), (stab_e, 0, stab_f)];
        if let Some(s) = fine_stab {
            triples.push((kn_idx, principal[0], s));
        }
        if let Some(g) = generated {
            triples.push((g, principal[0], g));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gens = generators_mod_n(genus, n);
        let mut elements = gens.clone();
        for _ in 0..3 {
            let mut x = FiniteLevelElement::identity(genus, n);
            for _ in 0..6 {
                x = x.mul(gens.choose(&mut rng).expect("generators"));
            }
            elements.push(x);
        }
        Ok(HarnessConfig { level: n, subgroups, pairs, triples, elements })
    }
}

struct Tally {
    checks: usize,
    witness: Option<String>,
    skipped: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { checks: 0, witness: None, skipped: None }
    }

    fn record(&mut self, ok: Result<bool>, witness: impl FnOnce() -> String) {
        self.checks += 1;
        if self.witness.is_some() {
            return;
        }
        match ok {
            Ok(true) => {}
            Ok(false) => self.witness = Some(witness()),
            Err(e) => self.witness = Some(format!("{} (error: {e})", witness())),
        }
    }

    fn report(self, axiom: Axiom, informational: bool, detail: impl Into<String>) -> AxiomReport {
        let status = if self.witness.is_some() {
            Status::Falsified
        } else if self.checks == 0 || self.skipped.is_some() {
            Status::Skipped
        } else {
            Status::Verified
        };
        let mut detail = detail.into();
        if let Some(s) = self.skipped {
            detail = format!("{detail}; {s}");
        }
        AxiomReport { axiom, status, informational, checks: self.checks, witness: self.witness, detail }
    }
}

fn fmt_elem(g: &FiniteLevelElement) -> String {
    format!("{:?} mod {}", g.rows(), g.level())
}

/// Every axiom on the configured subgroups, exhaustively on spanning sets.
pub fn check_axioms<F: FunctorInstance>(f: &F, cfg: &HarnessConfig) -> Vec<AxiomReport> {
    let bases: Vec<Result<Vec<F::Value>>> = cfg.subgroups.iter().map(|k| f.basis(k)).collect();
    let basis = |i: usize| -> Result<&Vec<F::Value>> { bases[i].as_ref().map_err(|e| e.clone()) };
    vec![
        check_c1(f, cfg, &basis),
        check_c2(f, cfg, &basis),
        check_c3(f, cfg, &basis),
        check_galois(f, cfg, &basis),
        check_cohomological(f, cfg, &basis),
        check_mackey(f, cfg, &basis),
    ]
}

type BasisFn<'a, V> = dyn Fn(usize) -> Result<&'a Vec<V>> + 'a;

fn check_c1<'a, F: FunctorInstance>(f: &F, cfg: &HarnessConfig, basis: &BasisFn<'a, F::Value>) -> AxiomReport {
    let mut t = Tally::new();
    for (i, k) in cfg.subgroups.iter().enumerate() {
        let b = match basis(i) {
            Ok(b) => b,
            Err(e) => {
                t.record(Err(e), || format!("basis of {}", k.label()));
                continue;
            }
        };
        let id = FiniteLevelElement::identity(k.genus(), k.level());
        for (j, x) in b.iter().enumerate() {
            let ok = (|| {
                Ok(f.equal(&f.restrict(x, k, k)?, x)?
                    && f.equal(&f.induce(x, k, k)?, x)?
                    && f.equal(&f.conjugate(x, &id)?, x)?)
            })();
            t.record(ok, || format!("K={}, basis[{j}]", k.label()));
        }
    }
    t.report(Axiom::C1, false, "restriction, induction and conjugation along K → K are the identity")
}

fn check_c2<'a, F: FunctorInstance>(f: &F, cfg: &HarnessConfig, basis: &BasisFn<'a, F::Value>) -> AxiomReport {
    let mut t = Tally::new();
    for g in cfg.elements.iter().take(4) {
        let gi = g.inverse();
        for (i, k) in cfg.subgroups.iter().enumerate() {
            let Ok(b) = basis(i) else { continue };
            for (j, x) in b.iter().enumerate() {
                let ok = (|| f.equal(&f.conjugate(&f.conjugate(x, g)?, &gi)?, x))();
                t.record(ok, || format!("γ={}, K={}, basis[{j}]: γ^{{-1}}γ ≠ id", fmt_elem(g), k.label()));
            }
        }
        for &(li, ki) in &cfg.pairs {
            let (l, k) = (&cfg.subgroups[li], &cfg.subgroups[ki]);
            let (gl, gk) = match (CongruenceSubgroup::conjugate(l, g), CongruenceSubgroup::conjugate(k, g)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    t.record(Err(e), || format!("conjugating {} / {}", l.label(), k.label()));
                    continue;
                }
            };
            if let Ok(b) = basis(ki) {
                for (j, x) in b.iter().enumerate() {
                    let ok = (|| {
                        let lhs = f.conjugate(&f.restrict(x, k, l)?, g)?;
                        let rhs = f.restrict(&f.conjugate(x, g)?, &gk, &gl)?;
                        f.equal(&lhs, &rhs)
                    })();
                    t.record(ok, || {
                        format!("γ={}, (L,K)=({}, {}), basis[{j}]: conj∘res ≠ res∘conj", fmt_elem(g), l.label(), k.label())
                    });
                }
            }
            if let Ok(b) = basis(li) {
                for (j, y) in b.iter().enumerate() {
                    let ok = (|| {
                        let lhs = f.conjugate(&f.induce(y, l, k)?, g)?;
                        let rhs = f.induce(&f.conjugate(y, g)?, &gl, &gk)?;
                        f.equal(&lhs, &rhs)
                    })();
                    t.record(ok, || {
                        format!("γ={}, (L,K)=({}, {}), basis[{j}]: conj∘ind ≠ ind∘conj", fmt_elem(g), l.label(), k.label())
                    });
                }
            }
        }
    }
    for (a, g) in cfg.elements.iter().enumerate().take(3) {
        for h in cfg.elements.iter().skip(a + 1).take(2) {
            let gh = g.mul(h);
            for (i, k) in cfg.subgroups.iter().enumerate().take(3) {
                let Ok(b) = basis(i) else { continue };
                for (j, x) in b.iter().enumerate() {
                    let ok = (|| f.equal(&f.conjugate(&f.conjugate(x, h)?, g)?, &f.conjugate(x, &gh)?))();
                    t.record(ok, || {
                        format!("γ={}, δ={}, K={}, basis[{j}]: [γδ] ≠ [γ][δ]", fmt_elem(g), fmt_elem(h), k.label())
                    });
                }
            }
        }
    }
    t.report(Axiom::C2, false, "conjugation is functorial and commutes with restriction and induction")
}

fn check_c3<'a, F: FunctorInstance>(f: &F, cfg: &HarnessConfig, basis: &BasisFn<'a, F::Value>) -> AxiomReport {
    let mut t = Tally::new();
    for (i, k) in cfg.subgroups.iter().enumerate() {
        let Ok(b) = basis(i) else { continue };
        for g in k.generators() {
            for (j, x) in b.iter().enumerate() {
                t.record(f.conjugate(x, g).and_then(|y| f.equal(&y, x)), || {
                    format!("K={}, γ={} ∈ K, basis[{j}]", k.label(), fmt_elem(g))
                });
            }
        }
    }
    t.report(Axiom::C3, false, "conjugation by elements of K is trivial on M(K)")
}

fn is_normal(l: &CongruenceSubgroup, k: &CongruenceSubgroup) -> bool {
    k.generators().iter().all(|g| {
        let gi = g.inverse();
        l.generators().iter().all(|h| l.contains(&g.mul(h).mul(&gi)))
    })
}

fn echelon_of(p: u64, rows: impl IntoIterator<Item = SparseVec>) -> ZpEchelon {
    let mut e = ZpEchelon::new(p);
    for r in rows {
        e.insert(r);
    }
    e.interreduce();
    e
}

fn check_galois<'a, F: FunctorInstance>(f: &F, cfg: &HarnessConfig, basis: &BasisFn<'a, F::Value>) -> AxiomReport {
    let mut t = Tally::new();
    let mut statuses = Vec::new();
    for &(li, ki) in &cfg.pairs {
        let (l, k) = (&cfg.subgroups[li], &cfg.subgroups[ki]);
        if !is_normal(l, k) {
            continue;
        }
        let perm = match f.permutation_basis(l) {
            Ok(Some(p)) => p,
            Ok(None) => {
                statuses.push(format!("{} ◁ {}: no permutation basis", l.label(), k.label()));
                t.skipped = Some("some pairs lack a permutation basis".into());
                continue;
            }
            Err(e) => {
                t.record(Err(e), || format!("permutation basis of {}", l.label()));
                continue;
            }
        };
        let ok = (|| -> Result<bool> {
            let bk = basis(ki)?;
            let p = f.prime();
            let src: Vec<SparseVec> = bk.iter().map(|x| f.coordinates(x)).collect::<Result<_>>()?;
            let img: Vec<SparseVec> =
                bk.iter().map(|x| f.coordinates(&f.restrict(x, k, l)?)).collect::<Result<_>>()?;
            // injective on the spanned module: ranks agree (both sit in the
            // same ambient coordinates)
            let src_e = echelon_of(p, src);
            let img_e = echelon_of(p, img.iter().cloned());
            if src_e.rank() != img_e.rank() {
                return Ok(false);
            }
            // K/L-invariants of the permutation module: orbit sums
            let coords: Vec<SparseVec> = perm.iter().map(|x| f.coordinates(x)).collect::<Result<_>>()?;
            let index: BTreeMap<Vec<(u64, Coefficient)>, usize> =
                coords.iter().enumerate().map(|(i, c)| (c.clone().into_iter().collect(), i)).collect();
            let mut seen = vec![false; perm.len()];
            let mut invariants = Vec::new();
            for start in 0..perm.len() {
                if seen[start] {
                    continue;
                }
                seen[start] = true;
                let mut orbit = vec![start];
                let mut head = 0;
                while head < orbit.len() {
                    let x = &perm[orbit[head]];
                    for g in k.generators() {
                        let y = f.coordinates(&f.conjugate(x, g)?)?;
                        let key: Vec<(u64, Coefficient)> = y.into_iter().collect();
                        let Some(&j) = index.get(&key) else {
                            return Err(Error::Precondition("basis is not permuted by K".into()));
                        };
                        if !seen[j] {
                            seen[j] = true;
                            orbit.push(j);
                        }
                    }
                    head += 1;
                }
                let mut s = f.zero();
                for &i in &orbit {
                    s = f.add(&s, &perm[i])?;
                }
                invariants.push(f.coordinates(&s)?);
            }
            let inv_e = echelon_of(p, invariants.iter().cloned());
            Ok(invariants.iter().all(|v| img_e.contains(v)) && img.iter().all(|v| inv_e.contains(v)))
        })();
        let holds = matches!(ok, Ok(true));
        statuses.push(format!("{} ◁ {}: {}", l.label(), k.label(), if holds { "holds" } else { "fails" }));
        t.record(ok, || format!("(L,K)=({}, {}): M(K) → M(L)^{{K/L}} is not an isomorphism", l.label(), k.label()));
    }
    let informational = !f.galois_required();
    t.report(Axiom::G, informational, statuses.join("; "))
}

fn check_cohomological<'a, F: FunctorInstance>(
    f: &F,
    cfg: &HarnessConfig,
    basis: &BasisFn<'a, F::Value>,
) -> AxiomReport {
    let mut t = Tally::new();
    for &(li, ki) in &cfg.pairs {
        let (l, k) = (&cfg.subgroups[li], &cfg.subgroups[ki]);
        let idx = match coset_representatives(k, l) {
            Ok(r) => r.len() as i64,
            Err(e) => {
                t.record(Err(e), || format!("[{}:{}]", k.label(), l.label()));
                continue;
            }
        };
        let Ok(b) = basis(ki) else { continue };
        for (j, x) in b.iter().enumerate() {
            let ok = (|| {
                let y = f.induce(&f.restrict(x, k, l)?, l, k)?;
                f.equal(&y, &f.scale(x, &Coefficient::from_int(idx)))
            })();
            t.record(ok, || format!("(L,K)=({}, {}), basis[{j}]: ind∘res ≠ {idx}·id", l.label(), k.label()));
        }
    }
    t.report(Axiom::Co, false, "induction after restriction is multiplication by the index")
}

fn check_mackey<'a, F: FunctorInstance>(f: &F, cfg: &HarnessConfig, basis: &BasisFn<'a, F::Value>) -> AxiomReport {
    let mut t = Tally::new();
    for &(li, ki, lpi) in &cfg.triples {
        let (l, k, lp) = (&cfg.subgroups[li], &cfg.subgroups[ki], &cfg.subgroups[lpi]);
        let dcs = match double_coset_representatives(l, k, lp) {
            Ok(d) => d,
            Err(e) => {
                t.record(Err(e), || format!("double cosets {}\\{}/{}", l.label(), k.label(), lp.label()));
                continue;
            }
        };
        let Ok(b) = basis(lpi) else { continue };
        for (j, x) in b.iter().enumerate() {
            let ok = (|| {
                let lhs = f.restrict(&f.induce(x, lp, k)?, k, l)?;
                let mut rhs = f.zero();
                for dc in &dcs {
                    let gi = dc.gamma.inverse();
                    let back = CongruenceSubgroup::conjugate(&dc.intersection, &gi)?;
                    let y = f.restrict(x, lp, &back)?;
                    let y = f.conjugate(&y, &dc.gamma)?;
                    rhs = f.add(&rhs, &f.induce(&y, &dc.intersection, l)?)?;
                }
                f.equal(&lhs, &rhs)
            })();
            t.record(ok, || {
                format!("(L,K,L')=({}, {}, {}), basis[{j}] of M(L')", l.label(), k.label(), lp.label())
            });
        }
    }
    // normal L ◁ K: res∘ind equals the sum of conjugates over K/L
    for &(li, ki) in &cfg.pairs {
        let (l, k) = (&cfg.subgroups[li], &cfg.subgroups[ki]);
        if !is_normal(l, k) {
            continue;
        }
        let Ok(reps) = coset_representatives(k, l) else { continue };
        let Ok(b) = basis(li) else { continue };
        for (j, x) in b.iter().enumerate() {
            let ok = (|| {
                let lhs = f.restrict(&f.induce(x, l, k)?, k, l)?;
                let mut rhs = f.zero();
                for g in &reps {
                    rhs = f.add(&rhs, &f.conjugate(x, g)?)?;
                }
                f.equal(&lhs, &rhs)
            })();
            t.record(ok, || format!("{} ◁ {}, basis[{j}]: res∘ind ≠ Σ[γ]", l.label(), k.label()));
        }
    }
    t.report(Axiom::M, false, "double-coset formula on explicit triples and the normal-subgroup sum")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorphismMode {
    /// Check the hypotheses (restriction and conjugation compatibility,
    /// injective restrictions in the target) and the conclusion.
    PullbacksOnly,
    /// Check all three squares directly.
    Full,
}

/// Compatibility of a family `f_K: F(K) → H(K)` with restriction,
/// conjugation and induction.
pub fn check_morphism<F: FunctorInstance, H: FunctorInstance>(
    src: &F,
    dst: &H,
    map: &dyn Fn(&F::Value, &CongruenceSubgroup) -> Result<H::Value>,
    cfg: &HarnessConfig,
    mode: MorphismMode,
) -> AxiomReport {
    let mut t = Tally::new();
    let mut notes = Vec::new();
    let bases: Vec<Result<Vec<F::Value>>> = cfg.subgroups.iter().map(|k| src.basis(k)).collect();
    for &(li, ki) in &cfg.pairs {
        let (l, k) = (&cfg.subgroups[li], &cfg.subgroups[ki]);
        if let Ok(b) = &bases[ki] {
            for (j, x) in b.iter().enumerate() {
                let ok = (|| {
                    let lhs = map(&src.restrict(x, k, l)?, l)?;
                    let rhs = dst.restrict(&map(x, k)?, k, l)?;
                    dst.equal(&lhs, &rhs)
                })();
                t.record(ok, || format!("restriction square (L,K)=({}, {}), basis[{j}]", l.label(), k.label()));
            }
            if mode == MorphismMode::PullbacksOnly {
                // injectivity of the target restriction on the image
                let ok = (|| {
                    let p = dst.prime();
                    let before: Vec<SparseVec> =
                        b.iter().map(|x| dst.coordinates(&map(x, k)?)).collect::<Result<_>>()?;
                    let after: Vec<SparseVec> = b
                        .iter()
                        .map(|x| dst.coordinates(&dst.restrict(&map(x, k)?, k, l)?))
                        .collect::<Result<_>>()?;
                    Ok(echelon_of(p, before).rank() == echelon_of(p, after).rank())
                })();
                t.record(ok, || format!("target restriction {} → {} not injective", k.label(), l.label()));
            }
        }
        if let Ok(b) = &bases[li] {
            for (j, y) in b.iter().enumerate() {
                let ok = (|| {
                    let lhs = map(&src.induce(y, l, k)?, k)?;
                    let rhs = dst.induce(&map(y, l)?, l, k)?;
                    dst.equal(&lhs, &rhs)
                })();
                t.record(ok, || format!("induction square (L,K)=({}, {}), basis[{j}]", l.label(), k.label()));
            }
        }
    }
    for g in cfg.elements.iter().take(3) {
        for (i, k) in cfg.subgroups.iter().enumerate() {
            let Ok(b) = &bases[i] else { continue };
            let gk = match CongruenceSubgroup::conjugate(k, g) {
                Ok(x) => x,
                Err(e) => {
                    t.record(Err(e), || format!("conjugating {}", k.label()));
                    continue;
                }
            };
            for (j, x) in b.iter().enumerate() {
                let ok = (|| {
                    let lhs = map(&src.conjugate(x, g)?, &gk)?;
                    let rhs = dst.conjugate(&map(x, k)?, g)?;
                    dst.equal(&lhs, &rhs)
                })();
                t.record(ok, || format!("conjugation square γ={}, K={}, basis[{j}]", fmt_elem(g), k.label()));
            }
        }
    }
    notes.push(match mode {
        MorphismMode::PullbacksOnly => "hypotheses and induction conclusion checked",
        MorphismMode::Full => "all squares checked",
    });
    t.report(Axiom::ResConjInd, false, notes.join("; "))
}

/// `𝒮`: K-invariant Schwartz functions, spanned in the window by the
/// K-orbit sums of `ξ_{v,N}`.
#[derive(Clone, Debug)]
pub struct SchwartzInstance {
    pub genus: usize,
    pub window: u64,
    pub p: u64,
}

fn orbit_sums(k: &CongruenceSubgroup, window: u64, primitive_only: bool) -> Result<Vec<Vec<ResidueVector>>> {
    let k = k.at_level(window)?;
    let dim = 2 * k.genus();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for v in ResidueVector::all(window, dim) {
        if v.is_zero() || seen.contains(&v) || (primitive_only && !v.is_primitive()) {
            continue;
        }
        let (orbit, _) = orbit_transversal(&v, k.generators());
        seen.extend(orbit.iter().cloned());
        out.push(orbit);
    }
    Ok(out)
}

impl SchwartzInstance {
    fn check_window(&self, x: &SchwartzFunction) -> Result<BTreeMap<ResidueVector, Coefficient>> {
        if x.scale() != 1 || self.window % x.level() != 0 {
            return Err(Error::Precondition(format!("{x:?} lies outside the window")));
        }
        x.expanded(1, self.window)
    }
}

impl FunctorInstance for SchwartzInstance {
    type Value = SchwartzFunction;

    fn name(&self) -> String {
        format!("schwartz(n={}, N={})", self.genus, self.window)
    }

    fn basis(&self, k: &CongruenceSubgroup) -> Result<Vec<SchwartzFunction>> {
        orbit_sums(k, self.window, false)?
            .into_iter()
            .map(|o| SchwartzFunction::new(2 * self.genus, 1, self.window, o.into_iter().map(|v| (v, Coefficient::one()))))
            .collect()
    }

    fn restrict(&self, x: &SchwartzFunction, k: &CongruenceSubgroup, l: &CongruenceSubgroup) -> Result<SchwartzFunction> {
        x.restrict(k, l)
    }

    fn induce(&self, x: &SchwartzFunction, l: &CongruenceSubgroup, k: &CongruenceSubgroup) -> Result<SchwartzFunction> {
        x.induce(l, k)
    }

    fn conjugate(&self, x: &SchwartzFunction, gamma: &FiniteLevelElement) -> Result<SchwartzFunction> {
        x.act_finite(gamma)
    }

    fn add(&self, x: &SchwartzFunction, y: &SchwartzFunction) -> Result<SchwartzFunction> {
        x.add(y)
    }

    fn scale(&self, x: &SchwartzFunction, c: &Coefficient) -> SchwartzFunction {
        x.scaled(c)
    }

    fn zero(&self) -> SchwartzFunction {
        SchwartzFunction::zero(2 * self.genus)
    }

    fn equal(&self, x: &SchwartzFunction, y: &SchwartzFunction) -> Result<bool> {
        Ok(x == y)
    }

    fn coordinates(&self, x: &SchwartzFunction) -> Result<SparseVec> {
        Ok(self.check_window(x)?.into_iter().map(|(v, c)| (v.index(), c)).collect())
    }

    fn permutation_basis(&self, l: &CongruenceSubgroup) -> Result<Option<Vec<SchwartzFunction>>> {
        self.basis(l).map(Some)
    }

    fn prime(&self) -> u64 {
        self.p
    }
}

/// `𝔈`: formal Eisenstein classes of weight `k`; `M(K)` is spanned in the
/// window by the traces `Σ_{γ ∈ K/K_N} [γ]^* ε(v, N)`.
#[derive(Clone, Debug)]
pub struct EisensteinInstance {
    pub config: EngineConfig,
    pub window: u64,
    pub weight: u32,
}

impl EisensteinInstance {
    fn class(&self, terms: impl IntoIterator<Item = (ResidueVector, Coefficient)>) -> Result<FormalEisensteinClass> {
        FormalEisensteinClass::new(self.config.genus, self.weight, self.window, terms)?.normal_form(&self.config)
    }

    fn in_window(&self, x: &FormalEisensteinClass) -> Result<FormalEisensteinClass> {
        if self.window % x.level() != 0 {
            return Err(Error::Precondition(format!("{x:?} lies outside the window")));
        }
        x.refine(self.window, &self.config)
    }
}

impl FunctorInstance for EisensteinInstance {
    type Value = FormalEisensteinClass;

    fn name(&self) -> String {
        format!("eisenstein(n={}, N={}, k={})", self.config.genus, self.window, self.weight)
    }

    fn basis(&self, k: &CongruenceSubgroup) -> Result<Vec<FormalEisensteinClass>> {
        let kw = k.at_level(self.window)?;
        let order = kw.order()?;
        let mut out = Vec::new();
        for orbit in orbit_sums(&kw, self.window, false)? {
            // [K_v : K_N] = |K mod N| / |orbit|
            let stab = (&order / orbit.len()).to_string();
            let c: Coefficient = stab.parse()?;
            out.push(self.class(orbit.into_iter().map(|v| (v, c.clone())))?);
        }
        Ok(out)
    }

    fn restrict(
        &self,
        x: &FormalEisensteinClass,
        k: &CongruenceSubgroup,
        l: &CongruenceSubgroup,
    ) -> Result<FormalEisensteinClass> {
        if !x.is_invariant(k, &self.config)? {
            return Err(Error::NotInvariant(format!("class is not {}-invariant", k.label())));
        }
        if !l.is_subgroup_of(k) {
            return Err(Error::NotContained(format!("{} ⊄ {}", l.label(), k.label())));
        }
        Ok(x.clone())
    }

    fn induce(
        &self,
        x: &FormalEisensteinClass,
        l: &CongruenceSubgroup,
        k: &CongruenceSubgroup,
    ) -> Result<FormalEisensteinClass> {
        x.pushforward(l, k, &self.config)
    }

    fn conjugate(&self, x: &FormalEisensteinClass, gamma: &FiniteLevelElement) -> Result<FormalEisensteinClass> {
        x.conjugate_finite(gamma)?.normal_form(&self.config)
    }

    fn add(&self, x: &FormalEisensteinClass, y: &FormalEisensteinClass) -> Result<FormalEisensteinClass> {
        x.add(y)?.normal_form(&self.config)
    }

    fn scale(&self, x: &FormalEisensteinClass, c: &Coefficient) -> FormalEisensteinClass {
        x.scaled(c)
    }

    fn zero(&self) -> FormalEisensteinClass {
        FormalEisensteinClass::zero(self.config.genus, self.weight, self.window)
    }

    fn equal(&self, x: &FormalEisensteinClass, y: &FormalEisensteinClass) -> Result<bool> {
        x.same_class(y, &self.config)
    }

    fn coordinates(&self, x: &FormalEisensteinClass) -> Result<SparseVec> {
        Ok(self.in_window(x)?.terms().iter().map(|(v, c)| (v.index(), c.clone())).collect())
    }

    /// Orbit sums of primitive symbols, when the window module is free on
    /// primitives and every stabilizer index is a p-unit (then they form a
    /// basis of `M(L)`).
    fn permutation_basis(&self, l: &CongruenceSubgroup) -> Result<Option<Vec<FormalEisensteinClass>>> {
        let m = level_module(self.config.genus, self.window, self.weight, self.config.p)?;
        if !m.is_free_on_primitive() {
            return Ok(None);
        }
        let lw = l.at_level(self.window)?;
        let order = lw.order()?;
        let p = num_bigint::BigUint::from(self.config.p);
        let mut out = Vec::new();
        for orbit in orbit_sums(&lw, self.window, false)? {
            if (&order / orbit.len()) % &p == num_bigint::BigUint::from(0u32) {
                return Ok(None);
            }
            if orbit[0].is_primitive() {
                out.push(self.class(orbit.into_iter().map(|v| (v, Coefficient::one())))?);
            }
        }
        Ok(Some(out))
    }

    fn galois_required(&self) -> bool {
        false
    }

    fn prime(&self) -> u64 {
        self.config.p
    }
}

/// Faults that can be injected into an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Induction drops the last coset representative.
    MissingCoset,
    /// Conjugation ignores its element.
    TrivialConjugation,
}

/// An instance with a deliberate defect, for checking that the harness
/// notices.
pub struct Faulty<F> {
    pub inner: F,
    pub fault: Fault,
}

impl<F: FunctorInstance> FunctorInstance for Faulty<F> {
    type Value = F::Value;

    fn name(&self) -> String {
        format!("{} with {:?}", self.inner.name(), self.fault)
    }

    fn basis(&self, k: &CongruenceSubgroup) -> Result<Vec<F::Value>> {
        self.inner.basis(k)
    }

    fn restrict(&self, x: &F::Value, k: &CongruenceSubgroup, l: &CongruenceSubgroup) -> Result<F::Value> {
        self.inner.restrict(x, k, l)
    }

    fn induce(&self, x: &F::Value, l: &CongruenceSubgroup, k: &CongruenceSubgroup) -> Result<F::Value> {
        let full = self.inner.induce(x, l, k)?;
        if self.fault != Fault::MissingCoset {
            return Ok(full);
        }
        let reps = coset_representatives(k, l)?;
        match reps.last() {
            Some(g) if reps.len() > 1 => {
                let dropped = self.inner.conjugate(x, g)?;
                self.inner.add(&full, &self.inner.scale(&dropped, &Coefficient::from_int(-1)))
            }
            _ => Ok(full),
        }
    }

    fn conjugate(&self, x: &F::Value, gamma: &FiniteLevelElement) -> Result<F::Value> {
        match self.fault {
            Fault::TrivialConjugation => Ok(x.clone()),
            _ => self.inner.conjugate(x, gamma),
        }
    }

    fn add(&self, x: &F::Value, y: &F::Value) -> Result<F::Value> {
        self.inner.add(x, y)
    }

    fn scale(&self, x: &F::Value, c: &Coefficient) -> F::Value {
        self.inner.scale(x, c)
    }

    fn zero(&self) -> F::Value {
        self.inner.zero()
    }

    fn equal(&self, x: &F::Value, y: &F::Value) -> Result<bool> {
        self.inner.equal(x, y)
    }

    fn coordinates(&self, x: &F::Value) -> Result<SparseVec> {
        self.inner.coordinates(x)
    }

    fn permutation_basis(&self, l: &CongruenceSubgroup) -> Result<Option<Vec<F::Value>>> {
        self.inner.permutation_basis(l)
    }

    fn galois_required(&self) -> bool {
        self.inner.galois_required()
    }

    fn prime(&self) -> u64 {
        self.inner.prime()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eisenstein::{parametrize, ParamPath};

    fn harness() -> HarnessConfig {
        HarnessConfig::standard(1, &[3, 9], 7).unwrap()
    }

    fn report_of(r: &[AxiomReport], a: Axiom) -> &AxiomReport {
        r.iter().find(|x| x.axiom == a).unwrap()
    }

    #[test]
    fn schwartz_axioms_hold() {
        let h = harness();
        let s = SchwartzInstance { genus: 1, window: 9, p: 5 };
        let r = check_axioms(&s, &h);
        for x in &r {
            assert_eq!(x.status, Status::Verified, "{x:?}");
        }
    }

    #[test]
    fn eisenstein_axioms_hold() {
        let h = harness();
        let e = EisensteinInstance { config: EngineConfig::default(), window: 9, weight: 1 };
        let r = check_axioms(&e, &h);
        for x in &r {
            assert!(x.passes(), "{x:?}");
            if x.axiom != Axiom::G {
                assert_eq!(x.status, Status::Verified, "{x:?}");
            }
        }
        assert!(report_of(&r, Axiom::G).informational);
    }

    #[test]
    fn faults_are_caught() {
        let h = harness();
        let s = Faulty { inner: SchwartzInstance { genus: 1, window: 9, p: 5 }, fault: Fault::MissingCoset };
        let r = check_axioms(&s, &h);
        let co = report_of(&r, Axiom::Co);
        assert_eq!(co.status, Status::Falsified);
        assert!(co.witness.is_some());
        let t = Faulty { inner: SchwartzInstance { genus: 1, window: 9, p: 5 }, fault: Fault::TrivialConjugation };
        let r = check_axioms(&t, &h);
        assert_eq!(report_of(&r, Axiom::C2).status, Status::Falsified);
    }

    #[test]
    fn parametrization_is_a_morphism() {
        let h = harness();
        let cfg = EngineConfig::default();
        let s = SchwartzInstance { genus: 1, window: 9, p: 5 };
        let e = EisensteinInstance { config: cfg.clone(), window: 9, weight: 2 };
        let map = |x: &SchwartzFunction, k: &CongruenceSubgroup| parametrize(x, 2, k, ParamPath::Canonical, &cfg);
        let r = check_morphism(&s, &e, &map, &h, MorphismMode::Full);
        assert_eq!(r.status, Status::Verified, "{r:?}");
        let r = check_morphism(&s, &e, &map, &h, MorphismMode::PullbacksOnly);
        assert_eq!(r.status, Status::Verified, "{r:?}");
        let id = |x: &SchwartzFunction, _: &CongruenceSubgroup| Ok(x.clone());
        assert_eq!(check_morphism(&s, &s, &id, &h, MorphismMode::Full).status, Status::Verified);
        let bad = |x: &SchwartzFunction, k: &CongruenceSubgroup| {
            let y = parametrize(x, 2, k, ParamPath::Canonical, &cfg)?;
            Ok(if k.principal_level() == Some(9) { y.scaled(&Coefficient::from_int(2)) } else { y })
        };
        let r = check_morphism(&s, &e, &bad, &h, MorphismMode::Full);
        assert_eq!(r.status, Status::Falsified);
        assert!(r.witness.is_some());
    }
}
