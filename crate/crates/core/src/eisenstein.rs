//! Formal Eisenstein classes: Z_(p)-combinations of symbols `ε(v, N)` for
//! nonzero `v mod N`, modulo the distribution relations
//!
//!   ε(ℓu, N) = ℓ^k Σ_{w ∈ V/ℓV} ε(u + (N/ℓ)w, N)      (ℓ prime, ℓ | N)
//!
//! at each level, with `ε(v, M) = ε((N/M)v, N)` across levels and central
//! elements `z_q` acting by `q^k`.
//!
//! Normal forms are canonical representatives modulo the relation submodule
//! at a fixed level, taken in Hermite form over Z_(p) with every
//! non-primitive symbol ordered before every primitive one. When the level
//! module is free on the primitive symbols (prime powers, and many other
//! levels) the normal form is supported on primitive residues; at levels with
//! a prime `ℓ ‖ N` next to another prime the rewrite loop
//! `ε(ℓu) → ... → ε(ℓu)` can produce relations among primitive symbols or
//! p-torsion, and the canonical representative may keep non-primitive terms.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::arith::{factorize, is_prime, lcm, prime_divisors, Coefficient};
use crate::config::EngineConfig;
use crate::echelon::{SparseVec, ZpEchelon};
use crate::error::{Error, Result};
use crate::matrix::{smith_normal_form, ZMatrix};
use crate::orbit::{orbit_bfs_oracle, principal_generators, sphere_difference_decomposition};
use crate::residue::{Coords, ResidueVector};
use crate::schwartz::SchwartzFunction;
use crate::symplectic::subgroup::lift_element;
use crate::symplectic::{
    coset_representatives, symplectic_adjoint, AdelicGroupElement, CongruenceSubgroup, FiniteLevelElement,
};

const PRIMITIVE_BIT: u64 = 1 << 40;

fn column(v: &ResidueVector) -> u64 {
    if v.is_primitive() {
        PRIMITIVE_BIT | v.index()
    } else {
        v.index()
    }
}

fn residue_at(col: u64, level: u64, dim: usize) -> ResidueVector {
    ResidueVector::from_index(col & (PRIMITIVE_BIT - 1), level, dim)
}

/// `ℓ^k · Σ_w ε(u + (N/ℓ)w, N)` for `v = ℓu`, with `d` any divisor of `N`
/// dividing `v` (prime or composite).
fn divided_fibre(v: &ResidueVector, d: u64, weight: u32) -> Result<Vec<(ResidueVector, Coefficient)>> {
    if v.is_zero() {
        return Err(Error::ZeroInput);
    }
    if d <= 1 || v.modulus() % d != 0 {
        return Err(Error::Precondition(format!("{d} does not divide the level {}", v.modulus())));
    }
    let u = v
        .divide(d)
        .ok_or_else(|| Error::Precondition(format!("{v:?} is not divisible by {d}")))?;
    let c = Coefficient::int_pow(d, weight);
    Ok(u.fibre(d).into_iter().map(|x| (x, c.clone())).collect())
}

/// One distribution step at a prime `ℓ` dividing both the level and `v`.
pub fn distribution_rewrite(
    v: &ResidueVector,
    ell: u64,
    weight: u32,
) -> Result<Vec<(ResidueVector, Coefficient)>> {
    if v.is_primitive() {
        return Err(Error::Precondition(format!("{v:?} is primitive; no rewrite applies")));
    }
    if !is_prime(ell) {
        return Err(Error::Precondition(format!("{ell} is not prime")));
    }
    divided_fibre(v, ell, weight)
}

/// The same identity for a composite divisor `d`; a consequence of the
/// prime steps, never used as a rule.
pub fn composite_rewrite(
    v: &ResidueVector,
    d: u64,
    weight: u32,
) -> Result<Vec<(ResidueVector, Coefficient)>> {
    divided_fibre(v, d, weight)
}

/// Repeated prime rewriting terminates exactly when no prime exactly
/// divides `N` alongside another prime.
pub fn rewriting_terminates(level: u64) -> bool {
    let f = factorize(level);
    f.len() <= 1 || f.iter().all(|&(_, e)| e >= 2)
}

/// The relation submodule at one level and weight, in Hermite form.
pub struct LevelModule {
    genus: usize,
    level: u64,
    weight: u32,
    echelon: ZpEchelon,
}

impl fmt::Debug for LevelModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LevelModule(n={}, N={}, k={}, rank {})",
            self.genus,
            self.level,
            self.weight,
            self.echelon.rank()
        )
    }
}

impl LevelModule {
    fn build(genus: usize, level: u64, weight: u32, p: u64) -> Result<Self> {
        let dim = 2 * genus;
        if ResidueVector::count(level, dim) >= PRIMITIVE_BIT {
            return Err(Error::Precondition(format!("level {level} is too large to index")));
        }
        let mut echelon = ZpEchelon::new(p);
        let primes = prime_divisors(level);
        for v in ResidueVector::all(level, dim) {
            if v.is_zero() || v.is_primitive() {
                continue;
            }
            for &ell in &primes {
                let Ok(terms) = divided_fibre(&v, ell, weight) else { continue };
                let mut row = SparseVec::new();
                row.insert(column(&v), Coefficient::one());
                for (x, c) in terms {
                    let e = row.entry(column(&x)).or_insert_with(Coefficient::zero);
                    *e -= c;
                }
                echelon.insert(row);
            }
        }
        echelon.interreduce();
        Ok(LevelModule { genus, level, weight, echelon })
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn rank(&self) -> usize {
        self.echelon.rank()
    }

    /// Pivots that fall on primitive columns: relations among primitive
    /// symbols alone.
    pub fn primitive_pivots(&self) -> usize {
        self.echelon.pivot_exponents().iter().filter(|(c, _)| c & PRIMITIVE_BIT != 0).count()
    }

    /// Columns whose pivot is `p^e` with `e > 0`, with the exponent.
    pub fn torsion(&self) -> Vec<(ResidueVector, u32)> {
        self.echelon
            .pivot_exponents()
            .into_iter()
            .filter(|&(_, e)| e > 0)
            .map(|(c, e)| (residue_at(c, self.level, 2 * self.genus), e))
            .collect()
    }

    /// Every non-primitive symbol is a Z_(p)-combination of primitive ones
    /// and the primitive symbols are independent.
    pub fn is_free_on_primitive(&self) -> bool {
        let dim = 2 * self.genus;
        let nonprimitive = ResidueVector::all(self.level, dim).filter(|v| !v.is_zero() && !v.is_primitive()).count();
        self.echelon.is_saturated() && self.primitive_pivots() == 0 && self.rank() == nonprimitive
    }

    fn reduce(&self, terms: &BTreeMap<ResidueVector, Coefficient>) -> BTreeMap<ResidueVector, Coefficient> {
        let x: SparseVec = terms.iter().map(|(v, c)| (column(v), c.clone())).collect();
        let dim = 2 * self.genus;
        self.echelon
            .reduce(x)
            .into_iter()
            .map(|(c, a)| (residue_at(c, self.level, dim), a))
            .collect()
    }
}

type ModuleKey = (usize, u64, u32, u64);

/// The cached relation module for `(n, N, k, p)`.
pub fn level_module(genus: usize, level: u64, weight: u32, p: u64) -> Result<Arc<LevelModule>> {
    static CACHE: OnceLock<Mutex<HashMap<ModuleKey, Arc<LevelModule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (genus, level, weight, p);
    if let Some(m) = cache.lock().expect("module cache").get(&key) {
        return Ok(m.clone());
    }
    let m = Arc::new(LevelModule::build(genus, level, weight, p)?);
    Ok(cache.lock().expect("module cache").entry(key).or_insert(m).clone())
}

/// `Σ c_v ε(v, N)` of a fixed weight.
#[derive(Clone, PartialEq, Eq)]
pub struct FormalEisensteinClass {
    genus: usize,
    weight: u32,
    level: u64,
    terms: BTreeMap<ResidueVector, Coefficient>,
}

impl fmt::Debug for FormalEisensteinClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[k={}, N={}] ", self.weight, self.level)?;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (v, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}·ε({v})")?;
        }
        Ok(())
    }
}

impl FormalEisensteinClass {
    pub fn new(
        genus: usize,
        weight: u32,
        level: u64,
        terms: impl IntoIterator<Item = (ResidueVector, Coefficient)>,
    ) -> Result<Self> {
        if genus == 0 {
            return Err(Error::Dimension("genus 0".into()));
        }
        if level == 0 {
            return Err(Error::Malformed("level 0".into()));
        }
        let mut acc: BTreeMap<ResidueVector, Coefficient> = BTreeMap::new();
        for (v, c) in terms {
            if v.modulus() != level {
                return Err(Error::ModulusMismatch(format!("{v:?} in a class of level {level}")));
            }
            if v.dim() != 2 * genus {
                return Err(Error::Dimension(format!("{v:?} in genus {genus}")));
            }
            if c.is_zero() {
                continue;
            }
            if v.is_zero() {
                return Err(Error::Precondition("ε(0, N) is not a symbol".into()));
            }
            *acc.entry(v).or_insert_with(Coefficient::zero) += c;
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(FormalEisensteinClass { genus, weight, level, terms: acc })
    }

    pub fn zero(genus: usize, weight: u32, level: u64) -> Self {
        FormalEisensteinClass { genus, weight, level, terms: BTreeMap::new() }
    }

    pub fn symbol(weight: u32, v: &ResidueVector) -> Result<Self> {
        Self::new(v.genus(), weight, v.modulus(), [(v.clone(), Coefficient::one())])
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn terms(&self) -> &BTreeMap<ResidueVector, Coefficient> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_p_integral(&self, p: u64) -> bool {
        self.terms.values().all(|c| c.is_p_integral(p))
    }

    /// True when every term sits on a primitive residue.
    pub fn is_primitive_supported(&self) -> bool {
        self.terms.keys().all(|v| v.is_primitive())
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.genus != other.genus {
            return Err(Error::Dimension("genus mismatch".into()));
        }
        if self.weight != other.weight {
            return Err(Error::Precondition(format!(
                "weights {} and {} cannot be mixed",
                self.weight, other.weight
            )));
        }
        Ok(())
    }

    /// `ε(v, N) ↦ ε((n/N)v, n)` without normalizing.
    pub fn refine_raw(&self, n: u64) -> Result<Self> {
        if n == self.level {
            return Ok(self.clone());
        }
        if n == 0 || n % self.level != 0 {
            return Err(Error::ModulusMismatch(format!("{n} is not a multiple of {}", self.level)));
        }
        let d = n / self.level;
        let terms = self.terms.iter().map(|(v, c)| (v.scaled_into(d, n), c.clone()));
        Self::new(self.genus, self.weight, n, terms)
    }

    /// Refinement to an admissible multiple, normalized there.
    pub fn refine(&self, n: u64, cfg: &EngineConfig) -> Result<Self> {
        cfg.check_level(n)?;
        self.refine_raw(n)?.normal_form(cfg)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let n = lcm(self.level, other.level);
        let mut a = self.refine_raw(n)?;
        for (v, c) in other.refine_raw(n)?.terms {
            *a.terms.entry(v).or_insert_with(Coefficient::zero) += c;
        }
        a.terms.retain(|_, c| !c.is_zero());
        Ok(a)
    }

    pub fn scaled(&self, c: &Coefficient) -> Self {
        let mut out = self.clone();
        if c.is_zero() {
            out.terms.clear();
        } else {
            for x in out.terms.values_mut() {
                *x = &*x * c;
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(&Coefficient::from_int(-1)))
    }

    /// Canonical representative at the same level.
    pub fn normal_form(&self, cfg: &EngineConfig) -> Result<Self> {
        if self.terms.is_empty() {
            return Ok(self.clone());
        }
        cfg.check_level(self.level)?;
        if !self.is_p_integral(cfg.p) {
            return Err(Error::NonUnit(cfg.p));
        }
        let module = level_module(self.genus, self.level, self.weight, cfg.p)?;
        Ok(FormalEisensteinClass {
            genus: self.genus,
            weight: self.weight,
            level: self.level,
            terms: module.reduce(&self.terms),
        })
    }

    /// Equality in the colimit, decided at the lcm of the two levels.
    pub fn same_class(&self, other: &Self, cfg: &EngineConfig) -> Result<bool> {
        self.compatible(other)?;
        let n = lcm(self.level, other.level);
        let diff = self.refine_raw(n)?.sub(&other.refine_raw(n)?)?;
        Ok(diff.normal_form(cfg)?.is_zero())
    }

    /// Normal forms of several classes at the lcm of their levels, so that
    /// equal classes compare equal term by term.
    pub fn common_normal_forms(classes: &[Self], cfg: &EngineConfig) -> Result<Vec<Self>> {
        let n = classes.iter().fold(1, |a, x| lcm(a, x.level));
        classes.iter().map(|x| x.refine(n, cfg)).collect()
    }

    /// Rewrites with the smallest available prime until every term is
    /// primitive; fails at levels where this loops.
    pub fn rewrite_fully(&self) -> Result<Self> {
        if !rewriting_terminates(self.level) {
            return Err(Error::Precondition(format!(
                "prime rewriting cycles at level {}",
                self.level
            )));
        }
        let mut done: BTreeMap<ResidueVector, Coefficient> = BTreeMap::new();
        let mut work: VecDeque<(ResidueVector, Coefficient)> = self.terms.clone().into_iter().collect();
        while let Some((v, c)) = work.pop_front() {
            if v.is_primitive() {
                *done.entry(v).or_insert_with(Coefficient::zero) += c;
                continue;
            }
            let ell = prime_divisors(v.content())[0];
            for (x, a) in distribution_rewrite(&v, ell, self.weight)? {
                work.push_back((x, &a * &c));
            }
        }
        done.retain(|_, c| !c.is_zero());
        Ok(FormalEisensteinClass { terms: done, ..self.clone() })
    }

    fn map_residues(&self, f: impl Fn(&ResidueVector) -> ResidueVector) -> Result<Self> {
        let terms = self.terms.iter().map(|(v, c)| (f(v), c.clone()));
        Self::new(self.genus, self.weight, self.level, terms)
    }

    /// Conjugation by a finite-level element of a congruence subgroup; the
    /// element is lifted to the common level.
    pub fn conjugate_finite(&self, g: &FiniteLevelElement) -> Result<Self> {
        let n = lcm(self.level, g.level());
        let g = lift_element(g, n)?;
        self.refine_raw(n)?.map_residues(|v| g.apply(v))
    }

    /// `[g]^*` for `g = z_q · m · u`: the unit acts on residues, `m` with
    /// multiplier `c` acts by `c^k·[m/c]^*`, and `z_q` by `q^k`.
    pub fn conjugate(&self, g: &AdelicGroupElement, cfg: &EngineConfig) -> Result<Self> {
        if g.genus() != self.genus {
            return Err(Error::Dimension("genus mismatch".into()));
        }
        g.validate(cfg.cp())?;
        let mut x = self.clone();
        if let Some(u) = g.unit_part() {
            let n = lcm(x.level, u.level());
            cfg.check_level(n)?;
            let u = u.at_level(n)?;
            x = x.refine_raw(n)?.map_residues(|v| u.apply(v))?;
        }
        if *g.integral_part() != ZMatrix::identity(2 * self.genus) {
            x = x.apply_integral(g.integral_part(), g.integral_similitude(), cfg)?;
        }
        let q = g.center_scale();
        if !q.is_one() {
            x = x.scaled(&Coefficient::from_ratio(q.clone()).pow(self.weight));
        }
        x.normal_form(cfg)
    }

    /// `c^k [h]^*` with `h = m/c`. Writing `g0 = gcd(c, content(m))`, the
    /// target level is `M·c/g0` and
    /// `[h]^* ε(v, M) = Σ_{t ∈ V/adj(m)V} ε((m/g0)(v + M t), M c/g0)`.
    fn apply_integral(&self, m: &ZMatrix, c: &BigInt, cfg: &EngineConfig) -> Result<Self> {
        let g0 = c.gcd(&m.content());
        let d0 = (c / &g0)
            .to_u64()
            .ok_or_else(|| Error::Precondition("multiplier out of range".into()))?;
        let level = self
            .level
            .checked_mul(d0)
            .ok_or(Error::LevelBound { level: u64::MAX, bound: cfg.level_bound })?;
        cfg.check_level(level)?;
        let mg = m.to_q().scale(&num_rational::BigRational::new(BigInt::one(), g0)).to_z().expect("content");
        let reps = smith_normal_form(&symplectic_adjoint(m))?.cokernel_representatives();
        let factor = Coefficient::from_bigint(c.clone()).pow(self.weight);
        let mb = BigInt::from(self.level);
        let nb = BigInt::from(level);
        let mut terms = Vec::with_capacity(self.terms.len() * reps.len());
        for (v, a) in &self.terms {
            let a = a * &factor;
            for t in &reps {
                let x: Vec<BigInt> = v.coords().iter().zip(t).map(|(&vi, ti)| BigInt::from(vi) + &mb * ti).collect();
                let coords: Coords = mg
                    .apply(&x)
                    .into_iter()
                    .map(|y| y.mod_floor(&nb).to_u64().expect("reduced"))
                    .collect();
                terms.push((ResidueVector::from_reduced(level, coords), a.clone()));
            }
        }
        Self::new(self.genus, self.weight, level, terms)
    }

    /// Invariance under `K`, tested on generators at the common level.
    pub fn is_invariant(&self, k: &CongruenceSubgroup, cfg: &EngineConfig) -> Result<bool> {
        if k.genus() != self.genus {
            return Err(Error::Dimension("genus mismatch".into()));
        }
        let n = lcm(self.level, k.level());
        let x = self.refine_raw(n)?;
        let base = x.normal_form(cfg)?;
        let k = k.at_level(n)?;
        for g in k.generators() {
            if x.map_residues(|v| g.apply(v))?.normal_form(cfg)? != base {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `Σ_{γ ∈ K/L} [γ]^* x` for an `L`-invariant class.
    pub fn pushforward(&self, l: &CongruenceSubgroup, k: &CongruenceSubgroup, cfg: &EngineConfig) -> Result<Self> {
        if !self.is_invariant(l, cfg)? {
            return Err(Error::NotInvariant(format!("class is not {}-invariant", l.label())));
        }
        let reps = coset_representatives(k, l)?;
        self.sum_conjugates(&reps)?.normal_form(cfg)
    }

    /// `Σ_γ [γ]^* x` over finite-level elements, unnormalized.
    pub fn sum_conjugates(&self, reps: &[FiniteLevelElement]) -> Result<Self> {
        let Some(first) = reps.first() else {
            return Ok(Self::zero(self.genus, self.weight, self.level));
        };
        let n = lcm(self.level, first.level());
        let x = self.refine_raw(n)?;
        let mut acc: BTreeMap<ResidueVector, Coefficient> = BTreeMap::new();
        for g in reps {
            let g = lift_element(g, n)?;
            for (v, c) in &x.terms {
                *acc.entry(g.apply(v)).or_insert_with(Coefficient::zero) += c;
            }
        }
        Self::new(self.genus, self.weight, n, acc)
    }
}

/// Which route `parametrize` takes through the orbit calculus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamPath {
    /// Expand at the minimal scale and level and map each `ξ_{v,N}`.
    Canonical,
    /// Split into orbits of the principal core `K_M` and expand every orbit
    /// as a signed sum of scaled lattice cosets.
    Orbit,
    /// Sum pushforwards of single symbols from stabilizers.
    Stabilizer,
}

impl ParamPath {
    pub const ALL: [ParamPath; 3] = [ParamPath::Canonical, ParamPath::Orbit, ParamPath::Stabilizer];

    pub fn name(self) -> &'static str {
        match self {
            ParamPath::Canonical => "canonical",
            ParamPath::Orbit => "orbit",
            ParamPath::Stabilizer => "stabilizer",
        }
    }
}

impl FromStr for ParamPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(ParamPath::Canonical),
            "orbit" => Ok(ParamPath::Orbit),
            "stabilizer" => Ok(ParamPath::Stabilizer),
            _ => Err(Error::Malformed(format!("unknown path {s:?}"))),
        }
    }
}

/// `(r/s)^k` for positive integers.
fn ratio_pow(r: u64, s: u64, k: u32) -> Coefficient {
    Coefficient::int_pow(r, k) * Coefficient::int_pow_inv(s, k)
}

/// Image of `ξ_{u,t}`: `n^k Σ ε(u', n)` over the fibre of `u` at the
/// smallest admissible multiple `n` of `t`.
pub fn xi_image(u: &ResidueVector, weight: u32, cfg: &EngineConfig) -> Result<FormalEisensteinClass> {
    if u.is_zero() {
        return Err(Error::ZeroInput);
    }
    let t = u.modulus();
    let n = cfg.admissible_multiple(t)?;
    let c = Coefficient::int_pow(n, weight);
    FormalEisensteinClass::new(u.genus(), weight, n, u.fibre(n / t).into_iter().map(|x| (x, c.clone())))
}

fn check_inputs(phi: &SchwartzFunction, k: &CongruenceSubgroup, cfg: &EngineConfig) -> Result<()> {
    if phi.genus() != k.genus() {
        return Err(Error::Dimension("genus mismatch".into()));
    }
    if !k.is_admissible(cfg.cp()) {
        return Err(Error::Inadmissible(format!("{} (cp = {})", k.label(), cfg.cp())));
    }
    phi.check_admissible(cfg.cp())?;
    if !phi.is_p_integral(cfg.p) {
        return Err(Error::NonUnit(cfg.p));
    }
    if !phi.is_invariant(k)? {
        return Err(Error::NotInvariant(format!("function is not {}-invariant", k.label())));
    }
    Ok(())
}

/// The value of the universal map on a `K`-invariant Schwartz function.
pub fn parametrize(
    phi: &SchwartzFunction,
    weight: u32,
    k: &CongruenceSubgroup,
    path: ParamPath,
    cfg: &EngineConfig,
) -> Result<FormalEisensteinClass> {
    check_inputs(phi, k, cfg)?;
    let genus = phi.genus();
    if phi.is_zero() {
        return Ok(FormalEisensteinClass::zero(genus, weight, cfg.admissible_multiple(k.level())?));
    }
    let out = match path {
        ParamPath::Canonical => parametrize_canonical(phi, weight, cfg)?,
        ParamPath::Orbit => parametrize_orbit(phi, weight, k, cfg)?,
        ParamPath::Stabilizer => parametrize_stabilizer(phi, weight, k, cfg)?,
    };
    out.normal_form(cfg)
}

fn parametrize_canonical(phi: &SchwartzFunction, weight: u32, cfg: &EngineConfig) -> Result<FormalEisensteinClass> {
    let a = phi.scale();
    let n = cfg.admissible_multiple(phi.level())?;
    let c = ratio_pow(n, a, weight);
    let terms = phi.expanded(a, n)?.into_iter().map(|(v, x)| (v, &x * &c));
    FormalEisensteinClass::new(phi.genus(), weight, n, terms)
}

fn parametrize_orbit(
    phi: &SchwartzFunction,
    weight: u32,
    k: &CongruenceSubgroup,
    cfg: &EngineConfig,
) -> Result<FormalEisensteinClass> {
    let genus = phi.genus();
    let dim = 2 * genus;
    let a = phi.scale();
    let m = k.principal_core();
    let level = cfg.admissible_multiple(lcm(phi.level(), k.level()))?;
    let coeffs = phi.expanded(a, level)?;
    let gens = principal_generators(genus, m, level)?;
    let mut acc = FormalEisensteinClass::zero(genus, weight, level);
    // zero-containing pieces B·V, by B
    let mut residual: BTreeMap<u64, Coefficient> = BTreeMap::new();
    let mut seen: BTreeSet<ResidueVector> = BTreeSet::new();
    for (v, c) in &coeffs {
        if seen.contains(v) {
            continue;
        }
        let orbit = orbit_bfs_oracle(v, &gens)?;
        if orbit.iter().any(|w| coeffs.get(w) != Some(c)) {
            return Err(Error::NotInvariant(format!("K_{m}-orbit of {v:?}")));
        }
        let base = orbit.iter().next().expect("nonempty orbit").clone();
        seen.extend(orbit);
        let w: Vec<i64> = base.coords().iter().map(|&x| x as i64).collect();
        for (sign, piece) in sphere_difference_decomposition(&w, m, level)? {
            let coeff = if sign < 0 { -c.clone() } else { c.clone() };
            let r = piece.residue;
            let b = r.modulus();
            let a1 = r.content();
            if a1 == b {
                *residual.entry(b).or_insert_with(Coefficient::zero) += coeff;
                continue;
            }
            let u = r.divide(a1).expect("content divides");
            let term = xi_image(&u, weight, cfg)?.scaled(&(&coeff * &ratio_pow(a1, a, weight)));
            acc = acc.add(&term)?;
        }
    }
    residual.retain(|_, c| !c.is_zero());
    if !residual.is_empty() {
        let total = residual.values().fold(Coefficient::zero(), |s, c| s + c);
        if !total.is_zero() {
            return Err(Error::Precondition("orbit expansion does not vanish near 0".into()));
        }
        // Σ r_B ch(BV) = Σ r_B (ch(BV) − ch(B0 V)) = Σ r_B z_B ch(V ∖ (B0/B)V)
        let b0 = residual.keys().fold(1, |l, &b| lcm(l, b));
        for (&b, r) in &residual {
            let t = b0 / b;
            if t == 1 {
                continue;
            }
            let c = r * &ratio_pow(b, a, weight);
            for u in ResidueVector::all(t, dim).filter(|u| !u.is_zero()) {
                acc = acc.add(&xi_image(&u, weight, cfg)?.scaled(&c))?;
            }
        }
    }
    Ok(acc)
}

fn parametrize_stabilizer(
    phi: &SchwartzFunction,
    weight: u32,
    k: &CongruenceSubgroup,
    cfg: &EngineConfig,
) -> Result<FormalEisensteinClass> {
    let genus = phi.genus();
    let a = phi.scale();
    let level = cfg.admissible_multiple(lcm(phi.level(), k.level()))?;
    let kl = k.at_level(level)?;
    let coeffs = phi.expanded(a, level)?;
    let scale = ratio_pow(level, a, weight);
    let mut acc = FormalEisensteinClass::zero(genus, weight, level);
    let mut seen: BTreeSet<ResidueVector> = BTreeSet::new();
    for (v, c) in &coeffs {
        if seen.contains(v) {
            continue;
        }
        // K/K_v is in bijection with the orbit; the transversal gives the
        // coset representatives
        let (orbit, reps) = orbit_transversal(v, kl.generators());
        if orbit.iter().any(|w| coeffs.get(w) != Some(c)) {
            return Err(Error::NotInvariant(format!("orbit of {v:?}")));
        }
        seen.extend(orbit);
        let x = FormalEisensteinClass::symbol(weight, v)?.scaled(&(c * &scale));
        acc = acc.add(&x.sum_conjugates(&reps)?)?;
    }
    Ok(acc)
}

/// The orbit of `v` under the generated group with, for each point `w`, an
/// element mapping `v` to `w`.
pub fn orbit_transversal(
    v: &ResidueVector,
    gens: &[FiniteLevelElement],
) -> (Vec<ResidueVector>, Vec<FiniteLevelElement>) {
    let level = gens.first().map_or(v.modulus(), |g| g.level());
    let id = FiniteLevelElement::identity(v.genus(), level);
    let mut seen = BTreeSet::from([v.clone()]);
    let mut points = vec![v.clone()];
    let mut reps = vec![id];
    let mut head = 0;
    while head < points.len() {
        for g in gens {
            let y = g.apply(&points[head]);
            if seen.insert(y.clone()) {
                points.push(y);
                reps.push(g.mul(&reps[head]));
            }
        }
        head += 1;
    }
    (points, reps)
}

/// The kernel of `γ: V/NV → V/NV`, `v ↦ g^{-1}v`, for a rational `g` with
/// `g(dV) ⊆ V ⊆ gV`, `d = N/M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsogenyKernel {
    pub size: u64,
    /// `k` with `size = k^n`, when the size is a perfect `n`-th power.
    pub k_gamma: Option<u64>,
    pub isotropic: bool,
    pub representatives: Vec<ResidueVector>,
}

pub fn isogeny_kernel_data(g: &AdelicGroupElement, m: u64, n: u64) -> Result<IsogenyKernel> {
    let genus = g.genus();
    let dim = 2 * genus;
    if g.unit_part().is_some() {
        return Err(Error::Precondition("isogeny data needs a rational element".into()));
    }
    if m == 0 || n % m != 0 {
        return Err(Error::ModulusMismatch(format!("{m} does not divide {n}")));
    }
    let d = n / m;
    let gq = g.rational_matrix().expect("rational");
    let ginv = g.inverse()?.rational_matrix().expect("rational");
    let gd = gq.scale(&num_rational::BigRational::from_integer(BigInt::from(d)));
    if !gd.is_integral() || !ginv.is_integral() {
        return Err(Error::Precondition(format!("g·{d}V ⊆ V ⊆ gV fails")));
    }
    let ginv_z = ginv.to_z().expect("integral");
    let gn = gq
        .scale(&num_rational::BigRational::from_integer(BigInt::from(n)))
        .to_z()
        .expect("integral since g·dV ⊆ V");
    let nb = BigInt::from(n);
    let mut reps = Vec::new();
    for t in smith_normal_form(&ginv_z)?.cokernel_representatives() {
        let coords: Coords = gn.apply(&t).into_iter().map(|y| y.mod_floor(&nb).to_u64().expect("reduced")).collect();
        reps.push(ResidueVector::from_reduced(n, coords));
    }
    reps.sort();
    reps.dedup();
    let size = reps.len() as u64;
    let k_gamma = integer_root(size, genus as u32);
    let isotropic = reps.iter().all(|x| reps.iter().all(|y| pairing(x, y, dim) % n == 0));
    Ok(IsogenyKernel { size, k_gamma, isotropic, representatives: reps })
}

/// `⟨x, y⟩ = xᵗ J y` mod N on lifts.
fn pairing(x: &ResidueVector, y: &ResidueVector, dim: usize) -> u64 {
    let n = x.modulus() as i128;
    let g = dim / 2;
    let (a, b) = (x.coords(), y.coords());
    let mut s: i128 = 0;
    for i in 0..g {
        s += a[i] as i128 * b[g + i] as i128 - a[g + i] as i128 * b[i] as i128;
    }
    s.rem_euclid(n) as u64
}

fn integer_root(x: u64, e: u32) -> Option<u64> {
    if e == 1 {
        return Some(x);
    }
    let r = (x as f64).powf(1.0 / e as f64).round() as u64;
    (r.saturating_sub(1)..=r + 1).find(|c| c.checked_pow(e) == Some(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::QMatrix;
    use num_rational::BigRational;

    fn rv(m: u64, c: &[i64]) -> ResidueVector {
        ResidueVector::new(m, c).unwrap()
    }

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn primitive_sum(n: u64, c: i64) -> FormalEisensteinClass {
        FormalEisensteinClass::new(
            1,
            1,
            n,
            ResidueVector::all(n, 2).filter(|v| v.is_primitive()).map(|v| (v, Coefficient::from_int(c))),
        )
        .unwrap()
    }

    #[test]
    fn rewrite_examples() {
        let t = distribution_rewrite(&rv(9, &[3, 0]), 3, 1).unwrap();
        assert_eq!(t.len(), 9);
        assert!(t.iter().all(|(v, c)| v.is_primitive() && [1, 4, 7].contains(&v.coords()[0]) && *c == 3.into()));
        let t0 = distribution_rewrite(&rv(9, &[3, 0]), 3, 0).unwrap();
        assert!(t0.iter().all(|(_, c)| c.is_one()));
        assert!(distribution_rewrite(&rv(9, &[1, 0]), 3, 1).is_err());
        let x = FormalEisensteinClass::symbol(0, &rv(27, &[9, 0])).unwrap().rewrite_fully().unwrap();
        assert_eq!(x.terms().len(), 81);
        assert!(x.is_primitive_supported() && x.terms().values().all(|c| c.is_one()));
        assert!(FormalEisensteinClass::symbol(0, &rv(21, &[3, 0])).unwrap().rewrite_fully().is_err());
    }

    #[test]
    fn normal_form_examples() {
        let c = cfg();
        let e = FormalEisensteinClass::symbol(1, &rv(3, &[1, 0])).unwrap();
        assert_eq!(e.normal_form(&c).unwrap(), e);
        let s = FormalEisensteinClass::symbol(1, &rv(9, &[3, 0])).unwrap();
        let rel = s.sub(&FormalEisensteinClass::new(1, 1, 9, distribution_rewrite(&rv(9, &[3, 0]), 3, 1).unwrap()).unwrap()).unwrap();
        assert!(rel.normal_form(&c).unwrap().is_zero());
        let nf = s.normal_form(&c).unwrap();
        assert_eq!(nf, s.rewrite_fully().unwrap());
        // refine then normal form
        assert_eq!(e.refine(9, &c).unwrap(), nf);
    }

    #[test]
    fn module_structure() {
        let m9 = level_module(1, 9, 1, 5).unwrap();
        assert!(m9.is_free_on_primitive());
        let m21 = level_module(1, 21, 0, 5).unwrap();
        assert!(!m21.is_free_on_primitive());
        assert!(m21.primitive_pivots() > 0);
        let m21k2 = level_module(1, 21, 2, 5).unwrap();
        assert!(!m21k2.torsion().is_empty());
    }

    #[test]
    fn composite_matches_prime_chain() {
        let c = cfg();
        for k in 0..3 {
            let v = rv(63, &[21, 0]);
            let comp = FormalEisensteinClass::new(1, k, 63, composite_rewrite(&v, 21, k).unwrap()).unwrap();
            let s = FormalEisensteinClass::symbol(k, &v).unwrap();
            assert!(s.same_class(&comp, &c).unwrap());
        }
    }

    #[test]
    fn conjugation_examples() {
        let c = cfg();
        let e = FormalEisensteinClass::symbol(2, &rv(3, &[1, 0])).unwrap();
        let id = AdelicGroupElement::identity(1);
        assert_eq!(e.conjugate(&id, &c).unwrap(), e);
        let z3 = AdelicGroupElement::center(1, q(3, 1)).unwrap();
        assert_eq!(e.conjugate(&z3, &c).unwrap(), e.scaled(&9.into()));
        let g = AdelicGroupElement::from_rational(&QMatrix::diagonal(&[q(1, 1), q(1, 3)])).unwrap();
        let e1 = FormalEisensteinClass::symbol(1, &rv(3, &[1, 0])).unwrap();
        let got = e1.conjugate(&g, &c).unwrap();
        let expect = FormalEisensteinClass::new(1, 1, 9, (0..3).map(|b| (rv(9, &[3, 3 * b]), Coefficient::one())))
            .unwrap()
            .normal_form(&c)
            .unwrap();
        assert_eq!(got, expect);
        assert_eq!(got.terms().len(), 27);
        assert!(got.terms().values().all(|x| *x == 3.into()));
    }

    #[test]
    fn pushforward_examples() {
        let c = cfg();
        let k3 = CongruenceSubgroup::principal(1, 3, 9).unwrap();
        let k9 = CongruenceSubgroup::principal(1, 9, 9).unwrap();
        let e = FormalEisensteinClass::symbol(0, &rv(3, &[1, 0])).unwrap();
        let up = e.refine(9, &c).unwrap();
        let down = up.pushforward(&k9, &k3, &c).unwrap();
        assert!(down.same_class(&e.scaled(&81.into()), &c).unwrap());
        let x = FormalEisensteinClass::symbol(0, &rv(9, &[1, 0])).unwrap();
        let y = x.pushforward(&k9, &k3, &c).unwrap();
        let expect = FormalEisensteinClass::new(
            1,
            0,
            9,
            rv(3, &[1, 0]).fibre(3).into_iter().map(|u| (u, Coefficient::from_int(9))),
        )
        .unwrap();
        assert_eq!(y, expect.normal_form(&c).unwrap());
        assert!(matches!(x.pushforward(&k3, &k3, &c), Err(Error::NotInvariant(_))));
    }

    #[test]
    fn parametrize_examples() {
        let c = cfg();
        let k3 = CongruenceSubgroup::principal(1, 3, 3).unwrap();
        let xi = SchwartzFunction::xi(&rv(3, &[1, 0])).unwrap();
        for path in ParamPath::ALL {
            let p0 = parametrize(&xi, 0, &k3, path, &c).unwrap();
            assert_eq!(p0, FormalEisensteinClass::symbol(0, &rv(3, &[1, 0])).unwrap(), "{path:?}");
            let p2 = parametrize(&xi, 2, &k3, path, &c).unwrap();
            assert_eq!(p2, FormalEisensteinClass::symbol(2, &rv(3, &[1, 0])).unwrap().scaled(&9.into()));
        }
        // ch(3V ∖ 9V) at weight 1
        let annulus = SchwartzFunction::new(
            2,
            1,
            9,
            ResidueVector::all(9, 2).filter(|v| !v.is_zero() && v.content() == 3).map(|v| (v, Coefficient::one())),
        )
        .unwrap();
        let k9 = CongruenceSubgroup::full(1, 9);
        for path in ParamPath::ALL {
            let got = parametrize(&annulus, 1, &k9, path, &c).unwrap();
            assert!(got.same_class(&primitive_sum(9, 27), &c).unwrap(), "{path:?}");
        }
    }

    #[test]
    fn isogeny_examples() {
        let id = AdelicGroupElement::identity(1);
        let k = isogeny_kernel_data(&id, 3, 3).unwrap();
        assert_eq!((k.size, k.k_gamma), (1, Some(1)));
        let z = AdelicGroupElement::center(1, q(1, 3)).unwrap();
        let k = isogeny_kernel_data(&z, 3, 9).unwrap();
        assert_eq!((k.size, k.k_gamma, k.isotropic), (9, Some(9), true));
        let g = AdelicGroupElement::from_rational(&QMatrix::diagonal(&[q(1, 1), q(1, 3)])).unwrap();
        let k = isogeny_kernel_data(&g, 3, 9).unwrap();
        assert_eq!((k.size, k.isotropic), (3, true));
        assert_eq!(k.representatives, vec![rv(9, &[0, 0]), rv(9, &[0, 3]), rv(9, &[0, 6])]);
        assert!(isogeny_kernel_data(&z, 3, 3).is_err());
    }
}
