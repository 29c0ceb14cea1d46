//! JSON wire formats and the compact command-line shorthands that feed them.
//!
//! Every document carries `"format": 1` and a `"kind"`. Coefficients are
//! `"num/den"` strings, residues are integer arrays (reduced on output),
//! rational matrices are row-major arrays of `"num/den"` strings.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arith::Coefficient;
use crate::cosets::CompactOpenSet;
use crate::eisenstein::FormalEisensteinClass;
use crate::error::{Error, Result};
use crate::matrix::QMatrix;
use crate::residue::ResidueVector;
use crate::schwartz::SchwartzFunction;
use crate::symplectic::{AdelicGroupElement, CongruenceSubgroup, FiniteLevelElement};

pub const FORMAT: u64 = 1;

/// `{"format": 1, "kind": kind, ...body}`; the body must serialize to an
/// object.
pub fn envelope(kind: &str, body: &impl Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(body).map_err(|e| Error::Malformed(e.to_string()))?;
    let obj = v.as_object_mut().ok_or_else(|| Error::Malformed("document body is not an object".into()))?;
    obj.insert("format".into(), Value::from(FORMAT));
    obj.insert("kind".into(), Value::from(kind));
    Ok(v)
}

/// Checks the version and kind and strips both.
pub fn open_envelope(text: &str, kind: &str) -> Result<Value> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| Error::Malformed(format!("JSON: {e}")))?;
    let obj = v.as_object_mut().ok_or_else(|| Error::Malformed("expected a JSON object".into()))?;
    match obj.remove("format") {
        Some(Value::Number(n)) if n.as_u64() == Some(FORMAT) => {}
        // bare values are accepted as input
        None => {}
        Some(other) => return Err(Error::Malformed(format!("unsupported format {other}"))),
    }
    match obj.remove("kind") {
        Some(Value::String(k)) if k == kind => {}
        None => {}
        Some(other) => return Err(Error::Malformed(format!("expected kind {kind:?}, found {other}"))),
    }
    Ok(v)
}

pub fn to_text(v: &Value) -> String {
    serde_json::to_string(v).expect("values always serialize")
}

fn from_value<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Malformed(e.to_string()))
}

fn residue(modulus: u64, coords: &[i64]) -> Result<ResidueVector> {
    ResidueVector::new(modulus, coords)
}

fn coords(v: &ResidueVector) -> Vec<i64> {
    v.coords().iter().map(|&x| x as i64).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntry {
    pub residue: Vec<i64>,
    pub value: Coefficient,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchwartzWire {
    pub dim: usize,
    pub scale: u64,
    pub level: u64,
    pub coeffs: Vec<CoeffEntry>,
}

impl From<&SchwartzFunction> for SchwartzWire {
    fn from(f: &SchwartzFunction) -> Self {
        SchwartzWire {
            dim: f.dim(),
            scale: f.scale(),
            level: f.level(),
            coeffs: f
                .coefficients()
                .iter()
                .map(|(v, c)| CoeffEntry { residue: coords(v), value: c.clone() })
                .collect(),
        }
    }
}

impl SchwartzWire {
    pub fn build(&self) -> Result<SchwartzFunction> {
        let terms = self
            .coeffs
            .iter()
            .map(|e| Ok((residue(self.level, &e.residue)?, e.value.clone())))
            .collect::<Result<Vec<_>>>()?;
        for (v, _) in &terms {
            if v.dim() != self.dim {
                return Err(Error::Dimension(format!("residue of length {} in dimension {}", v.dim(), self.dim)));
            }
        }
        SchwartzFunction::new(self.dim, self.scale, self.level, terms)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermEntry {
    pub residue: Vec<i64>,
    pub coeff: Coefficient,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassWire {
    pub genus: usize,
    pub weight: u32,
    pub level: u64,
    pub terms: Vec<TermEntry>,
}

impl From<&FormalEisensteinClass> for ClassWire {
    fn from(x: &FormalEisensteinClass) -> Self {
        ClassWire {
            genus: x.genus(),
            weight: x.weight(),
            level: x.level(),
            terms: x.terms().iter().map(|(v, c)| TermEntry { residue: coords(v), coeff: c.clone() }).collect(),
        }
    }
}

impl ClassWire {
    pub fn build(&self) -> Result<FormalEisensteinClass> {
        let terms = self
            .terms
            .iter()
            .map(|e| Ok((residue(self.level, &e.residue)?, e.coeff.clone())))
            .collect::<Result<Vec<_>>>()?;
        FormalEisensteinClass::new(self.genus, self.weight, self.level, terms)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetWire {
    pub dim: usize,
    pub scale: u64,
    pub level: u64,
    pub residues: Vec<Vec<i64>>,
}

impl From<&CompactOpenSet> for SetWire {
    fn from(s: &CompactOpenSet) -> Self {
        SetWire { dim: s.dim(), scale: s.scale(), level: s.level(), residues: s.residues().map(coords).collect() }
    }
}

impl SetWire {
    pub fn build(&self) -> Result<CompactOpenSet> {
        let rs = self.residues.iter().map(|r| residue(self.level, r)).collect::<Result<Vec<_>>>()?;
        CompactOpenSet::from_residues(self.dim, self.scale, self.level, rs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementWire {
    pub level: u64,
    pub rows: Vec<Vec<i64>>,
}

impl From<&FiniteLevelElement> for ElementWire {
    fn from(g: &FiniteLevelElement) -> Self {
        ElementWire { level: g.level(), rows: g.rows() }
    }
}

impl ElementWire {
    pub fn build(&self) -> Result<FiniteLevelElement> {
        let d = self.rows.len();
        if d == 0 || d % 2 != 0 {
            return Err(Error::Dimension(format!("{d} rows")));
        }
        FiniteLevelElement::new(d / 2, self.level, &self.rows)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupWire {
    pub genus: usize,
    pub level: u64,
    pub generators: Vec<Vec<Vec<i64>>>,
}

impl From<&CongruenceSubgroup> for SubgroupWire {
    fn from(k: &CongruenceSubgroup) -> Self {
        SubgroupWire { genus: k.genus(), level: k.level(), generators: k.generators().iter().map(|g| g.rows()).collect() }
    }
}

impl SubgroupWire {
    pub fn build(&self) -> Result<CongruenceSubgroup> {
        let gens = self
            .generators
            .iter()
            .map(|rows| FiniteLevelElement::new(self.genus, self.level, rows))
            .collect::<Result<Vec<_>>>()?;
        CongruenceSubgroup::generated(self.genus, self.level, gens)
    }
}

/// `z_center · integral · unit`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupElementWire {
    pub center: Coefficient,
    pub integral: Vec<Vec<Coefficient>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<ElementWire>,
}

impl From<&AdelicGroupElement> for GroupElementWire {
    fn from(g: &AdelicGroupElement) -> Self {
        let m = g.integral_part();
        GroupElementWire {
            center: Coefficient::from_ratio(g.center_scale().clone()),
            integral: (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| Coefficient::from_bigint(m.get(i, j).clone())).collect())
                .collect(),
            unit: g.unit_part().map(ElementWire::from),
        }
    }
}

impl GroupElementWire {
    /// Accepts any rational similitude in `integral`; it is refactored as
    /// `z_q·m` before the unit part is attached.
    pub fn build(&self) -> Result<AdelicGroupElement> {
        let d = self.integral.len();
        let data: Vec<BigRational> = self
            .integral
            .iter()
            .flat_map(|r| r.iter().map(|c| c.as_ratio().clone()))
            .collect();
        if self.integral.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("matrix is not square".into()));
        }
        let m = QMatrix::from_entries(d, d, data)?;
        let g = AdelicGroupElement::from_rational(&m.scale(self.center.as_ratio()))?;
        match &self.unit {
            Some(u) => g.with_unit(u.build()?),
            None => Ok(g),
        }
    }
}

pub fn schwartz_document(f: &SchwartzFunction) -> Result<Value> {
    envelope("schwartz", &SchwartzWire::from(f))
}

pub fn class_document(x: &FormalEisensteinClass) -> Result<Value> {
    envelope("class", &ClassWire::from(x))
}

pub fn parse_schwartz_document(text: &str) -> Result<SchwartzFunction> {
    from_value::<SchwartzWire>(open_envelope(text, "schwartz")?)?.build()
}

pub fn parse_class_document(text: &str) -> Result<FormalEisensteinClass> {
    from_value::<ClassWire>(open_envelope(text, "class")?)?.build()
}

pub fn parse_subgroup_document(text: &str) -> Result<CongruenceSubgroup> {
    from_value::<SubgroupWire>(open_envelope(text, "subgroup")?)?.build()
}

pub fn parse_group_element_document(text: &str) -> Result<AdelicGroupElement> {
    from_value::<GroupElementWire>(open_envelope(text, "element")?)?.build()
}

// Shorthands. Vectors are comma lists, `v@N` is a residue mod N.

pub fn parse_ints(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|_| Error::Malformed(format!("integer list {s:?}"))))
        .collect()
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| Error::Malformed(format!("positive integer {s:?}")))
}

/// `a,b,...@N`.
pub fn parse_residue(s: &str) -> Result<ResidueVector> {
    let (v, n) = s.split_once('@').ok_or_else(|| Error::Malformed(format!("expected v@N, got {s:?}")))?;
    residue(parse_u64(n)?, &parse_ints(v)?)
}

/// `K3@9`, `full@9`, `stab:1,0@3 in K1@9` (stabilizer of a residue inside a
/// parent), or a subgroup document.
pub fn parse_subgroup(s: &str, genus: usize) -> Result<CongruenceSubgroup> {
    let s = s.trim();
    if s.starts_with('{') {
        return parse_subgroup_document(s);
    }
    if let Some(rest) = s.strip_prefix("stab:") {
        let (v, parent) = rest.split_once(" in ").unwrap_or((rest, ""));
        let v = parse_residue(v)?;
        let parent = if parent.is_empty() {
            CongruenceSubgroup::full(v.genus(), v.modulus())
        } else {
            parse_subgroup(parent, v.genus())?
        };
        return CongruenceSubgroup::stabilizer(&parent, &v);
    }
    let (name, level) = s.split_once('@').ok_or_else(|| Error::Malformed(format!("subgroup {s:?}")))?;
    let level = parse_u64(level)?;
    if name == "full" {
        return Ok(CongruenceSubgroup::full(genus, level));
    }
    let m = name.strip_prefix('K').ok_or_else(|| Error::Malformed(format!("subgroup {s:?}")))?;
    CongruenceSubgroup::principal(genus, parse_u64(m)?, level)
}

fn parse_rational(s: &str) -> Result<BigRational> {
    Ok(s.parse::<Coefficient>()?.as_ratio().clone())
}

/// Factors joined by `*`: `z:q`, `diag:a,b,...`, `mat:a,b;c,d` (rational
/// entries), `unit:a,b;c,d@N`. At most one unit, last.
pub fn parse_group_element(s: &str, genus: usize) -> Result<AdelicGroupElement> {
    let s = s.trim();
    if s.starts_with('{') {
        return parse_group_element_document(s);
    }
    let d = 2 * genus;
    let mut m = QMatrix::identity(d);
    let mut unit = None;
    for factor in s.split('*').map(str::trim) {
        if unit.is_some() {
            return Err(Error::Malformed("the unit part must come last".into()));
        }
        let (tag, body) = factor.split_once(':').ok_or_else(|| Error::Malformed(format!("factor {factor:?}")))?;
        let rows = |body: &str| -> Result<Vec<Vec<BigRational>>> {
            body.split(';').map(|r| r.split(',').map(|x| parse_rational(x.trim())).collect()).collect()
        };
        let f = match tag {
            "z" => QMatrix::scalar(d, &parse_rational(body)?),
            "diag" => QMatrix::diagonal(&body.split(',').map(|x| parse_rational(x.trim())).collect::<Result<Vec<_>>>()?),
            "mat" => {
                let r = rows(body)?;
                QMatrix::from_entries(r.len(), r.first().map_or(0, Vec::len), r.into_iter().flatten().collect())?
            }
            "unit" => {
                let (body, level) =
                    body.split_once('@').ok_or_else(|| Error::Malformed(format!("unit {body:?} needs @N")))?;
                let r: Vec<Vec<i64>> = body.split(';').map(parse_ints).collect::<Result<_>>()?;
                unit = Some(FiniteLevelElement::new(genus, parse_u64(level)?, &r)?);
                continue;
            }
            _ => return Err(Error::Malformed(format!("unknown factor {tag:?}"))),
        };
        if f.rows() != d || f.cols() != d {
            return Err(Error::Dimension(format!("factor {factor:?} in genus {genus}")));
        }
        m = m.mul(&f);
    }
    let g = AdelicGroupElement::from_rational(&m)?;
    match unit {
        Some(u) => g.with_unit(u),
        None => Ok(g),
    }
}

/// `basis:v@N` (the indicator `ξ_{v,N}`), `annulus:A,B` (the indicator of
/// `AV ∖ BV`, `A | B`), `ch:v1;v2;...@N`, or a Schwartz document.
pub fn parse_schwartz(s: &str, genus: usize) -> Result<SchwartzFunction> {
    let s = s.trim();
    if s.starts_with('{') {
        return parse_schwartz_document(s);
    }
    let d = 2 * genus;
    if let Some(v) = s.strip_prefix("basis:") {
        return SchwartzFunction::xi(&parse_residue(v)?);
    }
    if let Some(ab) = s.strip_prefix("annulus:") {
        let (a, b) = ab.split_once(',').ok_or_else(|| Error::Malformed(format!("annulus {ab:?}")))?;
        let (a, b) = (parse_u64(a)?, parse_u64(b)?);
        if a == 0 || b % a != 0 || a == b {
            return Err(Error::Malformed(format!("annulus needs A | B, A < B (got {a}, {b})")));
        }
        let terms = ResidueVector::all(b / a, d).filter(|u| !u.is_zero()).map(|u| (u.scaled_into(a, b), Coefficient::one()));
        return SchwartzFunction::new(d, 1, b, terms);
    }
    if let Some(rest) = s.strip_prefix("ch:") {
        let (vs, n) = rest.split_once('@').ok_or_else(|| Error::Malformed(format!("{s:?} needs @N")))?;
        let n = parse_u64(n)?;
        let rs = vs.split(';').map(|v| residue(n, &parse_ints(v)?)).collect::<Result<Vec<_>>>()?;
        return SchwartzFunction::new(d, 1, n, rs.into_iter().map(|v| (v, Coefficient::one())));
    }
    Err(Error::Malformed(format!("Schwartz function {s:?}")))
}

/// Terms `[c*]eps:v@N` joined by `+`, or a class document.
pub fn parse_class(s: &str, weight: u32) -> Result<FormalEisensteinClass> {
    let s = s.trim();
    if s.starts_with('{') {
        return parse_class_document(s);
    }
    let mut acc: Option<FormalEisensteinClass> = None;
    for term in s.split('+').map(str::trim) {
        let (c, sym) = match term.split_once('*') {
            Some((c, sym)) => (c.trim().parse::<Coefficient>()?, sym.trim()),
            None => (Coefficient::one(), term),
        };
        let v = sym.strip_prefix("eps:").ok_or_else(|| Error::Malformed(format!("term {term:?}")))?;
        let x = FormalEisensteinClass::symbol(weight, &parse_residue(v)?)?.scaled(&c);
        acc = Some(match acc {
            None => x,
            Some(a) => a.add(&x)?,
        });
    }
    acc.ok_or_else(|| Error::Malformed("empty class".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;

    fn roundtrip_schwartz(f: &SchwartzFunction) {
        let text = to_text(&schwartz_document(f).unwrap());
        assert!(text.contains("\"format\":1"));
        assert_eq!(&parse_schwartz_document(&text).unwrap(), f);
        // canonical: re-serialization is byte-identical
        assert_eq!(to_text(&schwartz_document(&parse_schwartz_document(&text).unwrap()).unwrap()), text);
    }

    #[test]
    fn schwartz_roundtrip() {
        roundtrip_schwartz(&parse_schwartz("basis:1,0@3", 1).unwrap());
        roundtrip_schwartz(&parse_schwartz("annulus:3,9", 1).unwrap());
        roundtrip_schwartz(&parse_schwartz("ch:1,0;0,1@7", 1).unwrap());
        roundtrip_schwartz(&parse_schwartz("basis:1,0,2,0@3", 2).unwrap());
        roundtrip_schwartz(&SchwartzFunction::zero(2));
        let a = parse_schwartz("annulus:3,9", 1).unwrap();
        assert_eq!((a.level(), a.coefficients().len()), (9, 8));
        assert!(a.coefficients().keys().all(|v| v.content() == 3));
        let f = parse_schwartz("basis:1,2@9", 1).unwrap().scaled(&"3/7".parse().unwrap());
        roundtrip_schwartz(&f);
    }

    #[test]
    fn class_roundtrip() {
        let cfg = EngineConfig::default();
        let x = parse_class("2*eps:3,0@9 + -1/7*eps:1,1@9", 1).unwrap();
        let text = to_text(&class_document(&x).unwrap());
        assert_eq!(parse_class_document(&text).unwrap(), x);
        let y = x.normal_form(&cfg).unwrap();
        let text = to_text(&class_document(&y).unwrap());
        assert_eq!(parse_class(&text, 0).unwrap(), y);
        let z = FormalEisensteinClass::zero(1, 2, 9);
        assert_eq!(parse_class_document(&to_text(&class_document(&z).unwrap())).unwrap(), z);
    }

    #[test]
    fn element_and_subgroup_roundtrip() {
        let g = parse_group_element("diag:1/3,1*unit:2,0;0,1@9", 1).unwrap();
        let w = envelope("element", &GroupElementWire::from(&g)).unwrap();
        let back = parse_group_element(&to_text(&w), 1).unwrap();
        assert_eq!(back, g);
        assert_eq!(parse_group_element("z:3", 1).unwrap(), AdelicGroupElement::center(1, BigRational::from_integer(3.into())).unwrap());
        let k = parse_subgroup("stab:1,0@3 in K3@9", 1).unwrap();
        let w = envelope("subgroup", &SubgroupWire::from(&k)).unwrap();
        let back = parse_subgroup(&to_text(&w), 1).unwrap();
        assert!(back.is_subgroup_of(&k) && k.is_subgroup_of(&back));
        assert_eq!(back.order().unwrap(), k.order().unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(open_envelope(r#"{"format":2}"#, "class"), Err(Error::Malformed(_))));
        assert!(matches!(open_envelope(r#"{"format":1,"kind":"schwartz"}"#, "class"), Err(Error::Malformed(_))));
        assert!(parse_class_document(r#"{"genus":1,"weight":1,"level":9,"terms":[{"residue":[1,0],"coeff":"x"}]}"#)
            .is_err());
        assert!(parse_schwartz("annulus:3,3", 1).is_err());
        assert!(parse_group_element("unit:1,0;0,1@9*z:3", 1).is_err());
        assert!(parse_residue("1,0").is_err());
    }
}
