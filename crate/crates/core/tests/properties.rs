use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use eisdist::arith::{gcd, Coefficient};
use eisdist::config::EngineConfig;
use eisdist::eisenstein::FormalEisensteinClass;
use eisdist::json::{class_document, parse_class_document, parse_group_element, parse_schwartz_document, schwartz_document, to_text};
use eisdist::orbit::euclidean_reduce;
use eisdist::residue::ResidueVector;
use eisdist::schwartz::SchwartzFunction;
use eisdist::symplectic::is_symplectic_similitude;

/// Supported elements away from cp = 10.
const ELEMENTS: [&str; 9] = [
    "z:3",
    "z:1/3",
    "z:7",
    "diag:1,3",
    "diag:1/3,1",
    "mat:1,1;0,1",
    "mat:2,1;1,1",
    "mat:1,0;-3,1",
    "diag:1,1/3*unit:2,0;0,5@9",
];

const COEFFS: [(i64, i64); 6] = [(1, 1), (-1, 1), (2, 1), (1, 3), (-7, 2), (3, 7)];

fn cfg() -> EngineConfig {
    EngineConfig::default()
}

fn residue(level: u64) -> impl Strategy<Value = ResidueVector> {
    (0..level as i64, 0..level as i64)
        .prop_filter("nonzero", |&(a, b)| a != 0 || b != 0)
        .prop_map(move |(a, b)| ResidueVector::new(level, &[a, b]).unwrap())
}

fn combination(levels: &'static [u64]) -> impl Strategy<Value = Vec<(ResidueVector, Coefficient)>> {
    prop::sample::select(levels).prop_flat_map(|n| {
        prop::collection::vec((residue(n), prop::sample::select(&COEFFS[..])), 1..5).prop_map(|terms| {
            terms.into_iter().map(|(v, (a, b))| (v, Coefficient::new(a, b).unwrap())).collect()
        })
    })
}

fn schwartz() -> impl Strategy<Value = SchwartzFunction> {
    combination(&[3, 9]).prop_map(|terms| {
        let n = terms[0].0.modulus();
        SchwartzFunction::new(2, 1, n, terms).unwrap()
    })
}

fn class(levels: &'static [u64]) -> impl Strategy<Value = (FormalEisensteinClass, u32)> {
    (combination(levels), 0..=2u32).prop_map(|(terms, k)| {
        let n = terms[0].0.modulus();
        (FormalEisensteinClass::new(1, k, n, terms).unwrap(), k)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euclid_witness_is_a_similitude(genus in 1usize..=2, seed in prop::collection::vec(-100i64..=100, 4)) {
        let v = &seed[..2 * genus];
        prop_assume!(v.iter().any(|&x| x != 0));
        let (alpha, w) = euclidean_reduce(v).unwrap();
        let g = v.iter().fold(0u64, |a, &x| gcd(a, x.unsigned_abs()));
        prop_assert_eq!(&alpha, &BigInt::from(g));
        let image = w.apply(&v.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>());
        prop_assert_eq!(&image[0], &alpha);
        prop_assert!(image[1..].iter().all(Zero::is_zero));
        let (sim, c) = is_symplectic_similitude(&w.to_q()).unwrap();
        prop_assert!(sim);
        let c = c.unwrap();
        prop_assert!(c == BigRational::one() || c == -BigRational::one());
    }

    #[test]
    fn action_composes(phi in schwartz(), i in 0..ELEMENTS.len(), j in 0..ELEMENTS.len()) {
        let g = parse_group_element(ELEMENTS[i], 1).unwrap();
        let h = parse_group_element(ELEMENTS[j], 1).unwrap();
        // products outside z·m·u are refused, not mis-multiplied
        let Ok(gh) = g.mul(&h) else { return Ok(()) };
        let lhs = phi.act(&h, 10).unwrap().act(&g, 10).unwrap();
        prop_assert_eq!(lhs, phi.act(&gh, 10).unwrap());
    }

    #[test]
    fn action_is_linear(a in schwartz(), b in schwartz(), i in 0..ELEMENTS.len()) {
        let g = parse_group_element(ELEMENTS[i], 1).unwrap();
        let lhs = a.add(&b).unwrap().act(&g, 10).unwrap();
        prop_assert_eq!(lhs, a.act(&g, 10).unwrap().add(&b.act(&g, 10).unwrap()).unwrap());
    }

    #[test]
    fn conjugation_composes((x, _) in class(&[3, 9]), i in 0..ELEMENTS.len(), j in 0..ELEMENTS.len()) {
        let cfg = cfg();
        let g = parse_group_element(ELEMENTS[i], 1).unwrap();
        let h = parse_group_element(ELEMENTS[j], 1).unwrap();
        let Ok(gh) = g.mul(&h) else { return Ok(()) };
        let lhs = x.conjugate(&h, &cfg).unwrap().conjugate(&g, &cfg).unwrap();
        let rhs = x.conjugate(&gh, &cfg).unwrap();
        prop_assert!(lhs.same_class(&rhs, &cfg).unwrap(), "{:?} vs {:?}", lhs, rhs);
    }

    #[test]
    fn normal_form_is_idempotent_and_linear((x, k) in class(&[9, 21, 63]), (y, _) in class(&[9, 21, 63])) {
        let cfg = cfg();
        let y = FormalEisensteinClass::new(1, k, y.level(), y.terms().clone()).unwrap();
        let nx = x.normal_form(&cfg).unwrap();
        prop_assert_eq!(&nx.normal_form(&cfg).unwrap(), &nx);
        let sum = x.add(&y).unwrap();
        let parts = nx.add(&y.normal_form(&cfg).unwrap()).unwrap();
        prop_assert_eq!(sum.normal_form(&cfg).unwrap(), parts.normal_form(&cfg).unwrap());
    }

    #[test]
    fn refinement_preserves_the_class((x, _) in class(&[3, 9, 21])) {
        let cfg = cfg();
        let up = x.refine_raw(x.level() * 3).unwrap();
        prop_assert!(x.same_class(&up, &cfg).unwrap());
        prop_assert_eq!(up.normal_form(&cfg).unwrap(), x.refine(x.level() * 3, &cfg).unwrap());
    }

    #[test]
    fn schwartz_json_round_trips(phi in schwartz()) {
        let text = to_text(&schwartz_document(&phi).unwrap());
        let back = parse_schwartz_document(&text).unwrap();
        prop_assert_eq!(&back, &phi);
        prop_assert_eq!(to_text(&schwartz_document(&back).unwrap()), text);
    }

    #[test]
    fn class_json_round_trips((x, _) in class(&[3, 9, 21, 63])) {
        let text = to_text(&class_document(&x).unwrap());
        let back = parse_class_document(&text).unwrap();
        prop_assert_eq!(&back, &x);
        prop_assert_eq!(to_text(&class_document(&back).unwrap()), text);
    }
}
