use hypermonodromy::fc::{self, SubsetIndex};
use hypermonodromy::ghg;
use hypermonodromy::numerics::{default_tolerance, mat_inv, mat_mul, BigComplex, CMatrix};
use hypermonodromy::params::{format_rational, parse_rational, random_fc, random_ghg, Vee};
use hypermonodromy::verify;
use num_rational::Rational64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PREC: u32 = 192;

fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        let entries = v.into_iter().map(|(re, im)| BigComplex::from_parts_f64(re, im, PREC)).collect();
        CMatrix::from_entries(n, entries).unwrap()
    })
}

fn pair(max: usize) -> impl Strategy<Value = (CMatrix, CMatrix, CMatrix)> {
    (1..=max).prop_flat_map(|n| (matrix(n), matrix(n), matrix(n)))
}

fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    a.max_abs_diff(b).unwrap() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_is_associative((a, b, c) in pair(5)) {
        let left = mat_mul(&mat_mul(&a, &b).unwrap(), &c).unwrap();
        let right = mat_mul(&a, &mat_mul(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-50));
    }

    #[test]
    fn determinant_is_multiplicative((a, b, _) in pair(5)) {
        let ab = mat_mul(&a, &b).unwrap().det();
        let prod = &a.det() * &b.det();
        prop_assert!((&ab - &prod).abs_f64() <= 1e-50);
    }

    #[test]
    fn inverse_round_trips((a, _, _) in pair(5)) {
        prop_assume!(a.det().abs_f64() > 1e-6);
        let inv = mat_inv(&a).unwrap();
        let id = CMatrix::identity(a.n(), PREC);
        prop_assert!(close(&mat_mul(&a, &inv).unwrap(), &id, 1e-40));
        prop_assert!(close(&mat_inv(&inv).unwrap(), &a, 1e-40));
    }

    #[test]
    fn vee_is_an_involutive_homomorphism((a, b, _) in pair(4)) {
        prop_assert!(close(&a.vee().vee(), &a, 0.0));
        let lhs = mat_mul(&a, &b).unwrap().vee();
        let rhs = mat_mul(&a.vee(), &b.vee()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-50));
    }

    #[test]
    fn rational_text_round_trips(n in -1000i64..1000, d in 1i64..1000) {
        let r = Rational64::new(n, d);
        prop_assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
    }

    #[test]
    fn subset_position_round_trips(m in 1usize..8, raw in any::<u32>()) {
        let mask = raw & ((1u32 << m) - 1);
        let s = SubsetIndex::from_mask(m, mask);
        prop_assert_eq!(SubsetIndex::from_position(m, s.position()), s.clone());
        prop_assert_eq!(s.len(), mask.count_ones() as usize);
    }

    #[test]
    fn ghg_sets_satisfy_every_identity(seed in any::<u64>(), p in 2usize..=5) {
        let params = random_ghg(&mut ChaCha8Rng::seed_from_u64(seed), p);
        let set = ghg::build_circuit_set(&params, PREC).unwrap();
        let tol = default_tolerance(PREC);
        for c in verify::ghg_checks(&set, tol) {
            prop_assert!(c.pass, "{} residual {:?} for {:?}", c.name, c.residual, params);
        }
    }

    #[test]
    fn fc_sets_satisfy_every_identity(seed in any::<u64>(), m in 1usize..=3) {
        let params = random_fc(&mut ChaCha8Rng::seed_from_u64(seed), m);
        let set = fc::build_circuit_set(&params, PREC).unwrap();
        let tol = default_tolerance(PREC);
        for c in verify::fc_checks(&set, tol) {
            prop_assert!(!c.failed(), "{} residual {:?} for {:?}", c.name, c.residual, params);
        }
    }
}
