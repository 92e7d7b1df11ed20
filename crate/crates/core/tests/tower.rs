use proptest::prelude::*;

use wlfactor::fppoly::{lift_factor, poly_gcd, resultant_via_charpoly};
use wlfactor::tower::{GcdMode, GcdOutcome};
use wlfactor::{FieldCtx, FpPoly, Tower, TowerPoly};

const P: u64 = 101;

fn ctx() -> FieldCtx {
    FieldCtx::new(P).unwrap()
}

fn roots(max: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::btree_set(0..P, 1..=max).prop_map(|s| s.into_iter().collect())
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0..P, len)
}

/// Evaluates a polynomial over `F_p[x]/(f)` at `x = xi`.
fn at(t: &Tower, q: &TowerPoly, xi: u64) -> FpPoly {
    FpPoly::new(ctx(), q.coeffs().iter().map(|c| t.elem_to_fp(c).eval(xi)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn charpoly_of_x_is_the_modulus(c in coeffs(6)) {
        let mut c = c;
        c.push(1);
        let f = FpPoly::new(ctx(), c);
        let t = Tower::over_fp(&f, 256).unwrap();
        let cp = t.charpoly_of_multiplication(&t.var(1), 0).unwrap();
        prop_assert_eq!(t.poly_to_fp(&cp), f);
    }

    #[test]
    fn resultant_is_product_over_roots(rs in roots(5), h in coeffs(4)) {
        // charpoly of h(x) mod f is prod (X - h(xi)).
        let f = FpPoly::from_roots(ctx(), &rs);
        let h = FpPoly::new(ctx(), h);
        let images: Vec<u64> = rs.iter().map(|&x| h.eval(x)).collect();
        prop_assert_eq!(resultant_via_charpoly(&h, &f).unwrap(), FpPoly::from_roots(ctx(), &images));
    }

    #[test]
    fn lifted_factors_collect_preimages(rs in roots(6), h in coeffs(3), pick in any::<prop::sample::Index>()) {
        let f = FpPoly::from_roots(ctx(), &rs);
        let h = FpPoly::new(ctx(), h);
        let beta = h.eval(rs[pick.index(rs.len())]);
        let phi = FpPoly::from_roots(ctx(), &[beta]);
        let lifted = lift_factor(&phi, &h, &f).unwrap();
        let want: Vec<u64> = rs.iter().copied().filter(|&x| h.eval(x) == beta).collect();
        prop_assert_eq!(lifted, FpPoly::from_roots(ctx(), &want));
    }

    #[test]
    fn split_gcd_is_rootwise_gcd(rs in roots(5), a in coeffs(3), b in coeffs(3), s in any::<prop::sample::Index>()) {
        let f = FpPoly::from_roots(ctx(), &rs);
        let t = Tower::over_fp(&f, 256).unwrap();
        let lin = |c: u64| t.elem_from_fp(&FpPoly::new(ctx(), vec![c, 1]));
        // (y - (x + a_i)) factors against (y - (x + b_i)) and y - rho.
        let mut pa = TowerPoly::new(1, vec![t.one(1)]);
        let mut pb = t.poly_linear(&t.scalar(1, rs[s.index(rs.len())]));
        for (&ai, &bi) in a.iter().zip(&b) {
            pa = t.poly_mul(&pa, &t.poly_linear(&lin(ai)));
            pb = t.poly_mul(&pb, &t.poly_linear(&lin(bi)));
        }
        pa = t.poly_mul(&pa, &t.poly_linear(&t.var(1)));
        let GcdOutcome::Gcd { gcd, .. } = t.semisimple_gcd(&pa, &pb, GcdMode::Split).unwrap() else {
            panic!("split mode returned a factor");
        };
        for &xi in &rs {
            prop_assert_eq!(at(&t, &gcd, xi), poly_gcd(&at(&t, &pa, xi), &at(&t, &pb, xi)).unwrap());
        }
    }

    #[test]
    fn halt_gcd_factors_are_proper(rs in roots(5), s in any::<prop::sample::Index>()) {
        let f = FpPoly::from_roots(ctx(), &rs);
        let t = Tower::over_fp(&f, 256).unwrap();
        let rho = rs[s.index(rs.len())];
        let a = t.poly_linear(&t.var(1));
        let b = t.poly_linear(&t.scalar(1, rho));
        match t.semisimple_gcd(&a, &b, GcdMode::Halt).unwrap() {
            GcdOutcome::Factor(g) => {
                prop_assert!(rs.len() > 1);
                prop_assert!(g.deg() > 0 && g.deg() < rs.len() && g.divides(&f));
            }
            GcdOutcome::Gcd { gcd, splits } => {
                prop_assert_eq!(rs.len(), 1);
                prop_assert!(splits.is_empty());
                prop_assert_eq!(gcd.deg(), 1);
            }
        }
    }
}
