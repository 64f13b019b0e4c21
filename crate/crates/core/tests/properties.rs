//! Algebraic identities and integral invariants checked on random inputs.

use std::sync::OnceLock;

use melnikov_kit::abelian::{integrate, integrate_many, QuadOptions, RationalForm};
use melnikov_kit::algebra::{exterior_d, parse_poly, wedge, BivarPoly, ExactOneForm, Mono, OneForm, Scalar};
use melnikov_kit::center::{s_apply, s_solve};
use melnikov_kit::fibration::{critical_data, vanishing_family, Cycle, Fibration};
use melnikov_kit::foliation::PencilSpec;
use melnikov_kit::numeric::C64;
use proptest::prelude::*;

fn poly(max_deg: u32) -> impl Strategy<Value = BivarPoly> {
    prop::collection::vec((0..=max_deg, 0..=max_deg, -5i64..=5, -5i64..=5, 1i64..=4), 0..6).prop_map(move |terms| {
        let mut p = BivarPoly::zero();
        for (i, j, re, im, den) in terms {
            if i + j <= max_deg {
                let c = &Scalar::gaussian(re, im) * &Scalar::from_frac(1, den);
                p.add_term(Mono::new(i, j), c);
            }
        }
        p
    })
}

fn form(max_deg: u32) -> impl Strategy<Value = ExactOneForm> {
    (poly(max_deg), poly(max_deg)).prop_map(|(a, b)| OneForm::new(a, b))
}

/// Real polynomial with integer coefficients, for numeric integration.
fn real_poly(max_deg: u32) -> impl Strategy<Value = BivarPoly> {
    prop::collection::vec((0..=max_deg, 0..=max_deg, -3i64..=3), 1..5).prop_map(move |terms| {
        let mut p = BivarPoly::zero();
        for (i, j, c) in terms {
            if i + j <= max_deg {
                p.add_term(Mono::new(i, j), Scalar::from_int(c));
            }
        }
        p
    })
}

proptest! {
    #[test]
    fn leibniz(f in poly(3), g in poly(3)) {
        let lhs = exterior_d(&(&f * &g));
        let rhs = &exterior_d(&f).mul_poly(&g) + &exterior_d(&g).mul_poly(&f);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn d_of_d_vanishes(f in poly(5)) {
        prop_assert!(exterior_d(&f).d().is_zero());
    }

    #[test]
    fn homogeneous_parts_reassemble(w in form(5)) {
        let mut sum = OneForm::zero();
        for (_, part) in w.homogeneous_parts() {
            sum = &sum + &part;
        }
        prop_assert_eq!(sum, w);
    }

    #[test]
    fn wedge_antisymmetric_and_bilinear(a in form(2), b in form(2), c in form(2)) {
        prop_assert_eq!(wedge(&a, &b), -&wedge(&b, &a));
        prop_assert!(wedge(&a, &a).is_zero());
        prop_assert_eq!(wedge(&(&a + &c), &b), &wedge(&a, &b) + &wedge(&c, &b));
    }

    #[test]
    fn s_solve_inverts_s_apply(n in 3u32..=10, g in poly(10)) {
        let h = g.homogeneous_part(n);
        let (back, obstruction) = s_solve(n, &s_apply(n, &h).unwrap()).unwrap();
        prop_assert!(obstruction.is_zero());
        // the kernel (xy)^{n/2} is lost, everything else comes back
        let mut expect = h.clone();
        if n % 2 == 0 {
            expect.add_term(Mono::new(n / 2, n / 2), -h.coeff(Mono::new(n / 2, n / 2)));
        }
        prop_assert_eq!(back, expect);
    }

    #[test]
    fn print_then_parse(f in poly(4)) {
        let text = f.to_string();
        prop_assert_eq!(parse_poly(&text).unwrap(), f);
    }
}

fn circle() -> &'static (Fibration, Cycle) {
    static CELL: OnceLock<(Fibration, Cycle)> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = PencilSpec::hamiltonian(parse_poly("(x^2 + y^2)/2 - x^3/3").unwrap()).unwrap();
        let fib = Fibration::new(&spec);
        let data = critical_data(&spec).unwrap();
        let idx = data.points.iter().position(|c| c.value.norm() < 1e-12).unwrap();
        let c = vanishing_family(&fib, &data, idx, &[C64::new(0.08, 0.03)], 96).unwrap().remove(0);
        (fib, c)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_forms_integrate_to_zero(g in real_poly(4)) {
        let (fib, c) = circle();
        let v = integrate(fib, &RationalForm::polynomial(exterior_d(&g)), c, &QuadOptions::default()).unwrap();
        prop_assert!(v.value.norm() <= 1e-10, "{} over the cycle: {}", g, v.value);
    }

    #[test]
    fn integral_is_linear(a in real_poly(3), b in real_poly(3), k in -4i64..=4) {
        let (fib, c) = circle();
        let wa = OneForm::new(a.clone(), b.clone());
        let wb = OneForm::new(b, a);
        let sum = &wa + &wb.scale(&Scalar::from_int(k));
        let forms = [RationalForm::polynomial(wa), RationalForm::polynomial(wb), RationalForm::polynomial(sum)];
        let refs: Vec<&RationalForm> = forms.iter().collect();
        let v = integrate_many(fib, &refs, c, &QuadOptions::default()).unwrap();
        let diff = (v[0].value + v[1].value * k as f64 - v[2].value).norm();
        prop_assert!(diff <= 1e-11 * (1.0 + v[2].value.norm()), "linearity defect {}", diff);
    }
}
