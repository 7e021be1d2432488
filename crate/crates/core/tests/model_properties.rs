use canon_hjb::linalg::{max_eig, min_eig};
use canon_hjb::model::{
    legendre_transform, CanonicalShift, ConjugateHamiltonian, Hamiltonian, HamiltonianModel,
    Lagrangian, LagrangianModel, LegendreOptions, TerminalCost,
};
use canon_hjb::sampling::{sobol_in_boxes, BoxDomain};
use proptest::prelude::*;

fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn hamiltonian() -> HamiltonianModel {
    HamiltonianModel::parse("0.5*(p1^2 + p2^2) + x1*p2 - cos(x1)*sin(x2) + tanh(p1)*x2", 2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shifts_compose(a in -3.0..3.0f64, b in -3.0..3.0f64,
                      x in prop::array::uniform2(-3.0..3.0f64),
                      p in prop::array::uniform2(-3.0..3.0f64)) {
        let h = hamiltonian();
        let twice = h.shifted(a).shifted(b).value(&x, &p).unwrap();
        let once = h.shifted(a + b).value(&x, &p).unwrap();
        prop_assert!(ulps(twice, once) <= 4, "{twice} vs {once}");
    }

    #[test]
    fn terminal_shift_inverts(a in -3.0..3.0f64, x in prop::array::uniform2(-5.0..5.0f64)) {
        let g = TerminalCost::parse("cos(x1)*exp(-x2^2) + 0.1*x1*x2", 2).unwrap();
        let back = g.shifted(a).shifted(-a);
        prop_assert!(ulps(back.value(&x).unwrap(), g.value(&x).unwrap()) <= 4);
    }
}

#[test]
fn terminal_shift_inverts_on_a_thousand_points() {
    let g = TerminalCost::parse("sin(x1) + 0.3*x1^3", 1).unwrap();
    let b = BoxDomain::cube(1, 5.0);
    for (i, pt) in sobol_in_boxes(&[&b], 1000).into_iter().enumerate() {
        let a = -3.0 + 6.0 * (i as f64 / 999.0);
        let x = &pt[0];
        let back = g.shifted(a).shifted(-a);
        assert!(ulps(back.value(x).unwrap(), g.value(x).unwrap()) <= 4);
        assert!(ulps(back.gradient(x).unwrap()[0], g.gradient(x).unwrap()[0]) <= 4);
    }
}

/// Jointly convex Lagrangians have concave-convex conjugates.
#[test]
fn jointly_convex_lagrangians_give_concave_convex_hamiltonians() {
    let lagrangians = [
        ("0.5*v1^2 + 0.5*x1^2 + 0.4*x1*v1", 1),
        ("cosh(v1) + 0.5*x1^2 + 0.25*x1*v1 + exp(0.3*x1)", 1),
        ("0.5*(v1^2 + v2^2) + 0.2*v1^4 + 0.5*(x1^2 + x2^2) + 0.3*x1*v2 - 0.2*x2*v1", 2),
    ];
    let opts = LegendreOptions::default();
    for (src, d) in lagrangians {
        let l = LagrangianModel::parse(src, d).unwrap();
        let h = ConjugateHamiltonian::new(l.clone(), opts.clone());
        let xb = BoxDomain::cube(d, 2.0);
        let vb = BoxDomain::cube(d, 2.0);
        for pt in sobol_in_boxes(&[&xb, &vb], 256) {
            let joint = l.jet(&pt[0], &pt[1]).unwrap().joint_hessian();
            assert!(min_eig(&joint) >= 0.0, "{src} not jointly convex at {pt:?}");
        }
        let pb = BoxDomain::cube(d, 2.0);
        for pt in sobol_in_boxes(&[&xb, &pb], 256) {
            let b = h.hessian_blocks(&pt[0], &pt[1]).unwrap();
            assert!(max_eig(&b.xx) <= 1e-10, "{src}: ∂ₓₓH not ⪯ 0 at {pt:?}");
            assert!(min_eig(&b.pp) >= -1e-10, "{src}: ∂ₚₚH not ⪰ 0 at {pt:?}");
        }
    }
}

#[test]
fn legendre_commutes_with_shift() {
    let cases = [
        ("0.5*v1^2 + 0.1*v1^4 + 0.5*x1^2*v1 + sin(x1)", 1),
        ("cosh(v1) + 0.5*v2^2 + x1*v2 + 0.2*x2^2", 2),
    ];
    let opts = LegendreOptions::default();
    for (src, d) in cases {
        let l = LagrangianModel::parse(src, d).unwrap();
        let xb = BoxDomain::cube(d, 2.0);
        let pb = BoxDomain::cube(d, 3.0);
        let ab = BoxDomain::new(vec![-2.0], vec![2.0]);
        for pt in sobol_in_boxes(&[&xb, &pb, &ab], 101).into_iter().skip(1) {
            let (x, p, a) = (&pt[0], &pt[1], pt[2][0]);
            let lhs = legendre_transform(&l.shifted(a), x, p, &opts).unwrap();
            let rhs = ConjugateHamiltonian::new(l.clone(), opts.clone())
                .shifted(a)
                .value(x, p)
                .unwrap();
            assert!((lhs - rhs).abs() <= 1e-6, "{src} at {pt:?}: {lhs} vs {rhs}");
        }
    }
}
