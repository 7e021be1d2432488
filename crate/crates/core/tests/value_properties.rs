use canon_hjb::model::{HamiltonianModel, LagrangianModel, TerminalCost};
use canon_hjb::sampling::BoxDomain;
use canon_hjb::value::{
    default_max_speed, hopf_lax_oracle, minimize_action, solve_grid, verify_value_shift, ActionOptions, GridSetup,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h(src: &str) -> HamiltonianModel {
    HamiltonianModel::parse(src, 1).unwrap()
}

fn g(src: &str) -> TerminalCost {
    TerminalCost::parse(src, 1).unwrap()
}

const TERMINALS: &[&str] = &["0.5*x1^2", "cos(x1)", "0.3*sin(2*x1)", "-0.2*x1^2 + 0.1*x1", "exp(-x1^2)"];

#[test]
fn ordered_data_give_ordered_solutions() {
    let hams = ["0.5*p1^2", "0.5*p1^2 + x1*p1", "cosh(p1) - 0.2*x1^2", "0.5*(1 + 0.3*sin(x1))*p1^2"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..12 {
        let hh = h(hams[case % hams.len()]);
        let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.2));
        let g1 = g(&format!("{a}*cos(x1) + 0.1*x1^2"));
        let g2 = g(&format!("{a}*cos(x1) + 0.1*x1^2 + {b}*exp(-x1^2) + {c}"));
        let setup = GridSetup::uniform(-3.0, 3.0, 121, 0.6, 0.5);
        let speed = default_max_speed(&hh, &g1, &setup.bounds, &setup.nodes)
            .unwrap()
            .max(default_max_speed(&hh, &g2, &setup.bounds, &setup.nodes).unwrap());
        let grid = setup.with_speed(speed).unwrap();
        let (u1, u2) = (solve_grid(&hh, &g1, &grid).unwrap(), solve_grid(&hh, &g2, &grid).unwrap());
        for (s1, s2) in u1.slices.iter().zip(&u2.slices) {
            for (v1, v2) in s1.iter().zip(s2) {
                assert!(v1 <= &(v2 + 1e-12), "case {case}: {v1} > {v2}");
            }
        }
    }
}

#[test]
fn grid_error_against_hopf_lax_is_first_order() {
    let hh = h("0.5*p1^2");
    let tau = 0.5;
    for src in TERMINALS {
        let gg = g(src);
        let error = |nodes: usize| {
            let grid = GridSetup::uniform(-4.0, 4.0, nodes, tau, 0.5).build(&hh, &gg).unwrap();
            let field = solve_grid(&hh, &gg, &grid).unwrap();
            let u = field.initial();
            (0..grid.len())
                .filter(|&k| grid.is_interior(k))
                .map(|k| {
                    let x = grid.point(k);
                    let exact = hopf_lax_oracle(&gg, 0.0, &x, tau, &BoxDomain::cube(1, 10.0), 2001).unwrap().value;
                    (u[k] - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (error(161), error(321));
        let ratio = fine / coarse;
        assert!((0.35..=0.65).contains(&ratio), "{src}: {coarse:e} → {fine:e} (ratio {ratio})");
    }
}

#[test]
fn action_agrees_with_hopf_lax() {
    let l = LagrangianModel::parse("0.5*v1^2", 1).unwrap();
    let mut compared = 0;
    for src in TERMINALS {
        let gg = g(src);
        for &(x, horizon) in &[(0.3, 0.7), (-1.1, 1.0), (2.0, 1.6)] {
            let oracle = hopf_lax_oracle(&gg, 0.0, &[x], horizon, &BoxDomain::cube(1, 12.0), 4001).unwrap();
            let action = minimize_action(&l, &gg, 0.0, &[x], horizon, &ActionOptions::default()).unwrap();
            assert!(action.value >= oracle.value - 1e-3, "{src} at {x}: {} < {}", action.value, oracle.value);
            if oracle.argmins.len() == 1 {
                compared += 1;
                assert!((action.value - oracle.value).abs() <= 1e-3, "{src} at {x}: {} vs {}", action.value, oracle.value);
            }
            assert!(action.identity_residual <= 1e-10);
        }
    }
    assert!(compared >= 10);
}

#[test]
fn shift_identity_holds_to_first_order() {
    let cases = [
        ("0.5*p1^2 + x1*p1", "cos(x1)", 1.0, 1.0),
        ("0.5*p1^2", "0.5*x1^2", -0.5, 1.0),
        ("cosh(0.5*p1) + 0.3*sin(x1)", "0.2*x1^2", 0.7, 0.8),
    ];
    for (hs, gs, alpha, horizon) in cases {
        let dev = |nodes: usize| {
            verify_value_shift(&h(hs), &g(gs), alpha, &GridSetup::uniform(-4.0, 4.0, nodes, horizon, 0.5))
                .unwrap()
                .deviation
        };
        let (coarse, fine) = (dev(201), dev(401));
        assert!(fine < coarse, "{hs}, α={alpha}: {coarse:e} → {fine:e}");
        assert!(coarse <= 5e-2, "{hs}, α={alpha}: {coarse:e}");
    }
}
