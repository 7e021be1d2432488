//! Acceptance run: one line per criterion, non-zero exit if any fails.
#![allow(clippy::approx_constant)]

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use canon_hjb::certificate::{
    alpha_interval, build_samples, check_wellposedness, joint_convexity_min_eig, CorollaryVariant, Modified, Verdict,
};
use canon_hjb::characteristics::{integrate_flow, solve_terminal_bvp, verify_conjugacy, ShootingOptions};
use canon_hjb::linalg::quad;
use canon_hjb::model::{CanonicalShift, Hamiltonian, HamiltonianModel, LagrangianModel, TerminalCost};
use canon_hjb::sampling::BoxDomain;
use canon_hjb::value::{
    default_max_speed, hopf_lax_field, hopf_lax_oracle, minimize_action, semiconcavity_profile, solve_grid,
    verify_value_shift, ActionOptions, GridSetup,
};
use canon_hjb_cli::{dispatch, load_spec, Command, Flags};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn cli(command: Command, spec: &str, flags: Flags) -> (Value, u8) {
    let spec = load_spec(&fixture(spec)).expect("fixture loads");
    let o = dispatch(command, &spec, &flags).expect("command runs");
    (o.report["outputs"].clone(), o.exit_code)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn h1(src: &str) -> HamiltonianModel {
    HamiltonianModel::parse(src, 1).unwrap()
}

fn g1(src: &str) -> TerminalCost {
    TerminalCost::parse(src, 1).unwrap()
}

fn shift_invariance() -> Outcome {
    let (h, g) = (h1("0.5*p1^2 + x1*p1"), g1("cos(x1)"));
    let start = Instant::now();
    let coarse = verify_value_shift(&h, &g, 1.0, &GridSetup::uniform(-2.0 * PI, 2.0 * PI, 801, 2.0, 0.5)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let fine = verify_value_shift(&h, &g, 1.0, &GridSetup::uniform(-2.0 * PI, 2.0 * PI, 1601, 2.0, 0.5)).unwrap();
    verdict(
        coarse.deviation <= 5e-2 && fine.deviation <= 2.5e-2 && secs < 10.0,
        format!("deviation {:.4e} (801 nodes, {secs:.2} s), {:.4e} (1601 nodes)", coarse.deviation, fine.deviation),
    )
}

fn certificate_positive() -> Outcome {
    let start = Instant::now();
    let (o, code) = cli(Command::Certify, "certified.ini", Flags::default());
    let secs = start.elapsed().as_secs_f64();
    let s = &o["spectral"];
    let ok = code == 0
        && o["verdict"] == "CERTIFIED"
        && within(num(&o["alphaLower"]), 1.0, 1e-3)
        && within(num(&o["alphaUpper"]), 2.0, 1e-3)
        && within(num(&s["lambda0"]), 1.0, 1e-9)
        && within(num(&s["lambdaH"]), 0.0, 1e-9)
        && within(num(&s["lambdaG"]), -1.0, 1e-3)
        && secs < 2.0;
    verdict(
        ok,
        format!(
            "{} α ∈ [{}, {}], λ₀={} λ_H={} λ_G={} ({secs:.2} s)",
            o["verdict"], o["alphaLower"], o["alphaUpper"], s["lambda0"], s["lambdaH"], s["lambdaG"]
        ),
    )
}

fn forced_failure() -> Outcome {
    let (o, code) = cli(Command::Certify, "uncertified.ini", Flags::default());
    let certify_ok = code == 1
        && o["verdict"] == "NOT_CERTIFIED"
        && within(num(&o["lemmaLower"]), 0.0, 1e-9)
        && within(num(&o["lemmaUpper"]), 0.0, 1e-9);
    let (scan, _) = cli(Command::SingularityScan, "uncertified.ini", Flags::default());
    let (tau, y) = (num(&scan["tau"]), num(&scan["y"][0]));
    let tau_ok = within(tau, 1.0, 2e-2);
    let y_ok = within(y, PI, 5e-2);
    verdict(
        certify_ok && tau_ok && y_ok,
        format!(
            "{} on [{}, {}]; first conjugate time τ*={tau:.4} ({}) at y*={y:.4} ({}, expected π)",
            o["verdict"],
            o["lemmaLower"],
            o["lemmaUpper"],
            if tau_ok { "ok" } else { "off" },
            if y_ok { "ok" } else { "off" }
        ),
    )
}

fn corollary_thresholds() -> Outcome {
    let run = |variant: u8| {
        let start = Instant::now();
        let (o, code) = cli(Command::CorollaryThreshold, "uncertified.ini", Flags { variant, ..Flags::default() });
        (num(&o["alphaStar"]), code, start.elapsed().as_secs_f64())
    };
    let (a2, c2, t2) = run(2);
    let (a1, c1, t1) = run(1);

    // Exhaustive sweep of the certificate on an α grid of step 0.01.
    let spec = load_spec(&fixture("uncertified.ini")).unwrap();
    let (h, g) = (h1("0.5*p1^2"), g1("cos(x1)"));
    let c = &spec.certificate;
    let s = build_samples(&spec.xbox, &spec.pbox, c.samples, c.directions, c.seed).unwrap();
    let swept = (0..=200)
        .map(|k| k as f64 * 0.01)
        .find(|&alpha| {
            let m = Modified { inner: &h, variant: CorollaryVariant::CrossTerm, alpha };
            check_wellposedness(&m, &g, &s, c.mu_min).unwrap().verdict == Verdict::Certified
        })
        .unwrap_or(f64::NAN);
    verdict(
        c1 == 0 && c2 == 0 && within(a2, 1.0, 1e-2) && within(a1, swept, 1e-2) && t1 < 5.0 && t2 < 5.0,
        format!("variant 2: α*={a2:.4} ({t2:.2} s); variant 1: α*={a1:.4} vs sweep {swept:.2} ({t1:.2} s)"),
    )
}

fn cross_validation() -> Outcome {
    let (h, g) = (h1("0.5*p1^2"), g1("0.5*x1^2"));
    let grid = GridSetup::uniform(-8.0, 8.0, 801, 1.0, 0.5).build(&h, &g).unwrap();
    let field = solve_grid(&h, &g, &grid).unwrap();
    let u_grid = field.interpolate(field.slices.len() - 1, &[1.0]).unwrap();
    let l = LagrangianModel::parse("0.5*v1^2", 1).unwrap();
    let action = minimize_action(&l, &g, 0.0, &[1.0], 1.0, &ActionOptions::default()).unwrap();
    let shot = solve_terminal_bvp(&h, &g, 0.0, &[1.0], 1.0, &ShootingOptions::default()).unwrap();
    let oracle = hopf_lax_oracle(&g, 0.0, &[1.0], 1.0, &BoxDomain::cube(1, 8.0), 4001).unwrap();
    let end = shot.best.trajectory.last_state()[0];
    let ok = within(u_grid, 0.25, 2e-2)
        && within(action.value, 0.25, 1e-3)
        && !action.multiple
        && oracle.argmins.len() == 1
        && within(end, oracle.argmins[0][0], 1e-3);
    verdict(
        ok,
        format!(
            "grid {u_grid:.5}, action {:.6} ({} curve), shooting X_T={end:.6} vs oracle argmin {:.6}",
            action.value,
            action.curves.len(),
            oracle.argmins[0][0]
        ),
    )
}

fn flow_conjugacy() -> Outcome {
    let h = h1("0.5*p1^2 + x1*p1");
    let (x0, p0) = ([0.5], [0.3]);
    let dev = verify_conjugacy(&h, 1.0, &x0, &p0, 0.0, 2.0, 1e-3).unwrap();
    let halved = verify_conjugacy(&h, 1.0, &x0, &p0, 0.0, 2.0, 5e-4).unwrap();
    let ratio = dev / halved;
    verdict(
        dev <= 1e-6 && ratio >= 12.0,
        format!("deviation {dev:.3e} at h=1e-3, {halved:.3e} at h=5e-4, ratio {ratio:.2} (needs ≥ 12)"),
    )
}

fn smoothness_vs_blowup() -> Outcome {
    let (h, g) = (h1("0.5*p1^2 + x1*p1"), g1("cos(x1)"));
    let setup = GridSetup::uniform(-6.28, 6.28, 629, 5.0, 0.5);
    let field = solve_grid(&h, &g, &setup.build(&h, &g).unwrap()).unwrap();
    let certified = semiconcavity_profile(&field).iter().map(|r| r.min_d2).fold(f64::INFINITY, f64::min);

    let mut worst: f64 = f64::NEG_INFINITY;
    let mut deepest: f64 = f64::INFINITY;
    let mut at = 0.0;
    for k in 0..=38 {
        let tau = 1.2 + 0.1 * k as f64;
        let grid = GridSetup::uniform(-6.28, 6.28, 629, tau, 0.5).with_speed(1.0).unwrap();
        let f = hopf_lax_field(&g, &grid, tau, &BoxDomain::cube(1, 14.0), 4001).unwrap();
        let m = semiconcavity_profile(&f)[1].min_d2;
        deepest = deepest.min(m);
        if m > worst {
            worst = m;
            at = tau;
        }
    }
    verdict(
        certified >= -10.0 && worst < -100.0,
        format!(
            "certified min D² = {certified:.3} over t ∈ [0, 5]; uncertified max over τ ∈ [1.2, 5] of min D² = {worst:.2} at τ={at:.1}, most negative {deepest:.2} (needs < −100 throughout)"
        ),
    )
}

fn proposition_round_trip() -> Outcome {
    let l = LagrangianModel::parse("0.5*v1^2 + 0.5*x1^2", 1).unwrap();
    let b = BoxDomain::cube(1, 3.0);
    let s = build_samples(&b, &b, 256, 1, 0).unwrap();
    let shifted = joint_convexity_min_eig(&l.shifted(2.0), &s).unwrap();
    let back = joint_convexity_min_eig(&l.shifted(2.0).shifted(-2.0), &s).unwrap();
    verdict(
        within(shifted, -1.0, 1e-9) && within(back, 1.0, 1e-9),
        format!("min eig {shifted:.12} after α=2, {back:.12} after shifting back"),
    )
}

fn invariant_suites() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // Exact derivatives against central differences.
    let hams = [
        "0.5*(1 + 0.2*sin(x1))*p1^2 + 1.5*x1*p1",
        "cosh(0.5*p1) + 2*x1*p1 + 0.2*exp(-x1^2)",
        "log(2 + x1^2)*p1^2 + sqrt(1 + p1^2)",
    ];
    for src in hams {
        let h = h1(src).shifted(0.7);
        for _ in 0..200 {
            let (x, p) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let j = h.jet(&[x], &[p]).unwrap();
            let e = 1e-4;
            let f = |a: f64, b: f64| h.value(&[a], &[b]).unwrap();
            let fd_xx = (f(x + e, p) - 2.0 * f(x, p) + f(x - e, p)) / (e * e);
            let fd_xp = (f(x + e, p + e) - f(x + e, p - e) - f(x - e, p + e) + f(x - e, p - e)) / (4.0 * e * e);
            let fd_pp = (f(x, p + e) - 2.0 * f(x, p) + f(x, p - e)) / (e * e);
            for (exact, fd) in [(j.xx[(0, 0)], fd_xx), (j.xp[(0, 0)], fd_xp), (j.pp[(0, 0)], fd_pp)] {
                if (exact - fd).abs() > 1e-4 * (1.0 + fd.abs()) {
                    failures.push(format!("AD/FD {src}"));
                }
            }
        }
    }

    // Interval monotonicity under sample growth, and soundness.
    let b = BoxDomain::cube(1, 2.0);
    let s = build_samples(&b, &b, 1024, 8, 5).unwrap();
    let family = [
        "0.5*(1 + 0.2*sin(x1))*p1^2 + 1.5*x1*p1",
        "0.5*p1^2 + x1*p1 + 0.1*cos(x1)*p1 - 0.3*x1^2",
        "cosh(0.5*p1) + 2*x1*p1 + 0.2*sin(x1)",
    ];
    for src in family {
        let h = h1(src);
        let mut prev = (f64::NEG_INFINITY, f64::INFINITY);
        for n in [16, 64, 256, 1024] {
            let iv = alpha_interval(&h, &s.prefix(n), 1e-6).unwrap();
            if iv.lower < prev.0 || iv.upper > prev.1 {
                failures.push(format!("monotonicity {src}"));
            }
            prev = (iv.lower, iv.upper);
        }
        let iv = alpha_interval(&h, &s, 1e-6).unwrap();
        if iv.feasible {
            for k in 0..=10 {
                let alpha = iv.lower + (iv.upper - iv.lower) * k as f64 / 10.0;
                let hs = h.shifted(alpha);
                for (i, (x, p)) in s.points.iter().enumerate() {
                    let q = [p[0] + alpha * x[0]];
                    let blocks = hs.hessian_blocks(x, &q).unwrap();
                    if s.directions[i].iter().any(|w| quad(&blocks.xx, w) > 1e-9) {
                        failures.push(format!("soundness {src} α={alpha}"));
                    }
                }
            }
        }
    }

    // Comparison principle.
    let h = h1("0.5*p1^2 + x1*p1");
    let (lo, hi) = (g1("cos(x1)"), g1("cos(x1) + 0.3*exp(-x1^2) + 0.01"));
    let setup = GridSetup::uniform(-3.0, 3.0, 121, 1.0, 0.5);
    let speed = default_max_speed(&h, &hi, &setup.bounds, &setup.nodes).unwrap();
    let grid = setup.with_speed(speed).unwrap();
    let (u1, u2) = (solve_grid(&h, &lo, &grid).unwrap(), solve_grid(&h, &hi, &grid).unwrap());
    if u1.slices.iter().flatten().zip(u2.slices.iter().flatten()).any(|(a, b)| *a > b + 1e-12) {
        failures.push("comparison principle".into());
    }

    // Fourth-order energy error.
    let pendulum = h1("0.5*p1^2 - cos(x1)");
    let drift = |step: f64| integrate_flow(&pendulum, &[0.5], &[0.8], 0.0, 4.0, step, false).unwrap().energy_drift();
    let ratio = drift(0.04) / drift(0.02);
    if ratio < 12.0 {
        failures.push(format!("energy order ratio {ratio:.2}"));
    }

    let secs = start.elapsed().as_secs_f64();
    failures.dedup();
    verdict(
        failures.is_empty() && secs < 60.0,
        if failures.is_empty() { format!("all suites pass ({secs:.2} s)") } else { format!("{failures:?} ({secs:.2} s)") },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("shift invariance of the grid solution", shift_invariance),
        ("certificate, positive case", certificate_positive),
        ("forced failure and first conjugate point", forced_failure),
        ("corollary thresholds", corollary_thresholds),
        ("solver cross-validation", cross_validation),
        ("flow conjugacy", flow_conjugacy),
        ("long-horizon smoothness vs blow-up", smoothness_vs_blowup),
        ("Lagrangian shift round trip", proposition_round_trip),
        ("invariant suites", invariant_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
