use cfloor_core::closed_form::appendix_a_build;
use cfloor_core::dual::{find_free_boundary, solve_dual, SolverConfig};
use cfloor_core::policy::{invert, PolicyTable, Region};
use cfloor_core::{Error, ProblemSpec};

fn spec(beta: f64, k: f64) -> ProblemSpec {
    ProblemSpec::from_values(0.03, 0.05, 0.2, beta, 0.5, k, 1.0).unwrap()
}

fn solved(s: &ProblemSpec) -> PolicyTable {
    invert(s, &solve_dual(s, &SolverConfig::default_for(s)).unwrap()).unwrap()
}

/// Oracle: maximize the Hamiltonian on a fine grid around the stored controls.
fn brute_force_controls(s: &ProblemSpec, x: f64, vx: f64, vxx: f64, c0: f64, pi0: f64) -> (f64, f64) {
    let floor = s.k() * x + s.l();
    let hc = |c: f64| c.powf(s.p()) / s.p() - c * vx;
    let hp = |pi: f64| s.mu() * pi * vx + 0.5 * s.sigma() * s.sigma() * pi * pi * vxx;
    let n = 20_000;
    let argmax = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .fold((lo, f64::NEG_INFINITY), |best, z| if f(z) > best.1 { (z, f(z)) } else { best })
            .0
    };
    let c = argmax(floor, floor + 2.0 * (c0 - floor) + 0.5 * c0, &hc);
    let pi = argmax(0.0, 2.0 * pi0, &hp);
    (c, pi)
}

#[test]
fn table_invariants_on_sweep() {
    for (beta, k) in [(0.05, 0.01), (0.1, 0.02), (0.15, 0.025)] {
        let s = spec(beta, k);
        let t = solved(&s);
        assert!(t.x.windows(2).all(|w| w[1] > w[0]));
        assert!(t.value.windows(2).all(|w| w[1] >= w[0]));
        for i in 0..t.len() {
            let floor = s.k() * t.x[i] + s.l();
            assert!(t.v_x[i] > 0.0 && t.v_xx[i] < 0.0);
            assert!(t.c_star[i] >= floor);
            assert!(t.pi_star[i] > 0.0);
            let constrained = t.v_x[i].powf(1.0 / (s.p() - 1.0)) <= floor;
            assert_eq!(t.region[i] == Region::Constrained, constrained, "node {i}");
        }
    }
}

#[test]
fn controls_maximize_the_hamiltonian() {
    let s = spec(0.1, 0.02);
    let t = solved(&s);
    for i in (0..t.len()).step_by(97) {
        let (x, vx, vxx) = (t.x[i], t.v_x[i], t.v_xx[i]);
        let (c, pi) = brute_force_controls(&s, x, vx, vxx, t.c_star[i], t.pi_star[i]);
        let c_res = (2.0 * (t.c_star[i] - s.k() * x - s.l()) + 0.5 * t.c_star[i]) / 20_000.0;
        let pi_res = 2.0 * t.pi_star[i] / 20_000.0;
        assert!((c - t.c_star[i]).abs() <= c_res, "c at x = {x}: {c} vs {}", t.c_star[i]);
        assert!((pi - t.pi_star[i]).abs() <= pi_res, "pi at x = {x}: {pi} vs {}", t.pi_star[i]);
    }
}

#[test]
fn unconstrained_first_order_condition_is_exact() {
    let s = spec(0.1, 0.02);
    let t = solved(&s);
    let mut seen = 0;
    for i in 0..t.len() {
        if t.region[i] == Region::Unconstrained {
            let lhs = t.c_star[i].powf(s.p() - 1.0);
            assert!((lhs - t.v_x[i]).abs() <= 1e-13 * t.v_x[i], "node {i}");
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn risky_position_is_continuous_across_free_boundary() {
    let s = spec(0.1, 0.02);
    let t = solved(&s);
    let xs = t.x_star_list[0];
    let eps = 1e-6 * xs;
    let (c_lo, pi_lo) = t.policy_at(xs - eps).unwrap();
    let (c_hi, pi_hi) = t.policy_at(xs + eps).unwrap();
    assert!((pi_hi - pi_lo).abs() <= 1e-4 * pi_lo, "{pi_lo} {pi_hi}");
    assert!((c_hi - c_lo).abs() <= 1e-4 * c_lo);
    // the kink shows up in the slope of c
    let (c_lo2, _) = t.policy_at(xs - 2.0 * eps).unwrap();
    let (c_hi2, _) = t.policy_at(xs + 2.0 * eps).unwrap();
    let slope_lo = (c_lo - c_lo2) / eps;
    let slope_hi = (c_hi2 - c_hi) / eps;
    assert!((slope_lo - s.k()).abs() < 1e-9);
    assert!(slope_hi > s.k() + 1e-3, "{slope_hi}");
}

#[test]
fn state_independent_table_matches_closed_form() {
    let s = spec(0.1, 0.0);
    let sol = appendix_a_build(&s).unwrap();
    let grid = solve_dual(&s, &SolverConfig::default_for(&s)).unwrap();
    let t = invert(&s, &grid).unwrap();
    let (c, _) = t.policy_at(50.0).unwrap();
    let (c_ref, _) = sol.policy(50.0).unwrap();
    assert!((c - c_ref).abs() <= 1e-3 * c_ref, "{c} vs {c_ref}");
    let xs = find_free_boundary(&s, &grid)[0].x;
    let (c, _) = t.policy_at(xs).unwrap();
    assert!((c - 1.0).abs() < 1e-6, "{c}");
}

#[test]
fn value_tends_to_marginal_value_at_floor() {
    let s = spec(0.1, 0.02);
    let t = solved(&s);
    assert!((s.v_xe() - 34.64101615137754).abs() < 1e-12);
    assert!((t.value[0] - s.v_xe()).abs() <= 1e-9 * s.v_xe(), "{}", t.value[0]);
}

#[test]
fn regions_by_regime() {
    let s = spec(0.05, 0.02);
    let r = solved(&s).regions();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].region, Region::Constrained);
    assert_eq!(r[0].lo, s.x_e());

    let s = spec(0.1, 0.02);
    let t = solved(&s);
    let r = t.regions();
    assert_eq!(r.len(), 2);
    assert_eq!((r[0].region, r[1].region), (Region::Constrained, Region::Unconstrained));
    assert_eq!(r[0].hi, t.x_star_list[0]);
    assert_eq!(t.region[0], Region::Constrained);
}

#[test]
fn queries_outside_the_table_are_refused() {
    let s = spec(0.1, 0.02);
    let t = solved(&s);
    assert!(matches!(t.policy_at(2.0 * t.x_max()), Err(Error::OutOfRange { .. })));
    assert!(matches!(t.value_at(0.5 * s.x_e()), Err(Error::OutOfRange { .. })));
    assert!(t.policy_at(t.x_max()).is_ok());
}
