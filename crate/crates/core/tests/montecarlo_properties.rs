use cfloor_core::closed_form::homogeneous_value_unchecked;
use cfloor_core::dual::{solve_dual, SolverConfig};
use cfloor_core::montecarlo::{
    compare_to_value, dt_halving_allowance, simulate, ClippedMertonPolicy, Feedback, FloorPolicy,
    LinearPolicy, SimConfig, SimReport, TablePolicy,
};
use cfloor_core::policy::{invert, PolicyTable};
use cfloor_core::ProblemSpec;

fn baseline() -> ProblemSpec {
    ProblemSpec::from_values(0.03, 0.05, 0.2, 0.1, 0.5, 0.02, 1.0).unwrap()
}

fn table(s: &ProblemSpec) -> PolicyTable {
    invert(s, &solve_dual(s, &SolverConfig::default_for(s)).unwrap()).unwrap()
}

fn cfg(x0: f64, dt: f64, horizon: f64, n_paths: usize) -> SimConfig {
    SimConfig {
        x0,
        dt,
        horizon,
        n_paths,
        seed: 20240611,
        clamp_at_floor: true,
    }
}

fn joint_se(a: &SimReport, b: &SimReport) -> f64 {
    (a.std_error * a.std_error + b.std_error * b.std_error).sqrt()
}

#[test]
fn homogeneous_policy_attains_closed_form_value() {
    let s = ProblemSpec::from_values(0.03, 0.05, 0.2, 0.1, 0.5, 0.2, 0.0).unwrap();
    let policy = LinearPolicy::homogeneous(&s).unwrap();
    let c = cfg(1.0, 1.0 / 250.0, 150.0, 2000);
    let rep = simulate(&s, &policy, &c).unwrap();
    let v = homogeneous_value_unchecked(&s, 1.0).unwrap();
    assert!((v - 5.817412624389697).abs() < 1e-12);
    let verdict = compare_to_value(&rep, v, 0.0);
    assert!(verdict.pass, "{rep:?} {verdict:?}");
    assert_eq!(rep.floor_violations, 0);
}

#[test]
fn optimal_policy_dominates_alternatives() {
    let s = baseline();
    let t = table(&s);
    let optimal = TablePolicy::new(&t);
    let floor = FloorPolicy::new(&s);
    let clipped = ClippedMertonPolicy::new(&s);
    for x0 in [105.0, 150.0, 400.0] {
        let c = cfg(x0, 0.02, 120.0, 400);
        let best = simulate(&s, &optimal, &c).unwrap();
        for other in [&floor as &dyn Feedback, &clipped] {
            let rep = simulate(&s, other, &c).unwrap();
            assert!(
                best.estimate >= rep.estimate - 3.0 * joint_se(&best, &rep),
                "x0 = {x0}: {} vs {}",
                best.estimate,
                rep.estimate
            );
        }
    }
}

#[test]
fn optimal_estimate_matches_solver_value() {
    let s = baseline();
    let t = table(&s);
    let c = cfg(150.0, 0.02, 150.0, 800);
    let policy = TablePolicy::new(&t);
    let rep = simulate(&s, &policy, &c).unwrap();
    let allowance = dt_halving_allowance(&s, &policy, &c, &rep).unwrap();
    let verdict = compare_to_value(&rep, t.value_at(150.0).unwrap(), allowance);
    assert!(verdict.pass, "{rep:?} {verdict:?}");
}

#[test]
fn floor_only_policy_is_strictly_suboptimal_far_above_the_boundary() {
    let s = baseline();
    let t = table(&s);
    let x0 = 1000.0;
    assert!(x0 > 5.0 * t.x_star_list[0]);
    let rep = simulate(&s, &FloorPolicy::new(&s), &cfg(x0, 0.02, 150.0, 400)).unwrap();
    let v = t.value_at(x0).unwrap();
    assert!(v - rep.estimate > 3.0 * rep.std_error + rep.tail_bound, "{} vs {v}", rep.estimate);
}

#[test]
fn doubling_the_horizon_stays_within_tail_bound() {
    let s = baseline();
    let t = table(&s);
    let policy = TablePolicy::new(&t);
    let short = simulate(&s, &policy, &cfg(150.0, 0.02, 20.0, 300)).unwrap();
    let long = simulate(&s, &policy, &cfg(150.0, 0.02, 40.0, 300)).unwrap();
    // same streams: the long run extends every short path
    assert!(long.estimate > short.estimate);
    assert!(long.estimate - short.estimate < short.tail_bound, "{short:?} {long:?}");
}

#[test]
fn table_policy_is_admissible_along_paths_near_the_floor() {
    let s = baseline();
    let t = table(&s);
    let rep = simulate(&s, &TablePolicy::new(&t), &cfg(s.x_e() + 0.5, 0.01, 100.0, 200)).unwrap();
    assert!(rep.estimate > 0.0);
    // queried controls were all checked against the floor; clamps are counted, not hidden
    assert!(rep.floor_violations <= rep.n_paths as u64);
}

#[test]
fn table_policy_extends_past_the_last_node() {
    let s = baseline();
    let t = table(&s);
    let p = TablePolicy::new(&t);
    let x = 4.0 * t.x_max();
    let (c, pi) = p.control(x).unwrap();
    let (c_last, pi_last) = (t.c_star[t.len() - 1], t.pi_star[t.len() - 1]);
    let scale = (x - s.x_e()) / t.x_minus_xe[t.len() - 1];
    assert!((pi - pi_last * scale).abs() <= 1e-12 * pi);
    assert!((c - c_last * scale).abs() <= 1e-12 * c);
    let (c_lo, pi_lo) = p.control(s.x_e()).unwrap();
    assert_eq!(c_lo, s.k() * s.x_e() + s.l());
    assert_eq!(pi_lo, 0.0);
}
