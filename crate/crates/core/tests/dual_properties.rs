use cfloor_core::closed_form::appendix_a_build;
use cfloor_core::dual::{find_free_boundary, ode_residual, solve_dual, DualGrid, SolverConfig};
use cfloor_core::ProblemSpec;

fn spec(beta: f64, k: f64) -> ProblemSpec {
    ProblemSpec::from_values(0.03, 0.05, 0.2, beta, 0.5, k, 1.0).unwrap()
}

fn log_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[test]
fn state_independent_solve_matches_closed_form() {
    let s = spec(0.1, 0.0);
    let sol = appendix_a_build(&s).unwrap();
    let grid = solve_dual(&s, &SolverConfig::around_reference(&s, 1e-3, 1e3, 4096)).unwrap();
    let mut worst_v: f64 = 0.0;
    let mut worst_vy: f64 = 0.0;
    for i in 0..grid.len() {
        let d = sol.dual_eval(grid.y[i]);
        worst_v = worst_v.max((grid.v[i] - d.v).abs() / (d.v.abs() + grid.y[i] * d.v_y.abs()));
        worst_vy = worst_vy.max((grid.v_y[i] - d.v_y).abs() / d.v_y.abs());
    }
    assert!(worst_v < 1e-5, "{worst_v}");
    assert!(worst_vy < 1e-5, "{worst_vy}");
    let b = find_free_boundary(&s, &grid);
    assert_eq!(b.len(), 1);
    assert!((b[0].x - sol.x_star).abs() < 1e-3, "{} vs {}", b[0].x, sol.x_star);
}

#[test]
fn oracle_error_falls_at_second_order() {
    let s = spec(0.1, 0.0);
    let sol = appendix_a_build(&s).unwrap();
    let err = |n: usize| {
        let g = solve_dual(&s, &SolverConfig::around_reference(&s, 1e-3, 1e3, n)).unwrap();
        (0..g.len())
            .map(|i| (g.v_y[i] - sol.dual_eval(g.y[i]).v_y).abs() / g.v_y[i].abs())
            .fold(0.0f64, f64::max)
    };
    let (e1, e2, e3) = (err(512), err(1024), err(2048));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.0..=5.0).contains(&ratio), "{e1} {e2} {e3}");
    }
}

#[test]
fn exact_residual_falls_by_four_per_halving() {
    let s = spec(0.1, 0.0);
    let sol = appendix_a_build(&s).unwrap();
    let res = |n: usize| {
        let y = log_nodes(1e-2, 1e2, n);
        let v = y.iter().map(|&yy| sol.dual_eval(yy).v).collect();
        ode_residual(&s, &DualGrid::from_values(&s, y, v).unwrap())
    };
    let (r1, r2, r3) = (res(201), res(401), res(801));
    for ratio in [r1 / r2, r2 / r3] {
        assert!((3.0..=5.0).contains(&ratio), "{r1} {r2} {r3}");
    }
}

#[test]
fn converged_residual_is_small() {
    for (beta, k) in [(0.1, 0.02), (0.05, 0.02), (0.15, 0.025)] {
        let s = spec(beta, k);
        let g = solve_dual(&s, &SolverConfig::default_for(&s)).unwrap();
        assert!(g.scheme_residual <= 1e-10);
        assert!(g.residual_inf <= 1e-9, "{beta} {k}: {}", g.residual_inf);
    }
}

#[test]
fn domain_truncation_is_stable() {
    let s = spec(0.1, 0.02);
    let base = SolverConfig::default_for(&s);
    let g = solve_dual(&s, &base).unwrap();
    // extend by a whole number of steps close to a factor of two, so nodes coincide
    let h = (base.y_max / base.y_min).ln() / (base.n_nodes - 1) as f64;
    let m = (2f64.ln() / h).round() as usize;
    let factor = (m as f64 * h).exp();
    let n_nodes = base.n_nodes + m;
    let wider_right = SolverConfig { y_max: factor * base.y_max, n_nodes, ..base };
    let wider_left = SolverConfig { y_min: base.y_min / factor, n_nodes, ..base };
    let n = g.len();
    for (cfg, offset) in [(wider_right, 0), (wider_left, m)] {
        let wide = solve_dual(&s, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for i in n / 4..3 * n / 4 {
            let j = i + offset;
            assert!((wide.y[j] / g.y[i] - 1.0).abs() < 1e-12);
            worst = worst.max((wide.v[j] - g.v[i]).abs() / g.v[i].abs());
        }
        assert!(worst < 1e-5, "{worst}");
    }
}

#[test]
fn grid_shape_invariants() {
    for (beta, k) in [(0.1, 0.02), (0.05, 0.01), (0.15, 0.025)] {
        let s = spec(beta, k);
        let g = solve_dual(&s, &SolverConfig::default_for(&s)).unwrap();
        let mut resolved = 0;
        for i in 1..g.len() - 1 {
            // chord gap; strictly positive wherever it exceeds the rounding of v
            let (y0, y1, y2) = (g.y[i - 1], g.y[i], g.y[i + 1]);
            let w = (y1 - y0) / (y2 - y0);
            let gap = (1.0 - w) * g.v[i - 1] + w * g.v[i + 1] - g.v[i];
            let noise = 4.0 * f64::EPSILON * (g.v[i - 1].abs() + g.v[i].abs() + g.v[i + 1].abs());
            let expected = 0.5 * g.v_yy[i] * (y1 - y0) * (y2 - y1);
            assert!(gap > -noise, "{beta} {k} node {i}");
            if expected > 2.0 * noise {
                assert!(gap > 0.0, "{beta} {k} node {i}");
                resolved += 1;
            }
        }
        assert!(resolved > g.len() / 2, "{resolved}");
        // -v_y rounds to x_e once the excess drops below an ulp; the excess column does not
        assert!(g.v_y.iter().all(|&d| -d >= s.x_e()));
        assert!(g.excess.iter().all(|&e| e > 0.0));
    }
}

#[test]
fn slope_at_right_end_approaches_floor_wealth() {
    let s = spec(0.1, 0.02);
    let gap = |hi: f64| {
        let g = solve_dual(&s, &SolverConfig::around_reference(&s, 1e-4, hi, 2048)).unwrap();
        *g.excess.last().unwrap()
    };
    let (a, b, c) = (gap(1e1), gap(1e2), gap(1e3));
    assert!(a > b && b > c && c < 1e-3 * s.x_e(), "{a} {b} {c}");
}

#[test]
fn free_boundary_counts_by_regime() {
    // kappa < k
    let s = spec(0.05, 0.02);
    assert!(s.kappa() < s.k());
    let g = solve_dual(&s, &SolverConfig::default_for(&s)).unwrap();
    assert!(find_free_boundary(&s, &g).is_empty());
    // kappa >= r
    let s = spec(0.1, 0.02);
    let g = solve_dual(&s, &SolverConfig::default_for(&s)).unwrap();
    let b = find_free_boundary(&s, &g);
    assert_eq!(b.len(), 1);
    assert!(b[0].x > s.x_e());
}
