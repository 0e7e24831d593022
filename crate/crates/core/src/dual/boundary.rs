//! Free-boundary detection on a dual grid.

use serde::{Deserialize, Serialize};

use super::grid::DualGrid;
use crate::interp::MonotoneCubic;
use crate::params::ProblemSpec;

/// A crossing of `phi(y) = y^(1/(p-1)) - (k x(y) + l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundaryPoint {
    pub y: f64,
    pub x: f64,
}

const REL_TOL_Y: f64 = 1e-8;

/// All sign changes of `phi` on the grid, refined by bisection and sorted by
/// increasing wealth. `phi > 0` marks the unconstrained region.
pub fn find_free_boundary(spec: &ProblemSpec, grid: &DualGrid) -> Vec<FreeBoundaryPoint> {
    let n = grid.len();
    if n < 2 {
        return Vec::new();
    }
    let (p, k, l) = (spec.p(), spec.k(), spec.l());
    let x_e = grid.x_e;
    let ts: Vec<f64> = grid.y.iter().map(|y| y.ln()).collect();
    // excess wealth x - x_e as a function of t, with slope -y v_yy
    let slopes: Vec<f64> = (0..n).map(|i| -grid.y[i] * grid.v_yy[i]).collect();
    let excess = MonotoneCubic::new(&ts, &grid.excess, &slopes);

    let phi_at = |t: f64, e: f64| (t / (p - 1.0)).exp() - (l + k * (x_e + e));
    let phi: Vec<f64> = (0..n).map(|i| phi_at(ts[i], grid.excess[i])).collect();
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };

    let mut out = Vec::new();
    for i in 0..n {
        let si = sign(phi[i]);
        if si == 0 && (i == 0 || sign(phi[i - 1]) != 0) {
            out.push(FreeBoundaryPoint {
                y: grid.y[i],
                x: x_e + grid.excess[i],
            });
            continue;
        }
        if i + 1 < n && si * sign(phi[i + 1]) == -1 {
            let (mut lo, mut hi) = (ts[i], ts[i + 1]);
            let eval = |t: f64| phi_at(t, excess.eval(t).unwrap_or(f64::NAN));
            let s_lo = si;
            while hi - lo > REL_TOL_Y {
                let mid = 0.5 * (lo + hi);
                if sign(eval(mid)) == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            out.push(FreeBoundaryPoint {
                y: t.exp(),
                x: x_e + excess.eval(t).unwrap_or(f64::NAN),
            });
        }
    }
    out.sort_by(|a, b| a.x.total_cmp(&b.x));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::appendix_a_build;

    #[test]
    fn closed_form_grid_has_single_crossing_at_x_star() {
        let s = ProblemSpec::from_values(0.03, 0.05, 0.2, 0.1, 0.5, 0.0, 1.0).unwrap();
        let sol = appendix_a_build(&s).unwrap();
        let y: Vec<f64> = (0..301).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 300.0)).collect();
        let pts: Vec<_> = y.iter().map(|&v| sol.dual_eval(v)).collect();
        let grid = DualGrid::from_parts(
            &s,
            y,
            pts.iter().map(|d| d.v).collect(),
            pts.iter().map(|d| d.v_y).collect(),
            pts.iter().map(|d| d.v_yy).collect(),
        )
        .unwrap();
        let fb = find_free_boundary(&s, &grid);
        assert_eq!(fb.len(), 1);
        assert!((fb[0].y - 1.0).abs() < 1e-7);
        assert!((fb[0].x - sol.x_star).abs() < 1e-6);
    }
}
