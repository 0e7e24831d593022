//! Property checks on a computed policy table and its dual grid.
//!
//! Every check is a pure function of its inputs and reports the worst
//! violation found and where it occurred. Checks without a pass/fail
//! assertion for the given parameters pass and carry a note.

use serde::Serialize;

use crate::closed_form::homogeneous_value_unchecked;
use crate::dual::{g_floor, DualGrid};
use crate::params::ProblemSpec;
use crate::policy::{PolicyTable, Region};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Largest violation, in the units of the check's normalized criterion.
    pub worst: f64,
    /// Abscissa (`x`, or `y` for dual checks) of the worst violation.
    pub location: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub overall: bool,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        let overall = checks.iter().all(|c| c.pass);
        Self { checks, overall }
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// HJB residual relative to `1 + |beta V|`.
    pub hjb: f64,
    /// Sandwich bounds relative to `1 + |V|`.
    pub sandwich: f64,
    /// Marginal-value bound, relative.
    pub vx_bound: f64,
    /// Finite-difference derivative agreement, relative.
    pub gradient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hjb: 1e-6,
            sandwich: 1e-9,
            vx_bound: 1e-9,
            gradient: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            hjb: self.hjb / factor,
            sandwich: self.sandwich / factor,
            vx_bound: self.vx_bound / factor,
            gradient: self.gradient / factor,
        }
    }
}

/// Running maximum of a violation measure with its location.
struct Worst {
    value: f64,
    location: Option<f64>,
    failed: bool,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            location: None,
            failed: false,
        }
    }

    /// Records `measure` at `at`; `ok` says whether this node passes.
    fn record(&mut self, measure: f64, at: f64, ok: bool) {
        let measure = if measure.is_nan() { f64::INFINITY } else { measure };
        if !ok {
            self.failed = true;
        }
        if measure > self.value || self.location.is_none() {
            self.value = measure;
            self.location = Some(at);
        }
    }

    fn finish(self, name: &str) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            pass: !self.failed,
            worst: self.value,
            location: self.location,
            note: None,
        }
    }
}

/// `beta V + a V_x^2 / V_xx - G(kx + l, V_x) - r x V_x` at interior nodes,
/// relative to `1 + |beta V|`.
pub fn check_hjb_residual(spec: &ProblemSpec, table: &PolicyTable, tol: f64) -> CheckResult {
    let a = spec.market.half_sharpe_sq();
    let (beta, r, p, k, l) = (spec.beta(), spec.r(), spec.p(), spec.k(), spec.l());
    let mut w = Worst::new();
    for i in 1..table.len().saturating_sub(1) {
        let (x, v, vx, vxx) = (table.x[i], table.value[i], table.v_x[i], table.v_xx[i]);
        let res = beta * v + a * vx * vx / vxx - g_floor(k * x + l, vx, p) - r * x * vx;
        let rel = res.abs() / (1.0 + (beta * v).abs());
        w.record(rel, x, rel <= tol);
    }
    w.finish("hjb_residual")
}

/// `V_k(x - x_e) <= V(x) <= V_k(x - x_e) + V(x_e)` and `V(x) <= V_k(x)`.
pub fn check_sandwich(spec: &ProblemSpec, table: &PolicyTable, tol: f64) -> CheckResult {
    let v_xe = spec.derived.v_xe.unwrap_or(0.0);
    let mut w = Worst::new();
    for i in 0..table.len() {
        let (x, v) = (table.x[i], table.value[i]);
        let shifted = homogeneous_value_unchecked(spec, table.x_minus_xe[i].max(0.0)).unwrap_or(f64::NAN);
        let global = homogeneous_value_unchecked(spec, x).unwrap_or(f64::NAN);
        let scale = 1.0 + v.abs();
        let viol = (shifted - v).max(v - shifted - v_xe).max(v - global) / scale;
        w.record(viol.max(0.0), x, viol <= tol);
    }
    w.finish("sandwich")
}

/// `V_x(x) <= max{kappa, k}^p x^p / (kappa (x - x_e))`, plus a growth proxy
/// for the blow-up of `V_x` at `x_e`: `V_x` at the first node must exceed
/// `V_x` one tenth of the way across the table by a factor of ten.
pub fn check_vx_bound(spec: &ProblemSpec, table: &PolicyTable, tol: f64) -> CheckResult {
    let (kappa, p) = (spec.kappa(), spec.p());
    let m = spec.homogeneous_rate().powf(p);
    let mut w = Worst::new();
    for i in 0..table.len() {
        let x = table.x[i];
        let bound = m * x.powf(p) / (kappa * table.x_minus_xe[i]);
        let viol = if bound > 0.0 { table.v_x[i] / bound - 1.0 } else { f64::INFINITY };
        w.record(viol.max(0.0), x, viol <= tol);
    }
    let mut result = w.finish("vx_bound");
    if spec.l() > 0.0 {
        let target = table.x_min() + 0.1 * (table.x_max() - table.x_min());
        let j = table.x.partition_point(|&x| x < target).min(table.len() - 1);
        let ratio = table.v_x[0] / table.v_x[j];
        if !(ratio >= 10.0) {
            result.pass = false;
        }
        result.note = Some(format!(
            "growth proxy: V_x(x_first) / V_x({:.6e}) = {ratio:.3e}",
            table.x[j]
        ));
    }
    result
}

/// Shape of the free boundary: none when `kappa < k`; exactly one in
/// `(x_e, bracket)` when `kappa >= r`. Other regimes are reported only.
pub fn check_region_theorems(spec: &ProblemSpec, table: &PolicyTable) -> CheckResult {
    let (kappa, k, r, l, p) = (spec.kappa(), spec.k(), spec.r(), spec.l(), spec.p());
    let x_e = spec.derived.x_e.unwrap_or(0.0);
    let xs = &table.x_star_list;
    let mut res = CheckResult {
        name: "region_theorems".into(),
        pass: true,
        worst: 0.0,
        location: None,
        note: None,
    };
    if l == 0.0 {
        res.note = Some(format!(
            "not applicable for l = 0; {} crossing(s) observed",
            xs.len()
        ));
        return res;
    }
    let first_region_ok = table.region[0] == Region::Constrained;
    if kappa < k {
        res.pass = xs.is_empty() && first_region_ok;
        res.worst = xs.len() as f64;
        res.location = xs.first().copied();
        res.note = Some(format!("kappa < k: expect no crossing, found {}", xs.len()));
    } else if kappa >= r {
        let one = xs.len() == 1;
        let mut note = format!("kappa >= r: expect one crossing, found {}", xs.len());
        let mut ok = one && first_region_ok;
        if one {
            let x_star = xs[0];
            res.location = Some(x_star);
            ok &= x_star > x_e;
            if k > 0.0 {
                let ratio = k / kappa;
                let upper = (x_e + (1.0 - p) * ratio.powf(-p) * l / kappa) / (1.0 - ratio.powf(1.0 - p));
                ok &= x_star < upper;
                res.worst = ((x_star - upper) / upper).max(0.0);
                note.push_str(&format!("; x* = {x_star:.10e} in ({x_e:.10e}, {upper:.10e})"));
            } else {
                note.push_str(&format!("; x* = {x_star:.10e} > x_e = {x_e:.10e}"));
            }
        } else {
            res.worst = (xs.len() as f64 - 1.0).abs();
        }
        res.pass = ok;
        res.note = Some(note);
    } else {
        res.note = Some(format!(
            "k <= kappa < r: no assertion; {} crossing(s), {} region interval(s)",
            xs.len(),
            table.regions().len()
        ));
    }
    res
}

/// Three-point derivative of `f` at node `b` from nodes `a < b < c`, with the
/// absolute rounding error of the stencil and the spacing product `h1 h2`.
fn fd_derivative(table: &PolicyTable, f: &[f64], a: usize, b: usize, c: usize) -> (f64, f64, f64) {
    let xm = &table.x_minus_xe;
    let (h1, h2) = (xm[b] - xm[a], xm[c] - xm[b]);
    let cm = -h2 / (h1 * (h1 + h2));
    let c0 = (h2 - h1) / (h1 * h2);
    let cp = h1 / (h2 * (h1 + h2));
    let d = cm * f[a] + c0 * f[b] + cp * f[c];
    let value_err =
        8.0 * f64::EPSILON * (cm.abs() * f[a].abs() + c0.abs() * f[b].abs() + cp.abs() * f[c].abs());
    (d, value_err, h1 * h2)
}

/// Centered differences of `V` against `V_x` and of `V_x` against `V_xx`.
///
/// Accepts `max(tol |f'|, 2 |truncation|) + rounding`. The truncation of the
/// `h1 h2` stencil is the larger of `f''' h1 h2 / 6`, with `f'''` from
/// differences of the next stored derivative, and the Richardson estimate
/// from the same stencil on every other node.
pub fn check_gradient_consistency(table: &PolicyTable, tol: f64) -> CheckResult {
    let n = table.len();
    let mut w = Worst::new();
    if n < 5 {
        let mut r = w.finish("gradient_consistency");
        r.pass = false;
        r.note = Some("fewer than 5 nodes".into());
        return r;
    }
    let xm = &table.x_minus_xe;
    let cols = [(&table.value, &table.v_x), (&table.v_x, &table.v_xx)];
    for i in 2..n - 2 {
        let dx = (i - 2..=i + 2).map(|j| table.excess_roundoff(j)).fold(0.0, f64::max);
        let hmin = (xm[i] - xm[i - 1]).min(xm[i + 1] - xm[i]);
        for (idx, (f, df)) in cols.iter().enumerate() {
            let (fd, value_err, hh) = fd_derivative(table, f, i - 1, i, i + 1);
            let (fd2, value_err2, hh2) = fd_derivative(table, f, i - 2, i, i + 2);
            let stored = df[i];
            let third = if idx == 0 {
                fd_derivative(table, &table.v_xx, i - 1, i, i + 1).0
            } else {
                let a = fd_derivative(table, &table.v_xx, i, i + 1, i + 2).0;
                let b = fd_derivative(table, &table.v_xx, i - 2, i - 1, i).0;
                (a - b) / (xm[i + 1] - xm[i - 1])
            };
            let richardson = (fd - fd2).abs() * hh / (hh2 - hh);
            let trunc = (third.abs() * hh / 6.0).max(richardson);
            // spacing errors perturb the stencils by ~ |f'| dx / h
            let spacing_err = 2.0 * (stored.abs() + fd.abs().max(fd2.abs())) * dx / hmin;
            let allowed = (tol * stored.abs()).max(2.0 * trunc) + value_err + value_err2 + spacing_err;
            let err = (fd - stored).abs();
            let measure = if stored != 0.0 { err / stored.abs() } else { err };
            w.record(measure, table.x[i], err <= allowed);
        }
    }
    w.finish("gradient_consistency")
}

/// `V` non-decreasing, `V_x > 0` non-increasing, `V_xx < 0`.
pub fn check_monotone_concave(table: &PolicyTable) -> CheckResult {
    let mut w = Worst::new();
    for i in 0..table.len() {
        let x = table.x[i];
        let mut viol: f64 = 0.0;
        if i > 0 {
            viol = viol
                .max(table.value[i - 1] - table.value[i])
                .max(table.v_x[i] - table.v_x[i - 1]);
        }
        let shape_ok = table.v_x[i] > 0.0 && table.v_xx[i] < 0.0;
        if !shape_ok {
            viol = viol.max(table.v_xx[i].max(-table.v_x[i]).max(f64::MIN_POSITIVE));
        }
        w.record(viol, x, viol <= 0.0 && shape_ok);
    }
    w.finish("monotone_concave")
}

/// `c* >= kx + l` and `pi* > 0` at every node.
pub fn check_admissibility(spec: &ProblemSpec, table: &PolicyTable) -> CheckResult {
    let mut w = Worst::new();
    for i in 0..table.len() {
        let floor = spec.k() * table.x[i] + spec.l();
        let gap = (floor - table.c_star[i]) / floor.max(f64::MIN_POSITIVE);
        let ok = gap <= 1e-12 && table.pi_star[i] > 0.0;
        w.record(gap.max(0.0), table.x[i], ok);
    }
    w.finish("admissibility")
}

/// Dual-side invariants: `v_yy > 0`, `v_y < -x_e`, `v_y` non-decreasing and
/// `V_xx v_yy = -1` on nodes shared with the table.
pub fn check_dual(spec: &ProblemSpec, grid: &DualGrid, table: &PolicyTable) -> Vec<CheckResult> {
    let x_e = spec.derived.x_e.unwrap_or(0.0);

    let mut convex = Worst::new();
    for i in 0..grid.len() {
        let d = grid.v_yy[i];
        convex.record((-d).max(0.0), grid.y[i], d > 0.0);
    }

    // stored v_y carries one rounding of size ~ eps x_e from the shift by x_e
    let slack = 2.0 * f64::EPSILON * x_e;
    let mut slope = Worst::new();
    for i in 0..grid.len() {
        let e = grid.excess[i];
        let ok = e > 0.0 || (e >= -slack && grid.v_y[i] >= -x_e - slack && grid.v_yy[i] > 0.0);
        slope.record((-e).max(0.0), grid.y[i], ok);
    }

    let mut mono = Worst::new();
    for i in 1..grid.len() {
        let drop = grid.v_y[i - 1] - grid.v_y[i];
        mono.record(drop.max(0.0), grid.y[i], drop <= 0.0);
    }

    let mut inverse = Worst::new();
    let (mut j, mut matched) = (grid.len(), 0usize);
    for i in 0..table.len() {
        let y = table.v_x[i];
        // grid y ascends while table V_x descends
        while j > 0 && grid.y[j - 1] > y {
            j -= 1;
        }
        if j > 0 && grid.y[j - 1] == y {
            matched += 1;
            let err = (table.v_xx[i] * grid.v_yy[j - 1] + 1.0).abs();
            inverse.record(err, table.x[i], err <= 1e-12);
        }
    }
    let mut inverse = inverse.finish("inverse_identity");
    if matched == 0 {
        inverse.pass = false;
        inverse.note = Some("no table node matches a dual node".into());
    }

    vec![
        convex.finish("dual_convexity"),
        slope.finish("dual_slope_bound"),
        mono.finish("dual_slope_monotone"),
        inverse,
    ]
}

/// All checks in a fixed order.
pub fn run_all(
    spec: &ProblemSpec,
    table: &PolicyTable,
    grid: Option<&DualGrid>,
    tol: &Tolerances,
) -> VerificationReport {
    let mut checks = vec![
        check_hjb_residual(spec, table, tol.hjb),
        check_sandwich(spec, table, tol.sandwich),
        check_vx_bound(spec, table, tol.vx_bound),
        check_region_theorems(spec, table),
        check_gradient_consistency(table, tol.gradient),
        check_monotone_concave(table),
        check_admissibility(spec, table),
    ];
    if let Some(g) = grid {
        checks.extend(check_dual(spec, g, table));
    }
    VerificationReport::new(checks)
}
