//! Damped Newton solver for the dual ODE on a uniform grid in `t = ln y`.
//!
//! In `t` the dual equation reads
//! `-a v_tt + (a + r - beta) v_t + beta v = G(l - k e^(-t) v_t, e^t)`.
//! The unknown is the correction `w` in
//! `v = S rho(t) y^q - x_e y + V(x_e) + w`, where `S y^q` is the dual of the
//! homogeneous value `V_k` and `rho` is a smooth cutoff that removes it for
//! large `y`. Both asymptotes of `v` are carried exactly by the ansatz, so `w`
//! stays of the order of `V(x_e)` across the whole domain.

use serde::{Deserialize, Serialize};

use super::grid::{first_derivative, ode_residual, DualGrid};
use super::hamiltonian::g_shift;
use crate::closed_form::{homogeneous_coefficient, homogeneous_dual_coefficient, roots_of};
use crate::error::{Error, Result};
use crate::params::{ProblemCase, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub y_min: f64,
    pub y_max: f64,
    pub n_nodes: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

/// Dual price at which the floor starts to bind at `x_e`: `c_e^(p-1)`.
pub fn reference_price(spec: &ProblemSpec) -> f64 {
    spec.c_e().powf(spec.p() - 1.0)
}

impl SolverConfig {
    /// `[lo_factor, hi_factor] * y_ref` with `n_nodes` nodes and default Newton settings.
    pub fn around_reference(spec: &ProblemSpec, lo_factor: f64, hi_factor: f64, n_nodes: usize) -> Self {
        let y_ref = reference_price(spec);
        Self {
            y_min: lo_factor * y_ref,
            y_max: hi_factor * y_ref,
            n_nodes,
            newton_tol: 1e-10,
            max_iter: 100,
            damping: 1.0,
        }
    }

    pub fn default_for(spec: &ProblemSpec) -> Self {
        Self::around_reference(spec, 1e-4, 1e4, 4096)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.y_min > 0.0 && self.y_min < self.y_max && self.y_max.is_finite()) {
            return bad("need 0 < y_min < y_max < inf");
        }
        if self.n_nodes < 64 {
            return bad("n_nodes must be >= 64");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        Ok(())
    }
}

const MIN_DAMPING: f64 = 1.0 / 64.0;
/// Half-width in `t` of the cutoff `rho` around `ln y_ref`.
const CUTOFF_HALF_WIDTH: f64 = 2.0;
const CUTOFF_SHIFT: f64 = 2.0;
/// Boundary errors decay like `exp(-lambda |t - t_end|)`; each buffer buys `e^-30`.
const BUFFER_DECAY: f64 = 30.0;
const MAX_BUFFER: f64 = 25.0;
/// Keeps `y^q` well inside the floating-point range on the buffer.
const MAX_POWER_EXPONENT: f64 = 500.0;

/// Smooth step from 0 to 1 on `[0, 1]` and its first two derivatives.
///
/// `L(1/(1-s) - 1/s)` with `L` the logistic function: flat to all orders at
/// both ends, so the cutoff adds no derivative jumps to the discretization.
fn smoothstep(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let r = 1.0 - s;
    let z = 1.0 / r - 1.0 / s;
    let e = (-z.abs()).exp();
    let val = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    let l1 = e / ((1.0 + e) * (1.0 + e));
    let l2 = l1 * (1.0 - 2.0 * val);
    let z1 = 1.0 / (r * r) + 1.0 / (s * s);
    let z2 = 2.0 / (r * r * r) - 2.0 / (s * s * s);
    (val, l1 * z1, l2 * z1 * z1 + l1 * z2)
}

struct Problem {
    a: f64,
    b: f64,
    beta: f64,
    p: f64,
    k: f64,
    c_e: f64,
    v_xe: f64,
    h: f64,
    t: Vec<f64>,
    y: Vec<f64>,
    em: Vec<f64>,
    g: Vec<f64>,
    g_t: Vec<f64>,
    g_tt: Vec<f64>,
    lg: Vec<f64>,
}

impl Problem {
    fn n(&self) -> usize {
        self.t.len()
    }

    /// Forcing `G(c_e + du, y) - G(c_e, y)` given `w_t` at node `i`, and `G_u`.
    fn forcing(&self, i: usize, w_t: f64) -> (f64, f64) {
        let du = -self.k * self.em[i] * (self.g_t[i] + w_t);
        g_shift(self.c_e, du, self.y[i], self.p)
    }

    fn primal(&self, i: usize, w: f64, w_t: f64) -> f64 {
        self.g[i] - self.g_t[i] + w - w_t + self.v_xe
    }

    /// Scaled residuals `|F_i| / (1 + beta |V_i|)`, max over interior nodes.
    fn residual(&self, w: &[f64], out: &mut [f64]) -> f64 {
        let (h, n) = (self.h, self.n());
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let w_t = (w[i + 1] - w[i - 1]) / (2.0 * h);
            let w_tt = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h);
            let (gd, _) = self.forcing(i, w_t);
            let f = -self.a * w_tt + self.b * w_t + self.beta * w[i] - gd + self.lg[i];
            out[i] = f;
            let scale = 1.0 + self.beta * self.primal(i, w[i], w_t).abs();
            worst = worst.max(f.abs() / scale);
        }
        if worst.is_nan() {
            f64::INFINITY
        } else {
            worst
        }
    }

    /// One Newton direction: solves `J dw = -F` with Dirichlet ends fixed.
    fn newton_direction(&self, w: &[f64], f: &[f64]) -> Vec<f64> {
        let (h, n) = (self.h, self.n());
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for j in 0..m {
            let i = j + 1;
            let w_t = (w[i + 1] - w[i - 1]) / (2.0 * h);
            let (_, g_u) = self.forcing(i, w_t);
            let c = self.b + self.k * self.em[i] * g_u;
            lower[j] = -self.a / (h * h) - c / (2.0 * h);
            diag[j] = 2.0 * self.a / (h * h) + self.beta;
            upper[j] = -self.a / (h * h) + c / (2.0 * h);
            rhs[j] = -f[i];
        }
        let inner = thomas(&lower, &diag, &upper, &rhs);
        let mut dw = vec![0.0; n];
        dw[1..n - 1].copy_from_slice(&inner);
        dw
    }

    fn newton(&self, w: &mut [f64], cfg: &SolverConfig, iterations: &mut usize) -> Result<f64> {
        let n = self.n();
        let mut f = vec![0.0; n];
        let mut trial_f = vec![0.0; n];
        let mut merit = self.residual(w, &mut f);
        let mut trial = vec![0.0; n];
        for _ in 0..cfg.max_iter {
            if merit <= cfg.newton_tol {
                return Ok(merit);
            }
            *iterations += 1;
            let dw = self.newton_direction(w, &f);
            let mut lambda = cfg.damping;
            loop {
                for i in 0..n {
                    trial[i] = w[i] + lambda * dw[i];
                }
                let m = self.residual(&trial, &mut trial_f);
                if m < merit || lambda <= MIN_DAMPING {
                    merit = m;
                    w.copy_from_slice(&trial);
                    std::mem::swap(&mut f, &mut trial_f);
                    break;
                }
                lambda *= 0.5;
            }
        }
        if merit <= cfg.newton_tol {
            Ok(merit)
        } else {
            Err(Error::NoConvergence {
                iterations: *iterations,
                residual: merit,
            })
        }
    }
}

/// Tridiagonal solve (no pivoting; the Newton matrix is an M-matrix).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Decay rate of left-boundary perturbations for the linearized operator.
fn left_decay_rate(spec: &ProblemSpec) -> f64 {
    let a = spec.market.half_sharpe_sq();
    let b = a + spec.r() - spec.beta();
    let (k, kappa, p) = (spec.k(), spec.kappa(), spec.p());
    let drift = if kappa >= k {
        b
    } else {
        let big_a = homogeneous_coefficient(spec);
        b + k * (k.powf(p - 1.0) / big_a - 1.0)
    };
    roots_of(a, drift, spec.beta()).0.abs()
}

/// Decay rate of right-boundary perturbations, taking the slower of the
/// floor-binding and non-binding drifts.
fn right_decay_rate(spec: &ProblemSpec) -> f64 {
    let a = spec.market.half_sharpe_sq();
    let b = a + spec.r() - spec.beta();
    let bound = |drift: f64| roots_of(a, drift, spec.beta()).1;
    bound(b).min(bound(b - spec.k()))
}

/// Solves the dual ODE for `0 <= k < r`, `l > 0`, `kappa > 0`.
pub fn solve_dual(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<DualGrid> {
    match spec.classify() {
        ProblemCase::NonHomogeneous | ProblemCase::StateIndependent => {}
        ProblemCase::ValuePossiblyInfinite => spec.require_positive_kappa()?,
        other => return Err(Error::UnsupportedCase(other)),
    }
    cfg.validate()?;

    let (p, k, beta) = (spec.p(), spec.k(), spec.beta());
    let a = spec.market.half_sharpe_sq();
    let b = a + spec.r() - beta;
    let q = p / (p - 1.0);
    let (x_e, c_e, v_xe) = (spec.x_e(), spec.c_e(), spec.v_xe());
    let s_a = homogeneous_dual_coefficient(spec);
    let t_ref = reference_price(spec).ln();

    let n_out = cfg.n_nodes;
    let (t_lo, t_hi) = (cfg.y_min.ln(), cfg.y_max.ln());
    let h = (t_hi - t_lo) / (n_out - 1) as f64;

    let power_room = (MAX_POWER_EXPONENT / q.abs() - t_lo.abs().max(t_hi.abs())).max(0.0);
    let buffer = (BUFFER_DECAY / left_decay_rate(spec)).min(MAX_BUFFER).min(power_room);
    let nb = (buffer / h).ceil() as usize;
    let right_buffer = (BUFFER_DECAY / right_decay_rate(spec)).min(MAX_BUFFER);
    let nr = (right_buffer / h).ceil() as usize;
    let n = nb + n_out + nr;

    let t: Vec<f64> = (0..n)
        .map(|j| {
            if j < nb {
                t_lo - (nb - j) as f64 * h
            } else {
                t_lo + (j - nb) as f64 * h
            }
        })
        .collect();
    let y: Vec<f64> = t.iter().map(|t| t.exp()).collect();
    let em: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
    let (mut g, mut g_t, mut g_tt) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let w = CUTOFF_HALF_WIDTH;
        let (s, ds, dds) = smoothstep(0.5 * (t[j] - t_ref + CUTOFF_SHIFT + w) / w);
        let rho = 1.0 - s;
        let rho_t = -0.5 * ds / w;
        let rho_tt = -0.25 * dds / (w * w);
        let e = s_a * (q * t[j]).exp();
        g[j] = e * rho;
        g_t[j] = e * (rho_t + q * rho);
        g_tt[j] = e * (rho_tt + 2.0 * q * rho_t + q * q * rho);
    }
    let lg: Vec<f64> = (0..n)
        .map(|j| -a * g_tt[j] + b * g_t[j] + beta * g[j])
        .collect();

    let prob = Problem {
        a,
        b,
        beta,
        p,
        k,
        c_e,
        v_xe,
        h,
        t,
        y,
        em,
        g,
        g_t,
        g_tt,
        lg,
    };

    let mut w: Vec<f64> = (0..n)
        .map(|j| s_a * (q * prob.t[j]).exp() - prob.g[j] - 0.5 * v_xe)
        .collect();
    w[0] = -0.5 * v_xe;
    w[n - 1] = 0.0;

    let mut iterations = 0;
    prob.newton(&mut w, cfg, &mut iterations)?;
    let probe = nb.max(1);
    let delta = (w[probe] + v_xe).clamp(0.0, v_xe);
    w[0] = delta - v_xe;
    let scheme_residual = prob.newton(&mut w, cfg, &mut iterations)?;

    let w_t_all = first_derivative(&w, h);
    let mut out = DualGrid {
        y: Vec::with_capacity(n_out),
        v: Vec::with_capacity(n_out),
        v_y: Vec::with_capacity(n_out),
        v_yy: Vec::with_capacity(n_out),
        primal_value: Vec::with_capacity(n_out),
        excess: Vec::with_capacity(n_out),
        x_e,
        residual_inf: 0.0,
        scheme_residual,
        iterations,
    };
    for j in nb..nb + n_out {
        let w_t = w_t_all[j];
        let (gd, _) = prob.forcing(j, w_t);
        let w_tt = (b * w_t + beta * w[j] - gd + prob.lg[j]) / a;
        let (yj, em) = (prob.y[j], prob.em[j]);
        let v_t = prob.g_t[j] + w_t;
        let v_yy = em * em * ((prob.g_tt[j] - prob.g_t[j]) + (w_tt - w_t));
        if !(v_yy > 0.0) {
            return Err(Error::ConvexityLoss { y: yj, v_yy });
        }
        out.y.push(yj);
        out.v.push(prob.g[j] + w[j] + v_xe - x_e * yj);
        out.v_y.push(em * v_t - x_e);
        out.v_yy.push(v_yy);
        out.primal_value.push(prob.primal(j, w[j], w_t));
        out.excess.push(-em * v_t);
    }
    out.residual_inf = ode_residual(spec, &out);
    Ok(out)
}
