//! Closed-form solutions: Merton, the homogeneous floor `c >= kX`, and the
//! state-independent floor `c >= l` (k = 0) in dual form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ProblemSpec;

fn require_wealth(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("wealth must be finite and >= 0, got {x}")))
    }
}

/// Merton value `kappa^(p-1) x^p / p`.
pub fn merton_value(spec: &ProblemSpec, x: f64) -> Result<f64> {
    spec.require_positive_kappa()?;
    require_wealth(x)?;
    let p = spec.p();
    Ok(spec.kappa().powf(p - 1.0) * x.powf(p) / p)
}

/// Merton feedback `(kappa x, f x)` with `f` the Merton fraction.
pub fn merton_policy(spec: &ProblemSpec, x: f64) -> Result<(f64, f64)> {
    spec.require_positive_kappa()?;
    require_wealth(x)?;
    Ok((spec.kappa() * x, spec.derived.merton_fraction * x))
}

/// Coefficient `A` with `V_k(x) = A x^p / p`.
pub fn homogeneous_coefficient(spec: &ProblemSpec) -> f64 {
    let (kappa, p) = (spec.kappa(), spec.p());
    let m = spec.homogeneous_rate();
    m.powf(p) / (kappa * (1.0 - p) + m * p)
}

/// Value of the homogeneous problem with floor slope `k`, ignoring `l`.
///
/// Used directly as the bound `V_k` in the non-homogeneous case, so it does
/// not insist on `l = 0`; see [`homogeneous_value`] for the checked variant.
pub fn homogeneous_value_unchecked(spec: &ProblemSpec, x: f64) -> Result<f64> {
    spec.require_positive_kappa()?;
    require_wealth(x)?;
    Ok(homogeneous_coefficient(spec) * x.powf(spec.p()) / spec.p())
}

pub fn homogeneous_value(spec: &ProblemSpec, x: f64) -> Result<f64> {
    if spec.l() != 0.0 {
        return Err(Error::NotHomogeneousCase { l: spec.l() });
    }
    homogeneous_value_unchecked(spec, x)
}

/// Homogeneous feedback `(max{kappa, k} x, f x)`.
pub fn homogeneous_policy(spec: &ProblemSpec, x: f64) -> Result<(f64, f64)> {
    if spec.l() != 0.0 {
        return Err(Error::NotHomogeneousCase { l: spec.l() });
    }
    spec.require_positive_kappa()?;
    require_wealth(x)?;
    Ok((spec.homogeneous_rate() * x, spec.derived.merton_fraction * x))
}

/// Dual of `V_k`: `v(y) = S y^(p/(p-1))` with `S = ((1-p)/p) A^(1/(1-p))`.
pub fn homogeneous_dual_coefficient(spec: &ProblemSpec) -> f64 {
    let p = spec.p();
    (1.0 - p) / p * homogeneous_coefficient(spec).powf(1.0 / (1.0 - p))
}

/// Characteristic polynomial `f(lambda) = -a lambda (lambda - 1) + (r - beta) lambda + beta`.
pub fn characteristic(spec: &ProblemSpec, lambda: f64) -> f64 {
    let a = spec.market.half_sharpe_sq();
    -a * lambda * (lambda - 1.0) + (spec.r() - spec.beta()) * lambda + spec.beta()
}

/// Roots `lambda1 < 0 < 1 < lambda2` of [`characteristic`].
pub fn quadratic_roots(spec: &ProblemSpec) -> Result<(f64, f64)> {
    spec.require_positive_kappa()?;
    let a = spec.market.half_sharpe_sq();
    let beta = spec.beta();
    Ok(roots_of(a, a + spec.r() - beta, beta))
}

/// Roots of `-a x^2 + b x + c` with `a, c > 0`, ordered (negative, positive).
pub(crate) fn roots_of(a: f64, b: f64, c: f64) -> (f64, f64) {
    // x^2 - (b/a) x - c/a = 0; compute the larger-magnitude root first.
    let disc = (b * b + 4.0 * a * c).sqrt();
    let big = if b >= 0.0 {
        (b + disc) / (2.0 * a)
    } else {
        (b - disc) / (2.0 * a)
    };
    // product of roots = -c/a
    let small = -c / (a * big);
    if big < small {
        (big, small)
    } else {
        (small, big)
    }
}

/// Value, slope and curvature of a dual function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualPoint {
    pub v: f64,
    pub v_y: f64,
    pub v_yy: f64,
}

/// Closed-form dual solution for `k = 0`, `l > 0`.
///
/// For `y <= y_star` the consumption floor is slack and
/// `v = C y^lambda2 + S y^(p/(p-1))`, `S = (1-p)/(p kappa)`; above it the
/// floor binds and `v = D y^lambda1 + l^p/(beta p) - (l/r) y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixASolution {
    pub lambda1: f64,
    pub lambda2: f64,
    pub coef_c: f64,
    pub coef_d: f64,
    pub y_star: f64,
    pub x_star: f64,
    merton_coef: f64,
    q: f64,
    p: f64,
    l: f64,
    r: f64,
    beta: f64,
    mu_over_sigma_sq: f64,
}

pub fn appendix_a_build(spec: &ProblemSpec) -> Result<AppendixASolution> {
    AppendixASolution::new(spec)
}

pub fn appendix_a_dual_eval(sol: &AppendixASolution, y: f64) -> DualPoint {
    sol.dual_eval(y)
}

impl AppendixASolution {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        if spec.k() != 0.0 || spec.l() <= 0.0 {
            return Err(Error::NotStateIndependentCase {
                k: spec.k(),
                l: spec.l(),
            });
        }
        let (lambda1, lambda2) = quadratic_roots(spec)?;
        let (p, l, r, beta, kappa) = (spec.p(), spec.l(), spec.r(), spec.beta(), spec.kappa());
        let q = p / (p - 1.0);
        let s = (1.0 - p) / (p * kappa);
        let y_star = l.powf(p - 1.0);

        // Value matching and smooth pasting at y_star, written for the
        // scaled unknowns a = C y*^lambda2, b = D y*^lambda1.
        let lp = l.powf(p);
        let ly = l * y_star;
        let s_yq = s * y_star.powf(q);
        let e = lp / (beta * p) - ly / r - s_yq;
        let f = -ly / r - q * s_yq;
        let b = (f - lambda2 * e) / (lambda2 - lambda1);
        let a = e + b;

        let mut sol = Self {
            lambda1,
            lambda2,
            coef_c: a / y_star.powf(lambda2),
            coef_d: b / y_star.powf(lambda1),
            y_star,
            x_star: f64::NAN,
            merton_coef: s,
            q,
            p,
            l,
            r,
            beta,
            mu_over_sigma_sq: spec.mu() / (spec.sigma() * spec.sigma()),
        };
        sol.x_star = -sol.dual_eval(y_star).v_y;
        Ok(sol)
    }

    /// Asymptote of `-v_y` as `y -> infinity`.
    pub fn x_e(&self) -> f64 {
        self.l / self.r
    }

    pub fn dual_eval(&self, y: f64) -> DualPoint {
        let (q, s) = (self.q, self.merton_coef);
        if y <= self.y_star {
            let (l2, c) = (self.lambda2, self.coef_c);
            let a = c * y.powf(l2);
            let b = s * y.powf(q);
            DualPoint {
                v: a + b,
                v_y: (l2 * a + q * b) / y,
                v_yy: (l2 * (l2 - 1.0) * a + q * (q - 1.0) * b) / (y * y),
            }
        } else {
            let (l1, d) = (self.lambda1, self.coef_d);
            let a = d * y.powf(l1);
            DualPoint {
                v: a + self.l.powf(self.p) / (self.beta * self.p) - self.x_e() * y,
                v_y: l1 * a / y - self.x_e(),
                v_yy: l1 * (l1 - 1.0) * a / (y * y),
            }
        }
    }

    /// `V(x(y)) = v - y v_y`, evaluated without cancellation.
    pub fn primal_value_at_dual(&self, y: f64) -> f64 {
        if y <= self.y_star {
            let l2 = self.lambda2;
            self.coef_c * (1.0 - l2) * y.powf(l2) + self.merton_coef * (1.0 - self.q) * y.powf(self.q)
        } else {
            let l1 = self.lambda1;
            self.coef_d * (1.0 - l1) * y.powf(l1) + self.l.powf(self.p) / (self.beta * self.p)
        }
    }

    /// `x - x_e` at dual price `y`, evaluated without cancellation.
    pub fn excess_wealth(&self, y: f64) -> f64 {
        if y <= self.y_star {
            -self.dual_eval(y).v_y - self.x_e()
        } else {
            -self.lambda1 * self.coef_d * y.powf(self.lambda1 - 1.0)
        }
    }

    /// Dual price `y = V_x(x)` solving `-v_y(y) = x`, for `x > x_e`.
    pub fn dual_price(&self, x: f64) -> Result<f64> {
        let x_e = self.x_e();
        if !(x > x_e) || !x.is_finite() {
            return Err(Error::Domain(format!(
                "wealth {x} must exceed the floor {x_e}"
            )));
        }
        let target = x - x_e;
        // g(t) = excess(e^t) - target is decreasing in t.
        let g = |t: f64| self.excess_wealth(t.exp()) - target;
        let mut lo = self.y_star.ln();
        let mut hi = lo;
        while g(lo) < 0.0 {
            lo -= 1.0;
        }
        while g(hi) > 0.0 {
            hi += 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-6 {
                break;
            }
        }
        let mut y = (0.5 * (lo + hi)).exp();
        for _ in 0..50 {
            let d = self.dual_eval(y);
            let step = (self.excess_wealth(y) - target) / d.v_yy;
            let next = (y + step).clamp(lo.exp(), hi.exp());
            let done = (next - y).abs() <= 1e-14 * y;
            y = next;
            if done {
                break;
            }
        }
        Ok(y)
    }

    /// `(V, V_x, V_xx)` at wealth `x > x_e`.
    pub fn primal(&self, x: f64) -> Result<(f64, f64, f64)> {
        let y = self.dual_price(x)?;
        let d = self.dual_eval(y);
        Ok((self.primal_value_at_dual(y), y, -1.0 / d.v_yy))
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.primal(x)?.0)
    }

    /// Optimal `(c, pi)` at wealth `x > x_e`.
    pub fn policy(&self, x: f64) -> Result<(f64, f64)> {
        let y = self.dual_price(x)?;
        let d = self.dual_eval(y);
        let c = y.powf(1.0 / (self.p - 1.0)).max(self.l);
        Ok((c, self.mu_over_sigma_sq * y * d.v_yy))
    }
}
