//! Euler-Maruyama simulation of the controlled wealth process under a
//! feedback policy, scoring the realized discounted utility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::homogeneous_value_unchecked;
use crate::error::{Error, Result};
use crate::params::{Feasibility, ProblemSpec};
use crate::policy::PolicyTable;

/// Feedback map `x -> (c, pi)`.
pub trait Feedback: Sync {
    fn control(&self, x: f64) -> Result<(f64, f64)>;
}

impl<F> Feedback for F
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    fn control(&self, x: f64) -> Result<(f64, f64)> {
        self(x)
    }
}

/// `(m x, f x)`: Merton's policy for `m = kappa`, the homogeneous optimum for `m = max(kappa, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPolicy {
    pub consumption_rate: f64,
    pub fraction: f64,
}

impl LinearPolicy {
    pub fn merton(spec: &ProblemSpec) -> Result<Self> {
        spec.require_positive_kappa()?;
        Ok(Self {
            consumption_rate: spec.kappa(),
            fraction: spec.derived.merton_fraction,
        })
    }

    pub fn homogeneous(spec: &ProblemSpec) -> Result<Self> {
        spec.require_positive_kappa()?;
        Ok(Self {
            consumption_rate: spec.homogeneous_rate(),
            fraction: spec.derived.merton_fraction,
        })
    }
}

impl Feedback for LinearPolicy {
    #[inline]
    fn control(&self, x: f64) -> Result<(f64, f64)> {
        Ok((self.consumption_rate * x, self.fraction * x))
    }
}

/// Consume exactly the floor and hold the Merton fraction of the excess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorPolicy {
    k: f64,
    l: f64,
    x_e: f64,
    fraction: f64,
}

impl FloorPolicy {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self {
            k: spec.k(),
            l: spec.l(),
            x_e: spec.derived.x_e.unwrap_or(0.0),
            fraction: spec.derived.merton_fraction,
        }
    }
}

impl Feedback for FloorPolicy {
    #[inline]
    fn control(&self, x: f64) -> Result<(f64, f64)> {
        Ok((self.k * x + self.l, self.fraction * (x - self.x_e)))
    }
}

/// Merton's policy with consumption raised to the floor where it falls short.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedMertonPolicy {
    k: f64,
    l: f64,
    kappa: f64,
    fraction: f64,
}

impl ClippedMertonPolicy {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self {
            k: spec.k(),
            l: spec.l(),
            kappa: spec.kappa(),
            fraction: spec.derived.merton_fraction,
        }
    }
}

impl Feedback for ClippedMertonPolicy {
    #[inline]
    fn control(&self, x: f64) -> Result<(f64, f64)> {
        Ok(((self.kappa * x).max(self.k * x + self.l), self.fraction * x))
    }
}

/// Optimal feedback read from a policy table.
///
/// Between `x_e` and the first node consumption is the floor and the risky
/// position shrinks linearly to zero at `x_e`. Past the last node both
/// controls are extended proportionally to `x - x_e`, the shape of the
/// large-wealth asymptote.
#[derive(Debug, Clone, Copy)]
pub struct TablePolicy<'a> {
    table: &'a PolicyTable,
    x_e: f64,
}

impl<'a> TablePolicy<'a> {
    pub fn new(table: &'a PolicyTable) -> Self {
        Self {
            table,
            x_e: table.spec().derived.x_e.unwrap_or(0.0),
        }
    }
}

impl Feedback for TablePolicy<'_> {
    fn control(&self, x: f64) -> Result<(f64, f64)> {
        let t = self.table;
        let (k, l) = (t.spec().k(), t.spec().l());
        let floor = k * x + l;
        if x <= self.x_e {
            Ok((floor, 0.0))
        } else if x < t.x_min() {
            let scale = (x - self.x_e) / t.x_minus_xe[0];
            Ok((floor, t.pi_star[0] * scale))
        } else if x > t.x_max() {
            let last = t.len() - 1;
            let scale = (x - self.x_e) / t.x_minus_xe[last];
            Ok(((t.c_star[last] * scale).max(floor), t.pi_star[last] * scale))
        } else {
            t.policy_at(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub x0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Clamp a path that steps below `x_e` and continue it at the floor;
    /// otherwise such a step is an error.
    pub clamp_at_floor: bool,
}

impl SimConfig {
    pub fn validate(&self, spec: &ProblemSpec) -> Result<Feasibility> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon >= 100.0 * self.dt && self.horizon.is_finite()) {
            return bad("horizon must be at least 100 dt");
        }
        if self.n_paths < 2 {
            return bad("n_paths must be >= 2");
        }
        spec.check_initial_wealth(self.x0)
    }

    /// Number of steps; the simulated horizon is `n_steps * dt`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub estimate: f64,
    pub std_error: f64,
    pub tail_bound: f64,
    pub floor_violations: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    /// `n_steps * dt`.
    pub horizon: f64,
    pub max_wealth: f64,
}

struct PathResult {
    utility: f64,
    max_wealth: f64,
    violations: u64,
}

/// Simulates `cfg.n_paths` paths of `dX = (rX - c + mu pi) dt + pi sigma dW`.
///
/// Step `i` is scored as `U(c_i)` times the exact discount mass of
/// `[t_i, t_i + dt)`. A path at `x_e` consumes `c_e` with no risky position
/// for the rest of the horizon, which is scored in closed form. Path `j`
/// draws from stream `j` of a ChaCha8 generator keyed by the seed, so the
/// report does not depend on thread scheduling.
pub fn simulate<P: Feedback + ?Sized>(spec: &ProblemSpec, policy: &P, cfg: &SimConfig) -> Result<SimReport> {
    let feasibility = cfg.validate(spec)?;
    let n_steps = cfg.n_steps();
    let beta = spec.beta();
    let disc: Vec<f64> = (0..=n_steps).map(|i| (-beta * i as f64 * cfg.dt).exp()).collect();
    let mass = -(-beta * cfg.dt).exp_m1() / beta;

    let results: Vec<PathResult> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|j| simulate_path(spec, policy, cfg, &disc, mass, feasibility, j))
        .collect::<Result<_>>()?;

    let utilities: Vec<f64> = results.iter().map(|r| r.utility).collect();
    let (estimate, std_error) = mean_and_std_error(&utilities);
    let horizon = n_steps as f64 * cfg.dt;
    let tail: Vec<f64> = results
        .iter()
        .map(|r| homogeneous_value_unchecked(spec, r.max_wealth))
        .collect::<Result<_>>()?;
    let tail_bound = disc[n_steps] * pairwise_sum(&tail) / tail.len() as f64;
    Ok(SimReport {
        estimate,
        std_error,
        tail_bound,
        floor_violations: results.iter().map(|r| r.violations).sum(),
        n_paths: cfg.n_paths,
        n_steps,
        horizon,
        max_wealth: results.iter().map(|r| r.max_wealth).fold(cfg.x0, f64::max),
    })
}

fn simulate_path<P: Feedback + ?Sized>(
    spec: &ProblemSpec,
    policy: &P,
    cfg: &SimConfig,
    disc: &[f64],
    mass: f64,
    feasibility: Feasibility,
    path: usize,
) -> Result<PathResult> {
    let (r, mu, sigma, beta, k, l) = (spec.r(), spec.mu(), spec.sigma(), spec.beta(), spec.k(), spec.l());
    let x_e = spec.derived.x_e.unwrap_or(0.0);
    let n_steps = disc.len() - 1;
    let sqrt_dt = cfg.dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path as u64);

    let mut x = cfg.x0;
    let mut utility = 0.0;
    let mut max_wealth = x;
    let mut violations = 0;
    let mut floored_from = match feasibility {
        Feasibility::Interior => None,
        Feasibility::Marginal | Feasibility::ZeroWealth => Some(0),
    };
    if floored_from.is_none() {
        for (i, &d) in disc[..n_steps].iter().enumerate() {
            let (c, pi) = policy.control(x)?;
            let floor = k * x + l;
            if !(c >= floor) {
                return Err(Error::PolicyInadmissible { x, c, floor });
            }
            utility += d * mass * spec.preference.utility(c);
            let z: f64 = StandardNormal.sample(&mut rng);
            let next = x + (r * x - c + mu * pi) * cfg.dt + pi * sigma * sqrt_dt * z;
            if !next.is_finite() {
                return Err(Error::NumericalBlowup { path, step: i });
            }
            if next < x_e {
                if !cfg.clamp_at_floor {
                    return Err(Error::FloorBreached { path, step: i });
                }
                violations += 1;
                floored_from = Some(i + 1);
                break;
            }
            x = next;
            max_wealth = max_wealth.max(x);
        }
    }
    if let Some(i) = floored_from {
        let c_e = spec.derived.c_e.unwrap_or(0.0);
        utility += spec.preference.utility(c_e) * (disc[i] - disc[n_steps]) / beta;
        max_wealth = max_wealth.max(x_e);
    }
    Ok(PathResult {
        utility,
        max_wealth,
        violations,
    })
}

/// Sum in a fixed binary tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and its standard error, both summed pairwise around the
/// first sample; identical samples give their common value and zero error.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let shift = xs[0];
    let dev: Vec<f64> = xs.iter().map(|x| x - shift).collect();
    let mean_dev = pairwise_sum(&dev) / n;
    let sq: Vec<f64> = dev.iter().map(|d| (d - mean_dev) * (d - mean_dev)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (shift + mean_dev, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub gap: f64,
    pub tolerance: f64,
}

/// `|estimate - value| <= 3 se + tail_bound + allowance`.
pub fn compare_to_value(report: &SimReport, value: f64, allowance: f64) -> Verdict {
    let gap = report.estimate - value;
    let tolerance = 3.0 * report.std_error + report.tail_bound + allowance;
    Verdict {
        pass: gap.abs() <= tolerance,
        gap,
        tolerance,
    }
}

/// Discretization allowance `|E(dt) - E(dt/2)|` from a second run at half the step.
pub fn dt_halving_allowance<P: Feedback + ?Sized>(
    spec: &ProblemSpec,
    policy: &P,
    cfg: &SimConfig,
    report: &SimReport,
) -> Result<f64> {
    let half = SimConfig {
        dt: cfg.dt / 2.0,
        ..*cfg
    };
    Ok((simulate(spec, policy, &half)?.estimate - report.estimate).abs())
}
