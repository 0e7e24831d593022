//! Problem parameters, derived constants and case classification.
//!
//! Every parameter struct validates at construction; downstream code treats a
//! [`ProblemSpec`] as valid by type. Case boundaries (`k = r`, `l = 0`, ...)
//! are decided by exact comparison of the inputs.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn require(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

/// Black-Scholes market: riskless rate, excess drift and volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    r: f64,
    mu: f64,
    sigma: f64,
}

impl MarketParams {
    pub fn new(r: f64, mu: f64, sigma: f64) -> Result<Self> {
        require("r", r, r >= 0.0, "must be >= 0")?;
        require("mu", mu, mu > 0.0, "must be > 0")?;
        require("sigma", sigma, sigma > 0.0, "must be > 0")?;
        Ok(Self { r, mu, sigma })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `mu^2 / (2 sigma^2)`, the coefficient of the diffusion term in the dual ODE.
    pub fn half_sharpe_sq(&self) -> f64 {
        self.mu * self.mu / (2.0 * self.sigma * self.sigma)
    }
}

/// CRRA preferences `U(c) = c^p / p` with discount rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreferenceParams {
    beta: f64,
    p: f64,
}

impl PreferenceParams {
    pub fn new(beta: f64, p: f64) -> Result<Self> {
        require("beta", beta, beta > 0.0, "must be > 0")?;
        require("p", p, p > 0.0 && p < 1.0, "must lie in (0, 1)")?;
        Ok(Self { beta, p })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `c^p / p`, with a square-root fast path for `p = 1/2`.
    #[inline]
    pub fn utility(&self, c: f64) -> f64 {
        if self.p == 0.5 {
            2.0 * c.sqrt()
        } else {
            c.powf(self.p) / self.p
        }
    }
}

/// Consumption floor `c >= k X + l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintParams {
    k: f64,
    l: f64,
}

impl ConstraintParams {
    pub fn new(k: f64, l: f64) -> Result<Self> {
        require("k", k, k >= 0.0, "must be >= 0")?;
        require("l", l, l >= 0.0, "must be >= 0")?;
        Ok(Self { k, l })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn floor(&self, x: f64) -> f64 {
        self.k * x + self.l
    }
}

/// Constants derived from the raw parameters.
///
/// `x_e`, `c_e` and `v_xe` are `None` when no finite wealth can sustain the
/// floor (`k >= r`, `l > 0`). With `l = 0` all three are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    pub kappa: f64,
    pub merton_fraction: f64,
    pub x_e: Option<f64>,
    pub c_e: Option<f64>,
    pub v_xe: Option<f64>,
}

/// Computes kappa, the Merton fraction and the feasibility floor constants.
pub fn derive(
    market: &MarketParams,
    pref: &PreferenceParams,
    cons: &ConstraintParams,
) -> DerivedQuantities {
    let (r, mu, sigma) = (market.r, market.mu, market.sigma);
    let (beta, p) = (pref.beta, pref.p);
    let (k, l) = (cons.k, cons.l);

    let kappa = (beta - p * (mu * mu / (2.0 * sigma * sigma * (1.0 - p)) + r)) / (1.0 - p);
    let merton_fraction = mu / (sigma * sigma * (1.0 - p));

    let (x_e, c_e, v_xe) = if l == 0.0 {
        (Some(0.0), Some(0.0), Some(0.0))
    } else if k < r {
        let x_e = l / (r - k);
        let c_e = k * x_e + l;
        (Some(x_e), Some(c_e), Some(c_e.powf(p) / (beta * p)))
    } else {
        (None, None, None)
    };

    DerivedQuantities {
        kappa,
        merton_fraction,
        x_e,
        c_e,
        v_xe,
    }
}

/// Exhaustive case taxonomy of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemCase {
    /// `k = l = 0`, `kappa > 0`.
    MertonUnconstrained,
    /// `l = 0`, `k > 0`, `kappa > 0`.
    Homogeneous,
    /// `k = 0`, `l > 0`, `kappa > 0`.
    StateIndependent,
    /// `0 < k < r`, `l > 0`, `kappa > 0`.
    NonHomogeneous,
    /// `k >= r`, `l > 0`: no admissible strategy from any finite wealth.
    InfeasibleAll,
    /// `kappa <= 0` (and not infeasible): value may be infinite.
    ValuePossiblyInfinite,
}

impl ProblemCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemCase::MertonUnconstrained => "MertonUnconstrained",
            ProblemCase::Homogeneous => "Homogeneous",
            ProblemCase::StateIndependent => "StateIndependent",
            ProblemCase::NonHomogeneous => "NonHomogeneous",
            ProblemCase::InfeasibleAll => "InfeasibleAll",
            ProblemCase::ValuePossiblyInfinite => "ValuePossiblyInfinite",
        }
    }

    pub fn is_solvable(&self) -> bool {
        !matches!(
            self,
            ProblemCase::InfeasibleAll | ProblemCase::ValuePossiblyInfinite
        )
    }
}

impl fmt::Display for ProblemCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const MARGINAL_ULPS: f64 = 4.0;

/// Verdict of [`ProblemSpec::check_initial_wealth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Feasibility {
    /// Strictly above the floor; the full control problem applies.
    Interior,
    /// `x0 = x_e > 0`: the only admissible strategy is `(c, pi) = (c_e, 0)`.
    Marginal,
    /// `l = 0`, `x0 = 0`: wealth stays at zero and the value is zero.
    ZeroWealth,
}

/// A validated problem: market, preferences, constraint and derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub market: MarketParams,
    pub preference: PreferenceParams,
    pub constraint: ConstraintParams,
    pub derived: DerivedQuantities,
}

impl ProblemSpec {
    pub fn new(
        market: MarketParams,
        preference: PreferenceParams,
        constraint: ConstraintParams,
    ) -> Self {
        let derived = derive(&market, &preference, &constraint);
        Self {
            market,
            preference,
            constraint,
            derived,
        }
    }

    /// Convenience constructor taking the seven raw parameters.
    pub fn from_values(
        r: f64,
        mu: f64,
        sigma: f64,
        beta: f64,
        p: f64,
        k: f64,
        l: f64,
    ) -> Result<Self> {
        Ok(Self::new(
            MarketParams::new(r, mu, sigma)?,
            PreferenceParams::new(beta, p)?,
            ConstraintParams::new(k, l)?,
        ))
    }

    pub fn r(&self) -> f64 {
        self.market.r
    }
    pub fn mu(&self) -> f64 {
        self.market.mu
    }
    pub fn sigma(&self) -> f64 {
        self.market.sigma
    }
    pub fn beta(&self) -> f64 {
        self.preference.beta
    }
    pub fn p(&self) -> f64 {
        self.preference.p
    }
    pub fn k(&self) -> f64 {
        self.constraint.k
    }
    pub fn l(&self) -> f64 {
        self.constraint.l
    }
    pub fn kappa(&self) -> f64 {
        self.derived.kappa
    }

    /// Feasibility floor `x_e`; `+inf` when the floor cannot be sustained.
    pub fn x_e(&self) -> f64 {
        self.derived.x_e.unwrap_or(f64::INFINITY)
    }

    /// Floor consumption at `x_e`; `+inf` when undefined.
    pub fn c_e(&self) -> f64 {
        self.derived.c_e.unwrap_or(f64::INFINITY)
    }

    /// `V(x_e) = c_e^p / (beta p)`; `+inf` when undefined.
    pub fn v_xe(&self) -> f64 {
        self.derived.v_xe.unwrap_or(f64::INFINITY)
    }

    /// `max{kappa, k}`, the consumption rate of the homogeneous solution.
    pub fn homogeneous_rate(&self) -> f64 {
        self.kappa().max(self.k())
    }

    pub fn classify(&self) -> ProblemCase {
        let (k, l, r) = (self.k(), self.l(), self.r());
        if l > 0.0 && k >= r {
            ProblemCase::InfeasibleAll
        } else if self.kappa() <= 0.0 {
            ProblemCase::ValuePossiblyInfinite
        } else if l == 0.0 && k == 0.0 {
            ProblemCase::MertonUnconstrained
        } else if l == 0.0 {
            ProblemCase::Homogeneous
        } else if k == 0.0 {
            ProblemCase::StateIndependent
        } else {
            ProblemCase::NonHomogeneous
        }
    }

    pub fn require_positive_kappa(&self) -> Result<()> {
        if self.kappa() > 0.0 {
            Ok(())
        } else {
            Err(Error::KappaNonPositive {
                kappa: self.kappa(),
            })
        }
    }

    pub fn check_initial_wealth(&self, x0: f64) -> Result<Feasibility> {
        if !x0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "x0",
                value: x0,
                reason: "must be finite",
            });
        }
        let x_e = self.x_e();
        if !x_e.is_finite() {
            return Err(Error::InfeasibleWealth { x0, x_e });
        }
        if self.l() == 0.0 {
            return if x0 < 0.0 {
                Err(Error::InfeasibleWealth { x0, x_e: 0.0 })
            } else if x0 == 0.0 {
                Ok(Feasibility::ZeroWealth)
            } else {
                Ok(Feasibility::Interior)
            };
        }
        // x_e = l/(r-k) carries rounding from the division; within a few
        // ulps of it the input is taken to mean x_e itself.
        let slack = MARGINAL_ULPS * f64::EPSILON * x_e;
        if (x0 - x_e).abs() <= slack {
            Ok(Feasibility::Marginal)
        } else if x0 < x_e {
            Err(Error::InfeasibleWealth { x0, x_e })
        } else {
            Ok(Feasibility::Interior)
        }
    }
}

/// On-disk problem description (JSON). Unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
    pub p: f64,
    pub k: f64,
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

impl ProblemConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::from_values(
            self.r, self.mu, self.sigma, self.beta, self.p, self.k, self.l,
        )
    }
}
