//! Discrete dual solution and its ODE residual.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use super::hamiltonian::g_floor;
use crate::params::ProblemSpec;

/// Dual function sampled on strictly increasing nodes `y`.
///
/// Besides `v`, `v_y`, `v_yy` the grid carries `primal_value = v - y v_y` and
/// `excess = -v_y - x_e`. The solver fills both without cancellation; grids
/// built from raw columns compute them directly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualGrid {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub v_y: Vec<f64>,
    pub v_yy: Vec<f64>,
    pub primal_value: Vec<f64>,
    pub excess: Vec<f64>,
    pub x_e: f64,
    /// Max absolute ODE residual over interior nodes.
    pub residual_inf: f64,
    /// Final scaled residual of the discrete system (zero for grids not produced by the solver).
    pub scheme_residual: f64,
    pub iterations: usize,
}

impl DualGrid {
    /// Grid from analytic columns; `residual_inf` is computed here.
    pub fn from_parts(
        spec: &ProblemSpec,
        y: Vec<f64>,
        v: Vec<f64>,
        v_y: Vec<f64>,
        v_yy: Vec<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if n < 3 || v.len() != n || v_y.len() != n || v_yy.len() != n {
            return Err(Error::Parse(
                "dual grid columns must have equal length >= 3".into(),
            ));
        }
        if y.windows(2).any(|w| !(w[1] > w[0])) || !(y[0] > 0.0) {
            return Err(Error::Parse(
                "dual nodes must be positive and strictly increasing".into(),
            ));
        }
        let x_e = finite_x_e(spec);
        let primal_value = (0..n).map(|i| v[i] - y[i] * v_y[i]).collect();
        let excess = v_y.iter().map(|&d| -d - x_e).collect();
        let mut grid = Self {
            y,
            v,
            v_y,
            v_yy,
            primal_value,
            excess,
            x_e,
            residual_inf: 0.0,
            scheme_residual: 0.0,
            iterations: 0,
        };
        grid.residual_inf = ode_residual(spec, &grid);
        Ok(grid)
    }

    /// Grid from values only; derivatives by finite differences in `t = ln y`
    /// (fourth order for `v_y`, second order for `v_yy`). Nodes must be
    /// uniformly spaced in `ln y`.
    pub fn from_values(spec: &ProblemSpec, y: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 5 || v.len() != n {
            return Err(Error::Parse("need at least 5 equal-length columns".into()));
        }
        let h = (y[n - 1].ln() - y[0].ln()) / (n - 1) as f64;
        let v_t = first_derivative(&v, h);
        let mut v_y = vec![0.0; n];
        let mut v_yy = vec![0.0; n];
        for i in 0..n {
            v_y[i] = v_t[i] / y[i];
            let v_tt = if i == 0 {
                (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
            } else if i == n - 1 {
                (2.0 * v[i] - 5.0 * v[i - 1] + 4.0 * v[i - 2] - v[i - 3]) / (h * h)
            } else {
                (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h)
            };
            v_yy[i] = (v_tt - v_t[i]) / (y[i] * y[i]);
        }
        Self::from_parts(spec, y, v, v_y, v_yy)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Primal wealth `x = -v_y` at each node.
    pub fn wealth(&self) -> Vec<f64> {
        self.v_y.iter().map(|d| -d).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y", "v", "v_y", "v_yy"])?;
        for i in 0..self.len() {
            w.write_record([
                fmt_f64(self.y[i]),
                fmt_f64(self.v[i]),
                fmt_f64(self.v_y[i]),
                fmt_f64(self.v_yy[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(spec: &ProblemSpec, input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["y", "v", "v_y", "v_yy"] {
            return Err(Error::Parse(format!("unexpected dual.csv header {headers:?}")));
        }
        let (mut y, mut v, mut v_y, mut v_yy) = (vec![], vec![], vec![], vec![]);
        for rec in rd.records() {
            let rec = rec?;
            y.push(parse_f64(&rec[0])?);
            v.push(parse_f64(&rec[1])?);
            v_y.push(parse_f64(&rec[2])?);
            v_yy.push(parse_f64(&rec[3])?);
        }
        Self::from_parts(spec, y, v, v_y, v_yy)
    }
}

pub(crate) fn finite_x_e(spec: &ProblemSpec) -> f64 {
    spec.derived.x_e.unwrap_or(0.0)
}

/// Full-precision scientific notation; 17 significant digits round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

/// Derivative of uniformly spaced samples: fourth-order centered inside,
/// second-order centered next to the ends, second-order one-sided at the ends.
pub(crate) fn first_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
            } else if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * f[i] - 4.0 * f[i - 1] + f[i - 2]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Pointwise residual `beta (v - y v_y) - a y^2 v_yy - G(l - k v_y, y) + r y v_y`.
pub fn ode_residual_profile(spec: &ProblemSpec, grid: &DualGrid) -> Vec<f64> {
    let a = spec.market.half_sharpe_sq();
    let (beta, r, p, k, l) = (spec.beta(), spec.r(), spec.p(), spec.k(), spec.l());
    (0..grid.len())
        .map(|i| {
            let y = grid.y[i];
            let u = l + k * (grid.x_e + grid.excess[i]);
            beta * grid.primal_value[i] - a * y * y * grid.v_yy[i] - g_floor(u, y, p)
                + r * y * grid.v_y[i]
        })
        .collect()
}

/// Max absolute ODE residual over interior nodes.
pub fn ode_residual(spec: &ProblemSpec, grid: &DualGrid) -> f64 {
    let prof = ode_residual_profile(spec, grid);
    let n = prof.len();
    prof[1..n - 1].iter().fold(0.0f64, |m, r| m.max(r.abs()))
}
