//! Primal value function and feedback policy obtained by inverting a dual grid.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::closed_form::{homogeneous_coefficient, homogeneous_dual_coefficient};
use crate::dual::{find_free_boundary, fmt_f64, parse_f64, DualGrid};
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::params::{ProblemCase, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "C")]
    Constrained,
    #[serde(rename = "U")]
    Unconstrained,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Constrained => "C",
            Region::Unconstrained => "U",
        }
    }

    fn toggled(self) -> Self {
        match self {
            Region::Constrained => Region::Unconstrained,
            Region::Unconstrained => Region::Constrained,
        }
    }
}

/// Maximal wealth interval `(lo, hi]` of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionInterval {
    pub region: Region,
    pub lo: f64,
    pub hi: f64,
}

/// Policy table on wealth nodes `x > x_e`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyTable {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub v_x: Vec<f64>,
    pub v_xx: Vec<f64>,
    pub c_star: Vec<f64>,
    pub pi_star: Vec<f64>,
    pub region: Vec<Region>,
    pub x_star_list: Vec<f64>,
    /// `x - x_e` per node; from the dual grid this avoids cancellation near `x_e`.
    pub x_minus_xe: Vec<f64>,
    #[serde(skip)]
    spec: ProblemSpec,
    #[serde(skip)]
    excess_exact: bool,
    #[serde(skip)]
    value_interp: Option<MonotoneCubic>,
    #[serde(skip)]
    log_vx_interp: Option<MonotoneCubic>,
}

fn region_of(unconstrained_c: f64, floor: f64) -> Region {
    if unconstrained_c <= floor {
        Region::Constrained
    } else {
        Region::Unconstrained
    }
}

/// Inverts a dual grid node by node; see [`PolicyTable`].
pub fn invert(spec: &ProblemSpec, grid: &DualGrid) -> Result<PolicyTable> {
    if let Some(i) = grid.v_yy.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ConvexityLoss {
            y: grid.y[i],
            v_yy: grid.v_yy[i],
        });
    }
    let x_star_list = find_free_boundary(spec, grid)
        .into_iter()
        .map(|fb| fb.x)
        .collect();
    let (p, k, l) = (spec.p(), spec.k(), spec.l());
    let drift = spec.mu() / (spec.sigma() * spec.sigma());
    let x_e = grid.x_e;

    let mut t = TableBuilder::default();
    let mut last_x = f64::NEG_INFINITY;
    for i in (0..grid.len()).rev() {
        let excess = grid.excess[i];
        let x = x_e + excess;
        if !(excess > 0.0) || !(x > last_x) {
            continue;
        }
        last_x = x;
        let y = grid.y[i];
        let c0 = y.powf(1.0 / (p - 1.0));
        let floor = l + k * x;
        t.push(
            x,
            excess,
            grid.primal_value[i],
            y,
            -1.0 / grid.v_yy[i],
            c0.max(floor),
            drift * y * grid.v_yy[i],
            region_of(c0, floor),
        );
    }
    let mut table = PolicyTable::from_columns(spec, t, x_star_list)?;
    table.excess_exact = true;
    Ok(table)
}

/// Closed-form dual grid for the cases `l = 0`, covering wealth `[x_lo, x_hi]`.
pub fn homogeneous_grid(spec: &ProblemSpec, x_lo: f64, x_hi: f64, n: usize) -> Result<DualGrid> {
    match spec.classify() {
        ProblemCase::MertonUnconstrained | ProblemCase::Homogeneous => {}
        ProblemCase::ValuePossiblyInfinite => spec.require_positive_kappa()?,
        _ => return Err(Error::NotHomogeneousCase { l: spec.l() }),
    }
    if !(x_lo > 0.0 && x_lo < x_hi && n >= 3) {
        return Err(Error::InvalidConfig(
            "need 0 < x_lo < x_hi and n >= 3".into(),
        ));
    }
    let p = spec.p();
    let q = p / (p - 1.0);
    let a = homogeneous_coefficient(spec);
    let s = homogeneous_dual_coefficient(spec);
    // y = V_x(x) = A x^(p-1), decreasing in x
    let (y_lo, y_hi) = (a * x_hi.powf(p - 1.0), a * x_lo.powf(p - 1.0));
    let y: Vec<f64> = (0..n)
        .map(|i| (y_lo.ln() + (y_hi.ln() - y_lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect();
    let v = y.iter().map(|y| s * y.powf(q)).collect();
    let v_y = y.iter().map(|y| s * q * y.powf(q - 1.0)).collect();
    let v_yy = y.iter().map(|y| s * q * (q - 1.0) * y.powf(q - 2.0)).collect();
    DualGrid::from_parts(spec, y, v, v_y, v_yy)
}

/// Table for the closed-form cases `l = 0` over `[x_lo, x_hi]`.
pub fn homogeneous_table(spec: &ProblemSpec, x_lo: f64, x_hi: f64, n: usize) -> Result<PolicyTable> {
    invert(spec, &homogeneous_grid(spec, x_lo, x_hi, n)?)
}

#[derive(Default)]
struct TableBuilder {
    x: Vec<f64>,
    x_minus_xe: Vec<f64>,
    value: Vec<f64>,
    v_x: Vec<f64>,
    v_xx: Vec<f64>,
    c_star: Vec<f64>,
    pi_star: Vec<f64>,
    region: Vec<Region>,
}

impl TableBuilder {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, x: f64, xm: f64, v: f64, vx: f64, vxx: f64, c: f64, pi: f64, r: Region) {
        self.x.push(x);
        self.x_minus_xe.push(xm);
        self.value.push(v);
        self.v_x.push(vx);
        self.v_xx.push(vxx);
        self.c_star.push(c);
        self.pi_star.push(pi);
        self.region.push(r);
    }
}

impl PolicyTable {
    fn from_columns(spec: &ProblemSpec, t: TableBuilder, x_star_list: Vec<f64>) -> Result<Self> {
        if t.x.len() < 2 {
            return Err(Error::Domain(
                "fewer than two usable wealth nodes after inversion".into(),
            ));
        }
        let mut table = Self {
            x: t.x,
            value: t.value,
            v_x: t.v_x,
            v_xx: t.v_xx,
            c_star: t.c_star,
            pi_star: t.pi_star,
            region: t.region,
            x_star_list,
            x_minus_xe: t.x_minus_xe,
            spec: *spec,
            excess_exact: false,
            value_interp: None,
            log_vx_interp: None,
        };
        table.build_interpolants();
        Ok(table)
    }

    /// Recomputes the interpolants after the columns were edited in place.
    ///
    /// Interpolation runs in `s = ln(x - x_e)`, which spreads the nodes that
    /// crowd against `x_e`; nodes whose `s` does not increase are skipped.
    pub fn build_interpolants(&mut self) {
        let mut keep: Vec<usize> = Vec::with_capacity(self.len());
        let mut last = f64::NEG_INFINITY;
        for i in 0..self.len() {
            let s = self.x_minus_xe[i].ln();
            if s.is_finite() && s > last {
                keep.push(i);
                last = s;
            }
        }
        if keep.len() < 2 {
            self.value_interp = None;
            self.log_vx_interp = None;
            return;
        }
        let s: Vec<f64> = keep.iter().map(|&i| self.x_minus_xe[i].ln()).collect();
        let f: Vec<f64> = keep.iter().map(|&i| self.value[i]).collect();
        let v_slope: Vec<f64> = keep.iter().map(|&i| self.x_minus_xe[i] * self.v_x[i]).collect();
        self.value_interp = Some(MonotoneCubic::new(&s, &f, &v_slope));
        if self.v_x.iter().all(|&d| d > 0.0) {
            let lvx: Vec<f64> = keep.iter().map(|&i| self.v_x[i].ln()).collect();
            let slope: Vec<f64> = keep
                .iter()
                .map(|&i| self.x_minus_xe[i] * self.v_xx[i] / self.v_x[i])
                .collect();
            self.log_vx_interp = Some(MonotoneCubic::new(&s, &lvx, &slope));
        } else {
            self.log_vx_interp = None;
        }
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    /// Absolute rounding error carried by `x_minus_xe[i]`.
    ///
    /// Tables inverted from a dual grid hold `x - x_e` to relative precision;
    /// tables read back from CSV only know it through `x`.
    pub fn excess_roundoff(&self, i: usize) -> f64 {
        let base = if self.excess_exact {
            self.x_minus_xe[i]
        } else {
            self.x[i]
        };
        4.0 * f64::EPSILON * base.abs()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    fn out_of_range(&self, x: f64) -> Error {
        Error::OutOfRange {
            x,
            lo: self.x_min(),
            hi: self.x_max(),
        }
    }

    /// Index of a node equal to `x`, or the interpolation coordinate of `x`.
    fn locate(&self, x: f64) -> Result<std::result::Result<usize, f64>> {
        if !(x >= self.x_min() && x <= self.x_max()) {
            return Err(self.out_of_range(x));
        }
        if let Ok(i) = self.x.binary_search_by(|xi| xi.total_cmp(&x)) {
            return Ok(Ok(i));
        }
        let x_e = self.spec.derived.x_e.unwrap_or(0.0);
        let d = (x - x_e).clamp(self.x_minus_xe[0], self.x_minus_xe[self.len() - 1]);
        Ok(Err(d))
    }

    pub fn value_at(&self, x: f64) -> Result<f64> {
        let d = match self.locate(x)? {
            Ok(i) => return Ok(self.value[i]),
            Err(d) => d,
        };
        self.value_interp
            .as_ref()
            .ok_or_else(|| Error::Domain("table has fewer than two distinct nodes".into()))?
            .eval(d.ln())
            .ok_or_else(|| self.out_of_range(x))
    }

    /// Interpolated `(V_x, V_xx)`.
    pub fn derivatives_at(&self, x: f64) -> Result<(f64, f64)> {
        let d = match self.locate(x)? {
            Ok(i) => return Ok((self.v_x[i], self.v_xx[i])),
            Err(d) => d,
        };
        let interp = self
            .log_vx_interp
            .as_ref()
            .ok_or_else(|| Error::Domain("table marginal values are not positive".into()))?;
        let (lvx, slope) = interp.eval_with_slope(d.ln()).ok_or_else(|| self.out_of_range(x))?;
        let vx = lvx.exp();
        Ok((vx, slope * vx / d))
    }

    /// Region at wealth `x`: the first node's region, toggled at every free boundary below `x`.
    pub fn region_at(&self, x: f64) -> Region {
        let flips = self.x_star_list.iter().filter(|&&xs| xs < x).count();
        let mut r = self.region[0];
        for _ in 0..flips {
            r = r.toggled();
        }
        r
    }

    /// Feedback `(c*, pi*)` at wealth `x`, rebuilt from interpolated derivatives.
    pub fn policy_at(&self, x: f64) -> Result<(f64, f64)> {
        let (vx, vxx) = self.derivatives_at(x)?;
        let (p, k, l) = (self.spec.p(), self.spec.k(), self.spec.l());
        let floor = k * x + l;
        let c = match self.region_at(x) {
            Region::Constrained => floor,
            Region::Unconstrained => vx.powf(1.0 / (p - 1.0)).max(floor),
        };
        let drift = self.spec.mu() / (self.spec.sigma() * self.spec.sigma());
        Ok((c, -drift * vx / vxx))
    }

    /// Region intervals from `x_e` to the last node, split at the free boundaries.
    pub fn regions(&self) -> Vec<RegionInterval> {
        let mut out = Vec::new();
        let mut lo = self.spec.derived.x_e.unwrap_or(0.0);
        let mut r = self.region[0];
        for &xs in &self.x_star_list {
            if xs <= lo || xs >= self.x_max() {
                continue;
            }
            out.push(RegionInterval { region: r, lo, hi: xs });
            lo = xs;
            r = r.toggled();
        }
        out.push(RegionInterval {
            region: r,
            lo,
            hi: self.x_max(),
        });
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "V", "V_x", "V_xx", "c_star", "pi_star", "region"])?;
        for i in 0..self.len() {
            w.write_record([
                fmt_f64(self.x[i]),
                fmt_f64(self.value[i]),
                fmt_f64(self.v_x[i]),
                fmt_f64(self.v_xx[i]),
                fmt_f64(self.c_star[i]),
                fmt_f64(self.pi_star[i]),
                self.region[i].as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`PolicyTable::write_csv`]; `x - x_e` is recomputed.
    pub fn read_csv<R: Read>(spec: &ProblemSpec, input: R, x_star_list: Vec<f64>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers()?.clone();
        let expected = ["x", "V", "V_x", "V_xx", "c_star", "pi_star", "region"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!("unexpected policy.csv header {headers:?}")));
        }
        let x_e = spec.derived.x_e.unwrap_or(0.0);
        let mut t = TableBuilder::default();
        for rec in rd.records() {
            let rec = rec?;
            let x = parse_f64(&rec[0])?;
            let region = match &rec[6] {
                "C" => Region::Constrained,
                "U" => Region::Unconstrained,
                other => return Err(Error::Parse(format!("bad region flag {other:?}"))),
            };
            t.push(
                x,
                x - x_e,
                parse_f64(&rec[1])?,
                parse_f64(&rec[2])?,
                parse_f64(&rec[3])?,
                parse_f64(&rec[4])?,
                parse_f64(&rec[5])?,
                region,
            );
        }
        Self::from_columns(spec, t, x_star_list)
    }
}
