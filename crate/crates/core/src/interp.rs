//! Piecewise cubic Hermite interpolation with Fritsch-Carlson slope limiting.

/// Cubic Hermite interpolant through `(xs, fs)` with prescribed slopes.
///
/// Slopes are limited so that the interpolant is monotone on every interval
/// where the data are; exact slopes of monotone data pass through unchanged
/// except where they would cause overshoot.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    fs: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` must be strictly increasing and all three slices of equal length >= 2.
    pub fn new(xs: &[f64], fs: &[f64], slopes: &[f64]) -> Self {
        assert!(xs.len() >= 2 && xs.len() == fs.len() && fs.len() == slopes.len());
        let mut ds = slopes.to_vec();
        for i in 0..xs.len() - 1 {
            let delta = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i]);
            if delta == 0.0 {
                ds[i] = 0.0;
                ds[i + 1] = 0.0;
                continue;
            }
            if ds[i] * delta < 0.0 {
                ds[i] = 0.0;
            }
            if ds[i + 1] * delta < 0.0 {
                ds[i + 1] = 0.0;
            }
            let (a, b) = (ds[i] / delta, ds[i + 1] / delta);
            let norm = a * a + b * b;
            if norm > 9.0 {
                let tau = 3.0 / norm.sqrt();
                ds[i] = tau * a * delta;
                ds[i + 1] = tau * b * delta;
            }
        }
        Self {
            xs: xs.to_vec(),
            fs: fs.to_vec(),
            ds,
        }
    }

    pub fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub fn hi(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Index `i` with `xs[i] <= x <= xs[i + 1]`, or `None` outside the range.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let i = self.xs.partition_point(|&xi| xi <= x);
        Some(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    /// Value and derivative at `x`, or `None` outside `[lo, hi]`.
    pub fn eval_with_slope(&self, x: f64) -> Option<(f64, f64)> {
        let i = self.locate(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (f0, f1) = (self.fs[i], self.fs[i + 1]);
        let (d0, d1) = (self.ds[i] * h, self.ds[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let slope = (dh00 * f0 + dh10 * d0 + dh01 * f1 + dh11 * d1) / h;
        Some((value, slope))
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        self.eval_with_slope(x).map(|(v, _)| v)
    }
}
