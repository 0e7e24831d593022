//! The consumption Hamiltonian `G(u, y) = sup_{c >= u} (c^p/p - c y)`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonianEval {
    pub g: f64,
    pub g_u: f64,
    pub g_y: f64,
}

/// `G` and its partial derivatives. The floor binds when `u > y^(1/(p-1))`.
pub fn hamiltonian_g(u: f64, y: f64, p: f64) -> Result<HamiltonianEval> {
    if !(u > 0.0) || !(y > 0.0) {
        return Err(Error::Domain(format!(
            "G(u, y) needs u > 0 and y > 0, got u = {u}, y = {y}"
        )));
    }
    let c0 = y.powf(1.0 / (p - 1.0));
    Ok(if u > c0 {
        HamiltonianEval {
            g: u.powf(p) / p - u * y,
            g_u: u.powf(p - 1.0) - y,
            g_y: -u,
        }
    } else {
        HamiltonianEval {
            g: (1.0 - p) / p * c0.powf(p),
            g_u: 0.0,
            g_y: -c0,
        }
    })
}

/// `G(u, y)` extended to `u <= 0`, where the floor never binds.
pub fn g_floor(u: f64, y: f64, p: f64) -> f64 {
    let c0 = y.powf(1.0 / (p - 1.0));
    if u > c0 {
        u.powf(p) / p - u * y
    } else {
        (1.0 - p) / p * c0.powf(p)
    }
}

/// `G(c_e + du, y) - (c_e^p/p - c_e y)` and `G_u(c_e + du, y)`.
///
/// The difference is formed analytically so it stays accurate when `du` is
/// tiny relative to `c_e`. Non-positive `u` falls on the unconstrained branch.
pub(crate) fn g_shift(c_e: f64, du: f64, y: f64, p: f64) -> (f64, f64) {
    let u = c_e + du;
    let c0 = y.powf(1.0 / (p - 1.0));
    if u > c0 {
        let diff = c_e.powf(p) * (p * (du / c_e).ln_1p()).exp_m1() / p - du * y;
        (diff, u.powf(p - 1.0) - y)
    } else {
        let diff = (1.0 - p) / p * c0.powf(p) - c_e.powf(p) / p + c_e * y;
        (diff, 0.0)
    }
}
