//! Numerical solution of the dual (Legendre-transformed) HJB equation.

mod boundary;
mod grid;
mod hamiltonian;
mod solver;

pub use boundary::{find_free_boundary, FreeBoundaryPoint};
pub use grid::{fmt_f64, ode_residual, ode_residual_profile, DualGrid};
pub(crate) use grid::parse_f64;
pub use hamiltonian::{g_floor, hamiltonian_g, HamiltonianEval};
pub use solver::{reference_price, solve_dual, SolverConfig};
