//! Shared fixtures for the benchmarks.

use cfloor_core::dual::{solve_dual, SolverConfig};
use cfloor_core::montecarlo::SimConfig;
use cfloor_core::policy::{invert, PolicyTable};
use cfloor_core::ProblemSpec;

/// The standard market with `beta = 0.1`, `p = 0.5` and the given floor.
pub fn baseline(k: f64, l: f64) -> ProblemSpec {
    ProblemSpec::from_values(0.03, 0.05, 0.2, 0.1, 0.5, k, l).expect("valid baseline")
}

pub fn solved_table(spec: &ProblemSpec) -> PolicyTable {
    let grid = solve_dual(spec, &SolverConfig::default_for(spec)).expect("baseline converges");
    invert(spec, &grid).expect("baseline inverts")
}

pub fn sim_config(x0: f64, n_paths: usize) -> SimConfig {
    SimConfig {
        x0,
        dt: 0.02,
        horizon: 50.0,
        n_paths,
        seed: 7,
        clamp_at_floor: true,
    }
}
