//! Characteristic solvers for the first-order system in `(u, u_x, u_t)`:
//! the mixed initial-boundary problem marched in `t` (either direction) and
//! the sideways Cauchy problem marched in `x`.

mod field;
mod mixed;
mod sideways;

pub use field::{extract_time_slice, Field, Grid, TimeSlice};
pub use mixed::{simulate, solve_mixed, Direction, MixedSetup};
pub use sideways::{sideways_step_count, solve_cauchy_sideways};

use crate::exec::Exec;
use crate::problem::DEFAULT_EPSILON;

/// Setup-time Courant bound for the mixed solver.
pub const DEFAULT_CFL_SAFETY: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub exec: Exec,
    /// `dt * max c / dx` must not exceed this at setup.
    pub cfl_safety: f64,
    /// Smallness bound; a computed C¹ norm above it is logged as a warning.
    pub epsilon: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            exec: Exec::default(),
            cfl_safety: DEFAULT_CFL_SAFETY,
            epsilon: DEFAULT_EPSILON,
        }
    }
}
