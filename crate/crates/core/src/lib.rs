//! Boundary observability for one-dimensional quasilinear wave equations
//! `u_tt - c(t, x, u, u_x, u_t)^2 u_xx = f(t, x, u, u_x, u_t)` on `[0, L]`.
//!
//! The crate simulates the forward problem with a characteristic (CIR)
//! scheme, extracts boundary observations, and recovers the initial data from
//! them by sideways solves, determinate-domain geometry and a backward solve.
//! [`obstime`] evaluates the observation-time conditions.
//!
//! ```
//! use waveobs_core::hypersolve::{simulate, Grid, SolveOptions};
//! use waveobs_core::observe::extract_observation;
//! use waveobs_core::problem::{catalog, Side};
//! use waveobs_core::reconstruct::{reconstruct_two_sided, reconstruction_error, ReconstructOptions};
//!
//! let p = catalog("linear-unit")?;
//! let grid = Grid::new(0.0, 1.2, 120, 1.0, 60)?;
//! let field = simulate(&p, &grid, &SolveOptions::default())?;
//! let left = extract_observation(&field, &p, Side::Left)?;
//! let right = extract_observation(&field, &p, Side::Right)?;
//! let opts = ReconstructOptions { nx: Some(60), ..Default::default() };
//! let result = reconstruct_two_sided(&p, &left, &right, 1.2, &opts)?;
//! let (phi_err, psi_err) = reconstruction_error(&p, &result)?;
//! assert!(phi_err + psi_err < 0.1);
//! # Ok::<(), waveobs_core::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charsys;
pub mod domains;
mod error;
pub mod exec;
pub mod expr;
pub mod hypersolve;
pub mod observe;
pub mod obstime;
pub mod problem;
pub mod reconstruct;

pub use error::{Error, Result};
pub use exec::Exec;
