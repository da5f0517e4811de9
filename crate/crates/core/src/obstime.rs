//! Observability-time conditions: the integral of the slowest speed at rest,
//! minimal observation times, classification over initial times and the
//! bound for speeds that do not depend on `t`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::charsys::State;
use crate::error::{Error, Result};
use crate::exec::{try_map, Exec};
use crate::problem::Problem;

/// `x` nodes used for the inner minimum.
pub const X_NODES: usize = 257;
/// Simpson intervals for a single integral.
pub const INTEGRAL_INTERVALS: usize = 1024;
/// Simpson intervals of the cumulative table over the horizon.
pub const TABLE_INTERVALS: usize = 4096;
pub const BISECTION_TOL: f64 = 1e-10;
const CRITICAL_TOL: f64 = 1e-9;
const AUTONOMY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Observations at both ends.
    TwoSided,
    /// Observation at one end only.
    OneSided,
}

impl Mode {
    pub fn threshold(self, length: f64) -> f64 {
        match self {
            Mode::TwoSided => length,
            Mode::OneSided => 2.0 * length,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::TwoSided => "two_sided",
            Mode::OneSided => "one_sided",
        })
    }
}

/// `min_x c(t, x, 0, 0, 0)` over [`X_NODES`] nodes.
pub fn min_speed(p: &Problem, t: f64) -> Result<f64> {
    let mut m = f64::INFINITY;
    for k in 0..X_NODES {
        let x = p.length * k as f64 / (X_NODES - 1) as f64;
        m = m.min(p.positive_speed(t, x, &State::ZERO)?);
    }
    Ok(m)
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64, n: usize) -> Result<f64> {
    let h = (b - a) / n as f64;
    let mut sum = f(a)? + f(b)?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h)?;
    }
    Ok(h * sum / 3.0)
}

/// `int_{t0}^{t0+duration} min_x c(t, x, 0, 0, 0) dt`.
pub fn speed_integral(p: &Problem, t0: f64, duration: f64) -> Result<f64> {
    if duration == 0.0 {
        return Ok(0.0);
    }
    simpson(&|t| min_speed(p, t), t0, t0 + duration, INTEGRAL_INTERVALS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeCondition {
    pub mode: Mode,
    pub threshold: f64,
    pub t0: f64,
    pub duration: f64,
    pub integral: f64,
}

impl TimeCondition {
    /// Strict inequality.
    pub fn passes(&self) -> bool {
        self.integral > self.threshold
    }

    /// The integral equals the threshold up to quadrature roundoff.
    pub fn critical(&self) -> bool {
        (self.integral - self.threshold).abs() <= CRITICAL_TOL * self.threshold
    }

    pub fn into_result(self) -> Result<TimeCondition> {
        if self.passes() {
            Ok(self)
        } else {
            Err(Error::TimeCondition {
                integral: self.integral,
                threshold: self.threshold,
            })
        }
    }
}

pub fn check_time_condition(p: &Problem, t0: f64, duration: f64, mode: Mode) -> Result<TimeCondition> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Invalid(format!("observation time must be positive, got {duration}")));
    }
    Ok(TimeCondition {
        mode,
        threshold: mode.threshold(p.length),
        t0,
        duration,
        integral: speed_integral(p, t0, duration)?,
    })
}

/// Smallest duration `T <= horizon` whose integral reaches the threshold, or
/// `None` when the integral over the whole horizon stays at or below it.
pub fn min_observability_time(p: &Problem, t0: f64, mode: Mode, horizon: f64) -> Result<Option<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Invalid(format!("horizon must be positive, got {horizon}")));
    }
    let threshold = mode.threshold(p.length);
    let n = TABLE_INTERVALS;
    let h = horizon / n as f64;
    let speeds = (0..=n)
        .map(|k| min_speed(p, t0 + k as f64 * h))
        .collect::<Result<Vec<_>>>()?;
    // Cumulative integral at the even nodes.
    let mut cumulative = vec![0.0; n / 2 + 1];
    for k in 1..=n / 2 {
        let pair = speeds[2 * k - 2] + 4.0 * speeds[2 * k - 1] + speeds[2 * k];
        cumulative[k] = cumulative[k - 1] + h * pair / 3.0;
    }
    // A total within quadrature error of the threshold is the critical case,
    // which the strict condition excludes.
    if cumulative[n / 2] <= threshold * (1.0 + CRITICAL_TOL) {
        return Ok(None);
    }
    let k = cumulative
        .iter()
        .position(|&v| v >= threshold)
        .expect("the last entry exceeds the threshold");
    if k == 0 {
        return Ok(Some(0.0));
    }
    let base = cumulative[k - 1];
    let start = (2 * (k - 1)) as f64 * h;
    let integral_to = |d: f64| -> Result<f64> {
        if d <= start {
            return Ok(base);
        }
        Ok(base + simpson(&|t| min_speed(p, t), t0 + start, t0 + d, 64)?)
    };
    let (mut lo, mut hi) = (start, (2 * k) as f64 * h);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if integral_to(mid)? >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every initial time admits a finite observation time.
    All,
    /// Some but not all do.
    Some,
    /// None does.
    None,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::All => "all",
            Regime::Some => "some",
            Regime::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialTimeRow {
    pub t0: f64,
    pub t_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub regime: Regime,
    pub rows: Vec<InitialTimeRow>,
}

pub fn classify_initial_times(
    p: &Problem,
    mode: Mode,
    t0_grid: &[f64],
    horizon: f64,
    exec: Exec,
) -> Result<Classification> {
    if t0_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Invalid("initial-time grid must be finite".into()));
    }
    let rows = try_map(exec, t0_grid.len(), |i| {
        Ok::<_, Error>(InitialTimeRow {
            t0: t0_grid[i],
            t_star: min_observability_time(p, t0_grid[i], mode, horizon)?,
        })
    })?;
    let finite = rows.iter().filter(|r| r.t_star.is_some()).count();
    let regime = if finite == rows.len() {
        Regime::All
    } else if finite == 0 {
        Regime::None
    } else {
        Regime::Some
    };
    Ok(Classification { regime, rows })
}

/// `sup_x L / c(x, 0, 0, 0)` (or `2L / c`) for a speed without `t`
/// dependence, checked at 16 times across the problem's window.
pub fn autonomous_bound(p: &Problem, mode: Mode) -> Result<f64> {
    let xs: Vec<f64> = (0..X_NODES)
        .map(|k| p.length * k as f64 / (X_NODES - 1) as f64)
        .collect();
    let window = if p.window > 0.0 { p.window } else { 1.0 };
    let reference = xs
        .iter()
        .map(|&x| p.positive_speed(p.t0, x, &State::ZERO))
        .collect::<Result<Vec<_>>>()?;
    for l in 1..16 {
        let t = p.t0 + window * l as f64 / 15.0;
        for (x, c_ref) in xs.iter().zip(&reference) {
            let c = p.positive_speed(t, *x, &State::ZERO)?;
            if (c - c_ref).abs() > AUTONOMY_TOL {
                return Err(Error::Invalid(format!(
                    "speed depends on t: c changes by {:e} between t={} and t={t} at x={x}",
                    (c - c_ref).abs(),
                    p.t0
                )));
            }
        }
    }
    let c_min = reference.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(mode.threshold(p.length) / c_min)
}
