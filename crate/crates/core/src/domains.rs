//! Characteristic boundary curves, determinate domains and the choice of the
//! intermediate time.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypersolve::Field;
use crate::obstime::Mode;
use crate::problem::Problem;

/// Tolerance used when comparing curve positions and exit times.
pub const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveLabel {
    /// From `(t0+T, 0)` backward, `dx/dt = -c`.
    X1,
    /// From `(t0, 0)` forward, `dx/dt = +c`.
    X2,
    /// From `(t0+T, L)` backward, `dx/dt = +c`.
    X3,
    /// From `(t0, L)` forward, `dx/dt = -c`.
    X4,
}

impl CurveLabel {
    pub const ALL: [CurveLabel; 4] = [CurveLabel::X1, CurveLabel::X2, CurveLabel::X3, CurveLabel::X4];

    /// Sign of `dx/dt` relative to `c`.
    fn slope_sign(self) -> f64 {
        match self {
            CurveLabel::X1 | CurveLabel::X4 => -1.0,
            CurveLabel::X2 | CurveLabel::X3 => 1.0,
        }
    }

    fn backward(self) -> bool {
        matches!(self, CurveLabel::X1 | CurveLabel::X3)
    }

    fn starts_at_left(self) -> bool {
        matches!(self, CurveLabel::X1 | CurveLabel::X2)
    }
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveLabel::X1 => "x1",
            CurveLabel::X2 => "x2",
            CurveLabel::X3 => "x3",
            CurveLabel::X4 => "x4",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub label: CurveLabel,
    /// `(t, x)` in increasing `t`, one per grid level.
    pub samples: Vec<(f64, f64)>,
    /// Time at which the curve reached the opposite boundary.
    pub exit_time: Option<f64>,
}

impl Curve {
    pub fn x_at(&self, level: usize) -> f64 {
        self.samples[level].1
    }
}

/// Integrates the curve `label` through `field` with classical RK4 at the
/// field's time step, clipping at the far boundary.
pub fn trace_curve(p: &Problem, field: &Field, label: CurveLabel) -> Result<Curve> {
    let g = *field.grid();
    let length = g.length;
    let sign = label.slope_sign();
    let rate = |t: f64, x: f64| -> Result<f64> {
        let t = t.clamp(g.t_start, g.t_end);
        let x = x.clamp(0.0, length);
        let s = field.sample(t, x)?;
        Ok(sign * p.positive_speed(t, x, &s)?)
    };
    let target = if label.starts_at_left() { length } else { 0.0 };
    let crossed = |x: f64| {
        if label.starts_at_left() {
            x >= target
        } else {
            x <= target
        }
    };
    let h = if label.backward() { -g.dt() } else { g.dt() };
    let n = g.nt + 1;
    let mut xs = vec![target; n];
    let step_level = |k: usize| if label.backward() { g.nt - k } else { k };
    let mut x = if label.starts_at_left() { 0.0 } else { length };
    let mut exit_time = None;
    xs[step_level(0)] = x;
    for k in 0..g.nt {
        let t = g.t(step_level(k));
        let k1 = rate(t, x)?;
        let k2 = rate(t + 0.5 * h, x + 0.5 * h * k1)?;
        let k3 = rate(t + 0.5 * h, x + 0.5 * h * k2)?;
        let k4 = rate(t + h, x + h * k3)?;
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if crossed(next) {
            let frac = ((target - x) / (next - x)).clamp(0.0, 1.0);
            exit_time = Some(t + frac * h);
            break;
        }
        x = next;
        xs[step_level(k + 1)] = x;
    }
    let samples = (0..n).map(|j| (g.t(j), xs[j])).collect();
    Ok(Curve {
        label,
        samples,
        exit_time,
    })
}

/// Which determinate domain: `Right` is bounded by `x = 0` and `x1`, `x2`;
/// `Left` by `x = L` and `x3`, `x4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainSide {
    Right,
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterminateDomain {
    pub side: DomainSide,
    /// `x2` or `x4`, the curve leaving at the initial time.
    pub lower: Curve,
    /// `x1` or `x3`, the curve arriving at the final time.
    pub upper: Curve,
    /// Per level: `min(x1, x2)` for `Right`, `max(x3, x4)` for `Left`.
    pub envelope: Vec<f64>,
    /// The window has zero length and the domain has no interior.
    pub empty: bool,
}

impl DeterminateDomain {
    pub fn window(&self) -> (f64, f64) {
        (self.lower.samples[0].0, self.lower.samples[self.lower.samples.len() - 1].0)
    }

    pub fn levels(&self) -> usize {
        self.envelope.len()
    }

    pub fn contains(&self, level: usize, x: f64) -> bool {
        match self.side {
            DomainSide::Right => x <= self.envelope[level] + GEOMETRY_TOL,
            DomainSide::Left => x >= self.envelope[level] - GEOMETRY_TOL,
        }
    }
}

pub fn build_domain(a: Curve, b: Curve, side: DomainSide) -> Result<DeterminateDomain> {
    let (lower_label, upper_label) = match side {
        DomainSide::Right => (CurveLabel::X2, CurveLabel::X1),
        DomainSide::Left => (CurveLabel::X4, CurveLabel::X3),
    };
    let (lower, upper) = if a.label == lower_label && b.label == upper_label {
        (a, b)
    } else if b.label == lower_label && a.label == upper_label {
        (b, a)
    } else {
        return Err(Error::Invalid(format!(
            "a {side:?} domain is bounded by {lower_label} and {upper_label}, got {} and {}",
            a.label, b.label
        )));
    };
    let same_window = lower.samples.len() == upper.samples.len()
        && lower
            .samples
            .iter()
            .zip(&upper.samples)
            .all(|(p, q)| (p.0 - q.0).abs() <= GEOMETRY_TOL * p.0.abs().max(1.0));
    if !same_window {
        return Err(Error::WindowMismatch(format!(
            "{} and {} were traced on different windows",
            lower.label, upper.label
        )));
    }
    let envelope = lower
        .samples
        .iter()
        .zip(&upper.samples)
        .map(|(p, q)| match side {
            DomainSide::Right => p.1.min(q.1),
            DomainSide::Left => p.1.max(q.1),
        })
        .collect();
    let empty = lower.samples.len() < 2;
    Ok(DeterminateDomain {
        side,
        lower,
        upper,
        envelope,
        empty,
    })
}

/// Intermediate time and the covering diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTilde {
    pub t: f64,
    pub level: usize,
    /// First and last time of the run of levels `T̃` was taken from.
    pub s_interval: (f64, f64),
    /// Overlap of the two domains at `T̃` (two-sided), or `(0, L)`.
    pub overlap: (f64, f64),
}

fn longest_run(flags: &[bool]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (j, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| j - 1 - s > b - a) {
                    best = Some((s, j - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Picks `T̃` at the middle of the longest run of levels where the domains
/// cover `[0, L]`: with a nonempty overlap of `D_r` and `D_l` (two-sided),
/// or inside the single domain (one-sided).
pub fn find_t_tilde(
    first: &DeterminateDomain,
    second: Option<&DeterminateDomain>,
    mode: Mode,
    length: f64,
) -> Result<TTilde> {
    if first.empty || second.is_some_and(|d| d.empty) {
        return Err(Error::NoIntersection("the observation window has no interior".into()));
    }
    let times: Vec<f64> = first.lower.samples.iter().map(|s| s.0).collect();
    let flags: Vec<bool> = match mode {
        Mode::TwoSided => {
            let second = second.ok_or_else(|| Error::Invalid("two-sided search needs both domains".into()))?;
            let (dr, dl) = match (first.side, second.side) {
                (DomainSide::Right, DomainSide::Left) => (first, second),
                (DomainSide::Left, DomainSide::Right) => (second, first),
                _ => return Err(Error::Invalid("two-sided search needs a right and a left domain".into())),
            };
            if dr.levels() != dl.levels() || (dr.window().0 - dl.window().0).abs() > GEOMETRY_TOL {
                return Err(Error::WindowMismatch("domains built on different windows".into()));
            }
            dr.envelope
                .iter()
                .zip(&dl.envelope)
                .map(|(xr, xl)| xr - xl > GEOMETRY_TOL)
                .collect()
        }
        Mode::OneSided => {
            let (Some(leave), Some(arrive)) = (first.lower.exit_time, first.upper.exit_time) else {
                return Err(Error::NoIntersection(format!(
                    "the {} domain never reaches the opposite boundary",
                    match first.side {
                        DomainSide::Right => "right",
                        DomainSide::Left => "left",
                    }
                )));
            };
            times
                .iter()
                .map(|&t| t > leave + GEOMETRY_TOL && t < arrive - GEOMETRY_TOL)
                .collect()
        }
    };
    let Some((a, b)) = longest_run(&flags) else {
        return Err(Error::NoIntersection(match mode {
            Mode::TwoSided => "no time level is covered by both domains with a nonempty overlap".into(),
            Mode::OneSided => "the domain does not cover [0, L] at any time level".into(),
        }));
    };
    let level = (a + b) / 2;
    let overlap = match (mode, second) {
        (Mode::TwoSided, Some(second)) => {
            let (dr, dl) = if first.side == DomainSide::Right {
                (first, second)
            } else {
                (second, first)
            };
            (dl.envelope[level], dr.envelope[level])
        }
        _ => (0.0, length),
    };
    Ok(TTilde {
        t: times[level],
        level,
        s_interval: (times[a], times[b]),
        overlap,
    })
}
