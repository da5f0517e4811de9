use super::{Field, Grid, SolveOptions};
use crate::charsys::State;
use crate::error::{Error, Result};
use crate::exec::try_fill;
use crate::observe::{derivative, TracePair};
use crate::problem::{Problem, Side};

const X_LATTICE: usize = 64;
const MAX_T_SAMPLES: usize = 512;
const MAX_COLUMNS: usize = 4_000_000;
/// Tolerance on foot positions, in units of the time step.
const FOOT_TOL: f64 = 1e-9;

/// Smallest speed over the sampled times, an `x` lattice, the states
/// `0, ±epsilon e_k`, and the data states on the data side.
fn speed_floor(p: &Problem, data: &TracePair, da: &[f64], epsilon: f64) -> Result<f64> {
    let n = data.a.len();
    let stride = (n / MAX_T_SAMPLES).max(1);
    let mut times: Vec<f64> = (0..n).step_by(stride).map(|j| data.a.t(j)).collect();
    times.push(data.a.t_end());
    let e = epsilon;
    let ball = [
        State::ZERO,
        State::new(e, 0.0, 0.0),
        State::new(-e, 0.0, 0.0),
        State::new(0.0, e, 0.0),
        State::new(0.0, -e, 0.0),
        State::new(0.0, 0.0, e),
        State::new(0.0, 0.0, -e),
    ];
    let mut floor = f64::INFINITY;
    for &t in &times {
        for k in 0..=X_LATTICE {
            let x = p.length * k as f64 / X_LATTICE as f64;
            for s in &ball {
                floor = floor.min(p.positive_speed(t, x, s)?);
            }
        }
    }
    let x0 = p.side_x(data.side);
    for (j, &d) in da.iter().enumerate().take(n) {
        let s = State::new(data.a.values[j], data.b.values[j], d);
        floor = floor.min(p.positive_speed(data.a.t(j), x0, &s)?);
    }
    Ok(floor)
}

/// Number of `x` steps used by [`solve_cauchy_sideways`] for this record.
pub fn sideways_step_count(p: &Problem, data: &TracePair, epsilon: f64) -> Result<usize> {
    let da = derivative(&data.a.values, data.a.step)?;
    let floor = speed_floor(p, data, &da, epsilon)?;
    let steps = (p.length / (data.a.step * floor) - 1e-9).ceil().max(1.0);
    if steps > MAX_COLUMNS as f64 {
        return Err(Error::Invalid(format!(
            "sideways march needs {steps} columns; refine the record or shorten the interval"
        )));
    }
    Ok(steps as usize)
}

/// State of column `col` at fractional level `q`, if `q` lies in the valid
/// range `lo..=hi`.
fn interp(col: &[State], lo: usize, hi: usize, q: f64) -> Option<State> {
    if q < lo as f64 - FOOT_TOL || q > hi as f64 + FOOT_TOL {
        return None;
    }
    if lo == hi {
        return Some(col[lo]);
    }
    let q = q.clamp(lo as f64, hi as f64);
    let k = (q.floor() as usize).clamp(lo, hi - 1);
    Some(col[k].lerp(&col[k + 1], q - k as f64))
}

/// Solves the Cauchy problem with data `(u, u_x) = (a, b)` on one side by
/// marching in `x` towards the other side.
///
/// The `t` lattice is the record's; the `x` step is chosen so that every
/// characteristic foot stays within one time step. Each column loses its
/// outermost level at both ends, so the valid region is the determinate
/// domain of the data. With `require_full`, emptying the column before the
/// far side is an error; otherwise the remaining columns are left invalid.
pub fn solve_cauchy_sideways(
    p: &Problem,
    data: &TracePair,
    require_full: bool,
    opts: &SolveOptions,
) -> Result<Field> {
    let (a, b) = (&data.a, &data.b);
    if a.len() != b.len() || (a.t_start - b.t_start).abs() > 1e-12 || (a.step - b.step).abs() > 1e-15 {
        return Err(Error::WindowMismatch("trace components are sampled differently".into()));
    }
    if a.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: a.len() });
    }
    let nt = a.len() - 1;
    let dt = a.step;
    let da = derivative(&a.values, dt)?;
    let m = sideways_step_count(p, data, opts.epsilon)?;
    let grid = Grid::new(a.t_start, a.t_end(), nt, p.length, m)?;
    let dxs = grid.dx();
    let sx = match data.side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    };
    let col_index = |k: usize| match data.side {
        Side::Left => k,
        Side::Right => m - k,
    };

    let width = m + 1;
    let mut values = vec![State::ZERO; (nt + 1) * width];
    let mut mask = vec![false; values.len()];
    let mut prev: Vec<State> = (0..=nt).map(|j| State::new(a.values[j], b.values[j], da[j])).collect();
    let mut range = Some((0usize, nt));
    let store = |values: &mut Vec<State>, mask: &mut Vec<bool>, i: usize, col: &[State], lo: usize, hi: usize| {
        for j in lo..=hi {
            values[j * width + i] = col[j];
            mask[j * width + i] = true;
        }
    };
    store(&mut values, &mut mask, col_index(0), &prev, 0, nt);

    let mut next: Vec<Option<State>> = vec![None; nt + 1];
    for k in 0..m {
        let Some((lo, hi)) = range else { break };
        let x_prev = grid.x(col_index(k));
        let column = &prev;
        try_fill(opts.exec, &mut next, |j| -> Result<Option<State>> {
            if j < lo || j > hi {
                return Ok(None);
            }
            let t = grid.t(j);
            let s = column[j];
            let c = p.positive_speed(t, x_prev, &s)?;
            let nu = dxs / (c * dt);
            if nu > 1.0 + FOOT_TOL {
                return Err(Error::Cfl { courant: nu, t, x: x_prev });
            }
            let q1 = j as f64 + sx * nu;
            let q3 = j as f64 - sx * nu;
            let (Some(s1), Some(s3)) = (interp(column, lo, hi, q1), interp(column, lo, hi, q3)) else {
                return Ok(None);
            };
            let f1 = p.source(grid.t_start + q1 * dt, x_prev, &s1)?;
            let f3 = p.source(grid.t_start + q3 * dt, x_prev, &s3)?;
            let k1 = c * s1.v + s1.w - sx * f1 / c * dxs;
            let k3 = -c * s3.v + s3.w + sx * f3 / c * dxs;
            let w = 0.5 * (k1 + k3);
            let v = (k1 - k3) / (2.0 * c);
            let u = s.u + sx * dxs * 0.5 * (s.v + v);
            Ok(Some(State::new(u, v, w)))
        })?;
        let first = next.iter().position(Option::is_some);
        let last = next.iter().rposition(Option::is_some);
        let i = col_index(k + 1);
        match (first, last) {
            (Some(lo), Some(hi)) => {
                for j in lo..=hi {
                    prev[j] = next[j].expect("valid levels are contiguous");
                }
                if let Some(j) = (lo..=hi).find(|&j| !prev[j].is_finite()) {
                    return Err(Error::Invalid(format!(
                        "sideways solution blew up at t={}, x={}",
                        grid.t(j),
                        grid.x(i)
                    )));
                }
                store(&mut values, &mut mask, i, &prev, lo, hi);
                range = Some((lo, hi));
            }
            _ => {
                if require_full {
                    return Err(Error::MaskEmptied { x: grid.x(i) });
                }
                range = None;
            }
        }
    }
    let field = Field::from_parts(grid, values, mask);
    field.guard(opts.epsilon).warn_if_breached("sideways solve");
    Ok(field)
}
