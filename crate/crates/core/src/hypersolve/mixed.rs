use super::{Field, Grid, SolveOptions};
use crate::charsys::{boundary_state, Known, State};
use crate::error::{Error, Result};
use crate::exec::try_fill;
use crate::observe::{derivative, TimeSeries};
use crate::problem::{BcKind, BoundaryCondition, Problem, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From `t_start` up to `t_end`.
    Forward,
    /// From `t_end` down to `t_start`.
    Backward,
}

impl Direction {
    fn sigma(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Inputs of one mixed solve. Speed and source come from `problem`; the
/// boundary conditions may differ from the problem's own.
#[derive(Debug, Clone, Copy)]
pub struct MixedSetup<'a> {
    pub problem: &'a Problem,
    pub bc_left: &'a BoundaryCondition,
    pub bc_right: &'a BoundaryCondition,
    /// Boundary functions sampled at every level of the grid.
    pub h_left: &'a TimeSeries,
    pub h_right: &'a TimeSeries,
    /// States on the starting level (`t_start` forward, `t_end` backward).
    pub initial: &'a [State],
    pub direction: Direction,
}

struct Side1<'a> {
    bc: &'a BoundaryCondition,
    h: &'a [f64],
    dh: Vec<f64>,
}

struct Stepper<'a> {
    p: &'a Problem,
    grid: Grid,
    sigma: f64,
    left: Side1<'a>,
    right: Side1<'a>,
}

impl Stepper<'_> {
    /// Characteristic variable arriving along the `-c` (frame) family at the
    /// node whose neighbour towards the foot is `nb`.
    fn foot_value(&self, t: f64, i: usize, nb: usize, old: &[State], plus: bool) -> Result<(f64, f64)> {
        let g = &self.grid;
        let (dt, dx) = (g.dt(), g.dx());
        let s = old[i];
        let x = g.x(i);
        let c = self.p.positive_speed(t, x, &s)?;
        let theta = c * dt / dx;
        if theta > 1.0 + 1e-12 {
            return Err(Error::Cfl { courant: theta, t, x });
        }
        let foot = old[i].lerp(&old[nb], theta);
        let xf = if plus { x + c * dt } else { x - c * dt };
        let f = self.p.source(t, xf, &foot)?;
        let sign = if plus { 1.0 } else { -1.0 };
        Ok((sign * c * foot.v + self.sigma * foot.w + dt * f, c))
    }

    fn interior(&self, t: f64, i: usize, old: &[State]) -> Result<State> {
        let (k1, c) = self.foot_value(t, i, i + 1, old, true)?;
        let (k3, _) = self.foot_value(t, i, i - 1, old, false)?;
        let s = old[i];
        let wf = 0.5 * (k1 + k3);
        let v = (k1 - k3) / (2.0 * c);
        let u = s.u + 0.5 * self.grid.dt() * (self.sigma * s.w + wf);
        Ok(State::new(u, v, self.sigma * wf))
    }

    fn boundary(&self, t_old: f64, t_new: f64, j_new: usize, side: Side, old: &[State]) -> Result<State> {
        let nx = self.grid.nx;
        let (i, nb, plus, data) = match side {
            Side::Left => (0, 1, true, &self.left),
            Side::Right => (nx, nx - 1, false, &self.right),
        };
        let (k, _) = self.foot_value(t_old, i, nb, old, plus)?;
        let forward = self.sigma > 0.0;
        let known = match (side, forward) {
            (Side::Left, true) => Known::V1(k),
            (Side::Left, false) => Known::V3(-k),
            (Side::Right, true) => Known::V3(k),
            (Side::Right, false) => Known::V1(-k),
        };
        let (h, dh) = (data.h[j_new], data.dh[j_new]);
        let s = old[i];
        let dt = self.grid.dt();
        if matches!(data.bc.kind, BcKind::Dirichlet) {
            return boundary_state(self.p, data.bc, t_new, known, s.u, h, dh);
        }
        let predicted = s.u + dt * self.sigma * s.w;
        let first = boundary_state(self.p, data.bc, t_new, known, predicted, h, dh)?;
        let corrected = s.u + 0.5 * dt * self.sigma * (s.w + first.w);
        boundary_state(self.p, data.bc, t_new, known, corrected, h, dh)
    }
}

fn check_series(name: &str, h: &TimeSeries, grid: &Grid) -> Result<()> {
    if h.len() != grid.nt + 1 {
        return Err(Error::WindowMismatch(format!(
            "{name} has {} samples for {} levels",
            h.len(),
            grid.nt + 1
        )));
    }
    if (h.t_start - grid.t_start).abs() > 1e-9 * grid.dt() || (h.step - grid.dt()).abs() > 1e-9 * grid.dt() {
        return Err(Error::WindowMismatch(format!("{name} is not sampled on the grid levels")));
    }
    Ok(())
}

/// Largest speed over the zero-state lattice and the starting states.
fn setup_courant(p: &Problem, grid: &Grid, start: usize, initial: &[State]) -> Result<(f64, f64, f64)> {
    let levels = 64.min(grid.nt);
    let mut worst = (0.0, grid.t_start, 0.0);
    let mut consider = |c: f64, t: f64, x: f64| {
        if c > worst.0 {
            worst = (c, t, x);
        }
    };
    for l in 0..=levels {
        let j = l * grid.nt / levels;
        let t = grid.t(j);
        for i in 0..=grid.nx {
            consider(p.positive_speed(t, grid.x(i), &State::ZERO)?, t, grid.x(i));
        }
    }
    let t = grid.t(start);
    for (i, s) in initial.iter().enumerate() {
        consider(p.positive_speed(t, grid.x(i), s)?, t, grid.x(i));
    }
    Ok((worst.0 * grid.dt() / grid.dx(), worst.1, worst.2))
}

/// Marches the mixed problem across `grid`. Rows of the returned field are in
/// increasing physical time regardless of `direction`.
pub fn solve_mixed(setup: &MixedSetup<'_>, grid: &Grid, opts: &SolveOptions) -> Result<Field> {
    let p = setup.problem;
    let width = grid.nx + 1;
    if setup.initial.len() != width {
        return Err(Error::Invalid(format!(
            "initial level has {} states for {} nodes",
            setup.initial.len(),
            width
        )));
    }
    if setup.bc_left.side != Side::Left || setup.bc_right.side != Side::Right {
        return Err(Error::Invalid("boundary conditions attached to the wrong sides".into()));
    }
    check_series("left boundary data", setup.h_left, grid)?;
    check_series("right boundary data", setup.h_right, grid)?;

    let forward = setup.direction == Direction::Forward;
    let start = if forward { 0 } else { grid.nt };
    let (courant, t, x) = setup_courant(p, grid, start, setup.initial)?;
    if courant > opts.cfl_safety {
        return Err(Error::Cfl { courant, t, x });
    }

    let stepper = Stepper {
        p,
        grid: *grid,
        sigma: setup.direction.sigma(),
        left: Side1 {
            bc: setup.bc_left,
            h: &setup.h_left.values,
            dh: derivative(&setup.h_left.values, grid.dt())?,
        },
        right: Side1 {
            bc: setup.bc_right,
            h: &setup.h_right.values,
            dh: derivative(&setup.h_right.values, grid.dt())?,
        },
    };

    let mut values = vec![State::ZERO; (grid.nt + 1) * width];
    values[start * width..(start + 1) * width].copy_from_slice(setup.initial);
    let mut old = setup.initial.to_vec();
    let mut new = vec![State::ZERO; width];
    for m in 0..grid.nt {
        let (j_old, j_new) = if forward { (m, m + 1) } else { (grid.nt - m, grid.nt - m - 1) };
        let (t_old, t_new) = (grid.t(j_old), grid.t(j_new));
        try_fill(opts.exec, &mut new, |i| {
            if i == 0 {
                stepper.boundary(t_old, t_new, j_new, Side::Left, &old)
            } else if i == grid.nx {
                stepper.boundary(t_old, t_new, j_new, Side::Right, &old)
            } else {
                stepper.interior(t_old, i, &old)
            }
        })?;
        if let Some(i) = new.iter().position(|s| !s.is_finite()) {
            return Err(Error::Invalid(format!(
                "solution blew up at t={t_new}, x={}",
                grid.x(i)
            )));
        }
        values[j_new * width..(j_new + 1) * width].copy_from_slice(&new);
        std::mem::swap(&mut old, &mut new);
    }
    let n = values.len();
    let field = Field::from_parts(*grid, values, vec![true; n]);
    field.guard(opts.epsilon).warn_if_breached("mixed solve");
    Ok(field)
}

/// Forward solve of `p` from its own initial and boundary data, on a grid
/// starting at `p.t0`.
pub fn simulate(p: &Problem, grid: &Grid, opts: &SolveOptions) -> Result<Field> {
    if (grid.t_start - p.t0).abs() > 1e-12 * p.t0.abs().max(1.0) {
        return Err(Error::WindowMismatch(format!(
            "grid starts at {} but the problem's initial time is {}",
            grid.t_start, p.t0
        )));
    }
    let initial = (0..=grid.nx)
        .map(|i| p.initial_state(grid.x(i)))
        .collect::<Result<Vec<_>>>()?;
    let sample = |side| TimeSeries::from_fn(grid.t_start, grid.dt(), grid.nt + 1, |t| p.boundary_value(side, t));
    let h_left = sample(Side::Left)?;
    let h_right = sample(Side::Right)?;
    solve_mixed(
        &MixedSetup {
            problem: p,
            bc_left: &p.bc_left,
            bc_right: &p.bc_right,
            h_left: &h_left,
            h_right: &h_right,
            initial: &initial,
            direction: Direction::Forward,
        },
        grid,
        opts,
    )
}
