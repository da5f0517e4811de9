//! Recovery of the initial data from boundary observations: sideways solves
//! from the observed traces, an intermediate state at `T̃` inside the
//! determinate domains, then a backward mixed solve down to `t0`.

use serde::Serialize;

use crate::charsys::{check_degeneracy, Known, State};
use crate::domains::{build_domain, find_t_tilde, trace_curve, Curve, CurveLabel, DeterminateDomain, DomainSide, TTilde};
use crate::error::{Error, Result};
use crate::exec::join;
use crate::expr::Expression;
use crate::hypersolve::{solve_cauchy_sideways, solve_mixed, Direction, Field, Grid, MixedSetup, SolveOptions};
use crate::observe::{assemble_trace, boundary_series, ratio_for_mode, InitialSamples, Observation, TimeSeries};
use crate::obstime::{check_time_condition, Mode, TimeCondition};
use crate::problem::{BcKind, BoundaryCondition, Problem, Side, SmallnessGuard};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    /// Space steps of the backward solve; derived from the time step when
    /// unset.
    pub nx: Option<usize>,
    /// Refuse to run when the integral time condition fails. Switching this
    /// off lets the geometric domain test decide on its own.
    pub enforce_time_condition: bool,
    pub solve: SolveOptions,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            nx: None,
            enforce_time_condition: true,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionResult {
    pub mode: Mode,
    pub x: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub psi_hat: Vec<f64>,
    pub t_tilde: TTilde,
    /// Largest disagreement of the two sideways solutions on their overlap
    /// at `T̃`; two-sided runs only.
    pub overlap_mismatch: Option<f64>,
    /// Glue point between the two sideways solutions; two-sided runs only.
    pub glue_x: Option<f64>,
    #[serde(skip)]
    pub guard: SmallnessGuard,
    /// Observability ratio of the recovered data; `None` when undefined.
    pub ratio: Option<f64>,
    pub time_condition: TimeCondition,
    pub curves: Vec<Curve>,
}

impl ReconstructionResult {
    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }
}

fn check_window(p: &Problem, obs: &Observation, duration: f64) -> Result<()> {
    let k = &obs.k;
    let tol = 1e-9 * duration.max(1.0);
    if (k.t_start - p.t0).abs() > tol || (k.t_end() - (p.t0 + duration)).abs() > tol {
        return Err(Error::WindowMismatch(format!(
            "observation covers [{}, {}], expected [{}, {}]",
            k.t_start,
            k.t_end(),
            p.t0,
            p.t0 + duration
        )));
    }
    Ok(())
}

fn time_condition(p: &Problem, duration: f64, mode: Mode, opts: &ReconstructOptions) -> Result<TimeCondition> {
    let cond = check_time_condition(p, p.t0, duration, mode)?;
    if opts.enforce_time_condition {
        cond.into_result()
    } else {
        Ok(cond)
    }
}

fn domain(p: &Problem, field: &Field, side: DomainSide, exec_pair: SolveOptions) -> Result<DeterminateDomain> {
    let (a, b) = match side {
        DomainSide::Right => (CurveLabel::X1, CurveLabel::X2),
        DomainSide::Left => (CurveLabel::X3, CurveLabel::X4),
    };
    let (ca, cb) = join(exec_pair.exec, || trace_curve(p, field, a), || trace_curve(p, field, b));
    build_domain(ca?, cb?, side)
}

fn backward_nx(p: &Problem, t_end: f64, dt: f64, opts: &ReconstructOptions) -> Result<usize> {
    if let Some(nx) = opts.nx {
        return Ok(nx);
    }
    let mut c_max: f64 = 0.0;
    for l in 0..=64 {
        let t = p.t0 + (t_end - p.t0) * l as f64 / 64.0;
        for k in 0..=64 {
            c_max = c_max.max(p.positive_speed(t, p.length * k as f64 / 64.0, &State::ZERO)?);
        }
    }
    let nx = (0.95 * opts.solve.cfl_safety * p.length / (c_max * dt)).floor() as usize;
    Ok(nx.max(8))
}

fn dirichlet(side: Side) -> BoundaryCondition {
    BoundaryCondition::new(side, BcKind::Dirichlet, Expression::constant(0.0)).expect("Dirichlet needs no coefficient")
}

/// Runs the backward mixed solve from `initial` at level `level` of the
/// observation lattice down to `t0` and returns `(u, u_t)` there.
#[allow(clippy::too_many_arguments)]
fn backward(
    p: &Problem,
    bc_left: &BoundaryCondition,
    bc_right: &BoundaryCondition,
    h_left: &TimeSeries,
    h_right: &TimeSeries,
    initial: &[State],
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let field = solve_mixed(
        &MixedSetup {
            problem: p,
            bc_left,
            bc_right,
            h_left,
            h_right,
            initial,
            direction: Direction::Backward,
        },
        grid,
        opts,
    )?;
    let row = field.row(0);
    Ok((row.iter().map(|s| s.u).collect(), row.iter().map(|s| s.w).collect(), field.c1_norm()))
}

struct Pieces {
    x: Vec<f64>,
    phi_hat: Vec<f64>,
    psi_hat: Vec<f64>,
    c1: f64,
}

fn backward_grid(p: &Problem, obs: &Observation, level: usize, opts: &ReconstructOptions) -> Result<Grid> {
    let t_tilde = obs.k.t(level);
    let nx = backward_nx(p, t_tilde, obs.k.step, opts)?;
    Grid::new(p.t0, t_tilde, level, p.length, nx)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    p: &Problem,
    mode: Mode,
    pieces: Pieces,
    obs: [Option<&Observation>; 2],
    t_tilde: TTilde,
    mismatch: Option<(f64, f64)>,
    sideways_c1: f64,
    time_condition: TimeCondition,
    curves: Vec<Curve>,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    let guard = SmallnessGuard {
        epsilon: opts.solve.epsilon,
        c1_bound: pieces.c1.max(sideways_c1),
    };
    guard.warn_if_breached("reconstruction");
    let initial = InitialSamples {
        dx: pieces.x[1] - pieces.x[0],
        phi: pieces.phi_hat.clone(),
        psi: pieces.psi_hat.clone(),
    };
    let first = obs[0].expect("at least one observation");
    let ratio = ratio_for_mode(p, &initial, first, obs[1], mode).ok();
    Ok(ReconstructionResult {
        mode,
        x: pieces.x,
        phi_hat: pieces.phi_hat,
        psi_hat: pieces.psi_hat,
        t_tilde,
        overlap_mismatch: mismatch.map(|m| m.0),
        glue_x: mismatch.map(|m| m.1),
        guard,
        ratio,
        time_condition,
        curves,
    })
}

/// Recovers `(phi, psi)` from observations at both ends over `[t0, t0 + duration]`.
pub fn reconstruct_two_sided(
    p: &Problem,
    obs_left: &Observation,
    obs_right: &Observation,
    duration: f64,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    if obs_left.side != Side::Left || obs_right.side != Side::Right {
        return Err(Error::Invalid("two-sided reconstruction needs one observation per end".into()));
    }
    check_window(p, obs_left, duration)?;
    check_window(p, obs_right, duration)?;
    let cond = time_condition(p, duration, Mode::TwoSided, opts)?;

    let trace_l = assemble_trace(p, obs_left)?;
    let trace_r = assemble_trace(p, obs_right)?;
    let so = opts.solve;
    let (fr, fl) = join(
        so.exec,
        || solve_cauchy_sideways(p, &trace_l, false, &so),
        || solve_cauchy_sideways(p, &trace_r, false, &so),
    );
    let (fr, fl) = (fr?, fl?);
    let (dr, dl) = join(so.exec, || domain(p, &fr, DomainSide::Right, so), || domain(p, &fl, DomainSide::Left, so));
    let (dr, dl) = (dr?, dl?);
    let tt = find_t_tilde(&dr, Some(&dl), Mode::TwoSided, p.length)?;
    let level = tt.level;

    let (gr, gl) = (*fr.grid(), *fl.grid());
    let (r_lo, r_hi) = fr.row_range(level).ok_or(Error::OutsideMask { t: tt.t, x: 0.0 })?;
    let (l_lo, l_hi) = fl.row_range(level).ok_or(Error::OutsideMask { t: tt.t, x: p.length })?;
    if r_lo != 0 || l_hi != gl.nx {
        return Err(Error::NoIntersection("sideways solutions do not reach their data side at T̃".into()));
    }
    let (x_l, x_r) = (gl.x(l_lo), gr.x(r_hi));
    if x_r < x_l {
        return Err(Error::NoIntersection(format!(
            "computed determinate regions leave a gap ({x_r} < {x_l}) at t={}",
            tt.t
        )));
    }
    let glue = 0.5 * (x_l + x_r);
    let mut mismatch: f64 = 0.0;
    for i in 0..=r_hi {
        let x = gr.x(i);
        if x + 1e-12 < x_l {
            continue;
        }
        let a = fr.get(level, i).expect("inside the row range");
        let b = fl.sample(tt.t, x)?;
        mismatch = mismatch.max((a.u - b.u).abs()).max((a.w - b.w).abs());
    }

    let pieces = if level == 0 {
        let grid = Grid::new(p.t0, p.t0 + duration, obs_left.k.len() - 1, p.length, backward_nx(p, p.t0, obs_left.k.step, opts)?)?;
        let x: Vec<f64> = (0..=grid.nx).map(|i| grid.x(i)).collect();
        let states = x
            .iter()
            .map(|&x| if x <= glue { fr.sample(tt.t, x) } else { fl.sample(tt.t, x) })
            .collect::<Result<Vec<_>>>()?;
        Pieces {
            x,
            phi_hat: states.iter().map(|s| s.u).collect(),
            psi_hat: states.iter().map(|s| s.w).collect(),
            c1: 0.0,
        }
    } else {
        let grid = backward_grid(p, obs_left, level, opts)?;
        let initial = (0..=grid.nx)
            .map(|i| {
                let x = grid.x(i);
                if x <= glue {
                    fr.sample(tt.t, x)
                } else {
                    fl.sample(tt.t, x)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let a = trace_l.a.slice(0, level);
        let a_bar = trace_r.a.slice(0, level);
        let (phi_hat, psi_hat, c1) = backward(
            p,
            &dirichlet(Side::Left),
            &dirichlet(Side::Right),
            &a,
            &a_bar,
            &initial,
            &grid,
            &so,
        )?;
        Pieces {
            x: (0..=grid.nx).map(|i| grid.x(i)).collect(),
            phi_hat,
            psi_hat,
            c1,
        }
    };
    let curves = vec![dr.upper, dr.lower, dl.upper, dl.lower];
    finish(
        p,
        Mode::TwoSided,
        pieces,
        [Some(obs_left), Some(obs_right)],
        tt,
        Some((mismatch, glue)),
        fr.c1_norm().max(fl.c1_norm()),
        cond,
        curves,
        opts,
    )
}

fn one_sided(p: &Problem, obs: &Observation, duration: f64, opts: &ReconstructOptions) -> Result<ReconstructionResult> {
    check_window(p, obs, duration)?;
    let cond = time_condition(p, duration, Mode::OneSided, opts)?;
    let far = obs.side.opposite();
    let far_bc = p.bc(far);
    let known = match far {
        Side::Right => Known::V1(0.0),
        Side::Left => Known::V3(0.0),
    };
    for l in 0..=64 {
        check_degeneracy(p, far_bc, p.t0 + duration * l as f64 / 64.0, known)?;
    }

    let trace = assemble_trace(p, obs)?;
    let so = opts.solve;
    let field = solve_cauchy_sideways(p, &trace, false, &so)?;
    let side = match obs.side {
        Side::Left => DomainSide::Right,
        Side::Right => DomainSide::Left,
    };
    let dom = domain(p, &field, side, so)?;
    let tt = find_t_tilde(&dom, None, Mode::OneSided, p.length)?;
    let level = tt.level;
    let g = *field.grid();
    if field.row_range(level) != Some((0, g.nx)) {
        return Err(Error::NoIntersection(format!(
            "computed determinate region does not cover [0, L] at t={}",
            tt.t
        )));
    }

    let grid = if level == 0 {
        return Err(Error::NoIntersection("intermediate time coincides with the initial time".into()));
    } else {
        backward_grid(p, obs, level, opts)?
    };
    let initial = (0..=grid.nx)
        .map(|i| field.sample(tt.t, grid.x(i)))
        .collect::<Result<Vec<_>>>()?;
    let observed = trace.a.slice(0, level);
    let far_h = boundary_series(p, far, &observed)?;
    let near_bc = dirichlet(obs.side);
    let (bc_left, bc_right, h_left, h_right) = match obs.side {
        Side::Left => (&near_bc, far_bc, &observed, &far_h),
        Side::Right => (far_bc, &near_bc, &far_h, &observed),
    };
    let (phi_hat, psi_hat, c1) = backward(p, bc_left, bc_right, h_left, h_right, &initial, &grid, &so)?;
    let pieces = Pieces {
        x: (0..=grid.nx).map(|i| grid.x(i)).collect(),
        phi_hat,
        psi_hat,
        c1,
    };
    let curves = vec![dom.upper, dom.lower];
    finish(
        p,
        Mode::OneSided,
        pieces,
        [Some(obs), None],
        tt,
        None,
        field.c1_norm(),
        cond,
        curves,
        opts,
    )
}

/// Recovers `(phi, psi)` from the observation at `x = 0` alone.
pub fn reconstruct_one_sided(
    p: &Problem,
    obs: &Observation,
    duration: f64,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    if obs.side != Side::Left {
        return Err(Error::Invalid("expected the observation at x=0".into()));
    }
    one_sided(p, obs, duration, opts)
}

/// Recovers `(phi, psi)` from the observation at `x = L` alone.
pub fn reconstruct_one_sided_right(
    p: &Problem,
    obs: &Observation,
    duration: f64,
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    if obs.side != Side::Right {
        return Err(Error::Invalid("expected the observation at x=L".into()));
    }
    one_sided(p, obs, duration, opts)
}

/// Largest deviation of the recovered data from `(phi, psi)` of `p`:
/// `(sup |phi_hat - phi|, sup |psi_hat - psi|)`.
pub fn reconstruction_error(p: &Problem, r: &ReconstructionResult) -> Result<(f64, f64)> {
    let mut e = (0.0f64, 0.0f64);
    for (i, &x) in r.x.iter().enumerate() {
        e.0 = e.0.max((r.phi_hat[i] - p.phi(x)?).abs());
        e.1 = e.1.max((r.psi_hat[i] - p.psi(x)?).abs());
    }
    Ok(e)
}
