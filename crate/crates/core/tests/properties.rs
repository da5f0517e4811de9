use std::f64::consts::PI;

use proptest::prelude::*;

use waveobs_core::domains::{build_domain, find_t_tilde, trace_curve, CurveLabel, DomainSide};
use waveobs_core::hypersolve::{
    extract_time_slice, simulate, solve_cauchy_sideways, solve_mixed, Direction, Field, Grid, MixedSetup, SolveOptions,
};
use waveobs_core::observe::{
    assemble_trace, discrete_norm, extract_observation, simulated_ratio, stored_trace, TimeSeries, TracePair,
};
use waveobs_core::obstime::{speed_integral, Mode};
use waveobs_core::problem::{catalog, catalog_spec, make_problem, BcSpec, Problem, ProblemSpec, Side};
use waveobs_core::reconstruct::{
    reconstruct_one_sided, reconstruct_one_sided_right, reconstruct_two_sided, reconstruction_error, ReconstructOptions,
};

fn problem(edit: impl FnOnce(&mut ProblemSpec)) -> Problem {
    let mut s = catalog_spec("linear-unit").unwrap();
    edit(&mut s);
    make_problem(&s).unwrap()
}

fn opts(nx: usize) -> ReconstructOptions {
    ReconstructOptions {
        nx: Some(nx),
        ..Default::default()
    }
}

fn run(p: &Problem, duration: f64, nt: usize, nx: usize) -> Field {
    let grid = Grid::new(p.t0, p.t0 + duration, nt, p.length, nx).unwrap();
    simulate(p, &grid, &SolveOptions::default()).unwrap()
}

fn sup_u_error(field: &Field, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let g = *field.grid();
    let mut e: f64 = 0.0;
    for j in 0..=g.nt {
        for i in 0..=g.nx {
            if let Some(s) = field.get(j, i) {
                e = e.max((s.u - exact(g.t(j), g.x(i))).abs());
            }
        }
    }
    e
}

#[test]
fn stored_slope_matches_difference_of_u() {
    let p = catalog("quasilinear-small").unwrap();
    let dev = |nx: usize| {
        let f = run(&p, 1.0, 2 * nx, nx);
        let g = *f.grid();
        let mut d: f64 = 0.0;
        for j in 0..=g.nt {
            let row = f.row(j);
            for i in 1..g.nx {
                let fd = (row[i + 1].u - row[i - 1].u) / (2.0 * g.dx());
                d = d.max((fd - row[i].v).abs());
            }
        }
        d
    };
    let (a, b) = (dev(100), dev(200));
    assert!(b < a && b < 5e-3, "{a} {b}");
}

#[test]
fn backward_round_trip_within_twice_one_way_error() {
    let p = catalog("linear-unit").unwrap();
    let exact = |t: f64, x: f64| 0.05 * (PI * x).sin() * (PI * t).cos();
    let nx = 200;
    let fwd = run(&p, 1.0, 2 * nx, nx);
    let g = *fwd.grid();
    let one_way = sup_u_error(&fwd, exact);
    let zeros = TimeSeries::new(0.0, g.dt(), vec![0.0; g.nt + 1]);
    let back = solve_mixed(
        &MixedSetup {
            problem: &p,
            bc_left: &p.bc_left,
            bc_right: &p.bc_right,
            h_left: &zeros,
            h_right: &zeros,
            initial: fwd.row(g.nt),
            direction: Direction::Backward,
        },
        &g,
        &SolveOptions::default(),
    )
    .unwrap();
    let round_trip = (0..=g.nx)
        .map(|i| (back.row(0)[i].u - exact(0.0, g.x(i))).abs())
        .fold(0.0, f64::max);
    assert!(round_trip <= 2.0 * one_way, "{round_trip} vs {one_way}");
}

fn travelling_trace(nt: usize) -> TracePair {
    // u = sin(x + t) seen from x = 0.
    let dt = 2.0 / nt as f64;
    TracePair {
        side: Side::Left,
        a: TimeSeries::from_fn(0.0, dt, nt + 1, |t| Ok(t.sin())).unwrap(),
        b: TimeSeries::from_fn(0.0, dt, nt + 1, |t| Ok(t.cos())).unwrap(),
    }
}

#[test]
fn sideways_travelling_wave_converges() {
    let p = problem(|s| s.phi = "0".into());
    let err = |nt: usize| {
        let f = solve_cauchy_sideways(&p, &travelling_trace(nt), true, &SolveOptions::default()).unwrap();
        sup_u_error(&f, |t, x| (x + t).sin())
    };
    let (e1, e2) = (err(400), err(800));
    assert!(e1 <= 5e-2, "{e1}");
    // At least first order; unit speed puts the feet on lattice points.
    assert!(e1 / e2 >= 1.6, "{e1} {e2}");

    let f = solve_cauchy_sideways(&p, &travelling_trace(400), true, &SolveOptions::default()).unwrap();
    let slice = extract_time_slice(&f, 0.25).unwrap();
    let (lo, hi) = slice.extent().unwrap();
    assert!(lo == 0.0 && (hi - 0.25).abs() < 0.01, "{lo} {hi}");
    for (x, s) in slice.x.iter().zip(&slice.states) {
        assert!((s.u - (x + 0.25).sin()).abs() < 5e-3);
    }
    let at_level = extract_time_slice(&f, f.grid().t(200)).unwrap();
    let row: Vec<_> = (0..=f.grid().nx).filter_map(|i| f.get(200, i)).collect();
    assert_eq!(at_level.states, row);
}

#[test]
fn zero_sideways_data_gives_zero_triangle() {
    let p = catalog("nonauto-sin").unwrap();
    let z = TimeSeries::new(0.0, 0.005, vec![0.0; 401]);
    let data = TracePair {
        side: Side::Right,
        a: z.clone(),
        b: z,
    };
    let f = solve_cauchy_sideways(&p, &data, false, &SolveOptions::default()).unwrap();
    assert_eq!(f.c1_norm(), 0.0);
    assert!(f.valid_count() > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sideways_data_only_influences_its_cone(cut in 60usize..340, bump in -1e-3f64..1e-3) {
        let p = catalog("quasilinear-small").unwrap();
        let nt = 400;
        let dt = 2.0 / nt as f64;
        let a = TimeSeries::from_fn(0.0, dt, nt + 1, |t| Ok(0.02 * (3.0 * t).sin())).unwrap();
        let b = TimeSeries::from_fn(0.0, dt, nt + 1, |t| Ok(0.01 * t.cos())).unwrap();
        let data = TracePair { side: Side::Left, a, b };
        let mut changed = data.clone();
        for j in cut..=nt {
            changed.b.values[j] += bump;
        }
        let o = SolveOptions::default();
        let f0 = solve_cauchy_sideways(&p, &data, false, &o).unwrap();
        let f1 = solve_cauchy_sideways(&p, &changed, false, &o).unwrap();
        let g = *f0.grid();
        // a' is a centred difference, so the perturbation of b reaches the
        // column at `cut` and spreads one level per column.
        for i in 0..=g.nx {
            for j in 0..cut.saturating_sub(i + 1) {
                prop_assert_eq!(f0.get(j, i), f1.get(j, i));
            }
        }
    }

    #[test]
    fn discrete_norm_is_monotone_in_order(values in proptest::collection::vec(-10.0f64..10.0, 4..40), step in 0.01f64..1.0) {
        let n0 = discrete_norm(&values, 0, step).unwrap();
        let n1 = discrete_norm(&values, 1, step).unwrap();
        let n2 = discrete_norm(&values, 2, step).unwrap();
        prop_assert!(n0 <= n1 && n1 <= n2);
    }

    #[test]
    fn speed_integral_is_monotone(t0 in -2.0f64..2.0, d1 in 0.01f64..3.0, extra in 0.0f64..3.0) {
        for name in ["nonauto-sin", "nonauto-decay", "autonomous-variable"] {
            let p = catalog(name).unwrap();
            let a = speed_integral(&p, t0, d1).unwrap();
            let b = speed_integral(&p, t0, d1 + extra).unwrap();
            prop_assert!(b >= a - 1e-12);
        }
    }
}

fn trace_round_trip(bc: BcSpec, phi: &str, side_bc_left: bool) -> f64 {
    let p = problem(|s| {
        if side_bc_left {
            s.bc_left = bc;
        } else {
            s.bc_right = bc;
        }
        s.phi = phi.into();
    });
    let f = run(&p, 1.0, 400, 200);
    let mut dev: f64 = 0.0;
    for side in [Side::Left, Side::Right] {
        let obs = extract_observation(&f, &p, side).unwrap();
        let tr = assemble_trace(&p, &obs).unwrap();
        let stored = stored_trace(&f, side).unwrap();
        // Level 0 holds the initial data, which need not match the boundary data.
        for j in 1..tr.a.len() {
            dev = dev
                .max((tr.a.values[j] - stored.a.values[j]).abs())
                .max((tr.b.values[j] - stored.b.values[j]).abs());
        }
    }
    dev
}

#[test]
fn assembled_traces_reproduce_stored_boundary_values() {
    let bump = "0.05*exp(-40*(x-0.5)^2)";
    assert_eq!(trace_round_trip(BcSpec::dirichlet("0"), "0.2*x*(1-x)", true), 0.0);
    assert_eq!(trace_round_trip(BcSpec::neumann("0"), bump, true), 0.0);
    assert_eq!(trace_round_trip(BcSpec::robin(0.5, "0"), bump, false), 0.0);
    let dissipative = trace_round_trip(BcSpec::dissipative(0.5, "0"), bump, true);
    assert!(dissipative < 1e-4, "{dissipative}");
}

#[test]
fn ratio_is_stable_under_grid_doubling() {
    let p = problem(|s| s.phi = "0.01*sin(3.141592653589793*x)".into());
    let r = |nx: usize| {
        let grid = Grid::new(0.0, 1.2, 2 * nx, 1.0, nx).unwrap();
        simulated_ratio(&p, &grid, Mode::TwoSided, &SolveOptions::default()).unwrap()
    };
    let (a, b) = (r(100), r(200));
    assert!((a - b).abs() <= 0.2 * a, "{a} {b}");
}

#[test]
fn right_observation_mirrors_left_observation() {
    let left = problem(|s| {
        s.bc_right = BcSpec::neumann("0");
        s.phi = "0.05*sin(1.5707963267948966*x)".into();
    });
    let right = problem(|s| {
        s.bc_left = BcSpec::neumann("0");
        s.phi = "0.05*sin(1.5707963267948966*(1-x))".into();
    });
    let nx = 100;
    let fl = run(&left, 2.2, 4 * nx, nx);
    let fr = run(&right, 2.2, 4 * nx, nx);
    let a = reconstruct_one_sided(&left, &extract_observation(&fl, &left, Side::Left).unwrap(), 2.2, &opts(nx)).unwrap();
    let b = reconstruct_one_sided_right(&right, &extract_observation(&fr, &right, Side::Right).unwrap(), 2.2, &opts(nx))
        .unwrap();
    assert_eq!(a.t_tilde.level, b.t_tilde.level);
    for i in 0..=nx {
        assert!((a.phi_hat[i] - b.phi_hat[nx - i]).abs() <= 1e-10, "{i}");
        assert!((a.psi_hat[i] - b.psi_hat[nx - i]).abs() <= 1e-10, "{i}");
    }
}

#[test]
fn reconstruction_error_contracts_along_a_ladder() {
    let p = catalog("linear-unit").unwrap();
    let mut last = f64::INFINITY;
    for nx in [50, 100, 200, 400] {
        let f = run(&p, 1.2, 2 * nx, nx);
        let l = extract_observation(&f, &p, Side::Left).unwrap();
        let r = extract_observation(&f, &p, Side::Right).unwrap();
        let res = reconstruct_two_sided(&p, &l, &r, 1.2, &opts(nx)).unwrap();
        let (a, b) = reconstruction_error(&p, &res).unwrap();
        assert!(a + b <= 1.1 * last, "nx={nx}: {} after {last}", a + b);
        last = a + b;
    }
}

#[test]
fn larger_windows_never_shrink_the_covered_set() {
    let p = catalog("autonomous-variable").unwrap();
    let mut previous = 0.0;
    for duration in [2.1, 2.3, 2.6, 3.0] {
        let f = Field::zeros(Grid::new(0.0, duration, (duration * 400.0) as usize, 1.0, 50).unwrap());
        let x1 = trace_curve(&p, &f, CurveLabel::X1).unwrap();
        let x2 = trace_curve(&p, &f, CurveLabel::X2).unwrap();
        let d = build_domain(x1, x2, DomainSide::Right).unwrap();
        let tt = find_t_tilde(&d, None, Mode::OneSided, 1.0).unwrap();
        let width = tt.s_interval.1 - tt.s_interval.0;
        assert!(width >= previous - 2.0 * duration / 400.0, "{duration}: {width} < {previous}");
        previous = width;
        for w in d.lower.samples.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let x = 0.5 * (w[0].1 + w[1].1);
            if w[1].1 < 1.0 {
                assert!((slope - (1.0 + x * (1.0 - x))).abs() < 1e-3);
            }
        }
    }
}
