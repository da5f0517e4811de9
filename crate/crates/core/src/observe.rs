//! Boundary observations, trace assembly, discrete C^k norms and the
//! observability ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::charsys::State;
use crate::error::{Error, Result};
use crate::exec::{try_map, Exec};
use crate::expr::{BinOp, Expression, Node};
use crate::hypersolve::{simulate, Field, Grid, SolveOptions};
use crate::obstime::Mode;
use crate::problem::{BcKind, Problem, Side};

/// A function of `t` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t_start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t_start: f64, step: f64, values: Vec<f64>) -> Self {
        TimeSeries { t_start, step, values }
    }

    pub fn from_fn(t_start: f64, step: f64, n: usize, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = (0..n)
            .map(|j| f(t_start + j as f64 * step))
            .collect::<Result<Vec<_>>>()?;
        Ok(TimeSeries::new(t_start, step, values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.step
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.len().saturating_sub(1))
    }

    /// Second-order derivative samples.
    pub fn derivative(&self) -> Result<TimeSeries> {
        Ok(TimeSeries::new(self.t_start, self.step, derivative(&self.values, self.step)?))
    }

    /// Samples `first..=last`.
    pub fn slice(&self, first: usize, last: usize) -> TimeSeries {
        TimeSeries::new(self.t(first), self.step, self.values[first..=last].to_vec())
    }

    fn same_sampling(&self, other: &TimeSeries) -> bool {
        self.len() == other.len()
            && (self.t_start - other.t_start).abs() <= 1e-12 * self.step
            && (self.step - other.step).abs() <= 1e-12 * self.step
    }
}

/// First derivative: central differences inside, second-order one-sided at
/// the ends (first-order when only two samples exist).
pub fn derivative(samples: &[f64], step: f64) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut out = vec![0.0; n];
    if n == 2 {
        let d = (samples[1] - samples[0]) / step;
        return Ok(vec![d, d]);
    }
    for i in 1..n - 1 {
        out[i] = (samples[i + 1] - samples[i - 1]) / (2.0 * step);
    }
    out[0] = (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * step);
    out[n - 1] = (3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / (2.0 * step);
    Ok(out)
}

pub fn second_derivative(samples: &[f64], step: f64) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let h2 = step * step;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (samples[i - 1] - 2.0 * samples[i] + samples[i + 1]) / h2;
    }
    if n == 3 {
        out[0] = out[1];
        out[2] = out[1];
    } else {
        let s = samples;
        out[0] = (2.0 * s[0] - 5.0 * s[1] + 4.0 * s[2] - s[3]) / h2;
        out[n - 1] = (2.0 * s[n - 1] - 5.0 * s[n - 2] + 4.0 * s[n - 3] - s[n - 4]) / h2;
    }
    Ok(out)
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Discrete C^order norm: the largest sup-norm among the derivatives of
/// order 0..=order.
pub fn discrete_norm(samples: &[f64], order: usize, step: f64) -> Result<f64> {
    if samples.len() < order + 1 || samples.is_empty() {
        return Err(Error::TooFewSamples {
            needed: order + 1,
            got: samples.len(),
        });
    }
    let mut norm = sup(samples);
    if order >= 1 {
        norm = norm.max(sup(&derivative(samples, step)?));
    }
    if order >= 2 {
        norm = norm.max(sup(&second_derivative(samples, step)?));
    }
    if order > 2 {
        return Err(Error::Invalid(format!("norm order {order} is not supported")));
    }
    Ok(norm)
}

/// Observed boundary record.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub side: Side,
    pub kind: BcKind,
    /// `u_x` for Dirichlet, `u` otherwise.
    pub k: TimeSeries,
    /// Norm order of the observation.
    pub order: usize,
}

/// Boundary values `(u, u_x) = (a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    pub side: Side,
    pub a: TimeSeries,
    pub b: TimeSeries,
}

pub fn extract_observation(field: &Field, p: &Problem, side: Side) -> Result<Observation> {
    let bc = p.bc(side);
    let grid = field.grid();
    let i = match side {
        Side::Left => 0,
        Side::Right => grid.nx,
    };
    let mut values = Vec::with_capacity(grid.nt + 1);
    for j in 0..=grid.nt {
        let s = field
            .get(j, i)
            .ok_or(Error::OutsideMask { t: grid.t(j), x: grid.x(i) })?;
        values.push(match bc.kind {
            BcKind::Dirichlet => s.v,
            _ => s.u,
        });
    }
    Ok(Observation {
        side,
        kind: bc.kind,
        k: TimeSeries::new(grid.t_start, grid.dt(), values),
        order: bc.observation_order(),
    })
}

/// The boundary function `h` of `side` sampled like `like`.
pub fn boundary_series(p: &Problem, side: Side, like: &TimeSeries) -> Result<TimeSeries> {
    TimeSeries::from_fn(like.t_start, like.step, like.len(), |t| p.boundary_value(side, t))
}

/// Combines an observation with the known boundary relation into the full
/// trace `(u, u_x)` on that side.
pub fn assemble_trace(p: &Problem, obs: &Observation) -> Result<TracePair> {
    let bc = p.bc(obs.side);
    if bc.kind != obs.kind {
        return Err(Error::Invalid(format!(
            "observation of a {} boundary assembled against a {} condition",
            obs.kind.name(),
            bc.kind.name()
        )));
    }
    let h = boundary_series(p, obs.side, &obs.k)?;
    let k = &obs.k;
    let (cu, cw) = bc.linear_coefficients();
    let (a, b) = match bc.kind {
        BcKind::Dirichlet => (h.values.clone(), k.values.clone()),
        BcKind::Neumann => (k.values.clone(), h.values.clone()),
        BcKind::Robin { .. } => {
            let b = k.values.iter().zip(&h.values).map(|(k, h)| h - cu * k).collect();
            (k.values.clone(), b)
        }
        BcKind::Dissipative { .. } => {
            let dk = derivative(&k.values, k.step)?;
            let b = dk.iter().zip(&h.values).map(|(dk, h)| h - cw * dk).collect();
            (k.values.clone(), b)
        }
    };
    Ok(TracePair {
        side: obs.side,
        a: TimeSeries::new(k.t_start, k.step, a),
        b: TimeSeries::new(k.t_start, k.step, b),
    })
}

/// Initial data sampled on the nodes of `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSamples {
    pub dx: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl InitialSamples {
    pub fn from_problem(p: &Problem, nx: usize) -> Result<Self> {
        let dx = p.length / nx as f64;
        let phi = (0..=nx).map(|i| p.phi(i as f64 * dx)).collect::<Result<_>>()?;
        let psi = (0..=nx).map(|i| p.psi(i as f64 * dx)).collect::<Result<_>>()?;
        Ok(InitialSamples { dx, phi, psi })
    }

    /// `||phi||_{C^2} + ||psi||_{C^1}`
    pub fn norm(&self) -> Result<f64> {
        Ok(discrete_norm(&self.phi, 2, self.dx)? + discrete_norm(&self.psi, 1, self.dx)?)
    }
}

/// A boundary function with its norm order.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryTerm<'a> {
    pub h: &'a TimeSeries,
    pub order: usize,
}

/// `||(phi, psi)||_{C^2 x C^1}` over the sum of the observation norms and
/// the boundary-function norms. Pair norms are sums. `0/0` is reported as 0.
pub fn observability_ratio(
    initial: &InitialSamples,
    observations: &[&Observation],
    boundary: &[BoundaryTerm<'_>],
) -> Result<f64> {
    let numerator = initial.norm()?;
    let mut denominator = 0.0;
    for obs in observations {
        denominator += discrete_norm(&obs.k.values, obs.order, obs.k.step)?;
    }
    for term in boundary {
        denominator += discrete_norm(&term.h.values, term.order, term.h.step)?;
    }
    if denominator == 0.0 {
        if numerator == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Unobservable { numerator });
    }
    Ok(numerator / denominator)
}

/// Ratio for a two-sided (both observations) or one-sided (the first
/// observation only) setup; both boundary functions always enter.
pub fn ratio_for_mode(
    p: &Problem,
    initial: &InitialSamples,
    first: &Observation,
    second: Option<&Observation>,
    mode: Mode,
) -> Result<f64> {
    let h_left = boundary_series(p, Side::Left, &first.k)?;
    let h_right = boundary_series(p, Side::Right, &first.k)?;
    let boundary = [
        BoundaryTerm {
            h: &h_left,
            order: p.bc_left.norm_order(),
        },
        BoundaryTerm {
            h: &h_right,
            order: p.bc_right.norm_order(),
        },
    ];
    let mut observations = vec![first];
    if mode == Mode::TwoSided {
        let second = second.ok_or_else(|| Error::Invalid("two-sided ratio needs both observations".into()))?;
        if !first.k.same_sampling(&second.k) {
            return Err(Error::WindowMismatch("observations are sampled differently".into()));
        }
        observations.push(second);
    }
    observability_ratio(initial, &observations, &boundary)
}

/// Forward-simulates `p` and returns its observability ratio.
pub fn simulated_ratio(p: &Problem, grid: &Grid, mode: Mode, opts: &SolveOptions) -> Result<f64> {
    let field = simulate(p, grid, opts)?;
    let initial = InitialSamples::from_problem(p, grid.nx)?;
    let left = extract_observation(&field, p, Side::Left)?;
    let right = extract_observation(&field, p, Side::Right)?;
    match mode {
        Mode::TwoSided => ratio_for_mode(p, &initial, &left, Some(&right), mode),
        Mode::OneSided => ratio_for_mode(p, &initial, &left, None, mode),
    }
}

fn scale_expr(e: &Expression, factor: f64) -> Expression {
    Expression::compile(Node::Binary(
        BinOp::Mul,
        Box::new(Node::Num(factor)),
        Box::new(e.root().clone()),
    ))
}

/// Multiplies `phi`, `psi`, `h` and `h_bar` by `factor`.
pub fn scale_data(p: &Problem, factor: f64) -> Problem {
    let mut q = p.clone();
    q.phi = scale_expr(&p.phi, factor);
    q.psi = scale_expr(&p.psi, factor);
    q.bc_left.h = scale_expr(&p.bc_left.h, factor);
    q.bc_right.h = scale_expr(&p.bc_right.h, factor);
    q
}

/// Random initial data: `sum_k a_k sin(k pi x / L)` for `phi` and `psi`,
/// `k = 1..=3`, `|a_k| <= amplitude / k^2`. Compatible with homogeneous
/// Dirichlet conditions.
pub fn random_sine_data(p: &Problem, amplitude: f64, rng: &mut impl Rng) -> Problem {
    let mut series = || {
        let mut node: Option<Node> = None;
        for k in 1..=3 {
            let coeff = rng.gen_range(-amplitude..=amplitude) / (k * k) as f64;
            let arg = Node::Binary(
                BinOp::Mul,
                Box::new(Node::Num(k as f64 * std::f64::consts::PI / p.length)),
                Box::new(Node::Var(crate::expr::Var::X)),
            );
            let term = Node::Binary(
                BinOp::Mul,
                Box::new(Node::Num(coeff)),
                Box::new(Node::Call(crate::expr::Func::Sin, Box::new(arg))),
            );
            node = Some(match node {
                None => term,
                Some(acc) => Node::Binary(BinOp::Add, Box::new(acc), Box::new(term)),
            });
        }
        Expression::compile(node.expect("three terms"))
    };
    let phi = series();
    let psi = series();
    p.clone().with_data(phi, psi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioStudy {
    pub ratios: Vec<f64>,
    pub max: f64,
}

/// Observability ratios for `trials` random small data sets drawn from a
/// seeded generator. Trials run under `opts.exec`; each trial solves
/// sequentially so the outcome does not depend on scheduling.
pub fn ratio_study(
    p: &Problem,
    grid: &Grid,
    mode: Mode,
    trials: usize,
    amplitude: f64,
    seed: u64,
    opts: &SolveOptions,
) -> Result<RatioStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems: Vec<Problem> = (0..trials).map(|_| random_sine_data(p, amplitude, &mut rng)).collect();
    let inner = SolveOptions {
        exec: Exec::Sequential,
        ..*opts
    };
    let ratios = try_map(opts.exec, trials, |i| simulated_ratio(&problems[i], grid, mode, &inner))?;
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(RatioStudy { ratios, max })
}

/// Boundary `(u, u_x)` stored in a field, for comparison with assembled
/// traces.
pub fn stored_trace(field: &Field, side: Side) -> Result<TracePair> {
    let grid = field.grid();
    let i = match side {
        Side::Left => 0,
        Side::Right => grid.nx,
    };
    let states: Vec<State> = (0..=grid.nt)
        .map(|j| field.get(j, i).ok_or(Error::OutsideMask { t: grid.t(j), x: grid.x(i) }))
        .collect::<Result<_>>()?;
    Ok(TracePair {
        side,
        a: TimeSeries::new(grid.t_start, grid.dt(), states.iter().map(|s| s.u).collect()),
        b: TimeSeries::new(grid.t_start, grid.dt(), states.iter().map(|s| s.v).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{catalog, catalog_spec, make_problem, BcSpec};
    use std::f64::consts::PI;

    fn series(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> TimeSeries {
        let step = t_end / (n - 1) as f64;
        TimeSeries::from_fn(0.0, step, n, |t| Ok(f(t))).unwrap()
    }

    #[test]
    fn norm_of_constant() {
        assert_eq!(discrete_norm(&[5.0; 10], 2, 0.1).unwrap(), 5.0);
    }

    #[test]
    fn norm_of_sine() {
        let s = series(f64::sin, 2.0 * PI, 6284);
        let n = discrete_norm(&s.values, 1, s.step).unwrap();
        assert!((n - 1.0).abs() < 1e-3, "{n}");
    }

    #[test]
    fn norm_needs_samples() {
        assert!(matches!(discrete_norm(&[1.0], 1, 0.1), Err(Error::TooFewSamples { .. })));
        assert!(matches!(discrete_norm(&[], 0, 0.1), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn norms_grow_with_order() {
        let s = series(|t| 0.3 * (3.0 * t).sin() + t * t, 1.5, 200);
        let n0 = discrete_norm(&s.values, 0, s.step).unwrap();
        let n1 = discrete_norm(&s.values, 1, s.step).unwrap();
        let n2 = discrete_norm(&s.values, 2, s.step).unwrap();
        assert!(n0 <= n1 && n1 <= n2);
    }

    #[test]
    fn derivative_is_second_order() {
        // Oracle: analytic derivative of t^3; error must drop ~4x per halving.
        let err = |n: usize| {
            let s = series(|t| t * t * t, 1.0, n);
            let d = derivative(&s.values, s.step).unwrap();
            d.iter()
                .enumerate()
                .map(|(j, d)| (d - 3.0 * s.t(j).powi(2)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(101) / err(201);
        assert!((3.6..4.4).contains(&ratio), "{ratio}");
        let s = series(|t| t * t * t, 1.0, 41);
        let dd = second_derivative(&s.values, s.step).unwrap();
        for (j, v) in dd.iter().enumerate() {
            assert!((v - 6.0 * s.t(j)).abs() < 1e-9);
        }
    }

    fn with_bc(bc: BcSpec) -> Problem {
        let mut s = catalog_spec("linear-unit").unwrap();
        s.bc_left = bc;
        make_problem(&s).unwrap()
    }

    #[test]
    fn trace_assembly_by_family() {
        let k = series(|_| 0.5, 1.0, 11);
        let mk = |p: &Problem, k: &TimeSeries| Observation {
            side: Side::Left,
            kind: p.bc_left.kind,
            k: k.clone(),
            order: p.bc_left.observation_order(),
        };

        let p = with_bc(BcSpec::dirichlet("0"));
        let tr = assemble_trace(&p, &mk(&p, &k)).unwrap();
        assert!(tr.a.values.iter().all(|&a| a == 0.0));
        assert_eq!(tr.b.values, k.values);

        let p = with_bc(BcSpec::robin(2.0, "0.1"));
        let tr = assemble_trace(&p, &mk(&p, &k)).unwrap();
        assert!(tr.b.values.iter().all(|&b| (b - 1.1).abs() < 1e-15));

        let p = with_bc(BcSpec::neumann("0.25"));
        let tr = assemble_trace(&p, &mk(&p, &k)).unwrap();
        assert_eq!(tr.a.values, k.values);
        assert!(tr.b.values.iter().all(|&b| b == 0.25));

        let p = with_bc(BcSpec::dissipative(1.0, "0"));
        let sq = series(|t| t * t, 1.0, 101);
        let tr = assemble_trace(&p, &mk(&p, &sq)).unwrap();
        for (j, b) in tr.b.values.iter().enumerate() {
            assert!((b - 2.0 * sq.t(j)).abs() < 1e-12, "{j}: {b}");
        }

        let wrong = Observation {
            kind: BcKind::Neumann,
            ..mk(&with_bc(BcSpec::dirichlet("0")), &k)
        };
        assert!(assemble_trace(&with_bc(BcSpec::dirichlet("0")), &wrong).is_err());
    }

    #[test]
    fn ratio_conventions() {
        let init = InitialSamples {
            dx: 0.1,
            phi: vec![0.0; 11],
            psi: vec![0.0; 11],
        };
        let k = series(|_| 0.0, 1.0, 11);
        let obs = Observation {
            side: Side::Left,
            kind: BcKind::Dirichlet,
            k: k.clone(),
            order: 1,
        };
        assert_eq!(observability_ratio(&init, &[&obs], &[]).unwrap(), 0.0);
        let nonzero = InitialSamples {
            phi: vec![1.0; 11],
            ..init
        };
        assert!(matches!(
            observability_ratio(&nonzero, &[&obs], &[BoundaryTerm { h: &k, order: 2 }]),
            Err(Error::Unobservable { .. })
        ));
    }

    #[test]
    fn ratio_is_invariant_under_joint_scaling() {
        let p = catalog("linear-unit").unwrap();
        let grid = Grid::new(0.0, 1.2, 96, 1.0, 40).unwrap();
        let opts = SolveOptions::default();
        let r = simulated_ratio(&p, &grid, Mode::TwoSided, &opts).unwrap();
        let r_half = simulated_ratio(&scale_data(&p, 0.5), &grid, Mode::TwoSided, &opts).unwrap();
        assert!(r.is_finite() && r > 0.0);
        assert!((r - r_half).abs() <= 1e-10 * r);
    }

    #[test]
    fn ratio_study_is_reproducible() {
        let p = catalog("linear-unit").unwrap();
        let grid = Grid::new(0.0, 1.2, 96, 1.0, 40).unwrap();
        let opts = SolveOptions::default();
        let a = ratio_study(&p, &grid, Mode::TwoSided, 6, 0.01, 3, &opts).unwrap();
        let seq = SolveOptions {
            exec: Exec::Sequential,
            ..opts
        };
        let b = ratio_study(&p, &grid, Mode::TwoSided, 6, 0.01, 3, &seq).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ratios.len(), 6);
    }
}
