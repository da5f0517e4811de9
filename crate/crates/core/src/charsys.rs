//! First-order reduction `U = (u, u_x, u_t)`, the characteristic variables
//! `v1 = c v + w`, `v2 = u`, `v3 = -c v + w`, and boundary resolution in
//! characteristic form.
//!
//! `v1` travels with speed `-c`, `v3` with `+c` and `v2` along the vertical
//! characteristic. At `x = 0` a forward-in-time solve knows `v1` from the
//! interior and must recover `v3` from the boundary relation; at `x = L` it
//! is the other way round. Time-reversed solves swap the roles.

use crate::error::{Error, Result};
use crate::problem::{BcKind, BoundaryCondition, Problem, Side};

pub const FIXED_POINT_MAX_ITER: usize = 50;
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
/// `|beta - 1/c|` below which a dissipative boundary cannot be solved for
/// its outgoing variable.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub u: f64,
    /// `u_x`
    pub v: f64,
    /// `u_t`
    pub w: f64,
}

impl State {
    pub const ZERO: State = State { u: 0.0, v: 0.0, w: 0.0 };

    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        State { u, v, w }
    }

    #[inline]
    pub fn lerp(&self, other: &State, theta: f64) -> State {
        let a = 1.0 - theta;
        State {
            u: a * self.u + theta * other.u,
            v: a * self.v + theta * other.v,
            w: a * self.w + theta * other.w,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.abs().max(self.v.abs()).max(self.w.abs())
    }

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CharState {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl CharState {
    pub const fn new(v1: f64, v2: f64, v3: f64) -> Self {
        CharState { v1, v2, v3 }
    }

    /// Transform with a given speed.
    #[inline]
    pub fn with_speed(s: &State, c: f64) -> Self {
        CharState {
            v1: c * s.v + s.w,
            v2: s.u,
            v3: -c * s.v + s.w,
        }
    }
}

pub fn eigenvalues(p: &Problem, t: f64, x: f64, s: &State) -> Result<[f64; 3]> {
    let c = p.positive_speed(t, x, s)?;
    Ok([-c, 0.0, c])
}

pub fn to_characteristic(p: &Problem, t: f64, x: f64, s: &State) -> Result<CharState> {
    let c = p.speed(t, x, s)?;
    Ok(CharState::with_speed(s, c))
}

/// Inverse of [`to_characteristic`]. When `c` depends on `u_x` the relation
/// `v = (v1 - v3) / (2 c(t,x,u,v,w))` is solved by damped fixed-point
/// iteration; failure to converge means the state left the small-data
/// regime.
pub fn from_characteristic(p: &Problem, t: f64, x: f64, cs: &CharState) -> Result<State> {
    let u = cs.v2;
    let w = 0.5 * (cs.v1 + cs.v3);
    let half_diff = 0.5 * (cs.v1 - cs.v3);
    let map = |v: f64| -> Result<f64> {
        let c = p.positive_speed(t, x, &State::new(u, v, w))?;
        Ok(half_diff / c)
    };
    let mut v = map(0.0)?;
    let mut damping = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let g = map(v)?;
        let r = (g - v).abs();
        if r <= 1e-15 * v.abs().max(1e-300) || r == 0.0 {
            return Ok(State::new(u, g, w));
        }
        if r > residual {
            damping *= 0.5;
        }
        residual = r;
        v += damping * (g - v);
    }
    Err(Error::NoConvergence {
        what: "characteristic inversion",
        iterations: FIXED_POINT_MAX_ITER,
        residual,
    })
}

/// The characteristic variable already known at a boundary node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Known {
    V1(f64),
    V3(f64),
}

impl Known {
    fn sign_and_value(self) -> (f64, f64) {
        match self {
            Known::V1(k) => (1.0, k),
            Known::V3(k) => (-1.0, k),
        }
    }
}

/// Fails when the dissipative relation cannot be solved for the unknown
/// characteristic variable, i.e. `beta = 1/c(t, side, 0, 0, 0)` on the side
/// where the known variable is the incoming one of the forward problem.
pub fn check_degeneracy(p: &Problem, bc: &BoundaryCondition, t: f64, known: Known) -> Result<()> {
    let BcKind::Dissipative { beta } = bc.kind else {
        return Ok(());
    };
    let resolving = matches!(
        (bc.side, known),
        (Side::Right, Known::V1(_)) | (Side::Left, Known::V3(_))
    );
    if !resolving {
        return Ok(());
    }
    let x = p.side_x(bc.side);
    let inv_c = 1.0 / p.positive_speed(t, x, &State::ZERO)?;
    if (beta - inv_c).abs() < DEGENERACY_TOL {
        return Err(Error::Degenerate {
            side: bc.side,
            t,
            beta,
            inv_c,
        });
    }
    Ok(())
}

/// Resolves the full boundary state from the known characteristic variable
/// and the physical boundary relation.
///
/// `u` is the displacement carried by the vertical characteristic; it is
/// ignored for Dirichlet, where `u = h` and `u_t = h'` are pinned. The single
/// remaining unknown (`u_x` for Dirichlet, `u_t` otherwise) is found by
/// scalar Newton iteration.
pub fn boundary_state(
    p: &Problem,
    bc: &BoundaryCondition,
    t: f64,
    known: Known,
    u: f64,
    h_val: f64,
    h_deriv: f64,
) -> Result<State> {
    check_degeneracy(p, bc, t, known)?;
    let x = p.side_x(bc.side);
    let (sign, k) = known.sign_and_value();
    let (cu, cw) = bc.linear_coefficients();
    let dirichlet = matches!(bc.kind, BcKind::Dirichlet);
    let state_of = |z: f64| -> State {
        if dirichlet {
            State::new(h_val, z, h_deriv)
        } else {
            State::new(u, h_val - cu * u - cw * z, z)
        }
    };
    let residual = |z: f64| -> Result<f64> {
        let s = state_of(z);
        let c = p.positive_speed(t, x, &s)?;
        Ok(sign * c * s.v + s.w - k)
    };

    let c0 = p.positive_speed(t, x, &state_of(0.0))?;
    let mut z = if dirichlet {
        sign * (k - h_deriv) / c0
    } else {
        // Exact when c is constant.
        (k - sign * c0 * (h_val - cu * u)) / (1.0 - sign * c0 * cw)
    };
    let mut g = residual(z)?;
    for _ in 0..NEWTON_MAX_ITER {
        if g == 0.0 {
            return Ok(state_of(z));
        }
        let delta = 1e-7 * z.abs().max(1.0);
        let slope = (residual(z + delta)? - residual(z - delta)?) / (2.0 * delta);
        if !(slope.abs() > 1e-14) {
            break;
        }
        let step = g / slope;
        z -= step;
        g = residual(z)?;
        if step.abs() <= NEWTON_TOL * z.abs().max(1.0) {
            return Ok(state_of(z));
        }
    }
    Err(Error::NoConvergence {
        what: "boundary Newton iteration",
        iterations: NEWTON_MAX_ITER,
        residual: g.abs(),
    })
}

/// Like [`boundary_state`], returning the characteristic variables.
pub fn boundary_resolve(
    p: &Problem,
    bc: &BoundaryCondition,
    t: f64,
    known: Known,
    u: f64,
    h_val: f64,
    h_deriv: f64,
) -> Result<CharState> {
    let s = boundary_state(p, bc, t, known, u, h_val, h_deriv)?;
    to_characteristic(p, t, p.side_x(bc.side), &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::problem::{catalog, catalog_spec, make_problem, BcSpec, CATALOG_NAMES};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn with_speed(c: &str) -> Problem {
        let mut s = catalog_spec("linear-unit").unwrap();
        s.c = c.into();
        make_problem(&s).unwrap()
    }

    #[test]
    fn eigenvalues_are_ordered() {
        let p = catalog("linear-unit").unwrap();
        assert_eq!(eigenvalues(&p, 0.3, 0.2, &State::new(0.1, 0.2, 0.3)).unwrap(), [-1.0, 0.0, 1.0]);
        let p = catalog("nonauto-sin").unwrap();
        assert_eq!(eigenvalues(&p, 0.0, 0.5, &State::ZERO).unwrap(), [-2.0, 0.0, 2.0]);
        let p = catalog("quasilinear-small").unwrap();
        assert!(matches!(
            eigenvalues(&p, 0.0, 0.5, &State::new(-20.0, 0.0, 0.0)),
            Err(Error::NonPositiveSpeed { .. })
        ));
    }

    #[test]
    fn transform_examples() {
        let p = with_speed("2");
        assert_eq!(to_characteristic(&p, 0.0, 0.0, &State::ZERO).unwrap(), CharState::default());
        let cs = to_characteristic(&p, 0.0, 0.0, &State::new(0.0, 1.0, 3.0)).unwrap();
        assert_eq!(cs, CharState::new(5.0, 0.0, 1.0));
        assert_eq!(from_characteristic(&p, 0.0, 0.0, &cs).unwrap(), State::new(0.0, 1.0, 3.0));
        assert_eq!(from_characteristic(&p, 0.0, 0.0, &CharState::default()).unwrap(), State::ZERO);

        let p = catalog("quasilinear-small").unwrap();
        let cs = to_characteristic(&p, 0.0, 0.0, &State::new(1.0, 2.0, 0.0)).unwrap();
        assert!((cs.v1 - 2.2).abs() < 1e-15 && cs.v2 == 1.0 && (cs.v3 + 2.2).abs() < 1e-15);
    }

    #[test]
    fn inversion_with_gradient_dependent_speed() {
        let p = with_speed("1 + 0.1*v");
        let s = State::new(0.0, 1.0, 0.0);
        let cs = to_characteristic(&p, 0.0, 0.0, &s).unwrap();
        assert!((cs.v1 - 1.1).abs() < 1e-15);
        let back = from_characteristic(&p, 0.0, 0.0, &cs).unwrap();
        assert!((back.v - 1.0).abs() < 1e-12 && back.u == 0.0 && back.w == 0.0);
    }

    #[test]
    fn inversion_failure_is_reported() {
        // v = 5 exp(v) has no solution.
        let p = with_speed("exp(-v)");
        assert!(from_characteristic(&p, 0.0, 0.0, &CharState::new(5.0, 0.0, -5.0)).is_err());
    }

    #[test]
    fn round_trip_on_random_small_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut speeds: Vec<Problem> = CATALOG_NAMES.iter().map(|n| catalog(n).unwrap()).collect();
        speeds.push(with_speed("1 + 0.2*v - 0.1*w + 0.1*u"));
        for p in &speeds {
            for _ in 0..10_000 {
                let s = State::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
                let (t, x) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..1.0));
                let cs = to_characteristic(p, t, x, &s).unwrap();
                let c = p.speed(t, x, &s).unwrap();
                assert!((cs.v1 + cs.v3 - 2.0 * s.w).abs() <= 1e-15);
                assert!((cs.v1 - cs.v3 - 2.0 * c * s.v).abs() <= 1e-15);
                let back = from_characteristic(p, t, x, &cs).unwrap();
                assert!((back.u - s.u).abs() <= 1e-12);
                assert!((back.v - s.v).abs() <= 1e-12);
                assert!((back.w - s.w).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_resolution() {
        let p = catalog("linear-unit").unwrap();
        let cs = boundary_resolve(&p, &p.bc_left, 0.0, Known::V1(0.4), 0.0, 0.0, 0.0).unwrap();
        assert_eq!(cs, CharState::new(0.4, 0.0, -0.4));
        assert_eq!(cs.v1 + cs.v3, 0.0);
    }

    #[test]
    fn neumann_resolution() {
        let mut s = catalog_spec("linear-unit").unwrap();
        s.bc_left = BcSpec::neumann("0.1");
        let p = make_problem(&s).unwrap();
        let cs = boundary_resolve(&p, &p.bc_left, 0.0, Known::V1(0.7), 0.0, 0.1, 0.0).unwrap();
        assert!((cs.v3 - (0.7 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_dissipative_boundary() {
        let mut s = catalog_spec("nonauto-sin").unwrap();
        // c(0, L, 0, 0, 0) = 2.
        s.bc_right = BcSpec::dissipative(0.5, "0");
        s.bc_left = BcSpec::dissipative(0.5, "0");
        let p = make_problem(&s).unwrap();
        assert!(matches!(
            boundary_state(&p, &p.bc_right, 0.0, Known::V1(0.1), 0.0, 0.0, 0.0),
            Err(Error::Degenerate { side: Side::Right, .. })
        ));
        assert!(matches!(
            boundary_state(&p, &p.bc_left, 0.0, Known::V3(0.1), 0.0, 0.0, 0.0),
            Err(Error::Degenerate { side: Side::Left, .. })
        ));
        // The forward directions never degenerate.
        assert!(boundary_state(&p, &p.bc_right, 0.0, Known::V3(0.1), 0.0, 0.0, 0.0).is_ok());
        assert!(boundary_state(&p, &p.bc_left, 0.0, Known::V1(0.1), 0.0, 0.0, 0.0).is_ok());
        // Away from the degenerate time the reversed direction is fine.
        assert!(boundary_state(&p, &p.bc_right, 1.0, Known::V1(0.1), 0.0, 0.0, 0.0).is_ok());
    }

    fn relation_residual(bc: &BoundaryCondition, s: &State, h: f64, hd: f64) -> f64 {
        match bc.kind {
            BcKind::Dirichlet => (s.u - h).abs().max((s.w - hd).abs()),
            _ => {
                let (cu, cw) = bc.linear_coefficients();
                (s.v + cu * s.u + cw * s.w - h).abs()
            }
        }
    }

    proptest! {
        #[test]
        fn resolved_states_satisfy_the_boundary_relation(
            family in 0usize..4,
            right in any::<bool>(),
            forward in any::<bool>(),
            k in -0.2f64..0.2,
            u in -0.1f64..0.1,
            h in -0.05f64..0.05,
            hd in -0.05f64..0.05,
            t in 0.0f64..2.0,
        ) {
            let side = if right { Side::Right } else { Side::Left };
            let kind = [
                BcKind::Dirichlet,
                BcKind::Neumann,
                BcKind::Robin { alpha: 1.3 },
                BcKind::Dissipative { beta: 0.4 },
            ][family];
            let p = with_speed("1 + 0.1*u + 0.05*v + 0.2*sin(t)");
            let bc = BoundaryCondition::new(side, kind, Expression::constant(0.0)).unwrap();
            let known = match (side, forward) {
                (Side::Left, true) | (Side::Right, false) => Known::V1(k),
                _ => Known::V3(k),
            };
            let s = boundary_state(&p, &bc, t, known, u, h, hd).unwrap();
            prop_assert!(relation_residual(&bc, &s, h, hd) <= 1e-10);
            let cs = to_characteristic(&p, t, p.side_x(side), &s).unwrap();
            let got = match known { Known::V1(_) => cs.v1, Known::V3(_) => cs.v3 };
            prop_assert!((got - k).abs() <= 1e-10);
        }
    }
}
