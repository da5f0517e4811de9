use crate::charsys::State;
use crate::error::{Error, Result};
use crate::problem::SmallnessGuard;

pub const MIN_STEPS: usize = 8;

/// Uniform space-time lattice on `[t_start, t_end] x [0, length]` with `nt`
/// time steps and `nx` space steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t_start: f64,
    pub t_end: f64,
    pub nt: usize,
    pub length: f64,
    pub nx: usize,
}

impl Grid {
    pub fn new(t_start: f64, t_end: f64, nt: usize, length: f64, nx: usize) -> Result<Grid> {
        if nt < MIN_STEPS || nx < MIN_STEPS {
            return Err(Error::Invalid(format!(
                "grid needs at least {MIN_STEPS} steps per direction, got nt={nt}, nx={nx}"
            )));
        }
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::Invalid(format!("empty time window [{t_start}, {t_end}]")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Invalid(format!("length must be positive, got {length}")));
        }
        Ok(Grid {
            t_start,
            t_end,
            nt,
            length,
            nx,
        })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.nt as f64
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        if j == self.nt {
            self.t_end
        } else {
            self.t_start + j as f64 * self.dt()
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.length
        } else {
            i as f64 * self.dx()
        }
    }

    /// Level closest to `t`, if `t` lies in the window.
    pub fn nearest_level(&self, t: f64) -> Option<usize> {
        let q = (t - self.t_start) / self.dt();
        let tol = 1e-9;
        if q < -tol || q > self.nt as f64 + tol {
            return None;
        }
        Some((q.round().max(0.0) as usize).min(self.nt))
    }
}

/// States on a [`Grid`], with a validity mask (sideways solutions only fill
/// a determinate region).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<State>,
    mask: Vec<bool>,
    rows: Vec<Option<(usize, usize)>>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        let n = (grid.nt + 1) * (grid.nx + 1);
        Field::from_parts(grid, vec![State::ZERO; n], vec![true; n])
    }

    /// Row-major (`t` outer, `x` inner) values and mask. Each row's valid
    /// nodes must be contiguous.
    pub fn from_parts(grid: Grid, values: Vec<State>, mask: Vec<bool>) -> Field {
        let width = grid.nx + 1;
        assert_eq!(values.len(), (grid.nt + 1) * width);
        assert_eq!(mask.len(), values.len());
        let rows = mask
            .chunks(width)
            .map(|row| {
                let lo = row.iter().position(|&m| m)?;
                let hi = row.iter().rposition(|&m| m)?;
                Some((lo, hi))
            })
            .collect();
        Field {
            grid,
            values,
            mask,
            rows,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    fn idx(&self, j: usize, i: usize) -> usize {
        j * (self.grid.nx + 1) + i
    }

    pub fn is_valid(&self, j: usize, i: usize) -> bool {
        self.mask[self.idx(j, i)]
    }

    pub fn get(&self, j: usize, i: usize) -> Option<State> {
        let k = self.idx(j, i);
        self.mask[k].then(|| self.values[k])
    }

    pub fn row(&self, j: usize) -> &[State] {
        let w = self.grid.nx + 1;
        &self.values[j * w..(j + 1) * w]
    }

    /// First and last valid node of row `j`.
    pub fn row_range(&self, j: usize) -> Option<(usize, usize)> {
        self.rows[j]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Largest `|u|`, `|u_x|`, `|u_t|` over valid nodes.
    pub fn c1_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(0.0, |acc, (s, _)| acc.max(s.max_abs()))
    }

    pub fn guard(&self, epsilon: f64) -> SmallnessGuard {
        SmallnessGuard {
            epsilon,
            c1_bound: self.c1_norm(),
        }
    }

    fn sample_row(&self, j: usize, x: f64) -> Result<State> {
        let (lo, hi) = self.rows[j].ok_or(Error::OutsideMask { t: self.grid.t(j), x })?;
        let q = (x / self.grid.dx()).clamp(0.0, self.grid.nx as f64);
        let i0 = (q.floor() as usize).min(self.grid.nx - 1);
        if i0 >= lo && i0 < hi {
            let a = self.values[self.idx(j, i0)];
            let b = self.values[self.idx(j, i0 + 1)];
            return Ok(a.lerp(&b, q - i0 as f64));
        }
        let nearest = (q.round() as usize).clamp(lo, hi);
        Ok(self.values[self.idx(j, nearest)])
    }

    /// Bilinear interpolation. Off the mask, each of the two rows falls back
    /// to its nearest valid node.
    pub fn sample(&self, t: f64, x: f64) -> Result<State> {
        let g = &self.grid;
        let q = (t - g.t_start) / g.dt();
        let tol = 1e-9;
        if q < -tol || q > g.nt as f64 + tol {
            return Err(Error::OutsideWindow {
                t,
                start: g.t_start,
                end: g.t_end,
            });
        }
        let q = q.clamp(0.0, g.nt as f64);
        let j0 = (q.floor() as usize).min(g.nt - 1);
        let theta = q - j0 as f64;
        let a = self.sample_row(j0, x)?;
        if theta == 0.0 {
            return Ok(a);
        }
        let b = self.sample_row(j0 + 1, x)?;
        if theta == 1.0 {
            return Ok(b);
        }
        Ok(a.lerp(&b, theta))
    }
}

/// Valid nodes of a field at one time, interpolated linearly between the two
/// enclosing levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    pub t: f64,
    pub x: Vec<f64>,
    pub states: Vec<State>,
}

impl TimeSlice {
    /// `[x_first, x_last]` covered by the slice.
    pub fn extent(&self) -> Option<(f64, f64)> {
        Some((*self.x.first()?, *self.x.last()?))
    }
}

pub fn extract_time_slice(field: &Field, t: f64) -> Result<TimeSlice> {
    let g = &field.grid;
    let q = (t - g.t_start) / g.dt();
    let tol = 1e-9;
    if q < -tol || q > g.nt as f64 + tol {
        return Err(Error::OutsideWindow {
            t,
            start: g.t_start,
            end: g.t_end,
        });
    }
    let q = q.clamp(0.0, g.nt as f64);
    let near = q.round();
    let (j0, j1, theta) = if (q - near).abs() <= tol {
        let j = near as usize;
        (j, j, 0.0)
    } else {
        let j0 = q.floor() as usize;
        (j0, j0 + 1, q - j0 as f64)
    };
    let mut x = Vec::new();
    let mut states = Vec::new();
    for i in 0..=g.nx {
        if let (Some(a), Some(b)) = (field.get(j0, i), field.get(j1, i)) {
            x.push(g.x(i));
            states.push(if j0 == j1 { a } else { a.lerp(&b, theta) });
        }
    }
    if x.is_empty() {
        return Err(Error::OutsideMask { t, x: 0.0 });
    }
    Ok(TimeSlice { t, x, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_field() -> Field {
        let g = Grid::new(0.0, 1.0, 10, 2.0, 20).unwrap();
        let mut values = Vec::new();
        for j in 0..=g.nt {
            for i in 0..=g.nx {
                values.push(State::new(g.t(j) + 3.0 * g.x(i), 0.0, 0.0));
            }
        }
        let n = values.len();
        Field::from_parts(g, values, vec![true; n])
    }

    #[test]
    fn bilinear_sampling_is_exact_for_linear_data() {
        let f = linear_field();
        for &(t, x) in &[(0.0, 0.0), (0.37, 1.234), (1.0, 2.0), (0.999, 0.001)] {
            let s = f.sample(t, x).unwrap();
            assert!((s.u - (t + 3.0 * x)).abs() < 1e-12);
        }
        assert!(matches!(f.sample(1.5, 0.0), Err(Error::OutsideWindow { .. })));
    }

    #[test]
    fn masked_rows_fall_back_to_nearest_valid_node() {
        let g = Grid::new(0.0, 1.0, 8, 1.0, 8).unwrap();
        let values: Vec<State> = (0..81).map(|k| State::new(k as f64, 0.0, 0.0)).collect();
        let mut mask = vec![true; 81];
        mask[3..9].fill(false);
        let f = Field::from_parts(g, values, mask);
        assert_eq!(f.row_range(0), Some((0, 2)));
        assert_eq!(f.sample(0.0, 1.0).unwrap().u, 2.0);
        assert_eq!(f.sample(0.0, 0.3).unwrap().u, 2.0);
        assert_eq!(f.get(0, 3), None);
    }

    #[test]
    fn time_slice_between_levels() {
        let f = linear_field();
        let s = extract_time_slice(&f, 0.55).unwrap();
        assert_eq!(s.x.len(), 21);
        for (x, st) in s.x.iter().zip(&s.states) {
            assert!((st.u - (0.55 + 3.0 * x)).abs() < 1e-12);
        }
        assert!(extract_time_slice(&f, -0.2).is_err());
    }
}
