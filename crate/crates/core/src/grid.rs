use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform partition of `[a, b]` into `n` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D<T> {
    pub a: T,
    pub b: T,
    pub n: usize,
    pub h: T,
}

impl<T: Real> Grid1D<T> {
    pub fn new(a: T, b: T, n: usize) -> Result<Self> {
        if !(b > a) || n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid needs b > a and n >= 1 (a={a:?}, b={b:?}, n={n})"
            )));
        }
        Ok(Self { a, b, n, h: (b - a) / T::from_usize(n) })
    }

    /// Grid with spacing as close as possible to `h`.
    pub fn with_spacing(a: T, b: T, h: T) -> Result<Self> {
        let n = ((b - a) / h).round().to_usize().unwrap_or(0);
        Self::new(a, b, n)
    }

    /// Number of points, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Point `i`; the last point is returned as `b` exactly.
    #[inline]
    pub fn point(&self, i: usize) -> T {
        if i == self.n {
            self.b
        } else {
            self.a + T::from_usize(i) * self.h
        }
    }

    pub fn points(&self) -> Vec<T> {
        (0..=self.n).map(|i| self.point(i)).collect()
    }

    /// Interior points `1..n`.
    pub fn interior(&self) -> Vec<T> {
        (1..self.n).map(|i| self.point(i)).collect()
    }
}

/// Status flags attached by the solver that produced a field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldStatus {
    /// A non-finite value appeared; rows after `diverged_at` are NaN.
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    /// Time steps whose Newton loop hit its iteration cap.
    pub stalled_steps: Vec<usize>,
    /// Newton iterations per time step (implicit solvers only).
    pub newton_iterations: Vec<usize>,
}

/// `u(t, x)` on a tensor grid, one row per time level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field2D<T> {
    pub t_grid: Grid1D<T>,
    pub x_grid: Grid1D<T>,
    pub values: Vec<T>,
    pub status: FieldStatus,
}

impl<T: Real> Field2D<T> {
    pub fn zeros(t_grid: Grid1D<T>, x_grid: Grid1D<T>) -> Self {
        Self {
            values: vec![T::zero(); t_grid.len() * x_grid.len()],
            t_grid,
            x_grid,
            status: FieldStatus::default(),
        }
    }

    pub fn from_fn(t_grid: Grid1D<T>, x_grid: Grid1D<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut field = Self::zeros(t_grid, x_grid);
        for k in 0..t_grid.len() {
            let t = t_grid.point(k);
            for (i, v) in field.row_mut(k).iter_mut().enumerate() {
                *v = f(t, x_grid.point(i));
            }
        }
        field
    }

    pub fn n_rows(&self) -> usize {
        self.t_grid.len()
    }

    pub fn n_cols(&self) -> usize {
        self.x_grid.len()
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> T {
        self.values[k * self.n_cols() + i]
    }

    pub fn row(&self, k: usize) -> &[T] {
        let c = self.n_cols();
        &self.values[k * c..(k + 1) * c]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [T] {
        let c = self.n_cols();
        &mut self.values[k * c..(k + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Marks the field divergent from row `k` on and fills the remainder with NaN.
    pub fn mark_diverged(&mut self, k: usize) {
        self.status.diverged = true;
        self.status.diverged_at = Some(k);
        let c = self.n_cols();
        for v in &mut self.values[k * c..] {
            *v = T::nan();
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.t_grid == other.t_grid && self.x_grid == other.x_grid
    }
}

/// Samples `(t_i, y_i)` with strictly increasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> TimeSeries<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(T, T)> {
        Some((*self.times.last()?, *self.values.last()?))
    }

    /// Sub-series over the index range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self { times: self.times[range.clone()].to_vec(), values: self.values[range].to_vec() }
    }
}
