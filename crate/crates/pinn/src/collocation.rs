//! Training and test point sets.

use serde::{Deserialize, Serialize};

use crate::sobol::{sobol_1d, sobol_2d};
use crate::{PinnError, Result};

/// Space-time rectangle `[t0, t1] × [x0, x1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub t: [f64; 2],
    pub x: [f64; 2],
}

impl Default for Domain {
    fn default() -> Self {
        Self { t: [0.0, 1.0], x: [-1.0, 1.0] }
    }
}

impl Domain {
    pub fn map(&self, unit: [f64; 2]) -> [f64; 2] {
        [
            self.t[0] + (self.t[1] - self.t[0]) * unit[0],
            self.x[0] + (self.x[1] - self.x[0]) * unit[1],
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.t[0]..=self.t[1]).contains(&p[0]) && (self.x[0]..=self.x[1]).contains(&p[1])
    }
}

/// A point with a target value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub point: [f64; 2],
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CollocationSets {
    pub interior: Vec<[f64; 2]>,
    /// Both sides, `n_sb` points each.
    pub spatial_boundary: Vec<Target>,
    pub temporal_boundary: Vec<Target>,
    pub measurements: Vec<Target>,
}

/// Sizes of the PME point sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSizes {
    pub n_int: usize,
    pub n_sb: usize,
    pub n_tb: usize,
}

impl Default for SetSizes {
    fn default() -> Self {
        Self { n_int: 256, n_sb: 64, n_tb: 64 }
    }
}

impl CollocationSets {
    /// Sobol-sampled sets on `domain`. Boundary and initial targets come from
    /// `exact`. Interior points skip the origin of the sequence.
    pub fn pme(domain: Domain, sizes: SetSizes, exact: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if sizes.n_int == 0 || sizes.n_sb == 0 || sizes.n_tb == 0 {
            return Err(PinnError::Config("PME point sets must be nonempty".into()));
        }
        let interior = sobol_2d(sizes.n_int, 1).into_iter().map(|u| domain.map(u)).collect();
        let temporal_boundary = sobol_2d(sizes.n_tb, 0)
            .into_iter()
            .map(|u| {
                let p = domain.map([0.0, u[1]]);
                Target { point: p, value: exact(p[0], p[1]) }
            })
            .collect();
        let mut spatial_boundary = Vec::with_capacity(2 * sizes.n_sb);
        for side in [0.0, 1.0] {
            for u in sobol_2d(sizes.n_sb, 0) {
                let p = domain.map([u[0], side]);
                spatial_boundary.push(Target { point: p, value: exact(p[0], p[1]) });
            }
        }
        Ok(Self { interior, spatial_boundary, temporal_boundary, measurements: Vec::new() })
    }

    /// Adds an `nt × nx` tensor grid of measurements (endpoints included).
    pub fn with_grid_measurements(
        mut self,
        domain: Domain,
        nt: usize,
        nx: usize,
        measure: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if nt < 2 || nx < 2 {
            return Err(PinnError::Config("measurement grid needs at least 2 points per axis".into()));
        }
        for i in 0..nt {
            for j in 0..nx {
                let u = [i as f64 / (nt - 1) as f64, j as f64 / (nx - 1) as f64];
                let p = domain.map(u);
                self.measurements.push(Target { point: p, value: measure(p[0], p[1]) });
            }
        }
        Ok(self)
    }

    pub fn all_points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.interior
            .iter()
            .copied()
            .chain(self.spatial_boundary.iter().map(|t| t.point))
            .chain(self.temporal_boundary.iter().map(|t| t.point))
            .chain(self.measurements.iter().map(|t| t.point))
    }
}

/// Sampling rule for logistic collocation times.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Uniform,
    Sobol,
}

/// `n` times on `[a, b]`: evenly spaced with both endpoints, or the first
/// Sobol coordinate (skipping the origin).
pub fn times(a: f64, b: f64, n: usize, sampling: Sampling) -> Result<Vec<f64>> {
    if n == 0 || !(b > a) {
        return Err(PinnError::Config(format!("cannot place {n} points on [{a}, {b}]")));
    }
    Ok(match sampling {
        Sampling::Uniform if n == 1 => vec![a],
        Sampling::Uniform => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        Sampling::Sobol => sobol_1d(n, 1).into_iter().map(|s| a + (b - a) * s).collect(),
    })
}

/// `n` Sobol test points on `domain`, disjoint from the training prefix.
pub fn test_points(domain: Domain, n: usize) -> Vec<[f64; 2]> {
    sobol_2d(n, 1 << 12).into_iter().map(|u| domain.map(u)).collect()
}
