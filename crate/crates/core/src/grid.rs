//! Discretization grid and scalar fields on the annulus.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform periodic-by-reflecting grid: `theta_i = i·dθ` (periodic),
/// `z_j = -z_max + j·dz` with an odd row count so `z = 0` is a grid row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_theta: usize,
    pub n_z: usize,
    pub z_max: f64,
}

impl Grid {
    pub fn new(n_theta: usize, n_z: usize, z_max: f64) -> Result<Self> {
        if n_theta < 4 {
            return Err(Error::InvalidGrid(format!("n_theta = {n_theta} < 4")));
        }
        if n_z < 3 {
            return Err(Error::InvalidGrid(format!("n_z = {n_z} < 3")));
        }
        if n_z % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "n_z = {n_z} must be odd so the waist z = 0 is a grid row"
            )));
        }
        if !(z_max > 0.0) {
            return Err(Error::InvalidGrid(format!("z_max = {z_max} must be positive")));
        }
        Ok(Self { n_theta, n_z, z_max })
    }

    #[inline]
    pub fn d_theta(&self) -> f64 {
        std::f64::consts::TAU / self.n_theta as f64
    }

    #[inline]
    pub fn d_z(&self) -> f64 {
        2.0 * self.z_max / (self.n_z - 1) as f64
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        -self.z_max + self.d_z() * j as f64
    }

    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        self.d_theta() * i as f64
    }

    /// Index of the waist row `z = 0`.
    #[inline]
    pub fn waist_row(&self) -> usize {
        (self.n_z - 1) / 2
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_theta * self.n_z
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n_theta + i
    }

    /// Periodic wrap of a theta index offset.
    #[inline]
    pub fn wrap_theta(&self, i: isize) -> usize {
        i.rem_euclid(self.n_theta as isize) as usize
    }

    /// Fold a z coordinate into the domain by boundary reflection.
    #[inline]
    pub fn fold_z(&self, z: f64) -> f64 {
        let per = 4.0 * self.z_max;
        let mut y = (z + self.z_max).rem_euclid(per);
        if y > 2.0 * self.z_max {
            y = per - y;
        }
        y - self.z_max
    }

    /// Reflecting (mirror) z-row index.
    #[inline]
    pub fn mirror_z(&self, j: isize) -> usize {
        let per = 2 * (self.n_z as isize - 1);
        let j = j.rem_euclid(per);
        if j > self.n_z as isize - 1 {
            (per - j) as usize
        } else {
            j as usize
        }
    }
}

/// Real-valued function sampled on a [`Grid`]; row-major by z-row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        Self {
            grid,
            values: vec![v; grid.len()],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.grid.idx(i, j);
        self.values[idx] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// max - min over all nodes.
    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    /// max - min along the theta direction of row `j`.
    pub fn row_oscillation(&self, j: usize) -> f64 {
        let row = &self.values[self.grid.idx(0, j)..self.grid.idx(0, j) + self.grid.n_theta];
        let mx = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mn = row.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        mx - mn
    }

    pub fn row_mean(&self, j: usize) -> f64 {
        let row = &self.values[self.grid.idx(0, j)..self.grid.idx(0, j) + self.grid.n_theta];
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Add a constant in place.
    pub fn shift(&mut self, c: f64) {
        for v in &mut self.values {
            *v += c;
        }
    }
}
