//! Scalar and vector samples on a periodic grid, with deterministic
//! integration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::reduce::{all_finite, det_dot, det_sum};

/// Real samples of one scalar on the full grid, x-fastest ordering.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_data(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Grid(format!(
                "scalar data length {} does not match grid {}^3",
                data.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, data })
    }

    /// Sample `f(x, y, z)` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> f64 + Sync) -> Self {
        let n = grid.n();
        let mut data = vec![0.0; grid.len()];
        data.par_chunks_mut(n * n).enumerate().for_each(|(iz, plane)| {
            let z = grid.coord(iz);
            for iy in 0..n {
                let y = grid.coord(iy);
                for ix in 0..n {
                    plane[iy * n + ix] = f(grid.coord(ix), y, z);
                }
            }
        });
        Self { grid, data }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Trapezoid-free periodic quadrature: cell volume times the sample sum.
    /// Spectrally accurate for smooth periodic integrands.
    pub fn integrate(&self) -> Result<f64> {
        if !all_finite(&self.data) {
            return Err(Error::Quadrature("integrand contains NaN or Inf".into()));
        }
        Ok(self.grid.cell_volume() * det_sum(&self.data))
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.integrate()? / self.grid.volume())
    }
}

/// Three scalar components sharing one grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            comps: [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]],
        }
    }

    pub fn from_components(grid: Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
        for (axis, c) in comps.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::Grid(format!(
                    "component {} length {} does not match grid {}^3",
                    axis,
                    c.len(),
                    grid.n()
                )));
            }
        }
        Ok(Self { grid, comps })
    }

    /// Sample `f(x, y, z) -> [vx, vy, vz]` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> [f64; 3] + Sync) -> Self {
        let n = grid.n();
        let len = grid.len();
        let mut out = Self::zeros(grid);
        let [c0, c1, c2] = &mut out.comps;
        let chunk = n * n;
        c0.par_chunks_mut(chunk)
            .zip(c1.par_chunks_mut(chunk))
            .zip(c2.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(iz, ((p0, p1), p2))| {
                let z = grid.coord(iz);
                for iy in 0..n {
                    let y = grid.coord(iy);
                    for ix in 0..n {
                        let v = f(grid.coord(ix), y, z);
                        let i = iy * n + ix;
                        p0[i] = v[0];
                        p1[i] = v[1];
                        p2[i] = v[2];
                    }
                }
            });
        debug_assert_eq!(out.comps[0].len(), len);
        out
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn comp(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn comp_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.comps[axis]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.comps
    }

    /// Pointwise squared magnitude |v|^2.
    pub fn norm_sq(&self) -> ScalarField {
        let data: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let a = self.comps[0][i];
                let b = self.comps[1][i];
                let c = self.comps[2][i];
                a * a + b * b + c * c
            })
            .collect();
        ScalarField { grid: self.grid, data }
    }

    /// Integral of |v|^2 over the box.
    pub fn energy_integral(&self) -> Result<f64> {
        for c in &self.comps {
            if !all_finite(c) {
                return Err(Error::Quadrature("integrand contains NaN or Inf".into()));
            }
        }
        let sum: f64 = self.comps.iter().map(|c| det_dot(c, c)).sum();
        Ok(self.grid.cell_volume() * sum)
    }

    /// L2 norm sqrt(integral |v|^2).
    pub fn l2_norm(&self) -> Result<f64> {
        Ok(self.energy_integral()?.sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| crate::reduce::max_abs(c)).fold(0.0, f64::max)
    }
}
