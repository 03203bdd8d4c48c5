//! Uniform periodic grid on `[0, L)^3` and its Fourier wavenumber lattice.
//!
//! Storage order is x-fastest: flat index `(iz * N + iy) * N + ix`. Physical
//! coordinates use the centered convention `[-L/2, L/2)` wherever a ball
//! around the origin is involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct Grid {
    n: usize,
    l: f64,
}

/// Unvalidated mirror of [`Grid`]; deserialization funnels through
/// [`Grid::new`] so config files cannot smuggle in bad dimensions.
#[derive(Deserialize)]
struct RawGrid {
    n: usize,
    l: f64,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        Grid::new(raw.n, raw.l)
    }
}

impl Grid {
    /// Points per axis must be a power of two and at least 16; edge length
    /// must be positive and finite.
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 16 {
            return Err(Error::Grid(format!("N = {n} is below the minimum of 16")));
        }
        if !n.is_power_of_two() {
            return Err(Error::Grid(format!("N = {n} is not a power of two")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Grid(format!("box edge L = {l} must be positive")));
        }
        Ok(Grid { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Total number of grid points, `N^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `L / N`.
    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Volume element `(L / N)^3`.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h * h
    }

    pub fn volume(&self) -> f64 {
        self.l * self.l * self.l
    }

    /// Integer wavenumber for FFT bin `i`: `i` for `i <= N/2`, else `i - N`.
    pub fn wave_index(&self, i: usize) -> i64 {
        debug_assert!(i < self.n);
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Physical wavenumber `2*pi/L * wave_index(i)`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        TWO_PI / self.l * self.wave_index(i) as f64
    }

    /// Largest wavenumber magnitude representable per axis, `(N/2) * 2*pi/L`.
    pub fn max_wavenumber(&self) -> f64 {
        (self.n / 2) as f64 * TWO_PI / self.l
    }

    /// Flat storage index; x varies fastest.
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n + iy) * self.n + ix
    }

    /// Inverse of [`Grid::idx`].
    pub fn coords_of(&self, idx: usize) -> [usize; 3] {
        let ix = idx % self.n;
        let iy = (idx / self.n) % self.n;
        let iz = idx / (self.n * self.n);
        [ix, iy, iz]
    }

    /// Coordinate of axis index `i` in `[0, L)`.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Coordinate wrapped to the centered box `[-L/2, L/2)`.
    pub fn centered_coord(&self, i: usize) -> f64 {
        let x = self.coord(i);
        if x >= 0.5 * self.l {
            x - self.l
        } else {
            x
        }
    }

    /// Centered position vector of a flat index.
    pub fn centered_pos(&self, idx: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.coords_of(idx);
        [
            self.centered_coord(ix),
            self.centered_coord(iy),
            self.centered_coord(iz),
        ]
    }

    /// Minimum-image displacement `x - c` on the torus, component-wise.
    pub fn min_image(&self, x: [f64; 3], c: [f64; 3]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for a in 0..3 {
            let mut v = x[a] - c[a];
            v -= self.l * (v / self.l).round();
            d[a] = v;
        }
        d
    }

    /// Axis index range (inclusive start, exclusive end in unwrapped ints)
    /// whose centered coordinates fall within `[c - r, c + r]`. Returned as
    /// unwrapped indices; callers wrap with `rem_euclid(N)`.
    pub fn axis_range(&self, center: f64, radius: f64) -> std::ops::Range<i64> {
        let h = self.spacing();
        let lo = ((center - radius) / h).floor() as i64;
        let hi = ((center + radius) / h).ceil() as i64 + 1;
        lo..hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_minimal_pow2_grid() {
        let g = Grid::new(16, 1.0).unwrap();
        assert_eq!(g.n(), 16);
        assert_eq!(g.len(), 4096);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let err = Grid::new(17, 1.0).unwrap_err();
        assert!(err.to_string().contains("power of two"), "got: {err}");
    }

    #[test]
    fn rejects_small_and_nonpositive() {
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(32, 0.0).is_err());
        assert!(Grid::new(32, -2.0).is_err());
        assert!(Grid::new(32, f64::NAN).is_err());
    }

    #[test]
    fn wavenumber_lattice_matches_fft_convention() {
        // N = 64, L = 4*pi: base wavenumber 1/2, max magnitude 16 per axis.
        let g = Grid::new(64, 4.0 * std::f64::consts::PI).unwrap();
        assert!((g.wavenumber(1) - 0.5).abs() < 1e-15);
        assert!((g.wavenumber(63) + 0.5).abs() < 1e-15);
        assert_eq!(g.wave_index(32), 32);
        assert_eq!(g.wave_index(33), -31);
        assert!((g.max_wavenumber() - 16.0).abs() < 1e-15);
    }

    #[test]
    fn centered_coords_cover_half_open_box() {
        let g = Grid::new(16, 2.0).unwrap();
        let lo = (0..16).map(|i| g.centered_coord(i)).fold(f64::MAX, f64::min);
        let hi = (0..16).map(|i| g.centered_coord(i)).fold(f64::MIN, f64::max);
        assert_eq!(lo, -1.0);
        assert!(hi < 1.0);
    }

    #[test]
    fn min_image_wraps_across_boundary() {
        let g = Grid::new(16, 2.0).unwrap();
        let d = g.min_image([0.9, 0.0, 0.0], [-0.9, 0.0, 0.0]);
        assert!((d[0] + 0.2).abs() < 1e-15, "wrapped displacement, got {}", d[0]);
    }
}
