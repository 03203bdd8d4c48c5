//! Spectral-space calculus on the periodic grid: derivatives, solenoidal
//! projection, Poisson inversion, and the 2/3-rule dealias mask.
//!
//! Odd-order derivative operators zero the Nyquist plane of the involved
//! axis: that mode carries cos-only content whose derivative is not
//! representable, and keeping it would break conjugate symmetry.

use num_complex::Complex;
use rayon::prelude::*;

use crate::fft;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

/// Spectral coefficients of one scalar, same layout as the sample grid.
pub type Spectrum = Vec<Complex<f64>>;

/// Wavevector of linear index `i`, Nyquist mapped to `-N/2`.
#[inline]
pub fn wavevec(grid: Grid, i: usize) -> [f64; 3] {
    let [ix, iy, iz] = grid.coords_of(i);
    [grid.wavenumber(ix), grid.wavenumber(iy), grid.wavenumber(iz)]
}

#[inline]
fn is_nyquist(grid: Grid, axis_index: usize) -> bool {
    axis_index == grid.n() / 2
}

/// d/dx_axis in spectral space, Nyquist zeroed.
pub fn deriv_spec(grid: Grid, spec: &[Complex<f64>], axis: usize) -> Spectrum {
    debug_assert_eq!(spec.len(), grid.len());
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let coords = grid.coords_of(i);
            if is_nyquist(grid, coords[axis]) {
                Complex::default()
            } else {
                let k = grid.wavenumber(coords[axis]);
                Complex::new(0.0, k) * spec[i]
            }
        })
        .collect()
}

/// Multiply by -|k|^2 (Laplacian).
pub fn laplacian_spec(grid: Grid, spec: &mut [Complex<f64>]) {
    spec.par_iter_mut().enumerate().for_each(|(i, v)| {
        let [kx, ky, kz] = wavevec(grid, i);
        *v *= -(kx * kx + ky * ky + kz * kz);
    });
}

/// Project onto divergence-free fields: u -= k (k.u)/|k|^2, mean untouched.
pub fn project_spec(grid: Grid, comps: &mut [Spectrum; 3]) {
    let len = grid.len();
    let (c0, rest) = comps.split_at_mut(1);
    let (c1, c2) = rest.split_at_mut(1);
    let (c0, c1, c2) = (&mut c0[0], &mut c1[0], &mut c2[0]);
    c0.par_iter_mut()
        .zip(c1.par_iter_mut())
        .zip(c2.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((v0, v1), v2))| {
            let [kx, ky, kz] = wavevec(grid, i);
            let k2 = kx * kx + ky * ky + kz * kz;
            if k2 == 0.0 {
                return;
            }
            let kdotu = (*v0 * kx + *v1 * ky + *v2 * kz) / k2;
            *v0 -= kdotu * kx;
            *v1 -= kdotu * ky;
            *v2 -= kdotu * kz;
        });
    debug_assert_eq!(c0.len(), len);
}

/// Curl in spectral space, Nyquist planes zeroed per differentiated axis.
pub fn curl_spec(grid: Grid, comps: &[Spectrum; 3]) -> [Spectrum; 3] {
    let dyw = deriv_spec(grid, &comps[2], 1);
    let dzv = deriv_spec(grid, &comps[1], 2);
    let dzu = deriv_spec(grid, &comps[0], 2);
    let dxw = deriv_spec(grid, &comps[2], 0);
    let dxv = deriv_spec(grid, &comps[1], 0);
    let dyu = deriv_spec(grid, &comps[0], 1);
    let sub = |a: Spectrum, b: Spectrum| -> Spectrum {
        a.into_par_iter().zip(b).map(|(x, y)| x - y).collect()
    };
    [sub(dyw, dzv), sub(dzu, dxw), sub(dxv, dyu)]
}

/// Zero every mode outside the 2/3 dealias ball: |n_i| > floor(N/3) on any
/// axis is discarded, Nyquist included.
pub fn dealias_spec(grid: Grid, spec: &mut [Complex<f64>]) {
    let keep = grid.n() as i64 / 3;
    spec.par_iter_mut().enumerate().for_each(|(i, v)| {
        let [ix, iy, iz] = grid.coords_of(i);
        let out = grid.wave_index(ix).abs() > keep
            || grid.wave_index(iy).abs() > keep
            || grid.wave_index(iz).abs() > keep;
        if out {
            *v = Complex::default();
        }
    });
}

/// Gradient of a real scalar field.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid();
    let spec = fft::forward_real(grid, f.data());
    let comps = [0, 1, 2].map(|axis| {
        let d = deriv_spec(grid, &spec, axis);
        fft::inverse_to_real(grid, &d)
    });
    VectorField::from_components(grid, comps).expect("derivative preserves length")
}

/// Divergence of a real vector field.
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid();
    let mut acc = vec![Complex::default(); grid.len()];
    for axis in 0..3 {
        let spec = fft::forward_real(grid, v.comp(axis));
        let d = deriv_spec(grid, &spec, axis);
        acc.par_iter_mut().zip(d).for_each(|(a, x)| *a += x);
    }
    ScalarField::from_data(grid, fft::inverse_to_real(grid, &acc))
        .expect("derivative preserves length")
}

/// Curl of a real vector field.
pub fn curl(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let spec = [0, 1, 2].map(|axis| fft::forward_real(grid, v.comp(axis)));
    let c = curl_spec(grid, &spec);
    let comps = c.map(|s| fft::inverse_to_real(grid, &s));
    VectorField::from_components(grid, comps).expect("curl preserves length")
}

/// Laplacian of a real scalar field.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let mut spec = fft::forward_real(grid, f.data());
    laplacian_spec(grid, &mut spec);
    ScalarField::from_data(grid, fft::inverse_to_real(grid, &spec))
        .expect("laplacian preserves length")
}

/// Project a real vector field onto its divergence-free part.
pub fn project_solenoidal(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let mut spec = [0, 1, 2].map(|axis| fft::forward_real(grid, v.comp(axis)));
    project_spec(grid, &mut spec);
    let comps = [0, 1, 2].map(|axis| fft::inverse_to_real(grid, &spec[axis]));
    VectorField::from_components(grid, comps).expect("projection preserves length")
}

/// Solve `laplacian(p) = rhs` with zero-mean `p`. The rhs mean is discarded
/// (it must vanish for solvability on the torus; ours do by construction).
pub fn poisson_zero_mean(rhs: &ScalarField) -> ScalarField {
    let grid = rhs.grid();
    let mut spec = fft::forward_real(grid, rhs.data());
    spec.par_iter_mut().enumerate().for_each(|(i, v)| {
        let [kx, ky, kz] = wavevec(grid, i);
        let k2 = kx * kx + ky * ky + kz * kz;
        if k2 == 0.0 {
            *v = Complex::default();
        } else {
            *v /= -k2;
        }
    });
    ScalarField::from_data(grid, fft::inverse_to_real(grid, &spec))
        .expect("poisson preserves length")
}

/// Physical energy per integer wavenumber shell. Entries sum to the energy
/// integral of the field (Parseval), index = shell number.
pub fn shell_energy_spectrum(v: &VectorField) -> Vec<f64> {
    let grid = v.grid();
    let spec = [0, 1, 2].map(|axis| fft::forward_real(grid, v.comp(axis)));
    let parseval = grid.volume() / (grid.len() as f64).powi(2);
    let mut shells = Vec::new();
    for i in 0..grid.len() {
        let [ix, iy, iz] = grid.coords_of(i);
        let n = [grid.wave_index(ix), grid.wave_index(iy), grid.wave_index(iz)];
        let s = crate::gen::shell_of(n) as usize;
        if s >= shells.len() {
            shells.resize(s + 1, 0.0);
        }
        let e: f64 = spec.iter().map(|c| c[i].norm_sqr()).sum();
        shells[s] += parseval * e;
    }
    shells
}

/// max |div v| scaled by (max wavenumber * max |v|); dimensionless residual
/// for solenoidality checks.
pub fn relative_divergence(v: &VectorField) -> f64 {
    let scale = v.grid().max_wavenumber() * v.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    crate::reduce::max_abs(divergence(v).data()) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TWO_PI;

    fn test_grid() -> Grid {
        Grid::new(32, TWO_PI).unwrap()
    }

    #[test]
    fn gradient_matches_closed_form() {
        let grid = test_grid();
        let f = ScalarField::from_fn(grid, |x, y, z| (2.0 * x).sin() * (3.0 * y).cos() + z.sin());
        let g = gradient(&f);
        let want = VectorField::from_fn(grid, |x, y, z| {
            [
                2.0 * (2.0 * x).cos() * (3.0 * y).cos(),
                -3.0 * (2.0 * x).sin() * (3.0 * y).sin(),
                z.cos(),
            ]
        });
        for axis in 0..3 {
            let err = g
                .comp(axis)
                .iter()
                .zip(want.comp(axis))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "axis {axis} err {err}");
        }
    }

    #[test]
    fn abc_flow_is_beltrami() {
        // u = (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)
        // satisfies curl u = u on the 2pi box.
        let grid = test_grid();
        let (a, b, c) = (1.0, 0.7, 0.3);
        let u = VectorField::from_fn(grid, |x, y, z| {
            [
                a * z.sin() + c * y.cos(),
                b * x.sin() + a * z.cos(),
                c * y.sin() + b * x.cos(),
            ]
        });
        let w = curl(&u);
        for axis in 0..3 {
            let err = w
                .comp(axis)
                .iter()
                .zip(u.comp(axis))
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-11, "axis {axis} err {err}");
        }
    }

    #[test]
    fn projection_is_idempotent_and_kills_divergence() {
        let grid = test_grid();
        let v = VectorField::from_fn(grid, |x, y, z| {
            [x.sin() * y.cos(), (2.0 * y).sin() + z.cos(), x.cos() * (3.0 * z).sin()]
        });
        let p1 = project_solenoidal(&v);
        assert!(relative_divergence(&p1) < 1e-12);
        let p2 = project_solenoidal(&p1);
        for axis in 0..3 {
            let err = p1
                .comp(axis)
                .iter()
                .zip(p2.comp(axis))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "projection not idempotent on axis {axis}: {err}");
        }
    }

    #[test]
    fn poisson_inverts_laplacian() {
        let grid = test_grid();
        let p = ScalarField::from_fn(grid, |x, y, z| x.sin() * (2.0 * y).cos() + (3.0 * z).sin());
        let rhs = laplacian(&p);
        let q = poisson_zero_mean(&rhs);
        let err = p
            .data()
            .iter()
            .zip(q.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "poisson roundtrip err {err}");
    }

    #[test]
    fn dealias_zeroes_high_modes_only() {
        let grid = test_grid();
        let f = ScalarField::from_fn(grid, |x, _, _| (4.0 * x).sin() + (14.0 * x).sin());
        let mut spec = fft::forward_real(grid, f.data());
        dealias_spec(grid, &mut spec);
        let back = fft::inverse_to_real(grid, &spec);
        let want = ScalarField::from_fn(grid, |x, _, _| (4.0 * x).sin());
        let err = back
            .iter()
            .zip(want.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "dealias err {err}");
    }
}
