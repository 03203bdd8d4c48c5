//! Deterministic initial-field generators.
//!
//! Every generator returns a solenoidal field. Arguments inside the
//! trigonometric generators are scaled by `2 pi / L`, so the classical
//! formulas hold on any box size.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::VectorField;
use crate::grid::{Grid, TWO_PI};
use crate::spectral::{project_spec, Spectrum};

/// Declarative recipe for an initial field; serializable so solver configs
/// can name their initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// Identically zero.
    Zero,
    /// Arnold-Beltrami-Childress flow; an eigenfunction of curl, hence
    /// divergence-free with closed-form pressure.
    Abc { a: f64, b: f64, c: f64 },
    /// Gaussian random field, Leray-projected, with shell energies rescaled
    /// to `k^(-spectrum_exponent)` on integer shells `[k_min, k_max]`.
    RandomSolenoidal {
        spectrum_exponent: f64,
        k_min: u32,
        k_max: u32,
        seed: u64,
    },
    /// Orszag-Tang velocity: (-2 sin y, 2 sin x, 0).
    OrszagTang,
    /// Orszag-Tang magnetic field: (-2 sin 2y, 2 sin x, 0).
    OrszagTangB,
    /// Unidirectional shear u = (sin(k y'), 0, 0); divergence-free exactly.
    SineShear { k: u32 },
}

/// Integer shell index of a mode: nearest integer to |n|.
#[inline]
pub fn shell_of(n: [i64; 3]) -> u32 {
    let r2 = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
    r2.sqrt().round() as u32
}

/// Materialize a field spec on the grid.
pub fn gen_field(grid: Grid, spec: &FieldSpec) -> Result<VectorField> {
    let s = TWO_PI / grid.l();
    match *spec {
        FieldSpec::Zero => Ok(VectorField::zeros(grid)),
        FieldSpec::Abc { a, b, c } => Ok(VectorField::from_fn(grid, move |x, y, z| {
            let (x, y, z) = (s * x, s * y, s * z);
            [
                a * z.sin() + c * y.cos(),
                b * x.sin() + a * z.cos(),
                c * y.sin() + b * x.cos(),
            ]
        })),
        FieldSpec::OrszagTang => Ok(VectorField::from_fn(grid, move |x, y, _| {
            [-2.0 * (s * y).sin(), 2.0 * (s * x).sin(), 0.0]
        })),
        FieldSpec::OrszagTangB => Ok(VectorField::from_fn(grid, move |x, y, _| {
            [-2.0 * (2.0 * s * y).sin(), 2.0 * (s * x).sin(), 0.0]
        })),
        FieldSpec::SineShear { k } => Ok(VectorField::from_fn(grid, move |_, y, _| {
            [(k as f64 * s * y).sin(), 0.0, 0.0]
        })),
        FieldSpec::RandomSolenoidal {
            spectrum_exponent,
            k_min,
            k_max,
            seed,
        } => random_solenoidal(grid, spectrum_exponent, k_min, k_max, seed),
    }
}

fn random_solenoidal(grid: Grid, p: f64, k_min: u32, k_max: u32, seed: u64) -> Result<VectorField> {
    if k_min < 1 || k_min > k_max {
        return Err(Error::Gen(format!(
            "need 1 <= k_min <= k_max, got [{k_min}, {k_max}]"
        )));
    }
    if k_max as usize > grid.n() / 2 {
        return Err(Error::Gen(format!(
            "k_max = {k_max} exceeds the Nyquist shell {}",
            grid.n() / 2
        )));
    }
    if !p.is_finite() {
        return Err(Error::Gen("spectrum exponent must be finite".into()));
    }

    // White noise in physical space transforms to Hermitian-symmetric
    // spectral noise, so the final field is real by construction. The fill
    // is sequential: determinism must not depend on the thread pool.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps: [Spectrum; 3] = [(); 3].map(|_| Vec::new());
    for comp in comps.iter_mut() {
        let noise: Vec<f64> = (0..grid.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        *comp = fft::forward_real(grid, &noise);
    }

    project_spec(grid, &mut comps);

    // Per-shell rescale. Multiplying each mode by a scalar keeps k.u = 0,
    // so solenoidality survives and shell energies land exactly on target.
    let shells = (k_max + 1) as usize;
    let mut shell_sum = vec![0.0f64; shells];
    let keep: Vec<Option<u32>> = (0..grid.len())
        .map(|i| {
            let [ix, iy, iz] = grid.coords_of(i);
            let n = [grid.wave_index(ix), grid.wave_index(iy), grid.wave_index(iz)];
            let s = shell_of(n);
            (s >= k_min && s <= k_max).then_some(s)
        })
        .collect();
    for (i, s) in keep.iter().enumerate() {
        if let Some(s) = s {
            let e: f64 = comps.iter().map(|c| c[i].norm_sqr()).sum();
            shell_sum[*s as usize] += e;
        }
    }

    // Normalize so the energy integral over the box equals the volume
    // (unit mean-square amplitude), split across shells as k^(-p).
    let volume = grid.volume();
    let parseval = volume / (grid.len() as f64).powi(2);
    let weight_total: f64 = (k_min..=k_max)
        .filter(|&m| shell_sum[m as usize] > 0.0)
        .map(|m| (m as f64).powf(-p))
        .sum();
    if weight_total == 0.0 {
        return Err(Error::Gen(format!(
            "no lattice modes in shells [{k_min}, {k_max}]"
        )));
    }
    let mut gain = vec![0.0f64; shells];
    for m in k_min..=k_max {
        let s = shell_sum[m as usize];
        if s > 0.0 {
            let target = volume * (m as f64).powf(-p) / weight_total;
            gain[m as usize] = (target / (parseval * s)).sqrt();
        }
    }

    for comp in comps.iter_mut() {
        for (i, v) in comp.iter_mut().enumerate() {
            *v = match keep[i] {
                Some(s) => *v * gain[s as usize],
                None => Complex::default(),
            };
        }
    }

    let fields = comps.map(|c| fft::inverse_to_real(grid, &c));
    VectorField::from_components(grid, fields)
}
