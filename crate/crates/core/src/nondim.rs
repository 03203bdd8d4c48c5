//! Frame changes for whole series.
//!
//! Rescaling by a length L and a time Theta sends coordinates to x/L and
//! t/Theta, fields to (Theta/L) u, pressure to (Theta/L)^2 p, and the
//! transport coefficients to nu Theta / L^2. Choosing L and Theta as the
//! domain radius and horizon yields the unit frame every dimensionless
//! statement lives in; the inverse factors restore the original. The map
//! touches data and parameters only, never the grid resolution, and the
//! declared dimensionless groups (Re, Rm, M) ride along unchanged.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::series::{FieldSeries, Snapshot};

fn scaled_vector(grid: Grid, v: &VectorField, factor: f64) -> VectorField {
    let comps = std::array::from_fn(|a| {
        v.comp(a).par_iter().map(|x| x * factor).collect::<Vec<f64>>()
    });
    VectorField::from_components(grid, comps).expect("source components match the grid")
}

/// Rescale a series by a length unit and a time unit.
///
/// Velocity-like fields pick up Theta/L, the pressure its square; box
/// side, domain radius, and horizon divide by the respective unit. The
/// round trip with the reciprocal units reproduces the input to floating
/// point rounding.
pub fn rescale_frame(series: &FieldSeries, length: f64, time: f64) -> Result<FieldSeries> {
    if !(length.is_finite() && length > 0.0 && time.is_finite() && time > 0.0) {
        return Err(Error::Config(format!(
            "frame units must be finite and positive, got length {length}, time {time}"
        )));
    }
    let old = series.grid();
    let grid = Grid::new(old.n(), old.l() / length)?;
    let p = series.params();
    let params = PhysParams::new(
        p.nu * time / (length * length),
        p.eta * time / (length * length),
        p.r0 / length,
        p.t_horizon / time,
        p.re,
        p.rm,
        p.m,
    )?;

    let gain = time / length;
    let mut snaps = Vec::with_capacity(series.len());
    for k in 0..series.len() {
        let s = series.get(k)?;
        let pressure: Vec<f64> =
            s.p.data().par_iter().map(|x| x * gain * gain).collect();
        snaps.push(Snapshot {
            time: s.time / time,
            u: scaled_vector(grid, &s.u, gain),
            b: scaled_vector(grid, &s.b, gain),
            p: ScalarField::from_data(grid, pressure).expect("source data matches the grid"),
        });
    }
    FieldSeries::in_memory(grid, params, snaps)
}

/// Rescale to the unit frame: domain radius and horizon become one.
pub fn nondimensionalize(series: &FieldSeries) -> Result<FieldSeries> {
    let p = series.params();
    rescale_frame(series, p.r0, p.t_horizon)
}

/// Undo [`nondimensionalize`] given the original domain radius and horizon.
pub fn redimensionalize(series: &FieldSeries, r0: f64, t_horizon: f64) -> Result<FieldSeries> {
    if !(r0.is_finite() && r0 > 0.0 && t_horizon.is_finite() && t_horizon > 0.0) {
        return Err(Error::Config(format!(
            "frame units must be finite and positive, got length {r0}, time {t_horizon}"
        )));
    }
    rescale_frame(series, 1.0 / r0, 1.0 / t_horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::{constant_one, domain_cutoff};
    use crate::diagnostics::{scale_diagnostics, StructuralConstants};
    use crate::flux::{flux_component, FluxKind};
    use crate::gen::{gen_field, FieldSpec};
    use crate::grid::TWO_PI;
    use crate::solver::Form;

    fn random_series(grid: Grid, params: PhysParams, times: &[f64]) -> FieldSeries {
        let snaps = times
            .iter()
            .enumerate()
            .map(|(i, &time)| {
                let u = gen_field(
                    grid,
                    &FieldSpec::RandomSolenoidal {
                        spectrum_exponent: -2.0,
                        k_min: 1,
                        k_max: 4,
                        seed: 100 + i as u64,
                    },
                )
                .unwrap();
                let b = gen_field(
                    grid,
                    &FieldSpec::RandomSolenoidal {
                        spectrum_exponent: -2.5,
                        k_min: 1,
                        k_max: 3,
                        seed: 200 + i as u64,
                    },
                )
                .unwrap();
                let p = ScalarField::from_fn(grid, |x, y, z| {
                    (x + 0.3 * i as f64).sin() * (2.0 * y).cos() + 0.2 * z.sin()
                });
                Snapshot { time, u, b, p }
            })
            .collect();
        FieldSeries::in_memory(grid, params, snaps).unwrap()
    }

    fn max_rel_gap(a: &FieldSeries, b: &FieldSeries) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..a.len() {
            let sa = a.get(k).unwrap();
            let sb = b.get(k).unwrap();
            for c in 0..3 {
                for (x, y) in sa.u.comp(c).iter().zip(sb.u.comp(c)) {
                    worst = worst.max((x - y).abs() / x.abs().max(1.0));
                }
                for (x, y) in sa.b.comp(c).iter().zip(sb.b.comp(c)) {
                    worst = worst.max((x - y).abs() / x.abs().max(1.0));
                }
            }
            for (x, y) in sa.p.data().iter().zip(sb.p.data()) {
                worst = worst.max((x - y).abs() / x.abs().max(1.0));
            }
            worst = worst.max((sa.time - sb.time).abs());
        }
        worst
    }

    #[test]
    fn round_trip_restores_the_series() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let params = PhysParams::from_transport(0.04, 0.07, TWO_PI / 4.0, 0.8).unwrap();
        let series = random_series(grid, params, &[0.0, 0.3, 0.8]);
        let starred = nondimensionalize(&series).unwrap();
        let back = redimensionalize(&starred, params.r0, params.t_horizon).unwrap();

        assert_eq!(starred.params().r0, 1.0);
        assert_eq!(starred.params().t_horizon, 1.0);
        assert!((back.grid().l() - grid.l()).abs() <= 1e-12 * grid.l());
        let p = back.params();
        assert!((p.nu - params.nu).abs() <= 1e-12 * params.nu);
        assert!((p.eta - params.eta).abs() <= 1e-12 * params.eta);
        assert!((p.r0 - params.r0).abs() <= 1e-12 * params.r0);
        assert!(max_rel_gap(&series, &back) <= 1e-12, "gap {}", max_rel_gap(&series, &back));
    }

    #[test]
    fn averages_transform_with_the_frame_factors() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let r0 = TWO_PI / 4.0;
        let t = 0.7;
        let params = PhysParams::from_transport(0.04, 0.09, r0, t).unwrap();
        let series = random_series(grid, params, &[0.0, 0.25, 0.7]);
        let starred = nondimensionalize(&series).unwrap();

        let domain = constant_one(grid, t, r0);
        let domain_star = constant_one(starred.grid(), 1.0, 1.0);
        let consts = StructuralConstants::default();
        let d = scale_diagnostics(&series, &domain, 1.0, consts, Form::Dimensional).unwrap();
        let ds =
            scale_diagnostics(&starred, &domain_star, 1.0, consts, Form::Dimensional).unwrap();

        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        // Energies scale with (R0/T)^2, enstrophies with transport/T^2.
        assert!(rel(d.energy, (r0 / t).powi(2) * ds.energy) <= 1e-10);
        assert!(rel(d.dissipation_u, params.nu / (t * t) * ds.enstrophy_u) <= 1e-10);
        assert!(rel(d.dissipation_b, params.eta / (t * t) * ds.enstrophy_b) <= 1e-10);
        // The dimensionless constants never notice the frame.
        assert!(rel(d.c_p, ds.c_p) <= 1e-10, "{} vs {}", d.c_p, ds.c_p);
        assert!(rel(d.c_u, ds.c_u) <= 1e-10);
        assert!(rel(d.c_b, ds.c_b) <= 1e-10);
        assert!(rel(d.tau_u, ds.tau_u) <= 1e-10);
        assert!(rel(d.tau_b, ds.tau_b) <= 1e-10);
        assert!(rel(d.sup_u_sq, ds.sup_u_sq) <= 1e-10);
        // In the unit frame the two microscale notions coincide up to the
        // fourth-root versus square-root convention.
        assert!(rel(ds.tau_u, (ds.energy_u / ds.enstrophy_u).powf(0.25)) <= 1e-12);
    }

    #[test]
    fn flux_transforms_with_the_generic_frame_factor() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let r0 = TWO_PI / 4.0;
        let t = 0.6;
        let params = PhysParams::from_transport(0.05, 0.05, r0, t).unwrap();
        let series = random_series(grid, params, &[0.0, 0.2, 0.6]);
        let starred = nondimensionalize(&series).unwrap();

        let times: Vec<f64> = series.times().to_vec();
        let times_star: Vec<f64> = starred.times().to_vec();
        let rho = 7.0 / 8.0;
        let domain = domain_cutoff(r0, rho, rho, grid, &times, t).unwrap();
        let domain_star =
            domain_cutoff(1.0, rho, rho, starred.grid(), &times_star, 1.0).unwrap();

        // Scale-normalized fluxes convert by R0^2/T^3 for any horizon; the
        // viscous form nu/T^2 of the same factor needs T = R0^2/nu.
        for kind in [FluxKind::U, FluxKind::P, FluxKind::Ub] {
            let f = flux_component(&series, &domain, kind, Form::Dimensional).unwrap().value;
            let fs = flux_component(&starred, &domain_star, kind, Form::Dimensionless)
                .unwrap()
                .value;
            let expect = r0 * r0 / t.powi(3) * fs;
            assert!(
                (f - expect).abs() <= 1e-10 * expect.abs().max(1e-12),
                "{kind:?}: {f} vs {expect}"
            );
        }
    }

    #[test]
    fn viscous_factor_applies_at_the_diffusive_horizon() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let r0 = TWO_PI / 4.0;
        let nu = 4.0;
        // Horizon pinned to the diffusive time R0^2/nu, where the generic
        // factor R0^2/T^3 collapses to nu/T^2.
        let t = r0 * r0 / nu;
        let params = PhysParams::from_transport(nu, nu, r0, t).unwrap();
        let series = random_series(grid, params, &[0.0, 0.5 * t, t]);
        let starred = nondimensionalize(&series).unwrap();

        let rho = 7.0 / 8.0;
        let domain =
            domain_cutoff(r0, rho, rho, grid, &series.times().to_vec(), t).unwrap();
        let domain_star =
            domain_cutoff(1.0, rho, rho, starred.grid(), &starred.times().to_vec(), 1.0)
                .unwrap();
        let f = flux_component(&series, &domain, FluxKind::U, Form::Dimensional)
            .unwrap()
            .value;
        let fs = flux_component(&starred, &domain_star, FluxKind::U, Form::Dimensionless)
            .unwrap()
            .value;
        let expect = nu / (t * t) * fs;
        assert!(
            (f - expect).abs() <= 1e-10 * expect.abs().max(1e-12),
            "{f} vs {expect}"
        );
    }

    #[test]
    fn degenerate_units_are_rejected() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let params = PhysParams::from_transport(0.1, 0.1, 1.0, 1.0).unwrap();
        let series = random_series(grid, params, &[0.0, 1.0]);
        assert!(rescale_frame(&series, 0.0, 1.0).is_err());
        assert!(rescale_frame(&series, 1.0, f64::NAN).is_err());
        assert!(redimensionalize(&series, -1.0, 1.0).is_err());
    }
}
