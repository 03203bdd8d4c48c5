//! Integral-scale diagnostics over the averaging domain.
//!
//! Everything here is a functional of the series and the domain weight
//! alone: weighted energy and enstrophy averages, the Taylor microscale,
//! and the correction factors that set the lower end of each cascade
//! sandwich. No cover enters, so every quantity is invariant under the
//! choice and ordering of cover elements by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::Cover;
use crate::cutoff::RefinedCutoff;
use crate::error::{Error, Result};
use crate::flux::{grad_square, hat_weights, sparse_weights, validate};
use crate::reduce::det_sum_indexed;
use crate::series::FieldSeries;
use crate::solver::{transport_coefficients, Form};

/// Configuration constants the sandwich bounds depend on. The analysis
/// fixes none of them numerically, so they are explicit inputs; verdicts
/// additionally report the largest value the data itself tolerates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    /// Constant multiplying the combined-energy correction term.
    pub c_total: f64,
    /// Constant inside the per-field correction amplitudes.
    pub c_split: f64,
    /// Cover cardinality factor: at most `k1 (R0/R)^3` elements.
    pub k1: f64,
    /// Cover multiplicity bound.
    pub k2: f64,
}

impl Default for StructuralConstants {
    fn default() -> Self {
        Self { c_total: 1.0, c_split: 1.0, k1: 8.0, k2: 8.0 }
    }
}

impl StructuralConstants {
    /// Same constants with the (K1, K2) pair a cover was certified against.
    pub fn for_cover(self, cover: &Cover) -> Self {
        Self { k1: cover.k1 as f64, k2: cover.k2 as f64, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c_total", self.c_total),
            ("c_split", self.c_split),
            ("k1", self.k1),
            ("k2", self.k2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "structural constant {name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.k1 < 1.0 || self.k2 < 1.0 {
            return Err(Error::Config(format!(
                "cover constants must be at least 1, got k1 = {}, k2 = {}",
                self.k1, self.k2
            )));
        }
        Ok(())
    }
}

/// Space-time averages at the scale of the averaging domain, plus the
/// dimensionless groups and correction factors derived from them.
///
/// Energies are weighted with the `delta` power of the domain cutoff;
/// enstrophies with the plain cutoff. Both are normalized per unit time
/// and unit domain volume (divide by `T R0^3`), so they are densities in
/// the frame of the series. Quantities marked "unit frame" are evaluated
/// in rescaled coordinates where the domain has unit radius and unit
/// horizon; for a series already in that frame the rescaling is the
/// identity, and the dimensionless constants below never depend on the
/// frame the series arrived in.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScaleDiagnostics {
    /// Radius of the domain weight the averages were taken over.
    pub r0: f64,
    /// Time horizon of the domain weight.
    pub t_horizon: f64,
    /// Exponent applied to the domain weight inside the energy averages.
    pub delta: f64,
    /// Snapshot count behind every sup-in-time norm; audits the cadence.
    pub snapshots: usize,
    /// Mean weighted kinetic energy density.
    pub energy_u: f64,
    /// Mean weighted magnetic energy density.
    pub energy_b: f64,
    /// energy_u + energy_b.
    pub energy: f64,
    /// Mean weighted kinetic energy density in the unit frame.
    pub unit_energy_u: f64,
    /// Mean weighted magnetic energy density in the unit frame.
    pub unit_energy_b: f64,
    /// Mean velocity-gradient square, no transport coefficient.
    pub enstrophy_u: f64,
    /// Mean magnetic-gradient square, no transport coefficient.
    pub enstrophy_b: f64,
    /// nu_eff * enstrophy_u: kinetic dissipation density.
    pub dissipation_u: f64,
    /// eta_eff * enstrophy_b: magnetic dissipation density.
    pub dissipation_b: f64,
    /// dissipation_u + dissipation_b.
    pub dissipation: f64,
    /// Taylor microscale sqrt(nu_eff * energy / dissipation), a length in
    /// the frame of the series; zero for identically zero fields.
    pub tau: f64,
    /// Kinetic microscale as a fraction of the domain radius: fourth root
    /// of the unit-frame energy-to-enstrophy ratio of the velocity field.
    pub tau_u: f64,
    /// Magnetic counterpart of `tau_u`.
    pub tau_b: f64,
    /// Effective viscosity-to-resistivity ratio.
    pub prandtl: f64,
    /// Declared Reynolds number of the run.
    pub re: f64,
    /// Declared magnetic Reynolds number.
    pub rm: f64,
    /// Lorentz coupling S = M^2/(Re Rm).
    pub coupling: f64,
    /// Hartmann number.
    pub hartmann: f64,
    /// Largest snapshot value of the squared L2 norm of u over the whole
    /// box, unit frame.
    pub sup_u_sq: f64,
    /// Magnetic counterpart of `sup_u_sq`.
    pub sup_b_sq: f64,
    /// Pressure constant: the weighted sup norm of u composed with the
    /// 3/2-norm history of the pressure, unit frame, gradient-free.
    pub c_p: f64,
    /// Correction amplitude for the kinetic sandwich: folds in the
    /// pressure constant, the Reynolds number, and the Lorentz coupling.
    pub c_u: f64,
    /// Correction amplitude for the magnetic sandwich.
    pub c_b: f64,
    /// Correction amplitude for the field-line stretching sandwich.
    pub c_stretch: f64,
    /// Correction factor for the combined-energy sandwich,
    /// (1/(2 C K1 K2 (1 + Pr^-1)))^(1/2).
    pub beta_total: f64,
    /// Correction factor (1/(2 K1 K2 C_u))^(1/4) for kinetic-side bounds.
    pub beta_u: f64,
    /// Correction factor (1/(2 K1 K2 C_b))^(1/4) for magnetic-side bounds.
    pub beta_b: f64,
    /// Correction factor (1/(2 K1 K2 C_stretch))^(1/4) for the stretching
    /// sandwich.
    pub beta_stretch: f64,
    /// Constants the correction factors were computed with.
    pub constants: StructuralConstants,
}

impl ScaleDiagnostics {
    /// Joint per-field microscale: the larger of the two fractions.
    pub fn tau_split(&self) -> f64 {
        self.tau_u.max(self.tau_b)
    }

    /// Joint per-field correction factor: the smaller of the two.
    pub fn beta_split(&self) -> f64 {
        self.beta_u.min(self.beta_b)
    }

    /// Smallest scale the combined-energy sandwich is claimed at.
    pub fn floor_total(&self) -> f64 {
        self.tau / self.beta_total
    }

    /// Smallest scale the per-field sandwiches are claimed at.
    pub fn floor_split(&self) -> f64 {
        self.r0 * self.tau_split() / self.beta_split()
    }

    /// Smallest scale the stretching sandwich is claimed at.
    pub fn floor_stretch(&self) -> f64 {
        self.r0 * self.tau_b / self.beta_stretch
    }

    /// True when the mean weighted kinetic energy in the unit frame is at
    /// least one; the purely kinetic sandwich assumes flows above this
    /// energy floor.
    pub fn unit_kinetic_energy_ok(&self) -> bool {
        self.unit_energy_u >= 1.0
    }
}

/// Fourth root of the energy-to-enstrophy ratio rescaled to the unit
/// domain. Zero fields give zero; vanishing gradients under nonzero
/// energy have no finite microscale and are reported as degenerate.
fn quarter_ratio(energy: f64, enstrophy: f64, r0: f64, label: &str) -> Result<f64> {
    if enstrophy == 0.0 {
        if energy > 0.0 {
            return Err(Error::Degenerate(format!(
                "{label} gradients vanish while the energy is positive; no finite microscale"
            )));
        }
        return Ok(0.0);
    }
    Ok((energy / (r0 * r0 * enstrophy)).powf(0.25))
}

/// Integral-scale diagnostics of a series against the domain weight.
///
/// `delta` is the exponent on the weight inside the energy averages and
/// must stay in (3/4, 1]; `form` selects whether transport coefficients
/// are read from `nu`/`eta` or from the declared Reynolds numbers.
pub fn scale_diagnostics(
    series: &FieldSeries,
    domain: &RefinedCutoff,
    delta: f64,
    constants: StructuralConstants,
    form: Form,
) -> Result<ScaleDiagnostics> {
    validate(series, std::slice::from_ref(domain))?;
    constants.validate()?;
    if domain.center != [0.0; 3] {
        return Err(Error::Config(
            "integral-scale diagnostics take the domain weight, centered at the origin".into(),
        ));
    }
    if !(delta > 0.75 && delta <= 1.0) {
        return Err(Error::Config(format!(
            "energy-weight exponent must lie in (3/4, 1], got {delta}"
        )));
    }

    let grid = series.grid();
    let params = series.params();
    let (nu_eff, eta_eff, _) = transport_coefficients(params, form);
    let r0 = domain.r;
    let t = domain.t_horizon;
    // Velocity scale of the unit frame; converts norms of the fields to
    // norms of the rescaled fields.
    let v = t / r0;

    let w = sparse_weights(domain);
    let nsup = w.idx.len();
    let psi_delta: Vec<f64> = w.psi.par_iter().map(|p| p.powf(delta)).collect();
    // The pressure history carries the weight power (3/2)(rho - 1/2).
    let pw = 1.5 * (domain.rho - 0.5);
    let psi_press: Vec<f64> = w.psi.par_iter().map(|p| p.powf(pw)).collect();

    let times = series.times().to_vec();
    let n = times.len();
    let w_delta = hat_weights(&times, |s| domain.eta(s).powf(delta));
    let w_plain = hat_weights(&times, |s| domain.eta(s));
    let w_press = hat_weights(&times, |s| domain.eta(s).powf(pw));

    let mut en_u = 0.0;
    let mut en_b = 0.0;
    let mut ens_u = 0.0;
    let mut ens_b = 0.0;
    let mut press = 0.0;
    let mut sup_uphi = 0.0f64;
    let mut sup_u = 0.0f64;
    let mut sup_b = 0.0f64;

    for k in 0..n {
        let snap = series.get(k)?;
        let u = snap.u.components();
        let b = snap.b.components();
        let p = snap.p.data();
        let gsq_u = grad_square(grid, &snap.u);
        let gsq_b = grad_square(grid, &snap.b);

        let usq = |g: usize| u[0][g] * u[0][g] + u[1][g] * u[1][g] + u[2][g] * u[2][g];
        let bsq = |g: usize| b[0][g] * b[0][g] + b[1][g] * b[1][g] + b[2][g] * b[2][g];

        let q_en_u = det_sum_indexed(nsup, |j| 0.5 * usq(w.idx[j] as usize) * psi_delta[j]);
        let q_en_b = det_sum_indexed(nsup, |j| 0.5 * bsq(w.idx[j] as usize) * psi_delta[j]);
        let q_ens_u = det_sum_indexed(nsup, |j| gsq_u[w.idx[j] as usize] * w.psi[j]);
        let q_ens_b = det_sum_indexed(nsup, |j| gsq_b[w.idx[j] as usize] * w.psi[j]);
        let q_press =
            det_sum_indexed(nsup, |j| p[w.idx[j] as usize].abs().powf(1.5) * psi_press[j]);
        let q_uphi = det_sum_indexed(nsup, |j| usq(w.idx[j] as usize) * w.psi[j]);
        let q_box_u = det_sum_indexed(grid.len(), usq);
        let q_box_b = det_sum_indexed(grid.len(), bsq);

        en_u += w_delta[k] * q_en_u;
        en_b += w_delta[k] * q_en_b;
        ens_u += w_plain[k] * q_ens_u;
        ens_b += w_plain[k] * q_ens_b;
        press += w_press[k] * q_press;
        // Sup norms are maxima over stored snapshots, not quadratures.
        let eta_k = domain.eta(times[k]);
        sup_uphi = sup_uphi.max(eta_k * q_uphi);
        sup_u = sup_u.max(q_box_u);
        sup_b = sup_b.max(q_box_b);
    }

    let cell = grid.cell_volume();
    let norm = cell / (t * r0.powi(3));
    let energy_u = en_u * norm;
    let energy_b = en_b * norm;
    let enstrophy_u = ens_u * norm;
    let enstrophy_b = ens_b * norm;
    let energy = energy_u + energy_b;
    let dissipation_u = nu_eff * enstrophy_u;
    let dissipation_b = eta_eff * enstrophy_b;
    let dissipation = dissipation_u + dissipation_b;

    let tau = if dissipation == 0.0 {
        if energy > 0.0 {
            return Err(Error::Degenerate(
                "field gradients vanish while the energy is positive; no finite microscale"
                    .into(),
            ));
        }
        0.0
    } else {
        (nu_eff * energy / dissipation).sqrt()
    };
    let tau_u = quarter_ratio(energy_u, enstrophy_u, r0, "velocity")?;
    let tau_b = quarter_ratio(energy_b, enstrophy_b, r0, "magnetic")?;

    // Unit-frame conversions: fields pick up a factor v, volumes 1/r0^3,
    // the pressure history additionally spreads over the unit horizon.
    let frame_sq = v * v / r0.powi(3);
    let sup_u_sq = frame_sq * sup_u * cell;
    let sup_b_sq = frame_sq * sup_b * cell;
    let sup_uphi_sq = frame_sq * sup_uphi * cell;
    let press_unit = v.powi(3) / (r0.powi(3) * t) * press * cell;
    let c_p = sup_uphi_sq.powf(2.0 / 9.0) * press_unit.powf(8.0 / 9.0);

    let prandtl = nu_eff / eta_eff;
    let re = params.re;
    let rm = params.rm;
    let hartmann = params.m;
    let coupling = params.coupling();

    let kk = constants.k1 * constants.k2;
    let c_u = constants.c_split
        * (c_p * re.powf(4.0 / 3.0) + re + 1.0 + (hartmann * rm).powi(2) * sup_u_sq * sup_b_sq);
    let c_b = constants.c_split * (rm.powf(4.0 / 3.0) * sup_u_sq.powi(2) + rm + 1.0);
    let c_stretch = constants.c_split * (sup_u_sq.powi(2) + 2.0);
    let beta_total = (1.0 / (2.0 * constants.c_total * kk * (1.0 + 1.0 / prandtl))).sqrt();
    let beta_u = (1.0 / (2.0 * kk * c_u)).powf(0.25);
    let beta_b = (1.0 / (2.0 * kk * c_b)).powf(0.25);
    let beta_stretch = (1.0 / (2.0 * kk * c_stretch)).powf(0.25);

    Ok(ScaleDiagnostics {
        r0,
        t_horizon: t,
        delta,
        snapshots: n,
        energy_u,
        energy_b,
        energy,
        unit_energy_u: v * v * energy_u,
        unit_energy_b: v * v * energy_b,
        enstrophy_u,
        enstrophy_b,
        dissipation_u,
        dissipation_b,
        dissipation,
        tau,
        tau_u,
        tau_b,
        prandtl,
        re,
        rm,
        coupling,
        hartmann,
        sup_u_sq,
        sup_b_sq,
        c_p,
        c_u,
        c_b,
        c_stretch,
        beta_total,
        beta_u,
        beta_b,
        beta_stretch,
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::{constant_one, domain_cutoff};
    use crate::field::{ScalarField, VectorField};
    use crate::gen::{gen_field, FieldSpec};
    use crate::grid::{Grid, TWO_PI};
    use crate::params::PhysParams;
    use crate::series::Snapshot;

    fn static_series(
        grid: Grid,
        params: PhysParams,
        u: VectorField,
        b: VectorField,
        p: ScalarField,
        times: &[f64],
    ) -> FieldSeries {
        let snaps = times
            .iter()
            .map(|&time| Snapshot { time, u: u.clone(), b: b.clone(), p: p.clone() })
            .collect();
        FieldSeries::in_memory(grid, params, snaps).unwrap()
    }

    fn unit_params(nu: f64, eta: f64) -> PhysParams {
        PhysParams::from_transport(nu, eta, 1.0, 1.0).unwrap()
    }

    #[test]
    fn shear_flow_matches_the_closed_form_microscale() {
        let grid = Grid::new(32, TWO_PI).unwrap();
        let nu = 0.05;
        let k = 2.0;
        let u = gen_field(grid, &FieldSpec::SineShear { k: 2 }).unwrap();
        let series = static_series(
            grid,
            unit_params(nu, nu),
            u,
            VectorField::zeros(grid),
            ScalarField::zeros(grid),
            &[0.0, 0.5, 1.0],
        );
        let domain = constant_one(grid, 1.0, 1.0);
        let d = scale_diagnostics(
            &series,
            &domain,
            1.0,
            StructuralConstants::default(),
            Form::Dimensional,
        )
        .unwrap();

        // Mean sin^2 is exactly 1/2 on the periodic grid, so the energy
        // and enstrophy ratio collapses to 1/(2 k^2).
        let expect_tau = 1.0 / (k * 2.0f64.sqrt());
        assert!((d.tau - expect_tau).abs() <= 1e-10 * expect_tau, "tau = {}", d.tau);
        let vol = grid.volume();
        assert!((d.energy_u - 0.25 * vol).abs() <= 1e-10 * vol);
        assert!((d.enstrophy_u - 0.5 * k * k * vol).abs() <= 1e-10 * vol);
        assert_eq!(d.energy_b, 0.0);
        assert_eq!(d.tau_b, 0.0);
        assert!((d.tau_u - (d.energy_u / d.enstrophy_u).powf(0.25)).abs() < 1e-14);
        assert_eq!(d.dissipation, nu * d.enstrophy_u);
        assert_eq!(d.c_p, 0.0, "zero pressure contributes no pressure constant");
    }

    #[test]
    fn unit_constants_give_the_half_correction() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let u = gen_field(grid, &FieldSpec::SineShear { k: 1 }).unwrap();
        let series = static_series(
            grid,
            unit_params(0.1, 0.1),
            u,
            VectorField::zeros(grid),
            ScalarField::zeros(grid),
            &[0.0, 1.0],
        );
        let domain = constant_one(grid, 1.0, 1.0);
        let ones = StructuralConstants { c_total: 1.0, c_split: 1.0, k1: 1.0, k2: 1.0 };
        let d =
            scale_diagnostics(&series, &domain, 1.0, ones, Form::Dimensional).unwrap();
        // Pr = 1, so the correction is (1/(2*1*1*2))^(1/2) = 1/2 exactly.
        assert_eq!(d.prandtl, 1.0);
        assert_eq!(d.beta_total, 0.5);
    }

    #[test]
    fn correction_grows_with_the_prandtl_number() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let u = gen_field(grid, &FieldSpec::SineShear { k: 1 }).unwrap();
        let b = VectorField::zeros(grid);
        let p = ScalarField::zeros(grid);
        let domain = constant_one(grid, 1.0, 1.0);
        let betas: Vec<f64> = [0.4, 0.1, 0.025]
            .iter()
            .map(|&eta| {
                let series = static_series(
                    grid,
                    unit_params(0.1, eta),
                    u.clone(),
                    b.clone(),
                    p.clone(),
                    &[0.0, 1.0],
                );
                scale_diagnostics(
                    &series,
                    &domain,
                    1.0,
                    StructuralConstants::default(),
                    Form::Dimensional,
                )
                .unwrap()
                .beta_total
            })
            .collect();
        assert!(betas[0] < betas[1] && betas[1] < betas[2], "betas = {betas:?}");
    }

    #[test]
    fn uniform_flow_has_no_finite_microscale() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let u = VectorField::from_fn(grid, |_, _, _| [1.0, 0.0, 0.0]);
        let series = static_series(
            grid,
            unit_params(0.1, 0.1),
            u,
            VectorField::zeros(grid),
            ScalarField::zeros(grid),
            &[0.0, 1.0],
        );
        let domain = constant_one(grid, 1.0, 1.0);
        match scale_diagnostics(
            &series,
            &domain,
            1.0,
            StructuralConstants::default(),
            Form::Dimensional,
        ) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("microscale"), "{msg}"),
            Err(other) => panic!("expected a degenerate-field error, got {other}"),
            Ok(_) => panic!("expected a degenerate-field error"),
        }
    }

    #[test]
    fn zero_fields_are_quiet() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let series = static_series(
            grid,
            unit_params(0.1, 0.1),
            VectorField::zeros(grid),
            VectorField::zeros(grid),
            ScalarField::zeros(grid),
            &[0.0, 1.0],
        );
        let domain = constant_one(grid, 1.0, 1.0);
        let d = scale_diagnostics(
            &series,
            &domain,
            1.0,
            StructuralConstants::default(),
            Form::Dimensional,
        )
        .unwrap();
        assert_eq!(d.tau, 0.0);
        assert_eq!(d.tau_u, 0.0);
        assert_eq!(d.energy, 0.0);
        assert_eq!(d.c_p, 0.0);
        assert!(!d.unit_kinetic_energy_ok());
    }

    #[test]
    fn energy_weight_exponent_is_bounds_checked() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let series = static_series(
            grid,
            unit_params(0.1, 0.1),
            VectorField::zeros(grid),
            VectorField::zeros(grid),
            ScalarField::zeros(grid),
            &[0.0, 1.0],
        );
        let domain = constant_one(grid, 1.0, 1.0);
        for bad in [0.5, 0.75, 1.1] {
            match scale_diagnostics(
                &series,
                &domain,
                bad,
                StructuralConstants::default(),
                Form::Dimensional,
            ) {
                Err(Error::Config(_)) => {}
                other => panic!("delta = {bad} should be rejected, got {other:?}"),
            }
        }
    }

    #[test]
    fn off_center_weight_is_rejected() {
        let grid = Grid::new(16, TWO_PI).unwrap();
        let r0 = TWO_PI / 4.0;
        let times = [0.0, 0.5, 1.0];
        let domain = domain_cutoff(r0, 7.0 / 8.0, 7.0 / 8.0, grid, &times, 1.0).unwrap();
        let element = crate::cutoff::build_cutoff(
            [0.4, 0.0, 0.0],
            r0 / 2.0,
            7.0 / 8.0,
            7.0 / 8.0,
            grid,
            &times,
            1.0,
            &domain,
        )
        .unwrap();
        let series = static_series(
            grid,
            unit_params(0.1, 0.1),
            VectorField::zeros(grid),
            VectorField::zeros(grid),
            ScalarField::zeros(grid),
            &times,
        );
        match scale_diagnostics(
            &series,
            &element,
            7.0 / 8.0,
            StructuralConstants::default(),
            Form::Dimensional,
        ) {
            Err(Error::Config(msg)) => assert!(msg.contains("origin"), "{msg}"),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn energies_shrink_as_the_weight_exponent_grows() {
        // The weight is <= 1, so a larger exponent can only lower the
        // weighted energy.
        let grid = Grid::new(16, TWO_PI).unwrap();
        let u = gen_field(
            grid,
            &FieldSpec::RandomSolenoidal {
                spectrum_exponent: -2.0,
                k_min: 1,
                k_max: 4,
                seed: 11,
            },
        )
        .unwrap();
        let times = [0.0, 0.5, 1.0];
        let r0 = TWO_PI / 4.0;
        let domain = domain_cutoff(r0, 7.0 / 8.0, 7.0 / 8.0, grid, &times, 1.0).unwrap();
        let series = static_series(
            grid,
            PhysParams::from_transport(0.1, 0.1, r0, 1.0).unwrap(),
            u,
            VectorField::zeros(grid),
            ScalarField::zeros(grid),
            &times,
        );
        let lo = scale_diagnostics(
            &series,
            &domain,
            0.8,
            StructuralConstants::default(),
            Form::Dimensional,
        )
        .unwrap();
        let hi = scale_diagnostics(
            &series,
            &domain,
            1.0,
            StructuralConstants::default(),
            Form::Dimensional,
        )
        .unwrap();
        assert!(hi.energy_u < lo.energy_u, "{} !< {}", hi.energy_u, lo.energy_u);
        assert!(hi.energy_u > 0.0);
        // Enstrophy carries the plain weight, so it is exponent-blind.
        assert_eq!(hi.enstrophy_u, lo.enstrophy_u);
    }
}
