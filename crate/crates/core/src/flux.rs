//! Space-time quadratures of localized energy budgets and cascade fluxes.
//!
//! Every public quantity here is an integral of snapshot fields against a
//! refined cutoff weight. Spatial sums run over the sparse support of the
//! weight; the temporal factor is integrated by product quadrature, so the
//! deliberately sharp ramp of the cutoff never contaminates the residuals
//! these diagnostics exist to expose. Flux values are reported normalized
//! by `T R^3`, matching the ensemble averages built on top of them.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::RefinedCutoff;
use crate::error::{Error, Result};
use crate::fft::{forward_real, inverse_to_real};
use crate::field::VectorField;
use crate::gen::shell_of;
use crate::grid::Grid;
use crate::reduce::det_sum_indexed;
use crate::series::FieldSeries;
use crate::solver::{transport_coefficients, ForcingSpec, Form, PressureConvention};
use crate::spectral::{deriv_spec, Spectrum};

/// Substeps per snapshot interval when integrating the analytic temporal
/// factor against the piecewise-linear reconstruction of the field payload.
const TEMPORAL_SUBSTEPS: usize = 256;

/// Which localized quadrature a sample reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FluxKind {
    /// Combined pressure-velocity and cross fluxes of the total energy.
    #[serde(rename = "E")]
    E,
    /// Total-energy flux with the budget closure terms removed; equals
    /// dissipation minus the time and Laplacian terms.
    #[serde(rename = "E_inf")]
    EInf,
    /// Kinetic cascade flux `(1/2) |u|^2 (u . grad phi)`.
    #[serde(rename = "u")]
    U,
    /// Magnetic cascade flux `(1/2) |b|^2 (u . grad phi)`.
    #[serde(rename = "b")]
    B,
    /// Pressure transport `p (u . grad phi)`.
    #[serde(rename = "p")]
    P,
    /// Velocity-magnetic exchange `-(u . b)(b . grad phi)`.
    #[serde(rename = "ub")]
    Ub,
    /// Induction work `(b . grad) u . (b phi)`, kept in advective form.
    #[serde(rename = "V")]
    V,
}

impl FluxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FluxKind::E => "E",
            FluxKind::EInf => "E_inf",
            FluxKind::U => "u",
            FluxKind::B => "b",
            FluxKind::P => "p",
            FluxKind::Ub => "ub",
            FluxKind::V => "V",
        }
    }

    pub const ALL: [FluxKind; 7] = [
        FluxKind::E,
        FluxKind::EInf,
        FluxKind::U,
        FluxKind::B,
        FluxKind::P,
        FluxKind::Ub,
        FluxKind::V,
    ];
}

impl std::fmt::Display for FluxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label for a composite of kinds, e.g. `u+p` for the combined fluid flux.
pub fn kind_label(kinds: &[FluxKind]) -> String {
    kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("+")
}

impl FromStr for FluxKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FluxKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown flux kind {s:?}")))
    }
}

/// One element's scale-normalized flux: the raw space-time integral over the
/// element's support divided by `T R^3`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FluxSample {
    /// Position of the element in the cutoff slice handed in.
    pub element: usize,
    /// Element radius R.
    pub scale: f64,
    pub kind: FluxKind,
    pub value: f64,
}

/// Both sides of the integration-by-parts identity for one flux density,
/// each normalized by `T R^3`. They agree up to quadrature error whenever
/// the fields are solenoidal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluxForms {
    /// The form with the derivative on the transported field.
    pub advective: f64,
    /// The form with the derivative on the cutoff weight.
    pub boundary: f64,
}

impl FluxForms {
    /// Mismatch between the two forms relative to their larger magnitude.
    pub fn relative_gap(&self) -> f64 {
        let scale = self.advective.abs().max(self.boundary.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.advective - self.boundary).abs() / scale
        }
    }
}

/// Terms of the weighted energy balance over one element's support, as raw
/// space-time integrals (not scale-normalized). With `s` the magnetic
/// coupling weight and `phi = eta(t) psi(x)`:
///
/// - `dissipation`: `int (nu |grad u|^2 + s mu |grad b|^2) phi`
/// - `time_term`: `(1/2) int (|u|^2 + s |b|^2) d_t phi`
/// - `laplace_term`: `(1/2) int (nu |u|^2 + s mu |b|^2) lap phi`
/// - `pressure_velocity_flux`: `(1/2) int (|u|^2 + 2 s |b|^2 + 2p)(u . grad phi)`
/// - `cross_term`: `-s int (u . b)(b . grad phi)`
/// - `initial_energy`, `final_energy`: `(1/2) int (|u|^2 + s |b|^2) phi` at
///   the first and last snapshot (the initial term vanishes for ramped
///   cutoffs, which switch on after t = 0)
/// - `forcing_work`: `int (f . u) phi`
///
/// `defect` is defined as the residual closing the balance
///
/// `dissipation = time_term + laplace_term + pressure_velocity_flux
///              + cross_term + forcing_work + initial_energy
///              - final_energy - defect`
///
/// so it is zero for exact solutions under exact quadrature and nonnegative
/// for suitable weak solutions. On simulation output it measures the
/// unresolved part of the balance and shrinks under grid refinement.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalBudget {
    pub dissipation: f64,
    pub time_term: f64,
    pub laplace_term: f64,
    pub pressure_velocity_flux: f64,
    pub cross_term: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub forcing_work: f64,
    pub defect: f64,
}

impl LocalBudget {
    /// Combined boundary flux of the total energy.
    pub fn total_flux(&self) -> f64 {
        self.pressure_velocity_flux + self.cross_term
    }

    /// The part of the balance the inequality form drops: retained final
    /// energy plus the residual, net of external input. Subtracting it from
    /// the total flux leaves exactly `dissipation - time_term - laplace_term`.
    pub fn f_infinity(&self) -> f64 {
        self.final_energy - self.initial_energy - self.forcing_work + self.defect
    }
}

pub(crate) fn validate(series: &FieldSeries, cutoffs: &[RefinedCutoff]) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::Series(
            "flux quadrature needs at least two snapshots".into(),
        ));
    }
    for c in cutoffs {
        if c.grid != series.grid() {
            return Err(Error::Series(
                "cutoff grid does not match the series grid".into(),
            ));
        }
    }
    Ok(())
}

/// Per-element spatial weights restricted to the support of the cutoff.
pub(crate) struct ElementWeights {
    pub(crate) idx: Vec<u32>,
    pub(crate) psi: Vec<f64>,
    pub(crate) grad: [Vec<f64>; 3],
    pub(crate) lap: Vec<f64>,
}

pub(crate) fn sparse_weights(cutoff: &RefinedCutoff) -> ElementWeights {
    let sampled = cutoff.sample_spatial();
    let psi = sampled.psi.data();
    let lap = sampled.laplacian.data();
    let g = sampled.grad.components();
    let idx: Vec<u32> = (0..psi.len() as u32)
        .into_par_iter()
        .filter(|&i| psi[i as usize] != 0.0)
        .collect();
    ElementWeights {
        psi: idx.par_iter().map(|&i| psi[i as usize]).collect(),
        grad: std::array::from_fn(|a| idx.par_iter().map(|&i| g[a][i as usize]).collect()),
        lap: idx.par_iter().map(|&i| lap[i as usize]).collect(),
        idx,
    }
}

/// Quadrature weights pairing an analytic temporal factor with the
/// piecewise-linear reconstruction of the sampled payload: `out[k]`
/// integrates `f` against the hat function at snapshot k. For a constant
/// factor this reduces to the trapezoid rule exactly.
pub(crate) fn hat_weights(times: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = times.len();
    let mut out = vec![0.0; n];
    for k in 0..n - 1 {
        let (a, b) = (times[k], times[k + 1]);
        let mut left = 0.0;
        let mut right = 0.0;
        for j in 0..=TEMPORAL_SUBSTEPS {
            let lam = j as f64 / TEMPORAL_SUBSTEPS as f64;
            let w = if j == 0 || j == TEMPORAL_SUBSTEPS { 0.5 } else { 1.0 };
            let v = f(a + (b - a) * lam);
            left += w * v * (1.0 - lam);
            right += w * v * lam;
        }
        let h = (b - a) / TEMPORAL_SUBSTEPS as f64;
        out[k] += left * h;
        out[k + 1] += right * h;
    }
    out
}

fn temporal_weights(cutoff: &RefinedCutoff, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        hat_weights(times, |t| cutoff.eta(t)),
        hat_weights(times, |t| cutoff.eta_dot(t)),
    )
}

/// All nine spectral derivatives; `out[i][j] = d_i v_j`.
fn gradient_tensor(grid: Grid, v: &VectorField) -> [[Vec<f64>; 3]; 3] {
    let specs: [Spectrum; 3] = std::array::from_fn(|j| forward_real(grid, v.comp(j)));
    std::array::from_fn(|i| {
        std::array::from_fn(|j| inverse_to_real(grid, &deriv_spec(grid, &specs[j], i)))
    })
}

/// Pointwise `|grad v|^2` without materializing the full tensor.
pub(crate) fn grad_square(grid: Grid, v: &VectorField) -> Vec<f64> {
    let specs: [Spectrum; 3] = std::array::from_fn(|j| forward_real(grid, v.comp(j)));
    let mut out = vec![0.0; grid.len()];
    for spec in &specs {
        for axis in 0..3 {
            let d = inverse_to_real(grid, &deriv_spec(grid, spec, axis));
            out.par_iter_mut().zip(&d).for_each(|(o, x)| *o += x * x);
        }
    }
    out
}

/// Reconstruct the band forcing the solver applies: gain and the in-band
/// velocity, normalized so the work rate over the box equals the configured
/// injection rate. Returns None when the band carries no energy, matching
/// the solver's behavior of not forcing at all.
fn band_velocity(grid: Grid, u: &VectorField, f: &ForcingSpec) -> Option<(f64, [Vec<f64>; 3])> {
    if f.injection_rate == 0.0 {
        return None;
    }
    let len = grid.len();
    let in_band = |i: usize| {
        let [ix, iy, iz] = grid.coords_of(i);
        let s = shell_of([grid.wave_index(ix), grid.wave_index(iy), grid.wave_index(iz)]);
        s >= f.band[0] && s <= f.band[1]
    };
    let specs: [Spectrum; 3] = std::array::from_fn(|c| forward_real(grid, u.comp(c)));
    let mut band_sq = 0.0;
    for c in &specs {
        band_sq += det_sum_indexed(len, |i| if in_band(i) { c[i].norm_sqr() } else { 0.0 });
    }
    band_sq *= grid.volume() / (len as f64).powi(2);
    if band_sq <= 0.0 {
        return None;
    }
    let gain = f.injection_rate / band_sq;
    let masked = std::array::from_fn(|c| {
        let mut spec = specs[c].clone();
        spec.par_iter_mut().enumerate().for_each(|(i, v)| {
            if !in_band(i) {
                *v = num_complex::Complex::new(0.0, 0.0);
            }
        });
        inverse_to_real(grid, &spec)
    });
    Some((gain, masked))
}

/// Weighted energy balance over each element's support. `forcing` should
/// echo the solver configuration of the run that produced the series; pass
/// None for unforced data.
pub fn local_energy_budgets(
    series: &FieldSeries,
    cutoffs: &[RefinedCutoff],
    form: Form,
    forcing: Option<&ForcingSpec>,
) -> Result<Vec<LocalBudget>> {
    validate(series, cutoffs)?;
    let grid = series.grid();
    let (nu, mu, s) = transport_coefficients(series.params(), form);
    let times = series.times().to_vec();
    let n_t = times.len();
    let weights: Vec<ElementWeights> = cutoffs.iter().map(sparse_weights).collect();
    let temporal: Vec<(Vec<f64>, Vec<f64>)> =
        cutoffs.iter().map(|c| temporal_weights(c, &times)).collect();

    // Per element: dis, time, lap, pvf, cross, work, initial, final.
    let mut acc = vec![[0.0; 8]; cutoffs.len()];
    for k in 0..n_t {
        let snap = series.get(k)?;
        let gsq_u = grad_square(grid, &snap.u);
        let gsq_b = grad_square(grid, &snap.b);
        let force = forcing.and_then(|f| band_velocity(grid, &snap.u, f));
        let u = snap.u.components();
        let b = snap.b.components();
        let p = snap.p.data();

        let contribs: Vec<[f64; 6]> = weights
            .par_iter()
            .map(|w| {
                let n = w.idx.len();
                let q_dis = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    (nu * gsq_u[g] + s * mu * gsq_b[g]) * w.psi[j]
                });
                let q_en = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let uu = u[0][g] * u[0][g] + u[1][g] * u[1][g] + u[2][g] * u[2][g];
                    let bb = b[0][g] * b[0][g] + b[1][g] * b[1][g] + b[2][g] * b[2][g];
                    0.5 * (uu + s * bb) * w.psi[j]
                });
                let q_lap = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let uu = u[0][g] * u[0][g] + u[1][g] * u[1][g] + u[2][g] * u[2][g];
                    let bb = b[0][g] * b[0][g] + b[1][g] * b[1][g] + b[2][g] * b[2][g];
                    0.5 * (nu * uu + s * mu * bb) * w.lap[j]
                });
                let q_pvf = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let uu = u[0][g] * u[0][g] + u[1][g] * u[1][g] + u[2][g] * u[2][g];
                    let bb = b[0][g] * b[0][g] + b[1][g] * b[1][g] + b[2][g] * b[2][g];
                    let udotg =
                        u[0][g] * w.grad[0][j] + u[1][g] * w.grad[1][j] + u[2][g] * w.grad[2][j];
                    0.5 * (uu + 2.0 * s * bb + 2.0 * p[g]) * udotg
                });
                let q_cross = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let udotb = u[0][g] * b[0][g] + u[1][g] * b[1][g] + u[2][g] * b[2][g];
                    let bdotg =
                        b[0][g] * w.grad[0][j] + b[1][g] * w.grad[1][j] + b[2][g] * w.grad[2][j];
                    -s * udotb * bdotg
                });
                let q_work = match &force {
                    Some((gain, band)) => {
                        gain * det_sum_indexed(n, |j| {
                            let g = w.idx[j] as usize;
                            (band[0][g] * u[0][g] + band[1][g] * u[1][g] + band[2][g] * u[2][g])
                                * w.psi[j]
                        })
                    }
                    None => 0.0,
                };
                [q_dis, q_en, q_lap, q_pvf, q_cross, q_work]
            })
            .collect();

        for (e, (a, c)) in acc.iter_mut().zip(&contribs).enumerate() {
            let (w_eta, w_dot) = &temporal[e];
            a[0] += w_eta[k] * c[0];
            a[1] += w_dot[k] * c[1];
            a[2] += w_eta[k] * c[2];
            a[3] += w_eta[k] * c[3];
            a[4] += w_eta[k] * c[4];
            a[5] += w_eta[k] * c[5];
            if k == 0 {
                a[6] = cutoffs[e].eta(times[0]) * c[1];
            }
            if k == n_t - 1 {
                a[7] = cutoffs[e].eta(times[k]) * c[1];
            }
        }
    }

    let cell = grid.cell_volume();
    Ok(acc
        .into_iter()
        .map(|a| {
            let [dis, time, lap, pvf, cross, work, initial, fin] = a.map(|q| q * cell);
            LocalBudget {
                dissipation: dis,
                time_term: time,
                laplace_term: lap,
                pressure_velocity_flux: pvf,
                cross_term: cross,
                initial_energy: initial,
                final_energy: fin,
                forcing_work: work,
                defect: time + lap + pvf + cross + work + initial - fin - dis,
            }
        })
        .collect())
}

pub fn local_energy_budget(
    series: &FieldSeries,
    cutoff: &RefinedCutoff,
    form: Form,
    forcing: Option<&ForcingSpec>,
) -> Result<LocalBudget> {
    let mut v = local_energy_budgets(series, std::slice::from_ref(cutoff), form, forcing)?;
    Ok(v.pop().expect("one cutoff in, one budget out"))
}

/// Raw space-time integrals of the flux density for each element. Boundary
/// forms throughout, except kind V which is defined advectively. `b_coef`
/// is the coefficient of `|b|^2` inside the total-energy density.
fn flux_raw(
    series: &FieldSeries,
    cutoffs: &[RefinedCutoff],
    kind: FluxKind,
    s: f64,
    b_coef: f64,
) -> Result<Vec<f64>> {
    validate(series, cutoffs)?;
    let grid = series.grid();
    let times = series.times().to_vec();
    let weights: Vec<ElementWeights> = cutoffs.iter().map(sparse_weights).collect();
    let temporal: Vec<(Vec<f64>, Vec<f64>)> =
        cutoffs.iter().map(|c| temporal_weights(c, &times)).collect();

    let mut acc = vec![0.0; cutoffs.len()];
    for k in 0..times.len() {
        let snap = series.get(k)?;
        let grad_u = matches!(kind, FluxKind::V).then(|| gradient_tensor(grid, &snap.u));
        let u = snap.u.components();
        let b = snap.b.components();
        let p = snap.p.data();

        let contribs: Vec<f64> = weights
            .par_iter()
            .map(|w| {
                let n = w.idx.len();
                match kind {
                    FluxKind::U => det_sum_indexed(n, |j| {
                        let g = w.idx[j] as usize;
                        let uu = u[0][g] * u[0][g] + u[1][g] * u[1][g] + u[2][g] * u[2][g];
                        let udotg = u[0][g] * w.grad[0][j]
                            + u[1][g] * w.grad[1][j]
                            + u[2][g] * w.grad[2][j];
                        0.5 * uu * udotg
                    }),
                    FluxKind::B => det_sum_indexed(n, |j| {
                        let g = w.idx[j] as usize;
                        let bb = b[0][g] * b[0][g] + b[1][g] * b[1][g] + b[2][g] * b[2][g];
                        let udotg = u[0][g] * w.grad[0][j]
                            + u[1][g] * w.grad[1][j]
                            + u[2][g] * w.grad[2][j];
                        0.5 * bb * udotg
                    }),
                    FluxKind::P => det_sum_indexed(n, |j| {
                        let g = w.idx[j] as usize;
                        let udotg = u[0][g] * w.grad[0][j]
                            + u[1][g] * w.grad[1][j]
                            + u[2][g] * w.grad[2][j];
                        p[g] * udotg
                    }),
                    FluxKind::Ub => det_sum_indexed(n, |j| {
                        let g = w.idx[j] as usize;
                        let udotb = u[0][g] * b[0][g] + u[1][g] * b[1][g] + u[2][g] * b[2][g];
                        let bdotg = b[0][g] * w.grad[0][j]
                            + b[1][g] * w.grad[1][j]
                            + b[2][g] * w.grad[2][j];
                        -udotb * bdotg
                    }),
                    FluxKind::E => det_sum_indexed(n, |j| {
                        let g = w.idx[j] as usize;
                        let uu = u[0][g] * u[0][g] + u[1][g] * u[1][g] + u[2][g] * u[2][g];
                        let bb = b[0][g] * b[0][g] + b[1][g] * b[1][g] + b[2][g] * b[2][g];
                        let udotb = u[0][g] * b[0][g] + u[1][g] * b[1][g] + u[2][g] * b[2][g];
                        let udotg = u[0][g] * w.grad[0][j]
                            + u[1][g] * w.grad[1][j]
                            + u[2][g] * w.grad[2][j];
                        let bdotg = b[0][g] * w.grad[0][j]
                            + b[1][g] * w.grad[1][j]
                            + b[2][g] * w.grad[2][j];
                        0.5 * (uu + b_coef * bb + 2.0 * p[g]) * udotg - s * udotb * bdotg
                    }),
                    FluxKind::V => {
                        let gu = grad_u.as_ref().expect("gradient built for kind V");
                        det_sum_indexed(n, |j| {
                            let g = w.idx[j] as usize;
                            let mut v = 0.0;
                            for i in 0..3 {
                                for l in 0..3 {
                                    v += b[i][g] * gu[i][l][g] * b[l][g];
                                }
                            }
                            v * w.psi[j]
                        })
                    }
                    FluxKind::EInf => unreachable!("E_inf is assembled from the budget"),
                }
            })
            .collect();

        for (e, c) in contribs.iter().enumerate() {
            acc[e] += temporal[e].0[k] * c;
        }
    }

    let cell = grid.cell_volume();
    Ok(acc.into_iter().map(|a| a * cell).collect())
}

fn normalize(cutoffs: &[RefinedCutoff], kind: FluxKind, raw: Vec<f64>) -> Vec<FluxSample> {
    raw.into_iter()
        .enumerate()
        .map(|(element, v)| FluxSample {
            element,
            scale: cutoffs[element].r,
            kind,
            value: v / (cutoffs[element].t_horizon * cutoffs[element].r.powi(3)),
        })
        .collect()
}

/// Scale-normalized flux of the given kind for every element. Kind E uses
/// the fluid-pressure density; see [`flux_total_energy`] for the variant
/// that folds the magnetic pressure into p.
pub fn flux_samples(
    series: &FieldSeries,
    cutoffs: &[RefinedCutoff],
    kind: FluxKind,
    form: Form,
) -> Result<Vec<FluxSample>> {
    let (_, _, s) = transport_coefficients(series.params(), form);
    let raw = match kind {
        FluxKind::EInf => {
            let budgets = local_energy_budgets(series, cutoffs, form, None)?;
            budgets
                .iter()
                .map(|b| b.dissipation - b.time_term - b.laplace_term)
                .collect()
        }
        FluxKind::E => flux_raw(series, cutoffs, kind, s, 2.0 * s)?,
        _ => flux_raw(series, cutoffs, kind, s, 0.0)?,
    };
    Ok(normalize(cutoffs, kind, raw))
}

pub fn flux_component(
    series: &FieldSeries,
    cutoff: &RefinedCutoff,
    kind: FluxKind,
    form: Form,
) -> Result<FluxSample> {
    let mut v = flux_samples(series, std::slice::from_ref(cutoff), kind, form)?;
    Ok(v.pop().expect("one cutoff in, one sample out"))
}

/// Total-energy flux under an explicit pressure convention. With the fluid
/// convention the magnetic energy density carries weight `2s` (magnetic
/// pressure kept explicit); with the total convention the weight drops to
/// `s`, the two differing by exactly `s/2 int |b|^2 (u . grad phi)`.
pub fn flux_total_energy(
    series: &FieldSeries,
    cutoff: &RefinedCutoff,
    form: Form,
    convention: PressureConvention,
) -> Result<FluxSample> {
    let (_, _, s) = transport_coefficients(series.params(), form);
    let b_coef = match convention {
        PressureConvention::Fluid => 2.0 * s,
        PressureConvention::Total => s,
    };
    let raw = flux_raw(series, std::slice::from_ref(cutoff), FluxKind::E, s, b_coef)?;
    let mut v = normalize(std::slice::from_ref(cutoff), FluxKind::E, raw);
    Ok(v.pop().expect("one cutoff in, one sample out"))
}

/// Both sides of the integration-by-parts identity for one density kind.
/// Only the single-density kinds have a two-sided split; the combined
/// total-energy kinds are rejected.
pub fn flux_forms(series: &FieldSeries, cutoff: &RefinedCutoff, kind: FluxKind) -> Result<FluxForms> {
    if matches!(kind, FluxKind::E | FluxKind::EInf) {
        return Err(Error::Config(
            "total-energy kinds have no two-sided split; use flux_samples".into(),
        ));
    }
    validate(series, std::slice::from_ref(cutoff))?;
    let grid = series.grid();
    let times = series.times().to_vec();
    let w = sparse_weights(cutoff);
    let (w_eta, _) = temporal_weights(cutoff, &times);

    let needs_gu = matches!(kind, FluxKind::U | FluxKind::Ub | FluxKind::V);
    let needs_gb = matches!(kind, FluxKind::B | FluxKind::Ub | FluxKind::V);

    let mut adv = 0.0;
    let mut bnd = 0.0;
    for k in 0..times.len() {
        let snap = series.get(k)?;
        let gu = needs_gu.then(|| gradient_tensor(grid, &snap.u));
        let gb = needs_gb.then(|| gradient_tensor(grid, &snap.b));
        let gp = matches!(kind, FluxKind::P).then(|| {
            let spec = forward_real(grid, snap.p.data());
            let t: [Vec<f64>; 3] =
                std::array::from_fn(|i| inverse_to_real(grid, &deriv_spec(grid, &spec, i)));
            t
        });
        let u = snap.u.components();
        let b = snap.b.components();
        let p = snap.p.data();
        let n = w.idx.len();

        let (q_adv, q_bnd) = match kind {
            FluxKind::U => {
                let gu = gu.as_ref().unwrap();
                let a = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let mut v = 0.0;
                    for i in 0..3 {
                        for l in 0..3 {
                            v += u[i][g] * gu[i][l][g] * u[l][g];
                        }
                    }
                    -v * w.psi[j]
                });
                let bd = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let uu = u[0][g] * u[0][g] + u[1][g] * u[1][g] + u[2][g] * u[2][g];
                    let udotg =
                        u[0][g] * w.grad[0][j] + u[1][g] * w.grad[1][j] + u[2][g] * w.grad[2][j];
                    0.5 * uu * udotg
                });
                (a, bd)
            }
            FluxKind::B => {
                let gb = gb.as_ref().unwrap();
                let a = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let mut v = 0.0;
                    for i in 0..3 {
                        for l in 0..3 {
                            v += u[i][g] * gb[i][l][g] * b[l][g];
                        }
                    }
                    -v * w.psi[j]
                });
                let bd = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let bb = b[0][g] * b[0][g] + b[1][g] * b[1][g] + b[2][g] * b[2][g];
                    let udotg =
                        u[0][g] * w.grad[0][j] + u[1][g] * w.grad[1][j] + u[2][g] * w.grad[2][j];
                    0.5 * bb * udotg
                });
                (a, bd)
            }
            FluxKind::P => {
                let gp = gp.as_ref().unwrap();
                let a = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    -(gp[0][g] * u[0][g] + gp[1][g] * u[1][g] + gp[2][g] * u[2][g]) * w.psi[j]
                });
                let bd = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let udotg =
                        u[0][g] * w.grad[0][j] + u[1][g] * w.grad[1][j] + u[2][g] * w.grad[2][j];
                    p[g] * udotg
                });
                (a, bd)
            }
            FluxKind::Ub => {
                let gu = gu.as_ref().unwrap();
                let gb = gb.as_ref().unwrap();
                let a = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let mut v = 0.0;
                    for i in 0..3 {
                        for l in 0..3 {
                            v += b[i][g] * gb[i][l][g] * u[l][g] + b[i][g] * gu[i][l][g] * b[l][g];
                        }
                    }
                    v * w.psi[j]
                });
                let bd = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let udotb = u[0][g] * b[0][g] + u[1][g] * b[1][g] + u[2][g] * b[2][g];
                    let bdotg =
                        b[0][g] * w.grad[0][j] + b[1][g] * w.grad[1][j] + b[2][g] * w.grad[2][j];
                    -udotb * bdotg
                });
                (a, bd)
            }
            FluxKind::V => {
                let gu = gu.as_ref().unwrap();
                let gb = gb.as_ref().unwrap();
                let a = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let mut v = 0.0;
                    for i in 0..3 {
                        for l in 0..3 {
                            v += b[i][g] * gu[i][l][g] * b[l][g];
                        }
                    }
                    v * w.psi[j]
                });
                let bd = det_sum_indexed(n, |j| {
                    let g = w.idx[j] as usize;
                    let udotb = u[0][g] * b[0][g] + u[1][g] * b[1][g] + u[2][g] * b[2][g];
                    let bdotg =
                        b[0][g] * w.grad[0][j] + b[1][g] * w.grad[1][j] + b[2][g] * w.grad[2][j];
                    let mut v = 0.0;
                    for i in 0..3 {
                        for l in 0..3 {
                            v += b[i][g] * gb[i][l][g] * u[l][g];
                        }
                    }
                    -udotb * bdotg - v * w.psi[j]
                });
                (a, bd)
            }
            FluxKind::E | FluxKind::EInf => unreachable!("rejected above"),
        };
        adv += w_eta[k] * q_adv;
        bnd += w_eta[k] * q_bnd;
    }

    let norm = grid.cell_volume() / (cutoff.t_horizon * cutoff.r.powi(3));
    Ok(FluxForms {
        advective: adv * norm,
        boundary: bnd * norm,
    })
}
