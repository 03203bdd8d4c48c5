//! Pseudo-spectral integrator for incompressible 3D MHD on the periodic box.
//!
//! Time stepping is classical RK4 wrapped in an integrating factor, so the
//! viscous and resistive terms are treated exactly by heat-kernel factors
//! and only the nonlinear terms see the Runge-Kutta error. The nonlinear
//! terms are evaluated in rotational form and Leray-projected; the induction
//! term is assembled as `curl(u x b)` directly in spectral space, which
//! keeps the magnetic field solenoidal to machine precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{ScalarField, VectorField};
use crate::gen::{gen_field, shell_of, FieldSpec};
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::reduce::det_sum_indexed;
use crate::series::{FieldSeries, SeriesWriter, Snapshot};
use crate::spectral::{dealias_spec, project_spec, wavevec, Spectrum};

/// Which system the coefficients parameterize: the dimensional equations
/// with transport coefficients `nu`, `eta`, or the dimensionless form where
/// diffusion carries `1/Re`, `1/Rm` and the Lorentz force carries the
/// coupling `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    #[default]
    Dimensional,
    Dimensionless,
}

/// Solenoidal band forcing: adds `f = rate * u_band / ||u_band||^2` with
/// `u_band` the restriction of u to integer shells `band[0]..=band[1]`.
/// Band orthogonality makes the instantaneous injection exactly `rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub band: [u32; 2],
    pub injection_rate: f64,
}

fn default_true() -> bool {
    true
}

/// Full description of one run; serializable as the `solver` block of a
/// JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: Grid,
    pub params: PhysParams,
    pub dt: f64,
    pub t_end: f64,
    pub init_u: FieldSpec,
    pub init_b: FieldSpec,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    /// 2/3-rule dealiasing of the nonlinear terms.
    #[serde(default = "default_true")]
    pub dealias: bool,
    /// Disable to integrate the pure diffusion system (test hook).
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    /// Shrink dt when the CFL bound tightens instead of aborting.
    #[serde(default)]
    pub adaptive_dt: bool,
    #[serde(default)]
    pub form: Form,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let Some(f) = &self.forcing {
            if f.band[0] < 1 || f.band[0] > f.band[1] {
                return Err(Error::Config(format!(
                    "forcing band must satisfy 1 <= lo <= hi, got {:?}",
                    f.band
                )));
            }
            if !(f.injection_rate.is_finite() && f.injection_rate >= 0.0) {
                return Err(Error::Config("forcing rate must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Effective (viscosity, resistivity, Lorentz coupling) for the form.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        transport_coefficients(&self.params, self.form)
    }
}

/// Effective (viscosity, resistivity, Lorentz coupling) implied by a
/// parameter set under the given form. Budget and diagnostic quadratures
/// must weigh fields exactly as the evolution does.
pub fn transport_coefficients(params: &PhysParams, form: Form) -> (f64, f64, f64) {
    match form {
        Form::Dimensional => (params.nu, params.eta, 1.0),
        Form::Dimensionless => (1.0 / params.re, 1.0 / params.rm, params.coupling()),
    }
}

/// Counters and integrals accumulated across a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub steps: usize,
    /// Steps where the CFL bound forced a smaller dt.
    pub cfl_reductions: usize,
    pub dt_final: f64,
    /// Weighted energy `(1/2) int (|u|^2 + s |b|^2)` at t = 0 and t_end.
    pub energy_initial: f64,
    pub energy_final: f64,
    /// Time integral of `nu int |grad u|^2 + s eta int |grad b|^2`,
    /// trapezoid-accumulated every step.
    pub dissipation_integral: f64,
    /// Nominal forcing work `rate * t_end` (zero when unforced).
    pub injection_integral: f64,
}

/// CFL bound: dt must stay below `0.5 h / max|u,b|`.
const CFL_FACTOR: f64 = 0.5;
/// Relative slack allowed on the unforced energy-monotonicity guard.
const ENERGY_SLACK: f64 = 1e-8;

struct SpecPair {
    u: [Spectrum; 3],
    b: [Spectrum; 3],
}

fn spec_is_zero(c: &[Spectrum; 3]) -> bool {
    c.iter()
        .all(|s| s.iter().all(|v| v.re == 0.0 && v.im == 0.0))
}

enum StepOutcome {
    /// dt actually used, after any CFL clamp.
    Advanced { dt_used: f64, cfl_clamped: bool },
}

/// Spectral workhorse shared by `step_once` and `run`.
struct Stepper {
    grid: Grid,
    nu: f64,
    eta: f64,
    s: f64,
    dealias: bool,
    nonlinear: bool,
    adaptive: bool,
    forcing: Option<ForcingSpec>,
    /// |k|^2 per mode.
    k2: Vec<f64>,
    /// Shell index per mode, for band forcing.
    shells: Vec<u32>,
    /// Magnetic work is skipped entirely when b starts (and stays) zero.
    magnetic: bool,
    /// Heat-kernel half-step factors keyed by dt bits.
    decay_cache: Mutex<HashMap<u64, Arc<(Vec<f64>, Vec<f64>)>>>,
}

impl Stepper {
    fn new(cfg: &SolverConfig, magnetic: bool) -> Self {
        let grid = cfg.grid;
        let (nu, eta, s) = cfg.coefficients();
        let k2: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let [kx, ky, kz] = wavevec(grid, i);
                kx * kx + ky * ky + kz * kz
            })
            .collect();
        let shells: Vec<u32> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let [ix, iy, iz] = grid.coords_of(i);
                shell_of([grid.wave_index(ix), grid.wave_index(iy), grid.wave_index(iz)])
            })
            .collect();
        Stepper {
            grid,
            nu,
            eta,
            s,
            dealias: cfg.dealias,
            nonlinear: cfg.nonlinear,
            adaptive: cfg.adaptive_dt,
            forcing: cfg.forcing,
            k2,
            shells,
            magnetic,
            decay_cache: Mutex::new(HashMap::new()),
        }
    }

    fn decay_factors(&self, dt: f64) -> Arc<(Vec<f64>, Vec<f64>)> {
        let key = dt.to_bits();
        if let Some(hit) = self.decay_cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let make = |coef: f64| -> Vec<f64> {
            self.k2
                .par_iter()
                .map(|&k2| (-coef * k2 * dt * 0.5).exp())
                .collect()
        };
        let factors = Arc::new((make(self.nu), make(self.eta)));
        let mut cache = self.decay_cache.lock().unwrap();
        if cache.len() > 8 {
            cache.clear();
        }
        cache.insert(key, factors.clone());
        factors
    }

    /// Weighted energy `(1/2) int (|u|^2 + s |b|^2)` via Parseval.
    fn energy(&self, state: &SpecPair) -> f64 {
        let norm = self.grid.volume() / (self.grid.len() as f64).powi(2);
        let len = self.grid.len();
        let mut total = 0.0;
        for c in &state.u {
            total += det_sum_indexed(len, |i| c[i].norm_sqr());
        }
        if self.magnetic {
            for c in &state.b {
                total += self.s * det_sum_indexed(len, |i| c[i].norm_sqr());
            }
        }
        0.5 * norm * total
    }

    /// Instantaneous dissipation `nu int |grad u|^2 + s eta int |grad b|^2`.
    fn dissipation(&self, state: &SpecPair) -> f64 {
        let norm = self.grid.volume() / (self.grid.len() as f64).powi(2);
        let len = self.grid.len();
        let mut du = 0.0;
        for c in &state.u {
            du += det_sum_indexed(len, |i| self.k2[i] * c[i].norm_sqr());
        }
        let mut db = 0.0;
        if self.magnetic {
            for c in &state.b {
                db += det_sum_indexed(len, |i| self.k2[i] * c[i].norm_sqr());
            }
        }
        norm * (self.nu * du + self.s * self.eta * db)
    }

    /// Nonlinear right-hand sides in spectral space, plus `max(|u|, |b|)`
    /// sampled from the physical-space fields (for the CFL bound).
    fn rhs(&self, state: &SpecPair) -> (SpecPair, f64) {
        let grid = self.grid;
        if !self.nonlinear {
            let zero = || [(); 3].map(|_| vec![Complex::default(); grid.len()]);
            return (SpecPair { u: zero(), b: zero() }, 0.0);
        }

        let u = [0, 1, 2].map(|i| fft::inverse_to_real(grid, &state.u[i]));
        let w_spec = crate::spectral::curl_spec(grid, &state.u);
        let w = [0, 1, 2].map(|i| fft::inverse_to_real(grid, &w_spec[i]));
        drop(w_spec);

        let mut speed = max_speed(&u);

        // Momentum: -P[w x u - s j x b]; the gradient halves of advection
        // and Lorentz force are absorbed into pressure by the projection.
        let mut rot: [Vec<f64>; 3] = cross(&w, &u);
        drop(w);

        let n_b = if self.magnetic {
            let b = [0, 1, 2].map(|i| fft::inverse_to_real(grid, &state.b[i]));
            let j_spec = crate::spectral::curl_spec(grid, &state.b);
            let j = [0, 1, 2].map(|i| fft::inverse_to_real(grid, &j_spec[i]));
            drop(j_spec);
            speed = speed.max(max_speed(&b));
            let jxb = cross(&j, &b);
            drop(j);
            for axis in 0..3 {
                rot[axis]
                    .par_iter_mut()
                    .zip(jxb[axis].par_iter())
                    .for_each(|(a, &l)| *a = -(*a) + self.s * l);
            }
            // Induction: curl(u x b) assembled spectrally, so the result is
            // exactly divergence-free.
            let uxb = cross(&u, &b);
            let uxb_spec = [0, 1, 2].map(|i| fft::forward_real(grid, &uxb[i]));
            let mut n_b = crate::spectral::curl_spec(grid, &uxb_spec);
            if self.dealias {
                for c in n_b.iter_mut() {
                    dealias_spec(grid, c);
                }
            }
            n_b
        } else {
            for axis in 0..3 {
                rot[axis].par_iter_mut().for_each(|a| *a = -(*a));
            }
            [(); 3].map(|_| vec![Complex::default(); grid.len()])
        };
        drop(u);

        let mut n_u = [0, 1, 2].map(|i| fft::forward_real(grid, &rot[i]));
        project_spec(grid, &mut n_u);
        if self.dealias {
            for c in n_u.iter_mut() {
                dealias_spec(grid, c);
            }
        }
        self.add_forcing(&mut n_u, &state.u);
        (SpecPair { u: n_u, b: n_b }, speed)
    }

    fn add_forcing(&self, n_u: &mut [Spectrum; 3], u_hat: &[Spectrum; 3]) {
        let Some(f) = &self.forcing else { return };
        if f.injection_rate == 0.0 {
            return;
        }
        let len = self.grid.len();
        let norm = self.grid.volume() / (len as f64).powi(2);
        let in_band = |i: usize| self.shells[i] >= f.band[0] && self.shells[i] <= f.band[1];
        let mut band_sq = 0.0;
        for c in u_hat {
            band_sq += det_sum_indexed(len, |i| if in_band(i) { c[i].norm_sqr() } else { 0.0 });
        }
        let band_sq = norm * band_sq;
        if band_sq <= 0.0 {
            // Nothing to push against; skipping is the only honest move.
            return;
        }
        let gain = f.injection_rate / band_sq;
        for (nc, uc) in n_u.iter_mut().zip(u_hat) {
            nc.par_iter_mut().enumerate().for_each(|(i, n)| {
                if in_band(i) {
                    *n += uc[i] * gain;
                }
            });
        }
    }

    /// One integrating-factor RK4 step. The CFL bound is evaluated on the
    /// first-stage fields before any state is committed; depending on
    /// policy a violation either aborts or clamps dt for this and later
    /// steps.
    fn step(
        &self,
        state: &mut SpecPair,
        dt_proposed: f64,
        step_idx: usize,
        time: f64,
    ) -> Result<StepOutcome> {
        let (a, speed) = self.rhs(state);

        let limit = if speed == 0.0 {
            f64::INFINITY
        } else {
            CFL_FACTOR * self.grid.spacing() / speed
        };
        let (dt, cfl_clamped) = if dt_proposed > limit {
            if self.adaptive {
                (0.9 * limit, true)
            } else {
                return Err(Error::Cfl {
                    step: step_idx,
                    time,
                    dt: dt_proposed,
                    limit,
                    speed,
                });
            }
        } else {
            (dt_proposed, false)
        };

        let factors = self.decay_factors(dt);
        let (eu, eb) = (&factors.0, &factors.1);

        // B = N(E u + dt/2 E A)
        let staged = self.staged(state, &a, eu, eb, 0.5 * dt, true);
        let (b, _) = self.rhs(&staged);
        drop(staged);

        // C = N(E u + dt/2 B)
        let staged = self.staged(state, &b, eu, eb, 0.5 * dt, false);
        let (c, _) = self.rhs(&staged);
        drop(staged);

        // D = N(E^2 u + dt E C)
        let staged = self.staged2(state, &c, eu, eb, dt);
        let (d, _) = self.rhs(&staged);
        drop(staged);

        // u_{n+1} = E^2 u + dt/6 (E^2 A + 2 E B + 2 E C + D)
        let combine = |x: &mut [Spectrum; 3],
                       a: &[Spectrum; 3],
                       b: &[Spectrum; 3],
                       c: &[Spectrum; 3],
                       d: &[Spectrum; 3],
                       e: &[f64]| {
            for axis in 0..3 {
                x[axis]
                    .par_iter_mut()
                    .zip(a[axis].par_iter())
                    .zip(b[axis].par_iter())
                    .zip(c[axis].par_iter())
                    .zip(d[axis].par_iter())
                    .zip(e.par_iter())
                    .for_each(|(((((x, a), b), c), d), &e)| {
                        let e2 = e * e;
                        *x = *x * e2
                            + (*a * e2 + (*b + *c) * (2.0 * e) + *d) * (dt / 6.0);
                    });
            }
        };
        combine(&mut state.u, &a.u, &b.u, &c.u, &d.u, eu);
        if self.magnetic {
            combine(&mut state.b, &a.b, &b.b, &c.b, &d.b, eb);
        }
        Ok(StepOutcome::Advanced { dt_used: dt, cfl_clamped })
    }

    /// `E (u + h k)` when `scale_k`, else `E u + h k`.
    fn staged(
        &self,
        state: &SpecPair,
        k: &SpecPair,
        eu: &[f64],
        eb: &[f64],
        h: f64,
        scale_k: bool,
    ) -> SpecPair {
        let build = |x: &[Spectrum; 3], k: &[Spectrum; 3], e: &[f64]| -> [Spectrum; 3] {
            [0, 1, 2].map(|axis| {
                x[axis]
                    .par_iter()
                    .zip(k[axis].par_iter())
                    .zip(e.par_iter())
                    .map(|((x, k), &e)| {
                        if scale_k {
                            (*x + *k * h) * e
                        } else {
                            *x * e + *k * h
                        }
                    })
                    .collect()
            })
        };
        SpecPair {
            u: build(&state.u, &k.u, eu),
            b: if self.magnetic {
                build(&state.b, &k.b, eb)
            } else {
                state.b.clone()
            },
        }
    }

    /// `E^2 u + h E k`.
    fn staged2(&self, state: &SpecPair, k: &SpecPair, eu: &[f64], eb: &[f64], h: f64) -> SpecPair {
        let build = |x: &[Spectrum; 3], k: &[Spectrum; 3], e: &[f64]| -> [Spectrum; 3] {
            [0, 1, 2].map(|axis| {
                x[axis]
                    .par_iter()
                    .zip(k[axis].par_iter())
                    .zip(e.par_iter())
                    .map(|((x, k), &e)| *x * (e * e) + *k * (h * e))
                    .collect()
            })
        };
        SpecPair {
            u: build(&state.u, &k.u, eu),
            b: if self.magnetic {
                build(&state.b, &k.b, eb)
            } else {
                state.b.clone()
            },
        }
    }

    fn to_snapshot(&self, state: &SpecPair, time: f64) -> Result<Snapshot> {
        let grid = self.grid;
        let u = VectorField::from_components(
            grid,
            [0, 1, 2].map(|i| fft::inverse_to_real(grid, &state.u[i])),
        )?;
        let b = VectorField::from_components(
            grid,
            [0, 1, 2].map(|i| fft::inverse_to_real(grid, &state.b[i])),
        )?;
        if !(u.max_abs().is_finite() && b.max_abs().is_finite()) {
            return Err(Error::Instability(format!(
                "non-finite field values at t = {time}"
            )));
        }
        let p = pressure_from_fields(&u, &b, self.s, PressureConvention::Fluid)?;
        Ok(Snapshot { time, u, b, p })
    }
}

fn max_speed(v: &[Vec<f64>; 3]) -> f64 {
    let len = v[0].len();
    (0..len)
        .into_par_iter()
        .map(|i| {
            let (a, b, c) = (v[0][i], v[1][i], v[2][i]);
            (a * a + b * b + c * c).sqrt()
        })
        .reduce(|| 0.0, f64::max)
}

fn cross(a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    let comp = |j: usize, k: usize| -> Vec<f64> {
        a[j].par_iter()
            .zip(a[k].par_iter())
            .zip(b[j].par_iter())
            .zip(b[k].par_iter())
            .map(|(((aj, ak), bj), bk)| aj * bk - ak * bj)
            .collect()
    };
    [comp(1, 2), comp(2, 0), comp(0, 1)]
}

/// Gauge and convention for recovered pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureConvention {
    /// Thermodynamic pressure; the magnetic pressure `s |b|^2 / 2` is kept
    /// an explicit separate term.
    Fluid,
    /// Total pressure `p + s |b|^2 / 2`, the quantity the Poisson equation
    /// delivers directly.
    Total,
}

/// Zero-mean pressure from instantaneous fields: solves
/// `lap q = -div[(u.grad)u - s (b.grad)b]` spectrally and, for the fluid
/// convention, subtracts the zero-mean magnetic pressure from `q`.
pub fn pressure_from_fields(
    u: &VectorField,
    b: &VectorField,
    s: f64,
    convention: PressureConvention,
) -> Result<ScalarField> {
    let grid = u.grid();
    if b.grid() != grid {
        return Err(Error::Grid("pressure inputs live on different grids".into()));
    }
    for (name, f) in [("u", u), ("b", b)] {
        let div = crate::spectral::relative_divergence(f);
        if div > 1e-8 {
            return Err(Error::Solver(format!(
                "{name} is not solenoidal (relative divergence {div:.3e})"
            )));
        }
    }

    // For solenoidal v, div (v.grad)v = sum_ij d_i v_j d_j v_i.
    let grad_sum = |v: &VectorField, sign: f64, acc: &mut Vec<f64>| {
        let spec = [0, 1, 2].map(|axis| fft::forward_real(grid, v.comp(axis)));
        for i in 0..3 {
            for j in 0..3 {
                let di_vj =
                    fft::inverse_to_real(grid, &crate::spectral::deriv_spec(grid, &spec[j], i));
                let dj_vi =
                    fft::inverse_to_real(grid, &crate::spectral::deriv_spec(grid, &spec[i], j));
                acc.par_iter_mut()
                    .zip(di_vj.par_iter())
                    .zip(dj_vi.par_iter())
                    .for_each(|((a, x), y)| *a += sign * x * y);
            }
        }
    };

    let mut source = vec![0.0; grid.len()];
    grad_sum(u, -1.0, &mut source);
    if s != 0.0 && b.max_abs() > 0.0 {
        grad_sum(b, s, &mut source);
    }
    let q = crate::spectral::poisson_zero_mean(&ScalarField::from_data(grid, source)?);

    match convention {
        PressureConvention::Total => Ok(q),
        PressureConvention::Fluid => {
            let mag = b.norm_sq();
            let mean = mag.mean()?;
            let data: Vec<f64> = q
                .data()
                .par_iter()
                .zip(mag.data().par_iter())
                .map(|(q, m)| q - 0.5 * s * (m - mean))
                .collect();
            ScalarField::from_data(grid, data)
        }
    }
}

/// Integrate the configured system, collecting snapshots every `stride`
/// steps plus the initial and final states. With `out_dir` set, snapshots
/// spill to disk and the returned series reads them back lazily.
pub fn run(
    cfg: &SolverConfig,
    stride: usize,
    out_dir: Option<&std::path::Path>,
) -> Result<(FieldSeries, RunStats)> {
    cfg.validate()?;
    let grid = cfg.grid;
    let stride = stride.max(1);

    let u0 = gen_field(grid, &cfg.init_u)?;
    let b0 = gen_field(grid, &cfg.init_b)?;
    let mut state = SpecPair {
        u: [0, 1, 2].map(|i| fft::forward_real(grid, u0.comp(i))),
        b: [0, 1, 2].map(|i| fft::forward_real(grid, b0.comp(i))),
    };
    drop((u0, b0));
    project_spec(grid, &mut state.u);
    project_spec(grid, &mut state.b);
    if cfg.dealias {
        for c in state.u.iter_mut().chain(state.b.iter_mut()) {
            dealias_spec(grid, c);
        }
    }

    let magnetic = !spec_is_zero(&state.b);
    let stepper = Stepper::new(cfg, magnetic);

    let mut sink = match out_dir {
        Some(dir) => SnapshotSink::Disk(SeriesWriter::create(dir, grid, cfg.params)?),
        None => SnapshotSink::Memory(Vec::new()),
    };

    let mut stats = RunStats {
        steps: 0,
        cfl_reductions: 0,
        dt_final: cfg.dt,
        energy_initial: stepper.energy(&state),
        energy_final: 0.0,
        dissipation_integral: 0.0,
        injection_integral: 0.0,
    };

    let forced = cfg.forcing.map(|f| f.injection_rate > 0.0).unwrap_or(false);
    let mut last_snapshot_energy = stats.energy_initial;

    sink.push(stepper.to_snapshot(&state, 0.0)?)?;

    let mut t = 0.0;
    let mut dt = cfg.dt;
    let mut diss_prev = stepper.dissipation(&state);
    let mut since_snapshot = 0usize;
    let t_eps = 1e-12 * cfg.t_end;

    while t < cfg.t_end - t_eps {
        let proposed = dt.min(cfg.t_end - t);
        let StepOutcome::Advanced { dt_used, cfl_clamped } =
            stepper.step(&mut state, proposed, stats.steps, t)?;
        if cfl_clamped {
            stats.cfl_reductions += 1;
            dt = dt_used;
        }
        stats.dt_final = dt;

        t += dt_used;
        stats.steps += 1;
        since_snapshot += 1;

        let diss = stepper.dissipation(&state);
        if !diss.is_finite() {
            return Err(Error::Instability(format!(
                "non-finite dissipation at t = {t}"
            )));
        }
        stats.dissipation_integral += 0.5 * dt_used * (diss_prev + diss);
        diss_prev = diss;

        let at_end = t >= cfg.t_end - t_eps;
        if since_snapshot >= stride || at_end {
            since_snapshot = 0;
            let energy = stepper.energy(&state);
            if !forced && energy > last_snapshot_energy * (1.0 + ENERGY_SLACK) {
                return Err(Error::Instability(format!(
                    "energy grew from {last_snapshot_energy} to {energy} in an unforced run at t = {t}"
                )));
            }
            last_snapshot_energy = energy;
            sink.push(stepper.to_snapshot(&state, t)?)?;
        }
    }

    stats.energy_final = stepper.energy(&state);
    if forced {
        stats.injection_integral = cfg.forcing.unwrap().injection_rate * cfg.t_end;
    }

    let series = match sink {
        SnapshotSink::Memory(snaps) => FieldSeries::in_memory(grid, cfg.params, snaps)?,
        SnapshotSink::Disk(writer) => writer.finish()?,
    };
    Ok((series, stats))
}

enum SnapshotSink {
    Memory(Vec<Snapshot>),
    Disk(SeriesWriter),
}

impl SnapshotSink {
    fn push(&mut self, snap: Snapshot) -> Result<()> {
        match self {
            SnapshotSink::Memory(v) => {
                v.push(snap);
                Ok(())
            }
            SnapshotSink::Disk(w) => w.append(&snap),
        }
    }
}

/// Advance a (u, b) pair by one RK4 step of `cfg.dt`; exposed for
/// step-level tests against closed-form decay.
pub fn step_once(
    cfg: &SolverConfig,
    u: &VectorField,
    b: &VectorField,
) -> Result<(VectorField, VectorField)> {
    cfg.validate()?;
    let grid = cfg.grid;
    let mut state = SpecPair {
        u: [0, 1, 2].map(|i| fft::forward_real(grid, u.comp(i))),
        b: [0, 1, 2].map(|i| fft::forward_real(grid, b.comp(i))),
    };
    let stepper = Stepper::new(cfg, !spec_is_zero(&state.b));
    stepper.step(&mut state, cfg.dt, 0, 0.0)?;
    let u1 = VectorField::from_components(
        grid,
        [0, 1, 2].map(|i| fft::inverse_to_real(grid, &state.u[i])),
    )?;
    let b1 = VectorField::from_components(
        grid,
        [0, 1, 2].map(|i| fft::inverse_to_real(grid, &state.b[i])),
    )?;
    Ok((u1, b1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TWO_PI;

    fn base_config(n: usize, nu: f64, eta: f64) -> SolverConfig {
        let grid = Grid::new(n, TWO_PI).unwrap();
        SolverConfig {
            grid,
            params: PhysParams::from_transport(nu, eta, 1.0, 1.0).unwrap(),
            dt: 1e-2,
            t_end: 0.1,
            init_u: FieldSpec::Zero,
            init_b: FieldSpec::Zero,
            forcing: None,
            dealias: true,
            nonlinear: true,
            adaptive_dt: false,
            form: Form::Dimensional,
        }
    }

    #[test]
    fn single_mode_decays_at_heat_kernel_rate() {
        let mut cfg = base_config(16, 0.05, 0.02);
        cfg.nonlinear = false;
        let grid = cfg.grid;
        let u0 = gen_field(grid, &FieldSpec::SineShear { k: 2 }).unwrap();
        let b0 = VectorField::zeros(grid);
        let (u1, _) = step_once(&cfg, &u0, &b0).unwrap();
        let decay = (-cfg.params.nu * 4.0 * cfg.dt).exp();
        let err = u1
            .comp(0)
            .iter()
            .zip(u0.comp(0))
            .map(|(a, b)| (a - b * decay).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "decay error {err}");
    }

    #[test]
    fn magnetic_mode_decays_at_resistive_rate() {
        let mut cfg = base_config(16, 0.05, 0.02);
        cfg.nonlinear = false;
        let grid = cfg.grid;
        let b0 = gen_field(grid, &FieldSpec::SineShear { k: 3 }).unwrap();
        let u0 = VectorField::zeros(grid);
        let (_, b1) = step_once(&cfg, &u0, &b0).unwrap();
        let decay = (-cfg.params.eta * 9.0 * cfg.dt).exp();
        let err = b1
            .comp(0)
            .iter()
            .zip(b0.comp(0))
            .map(|(a, b)| (a - b * decay).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "decay error {err}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let cfg = base_config(16, 0.01, 0.01);
        let (series, stats) = run(&cfg, 2, None).unwrap();
        assert_eq!(stats.energy_final, 0.0);
        for i in 0..series.len() {
            assert_eq!(series.get(i).unwrap().u.max_abs(), 0.0);
        }
    }

    #[test]
    fn elsasser_fixed_point_is_preserved() {
        let mut cfg = base_config(16, 0.02, 0.02);
        cfg.init_u = FieldSpec::Abc { a: 1.0, b: 1.0, c: 1.0 };
        cfg.init_b = FieldSpec::Abc { a: 1.0, b: 1.0, c: 1.0 };
        cfg.t_end = 0.05;
        cfg.dt = 5e-3;
        let (series, _) = run(&cfg, 10, None).unwrap();
        let last = series.get(series.len() - 1).unwrap();
        let mut gap = 0.0f64;
        for axis in 0..3 {
            for (a, b) in last.u.comp(axis).iter().zip(last.b.comp(axis)) {
                gap = gap.max((a - b).abs());
            }
        }
        assert!(gap <= 1e-8, "u and b separated by {gap}");
    }

    #[test]
    fn unforced_energy_is_monotone() {
        let mut cfg = base_config(32, 0.01, 0.01);
        cfg.init_u = FieldSpec::OrszagTang;
        cfg.init_b = FieldSpec::OrszagTangB;
        cfg.t_end = 0.2;
        cfg.dt = 5e-3;
        let (series, stats) = run(&cfg, 5, None).unwrap();
        assert!(stats.energy_final < stats.energy_initial);
        let mut prev = f64::INFINITY;
        for i in 0..series.len() {
            let s = series.get(i).unwrap();
            let e = 0.5 * (s.u.energy_integral().unwrap() + s.b.energy_integral().unwrap());
            assert!(e <= prev * (1.0 + 1e-8), "energy rose at snapshot {i}");
            prev = e;
        }
    }

    #[test]
    fn global_energy_balance_closes() {
        let mut cfg = base_config(32, 0.02, 0.02);
        cfg.init_u = FieldSpec::OrszagTang;
        cfg.init_b = FieldSpec::OrszagTangB;
        cfg.t_end = 0.25;
        cfg.dt = 2.5e-3;
        let (_, stats) = run(&cfg, 100, None).unwrap();
        let de = stats.energy_initial - stats.energy_final;
        let rel = (de - stats.dissipation_integral).abs() / de;
        assert!(rel < 1e-2, "balance residual {rel}");
    }

    #[test]
    fn cfl_violation_aborts_with_diagnostics() {
        let mut cfg = base_config(16, 0.01, 0.01);
        cfg.init_u = FieldSpec::OrszagTang;
        cfg.dt = 1.0;
        cfg.t_end = 2.0;
        match run(&cfg, 1, None) {
            Err(Error::Cfl { step, .. }) => assert_eq!(step, 0),
            Err(other) => panic!("expected CFL abort, got {other:?}"),
            Ok(_) => panic!("expected CFL abort, run succeeded"),
        }
    }

    #[test]
    fn adaptive_mode_records_reductions() {
        let mut cfg = base_config(16, 0.05, 0.05);
        cfg.init_u = FieldSpec::OrszagTang;
        cfg.dt = 0.5;
        cfg.t_end = 0.2;
        cfg.adaptive_dt = true;
        let (_, stats) = run(&cfg, 4, None).unwrap();
        assert!(stats.cfl_reductions > 0);
        assert!(stats.dt_final < 0.5);
    }

    #[test]
    fn forcing_injects_at_configured_rate() {
        let mut cfg = base_config(32, 0.08, 0.08);
        cfg.init_u = FieldSpec::RandomSolenoidal {
            spectrum_exponent: 2.0,
            k_min: 1,
            k_max: 2,
            seed: 4,
        };
        cfg.forcing = Some(ForcingSpec { band: [1, 2], injection_rate: 0.5 });
        cfg.dt = 2e-3;
        cfg.t_end = 0.2;
        let (_, stats) = run(&cfg, 20, None).unwrap();
        // Forced balance: dE = injection - dissipation, quadrature error only.
        let de = stats.energy_final - stats.energy_initial;
        let expect = stats.injection_integral - stats.dissipation_integral;
        assert!(
            (de - expect).abs() / stats.energy_initial.abs() < 5e-3,
            "dE {de} vs injection-dissipation {expect}"
        );
    }

    #[test]
    fn pressure_solves_the_projected_momentum_equation() {
        let grid = Grid::new(32, TWO_PI).unwrap();
        let u = gen_field(grid, &FieldSpec::Abc { a: 1.0, b: 1.0, c: 1.0 }).unwrap();
        let b = VectorField::zeros(grid);
        let p = pressure_from_fields(&u, &b, 1.0, PressureConvention::Fluid).unwrap();
        // Beltrami closed form: p = -(|u|^2 - <|u|^2>)/2.
        let sq = u.norm_sq();
        let mean = sq.mean().unwrap();
        let err = p
            .data()
            .iter()
            .zip(sq.data())
            .map(|(p, m)| (p + 0.5 * (m - mean)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "ABC pressure error {err}");
    }

    #[test]
    fn magnetic_beltrami_total_pressure_mirrors_kinetic_case() {
        let grid = Grid::new(32, TWO_PI).unwrap();
        let f = gen_field(grid, &FieldSpec::Abc { a: 1.0, b: 1.0, c: 1.0 }).unwrap();
        let zero = VectorField::zeros(grid);
        let p_kinetic = pressure_from_fields(&f, &zero, 1.0, PressureConvention::Fluid).unwrap();
        let q_magnetic = pressure_from_fields(&zero, &f, 1.0, PressureConvention::Total).unwrap();
        // Same Beltrami source with flipped sign: q_b = -p_u.
        let err = p_kinetic
            .data()
            .iter()
            .zip(q_magnetic.data())
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "mirror error {err}");
        // And the fluid-convention pressure of the magnetic case vanishes:
        // the Lorentz force of a Beltrami field is pure magnetic pressure.
        let p_magnetic = pressure_from_fields(&zero, &f, 1.0, PressureConvention::Fluid).unwrap();
        assert!(crate::reduce::max_abs(p_magnetic.data()) < 1e-10);
    }

    #[test]
    fn zero_fields_have_zero_pressure() {
        let grid = Grid::new(16, 1.0).unwrap();
        let z = VectorField::zeros(grid);
        let p = pressure_from_fields(&z, &z, 1.0, PressureConvention::Fluid).unwrap();
        assert_eq!(crate::reduce::max_abs(p.data()), 0.0);
    }

    #[test]
    fn dimensionless_form_scales_diffusion_and_lorentz() {
        // With Re = 1/nu, Rm = 1/eta, M^2 = Re Rm the two forms integrate
        // the same equations; trajectories must match to rounding.
        let grid = Grid::new(16, TWO_PI).unwrap();
        let params = PhysParams::new(0.05, 0.02, 1.0, 1.0, 20.0, 50.0, (20.0f64 * 50.0).sqrt())
            .unwrap();
        let mut dimensional = SolverConfig {
            grid,
            params,
            dt: 5e-3,
            t_end: 0.05,
            init_u: FieldSpec::OrszagTang,
            init_b: FieldSpec::OrszagTangB,
            forcing: None,
            dealias: true,
            nonlinear: true,
            adaptive_dt: false,
            form: Form::Dimensional,
        };
        let (series_dim, _) = run(&dimensional, 100, None).unwrap();
        dimensional.form = Form::Dimensionless;
        let (series_nodim, _) = run(&dimensional, 100, None).unwrap();
        let a = series_dim.get(series_dim.len() - 1).unwrap();
        let b = series_nodim.get(series_nodim.len() - 1).unwrap();
        for axis in 0..3 {
            let err = a
                .u
                .comp(axis)
                .iter()
                .zip(b.u.comp(axis))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "forms diverged on axis {axis}: {err}");
        }
    }
}
