//! Ensemble averages of localized fluxes over ball covers.
//!
//! The pipeline certifies a cover against its cardinality and multiplicity
//! bounds, builds one refined weight per element, gates every weight through
//! the cutoff audit, and then averages per-element flux samples in a fixed
//! element order, so a seeded run reproduces byte for byte. On top of the
//! averages sit three report layers: a bracket check pinning ensemble
//! averages of non-negative densities between `F0 / K1` and `K2 F0`, cascade
//! verdicts comparing ensemble means across a scale ladder against
//! dissipation-based bounds, and locality reports checking pairwise ratios
//! of volume-integrated fluxes. Verdicts and reports never assert physics;
//! each failed comparison is recorded and returned. The one exception is the
//! locality implication: when both scales' means sit inside the sandwich the
//! mixed-constant ratio bound is pure algebra, so breaking it is an internal
//! error, not a finding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cover::{build_cover, verify_cover, Cover, CoverStrategy};
use crate::cutoff::{build_cutoff, domain_cutoff, verify_cutoff, RefinedCutoff};
use crate::diagnostics::ScaleDiagnostics;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::flux::{
    flux_samples, kind_label, local_energy_budget, sparse_weights, FluxKind, FluxSample,
};
use crate::grid::Grid;
use crate::reduce::{all_finite, det_sum, det_sum_indexed};
use crate::series::FieldSeries;
use crate::solver::{transport_coefficients, Form, ForcingSpec};

/// Relative slack granted to the bracket check; everything beyond this is
/// reported as a violation.
pub const SANDWICH_SLACK: f64 = 1e-10;

/// Rounding allowance for the locality ratio bounds, which are exact
/// algebra up to floating point.
pub const LOCALITY_SLACK: f64 = 1e-12;

/// Exponents of the refined weights: `rho` shapes the spatial profile,
/// `delta` the temporal ramp. Both live in (3/4, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffParams {
    pub rho: f64,
    pub delta: f64,
}

impl Default for CutoffParams {
    fn default() -> Self {
        Self { rho: 0.875, delta: 0.875 }
    }
}

/// Dispersion summary of a sample set; stddev is the population form, so a
/// singleton reports zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = det_sum(values) / n;
        let var = det_sum_indexed(values.len(), |i| {
            let d = values[i] - mean;
            d * d
        }) / n;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Some(Spread { min: lo, max: hi, stddev: var.max(0.0).sqrt() })
    }
}

/// Provenance of the cover behind an ensemble, enough to rebuild it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoverRef {
    pub scale: f64,
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub seed: u64,
    pub strategy: CoverStrategy,
}

impl From<&Cover> for CoverRef {
    fn from(c: &Cover) -> Self {
        Self { scale: c.r, n: c.n(), k1: c.k1, k2: c.k2, seed: c.seed, strategy: c.strategy }
    }
}

/// Ensemble average of one flux kind over one cover: the per-element
/// samples in cover order, their fixed-order mean, and dispersion, plus the
/// dispersion of means across sibling covers when computed in a batch.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleResult {
    pub scale: f64,
    pub kind: FluxKind,
    pub cover: CoverRef,
    pub values: Vec<FluxSample>,
    pub mean: f64,
    pub spread: Spread,
    pub cover_spread: Option<Spread>,
}

/// Build and audit one refined weight per cover element. The cover is
/// checked against the grid first; any element whose weight fails the
/// cutoff audit aborts the whole construction.
pub fn element_cutoffs(cover: &Cover, domain: &RefinedCutoff) -> Result<Vec<RefinedCutoff>> {
    if (cover.r0 - domain.r).abs() > 1e-12 * domain.r.abs() {
        return Err(Error::Config(format!(
            "cover domain radius {} disagrees with the domain weight radius {}",
            cover.r0, domain.r
        )));
    }
    let check = verify_cover(cover, domain.grid);
    if !check.pass {
        return Err(Error::Cover(format!(
            "cover failed the grid audit: n = {} in [{:.3}, {:.3}], multiplicity {}..={}, \
             violation {:?}",
            check.n,
            check.n_lower,
            check.n_upper,
            check.min_multiplicity,
            check.max_multiplicity,
            check.violation
        )));
    }
    cover
        .centers
        .iter()
        .enumerate()
        .map(|(i, &center)| {
            let cut = build_cutoff(
                center,
                cover.r,
                domain.rho,
                domain.delta,
                domain.grid,
                &domain.times,
                domain.t_horizon,
                domain,
            )?;
            let audit = verify_cutoff(&cut);
            if !audit.pass {
                return Err(Error::Cutoff(format!(
                    "element {i} at {center:?} failed the audit: {:?}",
                    audit.violation
                )));
            }
            Ok(cut)
        })
        .collect()
}

/// Average the given flux kind over pre-built element weights. The mean is
/// a compensated sum over elements in cover order divided by the count, so
/// it is independent of thread scheduling.
pub fn ensemble_from_cutoffs(
    series: &FieldSeries,
    cover: &Cover,
    cutoffs: &[RefinedCutoff],
    kind: FluxKind,
    form: Form,
) -> Result<EnsembleResult> {
    if cutoffs.len() != cover.n() {
        return Err(Error::Config(format!(
            "{} cutoffs for a cover of {} elements",
            cutoffs.len(),
            cover.n()
        )));
    }
    for (cut, &center) in cutoffs.iter().zip(&cover.centers) {
        if cut.center != center || cut.r != cover.r {
            return Err(Error::Config(
                "element weights do not correspond to the cover elements".into(),
            ));
        }
    }
    let values = flux_samples(series, cutoffs, kind, form)?;
    let raw: Vec<f64> = values.iter().map(|s| s.value).collect();
    let mean = det_sum(&raw) / raw.len() as f64;
    let spread = Spread::of(&raw).expect("covers are never empty");
    Ok(EnsembleResult {
        scale: cover.r,
        kind,
        cover: CoverRef::from(cover),
        values,
        mean,
        spread,
        cover_spread: None,
    })
}

/// End-to-end ensemble average: build the domain weight, certify the cover,
/// build and audit every element weight, then average. Deterministic for a
/// fixed cover and series.
pub fn ensemble_average(
    series: &FieldSeries,
    cover: &Cover,
    kind: FluxKind,
    params: CutoffParams,
    form: Form,
) -> Result<EnsembleResult> {
    let p = series.params();
    let domain = domain_cutoff(
        cover.r0,
        params.rho,
        params.delta,
        series.grid(),
        series.times(),
        p.t_horizon,
    )?;
    let cutoffs = element_cutoffs(cover, &domain)?;
    ensemble_from_cutoffs(series, cover, &cutoffs, kind, form)
}

/// Ensemble averages for several covers at one scale, with the spread of
/// the per-cover means stamped on every result.
pub fn ensemble_batch(
    series: &FieldSeries,
    covers: &[Cover],
    kind: FluxKind,
    params: CutoffParams,
    form: Form,
) -> Result<Vec<EnsembleResult>> {
    let Some(first) = covers.first() else {
        return Err(Error::Config("ensemble batch needs at least one cover".into()));
    };
    if covers.iter().any(|c| c.r != first.r || c.r0 != first.r0) {
        return Err(Error::Config(
            "ensemble batch covers must share a scale and domain radius".into(),
        ));
    }
    let p = series.params();
    let domain = domain_cutoff(
        first.r0,
        params.rho,
        params.delta,
        series.grid(),
        series.times(),
        p.t_horizon,
    )?;
    let mut results: Vec<EnsembleResult> = covers
        .iter()
        .map(|cover| {
            let cutoffs = element_cutoffs(cover, &domain)?;
            ensemble_from_cutoffs(series, cover, &cutoffs, kind, form)
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = results.iter().map(|r| r.mean).collect();
    let spread = Spread::of(&means);
    for r in &mut results {
        r.cover_spread = spread;
    }
    Ok(results)
}

/// Sparse spatial quadrature of one weight: indices into the grid and the
/// weight value there.
struct SparsePsi {
    idx: Vec<u32>,
    psi: Vec<f64>,
}

fn strip(cutoff: &RefinedCutoff) -> SparsePsi {
    let w = sparse_weights(cutoff);
    SparsePsi { idx: w.idx, psi: w.psi }
}

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Result of one bracket check: the domain average `F0`, the ensemble
/// average of the element averages, and the `[F0/K1, K2 F0]` bracket both
/// must satisfy up to [`SANDWICH_SLACK`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SandwichReport {
    pub scale: f64,
    pub n: usize,
    pub global: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Least signed distance from a bound, relative to `global`; zero when
    /// the global average vanishes.
    pub rel_margin: f64,
    pub pass: bool,
}

/// Reusable bracket-check quadrature for one cover: the domain weight and
/// every audited element weight sampled once, so many densities can be
/// checked against the same cover cheaply.
pub struct CoverAverager {
    grid: Grid,
    cell: f64,
    r0: f64,
    scale: f64,
    t_horizon: f64,
    k1: f64,
    k2: f64,
    /// Time integral of the shared temporal ramp; identical on both sides
    /// of the bracket, so it scales the report without tilting it.
    kappa: f64,
    domain_w: SparsePsi,
    element_w: Vec<SparsePsi>,
}

impl CoverAverager {
    pub fn new(cover: &Cover, domain: &RefinedCutoff) -> Result<Self> {
        let cutoffs = element_cutoffs(cover, domain)?;
        let kappa = simpson(0.0, domain.t_horizon, 4096, |t| domain.eta(t));
        Ok(Self {
            grid: domain.grid,
            cell: domain.grid.cell_volume(),
            r0: cover.r0,
            scale: cover.r,
            t_horizon: domain.t_horizon,
            k1: cover.k1 as f64,
            k2: cover.k2 as f64,
            kappa,
            domain_w: strip(domain),
            element_w: cutoffs.iter().map(strip).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.element_w.len()
    }

    /// Bracket the ensemble average of a non-negative density between the
    /// domain average scaled by `1/K1` and `K2`.
    ///
    /// The lower half of the bracket leans on the element weights jointly
    /// dominating the domain weight. Boundary elements are realized as
    /// products with the domain profile, which dominate it over the
    /// averaging ball and its near shell but not in the far skirt of the
    /// domain weight; a density concentrated out there, beyond every
    /// element support, can undershoot. That is why this returns a report
    /// instead of asserting.
    pub fn check(&self, density: &ScalarField) -> Result<SandwichReport> {
        if density.grid() != self.grid {
            return Err(Error::Config("density grid disagrees with the cover grid".into()));
        }
        let data = density.data();
        if !all_finite(data) {
            return Err(Error::Degenerate("density must be finite".into()));
        }
        if let Some((i, &v)) = data.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::Degenerate(format!(
                "density must be non-negative; found {v} at cell {i}"
            )));
        }

        let quad = |w: &SparsePsi, volume: f64| {
            let raw = det_sum_indexed(w.idx.len(), |j| data[w.idx[j] as usize] * w.psi[j]);
            self.kappa * raw * self.cell / (self.t_horizon * volume)
        };
        let global = quad(&self.domain_w, self.r0.powi(3));
        let vol = self.scale.powi(3);
        let locals: Vec<f64> = self.element_w.iter().map(|w| quad(w, vol)).collect();
        let mean = det_sum(&locals) / locals.len() as f64;

        let lower = global / self.k1;
        let upper = self.k2 * global;
        let pass = mean >= lower - SANDWICH_SLACK * lower.abs()
            && mean <= upper + SANDWICH_SLACK * upper.abs();
        let rel_margin = if global > 0.0 {
            ((mean - lower) / global).min((upper - mean) / global)
        } else {
            0.0
        };
        Ok(SandwichReport {
            scale: self.scale,
            n: self.n(),
            global,
            mean,
            lower,
            upper,
            rel_margin,
            pass,
        })
    }
}

/// One-shot bracket check; see [`CoverAverager`] for the reusable form.
pub fn lemma_sandwich_check(
    density: &ScalarField,
    cover: &Cover,
    domain: &RefinedCutoff,
) -> Result<SandwichReport> {
    CoverAverager::new(cover, domain)?.check(density)
}

/// Which cascade claim a verdict tests. Each statement fixes the flux
/// density, the dissipation-based reference level, and the microscale ratio
/// that sets the lower end of the claimed range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeStatement {
    /// Combined energy flux against total dissipation.
    TotalEnergy,
    /// Budget-closure flux (dissipation minus time and diffusion terms)
    /// against total dissipation; tolerates series without a closed budget.
    ModifiedEnergy,
    /// Kinetic plus pressure transport against weighted split dissipation.
    FluidEnergy,
    /// Kinetic flux alone.
    Kinetic,
    /// Magnetic flux alone.
    Magnetic,
    /// Velocity-magnetic exchange flux.
    CrossHelicity,
    /// Induction work against magnetic dissipation.
    Stretching,
}

impl CascadeStatement {
    pub const ALL: [CascadeStatement; 7] = [
        CascadeStatement::TotalEnergy,
        CascadeStatement::ModifiedEnergy,
        CascadeStatement::FluidEnergy,
        CascadeStatement::Kinetic,
        CascadeStatement::Magnetic,
        CascadeStatement::CrossHelicity,
        CascadeStatement::Stretching,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CascadeStatement::TotalEnergy => "total_energy",
            CascadeStatement::ModifiedEnergy => "modified_energy",
            CascadeStatement::FluidEnergy => "fluid_energy",
            CascadeStatement::Kinetic => "kinetic",
            CascadeStatement::Magnetic => "magnetic",
            CascadeStatement::CrossHelicity => "cross_helicity",
            CascadeStatement::Stretching => "stretching",
        }
    }

    /// Flux kinds whose per-element samples are summed for this statement.
    pub fn kinds(self) -> &'static [FluxKind] {
        match self {
            CascadeStatement::TotalEnergy => &[FluxKind::E],
            CascadeStatement::ModifiedEnergy => &[FluxKind::EInf],
            CascadeStatement::FluidEnergy => &[FluxKind::U, FluxKind::P],
            CascadeStatement::Kinetic => &[FluxKind::U],
            CascadeStatement::Magnetic => &[FluxKind::B],
            CascadeStatement::CrossHelicity => &[FluxKind::Ub],
            CascadeStatement::Stretching => &[FluxKind::V],
        }
    }
}

impl fmt::Display for CascadeStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CascadeStatement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CascadeStatement::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown cascade statement {s:?}")))
    }
}

/// Hypotheses of the cascade statements, recorded rather than enforced.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerdictFlags {
    /// Averaging horizon at least the diffusive time of the domain.
    pub time_scale_ok: bool,
    /// Unit-frame kinetic energy at least one.
    pub unit_kinetic_energy_ok: bool,
    /// Magnitude of the domain energy-budget defect, normalized like the
    /// dissipation average.
    pub defect_rate: f64,
    /// Defect within five percent of the dissipation average.
    pub defect_ok: bool,
}

/// Sandwich test at one scale: the ensemble mean over each cover, their
/// average, and whether it lands inside the dissipation-based bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleVerdict {
    pub scale: f64,
    /// Whether the scale lies inside the claimed range `[floor, r0]`.
    pub in_range: bool,
    pub mean: f64,
    pub cover_means: Vec<f64>,
    pub cover_spread: Option<Spread>,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// A scale dropped from a verdict, with the reason it could not be tested.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedScale {
    pub scale: f64,
    pub reason: String,
}

/// Full report for one cascade statement over a scale ladder. Never an
/// assertion: an empty claimed range or a failed sandwich is data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeVerdict {
    pub statement: CascadeStatement,
    pub kinds: Vec<FluxKind>,
    pub r0: f64,
    /// Lower end of the claimed range; scales below it are out of range.
    pub inertial_floor: f64,
    /// True when the floor exceeds the domain radius, leaving nothing to
    /// test.
    pub range_empty: bool,
    /// Dissipation-based reference level the bounds scale from.
    pub reference: f64,
    pub lower: f64,
    pub upper: f64,
    pub scales: Vec<ScaleVerdict>,
    pub skipped_scales: Vec<SkippedScale>,
    /// Structural constant implied by the smallest scale down to which the
    /// sandwich held without interruption; constants below it would claim
    /// scales the data refutes. Absent when the microscale vanishes or no
    /// tested scale passed.
    pub empirical_constant: Option<f64>,
    pub flags: VerdictFlags,
    pub covers_per_scale: usize,
    pub k1: usize,
    pub k2: usize,
    pub seed: u64,
}

/// Inputs a cascade verdict needs beyond the series and its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictConfig {
    /// Scales to test; empty selects the half-dyadic ladder clipped to the
    /// claimed range.
    pub scales: Vec<f64>,
    pub covers_per_scale: usize,
    pub k1: usize,
    pub k2: usize,
    pub seed: u64,
    pub strategy: CoverStrategy,
    pub cutoff: CutoffParams,
    pub form: Form,
    /// Forcing of the run that produced the series, if any; feeds the
    /// budget defect flag.
    pub forcing: Option<ForcingSpec>,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            scales: Vec::new(),
            covers_per_scale: 3,
            k1: 8,
            k2: 8,
            seed: 1,
            strategy: CoverStrategy::JitteredLattice,
            cutoff: CutoffParams::default(),
            form: Form::Dimensional,
            forcing: None,
        }
    }
}

/// Half-dyadic scale ladder `r0 * 2^(-j/2)`, `j = 0..=6`, clipped from
/// below at `floor`.
pub fn half_dyadic_ladder(r0: f64, floor: f64) -> Vec<f64> {
    (0..=6)
        .map(|j| r0 * (-0.5 * j as f64).exp2())
        .filter(|&s| s >= floor)
        .collect()
}

/// Distinct deterministic seed per (scale, cover index) pair.
fn mix_seed(base: u64, scale: f64, index: u64) -> u64 {
    let mut z = base ^ scale.to_bits() ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn composite_values(
    series: &FieldSeries,
    cutoffs: &[RefinedCutoff],
    kinds: &[FluxKind],
    form: Form,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; cutoffs.len()];
    for &kind in kinds {
        for (a, s) in acc.iter_mut().zip(flux_samples(series, cutoffs, kind, form)?) {
            *a += s.value;
        }
    }
    Ok(acc)
}

/// Invert the floor formula at `r`: the structural constant whose claimed
/// range starts exactly there. `None` when the relevant microscale is zero
/// and the range never closes.
fn implied_constant(statement: CascadeStatement, diag: &ScaleDiagnostics, r: f64) -> Option<f64> {
    let k1k2 = diag.constants.k1 * diag.constants.k2;
    match statement {
        CascadeStatement::TotalEnergy | CascadeStatement::ModifiedEnergy => {
            let tau = diag.tau;
            (tau > 0.0)
                .then(|| r * r / (2.0 * k1k2 * (1.0 + 1.0 / diag.prandtl) * tau * tau))
        }
        CascadeStatement::FluidEnergy
        | CascadeStatement::Kinetic
        | CascadeStatement::Magnetic
        | CascadeStatement::CrossHelicity => {
            let tau = diag.tau_split();
            (tau > 0.0).then(|| (r / (diag.r0 * tau)).powi(4) / (2.0 * k1k2))
        }
        CascadeStatement::Stretching => {
            let tau = diag.tau_b;
            (tau > 0.0).then(|| (r / (diag.r0 * tau)).powi(4) / (2.0 * k1k2))
        }
    }
}

/// Test one cascade statement: ensemble-average its flux over jittered
/// covers at every scale and compare against `[ref/(2 K1), 2 K2 ref]`.
///
/// `diag` must come from [`crate::diagnostics::scale_diagnostics`] on the
/// same series, domain exponents, constants, and form; the overlapping
/// fields are cross-checked. Scales whose covers cannot be certified at the
/// configured `(K1, K2)` are skipped and reported, not failed.
pub fn cascade_verdict(
    series: &FieldSeries,
    diag: &ScaleDiagnostics,
    statement: CascadeStatement,
    cfg: &VerdictConfig,
) -> Result<CascadeVerdict> {
    if cfg.covers_per_scale == 0 {
        return Err(Error::Config("covers_per_scale must be at least 1".into()));
    }
    if diag.constants.k1 != cfg.k1 as f64 || diag.constants.k2 != cfg.k2 as f64 {
        return Err(Error::Config(format!(
            "diagnostics constants (k1 = {}, k2 = {}) disagree with the cover bounds \
             (k1 = {}, k2 = {})",
            diag.constants.k1, diag.constants.k2, cfg.k1, cfg.k2
        )));
    }
    if diag.delta != cfg.cutoff.delta {
        return Err(Error::Config(format!(
            "diagnostics delta {} disagrees with the cutoff delta {}",
            diag.delta, cfg.cutoff.delta
        )));
    }
    let p = series.params();
    let r0 = p.r0;
    if (diag.r0 - r0).abs() > 1e-12 * r0 {
        return Err(Error::Config(format!(
            "diagnostics domain radius {} disagrees with the series radius {r0}",
            diag.r0
        )));
    }

    let domain = domain_cutoff(
        r0,
        cfg.cutoff.rho,
        cfg.cutoff.delta,
        series.grid(),
        series.times(),
        p.t_horizon,
    )?;
    let (nu_eff, _, s) = transport_coefficients(p, cfg.form);

    let reference = match statement {
        CascadeStatement::TotalEnergy | CascadeStatement::ModifiedEnergy => diag.dissipation,
        CascadeStatement::FluidEnergy
        | CascadeStatement::Kinetic
        | CascadeStatement::Magnetic
        | CascadeStatement::CrossHelicity => diag.dissipation_u + s * diag.dissipation_b,
        CascadeStatement::Stretching => diag.dissipation_b,
    };
    let floor = match statement {
        CascadeStatement::TotalEnergy | CascadeStatement::ModifiedEnergy => diag.floor_total(),
        CascadeStatement::FluidEnergy
        | CascadeStatement::Kinetic
        | CascadeStatement::Magnetic
        | CascadeStatement::CrossHelicity => diag.floor_split(),
        CascadeStatement::Stretching => diag.floor_stretch(),
    };
    let lower = reference / (2.0 * diag.constants.k1);
    let upper = 2.0 * diag.constants.k2 * reference;
    let range_empty = floor > r0 * (1.0 + 1e-12);

    let budget = local_energy_budget(series, &domain, cfg.form, cfg.forcing.as_ref())?;
    let defect_rate = budget.defect.abs() / (p.t_horizon * r0.powi(3));
    let flags = VerdictFlags {
        time_scale_ok: p.t_horizon >= r0 * r0 / nu_eff * (1.0 - 1e-12),
        unit_kinetic_energy_ok: diag.unit_kinetic_energy_ok(),
        defect_rate,
        defect_ok: defect_rate <= 0.05 * diag.dissipation,
    };

    let mut scales = if cfg.scales.is_empty() {
        if range_empty {
            Vec::new()
        } else {
            half_dyadic_ladder(r0, floor)
        }
    } else {
        for &s in &cfg.scales {
            if !(s.is_finite() && s > 0.0 && s <= r0 * (1.0 + 1e-9)) {
                return Err(Error::Config(format!(
                    "verdict scale {s} outside (0, {r0}]"
                )));
            }
        }
        cfg.scales.clone()
    };
    scales.sort_by(|a, b| b.total_cmp(a));
    scales.dedup();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    'scales: for &scale in &scales {
        let mut cover_means = Vec::with_capacity(cfg.covers_per_scale);
        for i in 0..cfg.covers_per_scale {
            let seed = mix_seed(cfg.seed, scale, i as u64);
            let cover = match build_cover(r0, scale, cfg.k1, cfg.k2, cfg.strategy, seed) {
                Ok(c) => c,
                Err(Error::CoverInfeasible { bound }) => {
                    skipped.push(SkippedScale { scale, reason: bound });
                    continue 'scales;
                }
                Err(e) => return Err(e),
            };
            let cutoffs = element_cutoffs(&cover, &domain)?;
            let values = composite_values(series, &cutoffs, statement.kinds(), cfg.form)?;
            cover_means.push(det_sum(&values) / values.len() as f64);
        }
        let mean = det_sum(&cover_means) / cover_means.len() as f64;
        rows.push(ScaleVerdict {
            scale,
            in_range: scale >= floor * (1.0 - 1e-12) && scale <= r0 * (1.0 + 1e-12),
            mean,
            cover_spread: Spread::of(&cover_means),
            cover_means,
            lower,
            upper,
            pass: lower <= mean && mean <= upper,
        });
    }

    // Largest contiguous passing prefix from the top of the ladder fixes
    // the smallest scale the data supports a claim down to.
    let mut r_crit = None;
    for row in &rows {
        if row.pass {
            r_crit = Some(row.scale);
        } else {
            break;
        }
    }
    let empirical_constant = r_crit.and_then(|r| implied_constant(statement, diag, r));

    Ok(CascadeVerdict {
        statement,
        kinds: statement.kinds().to_vec(),
        r0,
        inertial_floor: floor,
        range_empty,
        reference,
        lower,
        upper,
        scales: rows,
        skipped_scales: skipped,
        empirical_constant,
        flags,
        covers_per_scale: cfg.covers_per_scale,
        k1: cfg.k1,
        k2: cfg.k2,
        seed: cfg.seed,
    })
}

/// Ratio test for one ordered pair of scales. The volume-integrated mean at
/// each scale is `mean * scale^3`; their ratio is compared against a
/// squared-constant bracket and the tighter mixed-constant bracket that
/// follows algebraically from the sandwich.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalityPair {
    pub scale_num: f64,
    pub scale_den: f64,
    pub ratio: f64,
    pub square_lower: f64,
    pub square_upper: f64,
    pub square_ok: bool,
    pub mixed_lower: f64,
    pub mixed_upper: f64,
    pub mixed_ok: bool,
    /// Both scales' means sat inside the sandwich, arming the algebraic
    /// implication for this pair.
    pub within_sandwich: bool,
}

/// Pairwise locality ratios for ensemble means of one flux label across
/// scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalityReport {
    /// Flux label, e.g. `u+p` for the combined fluid flux.
    pub label: String,
    pub k1: f64,
    pub k2: f64,
    /// Sandwich reference level; pairs inside `[ref/(2K1), 2K2 ref]` at
    /// both scales must satisfy the mixed bound.
    pub reference: Option<f64>,
    pub pairs: Vec<LocalityPair>,
    pub skipped: Vec<String>,
}

/// Pair loop shared by the report builders: `points` are (scale, mean)
/// with distinct scales. Pairs with a vanishing denominator are skipped
/// with a notice. When `reference` is given and both means of a pair sit
/// inside the sandwich, the mixed-constant bound is pure algebra; violating
/// it beyond rounding is an internal invariant failure, not a report entry.
fn locality_pairs(
    points: &[(f64, f64)],
    k1: f64,
    k2: f64,
    reference: Option<f64>,
) -> Result<(Vec<LocalityPair>, Vec<String>)> {
    let sandwich = |mean: f64| {
        reference.is_some_and(|e0| {
            let lo = e0 / (2.0 * k1);
            let hi = 2.0 * k2 * e0;
            lo <= mean && mean <= hi
        })
    };

    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for &(scale_num, mean_num) in points {
        for &(scale_den, mean_den) in points {
            if scale_num == scale_den {
                continue;
            }
            let psi_num = mean_num * scale_num.powi(3);
            let psi_den = mean_den * scale_den.powi(3);
            if psi_den == 0.0 {
                skipped.push(format!(
                    "pair ({scale_num}, {scale_den}): volume-integrated mean at the \
                     denominator scale is zero"
                ));
                continue;
            }
            let ratio = psi_num / psi_den;
            let cube = (scale_num / scale_den).powi(3);
            let square_lower = cube / (4.0 * k1 * k1);
            let square_upper = cube * 4.0 * k2 * k2;
            let mixed_lower = cube / (4.0 * k1 * k2);
            let mixed_upper = cube * 4.0 * k1 * k2;
            let inside = |lo: f64, hi: f64| {
                ratio >= lo - LOCALITY_SLACK * lo.abs() && ratio <= hi + LOCALITY_SLACK * hi.abs()
            };
            let mixed_ok = inside(mixed_lower, mixed_upper);
            let within_sandwich = sandwich(mean_num) && sandwich(mean_den);
            if within_sandwich && !mixed_ok {
                return Err(Error::Invariant(format!(
                    "bracketed averages at scales {scale_num} and {scale_den} break the \
                     mixed-constant locality bound: ratio {ratio}, bounds \
                     [{mixed_lower}, {mixed_upper}]"
                )));
            }
            pairs.push(LocalityPair {
                scale_num,
                scale_den,
                ratio,
                square_lower,
                square_upper,
                square_ok: inside(square_lower, square_upper),
                mixed_lower,
                mixed_upper,
                mixed_ok,
                within_sandwich,
            });
        }
    }
    Ok((pairs, skipped))
}

fn validate_constants(k1: f64, k2: f64) -> Result<()> {
    if !(k1.is_finite() && k2.is_finite() && k1 >= 1.0 && k2 >= 1.0) {
        return Err(Error::Config(format!(
            "cover constants must be at least 1, got k1 = {k1}, k2 = {k2}"
        )));
    }
    Ok(())
}

/// Compare volume-integrated ensemble means across every ordered pair of
/// scales; see [`locality_pairs`] for the skip and assertion semantics.
pub fn locality_report(
    results: &[EnsembleResult],
    k1: f64,
    k2: f64,
    reference: Option<f64>,
) -> Result<LocalityReport> {
    if results.len() < 2 {
        return Err(Error::Config("locality needs ensembles at two scales or more".into()));
    }
    let kind = results[0].kind;
    if results.iter().any(|r| r.kind != kind) {
        return Err(Error::Config("locality ensembles must share a flux kind".into()));
    }
    validate_constants(k1, k2)?;
    for (i, r) in results.iter().enumerate() {
        if results[i + 1..].iter().any(|other| r.scale == other.scale) {
            return Err(Error::Config(format!(
                "duplicate ensembles at scale {}; pass one per scale",
                r.scale
            )));
        }
    }
    let points: Vec<(f64, f64)> = results.iter().map(|r| (r.scale, r.mean)).collect();
    let (pairs, skipped) = locality_pairs(&points, k1, k2, reference)?;
    Ok(LocalityReport { label: kind_label(&[kind]), k1, k2, reference, pairs, skipped })
}

/// Locality report over a verdict's scale rows, using the verdict's own
/// reference level so every sandwiched pair arms the algebraic implication.
/// `None` when fewer than two scales were tested.
pub fn locality_from_verdict(verdict: &CascadeVerdict) -> Result<Option<LocalityReport>> {
    if verdict.scales.len() < 2 {
        return Ok(None);
    }
    let (k1, k2) = (verdict.k1 as f64, verdict.k2 as f64);
    validate_constants(k1, k2)?;
    let points: Vec<(f64, f64)> =
        verdict.scales.iter().map(|row| (row.scale, row.mean)).collect();
    let (pairs, skipped) = locality_pairs(&points, k1, k2, Some(verdict.reference))?;
    Ok(Some(LocalityReport {
        label: kind_label(&verdict.kinds),
        k1,
        k2,
        reference: Some(verdict.reference),
        pairs,
        skipped,
    }))
}
