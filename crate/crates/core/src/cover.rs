//! Ball covers of the averaging domain B(0, R0) at a working scale R.
//!
//! A cover is a finite set of centers whose radius-R balls jointly contain
//! B(0, R0), with the center count trapped between `(R0/R)^3` and
//! `K1 (R0/R)^3` and no point of the domain lying in more than `K2` balls.
//! Construction places centers on a cubic lattice of spacing R, projects
//! the just-outside layer onto the domain sphere, and keeps only the
//! projected candidates a greedy pass actually needs for coverage. Every
//! built cover is re-verified against a probe lattice before it is
//! returned; violations surface as infeasibility errors naming the bound.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverStrategy {
    Lattice,
    JitteredLattice,
}

/// A verified (K1, K2)-cover of B(0, R0) by balls of radius `r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cover {
    pub r0: f64,
    pub r: f64,
    pub centers: Vec<[f64; 3]>,
    pub k1: usize,
    pub k2: usize,
    pub seed: u64,
    pub strategy: CoverStrategy,
}

impl Cover {
    pub fn n(&self) -> usize {
        self.centers.len()
    }

    /// Lower admissible center count `(R0/R)^3`.
    pub fn n_lower(&self) -> f64 {
        (self.r0 / self.r).powi(3)
    }

    /// Upper admissible center count `K1 (R0/R)^3`.
    pub fn n_upper(&self) -> f64 {
        self.k1 as f64 * self.n_lower()
    }
}

/// Verification report; `pass` is the conjunction of the individual flags.
#[derive(Debug, Clone, Serialize)]
pub struct CoverCheck {
    pub n: usize,
    pub n_lower: f64,
    pub n_upper: f64,
    pub n_ok: bool,
    pub min_multiplicity: usize,
    pub max_multiplicity: usize,
    pub coverage_ok: bool,
    pub multiplicity_ok: bool,
    pub centers_inside: bool,
    pub probe_points: usize,
    /// Location of the first uncovered or over-covered probe point.
    pub violation: Option<[f64; 3]>,
    pub pass: bool,
}

/// Pull just-outside candidates strictly inside the domain sphere.
const CLAMP_SHRINK: f64 = 1.0 - 1e-9;
/// Probe lattice spacing as a fraction of the ball radius.
const PROBE_DIVISIONS: f64 = 8.0;
/// Attempts to find a jitter draw that keeps the cover valid.
const JITTER_ATTEMPTS: usize = 64;

/// Hash of centers into cubic cells of side `cell`; all centers within
/// `cell` of a point lie in the 27 cells around it.
struct CenterHash {
    cell: f64,
    map: HashMap<[i64; 3], Vec<usize>>,
}

impl CenterHash {
    fn new(centers: &[[f64; 3]], cell: f64) -> Self {
        let mut map: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, c) in centers.iter().enumerate() {
            map.entry(Self::key(*c, cell)).or_default().push(i);
        }
        Self { cell, map }
    }

    fn key(p: [f64; 3], cell: f64) -> [i64; 3] {
        [0, 1, 2].map(|a| (p[a] / cell).floor() as i64)
    }

    fn for_each_near(&self, p: [f64; 3], mut f: impl FnMut(usize)) {
        let k = Self::key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in ids {
                            f(i);
                        }
                    }
                }
            }
        }
    }

    fn multiplicity(&self, centers: &[[f64; 3]], p: [f64; 3], r: f64) -> usize {
        debug_assert!(r <= self.cell);
        let r2 = r * r;
        let mut count = 0;
        self.for_each_near(p, |i| {
            if dist_sq(centers[i], p) <= r2 {
                count += 1;
            }
        });
        count
    }
}

fn dist_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn norm(p: [f64; 3]) -> f64 {
    dist_sq(p, [0.0; 3]).sqrt()
}

/// Deterministic probe lattice over B(0, r0) with spacing `r / PROBE_DIVISIONS`,
/// filtered by `shell_only` to the outer layer interior lattice centers may miss.
fn probe_points(r0: f64, r: f64, shell_only: bool) -> Vec<[f64; 3]> {
    let h = r / PROBE_DIVISIONS;
    let imax = (r0 / h).ceil() as i64;
    let inner = r0 - r * 3f64.sqrt() / 2.0;
    let mut pts = Vec::new();
    for i in -imax..=imax {
        for j in -imax..=imax {
            for k in -imax..=imax {
                let p = [i as f64 * h, j as f64 * h, k as f64 * h];
                let d = norm(p);
                if d <= r0 && (!shell_only || d > inner) {
                    pts.push(p);
                }
            }
        }
    }
    pts
}

fn validate_args(r0: f64, r: f64, k1: usize, k2: usize) -> Result<()> {
    if !(r0.is_finite() && r0 > 0.0 && r.is_finite() && r > 0.0) {
        return Err(Error::Cover(format!(
            "radii must be finite and positive, got r0 = {r0}, r = {r}"
        )));
    }
    if r > r0 {
        return Err(Error::Cover(format!(
            "ball scale r = {r} exceeds domain radius r0 = {r0}"
        )));
    }
    if k1 < 1 || k2 < 1 {
        return Err(Error::Cover(format!("k1, k2 must be >= 1, got ({k1}, {k2})")));
    }
    Ok(())
}

/// Lattice centers inside the closed domain ball plus the sphere projections
/// of the next layer out. The projection is nonexpansive, so the combined
/// candidate set covers B(0, r0) at radius `r sqrt(3)/2` whenever the full
/// lattice does.
fn lattice_candidates(r0: f64, r: f64) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let a = r;
    let band = r0 + a * 3f64.sqrt() / 2.0 + 1e-12 * r0;
    let imax = (band / a).ceil() as i64;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for i in -imax..=imax {
        for j in -imax..=imax {
            for k in -imax..=imax {
                let c = [i as f64 * a, j as f64 * a, k as f64 * a];
                let d = norm(c);
                // Rounding can land sphere-distance points a few ulps to
                // either side of r0; snap that skin strictly inside so
                // membership never depends on the tie direction.
                if d <= r0 * (1.0 + 1e-12) {
                    if d > r0 * CLAMP_SHRINK {
                        let s = r0 * CLAMP_SHRINK / d;
                        interior.push([c[0] * s, c[1] * s, c[2] * s]);
                    } else {
                        interior.push(c);
                    }
                } else if d <= band {
                    let s = r0 * CLAMP_SHRINK / d;
                    boundary.push([c[0] * s, c[1] * s, c[2] * s]);
                }
            }
        }
    }
    (interior, boundary)
}

/// Greedy set-cover completion: extend `centers` with boundary candidates
/// until every probe point is within `r_eff` of some center.
fn complete_coverage(
    centers: &mut Vec<[f64; 3]>,
    candidates: &[[f64; 3]],
    probes: &[[f64; 3]],
    r_eff: f64,
) -> Result<()> {
    let r2 = r_eff * r_eff;
    let hash = CenterHash::new(centers, r_eff.max(1e-300));
    let mut uncovered: Vec<[f64; 3]> = probes
        .par_iter()
        .filter(|p| {
            let mut hit = false;
            hash.for_each_near(**p, |i| hit |= dist_sq(centers[i], **p) <= r2);
            !hit
        })
        .copied()
        .collect();

    while !uncovered.is_empty() {
        let (best, gain) = candidates
            .par_iter()
            .enumerate()
            .map(|(ci, c)| {
                let covered = uncovered.iter().filter(|p| dist_sq(*c, **p) <= r2).count();
                (ci, covered)
            })
            .reduce(
                || (usize::MAX, 0),
                |a, b| {
                    // Ties break toward the lower candidate index so the
                    // construction is order-deterministic.
                    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            );
        if gain == 0 {
            return Err(Error::CoverInfeasible {
                bound: format!(
                    "coverage: probe point near {:?} unreachable by any candidate",
                    uncovered[0]
                ),
            });
        }
        let c = candidates[best];
        uncovered.retain(|p| dist_sq(c, *p) > r2);
        centers.push(c);
    }
    Ok(())
}

/// Check every cover invariant against a probe point set; first failure
/// becomes an infeasibility error naming the bound.
fn check_bounds(
    centers: &[[f64; 3]],
    probes: &[[f64; 3]],
    r0: f64,
    r: f64,
    k1: usize,
    k2: usize,
) -> Result<()> {
    let n = centers.len() as f64;
    let lower = (r0 / r).powi(3);
    let upper = k1 as f64 * lower;
    if n < lower * (1.0 - 1e-12) {
        return Err(Error::CoverInfeasible {
            bound: format!("n >= (r0/r)^3: n = {n}, required {lower:.6}"),
        });
    }
    if n > upper * (1.0 + 1e-12) {
        return Err(Error::CoverInfeasible {
            bound: format!("n <= k1 (r0/r)^3: n = {n}, allowed {upper:.6} (k1 = {k1})"),
        });
    }
    for c in centers {
        if norm(*c) > r0 * (1.0 + 1e-12) {
            return Err(Error::CoverInfeasible {
                bound: format!("centers inside B(0, r0): |{c:?}| > {r0}"),
            });
        }
    }
    let hash = CenterHash::new(centers, r);
    let (min_m, max_m) = probes
        .par_iter()
        .map(|p| {
            let m = hash.multiplicity(centers, *p, r);
            (m, m)
        })
        .reduce(|| (usize::MAX, 0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    if min_m == 0 {
        return Err(Error::CoverInfeasible {
            bound: "coverage: some probe point of B(0, r0) lies in no ball".into(),
        });
    }
    if max_m > k2 {
        return Err(Error::CoverInfeasible {
            bound: format!("multiplicity <= k2: measured {max_m}, allowed {k2}"),
        });
    }
    Ok(())
}

fn base_lattice_cover(r0: f64, r: f64) -> Result<Vec<[f64; 3]>> {
    if r >= r0 {
        return Ok(vec![[0.0; 3]]);
    }
    let (mut centers, candidates) = lattice_candidates(r0, r);
    let h = r / PROBE_DIVISIONS;
    let r_eff = r - h * 3f64.sqrt() / 2.0;
    let shell = probe_points(r0, r, true);
    complete_coverage(&mut centers, &candidates, &shell, r_eff)?;
    Ok(centers)
}

/// Uniform draw from the ball of radius `rad` by rejection from its cube.
fn jitter_draw(rng: &mut ChaCha8Rng, rad: f64) -> [f64; 3] {
    loop {
        let v = [
            rng.random_range(-rad..=rad),
            rng.random_range(-rad..=rad),
            rng.random_range(-rad..=rad),
        ];
        if norm(v) <= rad {
            return v;
        }
    }
}

/// Build a cover of B(0, r0) at scale `r` and verify it before returning.
///
/// The lattice strategy is fully deterministic; the jittered strategy
/// perturbs each lattice center uniformly in a ball of radius `r/4`
/// (re-drawing any perturbation that would leave the domain), then
/// re-verifies the whole cover, resampling until a draw passes.
pub fn build_cover(
    r0: f64,
    r: f64,
    k1: usize,
    k2: usize,
    strategy: CoverStrategy,
    seed: u64,
) -> Result<Cover> {
    validate_args(r0, r, k1, k2)?;
    let base = base_lattice_cover(r0, r)?;
    let probes = probe_points(r0, r, false);

    let centers = match strategy {
        CoverStrategy::Lattice => {
            check_bounds(&base, &probes, r0, r, k1, k2)?;
            base
        }
        CoverStrategy::JitteredLattice if base.len() == 1 => {
            // A single ball covers the domain only from the origin, so
            // there is no jitter freedom to use.
            check_bounds(&base, &probes, r0, r, k1, k2)?;
            base
        }
        CoverStrategy::JitteredLattice => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut last_err = None;
            let mut accepted = None;
            for _ in 0..JITTER_ATTEMPTS {
                let jittered: Vec<[f64; 3]> = base
                    .iter()
                    .map(|c| {
                        // Redraw jitters that would exit the domain; after a
                        // bounded number of tries keep the base center.
                        for _ in 0..100 {
                            let v = jitter_draw(&mut rng, r / 4.0);
                            let p = [c[0] + v[0], c[1] + v[1], c[2] + v[2]];
                            if norm(p) <= r0 * CLAMP_SHRINK {
                                return p;
                            }
                        }
                        *c
                    })
                    .collect();
                match check_bounds(&jittered, &probes, r0, r, k1, k2) {
                    Ok(()) => {
                        accepted = Some(jittered);
                        break;
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            match accepted {
                Some(c) => c,
                None => return Err(last_err.expect("at least one jitter attempt ran")),
            }
        }
    };

    Ok(Cover { r0, r, centers, k1, k2, seed, strategy })
}

/// Grid-resolution audit of an existing cover: multiplicity at every grid
/// point of B(0, r0), plus the center-count and containment invariants.
/// Always returns a report; `pass` summarizes it.
pub fn verify_cover(cover: &Cover, grid: Grid) -> CoverCheck {
    let r0 = cover.r0;
    let r = cover.r;
    let hash = CenterHash::new(&cover.centers, r);
    let r0_sq = r0 * r0;

    let (min_m, max_m, count, violation) = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = grid.centered_pos(idx);
            if dist_sq(p, [0.0; 3]) > r0_sq {
                return (usize::MAX, 0, 0usize, None);
            }
            let m = hash.multiplicity(&cover.centers, p, r);
            let bad = if m == 0 || m > cover.k2 { Some(p) } else { None };
            (m, m, 1, bad)
        })
        .reduce(
            || (usize::MAX, 0, 0, None),
            |a, b| (a.0.min(b.0), a.1.max(b.1), a.2 + b.2, a.3.or(b.3)),
        );

    let n = cover.n();
    let n_lower = cover.n_lower();
    let n_upper = cover.n_upper();
    let n_ok = n as f64 >= n_lower * (1.0 - 1e-12) && n as f64 <= n_upper * (1.0 + 1e-12);
    let coverage_ok = count > 0 && min_m >= 1;
    let multiplicity_ok = max_m <= cover.k2;
    let centers_inside = cover.centers.iter().all(|c| norm(*c) <= r0 * (1.0 + 1e-12));
    let pass = n_ok && coverage_ok && multiplicity_ok && centers_inside;

    CoverCheck {
        n,
        n_lower,
        n_upper,
        n_ok,
        min_multiplicity: if count == 0 { 0 } else { min_m },
        max_multiplicity: max_m,
        coverage_ok,
        multiplicity_ok,
        centers_inside,
        probe_points: count,
        violation,
        pass,
    }
}
