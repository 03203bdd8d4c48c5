//! Deterministic floating-point reductions.
//!
//! Every sum that feeds a reported number goes through these helpers: fixed
//! chunking plus compensated accumulation makes the result independent of
//! thread count and identical across repeated runs.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Chunk length for parallel partial sums. Fixed so the reduction tree does
/// not depend on the rayon thread pool.
const CHUNK: usize = 8192;

/// Running Neumaier (improved Kahan) accumulator. Splitting the state into
/// (sum, compensation) lets chunked reductions merge partials without
/// rounding away the compensation term at chunk boundaries.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn neumaier_parts(xs: impl IntoIterator<Item = f64>) -> Compensated {
    let mut acc = Compensated::default();
    for x in xs {
        acc.add(x);
    }
    acc
}

fn merge_parts(partials: &[Compensated]) -> f64 {
    let mut acc = Compensated::default();
    for p in partials {
        acc.add(p.sum);
        acc.add(p.comp);
    }
    acc.value()
}

/// Sequential Neumaier compensated sum.
pub fn neumaier_sum(xs: &[f64]) -> f64 {
    neumaier_parts(xs.iter().copied()).value()
}

/// Deterministic sum: fixed-size chunks reduced in index order.
///
/// Thread count only changes how chunk sums are scheduled, never the values
/// or the order in which they are combined.
pub fn det_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 2 * CHUNK {
        return neumaier_sum(xs);
    }
    let partials: Vec<Compensated> = xs
        .par_chunks(CHUNK)
        .map(|c| neumaier_parts(c.iter().copied()))
        .collect();
    merge_parts(&partials)
}

/// Deterministic sum of `f(i)` for `i in 0..len`, chunked like [`det_sum`].
/// Lets spectral reductions stay allocation-free without giving up exact
/// run-to-run reproducibility.
pub fn det_sum_indexed(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    if len <= 2 * CHUNK {
        return neumaier_parts((0..len).map(&f)).value();
    }
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<Compensated> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(len);
            neumaier_parts((start..end).map(&f))
        })
        .collect();
    merge_parts(&partials)
}

/// Deterministic dot product of equal-length slices.
pub fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= 2 * CHUNK {
        return neumaier_parts(a.iter().zip(b).map(|(x, y)| x * y)).value();
    }
    let partials: Vec<Compensated> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(ca, cb)| neumaier_parts(ca.iter().zip(cb).map(|(x, y)| x * y)))
        .collect();
    merge_parts(&partials)
}

/// Maximum of |x| over the slice; exact regardless of evaluation order.
pub fn max_abs(xs: &[f64]) -> f64 {
    xs.par_iter().map(|x| x.abs()).reduce(|| 0.0, f64::max)
}

/// True if every element is finite.
pub fn all_finite(xs: &[f64]) -> bool {
    xs.par_iter().all(|x| x.is_finite())
}

/// Both sides of the ninth-root power-mean comparison.
pub struct NinthRootMeans {
    /// (1/n) * sum a_i^(1/9)
    pub mean_of_roots: f64,
    /// ((1/n) * sum a_i)^(1/9)
    pub root_of_mean: f64,
}

/// Guarded reduction for averaging ninth roots: inputs must be non-negative,
/// and concavity of t^(1/9) guarantees `mean_of_roots <= root_of_mean`.
pub fn ninth_root_means(values: &[f64]) -> Result<NinthRootMeans> {
    if values.is_empty() {
        return Err(Error::Degenerate("ninth-root mean of empty slice".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Degenerate(format!(
            "ninth-root mean requires finite non-negative inputs, got {v}"
        )));
    }
    let n = values.len() as f64;
    let roots: Vec<f64> = values.iter().map(|v| v.powf(1.0 / 9.0)).collect();
    Ok(NinthRootMeans {
        mean_of_roots: neumaier_sum(&roots) / n,
        root_of_mean: (neumaier_sum(values) / n).powf(1.0 / 9.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_sum_matches_exact_rational_case() {
        let xs: Vec<f64> = (0..100_000).map(|i| (i % 7) as f64).collect();
        let expect: f64 = xs.iter().sum::<f64>();
        assert_eq!(det_sum(&xs), expect);
    }

    #[test]
    fn det_sum_is_chunk_stable_for_adversarial_magnitudes() {
        // Alternating huge/tiny terms cancel; the compensated chunked sum
        // should recover the small residual far better than naive order.
        let mut xs = Vec::new();
        for i in 0..50_000 {
            xs.push(1e16);
            xs.push(1.0);
            xs.push(-1e16);
            let _ = i;
        }
        let s = det_sum(&xs);
        assert!(
            (s - 50_000.0).abs() < 1e-6,
            "compensated sum should keep the small residual, got {s}"
        );
    }

    #[test]
    fn ninth_root_means_rejects_negative() {
        assert!(ninth_root_means(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn ninth_root_means_ordering_holds() {
        let vals = [0.3, 2.0, 7.5, 0.01];
        let m = ninth_root_means(&vals).unwrap();
        assert!(
            m.mean_of_roots <= m.root_of_mean * (1.0 + 1e-15),
            "concavity bound violated: {} > {}",
            m.mean_of_roots,
            m.root_of_mean
        );
    }
}
