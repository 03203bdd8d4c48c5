//! 3D complex FFT, applied axis by axis with cached rustfft plans.
//!
//! Forward transforms are unnormalized; the inverse carries the full `1/N^3`.
//! Line transforms are embarrassingly parallel, so thread count cannot change
//! any output bit.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Raw pointer wrapper so disjoint strided lines can be transformed in
/// parallel. Safety rests on the index sets of distinct tasks never
/// overlapping; each call site states its disjointness argument.
struct SyncPtr(*mut Complex<f64>);
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

impl SyncPtr {
    // Accessor keeps closures capturing the wrapper, not the bare pointer.
    fn get(&self) -> *mut Complex<f64> {
        self.0
    }
}

fn transform_axes(grid: Grid, data: &mut [Complex<f64>], inverse: bool) {
    let n = grid.n();
    debug_assert_eq!(data.len(), grid.len());
    let fft = plan(n, inverse);

    // x axis: lines are contiguous chunks of length n.
    data.par_chunks_exact_mut(n).for_each_init(
        || vec![Complex::default(); fft.get_inplace_scratch_len()],
        |scratch, line| fft.process_with_scratch(line, scratch),
    );

    // y axis: each z-plane is a contiguous n*n block; lines stride by n.
    data.par_chunks_exact_mut(n * n).for_each_init(
        || {
            (
                vec![Complex::default(); n],
                vec![Complex::default(); fft.get_inplace_scratch_len()],
            )
        },
        |(buf, scratch), plane| {
            for ix in 0..n {
                for iy in 0..n {
                    buf[iy] = plane[iy * n + ix];
                }
                fft.process_with_scratch(buf, scratch);
                for iy in 0..n {
                    plane[iy * n + ix] = buf[iy];
                }
            }
        },
    );

    // z axis: lines stride by n*n and cross every plane, so parallelism is
    // over iy. Task iy touches exactly the indices iz*n*n + iy*n + ix,
    // disjoint across distinct iy.
    let ptr = SyncPtr(data.as_mut_ptr());
    (0..n).into_par_iter().for_each_init(
        || {
            (
                vec![Complex::default(); n],
                vec![Complex::default(); fft.get_inplace_scratch_len()],
            )
        },
        |(buf, scratch), iy| {
            let base = ptr.get();
            for ix in 0..n {
                let off = iy * n + ix;
                for iz in 0..n {
                    // Safety: indices off + iz*n*n are unique to this iy.
                    buf[iz] = unsafe { *base.add(off + iz * n * n) };
                }
                fft.process_with_scratch(buf, scratch);
                for iz in 0..n {
                    unsafe { *base.add(off + iz * n * n) = buf[iz] };
                }
            }
        },
    );
}

/// In-place forward 3D FFT (unnormalized).
pub fn forward_inplace(grid: Grid, data: &mut [Complex<f64>]) {
    transform_axes(grid, data, false);
}

/// In-place inverse 3D FFT, normalized by `1/N^3`.
pub fn inverse_inplace(grid: Grid, data: &mut [Complex<f64>]) {
    transform_axes(grid, data, true);
    let scale = 1.0 / grid.len() as f64;
    data.par_iter_mut().for_each(|v| *v *= scale);
}

/// Forward transform of a real sample array.
pub fn forward_real(grid: Grid, real: &[f64]) -> Vec<Complex<f64>> {
    debug_assert_eq!(real.len(), grid.len());
    let mut data: Vec<Complex<f64>> = real.par_iter().map(|&v| Complex::new(v, 0.0)).collect();
    forward_inplace(grid, &mut data);
    data
}

/// Inverse transform, keeping the real part (imaginary residue is rounding
/// noise for Hermitian-symmetric input).
pub fn inverse_to_real(grid: Grid, spec: &[Complex<f64>]) -> Vec<f64> {
    let mut data = spec.to_vec();
    transform_axes(grid, &mut data, true);
    let scale = 1.0 / grid.len() as f64;
    data.par_iter().map(|v| v.re * scale).collect()
}
