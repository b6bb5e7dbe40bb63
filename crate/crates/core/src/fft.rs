//! Three-dimensional FFTs on x-fastest complex arrays, built from rustfft
//! line transforms. Passes can skip lines known to be zero on input or not
//! needed on output, which matters for zero-padded convolutions.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Columns gathered per batch for the strided (y and z) passes.
const BATCH: usize = 32;

pub struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("dims", &self.dims).finish()
    }
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.map(|n| planner.plan_fft_forward(n));
        let inverse = dims.map(|n| planner.plan_fft_inverse(n));
        Self { dims, forward, inverse }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Forward transform of the full array.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward_pruned(data, self.dims);
    }

    /// Normalized inverse transform of the full array.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse_pruned(data, self.dims);
    }

    /// Forward transform assuming `data` is zero outside `[0, active)`.
    pub fn forward_pruned(&self, data: &mut [Complex64], active: [usize; 3]) {
        assert_eq!(data.len(), self.len());
        let [nx, ny, _] = self.dims;
        let ffts = &self.forward;
        let mut scratch = self.scratch_buffer(ffts);
        // x lines: only rows with j < active_y and k < active_z carry data.
        for k in 0..active[2] {
            let slab = &mut data[k * nx * ny..k * nx * ny + active[1] * nx];
            ffts[0].process_with_scratch(slab, &mut scratch);
        }
        // y lines within the first active_z slices.
        for k in 0..active[2] {
            let base = k * nx * ny;
            strided_pass(&*ffts[1], data, base, nx, ny, nx, &mut scratch);
        }
        // z lines everywhere.
        strided_pass(&*ffts[2], data, 0, nx * ny, self.dims[2], nx * ny, &mut scratch);
    }

    /// Normalized inverse transform, computing output only inside `[0, keep)`.
    /// Entries outside that box are left in an unspecified state.
    pub fn inverse_pruned(&self, data: &mut [Complex64], keep: [usize; 3]) {
        assert_eq!(data.len(), self.len());
        let [nx, ny, nz] = self.dims;
        let ffts = &self.inverse;
        let mut scratch = self.scratch_buffer(ffts);
        strided_pass(&*ffts[2], data, 0, nx * ny, nz, nx * ny, &mut scratch);
        for k in 0..keep[2] {
            let base = k * nx * ny;
            strided_pass(&*ffts[1], data, base, nx, ny, nx, &mut scratch);
        }
        let norm = 1.0 / self.len() as f64;
        for k in 0..keep[2] {
            let slab = &mut data[k * nx * ny..k * nx * ny + keep[1] * nx];
            ffts[0].process_with_scratch(slab, &mut scratch);
            for row in slab.chunks_exact_mut(nx) {
                for v in &mut row[..keep[0]] {
                    *v *= norm;
                }
            }
        }
    }

    fn scratch_buffer(&self, ffts: &[Arc<dyn Fft<f64>>; 3]) -> Vec<Complex64> {
        let need = ffts.iter().map(|f| f.get_inplace_scratch_len()).max().unwrap_or(0);
        vec![Complex64::default(); need]
    }
}

/// Transforms `count` lines of length `n` and element stride `stride`; line
/// `c` starts at `base + c`. Lines are gathered in contiguous batches.
fn strided_pass(
    fft: &dyn Fft<f64>,
    data: &mut [Complex64],
    base: usize,
    count: usize,
    n: usize,
    stride: usize,
    scratch: &mut [Complex64],
) {
    let mut buf = vec![Complex64::default(); BATCH * n];
    let mut c0 = 0;
    while c0 < count {
        let b = BATCH.min(count - c0);
        for t in 0..n {
            let row = base + t * stride + c0;
            let src = &data[row..row + b];
            for (l, v) in src.iter().enumerate() {
                buf[l * n + t] = *v;
            }
        }
        fft.process_with_scratch(&mut buf[..b * n], scratch);
        for t in 0..n {
            let row = base + t * stride + c0;
            let dst = &mut data[row..row + b];
            for (l, v) in dst.iter_mut().enumerate() {
                *v = buf[l * n + t];
            }
        }
        c0 += b;
    }
}
