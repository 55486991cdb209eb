//! Two-dimensional FFT on square grids.
//!
//! Rows are transformed in place, the grid is transposed, the (former)
//! columns are transformed as rows, and the grid is transposed back. Row
//! batches run through [`crate::exec`], so the transform parallelizes with
//! the `parallel` feature while staying bit-deterministic.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::exec;

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, data: &mut Vec<Complex64>) {
        self.transform(data, &self.forward, false);
    }

    /// Inverse transform, normalized by 1/n².
    pub fn inverse(&self, data: &mut Vec<Complex64>) {
        self.transform(data, &self.inverse, true);
    }

    fn transform(&self, data: &mut Vec<Complex64>, fft: &Arc<dyn Fft<f64>>, normalize: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "field length must be n^2");
        let scratch_len = fft.get_inplace_scratch_len();

        let run_rows = |buf: &mut [Complex64]| {
            let fft = Arc::clone(fft);
            exec::for_each_row(buf, n, move |_, row| {
                let mut scratch = vec![Complex64::default(); scratch_len];
                fft.process_with_scratch(row, &mut scratch);
            });
        };

        run_rows(data);
        let mut t = transpose(data, n);
        run_rows(&mut t);
        *data = transpose(&t, n);

        if normalize {
            let scale = 1.0 / (n * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }
}

fn transpose(src: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::default(); n * n];
    exec::for_each_row(&mut dst, n, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = src[j * n + i];
        }
    });
    dst
}
