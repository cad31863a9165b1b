//! Square 2-D complex FFT built from rustfft row transforms.
//!
//! A 2-D pass is rows / transpose / rows, leaving the data in transposed
//! layout; the inverse pass undoes it. Pointwise spectral work therefore runs
//! in the transposed layout throughout, and only two transposes are paid per
//! round trip. Rows are independent, so the parallel lane is bit-identical to
//! the sequential one.

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::exec;

/// Smallest integer >= `n` whose prime factors are all in {2, 3, 5, 7, 11, 13}.
pub fn next_smooth(n: usize) -> usize {
    fn is_smooth(mut m: usize) -> bool {
        for p in [2usize, 3, 5, 7, 11, 13] {
            while m % p == 0 {
                m /= p;
            }
        }
        m == 1
    }
    let mut m = n.max(1);
    while !is_smooth(m) {
        m += 1;
    }
    m
}

/// Blocked in-place transpose of an `n x n` matrix.
fn transpose_square(buf: &mut [Complex<f64>], n: usize) {
    const B: usize = 32;
    debug_assert_eq!(buf.len(), n * n);
    let mut bi = 0;
    while bi < n {
        let bi_end = (bi + B).min(n);
        // diagonal block
        for i in bi..bi_end {
            for j in (i + 1)..bi_end {
                buf.swap(i * n + j, j * n + i);
            }
        }
        let mut bj = bi_end;
        while bj < n {
            let bj_end = (bj + B).min(n);
            for i in bi..bi_end {
                for j in bj..bj_end {
                    buf.swap(i * n + j, j * n + i);
                }
            }
            bj = bj_end;
        }
        bi = bi_end;
    }
}

/// Cached plans for one transform size.
pub struct Fft2d {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(n, FftDirection::Forward);
        let inv = planner.plan_fft(n, FftDirection::Inverse);
        Self { n, fwd, inv }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn row_pass(&self, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let scratch_len = fft.get_inplace_scratch_len();
        let fft = Arc::clone(fft);
        exec::for_each_row_scratch_mut(
            buf,
            self.n,
            move || vec![Complex::default(); scratch_len],
            move |scratch, _r, row| fft.process_with_scratch(row, scratch),
        );
    }

    /// Forward 2-D transform; output is in transposed layout
    /// (`buf[kx * n + ky]`), unnormalized.
    pub fn forward(&self, buf: &mut [Complex<f64>]) {
        assert_eq!(buf.len(), self.n * self.n);
        self.row_pass(buf, &self.fwd.clone());
        transpose_square(buf, self.n);
        self.row_pass(buf, &self.fwd.clone());
    }

    /// Inverse of [`forward`]: takes the transposed spectral layout back to
    /// row-major spatial samples. Unnormalized: a forward/inverse round trip
    /// multiplies by `n^2`.
    pub fn inverse(&self, buf: &mut [Complex<f64>]) {
        assert_eq!(buf.len(), self.n * self.n);
        self.row_pass(buf, &self.inv.clone());
        transpose_square(buf, self.n);
        self.row_pass(buf, &self.inv.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth(1040), 1040); // 2^4 * 5 * 13
        assert_eq!(next_smooth(257), 260);
        assert_eq!(next_smooth(1), 1);
    }

    #[test]
    fn round_trip_recovers_input() {
        let n = 24;
        let mut buf: Vec<Complex<f64>> = (0..n * n)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = buf.clone();
        let fft = Fft2d::new(n);
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        let scale = (n * n) as f64;
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_direct_dft() {
        let n = 8;
        let mut buf: Vec<Complex<f64>> = (0..n * n)
            .map(|i| Complex::new((i as f64).cos(), 0.25 * (i as f64).sin()))
            .collect();
        let orig = buf.clone();
        let fft = Fft2d::new(n);
        fft.forward(&mut buf);
        // direct DFT: F(kx, ky) = sum_{ix, iy} f(ix, iy) e^{-2 pi i (ix kx + iy ky)/n}
        for kx in 0..n {
            for ky in 0..n {
                let mut acc = Complex::new(0.0, 0.0);
                for iy in 0..n {
                    for ix in 0..n {
                        let phase = -2.0 * std::f64::consts::PI * (ix * kx + iy * ky) as f64 / n as f64;
                        acc += orig[iy * n + ix] * Complex::from_polar(1.0, phase);
                    }
                }
                // transposed layout
                assert!((buf[kx * n + ky] - acc).norm() < 1e-10);
            }
        }
    }
}
