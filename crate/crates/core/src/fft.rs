//! Planned 2-D FFTs on square power-of-two grids.
//!
//! `Fft2` owns its plans and scratch, so each solver keeps one instance and
//! never shares work buffers across threads. Transforms here are raw
//! (unnormalized) sums; callers apply their convention's prefactor.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft2 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    column: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            size,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            column: vec![Complex64::new(0.0, 0.0); size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place unnormalized forward transform of a row-major `size*size` buffer.
    pub fn forward_raw(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// In-place unnormalized inverse transform (positive exponent, no 1/M² factor).
    pub fn inverse_raw(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        let n = self.size;
        assert_eq!(data.len(), n * n, "buffer must be size*size");
        let plan = if forward {
            Arc::clone(&self.forward)
        } else {
            Arc::clone(&self.inverse)
        };
        for row in data.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut self.scratch);
        }
        for col in 0..n {
            for r in 0..n {
                self.column[r] = data[r * n + col];
            }
            plan.process_with_scratch(&mut self.column, &mut self.scratch);
            for r in 0..n {
                data[r * n + col] = self.column[r];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct O(n^4) DFT, the oracle for the planned path.
    fn dft2_naive(data: &[Complex64], n: usize, sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for p in 0..n {
            for q in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..n {
                    for y in 0..n {
                        let ang = sign * std::f64::consts::TAU * ((p * x + q * y) % n) as f64
                            / n as f64;
                        acc += data[x * n + y] * Complex64::new(ang.cos(), ang.sin());
                    }
                }
                out[p * n + q] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 8;
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let expect = dft2_naive(&data, n, -1.0);
        let mut fft = Fft2::new(n);
        fft.forward_raw(&mut data);
        for (a, b) in data.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_matches_naive() {
        let n = 4;
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let expect = dft2_naive(&data, n, 1.0);
        let mut fft = Fft2::new(n);
        fft.inverse_raw(&mut data);
        for (a, b) in data.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
