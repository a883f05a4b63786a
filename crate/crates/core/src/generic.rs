//! Prior-free phase retrieval |y| = |Aρ| on measurement space.
//!
//! Constraints: (i) y in range(A), projected by P₁(y) = AA†y; (ii) |y| equal
//! to the data, projected componentwise by P₂(y) = |y₀|e^{i arg y}. RRR runs
//! on y with β = 0.5; the estimate is ρ = A†y and errors are measured up to a
//! global phase. Two sensing models: dense complex Gaussian (pseudo-inverse
//! through a one-time QR), and coded diffraction patterns where A, A* and A†
//! are applied with FFTs only — the unnormalized transform convention, unlike
//! the crystallographic modules.

use crate::rng::{derive_seed, stream_rng, STREAM_GENERIC, STREAM_SENSING, STREAM_SIGNAL};
use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// A trial counts as a successful reconstruction below this error.
pub const SUCCESS_ERROR: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum GenericError {
    #[error("sensing matrix is rank deficient")]
    RankDeficient,
    #[error("reference signal is zero")]
    ZeroReference,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenericConfig {
    pub beta: f64,
    /// Stop when ‖y' - y‖/‖y‖ drops below this.
    pub tol: f64,
    pub max_iter: u64,
    pub seed: u64,
}

impl GenericConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            beta: 0.5,
            tol: 1e-8,
            max_iter: 10_000,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenericResult {
    pub estimate: Vec<Complex64>,
    /// Phase-invariant error versus the ground truth, when one was supplied.
    pub error: Option<f64>,
    pub iterations: u64,
    pub converged: bool,
}

/// Linear sensing model with enough structure to run RRR on measurement space.
pub trait SensingOperator: Sync {
    fn measurement_len(&self) -> usize;
    fn signal_len(&self) -> usize;
    /// A ρ.
    fn apply(&self, rho: &[Complex64]) -> Vec<Complex64>;
    /// A† y.
    fn estimate(&self, y: &[Complex64]) -> Vec<Complex64>;
    /// Orthogonal projection onto range(A): A A† y.
    fn range_project(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.apply(&self.estimate(y))
    }
}

/// Projection of `y` onto the range of the sensing operator.
pub fn range_projection(sensing: &dyn SensingOperator, y: &[Complex64]) -> Vec<Complex64> {
    sensing.range_project(y)
}

/// P₂: replace magnitudes, keep phases; zero entries get phase 0.
pub fn magnitude_projection_c(y: &[Complex64], target: &[f64]) -> Vec<Complex64> {
    assert_eq!(y.len(), target.len());
    y.iter()
        .zip(target.iter())
        .map(|(&v, &t)| {
            let n = v.norm();
            if n > 0.0 {
                v / n * t
            } else {
                Complex64::new(t, 0.0)
            }
        })
        .collect()
}

/// error = min_φ ‖ρ - e^{iφ}ρ₀‖₂ / ‖ρ₀‖₂, with φ* = arg⟨ρ₀, ρ⟩.
pub fn phase_invariant_error(rho: &[Complex64], rho0: &[Complex64]) -> Result<f64, GenericError> {
    assert_eq!(rho.len(), rho0.len());
    let norm0_sq: f64 = rho0.iter().map(|c| c.norm_sqr()).sum();
    if norm0_sq == 0.0 {
        return Err(GenericError::ZeroReference);
    }
    let inner: Complex64 = rho0
        .iter()
        .zip(rho.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    // e^{iφ*} = inner/|inner|; the explicit residual at φ* avoids the
    // cancellation of the expanded ‖·‖² form.
    let phase = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let dist_sq: f64 = rho
        .iter()
        .zip(rho0.iter())
        .map(|(r, r0)| (r - phase * r0).norm_sqr())
        .sum();
    Ok((dist_sq / norm0_sq).sqrt())
}

/// Complex vector with i.i.d. CN entries (real and imaginary variance 1/2).
pub fn complex_normal_vec(len: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// Dense m×n complex Gaussian sensing with a one-time thin QR; applying the
/// pseudo-inverse costs O(mn) per iteration.
pub struct GaussianSensing {
    m: usize,
    n: usize,
    matrix: DMatrix<Complex64>,
    q: DMatrix<Complex64>,
    r: DMatrix<Complex64>,
}

impl GaussianSensing {
    pub fn new(m: usize, n: usize, rng: &mut impl Rng) -> Result<Self, GenericError> {
        assert!(m >= n && n > 0, "need m >= n >= 1");
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let matrix = DMatrix::from_fn(m, n, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * s, im * s)
        });
        Self::from_matrix(matrix)
    }

    /// Wraps an explicit matrix (used for dense oracles in tests as well).
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self, GenericError> {
        let (m, n) = matrix.shape();
        assert!(m >= n && n > 0);
        let qr = matrix.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let mut max_diag = 0.0f64;
        let mut min_diag = f64::INFINITY;
        for i in 0..n {
            let d = r[(i, i)].norm();
            max_diag = max_diag.max(d);
            min_diag = min_diag.min(d);
        }
        if !(min_diag > 1e-12 * max_diag) {
            return Err(GenericError::RankDeficient);
        }
        Ok(Self { m, n, matrix, q, r })
    }

    /// Samples until full column rank (rank deficiency has probability zero;
    /// the loop exists so the constructor is total).
    pub fn sample(m: usize, n: usize, rng: &mut impl Rng) -> Self {
        loop {
            if let Ok(s) = Self::new(m, n, rng) {
                return s;
            }
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

impl SensingOperator for GaussianSensing {
    fn measurement_len(&self) -> usize {
        self.m
    }

    fn signal_len(&self) -> usize {
        self.n
    }

    fn apply(&self, rho: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(rho);
        (&self.matrix * v).as_slice().to_vec()
    }

    fn estimate(&self, y: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(y);
        let qty = self.q.adjoint() * v;
        let sol = self
            .r
            .clone()
            .solve_upper_triangular(&qty)
            .expect("R is nonsingular by construction");
        sol.as_slice().to_vec()
    }

    fn range_project(&self, y: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(y);
        let proj = &self.q * (self.q.adjoint() * v);
        proj.as_slice().to_vec()
    }
}

/// Coded diffraction patterns: L unimodular masks from {1, -1, i, -i}; A and
/// A† are pairs of FFTs, no matrix is materialized. A*A = (MNL)·I.
pub struct CdpSensing {
    rows: usize,
    cols: usize,
    l: usize,
    masks: Vec<Array2<Complex64>>,
}

impl CdpSensing {
    pub fn new(rows: usize, cols: usize, l: usize, rng: &mut impl Rng) -> Self {
        assert!(l >= 1 && rows >= 1 && cols >= 1);
        let alphabet = [
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
        ];
        let masks = (0..l)
            .map(|_| {
                Array2::from_shape_fn((rows, cols), |_| alphabet[rng.random_range(0..4usize)])
            })
            .collect();
        Self {
            rows,
            cols,
            l,
            masks,
        }
    }

    pub fn masks(&self) -> &[Array2<Complex64>] {
        &self.masks
    }

    pub fn mask_count(&self) -> usize {
        self.l
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Dense matrix with entries conj(d_ℓ(s,t))·e^{-2πi(ps/M + qt/N)}; rows
    /// ordered (ℓ, p, q), columns (s, t). For small oracle comparisons.
    pub fn materialize(&self) -> DMatrix<Complex64> {
        let (mr, nc) = (self.rows, self.cols);
        let m = self.l * mr * nc;
        let n = mr * nc;
        DMatrix::from_fn(m, n, |row, col| {
            let l = row / (mr * nc);
            let p = (row / nc) % mr;
            let q = row % nc;
            let s = col / nc;
            let t = col % nc;
            let ang = -std::f64::consts::TAU
                * (p as f64 * s as f64 / mr as f64 + q as f64 * t as f64 / nc as f64);
            self.masks[l][(s, t)].conj() * Complex64::new(ang.cos(), ang.sin())
        })
    }
}

fn fft2_rect(data: &mut [Complex64], rows: usize, cols: usize, forward: bool) {
    let mut planner = FftPlanner::new();
    let row_plan = if forward {
        planner.plan_fft_forward(cols)
    } else {
        planner.plan_fft_inverse(cols)
    };
    let col_plan = if forward {
        planner.plan_fft_forward(rows)
    } else {
        planner.plan_fft_inverse(rows)
    };
    for row in data.chunks_exact_mut(cols) {
        row_plan.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_plan.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
}

impl SensingOperator for CdpSensing {
    fn measurement_len(&self) -> usize {
        self.l * self.rows * self.cols
    }

    fn signal_len(&self) -> usize {
        self.rows * self.cols
    }

    fn apply(&self, rho: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(rho.len(), self.rows * self.cols);
        let mut out = Vec::with_capacity(self.measurement_len());
        for mask in &self.masks {
            let mut buf: Vec<Complex64> = mask
                .iter()
                .zip(rho.iter())
                .map(|(d, r)| d.conj() * r)
                .collect();
            fft2_rect(&mut buf, self.rows, self.cols, true);
            out.extend_from_slice(&buf);
        }
        out
    }

    fn estimate(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.measurement_len());
        let block = self.rows * self.cols;
        // A† y = Σ_ℓ d_ℓ ⊙ rawinv(y_ℓ) / (MNL): the MN of the adjoint cancels
        // against the normalized inverse FFT.
        let mut acc = vec![Complex64::new(0.0, 0.0); block];
        for (l, mask) in self.masks.iter().enumerate() {
            let mut buf = y[l * block..(l + 1) * block].to_vec();
            fft2_rect(&mut buf, self.rows, self.cols, false);
            for ((a, d), v) in acc.iter_mut().zip(mask.iter()).zip(buf.iter()) {
                *a += d * v;
            }
        }
        let scale = 1.0 / (block as f64 * self.l as f64);
        for a in &mut acc {
            *a *= scale;
        }
        acc
    }
}

/// RRR on measurement space. Stops on the relative successive-iterate change
/// or at `max_iter`; the iterate starts from i.i.d. complex normal entries.
pub fn rrr_generic(
    sensing: &dyn SensingOperator,
    target: &[f64],
    cfg: &GenericConfig,
    ground_truth: Option<&[Complex64]>,
) -> GenericResult {
    let mut rng = stream_rng(cfg.seed, STREAM_GENERIC);
    let init = complex_normal_vec(sensing.measurement_len(), &mut rng);
    run_generic(sensing, target, cfg, ground_truth, init, None)
}

/// Same iteration from an explicit starting point.
pub fn rrr_generic_from(
    sensing: &dyn SensingOperator,
    target: &[f64],
    cfg: &GenericConfig,
    ground_truth: Option<&[Complex64]>,
    init: Vec<Complex64>,
) -> GenericResult {
    run_generic(sensing, target, cfg, ground_truth, init, None)
}

fn run_generic(
    sensing: &dyn SensingOperator,
    target: &[f64],
    cfg: &GenericConfig,
    ground_truth: Option<&[Complex64]>,
    mut y: Vec<Complex64>,
    mut error_trace: Option<&mut Vec<(u64, f64)>>,
) -> GenericResult {
    assert_eq!(target.len(), sensing.measurement_len());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let p1 = sensing.range_project(&y);
        let reflected: Vec<Complex64> = p1
            .iter()
            .zip(y.iter())
            .map(|(a, b)| 2.0 * a - b)
            .collect();
        let p2 = magnitude_projection_c(&reflected, target);
        let mut diff_sq = 0.0;
        let mut norm_sq = 0.0;
        for i in 0..y.len() {
            let step = cfg.beta * (p2[i] - p1[i]);
            norm_sq += y[i].norm_sqr();
            diff_sq += step.norm_sqr();
            y[i] += step;
        }
        if let (Some(trace), Some(gt)) = (error_trace.as_deref_mut(), ground_truth) {
            let est = sensing.estimate(&y);
            if let Ok(e) = phase_invariant_error(&est, gt) {
                trace.push((iterations, e));
            }
        }
        if norm_sq > 0.0 && (diff_sq / norm_sq).sqrt() < cfg.tol {
            converged = true;
            break;
        }
    }
    let estimate = sensing.estimate(&y);
    let error = ground_truth.map(|gt| phase_invariant_error(&estimate, gt).unwrap_or(f64::NAN));
    GenericResult {
        estimate,
        error,
        iterations,
        converged,
    }
}

/// One row of the Gaussian-model campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianCell {
    pub ratio: f64,
    pub trials: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub total_seconds: f64,
    /// total_seconds / successes; absent when nothing succeeded.
    pub time_per_success: Option<f64>,
}

/// Success-rate sweep over measurement ratios m/n, fresh (A, ρ₀) per trial.
pub fn gaussian_campaign(
    n: usize,
    ratios: &[f64],
    trials: u32,
    cfg: &GenericConfig,
) -> Vec<GaussianCell> {
    ratios
        .iter()
        .enumerate()
        .map(|(ri, &ratio)| {
            let m = (ratio * n as f64).round() as usize;
            let outcomes: Vec<(bool, f64)> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let seed = derive_seed(cfg.seed, ri as u64, t as u64);
                    let start = Instant::now();
                    let mut sensing_rng = stream_rng(seed, STREAM_SENSING);
                    let sensing = GaussianSensing::sample(m, n, &mut sensing_rng);
                    let mut signal_rng = stream_rng(seed, STREAM_SIGNAL);
                    let rho0 = complex_normal_vec(n, &mut signal_rng);
                    let target: Vec<f64> =
                        sensing.apply(&rho0).iter().map(|c| c.norm()).collect();
                    let trial_cfg = GenericConfig { seed, ..*cfg };
                    let result = rrr_generic(&sensing, &target, &trial_cfg, Some(&rho0));
                    let success = result.error.map(|e| e < SUCCESS_ERROR).unwrap_or(false);
                    (success, start.elapsed().as_secs_f64())
                })
                .collect();
            let successes = outcomes.iter().filter(|(s, _)| *s).count() as u32;
            let total_seconds: f64 = outcomes.iter().map(|(_, t)| t).sum();
            GaussianCell {
                ratio,
                trials,
                successes,
                success_rate: successes as f64 / trials as f64,
                total_seconds,
                time_per_success: if successes > 0 {
                    Some(total_seconds / successes as f64)
                } else {
                    None
                },
            }
        })
        .collect()
}

/// CDP reconstruction of a real image with L masks; returns the result and the
/// per-iteration error trace.
pub fn cdp_experiment(
    image: &Array2<f64>,
    l: usize,
    cfg: &GenericConfig,
) -> (GenericResult, Vec<(u64, f64)>) {
    let (rows, cols) = image.dim();
    let mut mask_rng = stream_rng(cfg.seed, STREAM_SENSING);
    let sensing = CdpSensing::new(rows, cols, l, &mut mask_rng);
    let rho0: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let target: Vec<f64> = sensing.apply(&rho0).iter().map(|c| c.norm()).collect();
    let mut rng = stream_rng(cfg.seed, STREAM_GENERIC);
    let init = complex_normal_vec(sensing.measurement_len(), &mut rng);
    let mut trace = Vec::new();
    let result = run_generic(&sensing, &target, cfg, Some(&rho0), init, Some(&mut trace));
    (result, trace)
}

/// Smooth positive test image: a few Gaussian bumps on a gentle ramp.
pub fn synthetic_test_image(rows: usize, cols: usize) -> Array2<f64> {
    let bumps = [
        (0.30, 0.35, 0.12, 1.0),
        (0.68, 0.62, 0.18, 0.7),
        (0.25, 0.75, 0.10, 0.5),
    ];
    Array2::from_shape_fn((rows, cols), |(x, y)| {
        let fx = x as f64 / rows as f64;
        let fy = y as f64 / cols as f64;
        let mut v = 0.1 + 0.05 * fx + 0.03 * fy;
        for (cx, cy, w, a) in bumps {
            let d2 = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy);
            v += a * (-d2 / (2.0 * w * w)).exp();
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn near(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn magnitude_projection_componentwise() {
        let y = vec![Complex64::new(0.0, 2.0), Complex64::new(0.0, 0.0)];
        let t = vec![3.0, 5.0];
        let out = magnitude_projection_c(&y, &t);
        assert!(near(out[0], Complex64::new(0.0, 3.0), 1e-12));
        assert!(near(out[1], Complex64::new(5.0, 0.0), 1e-12));
    }

    #[test]
    fn magnitude_projection_exact_magnitudes() {
        let mut rng = stream_rng(2, STREAM_GENERIC);
        let y = complex_normal_vec(32, &mut rng);
        let t: Vec<f64> = (0..32).map(|i| i as f64 * 0.25).collect();
        let out = magnitude_projection_c(&y, &t);
        for (o, t) in out.iter().zip(t.iter()) {
            assert!((o.norm() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_error_invariances() {
        let mut rng = stream_rng(5, STREAM_SIGNAL);
        let rho0 = complex_normal_vec(40, &mut rng);
        assert!(phase_invariant_error(&rho0, &rho0).unwrap() < 1e-15);
        let phi = Complex64::new(0.0, 1.3).exp();
        let rotated: Vec<Complex64> = rho0.iter().map(|c| c * phi).collect();
        assert!(phase_invariant_error(&rotated, &rho0).unwrap() < 1e-12);
        let zero = vec![Complex64::new(0.0, 0.0); 40];
        assert!(matches!(
            phase_invariant_error(&rho0, &zero),
            Err(GenericError::ZeroReference)
        ));
    }

    #[test]
    fn range_projection_idempotent_and_nonexpansive() {
        let mut rng = stream_rng(7, STREAM_SENSING);
        let sensing = GaussianSensing::sample(18, 6, &mut rng);
        let y = complex_normal_vec(18, &mut rng);
        let p = sensing.range_project(&y);
        let pp = sensing.range_project(&p);
        for (a, b) in p.iter().zip(pp.iter()) {
            assert!(near(*a, *b, 1e-10));
        }
        let ny: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        let np: f64 = p.iter().map(|c| c.norm_sqr()).sum();
        assert!(np <= ny * (1.0 + 1e-12));
    }

    #[test]
    fn range_fixed_points_are_images() {
        let mut rng = stream_rng(8, STREAM_SENSING);
        let sensing = GaussianSensing::sample(20, 5, &mut rng);
        let rho = complex_normal_vec(5, &mut rng);
        let y = sensing.apply(&rho);
        let p = sensing.range_project(&y);
        let ny: f64 = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let d: f64 = y
            .iter()
            .zip(p.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(d / ny < 1e-10);
    }

    #[test]
    fn estimate_inverts_apply() {
        let mut rng = stream_rng(9, STREAM_SENSING);
        let sensing = GaussianSensing::sample(24, 8, &mut rng);
        let rho = complex_normal_vec(8, &mut rng);
        let y = sensing.apply(&rho);
        let back = sensing.estimate(&y);
        for (a, b) in rho.iter().zip(back.iter()) {
            assert!(near(*a, *b, 1e-9));
        }
    }

    #[test]
    fn solution_start_terminates_fast() {
        let mut rng = stream_rng(11, STREAM_SENSING);
        let sensing = GaussianSensing::sample(30, 6, &mut rng);
        let rho0 = complex_normal_vec(6, &mut rng);
        let y0 = sensing.apply(&rho0);
        let target: Vec<f64> = y0.iter().map(|c| c.norm()).collect();
        let cfg = GenericConfig::new(1);
        let result = rrr_generic_from(&sensing, &target, &cfg, Some(&rho0), y0);
        assert!(result.converged);
        assert!(result.iterations <= 2);
        assert!(result.error.unwrap() < 1e-7);
    }

    #[test]
    fn cdp_estimate_inverts_apply() {
        let mut rng = stream_rng(13, STREAM_SENSING);
        let sensing = CdpSensing::new(4, 8, 2, &mut rng);
        let rho = complex_normal_vec(32, &mut rng);
        let y = sensing.apply(&rho);
        let back = sensing.estimate(&y);
        for (a, b) in rho.iter().zip(back.iter()) {
            assert!(near(*a, *b, 1e-9), "{a} vs {b}");
        }
    }

    #[test]
    fn cdp_dc_measurement_formula() {
        // With one mask, the (0,0) measurement is |Σ conj(d₀)⊙ρ₀|.
        let mut rng = stream_rng(17, STREAM_SENSING);
        let sensing = CdpSensing::new(4, 4, 1, &mut rng);
        let image = synthetic_test_image(4, 4);
        let rho0: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let y = sensing.apply(&rho0);
        let direct: Complex64 = sensing.masks()[0]
            .iter()
            .zip(rho0.iter())
            .map(|(d, r)| d.conj() * r)
            .sum();
        assert!(near(y[0], direct, 1e-10));
    }
}
