//! Hardness metrics: the effective Fourier sample count V and the
//! autocorrelation sparsity μ = N²/V, with the point-group rescaling μ → μ/Z.

use serde::{Deserialize, Serialize};

/// Constant of the published fixed formula μ = (N/64.17)².
pub const PAPER_MU_CONSTANT: f64 = 64.17;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardnessReport {
    pub n: usize,
    pub v: f64,
    pub mu: f64,
    pub mu_paper_formula: f64,
    pub z: u32,
}

/// V = Σ exp(-b|q|²) over the M×M dual lattice, q components in -M/2..M/2-1.
pub fn effective_volume(b: f64, m: usize) -> f64 {
    assert!(b > 0.0, "filter exponent must be positive");
    let half = m as i64 / 2;
    let mut sum = 0.0;
    for p in -half..half {
        for q in -half..half {
            sum += (-b * (p * p + q * q) as f64).exp();
        }
    }
    sum
}

/// Generalized autocorrelation sparsity (N/Z)²/(V/Z) = N²/(V·Z).
pub fn mu(n: usize, v: f64, z: u32) -> f64 {
    assert!(v > 0.0 && z > 0);
    let n = n as f64;
    n * n / (v * z as f64)
}

/// The published fixed formula μ = (N/64.17)².
pub fn mu_paper(n: usize) -> f64 {
    let r = n as f64 / PAPER_MU_CONSTANT;
    r * r
}

/// 3-D integral approximation V ≈ (6π/B)^{3/2}·vol(Λ), with b = B/6.
pub fn wilson_volume_3d(b_factor: f64, cell_volume: f64) -> f64 {
    assert!(b_factor > 0.0 && cell_volume > 0.0);
    (6.0 * std::f64::consts::PI / b_factor).powf(1.5) * cell_volume
}

/// Report for one instance size: V from the given filter, both μ variants.
pub fn hardness_report(n: usize, filter_b: f64, m: usize, z: u32) -> HardnessReport {
    let v = effective_volume(filter_b, m);
    HardnessReport {
        n,
        v,
        mu: mu(n, v, z),
        mu_paper_formula: mu_paper(n),
        z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::DEFAULT_FILTER_B;

    #[test]
    fn huge_b_leaves_only_dc() {
        let v = effective_volume(1e6, 128);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn benchmark_volume_near_62_squared() {
        let v = effective_volume(DEFAULT_FILTER_B, 128);
        assert!((v - 3.91e3).abs() / 3.91e3 < 0.01, "V = {v}");
        assert!((v.sqrt() - 62.5).abs() < 0.5);
    }

    #[test]
    fn small_b_approaches_continuum() {
        // For b → 0 the lattice sum approaches the Gaussian integral π/b.
        let b = 1e-4;
        let v = effective_volume(b, 512);
        let integral = std::f64::consts::PI / b;
        assert!((v - integral).abs() / integral < 0.01, "V = {v}");
    }

    #[test]
    fn mu_formula_cases() {
        assert!((mu(400, 64.17 * 64.17, 1) - mu_paper(400)).abs() < 1e-9);
        assert!((mu_paper(400) - 38.86).abs() < 0.05);
        assert!((mu_paper(100) - 2.43).abs() < 0.01);
        // Z rescaling: both N and V divided by Z.
        let v = 1000.0;
        assert!((mu(200, v, 4) - (200.0f64 / 4.0).powi(2) / (v / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn mu_monotone_in_n() {
        let v = effective_volume(DEFAULT_FILTER_B, 128);
        assert!(mu(100, v, 1) < mu(101, v, 1));
    }

    #[test]
    fn volume_decreasing_in_b() {
        assert!(effective_volume(1e-3, 128) > effective_volume(2e-3, 128));
    }

    #[test]
    fn wilson_3d_cases() {
        let b = 6.0 * std::f64::consts::PI;
        assert!((wilson_volume_3d(b, 1.0) - 1.0).abs() < 1e-12);
        assert!((wilson_volume_3d(24.0, 2.0) - 2.0 * wilson_volume_3d(24.0, 1.0)).abs() < 1e-9);
        // B = 24, vol = 1e5: (π/4)^{3/2}·1e5.
        let expect = (std::f64::consts::PI / 4.0).powf(1.5) * 1e5;
        assert!((wilson_volume_3d(24.0, 1e5) - expect).abs() < 1e-6);
        assert!((expect - 6.96e4).abs() / 6.96e4 < 0.01);
    }

    #[test]
    fn benchmark_mu_range_spans_paper_interval() {
        let lo = mu_paper(100);
        let hi = mu_paper(400);
        assert!(lo > 2.3 && lo < 2.5);
        assert!(hi > 38.0 && hi < 39.5);
    }
}
