//! Iterative phase-retrieval maps over the two projections.
//!
//! RRR:                  ρ ← ρ + β(P₂(2P₁(ρ) − ρ) − P₁(ρ))
//! alternating:          ρ ← P₂(P₁(ρ))
//! charge flipping:      ρ ← P₂(2P₁(ρ) − ρ)
//!
//! All three share the harness: random normal start, the power-ratio
//! certificate computed every iteration from that iteration's ρ₂ and support,
//! optional trace capture, and an iteration cap that yields an unsolved report
//! rather than an error. Alternating projections additionally stops when
//! successive iterates agree to 1e-10 relative while uncertified — its
//! characteristic stall at an uninteresting fixed point.

use crate::fft::Fft2;
use crate::grid::{forward_transform_with, GridError, MagnitudeField, RealGrid};
use crate::projections::{
    magnitude_projection_into, power_ratio_indices, select_support, PhaseSolution,
    ProjectionError,
};
use crate::rng::{stream_rng, STREAM_SOLVER};
use ndarray::Array2;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

const ALTERNATING_STALL_REL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    Rrr,
    Alternating,
    ChargeFlip,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Rrr => "rrr",
            SolverKind::Alternating => "alternating",
            SolverKind::ChargeFlip => "charge-flip",
        })
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rrr" => Ok(SolverKind::Rrr),
            "alternating" | "ap" => Ok(SolverKind::Alternating),
            "charge-flip" | "cf" => Ok(SolverKind::ChargeFlip),
            other => Err(format!("unknown solver {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// RRR time-step-like parameter, in (0, 2).
    pub beta: f64,
    pub max_iterations: u64,
    /// Certificate threshold on the power ratio, in (0, 1).
    pub check_threshold: f64,
    pub seed: u64,
    /// Record (iteration, ratio) every this many iterations; 0 disables.
    pub trace_stride: u64,
}

impl SolverConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            beta: 0.5,
            max_iterations: 100_000_000,
            check_threshold: 0.95,
            seed,
            trace_stride: 0,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(SolverError::InvalidConfig(format!(
                "beta {} outside (0, 2)",
                self.beta
            )));
        }
        if !(self.check_threshold > 0.0 && self.check_threshold < 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "check threshold {} outside (0, 1)",
                self.check_threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig("max_iterations is zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: u64,
    pub solved: bool,
    pub final_ratio: f64,
    pub wall_seconds: f64,
    pub seed: u64,
    /// Alternating projections only: iterates converged while uncertified.
    pub stalled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<(u64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: SolveReport,
    /// Present exactly when the certificate fired.
    pub solution: Option<PhaseSolution>,
}

pub fn rrr_solve(
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    run(SolverKind::Rrr, data, support_size, cfg, None)
}

pub fn rrr_solve_from(
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
    init: &RealGrid,
) -> Result<SolveOutcome, SolverError> {
    run(SolverKind::Rrr, data, support_size, cfg, Some(init))
}

pub fn alternating_solve(
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    run(SolverKind::Alternating, data, support_size, cfg, None)
}

pub fn alternating_solve_from(
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
    init: &RealGrid,
) -> Result<SolveOutcome, SolverError> {
    run(SolverKind::Alternating, data, support_size, cfg, Some(init))
}

pub fn charge_flip_solve(
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    run(SolverKind::ChargeFlip, data, support_size, cfg, None)
}

pub fn charge_flip_solve_from(
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
    init: &RealGrid,
) -> Result<SolveOutcome, SolverError> {
    run(SolverKind::ChargeFlip, data, support_size, cfg, Some(init))
}

/// Dispatch by kind; used by the campaign layer.
pub fn solve_with(
    kind: SolverKind,
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    run(kind, data, support_size, cfg, None)
}

fn run(
    kind: SolverKind,
    data: &MagnitudeField,
    support_size: usize,
    cfg: &SolverConfig,
    init: Option<&RealGrid>,
) -> Result<SolveOutcome, SolverError> {
    cfg.validate()?;
    let m = data.size();
    if support_size == 0 || support_size > m * m {
        return Err(SolverError::InvalidConfig(format!(
            "support size {support_size} outside 1..={}",
            m * m
        )));
    }
    let start = Instant::now();
    let mut fft = Fft2::new(m);

    let mut rho: Vec<f64> = match init {
        Some(g) => {
            assert_eq!(g.size(), m, "initial grid size mismatch");
            g.values().iter().copied().collect()
        }
        None => {
            let mut rng = stream_rng(cfg.seed, STREAM_SOLVER);
            (0..m * m)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        }
    };

    let mut rho1 = vec![0.0f64; m * m];
    let mut p2_input = vec![0.0f64; m * m];
    let mut rho2 = vec![0.0f64; m * m];
    let mut cbuf = vec![Complex64::new(0.0, 0.0); m * m];
    let mut order: Vec<(f64, u32)> = Vec::new();
    let mut trace: Vec<(u64, f64)> = Vec::new();

    let mut iterations = 0;
    let mut solved = false;
    let mut stalled = false;
    let mut final_ratio = 0.0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let support = select_support(&rho, support_size, &mut order);
        rho1.fill(0.0);
        for &i in &support {
            rho1[i as usize] = rho[i as usize];
        }
        match kind {
            SolverKind::Rrr | SolverKind::ChargeFlip => {
                for i in 0..m * m {
                    p2_input[i] = 2.0 * rho1[i] - rho[i];
                }
            }
            SolverKind::Alternating => p2_input.copy_from_slice(&rho1),
        }
        magnitude_projection_into(&mut fft, &p2_input, data, &mut cbuf, &mut rho2);

        match kind {
            SolverKind::Rrr => {
                for i in 0..m * m {
                    rho[i] += cfg.beta * (rho2[i] - rho1[i]);
                }
            }
            SolverKind::Alternating => {
                let mut diff = 0.0;
                let mut norm = 0.0;
                for i in 0..m * m {
                    let d = rho2[i] - rho[i];
                    diff += d * d;
                    norm += rho[i] * rho[i];
                }
                if norm > 0.0 && diff.sqrt() / norm.sqrt() < ALTERNATING_STALL_REL {
                    stalled = true;
                }
                rho.copy_from_slice(&rho2);
            }
            SolverKind::ChargeFlip => rho.copy_from_slice(&rho2),
        }

        final_ratio = power_ratio_indices(&rho2, &support)?;
        if cfg.trace_stride > 0 && iterations % cfg.trace_stride == 0 {
            trace.push((iterations, final_ratio));
        }
        if final_ratio > cfg.check_threshold {
            solved = true;
            break;
        }
        if stalled {
            break;
        }
    }

    if cfg.trace_stride > 0 && trace.last().map(|&(i, _)| i) != Some(iterations) {
        trace.push((iterations, final_ratio));
    }

    let solution = if solved {
        let grid = RealGrid::new(Array2::from_shape_vec((m, m), rho2.clone()).expect("shape"))?;
        let spectrum = forward_transform_with(&mut fft, &grid);
        Some(PhaseSolution::from_spectrum(&spectrum)?)
    } else {
        None
    };

    Ok(SolveOutcome {
        report: SolveReport {
            iterations,
            solved,
            final_ratio,
            wall_seconds: start.elapsed().as_secs_f64(),
            seed: cfg.seed,
            stalled,
            trace: if cfg.trace_stride > 0 { Some(trace) } else { None },
        },
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::forward_transform;

    /// Sparse nonnegative signal plus the magnitudes it implies.
    fn feasible_case(m: usize, k: usize) -> (RealGrid, MagnitudeField) {
        let mut g = RealGrid::zeros(m);
        for i in 0..k {
            let x = (3 * i + 1) % m;
            let y = (5 * i + 2) % m;
            g.values_mut()[(x, y)] = 1.0 + i as f64;
        }
        let spec = forward_transform(&g);
        let mags = spec.coeffs().mapv(|c| c.norm());
        (g, MagnitudeField::from_full(mags).unwrap())
    }

    #[test]
    fn fixed_point_certifies_immediately() {
        let (g, data) = feasible_case(16, 5);
        let cfg = SolverConfig::new(1);
        let out = rrr_solve_from(&data, 5, &cfg, &g).unwrap();
        assert!(out.report.solved);
        assert_eq!(out.report.iterations, 1);
        assert!(out.report.final_ratio > 0.999);
        assert!(out.solution.is_some());
    }

    #[test]
    fn alternating_fixed_point_certifies_immediately() {
        let (g, data) = feasible_case(16, 5);
        let cfg = SolverConfig::new(1);
        let out = alternating_solve_from(&data, 5, &cfg, &g).unwrap();
        assert!(out.report.solved);
        assert_eq!(out.report.iterations, 1);
    }

    #[test]
    fn charge_flip_fixed_point_is_inert() {
        let (g, data) = feasible_case(16, 5);
        let cfg = SolverConfig::new(1);
        let out = charge_flip_solve_from(&data, 5, &cfg, &g).unwrap();
        assert!(out.report.solved);
        assert_eq!(out.report.iterations, 1);
    }

    #[test]
    fn zero_data_zero_iterate_surfaces_zero_power() {
        let m = 8;
        let data = MagnitudeField::from_full(Array2::zeros((m, m))).unwrap();
        let cfg = SolverConfig::new(3);
        let err = charge_flip_solve_from(&data, 4, &cfg, &RealGrid::zeros(m)).unwrap_err();
        assert!(matches!(
            err,
            SolverError::Projection(ProjectionError::ZeroPower)
        ));
    }

    #[test]
    fn iteration_limit_reports_unsolved() {
        let m = 16;
        // Random data without a sparse preimage: certificate will not fire.
        let mags = Array2::from_shape_fn((m, m), |(p, q)| {
            if (p, q) == (0, 0) {
                0.0
            } else {
                1.0 + ((p * 7 + q * 13) % 5) as f64
            }
        });
        // Symmetrize.
        let mut sym = mags.clone();
        for p in 0..m {
            for q in 0..m {
                sym[(p, q)] = 0.5 * (mags[(p, q)] + mags[((m - p) % m, (m - q) % m)]);
            }
        }
        let data = MagnitudeField::from_full(sym).unwrap();
        let mut cfg = SolverConfig::new(5);
        cfg.max_iterations = 25;
        let out = rrr_solve(&data, 6, &cfg).unwrap();
        assert!(!out.report.solved);
        assert_eq!(out.report.iterations, 25);
        assert!(out.solution.is_none());
    }

    #[test]
    fn config_validation() {
        let data = feasible_case(8, 3).1;
        let mut cfg = SolverConfig::new(0);
        cfg.beta = 2.5;
        assert!(matches!(
            rrr_solve(&data, 3, &cfg),
            Err(SolverError::InvalidConfig(_))
        ));
        let mut cfg = SolverConfig::new(0);
        cfg.check_threshold = 1.0;
        assert!(rrr_solve(&data, 3, &cfg).is_err());
        let cfg = SolverConfig::new(0);
        assert!(rrr_solve(&data, 0, &cfg).is_err());
    }

    #[test]
    fn trace_records_stride_points() {
        let (_, data) = feasible_case(16, 5);
        let mut cfg = SolverConfig::new(9);
        cfg.max_iterations = 10;
        cfg.trace_stride = 2;
        let out = rrr_solve(&data, 5, &cfg).unwrap();
        let trace = out.report.trace.unwrap();
        assert!(!trace.is_empty());
        for (it, ratio) in &trace {
            assert!(*it >= 1 && *ratio >= 0.0 && *ratio <= 1.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (_, data) = feasible_case(16, 4);
        let mut cfg = SolverConfig::new(123);
        cfg.max_iterations = 500;
        let a = rrr_solve(&data, 4, &cfg).unwrap();
        let b = rrr_solve(&data, 4, &cfg).unwrap();
        assert_eq!(a.report.iterations, b.report.iterations);
        assert_eq!(a.report.final_ratio, b.report.final_ratio);
    }
}
