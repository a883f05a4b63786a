//! Workbench for crystallographic phase retrieval benchmarks.
//!
//! The crate covers the full pipeline: seeded generation of graded photon-count
//! instances, the two constraint projections (support size and Fourier
//! magnitude), the RRR / alternating-projection / charge-flipping iterations
//! with the power-ratio solution certificate, autocorrelation-sparsity hardness
//! metrics, campaign orchestration, and a generic (prior-free) phase retrieval
//! solver for Gaussian and coded-diffraction-pattern sensing models.

pub mod campaign;
pub mod fft;
pub mod generic;
pub mod grid;
pub mod hardness;
pub mod instance;
pub mod io;
pub mod projections;
pub mod rng;
pub mod solvers;

pub use campaign::{
    run_campaign, verify_solution, CampaignResult, CampaignSpec, CellResult, CellSpec, SeedPolicy,
    VerifyOutcome,
};
pub use fft::Fft2;
pub use generic::{
    cdp_experiment, gaussian_campaign, magnitude_projection_c, phase_invariant_error,
    range_projection, rrr_generic, CdpSensing, GaussianSensing, GenericConfig, GenericResult,
    SensingOperator,
};
pub use grid::{
    forward_transform, inverse_transform, upsample, ComplexSpectrum, GridError, MagnitudeField,
    RealGrid,
};
pub use hardness::{effective_volume, hardness_report, mu, mu_paper, wilson_volume_3d, HardnessReport};
pub use instance::{
    generate, ground_truth_solution, intensity_second_moment, sample_atoms, sample_photons,
    synthesize_intensities, tune_i2, Atom, AtomSet, Grade, GroundTruth, InstanceError,
    InstanceSpec, IntensityField, PhotonHalfTable, TuneDirection,
};
pub use projections::{
    magnitude_projection, power_ratio, support_projection, PhaseSolution, ProjectionError,
    SupportSet,
};
pub use solvers::{
    alternating_solve, alternating_solve_from, charge_flip_solve, charge_flip_solve_from,
    rrr_solve, rrr_solve_from, SolveOutcome, SolveReport, SolverConfig, SolverError, SolverKind,
};
