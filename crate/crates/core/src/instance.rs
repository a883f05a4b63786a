//! Benchmark instance construction.
//!
//! An instance starts from N atom centers sampled on a 512×512 torus with a
//! minimum pairwise distance of 12, ⌊N/2⌋ of them carrying weight 1 and the
//! rest weight 2. The coarse-grid Fourier intensities come from the frequency-domain
//! crop (exact sub-pixel centers), are attenuated by a Gaussian filter, graded
//! by a Monte-Carlo walk on the normalized second moment i2, rescaled so the
//! expected photon total is proportional to N, Poisson-sampled once per
//! frequency, and Friedel-symmetrized into a 128×64 half-table of counts.

use crate::grid::{inverse_transform, ComplexSpectrum, MagnitudeField, RealGrid};
use crate::projections::PhaseSolution;
use crate::rng::{stream_rng, STREAM_ATOMS, STREAM_PHOTONS, STREAM_TUNING};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Fine grid edge on which atom centers are sampled.
pub const FINE_GRID: usize = 512;
/// Coarse grid edge of the benchmark signal and data.
pub const COARSE_GRID: usize = 128;
/// Minimum torus-Euclidean distance between atom centers on the fine grid.
pub const MIN_ATOM_DISTANCE: f64 = 12.0;
/// Gaussian intensity filter exponent: attenuation 25 at the first unmeasured
/// frequency |q| = 64, i.e. b = ln(25)/64².
pub const DEFAULT_FILTER_B: f64 = 3.218_875_824_868_200_6 / 4096.0;
/// Intensity rescale: expected photons per atom over the measured frequencies.
/// Calibrated so the ground-truth power ratio at N = 400 sits just inside the
/// certificate, in (0.95, 0.975).
pub const DEFAULT_PHOTONS_PER_ATOM: f64 = 10_000.0;

const MIN_DIST_SQ: i64 = 144;
const MAX_SAMPLER_ATOMS: usize = 1200;
const PLACEMENT_REJECT_LIMIT: u64 = 10_000;
const TUNING_STALL_LIMIT: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("atom count {0} must be at least 2")]
    BadAtomCount(usize),
    #[error("atom count {0} too dense for the distance constraint (limit {MAX_SAMPLER_ATOMS})")]
    TooManyAtoms(usize),
    #[error("placement failed after {PLACEMENT_REJECT_LIMIT} consecutive rejections ({placed} atoms placed)")]
    PlacementFailure { placed: usize },
    #[error("i2 tuning stalled after {TUNING_STALL_LIMIT} consecutive failed proposals (i2 = {i2})")]
    TuningStall { i2: f64 },
    #[error("atom coordinates out of range or bad weight")]
    BadAtom,
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error(transparent)]
    Projection(#[from] crate::projections::ProjectionError),
}

/// Difficulty grade, set by the tuned value of the i2 statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grade {
    E,
    M,
    H,
}

impl Grade {
    pub fn target_i2(self) -> f64 {
        match self {
            Grade::E => 4.5,
            Grade::M => 4.0,
            Grade::H => 3.5,
        }
    }

    pub fn all() -> [Grade; 3] {
        [Grade::E, Grade::M, Grade::H]
    }
}

impl std::fmt::Display for Grade {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Grade::E => "E",
            Grade::M => "M",
            Grade::H => "H",
        })
    }
}

impl std::str::FromStr for Grade {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" | "e" => Ok(Grade::E),
            "M" | "m" => Ok(Grade::M),
            "H" | "h" => Ok(Grade::H),
            other => Err(format!("unknown grade {other:?} (expected E, M or H)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub x: u16,
    pub y: u16,
    pub weight: u8,
}

/// Atom centers on the fine grid; pairwise torus distance ≥ 12.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomSet {
    atoms: Vec<Atom>,
}

impl AtomSet {
    /// Validates coordinates, weights and the distance constraint. The even
    /// weight split is a property of `sample_atoms`, not enforced here, so
    /// hand-built configurations (single atoms, pairs) remain expressible.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self, InstanceError> {
        for a in &atoms {
            if a.x as usize >= FINE_GRID || a.y as usize >= FINE_GRID || !(a.weight == 1 || a.weight == 2)
            {
                return Err(InstanceError::BadAtom);
            }
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if torus_dist_sq(
                    (atoms[i].x, atoms[i].y),
                    (atoms[j].x, atoms[j].y),
                ) < MIN_DIST_SQ
                {
                    return Err(InstanceError::BadAtom);
                }
            }
        }
        Ok(Self { atoms })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weight_sum(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight as f64).sum()
    }

    /// Smallest pairwise torus distance, √ of the integer squared distance.
    pub fn min_distance(&self) -> f64 {
        let mut best = i64::MAX;
        for i in 0..self.atoms.len() {
            for j in i + 1..self.atoms.len() {
                best = best.min(torus_dist_sq(
                    (self.atoms[i].x, self.atoms[i].y),
                    (self.atoms[j].x, self.atoms[j].y),
                ));
            }
        }
        (best as f64).sqrt()
    }
}

fn torus_dist_sq(a: (u16, u16), b: (u16, u16)) -> i64 {
    let f = FINE_GRID as i64;
    let mut dx = (a.0 as i64 - b.0 as i64).abs();
    let mut dy = (a.1 as i64 - b.1 as i64).abs();
    dx = dx.min(f - dx);
    dy = dy.min(f - dy);
    dx * dx + dy * dy
}

/// Everything needed to regenerate an instance bit-for-bit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub grade: Grade,
    pub seed: u64,
    pub photons_per_atom: f64,
    pub filter_b: f64,
}

impl InstanceSpec {
    pub fn new(n: usize, grade: Grade, seed: u64) -> Self {
        Self {
            n,
            grade,
            seed,
            photons_per_atom: DEFAULT_PHOTONS_PER_ATOM,
            filter_b: DEFAULT_FILTER_B,
        }
    }
}

/// 128×64 half-table of symmetrized photon counts; the benchmark data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhotonHalfTable {
    counts: Array2<u64>,
}

impl PhotonHalfTable {
    pub fn new(counts: Array2<u64>) -> Result<Self, InstanceError> {
        if counts.dim() != (COARSE_GRID, COARSE_GRID / 2) {
            return Err(InstanceError::BadAtom);
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn get(&self, p: usize, q: usize) -> u64 {
        self.counts[(p, q)]
    }

    /// Sum over the stored half-table; counts every raw photon draw once.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Structural invariants of the data format.
    pub fn invariants_hold(&self) -> bool {
        if self.counts[(0, 0)] != 0 {
            return false;
        }
        (0..COARSE_GRID / 2).all(|q| self.counts[(COARSE_GRID / 2, q)] == 0)
    }
}

impl MagnitudeField {
    /// Fourier magnitudes defined by the data: square roots of the counts,
    /// mirrored over the full plane, Nyquist column zero, (0,0) unmeasured.
    pub fn from_photon_table(table: &PhotonHalfTable) -> Self {
        let half = table.counts.mapv(|c| (c as f64).sqrt());
        MagnitudeField::from_canonical_half(&half).expect("table has valid shape")
    }
}

/// Noise-free filtered intensities on the full coarse frequency plane.
///
/// Nyquist lines are zero; (0,0) holds the true dc intensity but is excluded
/// from measured-frequency statistics.
#[derive(Debug, Clone)]
pub struct IntensityField {
    values: Array2<f64>,
}

impl IntensityField {
    pub fn size(&self) -> usize {
        COARSE_GRID
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn value(&self, p: usize, q: usize) -> f64 {
        self.values[(p, q)]
    }

    /// Σ I over measured frequencies (everything except (0,0)).
    pub fn measured_sum(&self) -> f64 {
        self.values.sum() - self.values[(0, 0)]
    }
}

/// The as-constructed signal behind an instance.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub atoms: AtomSet,
    pub density: RealGrid,
    pub true_magnitudes: MagnitudeField,
    pub achieved_i2: f64,
}

fn signed_freq(idx: usize) -> i64 {
    if idx <= COARSE_GRID / 2 - 1 {
        idx as i64
    } else {
        idx as i64 - COARSE_GRID as i64
    }
}

/// e^{-2πik/512} lookup with exact conjugate symmetry, so synthesized
/// intensities satisfy I(p,q) = I(-p,-q) bit-for-bit.
fn twiddle_table() -> Vec<Complex64> {
    let n = FINE_GRID;
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for (k, slot) in w.iter_mut().enumerate().take(n / 2 + 1) {
        let ang = -TAU * k as f64 / n as f64;
        *slot = Complex64::new(ang.cos(), ang.sin());
    }
    w[0] = Complex64::new(1.0, 0.0);
    w[n / 2] = Complex64::new(-1.0, 0.0);
    for k in n / 2 + 1..n {
        w[k] = w[n - k].conj();
    }
    w
}

fn filter_table(filter_b: f64) -> Array2<f64> {
    let m = COARSE_GRID;
    Array2::from_shape_fn((m, m), |(p, q)| {
        let sp = signed_freq(p);
        let sq = signed_freq(q);
        (-filter_b * (sp * sp + sq * sq) as f64).exp()
    })
}

/// ρ̂(p,q) = Σ_j w_j e^{-2πi(p·x_j + q·y_j)/512} on the coarse plane,
/// Nyquist lines zeroed.
fn atom_spectrum(atoms: &AtomSet) -> Array2<Complex64> {
    let m = COARSE_GRID;
    let w = twiddle_table();
    let mut rho: Array2<Complex64> = Array2::zeros((m, m));
    let mut px = [0usize; COARSE_GRID];
    let mut qy = [0usize; COARSE_GRID];
    for atom in atoms.atoms() {
        fill_axis_phases(&mut px, atom.x);
        fill_axis_phases(&mut qy, atom.y);
        let weight = atom.weight as f64;
        for p in 0..m {
            if p == m / 2 {
                continue;
            }
            for q in 0..m {
                if q == m / 2 {
                    continue;
                }
                let mut k = px[p] + qy[q];
                if k >= FINE_GRID {
                    k -= FINE_GRID;
                }
                rho[(p, q)] += w[k] * weight;
            }
        }
    }
    rho
}

fn fill_axis_phases(out: &mut [usize; COARSE_GRID], coord: u16) {
    let f = FINE_GRID as i64;
    for (idx, slot) in out.iter_mut().enumerate() {
        *slot = (signed_freq(idx) * coord as i64).rem_euclid(f) as usize;
    }
}

/// Filtered noise-free intensities I(p,q) = |ρ̂(p,q)|² e^{-b(p²+q²)}.
pub fn synthesize_intensities(atoms: &AtomSet, filter_b: f64) -> IntensityField {
    let rho = atom_spectrum(atoms);
    let filter = filter_table(filter_b);
    let values = Array2::from_shape_fn(rho.dim(), |ix| rho[ix].norm_sqr() * filter[ix]);
    IntensityField { values }
}

/// i2 = ⟨I²⟩/⟨I⟩² over an explicit list of intensities.
pub fn i2_from_values(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let s1: f64 = values.iter().sum();
    let s2: f64 = values.iter().map(|v| v * v).sum();
    k * s2 / (s1 * s1)
}

/// i2 over the measured, non-Nyquist frequencies of a field, counting both
/// members of every Friedel pair.
pub fn intensity_second_moment(field: &IntensityField) -> f64 {
    let m = COARSE_GRID;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut k = 0.0;
    for p in 0..m {
        if p == m / 2 {
            continue;
        }
        for q in 0..m {
            if q == m / 2 || (p == 0 && q == 0) {
                continue;
            }
            let v = field.values[(p, q)];
            s1 += v;
            s2 += v * v;
            k += 1.0;
        }
    }
    k * s2 / (s1 * s1)
}

/// Sequential rejection sampling of N atoms; ⌊N/2⌋ randomly chosen atoms get
/// weight 1, the rest weight 2 (the instance grid includes odd N such as 175).
/// Deterministic in `seed`.
pub fn sample_atoms(n: usize, seed: u64) -> Result<AtomSet, InstanceError> {
    if n < 2 {
        return Err(InstanceError::BadAtomCount(n));
    }
    if n > MAX_SAMPLER_ATOMS {
        return Err(InstanceError::TooManyAtoms(n));
    }
    let mut rng = stream_rng(seed, STREAM_ATOMS);
    let mut placed: Vec<(u16, u16)> = Vec::with_capacity(n);
    let mut rejects = 0u64;
    while placed.len() < n {
        let x = rng.random_range(0..FINE_GRID as u16);
        let y = rng.random_range(0..FINE_GRID as u16);
        if placed
            .iter()
            .all(|&other| torus_dist_sq((x, y), other) >= MIN_DIST_SQ)
        {
            placed.push((x, y));
            rejects = 0;
        } else {
            rejects += 1;
            if rejects >= PLACEMENT_REJECT_LIMIT {
                return Err(InstanceError::PlacementFailure {
                    placed: placed.len(),
                });
            }
        }
    }
    let light = rand::seq::index::sample(&mut rng, n, n / 2);
    let mut weights = vec![2u8; n];
    for i in light.iter() {
        weights[i] = 1;
    }
    let atoms = placed
        .into_iter()
        .zip(weights)
        .map(|((x, y), weight)| Atom { x, y, weight })
        .collect();
    Ok(AtomSet { atoms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TuneDirection {
    Increase,
    Decrease,
}

fn crossed(i2: f64, target: f64, direction: TuneDirection) -> bool {
    match direction {
        TuneDirection::Increase => i2 >= target,
        TuneDirection::Decrease => i2 <= target,
    }
}

struct TuneState {
    rho: Array2<Complex64>,
    intens: Array2<f64>,
    cand_rho: Array2<Complex64>,
    cand_intens: Array2<f64>,
    filter: Array2<f64>,
    twiddle: Vec<Complex64>,
    i2: f64,
}

impl TuneState {
    fn new(atoms: &AtomSet, filter_b: f64) -> Self {
        let rho = atom_spectrum(atoms);
        let filter = filter_table(filter_b);
        let intens = Array2::from_shape_fn(rho.dim(), |ix| rho[ix].norm_sqr() * filter[ix]);
        let i2 = intensity_second_moment(&IntensityField {
            values: intens.clone(),
        });
        Self {
            cand_rho: rho.clone(),
            cand_intens: intens.clone(),
            rho,
            intens,
            filter,
            twiddle: twiddle_table(),
            i2,
        }
    }

    /// Evaluates moving `atom` to (nx, ny); fills the candidate buffers and
    /// returns the candidate i2.
    fn propose(&mut self, atom: Atom, nx: u16, ny: u16) -> f64 {
        let m = COARSE_GRID;
        let mut px_old = [0usize; COARSE_GRID];
        let mut qy_old = [0usize; COARSE_GRID];
        let mut px_new = [0usize; COARSE_GRID];
        let mut qy_new = [0usize; COARSE_GRID];
        fill_axis_phases(&mut px_old, atom.x);
        fill_axis_phases(&mut qy_old, atom.y);
        fill_axis_phases(&mut px_new, nx);
        fill_axis_phases(&mut qy_new, ny);
        let weight = atom.weight as f64;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut count = 0.0;
        for p in 0..m {
            if p == m / 2 {
                continue;
            }
            for q in 0..m {
                if q == m / 2 {
                    continue;
                }
                let mut k_old = px_old[p] + qy_old[q];
                if k_old >= FINE_GRID {
                    k_old -= FINE_GRID;
                }
                let mut k_new = px_new[p] + qy_new[q];
                if k_new >= FINE_GRID {
                    k_new -= FINE_GRID;
                }
                let cand = self.rho[(p, q)] + (self.twiddle[k_new] - self.twiddle[k_old]) * weight;
                let intensity = cand.norm_sqr() * self.filter[(p, q)];
                self.cand_rho[(p, q)] = cand;
                self.cand_intens[(p, q)] = intensity;
                if p == 0 && q == 0 {
                    continue;
                }
                s1 += intensity;
                s2 += intensity * intensity;
                count += 1.0;
            }
        }
        count * s2 / (s1 * s1)
    }

    fn commit(&mut self, i2: f64) {
        std::mem::swap(&mut self.rho, &mut self.cand_rho);
        std::mem::swap(&mut self.intens, &mut self.cand_intens);
        self.i2 = i2;
    }
}

/// Greedy Monte-Carlo walk on i2: move one random atom at a time (respecting
/// the distance constraint), accept only strict moves toward `target`, stop at
/// the first crossing. Returns the tuned set and its i2.
pub fn tune_i2(
    atoms: &AtomSet,
    target: f64,
    direction: TuneDirection,
    seed: u64,
    filter_b: f64,
) -> Result<(AtomSet, f64), InstanceError> {
    let mut atoms = atoms.clone();
    let n = atoms.len();
    let mut state = TuneState::new(&atoms, filter_b);
    if crossed(state.i2, target, direction) {
        return Ok((atoms, state.i2));
    }
    let mut rng = stream_rng(seed, STREAM_TUNING);
    let mut stall = 0u64;
    loop {
        if stall >= TUNING_STALL_LIMIT {
            return Err(InstanceError::TuningStall { i2: state.i2 });
        }
        let j = rng.random_range(0..n);
        let nx = rng.random_range(0..FINE_GRID as u16);
        let ny = rng.random_range(0..FINE_GRID as u16);
        let ok = atoms
            .atoms
            .iter()
            .enumerate()
            .all(|(i, a)| i == j || torus_dist_sq((nx, ny), (a.x, a.y)) >= MIN_DIST_SQ);
        if !ok {
            stall += 1;
            continue;
        }
        let cand_i2 = state.propose(atoms.atoms[j], nx, ny);
        let accept = match direction {
            TuneDirection::Increase => cand_i2 > state.i2,
            TuneDirection::Decrease => cand_i2 < state.i2,
        };
        if accept {
            state.commit(cand_i2);
            atoms.atoms[j].x = nx;
            atoms.atoms[j].y = ny;
            stall = 0;
            if crossed(state.i2, target, direction) {
                return Ok((atoms, state.i2));
            }
        } else {
            stall += 1;
        }
    }
}

/// One Poisson draw per measured frequency with mean c·I, c set so the
/// expected photon total is `photons_per_atom · n_atoms`; counts at (p,q) and
/// (-p,-q) are then summed into the half-table.
pub fn sample_photons(
    field: &IntensityField,
    photons_per_atom: f64,
    n_atoms: usize,
    seed: u64,
) -> PhotonHalfTable {
    let m = COARSE_GRID;
    let sum = field.measured_sum();
    let scale = if sum > 0.0 {
        photons_per_atom * n_atoms as f64 / sum
    } else {
        0.0
    };
    let mut rng = stream_rng(seed, STREAM_PHOTONS);
    let mut raw: Array2<u64> = Array2::zeros((m, m));
    for p in 0..m {
        for q in 0..m {
            if p == 0 && q == 0 {
                continue;
            }
            let lambda = scale * field.values[(p, q)];
            if lambda > 0.0 {
                let draw: f64 = Poisson::new(lambda).expect("positive mean").sample(&mut rng);
                raw[(p, q)] = draw as u64;
            }
        }
    }
    let mut counts: Array2<u64> = Array2::zeros((m, m / 2));
    for p in 0..m {
        for q in 0..m / 2 {
            if p == 0 && q == 0 {
                continue;
            }
            counts[(p, q)] = raw[(p, q)] + raw[((m - p) % m, (m - q) % m)];
        }
    }
    PhotonHalfTable { counts }
}

/// Runs the full §-by-§ pipeline for one spec. Bitwise deterministic.
pub fn generate(spec: &InstanceSpec) -> Result<(PhotonHalfTable, GroundTruth), InstanceError> {
    let sampled = sample_atoms(spec.n, spec.seed)?;
    let target = spec.grade.target_i2();
    let (atoms, _) = match spec.grade {
        Grade::E => tune_i2(&sampled, target, TuneDirection::Increase, spec.seed, spec.filter_b)?,
        Grade::H => tune_i2(&sampled, target, TuneDirection::Decrease, spec.seed, spec.filter_b)?,
        Grade::M => {
            let current = intensity_second_moment(&synthesize_intensities(&sampled, spec.filter_b));
            let direction = if current < target {
                TuneDirection::Increase
            } else {
                TuneDirection::Decrease
            };
            tune_i2(&sampled, target, direction, spec.seed, spec.filter_b)?
        }
    };
    let field = synthesize_intensities(&atoms, spec.filter_b);
    let achieved_i2 = intensity_second_moment(&field);
    let table = sample_photons(&field, spec.photons_per_atom, spec.n, spec.seed);
    let density = ground_truth_density(&atoms, spec.filter_b)?;
    let true_magnitudes = MagnitudeField::from_full(field.values.mapv(f64::sqrt))?;
    Ok((
        table,
        GroundTruth {
            atoms,
            density,
            true_magnitudes,
            achieved_i2,
        },
    ))
}

/// Band-limited signal: unitary inverse of the amplitude-filtered spectrum.
fn ground_truth_density(atoms: &AtomSet, filter_b: f64) -> Result<RealGrid, InstanceError> {
    let rho = atom_spectrum(atoms);
    let coeffs = Array2::from_shape_fn(rho.dim(), |(p, q)| {
        let sp = signed_freq(p);
        let sq = signed_freq(q);
        rho[(p, q)] * (-0.5 * filter_b * (sp * sp + sq * sq) as f64).exp()
    });
    Ok(inverse_transform(&ComplexSpectrum::new(coeffs, true)?)?)
}

/// The reference solution in data units: true phases plus the dc amplitude
/// √(2c·I(0,0)) matching the √count scale of the symmetrized table.
pub fn ground_truth_solution(
    gt: &GroundTruth,
    photons_per_atom: f64,
) -> Result<PhaseSolution, InstanceError> {
    let n = gt.atoms.len() as f64;
    let measured_power = gt.true_magnitudes.measured_power();
    let scale = photons_per_atom * n / measured_power;
    let dc = (2.0 * scale).sqrt() * gt.true_magnitudes.magnitude(0, 0);
    let spectrum = crate::grid::forward_transform(&gt.density);
    let base = PhaseSolution::from_spectrum(&spectrum)?;
    Ok(PhaseSolution::new(dc, base.phases().clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_respects_invariants() {
        let set = sample_atoms(2, 11).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.min_distance() >= MIN_ATOM_DISTANCE);
        let mut weights: Vec<u8> = set.atoms().iter().map(|a| a.weight).collect();
        weights.sort_unstable();
        assert_eq!(weights, vec![1, 2]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_atoms(100, 5).unwrap();
        let b = sample_atoms(100, 5).unwrap();
        assert_eq!(a, b);
        let c = sample_atoms(100, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_or_huge_counts_rejected() {
        assert!(matches!(
            sample_atoms(0, 0),
            Err(InstanceError::BadAtomCount(0))
        ));
        assert!(matches!(
            sample_atoms(1, 0),
            Err(InstanceError::BadAtomCount(1))
        ));
        assert!(matches!(
            sample_atoms(1202, 0),
            Err(InstanceError::TooManyAtoms(1202))
        ));
    }

    #[test]
    fn odd_counts_split_weights_floor_ceil() {
        let set = sample_atoms(175, 4).unwrap();
        let ones = set.atoms().iter().filter(|a| a.weight == 1).count();
        let twos = set.atoms().iter().filter(|a| a.weight == 2).count();
        assert_eq!((ones, twos), (87, 88));
    }

    #[test]
    fn single_atom_intensity_is_pure_filter() {
        let set = AtomSet::from_atoms(vec![Atom {
            x: 137,
            y: 301,
            weight: 1,
        }])
        .unwrap();
        let b = DEFAULT_FILTER_B;
        let field = synthesize_intensities(&set, b);
        for p in 0..COARSE_GRID {
            for q in 0..COARSE_GRID {
                let sp = signed_freq(p);
                let sq = signed_freq(q);
                let expect = if p == COARSE_GRID / 2 || q == COARSE_GRID / 2 {
                    0.0
                } else {
                    (-b * (sp * sp + sq * sq) as f64).exp()
                };
                assert!(
                    (field.value(p, q) - expect).abs() < 1e-12,
                    "at ({p},{q}): {} vs {expect}",
                    field.value(p, q)
                );
            }
        }
    }

    #[test]
    fn two_atom_interference_closed_form() {
        let d = 40u16;
        let set = AtomSet::from_atoms(vec![
            Atom {
                x: 100,
                y: 60,
                weight: 1,
            },
            Atom {
                x: 100,
                y: 60 + d,
                weight: 1,
            },
        ])
        .unwrap();
        let b = 1e-3;
        let field = synthesize_intensities(&set, b);
        for p in 0..COARSE_GRID {
            for q in 0..COARSE_GRID {
                if p == COARSE_GRID / 2 || q == COARSE_GRID / 2 {
                    continue;
                }
                let sp = signed_freq(p);
                let sq = signed_freq(q);
                let phase = TAU * (sq * d as i64) as f64 / FINE_GRID as f64;
                let expect =
                    2.0 * (1.0 + phase.cos()) * (-b * (sp * sp + sq * sq) as f64).exp();
                assert!(
                    (field.value(p, q) - expect).abs() < 1e-9,
                    "at ({p},{q}): {} vs {expect}",
                    field.value(p, q)
                );
            }
        }
    }

    #[test]
    fn intensities_friedel_symmetric_exactly() {
        let set = sample_atoms(60, 123).unwrap();
        let field = synthesize_intensities(&set, DEFAULT_FILTER_B);
        let m = COARSE_GRID;
        for p in 0..m {
            for q in 0..m {
                assert_eq!(field.value(p, q), field.value((m - p) % m, (m - q) % m));
            }
        }
    }

    #[test]
    fn i2_toy_oracle() {
        // Magnitudes {1,2,3} → intensities {1,4,9}: i2 = (98/3)/(14/3)² = 1.5.
        let i2 = i2_from_values(&[1.0, 4.0, 9.0]);
        assert!((i2 - 1.5).abs() < 1e-12);
        assert!((i2_from_values(&[7.0; 10]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tuning_no_op_when_already_crossed() {
        let set = sample_atoms(40, 9).unwrap();
        let current = intensity_second_moment(&synthesize_intensities(&set, DEFAULT_FILTER_B));
        let (tuned, i2) = tune_i2(
            &set,
            current,
            TuneDirection::Increase,
            9,
            DEFAULT_FILTER_B,
        )
        .unwrap();
        assert_eq!(tuned, set);
        assert_eq!(i2, current);
    }

    #[test]
    fn photons_deterministic_and_zero_on_zero_field() {
        let set = sample_atoms(30, 21).unwrap();
        let field = synthesize_intensities(&set, DEFAULT_FILTER_B);
        let a = sample_photons(&field, 1000.0, 30, 77);
        let b = sample_photons(&field, 1000.0, 30, 77);
        assert_eq!(a, b);
        let c = sample_photons(&field, 1000.0, 30, 78);
        assert_ne!(a, c);

        let zero = IntensityField {
            values: Array2::zeros((COARSE_GRID, COARSE_GRID)),
        };
        let table = sample_photons(&zero, 1000.0, 30, 1);
        assert_eq!(table.total(), 0);
    }

    #[test]
    fn generated_table_invariants() {
        let spec = InstanceSpec::new(24, Grade::M, 3);
        let (table, gt) = generate(&spec).unwrap();
        assert!(table.invariants_hold());
        assert!(gt.true_magnitudes.is_mirror_symmetric());
        assert!(!gt.true_magnitudes.is_measured(0, 0));
        // Column q = 0 of the table is Friedel-redundant and symmetric.
        for p in 1..COARSE_GRID {
            assert_eq!(table.get(p, 0), table.get(COARSE_GRID - p, 0));
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = InstanceSpec::new(24, Grade::E, 8);
        let (t1, g1) = generate(&spec).unwrap();
        let (t2, g2) = generate(&spec).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(g1.atoms, g2.atoms);
        assert_eq!(g1.achieved_i2, g2.achieved_i2);
    }
}
