//! The two constraint projections and the solution certificate.
//!
//! P1 keeps a signal's `|S|` highest-valued pixels (selection by value, not
//! magnitude) and zeroes the rest. P2 replaces measured Fourier magnitudes by
//! the data while keeping phases; unmeasured coefficients — only (0,0) here —
//! are copied through. The certificate is the power ratio I_S/I_F > threshold.

use crate::fft::Fft2;
use crate::grid::{inverse_transform_with, ComplexSpectrum, GridError, MagnitudeField, RealGrid};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("signal has zero total power")]
    ZeroPower,
    #[error("dc amplitude must be positive, got {0}")]
    NonPositiveDc(f64),
    #[error("phases violate antisymmetry at ({p},{q}): |φ(p,q)+φ(-p,-q)| = {residual:.3e}")]
    AntisymmetryViolation { p: usize, q: usize, residual: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Pixel support chosen by P1: row-major indices, sorted, all distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSet {
    grid_size: usize,
    pixels: Vec<u32>,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn pixel_indices(&self) -> &[u32] {
        &self.pixels
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        let idx = (x * self.grid_size + y) as u32;
        self.pixels.binary_search(&idx).is_ok()
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.grid_size;
        self.pixels
            .iter()
            .map(move |&i| (i as usize / m, i as usize % m))
    }
}

/// Selects the `support_size` top pixels of `values`; ties at the cutoff go to
/// the lower row-major index.
pub(crate) fn select_support(
    values: &[f64],
    support_size: usize,
    order: &mut Vec<(f64, u32)>,
) -> Vec<u32> {
    order.clear();
    order.extend(
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32)),
    );
    let cmp = |a: &(f64, u32), b: &(f64, u32)| {
        b.0.partial_cmp(&a.0)
            .expect("finite values")
            .then(a.1.cmp(&b.1))
    };
    if support_size < order.len() {
        order.select_nth_unstable_by(support_size.saturating_sub(1), cmp);
    }
    let mut pixels: Vec<u32> = order[..support_size].iter().map(|&(_, i)| i).collect();
    pixels.sort_unstable();
    pixels
}

/// Support-size projection P1. Returns the projected grid and the chosen set.
pub fn support_projection(g: &RealGrid, support_size: usize) -> (RealGrid, SupportSet) {
    let m = g.size();
    assert!(support_size <= m * m, "support size exceeds grid");
    let values = g.values().as_slice().expect("standard layout");
    let mut order = Vec::new();
    let pixels = select_support(values, support_size, &mut order);
    let mut out = RealGrid::zeros(m);
    {
        let slice = out.values_mut().as_slice_mut().expect("standard layout");
        for &i in &pixels {
            slice[i as usize] = values[i as usize];
        }
    }
    (
        out,
        SupportSet {
            grid_size: m,
            pixels,
        },
    )
}

/// Fourier magnitude projection P2 as a pure operation.
pub fn magnitude_projection(g: &RealGrid, data: &MagnitudeField) -> RealGrid {
    let m = g.size();
    assert_eq!(m, data.size(), "grid and data sizes must match");
    let mut fft = Fft2::new(m);
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    let mut out = vec![0.0f64; m * m];
    magnitude_projection_into(
        &mut fft,
        g.values().as_slice().expect("layout"),
        data,
        &mut buf,
        &mut out,
    );
    RealGrid::new(Array2::from_shape_vec((m, m), out).expect("shape")).expect("finite")
}

/// Slice-level P2 used by the solver loops; `out` receives the projected signal.
///
/// The output is real because the data are Hermitian-mirrored and the input is
/// real; the imaginary part is discarded at roundoff level.
pub(crate) fn magnitude_projection_into(
    fft: &mut Fft2,
    input: &[f64],
    data: &MagnitudeField,
    buf: &mut [Complex64],
    out: &mut [f64],
) {
    let m = fft.size();
    debug_assert_eq!(input.len(), m * m);
    for (b, &v) in buf.iter_mut().zip(input.iter()) {
        *b = Complex64::new(v, 0.0);
    }
    fft.forward_raw(buf);
    // Raw coefficients are M × unitary; measured entries are replaced by the
    // data magnitude (unitary scale) so the raw inverse needs 1/M for them,
    // i.e. we pre-multiply magnitudes by M below via `raw_scale`.
    let raw_scale = m as f64;
    let mags = data.magnitudes().as_slice().expect("layout");
    let meas = data.measured().as_slice().expect("layout");
    for i in 0..m * m {
        if meas[i] {
            let c = buf[i];
            let norm = c.norm();
            let phase = if norm > 0.0 {
                c / norm
            } else {
                Complex64::new(1.0, 0.0)
            };
            buf[i] = phase * (mags[i] * raw_scale);
        }
        // Unmeasured coefficients stay as they are (raw scale already).
    }
    fft.inverse_raw(buf);
    let inv_scale = 1.0 / (m * m) as f64;
    for (o, c) in out.iter_mut().zip(buf.iter()) {
        *o = c.re * inv_scale;
    }
}

/// I_S/I_F: the fraction of total signal power inside the support.
pub fn power_ratio(g: &RealGrid, support: &SupportSet) -> Result<f64, ProjectionError> {
    power_ratio_indices(
        g.values().as_slice().expect("layout"),
        &support.pixels,
    )
}

pub(crate) fn power_ratio_indices(
    values: &[f64],
    indices: &[u32],
) -> Result<f64, ProjectionError> {
    let total: f64 = values.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(ProjectionError::ZeroPower);
    }
    let inside: f64 = indices
        .iter()
        .map(|&i| {
            let v = values[i as usize];
            v * v
        })
        .sum();
    Ok(inside / total)
}

/// A reconstructed solution: the positive dc amplitude and the phase field.
///
/// Phases satisfy φ(p,q) = -φ(-p,-q) and φ(0,0) = 0; combined with the data
/// magnitudes they synthesize the real signal of Eq.-style unitary synthesis.
#[derive(Debug, Clone)]
pub struct PhaseSolution {
    size: usize,
    dc: f64,
    phases: Array2<f64>,
}

impl PhaseSolution {
    /// Validates antisymmetry (1e-6) and re-mirrors exactly from the canonical
    /// half so downstream synthesis is Hermitian to roundoff.
    pub fn new(dc: f64, phases: Array2<f64>) -> Result<Self, ProjectionError> {
        let (rows, cols) = phases.dim();
        if rows != cols {
            return Err(GridError::NotSquare { rows, cols }.into());
        }
        crate::grid::check_size(rows)?;
        if dc <= 0.0 {
            return Err(ProjectionError::NonPositiveDc(dc));
        }
        let m = rows;
        for p in 0..m {
            for q in 0..m {
                let residual = wrap_angle(phases[(p, q)] + phases[((m - p) % m, (m - q) % m)]).abs();
                if residual > 1e-6 {
                    return Err(ProjectionError::AntisymmetryViolation { p, q, residual });
                }
            }
        }
        let mut exact = phases;
        for (p, q) in canonical_half(m) {
            let mp = (m - p) % m;
            let mq = (m - q) % m;
            let v = exact[(p, q)];
            exact[(mp, mq)] = wrap_angle(-v);
        }
        exact[(0, 0)] = 0.0;
        Ok(Self {
            size: m,
            dc,
            phases: exact,
        })
    }

    /// Extracts dc and phases from a Hermitian spectrum, flipping the overall
    /// sign if needed so that the dc amplitude is positive.
    pub fn from_spectrum(spectrum: &ComplexSpectrum) -> Result<Self, ProjectionError> {
        let m = spectrum.size();
        let dc_coeff = spectrum.coeffs()[(0, 0)].re;
        if dc_coeff == 0.0 {
            return Err(ProjectionError::NonPositiveDc(0.0));
        }
        let flip = dc_coeff < 0.0;
        let mut phases = Array2::zeros((m, m));
        for (p, q) in canonical_half(m) {
            let mut c = spectrum.coeffs()[(p, q)];
            if flip {
                c = -c;
            }
            let phi = if c.norm() > 0.0 { c.im.atan2(c.re) } else { 0.0 };
            phases[(p, q)] = phi;
            phases[((m - p) % m, (m - q) % m)] = wrap_angle(-phi);
        }
        phases[(0, 0)] = 0.0;
        Ok(Self {
            size: m,
            dc: dc_coeff.abs(),
            phases,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dc(&self) -> f64 {
        self.dc
    }

    pub fn phases(&self) -> &Array2<f64> {
        &self.phases
    }

    pub fn phase(&self, p: usize, q: usize) -> f64 {
        self.phases[(p, q)]
    }

    /// Synthesizes the real signal from data magnitudes and these phases; the
    /// unmeasured (0,0) amplitude is the stored dc.
    pub fn synthesize(&self, data: &MagnitudeField) -> Result<RealGrid, ProjectionError> {
        let m = self.size;
        assert_eq!(m, data.size());
        let mut coeffs: Array2<Complex64> = Array2::zeros((m, m));
        for p in 0..m {
            for q in 0..m {
                let amp = if (p, q) == (0, 0) {
                    self.dc
                } else {
                    data.magnitude(p, q)
                };
                let phi = self.phases[(p, q)];
                coeffs[(p, q)] = Complex64::new(amp * phi.cos(), amp * phi.sin());
            }
        }
        let spec = ComplexSpectrum::new(coeffs, true)?;
        let mut fft = Fft2::new(m);
        Ok(inverse_transform_with(&mut fft, &spec)?)
    }
}

/// Entries (p,q) covering exactly one member of every Friedel pair:
/// q in 1..M/2 for all p, plus q = 0 with p in 0..M/2.
pub fn canonical_half(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |p| {
        (0..m / 2).filter_map(move |q| {
            if q == 0 && p >= m / 2 {
                None
            } else {
                Some((p, q))
            }
        })
    })
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    // Into (-π, π].
    let mut x = a.rem_euclid(std::f64::consts::TAU);
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::forward_transform;

    fn grid_from(values: &[f64], m: usize) -> RealGrid {
        RealGrid::new(Array2::from_shape_vec((m, m), values.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn support_keeps_top_values() {
        let mut g = RealGrid::zeros(4);
        g.values_mut()[(0, 0)] = 3.0;
        g.values_mut()[(0, 1)] = 1.0;
        g.values_mut()[(0, 2)] = 2.0;
        let (proj, s) = support_projection(&g, 1);
        assert_eq!(proj.values()[(0, 0)], 3.0);
        assert_eq!(proj.values()[(0, 2)], 0.0);
        assert_eq!(s.pixel_indices(), &[0]);
    }

    #[test]
    fn support_idempotent_on_sparse_input() {
        let mut g = RealGrid::zeros(8);
        g.values_mut()[(1, 1)] = 5.0;
        g.values_mut()[(2, 7)] = 4.0;
        g.values_mut()[(6, 3)] = 3.0;
        let (p1, s1) = support_projection(&g, 3);
        assert_eq!(p1, g);
        let (p2, s2) = support_projection(&p1, 3);
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn support_tie_breaks_to_lower_index() {
        // Two pixels share the cutoff value; the lower row-major index wins.
        let m = 4;
        let mut vals = vec![0.0; 16];
        vals[3] = 2.0;
        vals[5] = 1.0;
        vals[9] = 1.0;
        let g = grid_from(&vals, m);
        let (_, s) = support_projection(&g, 2);
        assert_eq!(s.pixel_indices(), &[3, 5]);
    }

    #[test]
    fn support_selects_by_value_not_magnitude() {
        let m = 4;
        let mut vals = vec![0.0; 16];
        vals[0] = -10.0;
        vals[1] = 0.5;
        let g = grid_from(&vals, m);
        let (_, s) = support_projection(&g, 1);
        assert_eq!(s.pixel_indices(), &[1]);
    }

    #[test]
    fn power_ratio_basic_cases() {
        let m = 4;
        let mut vals = vec![0.0; 16];
        vals[2] = 3.0;
        let g = grid_from(&vals, m);
        let (_, s) = support_projection(&g, 2);
        assert_eq!(power_ratio(&g, &s).unwrap(), 1.0);

        let uniform = RealGrid::from_fn(4, |_| 1.0);
        let (_, s8) = support_projection(&uniform, 8);
        assert!((power_ratio(&uniform, &s8).unwrap() - 0.5).abs() < 1e-12);

        let zero = RealGrid::zeros(4);
        let err = power_ratio(&zero, &s8).unwrap_err();
        assert!(matches!(err, ProjectionError::ZeroPower));
    }

    #[test]
    fn canonical_half_counts_pairs_once() {
        let m = 128;
        let entries: Vec<_> = canonical_half(m).collect();
        assert_eq!(entries.len(), 8128);
        let mut seen = vec![false; m * m];
        for (p, q) in entries {
            assert!(!seen[p * m + q], "duplicate at {p},{q}");
            seen[p * m + q] = true;
            let mirror = ((m - p) % m) * m + (m - q) % m;
            assert!(
                !seen[mirror] || mirror == p * m + q,
                "both pair members listed"
            );
        }
    }

    #[test]
    fn phase_solution_round_trips_spectrum() {
        let g = RealGrid::from_fn(8, |(x, y)| ((3 * x + 2 * y) as f64 * 0.41).sin() + 0.8);
        let spec = forward_transform(&g);
        let sol = PhaseSolution::from_spectrum(&spec).unwrap();
        assert!(sol.dc() > 0.0);
        assert_eq!(sol.phase(0, 0), 0.0);
        // Antisymmetry is exact after mirroring.
        for p in 0..8 {
            for q in 0..8 {
                let r = wrap_angle(sol.phase(p, q) + sol.phase((8 - p) % 8, (8 - q) % 8));
                assert!(r.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_antisymmetry() {
        let m = 8;
        let mut phases: Array2<f64> = Array2::zeros((m, m));
        phases[(1, 2)] = 0.5;
        phases[(m - 1, m - 2)] = -0.5 + 1e-3;
        let err = PhaseSolution::new(1.0, phases).unwrap_err();
        assert!(matches!(err, ProjectionError::AntisymmetryViolation { .. }));
    }
}
