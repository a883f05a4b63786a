//! Grid and spectrum types with the unitary transform convention.
//!
//! A signal lives on an M×M torus (M a power of two, 4..=512). Its spectrum
//! uses the 1/√(M²) unitary normalization, so Parseval holds with equal
//! constants in both domains: Σ|c|² = Σρ². Frequencies are stored in DFT
//! order (0..M-1); the mirror of (p,q) is ((M-p) mod M, (M-q) mod M).

use crate::fft::Fft2;
use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

pub const MIN_GRID: usize = 4;
pub const MAX_GRID: usize = 512;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid size {0} must be a power of two in {MIN_GRID}..={MAX_GRID}")]
    BadSize(usize),
    #[error("grid values must be finite")]
    NonFinite,
    #[error("array is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error(
        "spectrum is not Hermitian: inverse transform left imaginary residue {residue:.3e} > bound {bound:.3e}"
    )]
    HermitianViolation { residue: f64, bound: f64 },
}

pub(crate) fn check_size(size: usize) -> Result<(), GridError> {
    if size.is_power_of_two() && (MIN_GRID..=MAX_GRID).contains(&size) {
        Ok(())
    } else {
        Err(GridError::BadSize(size))
    }
}

/// Real-valued M×M periodic signal; index (x, y) wraps on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    size: usize,
    values: Array2<f64>,
}

impl RealGrid {
    pub fn new(values: Array2<f64>) -> Result<Self, GridError> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(GridError::NotSquare { rows, cols });
        }
        check_size(rows)?;
        if !values.iter().all(|v| v.is_finite()) {
            return Err(GridError::NonFinite);
        }
        Ok(Self { size: rows, values })
    }

    pub fn zeros(size: usize) -> Self {
        check_size(size).expect("valid grid size");
        Self {
            size,
            values: Array2::zeros((size, size)),
        }
    }

    pub fn from_fn(size: usize, f: impl FnMut((usize, usize)) -> f64) -> Self {
        check_size(size).expect("valid grid size");
        Self {
            size,
            values: Array2::from_shape_fn((size, size), f),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    /// Torus-periodic access.
    pub fn get(&self, x: i64, y: i64) -> f64 {
        let m = self.size as i64;
        self.values[(x.rem_euclid(m) as usize, y.rem_euclid(m) as usize)]
    }

    /// Σρ² over the full grid.
    pub fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }
}

/// M×M complex Fourier coefficients in DFT order.
#[derive(Debug, Clone)]
pub struct ComplexSpectrum {
    size: usize,
    coeffs: Array2<Complex64>,
    hermitian: bool,
}

impl ComplexSpectrum {
    pub fn new(coeffs: Array2<Complex64>, hermitian: bool) -> Result<Self, GridError> {
        let (rows, cols) = coeffs.dim();
        if rows != cols {
            return Err(GridError::NotSquare { rows, cols });
        }
        check_size(rows)?;
        Ok(Self {
            size: rows,
            coeffs,
            hermitian,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    /// Wrapping access by signed frequency.
    pub fn get(&self, p: i64, q: i64) -> Complex64 {
        let m = self.size as i64;
        self.coeffs[(p.rem_euclid(m) as usize, q.rem_euclid(m) as usize)]
    }

    /// Largest |c(p,q) - conj(c(-p,-q))| relative to max |c|.
    pub fn hermitian_residual(&self) -> f64 {
        let m = self.size;
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for p in 0..m {
            for q in 0..m {
                let mirror = self.coeffs[((m - p) % m, (m - q) % m)].conj();
                worst = worst.max((self.coeffs[(p, q)] - mirror).norm());
            }
        }
        worst / scale
    }

    /// Σ|c|² over all coefficients.
    pub fn total_power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Unitary analysis transform: c(p,q) = (1/M) Σ ρ(x,y) e^{-2πi(px+qy)/M}.
pub fn forward_transform(g: &RealGrid) -> ComplexSpectrum {
    let mut fft = Fft2::new(g.size());
    forward_transform_with(&mut fft, g)
}

pub fn forward_transform_with(fft: &mut Fft2, g: &RealGrid) -> ComplexSpectrum {
    let m = g.size();
    assert_eq!(fft.size(), m);
    let mut buf: Vec<Complex64> = g
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft.forward_raw(&mut buf);
    let scale = 1.0 / m as f64;
    let coeffs =
        Array2::from_shape_vec((m, m), buf.into_iter().map(|c| c * scale).collect())
            .expect("shape");
    ComplexSpectrum {
        size: m,
        coeffs,
        hermitian: true,
    }
}

/// Unitary synthesis: ρ(x,y) = (1/M) Σ c(p,q) e^{+2πi(px+qy)/M}.
///
/// The imaginary residue of the synthesis must stay below 1e-8 × max|c|;
/// otherwise the input was not Hermitian and `HermitianViolation` is returned.
pub fn inverse_transform(s: &ComplexSpectrum) -> Result<RealGrid, GridError> {
    let mut fft = Fft2::new(s.size());
    inverse_transform_with(&mut fft, s)
}

pub fn inverse_transform_with(fft: &mut Fft2, s: &ComplexSpectrum) -> Result<RealGrid, GridError> {
    let m = s.size();
    assert_eq!(fft.size(), m);
    let mut buf: Vec<Complex64> = s.coeffs.iter().copied().collect();
    fft.inverse_raw(&mut buf);
    let scale = 1.0 / m as f64;
    let max_coeff = s.coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let bound = 1e-8 * max_coeff;
    let mut residue = 0.0f64;
    let mut values = Vec::with_capacity(m * m);
    for c in &buf {
        let v = c * scale;
        residue = residue.max(v.im.abs());
        values.push(v.re);
    }
    if residue > bound {
        return Err(GridError::HermitianViolation { residue, bound });
    }
    Ok(RealGrid {
        size: m,
        values: Array2::from_shape_vec((m, m), values).expect("shape"),
    })
}

/// Nonnegative Fourier magnitudes with a measured/unmeasured mask.
///
/// Magnitudes satisfy m(p,q) = m(-p,-q) exactly; (0,0) is never measured.
#[derive(Debug, Clone)]
pub struct MagnitudeField {
    size: usize,
    magnitudes: Array2<f64>,
    measured: Array2<bool>,
}

impl MagnitudeField {
    /// Builds the full field from the canonical half: `half` has M rows and
    /// M/2 columns, entry (p, q) for q in 0..M/2. Everything beyond the half
    /// is mirrored; the Nyquist column q = M/2 is zero; (0,0) is unmeasured.
    pub fn from_canonical_half(half: &Array2<f64>) -> Result<Self, GridError> {
        let (rows, cols) = half.dim();
        if cols * 2 != rows {
            return Err(GridError::NotSquare { rows, cols });
        }
        check_size(rows)?;
        let m = rows;
        let mut magnitudes = Array2::zeros((m, m));
        for p in 0..m {
            for q in 0..m / 2 {
                magnitudes[(p, q)] = half[(p, q)];
            }
        }
        // Mirror column q = 0 from its canonical half p <= M/2.
        for p in m / 2 + 1..m {
            magnitudes[(p, 0)] = magnitudes[(m - p, 0)];
        }
        // Columns beyond Nyquist come from the stored half by Friedel symmetry.
        for p in 0..m {
            for q in m / 2 + 1..m {
                magnitudes[(p, q)] = magnitudes[((m - p) % m, m - q)];
            }
        }
        Self::from_full(magnitudes)
    }

    /// Wraps an already-symmetric full field; (0,0) is marked unmeasured and
    /// every other frequency measured.
    pub fn from_full(magnitudes: Array2<f64>) -> Result<Self, GridError> {
        let (rows, cols) = magnitudes.dim();
        if rows != cols {
            return Err(GridError::NotSquare { rows, cols });
        }
        check_size(rows)?;
        if !magnitudes.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(GridError::NonFinite);
        }
        let m = rows;
        let mut measured = Array2::from_elem((m, m), true);
        measured[(0, 0)] = false;
        Ok(Self {
            size: m,
            magnitudes,
            measured,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn magnitudes(&self) -> &Array2<f64> {
        &self.magnitudes
    }

    pub fn measured(&self) -> &Array2<bool> {
        &self.measured
    }

    pub fn magnitude(&self, p: usize, q: usize) -> f64 {
        self.magnitudes[(p, q)]
    }

    pub fn is_measured(&self, p: usize, q: usize) -> bool {
        self.measured[(p, q)]
    }

    /// Σ m² over measured frequencies.
    pub fn measured_power(&self) -> f64 {
        self.magnitudes
            .iter()
            .zip(self.measured.iter())
            .filter(|(_, &meas)| meas)
            .map(|(m, _)| m * m)
            .sum()
    }

    /// True when m(p,q) == m(-p,-q) holds exactly everywhere.
    pub fn is_mirror_symmetric(&self) -> bool {
        let m = self.size;
        for p in 0..m {
            for q in 0..m {
                if self.magnitudes[(p, q)] != self.magnitudes[((m - p) % m, (m - q) % m)] {
                    return false;
                }
            }
        }
        true
    }
}

/// Fourier zero-padding interpolation onto a grid `factor` times larger.
///
/// Unitary at both sizes, so total power is preserved; Nyquist rows/columns
/// are split with 1/√2 weights to keep both realness and Parseval exact.
pub fn upsample(g: &RealGrid, factor: usize) -> Result<RealGrid, GridError> {
    assert!(factor.is_power_of_two() && factor >= 1);
    let m = g.size();
    let big = m * factor;
    check_size(big)?;
    if factor == 1 {
        return Ok(g.clone());
    }
    let spec = forward_transform(g);
    let mut coeffs: Array2<Complex64> = Array2::zeros((big, big));
    let half = (m / 2) as i64;
    let weight = |f: i64| -> f64 {
        if f == -half {
            std::f64::consts::FRAC_1_SQRT_2
        } else {
            1.0
        }
    };
    let mb = big as i64;
    // Signed frequencies -M/2..M/2; the -M/2 line lands on both ±M/2 of the
    // big grid with 1/√2 weight each.
    for sp in -half..half {
        for sq in -half..half {
            let c = spec.get(sp, sq);
            let targets_p: &[i64] = if sp == -half { &[-half, half] } else { &[sp] };
            let targets_q: &[i64] = if sq == -half { &[-half, half] } else { &[sq] };
            let w = weight(sp) * weight(sq);
            for &tp in targets_p {
                for &tq in targets_q {
                    coeffs[(tp.rem_euclid(mb) as usize, tq.rem_euclid(mb) as usize)] = c * w;
                }
            }
        }
    }
    inverse_transform(&ComplexSpectrum {
        size: big,
        coeffs,
        hermitian: true,
    })
}
