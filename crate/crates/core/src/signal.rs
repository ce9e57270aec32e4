//! Transmit-side material: QPSK resource grids, ULA steering vectors and
//! conjugate beamforming weights.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Complex values over (subcarrier, OFDM symbol). Row 0 sits at global
/// subcarrier `base_sc`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub data: DMatrix<Complex64>,
    pub base_sc: usize,
}

impl ResourceGrid {
    pub fn zeros(rows: usize, cols: usize, base_sc: usize) -> Self {
        Self {
            data: DMatrix::zeros(rows, cols),
            base_sc,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }
}

/// Unit-norm transmit/receive weights of one AP array.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    pub w: DVector<Complex64>,
}

impl BeamWeights {
    pub fn n_antennas(&self) -> usize {
        self.w.len()
    }

    /// Complex array gain `aᵀ(θ)·w` toward `theta_rad`: the field radiated in
    /// that direction when transmitting with `w`, and likewise the combining
    /// gain of an arrival from that direction.
    pub fn gain(&self, theta_rad: f64) -> Complex64 {
        steering_vector(self.w.len(), theta_rad)
            .iter()
            .zip(self.w.iter())
            .map(|(a, w)| a * w)
            .sum()
    }
}

/// Half-wavelength ULA response, element k = exp(iπ·k·sin θ).
pub fn steering_vector(n_antennas: usize, theta_rad: f64) -> DVector<Complex64> {
    let s = theta_rad.sin();
    DVector::from_iterator(
        n_antennas,
        (0..n_antennas).map(|k| Complex64::from_polar(1.0, PI * k as f64 * s)),
    )
}

/// Normalised sum of conjugate steering vectors toward every angle.
pub fn conjugate_beamformer(angles_rad: &[f64], n_antennas: usize) -> Result<BeamWeights> {
    if angles_rad.is_empty() {
        return Err(Error::InvalidArgument(
            "beamformer needs at least one direction".into(),
        ));
    }
    if n_antennas == 0 {
        return Err(Error::InvalidArgument(
            "beamformer needs at least one antenna".into(),
        ));
    }
    let mut w = DVector::<Complex64>::zeros(n_antennas);
    for &theta in angles_rad {
        w += steering_vector(n_antennas, theta).map(|a| a.conj());
    }
    let norm = w.norm();
    if !(norm >= 1e-12) {
        return Err(Error::DegenerateBeam { norm });
    }
    w.unscale_mut(norm);
    Ok(BeamWeights { w })
}

const QPSK: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

pub fn random_qpsk<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    QPSK[rng.random_range(0..4)]
}

pub fn generate_qpsk_grid<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    base_sc: usize,
    rng: &mut R,
) -> ResourceGrid {
    assert!(rows >= 1 && cols >= 1, "grid must be at least 1x1");
    // Row-major draw order so the grid does not depend on storage layout.
    let mut data = DMatrix::zeros(rows, cols);
    for n in 0..rows {
        for m in 0..cols {
            data[(n, m)] = random_qpsk(rng);
        }
    }
    ResourceGrid { data, base_sc }
}

/// Nearest QPSK point; a zero component resolves to the positive side.
pub fn qpsk_detect(z: Complex64) -> Complex64 {
    let re = if z.re >= 0.0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    };
    let im = if z.im >= 0.0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    };
    Complex64::new(re, im)
}
