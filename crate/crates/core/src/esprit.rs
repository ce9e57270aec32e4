//! Single-axis line-spectrum estimation.
//!
//! The estimation axis runs along the rows of the data matrix and every column
//! is one snapshot. A line with phase step φ contributes `c·exp(iφk)` to row k.
//!
//! 1. [`smoothed_covariance`] averages the outer products of all length-L
//!    subvectors of every snapshot, then applies forward-backward averaging.
//! 2. [`esprit_phases`] takes the T principal eigenvectors of that covariance,
//!    solves the shift-invariance relation `U[0..L-1]·Ψ = U[1..L]` in the
//!    least-squares sense and reads the phase steps off the eigenvalues of Ψ.
//!
//! [`periodogram_peaks`] is a zero-padded FFT cross-check with no code shared
//! with the subspace path.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scenario::wrap_angle;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;
/// Smallest retained eigenvalue relative to the trace before the signal
/// subspace counts as defective.
const SUBSPACE_FLOOR: f64 = 1e-14;

/// Hermitian sample covariance of length-L subvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub r: DMatrix<Complex64>,
    /// Subvectors per snapshot times snapshots.
    pub n_snapshots: usize,
}

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.r[(i, i)].re).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            r: self.r.map(|x| x * c),
            n_snapshots: self.n_snapshots,
        }
    }
}

/// Estimated phase steps, ascending, each in (-π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimates {
    pub phases: Vec<f64>,
}

/// Forward-backward smoothed covariance of `d` with subvector length `l`.
///
/// The forward part is filled along diagonals: entry (a+1, b+1) differs from
/// (a, b) by one leaving and one entering product per snapshot, which brings
/// the cost down from O(N·L²·S) to O(N·L·S + L²·S).
pub fn smoothed_covariance(d: &DMatrix<Complex64>, l: usize) -> Result<CovarianceMatrix> {
    let (n, s) = d.shape();
    if n == 0 || s == 0 {
        return Err(Error::InvalidArgument(
            "covariance of an empty matrix".into(),
        ));
    }
    if l == 0 || l > n {
        return Err(Error::InvalidArgument(format!(
            "subarray length {l} must lie in [1, {n}]"
        )));
    }
    let k = n - l + 1;
    let mut fwd = DMatrix::<Complex64>::zeros(l, l);
    let cols: Vec<_> = (0..s).map(|j| d.column(j)).collect();

    for b in 0..l {
        let mut acc = Complex64::new(0.0, 0.0);
        for col in &cols {
            for i in 0..k {
                acc += col[i] * col[i + b].conj();
            }
        }
        fwd[(0, b)] = acc;
    }
    for a in 0..l - 1 {
        for b in a..l - 1 {
            let mut delta = Complex64::new(0.0, 0.0);
            for col in &cols {
                delta += col[a + k] * col[b + k].conj() - col[a] * col[b].conj();
            }
            fwd[(a + 1, b + 1)] = fwd[(a, b)] + delta;
        }
    }
    for a in 0..l {
        fwd[(a, a)].im = 0.0;
        for b in a + 1..l {
            fwd[(b, a)] = fwd[(a, b)].conj();
        }
    }

    let scale = 1.0 / (k * s) as f64;
    let r = DMatrix::from_fn(l, l, |a, b| {
        (fwd[(a, b)] + fwd[(l - 1 - a, l - 1 - b)].conj()) * (0.5 * scale)
    });
    Ok(CovarianceMatrix {
        r,
        n_snapshots: k * s,
    })
}

/// LS-ESPRIT phase steps of the `order` dominant lines.
pub fn esprit_phases(cov: &CovarianceMatrix, order: usize) -> Result<PhaseEstimates> {
    let l = cov.dim();
    if order == 0 || order >= l {
        return Err(Error::InvalidArgument(format!(
            "model order {order} must lie in [1, {}]",
            l.saturating_sub(1)
        )));
    }
    let trace = cov.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::Estimator(format!(
            "covariance carries no signal energy (trace {trace:e})"
        )));
    }

    let eig = SymmetricEigen::try_new(cov.r.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Estimator("Hermitian eigendecomposition did not converge".into()))?;
    let mut idx: Vec<usize> = (0..l).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let weakest = eig.eigenvalues[idx[order - 1]];
    if !(weakest > SUBSPACE_FLOOR * trace) {
        return Err(Error::Estimator(format!(
            "signal subspace is defective: eigenvalue {order} is {weakest:e} (trace {trace:e})"
        )));
    }

    let us = DMatrix::from_fn(l, order, |r, c| eig.eigenvectors[(r, idx[c])]);
    let upper = us.rows(0, l - 1).into_owned();
    let lower = us.rows(1, l - 1).into_owned();
    let psi = upper
        .svd(true, true)
        .solve(&lower, 1e-300)
        .map_err(|e| Error::Estimator(format!("rotational solve failed: {e}")))?;

    let roots = Schur::try_new(psi, EIGEN_EPS, EIGEN_MAX_ITER)
        .and_then(|s| s.eigenvalues())
        .ok_or_else(|| Error::Estimator("eigenvalues of the rotation operator failed".into()))?;
    let mut phases: Vec<f64> = roots.iter().map(|z| wrap_angle(z.arg())).collect();
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::Estimator("non-finite phase estimate".into()));
    }
    phases.sort_by(f64::total_cmp);
    Ok(PhaseEstimates { phases })
}

/// Phase steps of the `order` strongest separated peaks of the
/// snapshot-averaged, zero-padded power spectrum along the rows of `d`.
pub fn periodogram_peaks(
    d: &DMatrix<Complex64>,
    order: usize,
    n_fft: usize,
) -> Result<PhaseEstimates> {
    let (n, s) = d.shape();
    if n == 0 || s == 0 {
        return Err(Error::InvalidArgument(
            "periodogram of an empty matrix".into(),
        ));
    }
    if n_fft < 4 * n {
        return Err(Error::InvalidArgument(format!(
            "n_fft {n_fft} must be at least 4x the axis length {n}"
        )));
    }
    let spectrum = power_spectrum(d, n_fft);
    let peak = spectrum.iter().cloned().fold(0.0, f64::max);

    let mut candidates: Vec<usize> = (0..n_fft)
        .filter(|&k| {
            let prev = spectrum[(k + n_fft - 1) % n_fft];
            let next = spectrum[(k + 1) % n_fft];
            let p = spectrum[k];
            p > prev && p >= next && p > 1e-12 * peak
        })
        .collect();
    candidates.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]).then(a.cmp(&b)));

    // Peaks closer than one Fourier resolution cell belong to the same lobe.
    let min_sep = n_fft / n;
    let mut chosen: Vec<usize> = Vec::with_capacity(order);
    for k in candidates {
        let separated = chosen.iter().all(|&c| {
            let diff = k.abs_diff(c);
            diff.min(n_fft - diff) >= min_sep
        });
        if separated {
            chosen.push(k);
            if chosen.len() == order {
                break;
            }
        }
    }
    if chosen.len() < order {
        return Err(Error::NoPeaks {
            found: chosen.len(),
            wanted: order,
        });
    }
    let mut phases: Vec<f64> = chosen
        .iter()
        .map(|&k| wrap_angle(2.0 * PI * k as f64 / n_fft as f64))
        .collect();
    phases.sort_by(f64::total_cmp);
    Ok(PhaseEstimates { phases })
}

fn power_spectrum(d: &DMatrix<Complex64>, n_fft: usize) -> Vec<f64> {
    // The forward FFT kernel is exp(-i2πkn/N), so a line exp(iφn) peaks at
    // k = φ·N/2π.
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut spectrum = vec![0.0; n_fft];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for col in d.column_iter() {
        buf.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        buf[..col.len()].copy_from_slice(col.as_slice());
        fft.process(&mut buf);
        for (p, x) in spectrum.iter_mut().zip(&buf) {
            *p += x.norm_sqr();
        }
    }
    spectrum
}
