//! Discrete Fourier analysis of prediction errors on uniform periodic grids.
//!
//! Amplitudes are normalized so that a pure mode `c·sin(kx)` reads `|c|` at `k`:
//! `A_0 = |X_0|/N` and `A_k = 2|X_k|/N` for `1 ≤ k ≤ ⌊N/2⌋`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub epoch: Option<usize>,
    pub time_slice: Option<f64>,
    /// `amplitudes[k]` for `k = 0..=K`.
    pub amplitudes: Vec<f64>,
}

impl SpectrumReport {
    pub fn max_frequency(&self) -> usize {
        self.amplitudes.len().saturating_sub(1)
    }

    pub fn amplitude(&self, k: usize) -> Option<f64> {
        self.amplitudes.get(k).copied()
    }

    /// `Σ A_k²` over `lo ≤ k ≤ hi`.
    pub fn band_energy(&self, lo: usize, hi: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(k, _)| *k >= lo && *k <= hi)
            .map(|(_, a)| a * a)
            .sum()
    }
}

/// Full complex DFT `X_k = Σ_j x_j e^{-2πijk/N}`.
pub fn dft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Direct `O(N²)` evaluation of the same transform.
pub fn dft_direct(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            values
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let phase = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                    Complex64::from_polar(v, phase)
                })
                .sum()
        })
        .collect()
}

/// Amplitude spectrum of samples taken at `N` uniformly spaced points of one period.
pub fn amplitude_spectrum(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 4 {
        return Err(Error::config(format!("spectrum needs at least 4 samples, got {n}")));
    }
    let x = dft(values);
    let nf = n as f64;
    Ok((0..=n / 2)
        .map(|k| {
            let m = x[k].norm() / nf;
            if k == 0 {
                m
            } else {
                2.0 * m
            }
        })
        .collect())
}

/// Spectrum of `errors` sampled at `xs`, with `period` the length of the period.
///
/// `xs` must be uniform. If the last point repeats the first one a period
/// later (an endpoint-inclusive grid) it is dropped.
pub fn error_spectrum(xs: &[f64], errors: &[f64], period: f64) -> Result<SpectrumReport> {
    if xs.len() != errors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates, {} error values",
            xs.len(),
            errors.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::config("spectrum needs at least 4 samples"));
    }
    let dx = xs[1] - xs[0];
    if !(dx > 0.0) {
        return Err(Error::config("grid must be strictly increasing"));
    }
    let tol = 1e-9 * period.abs().max(1.0);
    for w in xs.windows(2) {
        if ((w[1] - w[0]) - dx).abs() > tol {
            return Err(Error::config("grid is not uniform"));
        }
    }
    let mut n = xs.len();
    if (xs[n - 1] - xs[0] - period).abs() < tol {
        n -= 1;
    }
    if ((n as f64) * dx - period).abs() > 1e-6 * period {
        return Err(Error::config(format!(
            "grid of {n} points with spacing {dx} does not span the period {period}"
        )));
    }
    Ok(SpectrumReport {
        epoch: None,
        time_slice: None,
        amplitudes: amplitude_spectrum(&errors[..n])?,
    })
}

/// First crossing of one frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub k: usize,
    /// First epoch with `A_k / A_k(first) < threshold`, `None` if never.
    pub epoch: Option<usize>,
    /// The initial amplitude was zero, so no ratio exists.
    pub excluded: bool,
}

/// First-crossing epochs of the amplitude ratio for each requested `k`.
///
/// `spectra` are in epoch order; the first one is the reference. A threshold
/// of 1 or more is met at the first epoch.
pub fn frequency_trajectories(spectra: &[SpectrumReport], ks: &[usize], threshold: f64) -> Result<Vec<Crossing>> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::config("no spectra supplied"))?;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let a0 = first
            .amplitude(k)
            .ok_or_else(|| Error::config(format!("frequency {k} beyond the spectrum")))?;
        if a0 == 0.0 {
            out.push(Crossing {
                k,
                epoch: None,
                excluded: true,
            });
            continue;
        }
        let epoch = spectra.iter().enumerate().find_map(|(i, s)| {
            let a = s.amplitude(k).unwrap_or(f64::NAN);
            let crossed = if threshold >= 1.0 && i == 0 { true } else { a / a0 < threshold };
            crossed.then(|| s.epoch.unwrap_or(i))
        });
        out.push(Crossing {
            k,
            epoch,
            excluded: false,
        });
    }
    Ok(out)
}

/// Frequency bands, inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub low_max: usize,
    pub high_min: usize,
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            low_max: 2,
            high_min: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeChange {
    pub low_band: f64,
    pub high_band: f64,
    pub low_band_pre: f64,
    pub high_band_pre: f64,
    pub ratio_pre: f64,
    pub ratio_post: f64,
    /// `ratio_post - ratio_pre` with `ratio = high / low`.
    pub ratio_shift: f64,
}

/// Change of the high/low band-energy ratio between two spectra.
pub fn spectral_slope_change(pre: &SpectrumReport, post: &SpectrumReport) -> Result<SlopeChange> {
    spectral_slope_change_bands(std::slice::from_ref(pre), std::slice::from_ref(post), Bands::default())
}

/// As [`spectral_slope_change`], with band energies summed over several slices.
pub fn spectral_slope_change_bands(
    pre: &[SpectrumReport],
    post: &[SpectrumReport],
    bands: Bands,
) -> Result<SlopeChange> {
    if pre.is_empty() || pre.len() != post.len() {
        return Err(Error::ShapeMismatch("pre and post need the same number of slices".into()));
    }
    for (a, b) in pre.iter().zip(post) {
        if a.amplitudes.len() != b.amplitudes.len() {
            return Err(Error::ShapeMismatch("spectra have different frequency axes".into()));
        }
    }
    let energy = |set: &[SpectrumReport]| {
        let low: f64 = set.iter().map(|s| s.band_energy(0, bands.low_max)).sum();
        let high: f64 = set.iter().map(|s| s.band_energy(bands.high_min, usize::MAX)).sum();
        (low, high)
    };
    let (lo0, hi0) = energy(pre);
    let (lo1, hi1) = energy(post);
    let ratio = |h: f64, l: f64| if l > 0.0 { h / l } else { f64::INFINITY };
    let (r0, r1) = (ratio(hi0, lo0), ratio(hi1, lo1));
    let shift = if r0 == r1 { 0.0 } else { r1 - r0 };
    Ok(SlopeChange {
        low_band: lo1,
        high_band: hi1,
        low_band_pre: lo0,
        high_band_pre: hi0,
        ratio_pre: r0,
        ratio_post: r1,
        ratio_shift: shift,
    })
}
