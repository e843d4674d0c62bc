//! Coherence amplitude between two band representations.
//!
//! ```text
//! C(f) = |sum_t X_t(f) Y_t(f)*| / max(sqrt(sum_t |X_t|^2 * sum_t |Y_t|^2), eps)
//! ```

use num_complex::Complex64;

use crate::decompose::BandRep;
use crate::error::{CohError, CohResult};

/// Default stability constant, double-precision machine epsilon.
pub const DEFAULT_EPS: f64 = f64::EPSILON;

/// Per-band coherence amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceSpectrum {
    pub values: Vec<f64>,
    pub band_centers_hz: Vec<f64>,
    pub eps_used: f64,
}

/// Cross sum `sum_t x_t y_t*`.
#[inline]
pub fn cross_sum(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

#[inline]
pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

/// Denominator of the coherence ratio, with the `eps` floor applied.
#[inline]
pub(crate) fn coherence_denominator(energy_x: f64, energy_y: f64, eps: f64) -> f64 {
    (energy_x * energy_y).sqrt().max(eps)
}

/// Coherence of two equal-length complex series.
pub fn coherence_of(x: &[Complex64], y: &[Complex64], eps: f64) -> f64 {
    cross_sum(x, y).norm() / coherence_denominator(energy(x), energy(y), eps)
}

pub fn coherence(x: &BandRep, y: &BandRep) -> CohResult<CoherenceSpectrum> {
    coherence_with_eps(x, y, DEFAULT_EPS)
}

pub fn coherence_with_eps(x: &BandRep, y: &BandRep, eps: f64) -> CohResult<CoherenceSpectrum> {
    x.check_same_shape(y)?;
    let values = x
        .bands()
        .iter()
        .zip(y.bands())
        .map(|(a, b)| coherence_of(a, b, eps))
        .collect();
    Ok(CoherenceSpectrum {
        values,
        band_centers_hz: x.band_centers_hz().to_vec(),
        eps_used: eps,
    })
}

/// Coherence at a single band; identical to `coherence(x, y).values[band_index]`.
pub fn coherence_at(x: &BandRep, y: &BandRep, band_index: usize) -> CohResult<f64> {
    x.check_same_shape(y)?;
    if band_index >= x.n_bands() {
        return Err(CohError::BadIndex { index: band_index, len: x.n_bands() });
    }
    Ok(coherence_of(x.band(band_index)?, y.band(band_index)?, DEFAULT_EPS))
}
