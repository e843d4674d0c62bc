//! Band-limited complex decomposition of real signals.
//!
//! A signal of `N` samples is transformed once with a full-length FFT. For
//! every band center `f_c` the `T` FFT bins nearest `f_c` (an interval of
//! width `T / duration <= 2B`) are weighted by the taper, shifted to baseband
//! and inverse transformed with a length-`T` FFT. Each band therefore yields
//! `T = floor(2 B duration)` complex samples, spaced `duration / T` seconds
//! apart, demodulated by the bin frequency nearest `f_c`.
//!
//! The FFT length is the signal length itself (rustfft handles arbitrary
//! sizes), so no zero padding is applied.
//!
//! Coefficients are scaled so that white noise of variance `s^2` has expected
//! band power `s^2 * (2B / fs) * N / (U_fx + 1)`: each band carries its share
//! of the total signal energy in a frame that is `U_fx + 1` times redundant.
//! With this scaling the summed band power over `[low, high]` matches the
//! signal energy in that range to within a factor `F s / (high - low)`,
//! where `s` is the band spacing and `F` the band count (about `1 + 1/(F-1)`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CohError, CohResult};

/// Frequency-domain taper applied across each band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    /// `cos^2` roll-off over `[f_c - B, f_c + B]`; half amplitude at `f_c +- B/2`.
    /// Adjacent samples of a white input are correlated (lag-one correlation 2/3).
    RaisedCosine,
    /// Flat over the `T` bins of the band. White input gives uncorrelated samples.
    #[default]
    Rectangular,
}

/// Geometry of the filter bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandParams {
    pub bandwidth_hz: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub upsample_fx: u32,
    pub taper: Taper,
}

impl Default for BandParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 0.2,
            low_hz: 0.0,
            high_hz: 1.2,
            upsample_fx: 3,
            taper: Taper::Rectangular,
        }
    }
}

impl BandParams {
    pub fn validate(&self) -> CohResult<()> {
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(CohError::InvalidParams(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !(self.low_hz.is_finite() && self.high_hz.is_finite())
            || self.low_hz < 0.0
            || self.high_hz <= self.low_hz
        {
            return Err(CohError::InvalidBandRange {
                low: self.low_hz,
                high: self.high_hz,
            });
        }
        if self.upsample_fx < 1 {
            return Err(CohError::InvalidParams(
                "upsample_fx must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Distance between neighbouring band centers.
    pub fn spacing_hz(&self) -> f64 {
        self.bandwidth_hz / f64::from(self.upsample_fx + 1)
    }

    /// Nominal band centers: `low, low + s, ...` up to and including `high`
    /// when it falls on the grid.
    pub fn nominal_centers(&self) -> Vec<f64> {
        let s = self.spacing_hz();
        let count = ((self.high_hz - self.low_hz) / s + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.low_hz + k as f64 * s).collect()
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    fs_hz: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs_hz: f64) -> CohResult<Self> {
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(CohError::InvalidParams(format!(
                "sample rate must be positive, got {fs_hz}"
            )));
        }
        if samples.len() < 2 {
            return Err(CohError::SignalTooShort(format!(
                "{} samples, need at least 2",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(CohError::InvalidParams(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, fs_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs_hz
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// `T x F` complex band coefficients, stored band by band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRep {
    bands: Vec<Vec<Complex64>>,
    band_centers_hz: Vec<f64>,
    dt_s: f64,
}

impl BandRep {
    /// Build from per-band columns of equal length.
    pub fn new(bands: Vec<Vec<Complex64>>, band_centers_hz: Vec<f64>, dt_s: f64) -> CohResult<Self> {
        if bands.is_empty() || bands.len() != band_centers_hz.len() {
            return Err(CohError::ShapeMismatch(format!(
                "{} bands but {} centers",
                bands.len(),
                band_centers_hz.len()
            )));
        }
        let t = bands[0].len();
        if t < 2 {
            return Err(CohError::TooFewSamples { need: 2, got: t });
        }
        if bands.iter().any(|b| b.len() != t) {
            return Err(CohError::ShapeMismatch("bands differ in length".into()));
        }
        if band_centers_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CohError::InvalidParams(
                "band centers must be strictly increasing".into(),
            ));
        }
        if bands.iter().flatten().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(CohError::InvalidParams("non-finite coefficient".into()));
        }
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(CohError::InvalidParams(format!("dt must be positive, got {dt_s}")));
        }
        Ok(Self { bands, band_centers_hz, dt_s })
    }

    pub fn n_times(&self) -> usize {
        self.bands[0].len()
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, index: usize) -> CohResult<&[Complex64]> {
        self.bands
            .get(index)
            .map(Vec::as_slice)
            .ok_or(CohError::BadIndex { index, len: self.bands.len() })
    }

    pub fn bands(&self) -> &[Vec<Complex64>] {
        &self.bands
    }

    pub fn coeff(&self, t: usize, band: usize) -> Complex64 {
        self.bands[band][t]
    }

    pub fn band_centers_hz(&self) -> &[f64] {
        &self.band_centers_hz
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    /// Index of the band whose center is nearest `freq_hz` (lower index on ties).
    pub fn nearest_band(&self, freq_hz: f64) -> usize {
        let mut best = 0;
        for (k, c) in self.band_centers_hz.iter().enumerate() {
            if (c - freq_hz).abs() < (self.band_centers_hz[best] - freq_hz).abs() {
                best = k;
            }
        }
        best
    }

    /// Same geometry and centers, so the two reps can be compared band by band.
    pub fn check_same_shape(&self, other: &BandRep) -> CohResult<()> {
        if self.n_times() != other.n_times() || self.n_bands() != other.n_bands() {
            return Err(CohError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.n_times(),
                self.n_bands(),
                other.n_times(),
                other.n_bands()
            )));
        }
        if self
            .band_centers_hz
            .iter()
            .zip(&other.band_centers_hz)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
        {
            return Err(CohError::ShapeMismatch("band centers differ".into()));
        }
        Ok(())
    }

    pub(crate) fn with_bands(&self, bands: Vec<Vec<Complex64>>) -> BandRep {
        BandRep {
            bands,
            band_centers_hz: self.band_centers_hz.clone(),
            dt_s: self.dt_s,
        }
    }
}

/// A filter bank planned for one signal length and sample rate.
///
/// Reuse it when decomposing many signals of the same shape; the FFT plans
/// are built once.
pub struct Decomposer {
    params: BandParams,
    fs_hz: f64,
    n: usize,
    rows: usize,
    center_bins: Vec<i64>,
    centers_hz: Vec<f64>,
    /// Taper weight for baseband offset `j`, stored at index `j mod rows`,
    /// with the amplitude normalization folded in.
    weights: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Decomposer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Decomposer")
            .field("params", &self.params)
            .field("fs_hz", &self.fs_hz)
            .field("n", &self.n)
            .field("rows", &self.rows)
            .finish()
    }
}

impl Decomposer {
    pub fn new(params: BandParams, fs_hz: f64, n: usize) -> CohResult<Self> {
        params.validate()?;
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(CohError::InvalidParams(format!(
                "sample rate must be positive, got {fs_hz}"
            )));
        }
        let b = params.bandwidth_hz;
        if params.high_hz + b > fs_hz / 2.0 {
            return Err(CohError::InvalidBandRange {
                low: params.low_hz,
                high: params.high_hz,
            });
        }
        let duration = n as f64 / fs_hz;
        if b * duration < 2.0 {
            return Err(CohError::SignalTooShort(format!(
                "bandwidth x duration = {:.3}, need at least 2",
                b * duration
            )));
        }
        let rows = ((2.0 * b * duration).floor() as usize).max(2);
        let bin_hz = fs_hz / n as f64;

        let center_bins: Vec<i64> = params
            .nominal_centers()
            .iter()
            .map(|f| (f / bin_hz).round() as i64)
            .collect();
        if center_bins.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CohError::SignalTooShort(format!(
                "band spacing {:.4} Hz is finer than the frequency resolution {:.4} Hz",
                params.spacing_hz(),
                bin_hz
            )));
        }
        let centers_hz = center_bins.iter().map(|&m| m as f64 * bin_hz).collect();

        let half = (rows / 2) as i64;
        let mut weights = vec![0.0; rows];
        for j in -half..(rows as i64 - half) {
            let offset_hz = j as f64 * bin_hz;
            let w = match params.taper {
                Taper::Rectangular => 1.0,
                Taper::RaisedCosine => {
                    if offset_hz.abs() < b {
                        (PI * offset_hz / (2.0 * b)).cos().powi(2)
                    } else {
                        0.0
                    }
                }
            };
            weights[j.rem_euclid(rows as i64) as usize] = w;
        }
        let energy: f64 = weights.iter().map(|w| w * w).sum();
        let scale = ((2.0 * b / fs_hz) / (f64::from(params.upsample_fx + 1) * energy)).sqrt();
        weights.iter_mut().for_each(|w| *w *= scale);

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(rows);
        Ok(Self {
            params,
            fs_hz,
            n,
            rows,
            center_bins,
            centers_hz,
            weights,
            forward,
            inverse,
        })
    }

    pub fn params(&self) -> &BandParams {
        &self.params
    }

    /// Number of time rows `T` each band will have.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Band centers in Hz, rounded to the FFT bin grid.
    pub fn band_centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn decompose(&self, signal: &Signal) -> CohResult<BandRep> {
        if signal.len() != self.n || signal.fs_hz() != self.fs_hz {
            return Err(CohError::ShapeMismatch(format!(
                "decomposer planned for {} samples at {} Hz, got {} at {} Hz",
                self.n,
                self.fs_hz,
                signal.len(),
                signal.fs_hz()
            )));
        }
        let mut spectrum: Vec<Complex64> = signal
            .samples()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.forward.process(&mut spectrum);

        let n = self.n as i64;
        let rows = self.rows as i64;
        let half = rows / 2;
        let bands = self
            .center_bins
            .iter()
            .map(|&m| {
                let mut buf = vec![Complex64::new(0.0, 0.0); self.rows];
                for j in -half..(rows - half) {
                    let slot = j.rem_euclid(rows) as usize;
                    let bin = (m + j).rem_euclid(n) as usize;
                    buf[slot] = spectrum[bin] * self.weights[slot];
                }
                self.inverse.process(&mut buf);
                buf
            })
            .collect();
        BandRep::new(bands, self.centers_hz.clone(), signal.duration_s() / self.rows as f64)
    }
}

/// Decompose `signal` into complex narrowband coefficients.
pub fn decompose(signal: &Signal, params: &BandParams) -> CohResult<BandRep> {
    Decomposer::new(*params, signal.fs_hz(), signal.len())?.decompose(signal)
}

/// Band whose energy is most concentrated at its own center, and its center
/// frequency.
///
/// Each band is taken back to its `T` frequency bins (forward FFT of the
/// coefficients) and the bin powers are weighted by `cos^2(pi j / T)`, `j` the
/// offset from the center bin. Plain band energy cannot localize a peak: with
/// the flat taper every band containing a tone holds exactly the same energy.
/// Ties go to the lowest index.
pub fn peak_frequency(rep: &BandRep) -> CohResult<(usize, f64)> {
    let rows = rep.n_times();
    let fft = FftPlanner::new().plan_fft_forward(rows);
    let half = rows / 2;
    let weight: Vec<f64> = (0..rows)
        .map(|slot| {
            let j = if slot < rows - half { slot as f64 } else { slot as f64 - rows as f64 };
            (PI * j / rows as f64).cos().powi(2)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut buf = vec![Complex64::new(0.0, 0.0); rows];
    for (k, band) in rep.bands().iter().enumerate() {
        buf.copy_from_slice(band);
        fft.process(&mut buf);
        let p: f64 = buf.iter().zip(&weight).map(|(c, w)| w * c.norm_sqr()).sum();
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((k, p));
        }
    }
    match best {
        Some((k, p)) if p > 0.0 => Ok((k, rep.band_centers_hz()[k])),
        _ => Err(CohError::NoPeak),
    }
}

/// Mean of `|c|^2` over time in one band.
pub fn band_power(rep: &BandRep, band_index: usize) -> CohResult<f64> {
    let band = rep.band(band_index)?;
    Ok(band.iter().map(|c| c.norm_sqr()).sum::<f64>() / band.len() as f64)
}
