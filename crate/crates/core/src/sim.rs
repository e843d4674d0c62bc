//! Simulated driver/observation pairs with a prescribed band coherence.
//!
//! The observation is `y = x + n` with white Gaussian `n`. Its standard
//! deviation is chosen so that the population coherence at the driver's peak
//! band equals the target:
//!
//! ```text
//! sigma_n = sqrt((1 / C^2 - 1) * P_x * fs / (2B) * (U_fx + 1) / N)
//! ```
//!
//! where `P_x` is the driver's band power at the peak and `N` its sample
//! count. This matches the decomposition's normalization, under which white
//! noise of variance `s^2` has band power `s^2 (2B / fs) N / (U_fx + 1)`.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coherence::coherence_at;
use crate::decompose::{band_power, peak_frequency, BandParams, BandRep, Decomposer, Signal};
use crate::error::{CohError, CohResult};
use crate::glm::glm_band;
use crate::io::read_signal_csv;
use crate::par::Execution;
use crate::rng::{domain, StreamKey};
use crate::stats::variance;
use crate::surrogate::{band_test, PValueRule, SurrogateConfig, SurrogateMethod};

/// Correlation time of the slow amplitude modulation of the synthetic driver.
pub const AMP_JITTER_TIMESCALE_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriverSource {
    #[default]
    Synthetic,
    CsvFile(PathBuf),
}

/// Where the driver comes from and, for the synthetic one, how it looks.
///
/// The synthetic driver is `a(t) cos(phi(t))`, z-scored. `phi` advances at
/// `f_br_hz` plus a Brownian phase drift whose diffusion gives a Lorentzian
/// line of half-width `freq_jitter` Hz. `a(t) = exp(amp_jitter * u(t))` with
/// `u` a unit-variance Ornstein-Uhlenbeck process of correlation time
/// [`AMP_JITTER_TIMESCALE_S`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverSpec {
    pub source: DriverSource,
    pub duration_s: f64,
    pub fs_hz: f64,
    pub f_br_hz: f64,
    pub amp_jitter: f64,
    pub freq_jitter: f64,
}

impl Default for DriverSpec {
    fn default() -> Self {
        Self {
            source: DriverSource::Synthetic,
            duration_s: 367.0,
            fs_hz: 250.0,
            f_br_hz: 0.3,
            amp_jitter: 0.25,
            freq_jitter: 0.001,
        }
    }
}

impl DriverSpec {
    pub fn validate(&self) -> CohResult<()> {
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(CohError::InvalidParams(format!("fs_hz must be positive, got {}", self.fs_hz)));
        }
        if self.source == DriverSource::Synthetic {
            if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
                return Err(CohError::InvalidParams(format!(
                    "duration_s must be positive, got {}",
                    self.duration_s
                )));
            }
            if !(self.f_br_hz > 0.0 && self.f_br_hz < self.fs_hz / 2.0) {
                return Err(CohError::InvalidParams(format!(
                    "f_br_hz must lie in (0, fs/2), got {}",
                    self.f_br_hz
                )));
            }
        }
        if !(self.amp_jitter >= 0.0 && self.freq_jitter >= 0.0) {
            return Err(CohError::InvalidParams("jitters must be non-negative".into()));
        }
        Ok(())
    }
}

/// Remove the mean and scale to unit (population) variance.
pub fn zscore(v: &mut [f64]) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    let inv = if sd > 0.0 { sd.recip() } else { 1.0 };
    v.iter_mut().for_each(|x| *x = (*x - m) * inv);
}

pub fn make_driver<R: Rng + ?Sized>(spec: &DriverSpec, rng: &mut R) -> CohResult<Signal> {
    spec.validate()?;
    let mut samples = match &spec.source {
        DriverSource::CsvFile(path) => read_signal_csv(path, Some(spec.fs_hz))?.into_samples(),
        DriverSource::Synthetic => {
            let fs = spec.fs_hz;
            let n = (spec.duration_s * fs).round() as usize;
            let step = 2.0 * PI * spec.f_br_hz / fs;
            let phase_sd = (4.0 * PI * spec.freq_jitter / fs).sqrt();
            let decay = (-1.0 / (fs * AMP_JITTER_TIMESCALE_S)).exp();
            let innov = (1.0 - decay * decay).sqrt();
            let mut phase = rng.random::<f64>() * 2.0 * PI;
            let mut u: f64 = StandardNormal.sample(rng);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push((spec.amp_jitter * u).exp() * phase.cos());
                let dphi: f64 = StandardNormal.sample(rng);
                let du: f64 = StandardNormal.sample(rng);
                phase += step + phase_sd * dphi;
                u = decay * u + innov * du;
            }
            out
        }
    };
    zscore(&mut samples);
    Signal::new(samples, spec.fs_hz)
}

/// Noise standard deviation giving population coherence `c_true` at a band
/// where the driver has power `p_x`.
pub fn noise_sigma(c_true: f64, p_x: f64, fs_hz: f64, b_hz: f64, u_fx: u32, n: usize) -> CohResult<f64> {
    if !(c_true > 0.0 && c_true < 1.0) {
        return Err(CohError::BadTarget(c_true));
    }
    if !(p_x > 0.0 && p_x.is_finite()) {
        return Err(CohError::InvalidParams(format!("driver band power must be positive, got {p_x}")));
    }
    if n == 0 {
        return Err(CohError::InvalidParams("driver length must be positive".into()));
    }
    let factor = 1.0 / (c_true * c_true) - 1.0;
    Ok((factor * p_x * fs_hz / (2.0 * b_hz) * f64::from(u_fx + 1) / n as f64).sqrt())
}

/// `y = x + n` with `n ~ N(0, sigma^2)`; returns `y` and the empirical SNR in dB.
pub fn add_noise<R: Rng + ?Sized>(x: &Signal, sigma: f64, rng: &mut R) -> CohResult<(Signal, f64)> {
    let noise: Vec<f64> = (0..x.len())
        .map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, rng))
        .collect();
    let snr_db = 10.0 * (variance(x.samples()) / variance(&noise)).log10();
    let y = x.samples().iter().zip(&noise).map(|(a, b)| a + b).collect();
    Ok((Signal::new(y, x.fs_hz())?, snr_db))
}

/// Observation with target coherence at the driver's peak band.
/// Returns `(y, sigma_n, snr_db)`.
pub fn make_observation<R: Rng + ?Sized>(
    x: &Signal,
    c_true: f64,
    band_params: &BandParams,
    rng: &mut R,
) -> CohResult<(Signal, f64, f64)> {
    let d = Decomposer::new(*band_params, x.fs_hz(), x.len())?;
    let rep = d.decompose(x)?;
    let (k, _) = peak_frequency(&rep)?;
    let p_x = band_power(&rep, k)?;
    let sigma = noise_sigma(
        c_true,
        p_x,
        x.fs_hz(),
        band_params.bandwidth_hz,
        band_params.upsample_fx,
        x.len(),
    )?;
    let (y, snr_db) = add_noise(x, sigma, rng)?;
    Ok((y, sigma, snr_db))
}

/// `count` evenly spaced interior targets `k / (count + 1)`, `k = 1..=count`.
/// `count = 9999` gives the 1e-4 grid from 0.0001 to 0.9999.
pub fn interior_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|k| k as f64 / (count + 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub c_true_grid: Vec<f64>,
    pub seed: u64,
    pub band_params: BandParams,
    pub n_perm: usize,
    pub rule: PValueRule,
    /// Also evaluate every target at the band nearest this frequency.
    pub control_freq_hz: Option<f64>,
    /// Keep the driver and observation band representations.
    pub keep_tensors: bool,
}

impl SweepConfig {
    pub fn new(c_true_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            c_true_grid,
            seed,
            band_params: BandParams::default(),
            n_perm: 2000,
            rule: PValueRule::PlusOne,
            control_freq_hz: Some(1.0),
            keep_tensors: false,
        }
    }

    pub fn validate(&self) -> CohResult<()> {
        self.band_params.validate()?;
        if self.c_true_grid.is_empty() {
            return Err(CohError::EmptyInput("coherence grid is empty".into()));
        }
        if self.c_true_grid.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return Err(CohError::InvalidParams("grid values must lie in (0, 1)".into()));
        }
        if self.c_true_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(CohError::InvalidParams("grid must be sorted".into()));
        }
        if self.n_perm < 1 {
            return Err(CohError::InvalidParams("n_perm must be at least 1".into()));
        }
        if let Some(f) = self.control_freq_hz {
            if f < self.band_params.low_hz || f > self.band_params.high_hz {
                return Err(CohError::InvalidParams(format!(
                    "control frequency {f} Hz outside the band range"
                )));
            }
        }
        Ok(())
    }
}

/// One simulated realization evaluated at one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub c_true: f64,
    pub sigma_n: f64,
    pub snr_db: f64,
    pub c_obs: f64,
    pub p_glm: f64,
    pub p_circ: f64,
    pub p_phase: f64,
    /// Frequency of the evaluated band (the breathing band, or the control band).
    pub f_br_hz: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub control_records: Option<Vec<SweepRecord>>,
    pub f_br_hz: f64,
    pub band_index: usize,
    pub ax: Option<BandRep>,
    pub ay: Option<Vec<BandRep>>,
}

/// Driver, its decomposition and the quantities shared by every target.
pub struct SweepContext {
    pub driver: Signal,
    pub decomposer: Decomposer,
    pub ax: BandRep,
    pub band_index: usize,
    pub f_br_hz: f64,
    pub p_x: f64,
    seed: u64,
}

impl SweepContext {
    pub fn new(spec: &DriverSpec, band_params: &BandParams, seed: u64) -> CohResult<Self> {
        let driver = make_driver(spec, &mut StreamKey::new(seed).band(domain::DRIVER).rng())?;
        let decomposer = Decomposer::new(*band_params, driver.fs_hz(), driver.len())?;
        let ax = decomposer.decompose(&driver)?;
        let (band_index, f_br_hz) = peak_frequency(&ax)?;
        let p_x = band_power(&ax, band_index)?;
        Ok(Self { driver, decomposer, ax, band_index, f_br_hz, p_x, seed })
    }

    pub fn sigma_for(&self, c_true: f64) -> CohResult<f64> {
        let p = self.decomposer.params();
        noise_sigma(c_true, self.p_x, self.driver.fs_hz(), p.bandwidth_hz, p.upsample_fx, self.driver.len())
    }

    /// Observation for target `index`, drawn from its own noise stream.
    pub fn observation(&self, index: usize, c_true: f64) -> CohResult<(Signal, f64, f64)> {
        let sigma = self.sigma_for(c_true)?;
        let mut rng = StreamKey::new(self.seed)
            .realization(index as u64)
            .band(domain::NOISE)
            .rng();
        let (y, snr) = add_noise(&self.driver, sigma, &mut rng)?;
        Ok((y, sigma, snr))
    }

    pub fn observation_rep(&self, index: usize, c_true: f64) -> CohResult<BandRep> {
        let (y, _, _) = self.observation(index, c_true)?;
        self.decomposer.decompose(&y)
    }
}

/// Evaluate coherence and the three tests at one band.
#[allow(clippy::too_many_arguments)]
pub(crate) fn evaluate_band(
    ax: &BandRep,
    ay: &BandRep,
    band: usize,
    c_true: f64,
    sigma_n: f64,
    snr_db: f64,
    surrogate: &SurrogateConfig,
) -> CohResult<SweepRecord> {
    let x = ax.band(band)?;
    let y = ay.band(band)?;
    let circ = SurrogateConfig { method: SurrogateMethod::CircularShift, ..*surrogate };
    let phase = SurrogateConfig { method: SurrogateMethod::PhaseRandomize, ..*surrogate };
    Ok(SweepRecord {
        c_true,
        sigma_n,
        snr_db,
        c_obs: coherence_at(ax, ay, band)?,
        p_glm: glm_band(x, y).p_value,
        p_circ: band_test(x, y, band, &circ, Execution::Sequential).p_value,
        p_phase: band_test(x, y, band, &phase, Execution::Sequential).p_value,
        f_br_hz: ax.band_centers_hz()[band],
    })
}

pub fn run_sweep(spec: &DriverSpec, cfg: &SweepConfig) -> CohResult<SweepOutput> {
    run_sweep_with(spec, cfg, Execution::default())
}

pub fn run_sweep_with(spec: &DriverSpec, cfg: &SweepConfig, exec: Execution) -> CohResult<SweepOutput> {
    cfg.validate()?;
    let ctx = SweepContext::new(spec, &cfg.band_params, cfg.seed)?;
    let control = cfg.control_freq_hz.map(|f| ctx.ax.nearest_band(f));
    let base = SurrogateConfig {
        method: SurrogateMethod::CircularShift,
        n_perm: cfg.n_perm,
        seed: cfg.seed,
        realization: 0,
        rule: cfg.rule,
    };

    type TargetOut = (SweepRecord, Option<SweepRecord>, Option<BandRep>);
    let per_target: Vec<CohResult<TargetOut>> = exec.map_indexed(cfg.c_true_grid.len(), |i| {
        let c_true = cfg.c_true_grid[i];
        let (y, sigma, snr) = ctx.observation(i, c_true)?;
        let ay = ctx.decomposer.decompose(&y)?;
        let s = base.with_realization(i as u64);
        let rec = evaluate_band(&ctx.ax, &ay, ctx.band_index, c_true, sigma, snr, &s)?;
        let ctl = control
            .map(|k| evaluate_band(&ctx.ax, &ay, k, c_true, sigma, snr, &s))
            .transpose()?;
        Ok((rec, ctl, cfg.keep_tensors.then_some(ay)))
    });

    let mut records = Vec::with_capacity(per_target.len());
    let mut control_records = control.map(|_| Vec::with_capacity(per_target.len()));
    let mut ay_all = cfg.keep_tensors.then(Vec::new);
    for item in per_target {
        let (rec, ctl, ay) = item?;
        records.push(rec);
        if let (Some(list), Some(c)) = (control_records.as_mut(), ctl) {
            list.push(c);
        }
        if let (Some(list), Some(a)) = (ay_all.as_mut(), ay) {
            list.push(a);
        }
    }
    Ok(SweepOutput {
        records,
        control_records,
        f_br_hz: ctx.f_br_hz,
        band_index: ctx.band_index,
        ax: cfg.keep_tensors.then(|| ctx.ax.clone()),
        ay: ay_all,
    })
}
