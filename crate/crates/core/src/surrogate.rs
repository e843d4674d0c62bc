//! Surrogate significance tests on the driver's band coefficients.
//!
//! The observation `A_Y` is held fixed while the driver `A_X` is replaced by
//! spectrum-preserving surrogates: a circular shift of its rows by a random
//! lag, or multiplication of every coefficient by an independent uniform
//! phase. The upper-tail p-value is `(1 + #{C_obs <= C_p}) / (n_perm + 1)`.
//!
//! Each permutation draws from its own counter-based stream keyed by
//! `(seed, realization, band, permutation)`, so results do not depend on how
//! the permutations are scheduled.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coherence::{coherence_denominator, energy, DEFAULT_EPS};
use crate::decompose::BandRep;
use crate::error::{CohError, CohResult};
use crate::par::Execution;
use crate::rng::{domain, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMethod {
    CircularShift,
    PhaseRandomize,
}

impl SurrogateMethod {
    fn stream_tag(self) -> u64 {
        match self {
            SurrogateMethod::CircularShift => domain::CIRCULAR,
            SurrogateMethod::PhaseRandomize => domain::PHASE,
        }
    }
}

/// How exceedance counts become a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PValueRule {
    /// `(1 + count) / (n_perm + 1)`; never below `1 / (n_perm + 1)`.
    #[default]
    PlusOne,
    /// `count / n_perm`; can be zero.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub method: SurrogateMethod,
    pub n_perm: usize,
    pub seed: u64,
    /// Realization index mixed into the stream key (e.g. the sweep target).
    pub realization: u64,
    pub rule: PValueRule,
}

impl SurrogateConfig {
    pub fn new(method: SurrogateMethod, n_perm: usize, seed: u64) -> Self {
        Self {
            method,
            n_perm,
            seed,
            realization: 0,
            rule: PValueRule::PlusOne,
        }
    }

    pub fn with_realization(self, realization: u64) -> Self {
        Self { realization, ..self }
    }

    pub fn validate(&self) -> CohResult<()> {
        if self.n_perm < 1 {
            return Err(CohError::InvalidParams("n_perm must be at least 1".into()));
        }
        Ok(())
    }

    fn band_key(&self, band: usize) -> StreamKey {
        StreamKey::new(self.seed)
            .realization(self.realization)
            .band(self.method.stream_tag() << 32 | band as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateTestResult {
    pub observed: f64,
    pub null_samples: Vec<f64>,
    pub p_value: f64,
    pub floor: f64,
}

/// Row `t` of the output is row `(t + lag) mod T` of the input.
pub fn circ_shift(ax: &BandRep, lag: usize) -> CohResult<BandRep> {
    let t = ax.n_times();
    if lag >= t {
        return Err(CohError::BadLag { lag, len: t });
    }
    let bands = ax
        .bands()
        .iter()
        .map(|b| {
            let mut v = b.clone();
            v.rotate_left(lag);
            v
        })
        .collect();
    Ok(ax.with_bands(bands))
}

/// Unit phasor with angle uniform on `[0, 2 pi)`, by polar rejection.
#[inline]
fn unit_phasor<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    loop {
        let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let r2 = u * u + v * v;
        if r2 > 1e-12 && r2 <= 1.0 {
            let inv = r2.sqrt().recip();
            return Complex64::new(u * inv, v * inv);
        }
    }
}

/// Multiply every coefficient by an independent uniform unit phase.
pub fn phase_randomize<R: Rng + ?Sized>(ax: &BandRep, rng: &mut R) -> BandRep {
    let bands = ax
        .bands()
        .iter()
        .map(|b| b.iter().map(|c| c * unit_phasor(rng)).collect())
        .collect();
    ax.with_bands(bands)
}

/// `sum_t x[(t + lag) mod T] y[t]*`, accumulated in `t` order.
#[inline]
fn shifted_cross(x: &[Complex64], y: &[Complex64], lag: usize) -> Complex64 {
    let n = x.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, yt) in y.iter().enumerate() {
        let s = t + lag;
        let xi = if s >= n { x[s - n] } else { x[s] };
        acc += xi * yt.conj();
    }
    acc
}

fn surrogate_statistic(
    x: &[Complex64],
    y: &[Complex64],
    key: StreamKey,
    method: SurrogateMethod,
    denom: f64,
) -> f64 {
    let mut rng = key.rng();
    let num = match method {
        SurrogateMethod::CircularShift => {
            let lag = rng.random_range(0..x.len());
            shifted_cross(x, y, lag)
        }
        SurrogateMethod::PhaseRandomize => {
            let mut acc = Complex64::new(0.0, 0.0);
            for (xt, yt) in x.iter().zip(y) {
                acc += xt * unit_phasor(&mut rng) * yt.conj();
            }
            acc
        }
    };
    num.norm() / denom
}

/// Surrogate test on one pair of band series.
pub(crate) fn band_test(
    x: &[Complex64],
    y: &[Complex64],
    band: usize,
    cfg: &SurrogateConfig,
    exec: Execution,
) -> SurrogateTestResult {
    // Both surrogates preserve |x_t|, so the denominator is shared.
    let denom = coherence_denominator(energy(x), energy(y), DEFAULT_EPS);
    let observed = shifted_cross(x, y, 0).norm() / denom;
    let key = cfg.band_key(band);
    let null_samples = exec.map_indexed(cfg.n_perm, |p| {
        surrogate_statistic(x, y, key.permutation(p as u64), cfg.method, denom)
    });
    let count = null_samples.iter().filter(|&&c| observed <= c).count();
    let n = cfg.n_perm as f64;
    let p_value = match cfg.rule {
        PValueRule::PlusOne => (1.0 + count as f64) / (n + 1.0),
        PValueRule::Mean => count as f64 / n,
    };
    SurrogateTestResult {
        observed,
        null_samples,
        p_value,
        floor: 1.0 / (n + 1.0),
    }
}

pub fn surrogate_pvalue(
    ax: &BandRep,
    ay: &BandRep,
    band_index: usize,
    cfg: &SurrogateConfig,
) -> CohResult<SurrogateTestResult> {
    surrogate_pvalue_with(ax, ay, band_index, cfg, Execution::default())
}

pub fn surrogate_pvalue_with(
    ax: &BandRep,
    ay: &BandRep,
    band_index: usize,
    cfg: &SurrogateConfig,
    exec: Execution,
) -> CohResult<SurrogateTestResult> {
    cfg.validate()?;
    ax.check_same_shape(ay)?;
    let x = ax.band(band_index)?;
    let y = ay.band(band_index)?;
    Ok(band_test(x, y, band_index, cfg, exec))
}

/// Surrogate test at every band; each band has its own random substreams.
pub fn surrogate_spectrum(
    ax: &BandRep,
    ay: &BandRep,
    cfg: &SurrogateConfig,
) -> CohResult<Vec<SurrogateTestResult>> {
    surrogate_spectrum_with(ax, ay, cfg, Execution::default())
}

pub fn surrogate_spectrum_with(
    ax: &BandRep,
    ay: &BandRep,
    cfg: &SurrogateConfig,
    exec: Execution,
) -> CohResult<Vec<SurrogateTestResult>> {
    cfg.validate()?;
    ax.check_same_shape(ay)?;
    Ok(exec.map_indexed(ax.n_bands(), |k| {
        band_test(&ax.bands()[k], &ay.bands()[k], k, cfg, Execution::Sequential)
    }))
}
