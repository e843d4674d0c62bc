//! Summaries of sweep records: power curves, ROC/AUC, p-value agreement and
//! a Welch PSD for diagnostics.

use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::decompose::Signal;
use crate::error::{CohError, CohResult};
use crate::sim::SweepRecord;

/// The three significance tests, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Glm,
    Circ,
    Phase,
}

impl TestMethod {
    pub const ALL: [TestMethod; 3] = [TestMethod::Glm, TestMethod::Circ, TestMethod::Phase];

    pub fn name(self) -> &'static str {
        match self {
            TestMethod::Glm => "glm",
            TestMethod::Circ => "circ",
            TestMethod::Phase => "phase",
        }
    }

    pub fn p_value(self, r: &SweepRecord) -> f64 {
        match self {
            TestMethod::Glm => r.p_glm,
            TestMethod::Circ => r.p_circ,
            TestMethod::Phase => r.p_phase,
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which coherence the power curve is binned by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinAxis {
    #[default]
    Observed,
    True,
}

impl BinAxis {
    fn value(self, r: &SweepRecord) -> f64 {
        match self {
            BinAxis::Observed => r.c_obs,
            BinAxis::True => r.c_true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinAxis::Observed => "observed",
            BinAxis::True => "true",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodCurve {
    pub method: TestMethod,
    pub detection_rate: Vec<f64>,
    pub c50: Option<f64>,
    pub c80: Option<f64>,
    pub c90: Option<f64>,
    pub snr_at_80_db: Option<f64>,
}

/// Detection power per coherence bin. Only nonempty bins are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub bin_centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub methods: Vec<MethodCurve>,
    pub alpha: f64,
    pub bin_width: f64,
    pub axis: BinAxis,
}

impl PowerCurve {
    pub fn method(&self, m: TestMethod) -> &MethodCurve {
        self.methods.iter().find(|c| c.method == m).expect("all methods present")
    }
}

fn crossing(rates: &[f64], level: f64) -> Option<usize> {
    rates.iter().position(|&r| r >= level)
}

/// First level crossing, interpolated linearly from the previous bin center.
fn interpolated_threshold(centers: &[f64], rates: &[f64], level: f64) -> Option<f64> {
    let i = crossing(rates, level)?;
    if i == 0 {
        return Some(centers[0]);
    }
    let (c0, c1) = (centers[i - 1], centers[i]);
    let (r0, r1) = (rates[i - 1], rates[i]);
    Some(c0 + (level - r0) / (r1 - r0) * (c1 - c0))
}

pub fn power_curve(records: &[SweepRecord], alpha: f64, bin_width: f64) -> CohResult<PowerCurve> {
    power_curve_by(records, alpha, bin_width, BinAxis::Observed)
}

pub fn power_curve_by(
    records: &[SweepRecord],
    alpha: f64,
    bin_width: f64,
    axis: BinAxis,
) -> CohResult<PowerCurve> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CohError::InvalidParams(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(CohError::InvalidParams(format!("bin width must lie in (0, 1], got {bin_width}")));
    }
    let n_bins = (1.0 / bin_width).ceil() as usize;
    let bin_of = |c: f64| ((c / bin_width).floor().max(0.0) as usize).min(n_bins - 1);

    let mut counts = vec![0usize; n_bins];
    let mut hits = vec![[0usize; 3]; n_bins];
    let mut snr = vec![0.0f64; n_bins];
    for r in records {
        let b = bin_of(axis.value(r));
        counts[b] += 1;
        snr[b] += r.snr_db;
        for (m, h) in TestMethod::ALL.iter().zip(hits[b].iter_mut()) {
            if m.p_value(r) < alpha {
                *h += 1;
            }
        }
    }
    let kept: Vec<usize> = (0..n_bins).filter(|&b| counts[b] > 0).collect();
    if kept.len() < 2 {
        return Err(CohError::InsufficientData(format!(
            "power curve needs at least 2 nonempty bins, got {}",
            kept.len()
        )));
    }
    let bin_centers: Vec<f64> = kept.iter().map(|&b| (b as f64 + 0.5) * bin_width).collect();
    let methods = TestMethod::ALL
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let rates: Vec<f64> = kept
                .iter()
                .map(|&b| hits[b][mi] as f64 / counts[b] as f64)
                .collect();
            let snr_at_80_db = crossing(&rates, 0.8).map(|i| {
                let b = kept[i];
                snr[b] / counts[b] as f64
            });
            MethodCurve {
                method,
                c50: interpolated_threshold(&bin_centers, &rates, 0.5),
                c80: interpolated_threshold(&bin_centers, &rates, 0.8),
                c90: interpolated_threshold(&bin_centers, &rates, 0.9),
                snr_at_80_db,
                detection_rate: rates,
            }
        })
        .collect();
    Ok(PowerCurve {
        counts: kept.iter().map(|&b| counts[b]).collect(),
        bin_centers,
        methods,
        alpha,
        bin_width,
        axis,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    /// Threshold for each point; the leading (0, 0) point has threshold -inf.
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
    pub control_freq_hz: f64,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Empirical ROC for "p <= threshold" over every distinct observed p-value.
pub fn roc(p_pos: &[f64], p_neg: &[f64], control_freq_hz: f64) -> CohResult<RocResult> {
    if p_pos.is_empty() || p_neg.is_empty() {
        return Err(CohError::EmptyInput("ROC needs positives and negatives".into()));
    }
    if p_pos.iter().chain(p_neg).any(|p| p.is_nan()) {
        return Err(CohError::InvalidParams("NaN p-value".into()));
    }
    let pos = sorted(p_pos);
    let neg = sorted(p_neg);
    let mut thresholds = sorted(&[p_pos, p_neg].concat());
    thresholds.dedup();

    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut out = RocResult {
        thresholds: vec![f64::NEG_INFINITY],
        fpr: vec![0.0],
        tpr: vec![0.0],
        auc: 0.0,
        control_freq_hz,
    };
    for &t in &thresholds {
        while i < pos.len() && pos[i] <= t {
            i += 1;
        }
        while j < neg.len() && neg[j] <= t {
            j += 1;
        }
        out.thresholds.push(t);
        out.tpr.push(i as f64 / np);
        out.fpr.push(j as f64 / nn);
    }
    out.auc = trapezoid(&out.fpr, &out.tpr);
    Ok(out)
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| (xw[1] - xw[0]) * (yw[0] + yw[1]) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementPair {
    pub neg_log10_p_glm: f64,
    pub neg_log10_p_phase: f64,
    pub c_obs: f64,
}

/// `-log10(1 / (n_perm + 1))`, the largest value a surrogate test can show.
pub fn floor_cap(n_perm: usize) -> f64 {
    ((n_perm + 1) as f64).log10()
}

/// GLM and phase-randomization evidence side by side, GLM clipped at the
/// surrogate floor.
pub fn agreement_pairs(records: &[SweepRecord], n_perm: usize) -> CohResult<Vec<AgreementPair>> {
    if records.is_empty() {
        return Err(CohError::EmptyInput("no sweep records".into()));
    }
    let cap = floor_cap(n_perm);
    // + 0.0 turns -0.0 into 0.0
    Ok(records
        .iter()
        .map(|r| AgreementPair {
            neg_log10_p_glm: (-r.p_glm.log10()).min(cap) + 0.0,
            neg_log10_p_phase: -r.p_phase.log10() + 0.0,
            c_obs: r.c_obs,
        })
        .collect())
}

/// Welch power spectral density with Hann-tapered segments.
///
/// One-sided density: bins strictly between 0 and Nyquist are doubled, so
/// `sum(psd) * df` equals the mean periodogram power, which for a stationary
/// zero-mean signal approximates its variance.
pub fn welch_psd(signal: &Signal, segment_s: f64, overlap_frac: f64) -> CohResult<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&overlap_frac) {
        return Err(CohError::InvalidParams(format!("overlap must lie in [0, 1), got {overlap_frac}")));
    }
    let fs = signal.fs_hz();
    let nseg = (segment_s * fs).round() as usize;
    if nseg < 2 || nseg > signal.len() {
        return Err(CohError::SignalTooShort(format!(
            "segment of {nseg} samples does not fit a signal of {}",
            signal.len()
        )));
    }
    let step = (nseg - (overlap_frac * nseg as f64).round() as usize).max(1);
    let window: Vec<f64> = (0..nseg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nseg as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nseg);
    let n_freq = nseg / 2 + 1;
    let mut acc = vec![0.0; n_freq];
    let mut buf = vec![Complex64::new(0.0, 0.0); nseg];
    let x = signal.samples();
    let mut n_segments = 0usize;
    let mut start = 0;
    while start + nseg <= x.len() {
        let seg = &x[start..start + nseg];
        let m = seg.iter().sum::<f64>() / nseg as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - m) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        n_segments += 1;
        start += step;
    }
    let scale = 1.0 / (fs * wss * n_segments as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (nseg % 2 == 0 && k == nseg / 2) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let freqs = (0..n_freq).map(|k| k as f64 * fs / nseg as f64).collect();
    Ok((freqs, psd))
}
