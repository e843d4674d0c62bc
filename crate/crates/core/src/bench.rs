//! Wall-clock comparison of the three tests on identical band representations.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::TestMethod;
use crate::decompose::BandRep;
use crate::error::{CohError, CohResult};
use crate::glm::glm_spectrum;
use crate::par::Execution;
use crate::stats::{median, paired_t_test, std_dev, wilcoxon_signed_rank};
use crate::surrogate::{surrogate_spectrum_with, PValueRule, SurrogateConfig, SurrogateMethod};

pub const MIN_REPEATS: usize = 3;
pub const MIN_PAIRED_REPEATS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n_coh_sub: usize,
    pub n_perm_grid: Vec<usize>,
    pub repeats: usize,
    pub warmup: usize,
    /// Run the surrogate loops on the thread pool instead of one thread.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_coh_sub: 100,
            n_perm_grid: vec![100, 200, 500, 1000, 2000, 4000],
            repeats: 10,
            warmup: 1,
            parallel: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> CohResult<()> {
        if self.repeats < MIN_REPEATS {
            return Err(CohError::InvalidParams(format!(
                "bench repeats must be at least {MIN_REPEATS}, got {}",
                self.repeats
            )));
        }
        if self.warmup < 1 {
            return Err(CohError::InvalidParams("bench warmup must be at least 1".into()));
        }
        if self.n_coh_sub < 1 {
            return Err(CohError::InvalidParams("n_coh_sub must be at least 1".into()));
        }
        if self.n_perm_grid.is_empty() || self.n_perm_grid.contains(&0) {
            return Err(CohError::InvalidParams("n_perm grid must be nonempty and positive".into()));
        }
        Ok(())
    }

    fn execution(&self) -> Execution {
        if self.parallel {
            Execution::default()
        } else {
            Execution::Sequential
        }
    }
}

/// One timed run. `n_perm` is the grid setting the run belongs to; it has
/// no effect on GLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub method: TestMethod,
    pub n_perm: usize,
    pub repeat: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummaryRow {
    pub method: TestMethod,
    pub setting_n_perm: usize,
    pub median_s: f64,
    pub std_s: f64,
    /// `median(method) / median(GLM)` at the same setting.
    pub speedup: f64,
    /// Paired tests of log-times against GLM; `None` for GLM or too few repeats.
    pub wilcoxon_p: Option<f64>,
    pub ttest_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparison {
    pub method: TestMethod,
    pub n_perm: usize,
    pub wilcoxon_p: f64,
    pub ttest_p: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub samples: Vec<BenchSample>,
    pub summary: Vec<BenchSummaryRow>,
    /// SHA-256 of the benchmark inputs.
    pub input_checksum: String,
    /// SHA-256 of the p-values of each (method, setting) run.
    pub output_digests: Vec<(TestMethod, usize, String)>,
    pub threads: usize,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_rep(h: &mut Sha256, rep: &BandRep) {
    h.update((rep.n_times() as u64).to_le_bytes());
    h.update((rep.n_bands() as u64).to_le_bytes());
    for band in rep.bands() {
        for c in band {
            h.update(c.re.to_bits().to_le_bytes());
            h.update(c.im.to_bits().to_le_bytes());
        }
    }
}

/// SHA-256 over the coefficient bits of the driver and every observation.
pub fn checksum(ax: &BandRep, ay_sub: &[BandRep]) -> String {
    let mut h = Sha256::new();
    hash_rep(&mut h, ax);
    for ay in ay_sub {
        hash_rep(&mut h, ay);
    }
    hex(&h.finalize())
}

pub fn digest_pvalues(p: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in p {
        h.update(v.to_bits().to_le_bytes());
    }
    hex(&h.finalize())
}

/// Surrogate configuration used for observation `index` of the bench set.
pub fn bench_surrogate_config(method: SurrogateMethod, n_perm: usize, seed: u64, index: usize) -> SurrogateConfig {
    SurrogateConfig {
        method,
        n_perm,
        seed,
        realization: index as u64,
        rule: PValueRule::PlusOne,
    }
}

/// All p-values one method produces over the bench set, in (observation, band) order.
pub fn method_pvalues(
    method: TestMethod,
    ax: &BandRep,
    ay_sub: &[BandRep],
    n_perm: usize,
    seed: u64,
    exec: Execution,
) -> CohResult<Vec<f64>> {
    let mut out = Vec::with_capacity(ay_sub.len() * ax.n_bands());
    for (i, ay) in ay_sub.iter().enumerate() {
        match method {
            TestMethod::Glm => out.extend(glm_spectrum(ax, ay)?.iter().map(|r| r.p_value)),
            TestMethod::Circ | TestMethod::Phase => {
                let m = if method == TestMethod::Circ {
                    SurrogateMethod::CircularShift
                } else {
                    SurrogateMethod::PhaseRandomize
                };
                let cfg = bench_surrogate_config(m, n_perm, seed, i);
                out.extend(surrogate_spectrum_with(ax, ay, &cfg, exec)?.iter().map(|r| r.p_value));
            }
        }
    }
    Ok(out)
}

pub fn run_bench(ax: &BandRep, ay_sub: &[BandRep], cfg: &BenchConfig, seed: u64) -> CohResult<BenchReport> {
    cfg.validate()?;
    if ay_sub.is_empty() {
        return Err(CohError::EmptyInput("no observations to benchmark".into()));
    }
    for ay in ay_sub {
        ax.check_same_shape(ay)?;
    }
    let exec = cfg.execution();
    let input_checksum = checksum(ax, ay_sub);
    let mut samples = Vec::new();
    let mut output_digests = Vec::new();
    for &n_perm in &cfg.n_perm_grid {
        for method in TestMethod::ALL {
            let mut last = Vec::new();
            for _ in 0..cfg.warmup {
                black_box(method_pvalues(method, ax, ay_sub, n_perm, seed, exec)?);
            }
            for repeat in 0..cfg.repeats {
                let start = Instant::now();
                last = black_box(method_pvalues(method, ax, ay_sub, n_perm, seed, exec)?);
                // clock resolution guard: seconds stay strictly positive
                let seconds = start.elapsed().as_secs_f64().max(1e-9);
                samples.push(BenchSample { method, n_perm, repeat, seconds });
            }
            output_digests.push((method, n_perm, digest_pvalues(&last)));
        }
    }
    let summary = summarize(&samples)?;
    Ok(BenchReport {
        samples,
        summary,
        input_checksum,
        output_digests,
        threads: exec.threads(),
    })
}

fn times(samples: &[BenchSample], method: TestMethod, n_perm: usize) -> Vec<f64> {
    let mut v: Vec<&BenchSample> = samples
        .iter()
        .filter(|s| s.method == method && s.n_perm == n_perm)
        .collect();
    v.sort_by_key(|s| s.repeat);
    v.iter().map(|s| s.seconds).collect()
}

fn settings(samples: &[BenchSample]) -> Vec<usize> {
    let mut g: Vec<usize> = samples.iter().map(|s| s.n_perm).collect();
    g.sort_unstable();
    g.dedup();
    g
}

/// Paired comparisons of log-times, each surrogate method against GLM, per setting.
pub fn significance_of_timings(samples: &[BenchSample]) -> CohResult<Vec<PairedComparison>> {
    let mut out = Vec::new();
    for n_perm in settings(samples) {
        let glm: Vec<f64> = times(samples, TestMethod::Glm, n_perm).iter().map(|t| t.ln()).collect();
        for method in [TestMethod::Circ, TestMethod::Phase] {
            let other: Vec<f64> = times(samples, method, n_perm).iter().map(|t| t.ln()).collect();
            let n = glm.len().min(other.len());
            if n < MIN_PAIRED_REPEATS {
                return Err(CohError::InsufficientData(format!(
                    "paired timing tests need {MIN_PAIRED_REPEATS} repeats, got {n}"
                )));
            }
            out.push(PairedComparison {
                method,
                n_perm,
                wilcoxon_p: wilcoxon_signed_rank(&glm[..n], &other[..n])?,
                ttest_p: paired_t_test(&glm[..n], &other[..n])?,
            });
        }
    }
    Ok(out)
}

/// Median, standard deviation and speedup per method and setting; paired
/// tests are filled in when there are enough repeats.
pub fn summarize(samples: &[BenchSample]) -> CohResult<Vec<BenchSummaryRow>> {
    let paired = significance_of_timings(samples).ok();
    let mut rows = Vec::new();
    for n_perm in settings(samples) {
        let glm_median = median(&times(samples, TestMethod::Glm, n_perm));
        for method in TestMethod::ALL {
            let t = times(samples, method, n_perm);
            if t.is_empty() {
                continue;
            }
            let test = paired
                .as_ref()
                .and_then(|v| v.iter().find(|c| c.method == method && c.n_perm == n_perm));
            let median_s = median(&t);
            rows.push(BenchSummaryRow {
                method,
                setting_n_perm: n_perm,
                median_s,
                std_s: std_dev(&t),
                speedup: median_s / glm_median,
                wilcoxon_p: test.map(|c| c.wilcoxon_p),
                ttest_p: test.map(|c| c.ttest_p),
            });
        }
    }
    Ok(rows)
}
