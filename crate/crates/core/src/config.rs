//! Run configuration, read from TOML. Every field has a default, so an empty
//! file (or no file) is a valid reduced-scale configuration.
//!
//! ```toml
//! seed = 1
//! output_dir = "out"
//!
//! [driver]
//! source = "synthetic"          # or { csv_file = "belt.csv" }
//! duration_s = 367.0
//! fs_hz = 250.0
//!
//! [bands]
//! bandwidth_hz = 0.2
//! upsample_fx = 3
//!
//! [sweep]
//! n_targets = 100               # or c_true_grid = [0.1, 0.2]
//!
//! [surrogate]
//! n_perm = 2000
//!
//! [analysis]
//! alpha = 0.05
//! control_freq_hz = 1.0
//!
//! [bench]
//! repeats = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::BinAxis;
use crate::bench::BenchConfig;
use crate::decompose::BandParams;
use crate::error::{CohError, CohResult};
use crate::sim::{interior_grid, DriverSpec, SweepConfig};
use crate::surrogate::PValueRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Size of the evenly spaced interior grid `k / (n + 1)`.
    pub n_targets: usize,
    /// Explicit targets; overrides `n_targets`.
    pub c_true_grid: Option<Vec<f64>>,
    /// Also write the band coefficients of the driver and every observation.
    pub keep_tensors: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { n_targets: 100, c_true_grid: None, keep_tensors: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub n_perm: usize,
    pub rule: PValueRule,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        Self { n_perm: 2000, rule: PValueRule::PlusOne }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub alpha: f64,
    pub bin_width: f64,
    pub control_freq_hz: f64,
    pub axis: BinAxis,
    /// Welch segment length and overlap for `psd.csv`.
    pub psd_segment_s: f64,
    pub psd_overlap: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bin_width: 0.025,
            control_freq_hz: 1.0,
            axis: BinAxis::Observed,
            psd_segment_s: 40.0,
            psd_overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub driver: DriverSpec,
    pub bands: BandParams,
    pub sweep: SweepSection,
    pub surrogate: SurrogateSection,
    pub analysis: AnalysisSection,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            driver: DriverSpec::default(),
            bands: BandParams::default(),
            sweep: SweepSection::default(),
            surrogate: SurrogateSection::default(),
            analysis: AnalysisSection::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> CohResult<Self> {
        toml::from_str(text).map_err(|e| CohError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CohResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CohError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative driver paths are resolved against the config file
        if let crate::sim::DriverSource::CsvFile(p) = &mut cfg.driver.source {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn c_true_grid(&self) -> Vec<f64> {
        self.sweep
            .c_true_grid
            .clone()
            .unwrap_or_else(|| interior_grid(self.sweep.n_targets))
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            c_true_grid: self.c_true_grid(),
            seed: self.seed,
            band_params: self.bands,
            n_perm: self.surrogate.n_perm,
            rule: self.surrogate.rule,
            control_freq_hz: Some(self.analysis.control_freq_hz),
            keep_tensors: self.sweep.keep_tensors,
        }
    }

    pub fn validate(&self) -> CohResult<()> {
        let wrap = |e: CohError| CohError::Config(e.to_string());
        self.driver.validate().map_err(wrap)?;
        self.bands.validate().map_err(wrap)?;
        self.sweep_config().validate().map_err(wrap)?;
        self.bench.validate().map_err(wrap)?;
        let a = &self.analysis;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(CohError::Config(format!("alpha must lie in (0, 1), got {}", a.alpha)));
        }
        if !(a.bin_width > 0.0 && a.bin_width <= 1.0) {
            return Err(CohError::Config(format!("bin_width must lie in (0, 1], got {}", a.bin_width)));
        }
        if !(a.psd_segment_s > 0.0 && (0.0..1.0).contains(&a.psd_overlap)) {
            return Err(CohError::Config("psd segment must be positive and overlap in [0, 1)".into()));
        }
        Ok(())
    }
}
