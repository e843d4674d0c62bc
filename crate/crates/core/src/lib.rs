//! Significance tests for band-limited spectral coherence.
//!
//! Signals are decomposed into overlapping complex narrowband coefficients
//! ([`decompose`]), coherence is measured per band ([`coherence`]), and its
//! significance is assessed either parametrically with a complex linear model
//! likelihood-ratio test ([`glm`]) or with circular-shift / phase-randomized
//! surrogates ([`surrogate`]). [`sim`] generates calibrated driver/observation
//! sweeps, [`analysis`] turns them into power, ROC and agreement summaries and
//! [`bench`] times the three tests against each other.

pub mod analysis;
pub mod bench;
pub mod cli;
pub mod coherence;
pub mod config;
pub mod decompose;
pub mod error;
pub mod glm;
pub mod io;
pub mod par;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod surrogate;

pub use coherence::{coherence, coherence_at, CoherenceSpectrum};
pub use decompose::{band_power, decompose, peak_frequency, BandParams, BandRep, Decomposer, Signal, Taper};
pub use error::{CohError, CohResult};
pub use glm::{fit, glm_pvalue, glm_spectrum, GlmFit, GlmTestResult};
pub use par::Execution;
pub use surrogate::{
    circ_shift, phase_randomize, surrogate_pvalue, surrogate_spectrum, PValueRule, SurrogateConfig,
    SurrogateMethod, SurrogateTestResult,
};
