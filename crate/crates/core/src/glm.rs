//! Complex linear model likelihood-ratio test.
//!
//! Per band, `y = beta x + e` is fitted by complex least squares. The null
//! model fixes `beta = 0`. With residuals `r_k` (k = 0 null, k = 1 full):
//!
//! ```text
//! G_k = sum_t |r_kt|^2          Q_k = sum_t r_kt^2          P_k = (G_k^2 - |Q_k|^2) / G_k
//! D   = T [ ln(G_0 / G_1) + ln((P_0 + eps) / (P_1 + eps)) ]
//! p   = exp(-D / 2)                                     (chi-square, 2 df)
//! ```
//!
//! `Q_k` is the complex square (pseudo-covariance), not `|r|^2`; with it `D`
//! equals `T ln(det S_0 / det S_1)` for the 2x2 real covariance `S_k` of the
//! residuals, i.e. the bivariate Gaussian likelihood ratio.

use num_complex::Complex64;

use crate::coherence::DEFAULT_EPS;
use crate::decompose::BandRep;
use crate::error::{CohError, CohResult};

/// Degrees of freedom of the test: real and imaginary part of `beta`.
pub const GLM_DF: u32 = 2;

/// Least-squares fit of one band.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub beta: Complex64,
    pub residuals_null: Vec<Complex64>,
    pub residuals_full: Vec<Complex64>,
    pub g0: f64,
    pub g1: f64,
    pub q0: Complex64,
    pub q1: Complex64,
    pub p0: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmTestResult {
    pub deviance: f64,
    pub p_value: f64,
    pub df: u32,
}

/// `(G, Q, P)` of one residual vector.
fn residual_moments(r: &[Complex64]) -> (f64, Complex64, f64) {
    let g: f64 = r.iter().map(|c| c.norm_sqr()).sum();
    let q: Complex64 = r.iter().map(|c| c * c).sum();
    let p = if g > 0.0 { (g * g - q.norm_sqr()) / g } else { 0.0 };
    (g, q, p.max(0.0))
}

fn check_inputs(x: &[Complex64], y: &[Complex64]) -> CohResult<()> {
    if x.len() != y.len() {
        return Err(CohError::ShapeMismatch(format!(
            "predictor has {} samples, response {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(CohError::TooFewSamples { need: 3, got: x.len() });
    }
    Ok(())
}

pub fn fit(x: &[Complex64], y: &[Complex64]) -> CohResult<GlmFit> {
    check_inputs(x, y)?;
    let sxx: f64 = x.iter().map(|c| c.norm_sqr()).sum();
    if sxx == 0.0 {
        return Err(CohError::DegeneratePredictor);
    }
    let sxy: Complex64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    let beta = sxy / sxx;
    let residuals_full: Vec<Complex64> = x.iter().zip(y).map(|(a, b)| b - beta * a).collect();
    let residuals_null = y.to_vec();
    let (g0, q0, p0) = residual_moments(&residuals_null);
    let (g1, q1, p1) = residual_moments(&residuals_full);
    Ok(GlmFit {
        beta,
        residuals_null,
        residuals_full,
        g0,
        g1,
        q0,
        q1,
        p0,
        p1,
    })
}

/// Deviance of a fit over `t` samples, using the default `eps`.
pub fn deviance(fit: &GlmFit, t: usize) -> f64 {
    deviance_from_moments(fit.g0, fit.g1, fit.p0, fit.p1, t, DEFAULT_EPS)
}

/// Deviance from the residual moments. A zero `G` is replaced by `eps`, and
/// the result is clamped at zero.
pub fn deviance_from_moments(g0: f64, g1: f64, p0: f64, p1: f64, t: usize, eps: f64) -> f64 {
    let g0 = if g0 == 0.0 { eps } else { g0 };
    let g1 = if g1 == 0.0 { eps } else { g1 };
    let d = t as f64 * ((g0 / g1).ln() + ((p0 + eps) / (p1 + eps)).ln());
    d.max(0.0)
}

/// Smallest reported p-value. `exp(-D/2)` underflows to zero for `D` above
/// about 1490; p-values stay strictly positive.
pub const P_VALUE_FLOOR: f64 = f64::MIN_POSITIVE;

#[inline]
fn reported_p(deviance: f64) -> f64 {
    chi2_2_sf(deviance).max(P_VALUE_FLOOR)
}

/// Chi-square (2 df) upper tail: `exp(-D/2)`.
#[inline]
pub fn chi2_2_sf(deviance: f64) -> f64 {
    (-0.5 * deviance).exp()
}

pub fn glm_pvalue(x: &[Complex64], y: &[Complex64]) -> CohResult<GlmTestResult> {
    let f = fit(x, y)?;
    let d = deviance(&f, x.len());
    Ok(GlmTestResult { deviance: d, p_value: reported_p(d), df: GLM_DF })
}

/// Allocation-free version of [`glm_pvalue`] used in the per-band loops.
/// A zero predictor gives `D = 0`, `p = 1`.
pub(crate) fn glm_band(x: &[Complex64], y: &[Complex64]) -> GlmTestResult {
    let mut sxx = 0.0;
    let mut sxy = Complex64::new(0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += a.norm_sqr();
        sxy += a.conj() * b;
    }
    if sxx == 0.0 {
        return GlmTestResult { deviance: 0.0, p_value: 1.0, df: GLM_DF };
    }
    let beta = sxy / sxx;
    let (mut g0, mut q0, mut g1, mut q1) = (0.0, Complex64::new(0.0, 0.0), 0.0, Complex64::new(0.0, 0.0));
    for (a, b) in x.iter().zip(y) {
        let r = b - beta * a;
        g0 += b.norm_sqr();
        q0 += b * b;
        g1 += r.norm_sqr();
        q1 += r * r;
    }
    let p = |g: f64, q: Complex64| if g > 0.0 { ((g * g - q.norm_sqr()) / g).max(0.0) } else { 0.0 };
    let d = deviance_from_moments(g0, g1, p(g0, q0), p(g1, q1), x.len(), DEFAULT_EPS);
    GlmTestResult { deviance: d, p_value: reported_p(d), df: GLM_DF }
}

/// Column-wise GLM test. Bands whose predictor is identically zero report
/// `D = 0`, `p = 1`.
pub fn glm_spectrum(x: &BandRep, y: &BandRep) -> CohResult<Vec<GlmTestResult>> {
    x.check_same_shape(y)?;
    if x.n_times() < 3 {
        return Err(CohError::TooFewSamples { need: 3, got: x.n_times() });
    }
    Ok(x.bands().iter().zip(y.bands()).map(|(a, b)| glm_band(a, b)).collect())
}

/// GLM test at one band.
pub fn glm_at(x: &BandRep, y: &BandRep, band_index: usize) -> CohResult<GlmTestResult> {
    x.check_same_shape(y)?;
    glm_pvalue(x.band(band_index)?, y.band(band_index)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_uniform;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cgauss(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect()
    }

    /// Direct evaluation of the residual sums and the deviance with explicit loops.
    fn deviance_oracle(x: &[Complex64], y: &[Complex64], beta: Complex64) -> (f64, f64, f64, f64, f64) {
        let eps = f64::EPSILON;
        let mut g = [0.0; 2];
        let mut q = [c(0.0, 0.0); 2];
        for t in 0..x.len() {
            let r = [y[t], y[t] - beta * x[t]];
            for k in 0..2 {
                g[k] += r[k].re * r[k].re + r[k].im * r[k].im;
                q[k] += c(r[k].re * r[k].re - r[k].im * r[k].im, 2.0 * r[k].re * r[k].im);
            }
        }
        let p: Vec<f64> = (0..2)
            .map(|k| if g[k] > 0.0 { (g[k] * g[k] - q[k].norm_sqr()) / g[k] } else { 0.0 })
            .collect();
        let d = x.len() as f64 * ((g[0] / g[1]).ln() + ((p[0] + eps) / (p[1] + eps)).ln());
        (g[0], g[1], p[0], p[1], d.max(0.0))
    }

    /// Least-squares beta by exhaustive search over a grid, refined twice.
    fn beta_oracle(x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let sse = |b: Complex64| -> f64 { x.iter().zip(y).map(|(a, v)| (v - b * a).norm_sqr()).sum() };
        let (mut center, mut half) = (c(0.0, 0.0), 4.0);
        for _ in 0..3 {
            let steps = 400;
            let mut best = (f64::INFINITY, center);
            for i in 0..=steps {
                for j in 0..=steps {
                    let b = center
                        + c(
                            -half + 2.0 * half * i as f64 / steps as f64,
                            -half + 2.0 * half * j as f64 / steps as f64,
                        );
                    let s = sse(b);
                    if s < best.0 {
                        best = (s, b);
                    }
                }
            }
            center = best.1;
            half *= 4.0 / steps as f64;
        }
        center
    }

    #[test]
    fn toy_example_matches_oracles() {
        let x = [c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)];
        let y = [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let f = fit(&x, &y).unwrap();
        assert!((f.beta - c(0.5, -0.5)).norm() < 1e-15);
        assert!((beta_oracle(&x, &y) - f.beta).norm() < 1e-4);
        let (g0, g1, p0, p1, d) = deviance_oracle(&x, &y, f.beta);
        assert!((f.g0 - g0).abs() < 1e-15 && (f.g1 - g1).abs() < 1e-15);
        assert!((f.p0 - p0).abs() < 1e-15 && (f.p1 - p1).abs() < 1e-15);
        // y is real, so the null residuals are maximally improper: P_0 = 0 and
        // the raw deviance is negative before clamping.
        assert_eq!((f.g0, f.g1, f.p0, f.p1), (2.0, 1.0, 0.0, 1.0));
        assert_eq!(f.q1, c(0.0, 0.0));
        assert_eq!(deviance(&f, 3), d);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn random_fits_match_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = cgauss(&mut rng, 6);
            let y: Vec<Complex64> = cgauss(&mut rng, 6)
                .into_iter()
                .zip(&x)
                .map(|(e, a)| a * c(0.7, -0.3) + e * 0.5)
                .collect();
            let f = fit(&x, &y).unwrap();
            assert!((beta_oracle(&x, &y) - f.beta).norm() < 1e-4);
            let (.., d) = deviance_oracle(&x, &y, f.beta);
            assert!((deviance(&f, 6) - d).abs() < 1e-9 * d.max(1.0));
            assert_eq!(glm_band(&x, &y).deviance, deviance(&f, 6));
        }
    }

    #[test]
    fn perfect_fit_and_orthogonal_cases() {
        let x = [c(1.0, 0.5), c(-0.3, 2.0), c(0.7, -1.1), c(0.2, 0.2)];
        let y: Vec<_> = x.iter().map(|v| v * 2.0).collect();
        let f = fit(&x, &y).unwrap();
        assert!((f.beta - c(2.0, 0.0)).norm() < 1e-15);
        assert!(f.g1 < 1e-28);
        let r = glm_pvalue(&x, &y).unwrap();
        assert!(r.deviance.is_finite() && r.deviance > 100.0);

        let x = [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let y = [c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
        let f = fit(&x, &y).unwrap();
        assert_eq!(f.beta, c(0.0, 0.0));
        assert_eq!(f.residuals_full, y.to_vec());
        let r = glm_pvalue(&x, &y).unwrap();
        assert_eq!((r.deviance, r.p_value, r.df), (0.0, 1.0, 2));
    }

    #[test]
    fn exact_g1_zero_is_guarded() {
        let d = deviance_from_moments(5.0, 0.0, 4.0, 0.0, 3, f64::EPSILON);
        assert!(d.is_finite() && d > 100.0);
        assert_eq!(deviance_from_moments(0.0, 0.0, 0.0, 0.0, 10, f64::EPSILON), 0.0);
    }

    #[test]
    fn errors() {
        let z = [c(0.0, 0.0); 4];
        let y = [c(1.0, 0.0); 4];
        assert!(matches!(fit(&z, &y), Err(CohError::DegeneratePredictor)));
        assert!(matches!(fit(&y[..3], &y), Err(CohError::ShapeMismatch(_))));
        assert!(matches!(fit(&y[..2], &y[..2]), Err(CohError::TooFewSamples { .. })));
    }

    #[test]
    fn p_value_closed_form() {
        assert_eq!(chi2_2_sf(0.0), 1.0);
        assert!((chi2_2_sf(2.0 * 20f64.ln()) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn null_deviance_is_chi2_2() {
        let t = 148;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = cgauss(&mut rng, t);
        let mut ds = Vec::with_capacity(10_000);
        let mut ps = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            let y = cgauss(&mut rng, t);
            let r = glm_pvalue(&x, &y).unwrap();
            ds.push(r.deviance);
            ps.push(r.p_value);
        }
        let mean = ds.iter().sum::<f64>() / ds.len() as f64;
        let var = ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (ds.len() - 1) as f64;
        assert!((1.8..=2.2).contains(&mean), "mean {mean}");
        assert!((3.4..=4.6).contains(&var), "var {var}");
        let ks = ks_uniform(&ps);
        assert!(ks < 0.02, "ks {ks}");
    }

    #[test]
    fn spectrum_applies_columnwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cols: Vec<Vec<Complex64>> = (0..4).map(|_| cgauss(&mut rng, 50)).collect();
        let x = BandRep::new(cols.clone(), vec![0.1, 0.2, 0.3, 0.4], 1.0).unwrap();
        let spec = glm_spectrum(&x, &x).unwrap();
        assert!(spec.iter().all(|r| r.p_value < 1e-100));
        let ycols: Vec<Vec<Complex64>> = (0..4).map(|_| cgauss(&mut rng, 50)).collect();
        let y = BandRep::new(ycols, vec![0.1, 0.2, 0.3, 0.4], 1.0).unwrap();
        let spec = glm_spectrum(&x, &y).unwrap();
        for k in 0..4 {
            assert_eq!(spec[k], glm_at(&x, &y, k).unwrap());
        }
        let short = BandRep::new(vec![vec![c(1.0, 0.0); 50]], vec![0.1], 1.0).unwrap();
        assert!(matches!(glm_spectrum(&x, &short), Err(CohError::ShapeMismatch(_))));
    }

    #[test]
    fn null_false_positive_rate_across_bands() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (mut hits, mut total) = (0usize, 0usize);
        for _ in 0..200 {
            let xc: Vec<Vec<Complex64>> = (0..25).map(|_| cgauss(&mut rng, 146)).collect();
            let yc: Vec<Vec<Complex64>> = (0..25).map(|_| cgauss(&mut rng, 146)).collect();
            let centers: Vec<f64> = (0..25).map(|k| 0.05 * k as f64).collect();
            let x = BandRep::new(xc, centers.clone(), 1.0).unwrap();
            let y = BandRep::new(yc, centers, 1.0).unwrap();
            for r in glm_spectrum(&x, &y).unwrap() {
                hits += usize::from(r.p_value < 0.05);
                total += 1;
            }
        }
        let rate = hits as f64 / total as f64;
        assert!((0.04..=0.06).contains(&rate), "rate {rate}");
    }

    fn series(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), len)
            .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
    }

    proptest! {
        #[test]
        fn determinant_identity_and_scale_equivariance(
            x in series(12),
            y in series(12),
            scale in (0.1f64..10.0, 0.0f64..std::f64::consts::TAU),
        ) {
            prop_assume!(x.iter().any(|v| v.norm() > 1e-3));
            let f = fit(&x, &y).unwrap();
            let d = deviance(&f, 12);
            if f.p0 > 1e-6 && f.p1 > 1e-6 {
                let det = |g: f64, q: Complex64| g * g - q.norm_sqr();
                let alt = 12.0 * (det(f.g0, f.q0) / det(f.g1, f.q1)).ln();
                prop_assert!((d - alt.max(0.0)).abs() <= 1e-9 * alt.abs().max(1.0));
            }
            let s = Complex64::from_polar(scale.0, scale.1);
            let ys: Vec<_> = y.iter().map(|v| v * s).collect();
            let ds = deviance(&fit(&x, &ys).unwrap(), 12);
            prop_assert!((ds - d).abs() <= 1e-9 * d.max(1.0));
            let p = chi2_2_sf(d);
            prop_assert!(p > 0.0 && p <= 1.0);
        }

        #[test]
        fn p_strictly_decreasing(a in 0.0f64..500.0, b in 0.0f64..500.0) {
            prop_assume!(a < b);
            prop_assert!(chi2_2_sf(a) > chi2_2_sf(b) || chi2_2_sf(b) == 0.0);
        }
    }
}
