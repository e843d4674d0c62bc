//! Small statistical helpers: summaries, KS statistics and paired tests.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CohError, CohResult};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of a two-sample KS statistic.
pub fn ks_two_sample_pvalue(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Exact two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped; tied magnitudes get average ranks. The null
/// distribution of the positive rank sum is enumerated exactly over all
/// `2^n` sign assignments (by dynamic programming on doubled ranks).
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> CohResult<f64> {
    if a.len() != b.len() {
        return Err(CohError::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(1.0);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    // doubled ranks keep average ranks integral
    let mut rank2 = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        for k in i..=j {
            rank2[order[k]] = r2;
        }
        i = j + 1;
    }
    let total: u64 = rank2.iter().sum();
    let observed: u64 = (0..n).filter(|&k| diffs[k] > 0.0).map(|k| rank2[k]).sum();

    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    for &r in &rank2 {
        for s in (r as usize..=total as usize).rev() {
            counts[s] += counts[s - r as usize];
        }
    }
    let all = 2f64.powi(n as i32);
    let lower: f64 = counts[..=observed as usize].iter().sum::<f64>() / all;
    let upper: f64 = counts[observed as usize..].iter().sum::<f64>() / all;
    Ok((2.0 * lower.min(upper)).min(1.0))
}

/// Two-sided paired t-test p-value.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> CohResult<f64> {
    if a.len() != b.len() {
        return Err(CohError::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(CohError::InsufficientData("paired t-test needs 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let s = std_dev(&d);
    if s == 0.0 {
        return Ok(if m == 0.0 { 1.0 } else { 0.0 });
    }
    let t = m / (s / (d.len() as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64)
        .map_err(|e| CohError::InvalidParams(e.to_string()))?;
    Ok((2.0 * dist.cdf(-t.abs())).min(1.0))
}
