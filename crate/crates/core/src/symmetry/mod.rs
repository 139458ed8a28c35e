//! Descriptive statistics and mean-minus-median tests of symmetry with
//! p-values from a symmetrization bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::ShockKind;
use crate::rng::stream_rng;
use crate::stats::quantile_type1;
use crate::svg::SvgDoc;

pub const DEFAULT_BOOTSTRAP: usize = 4999;
pub const MIN_TEST_LEN: usize = 20;
pub const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub q80: f64,
}

/// Mean, `n - 1` standard deviation, moment skewness `m3 / m2^1.5` and the
/// inclusive 80th percentile.
pub fn sample_stats(x: &[f64]) -> Result<SampleStats> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    Ok(SampleStats {
        n,
        mean,
        sd: (m2 * nf / (nf - 1.0)).sqrt(),
        skewness,
        q80: quantile_type1(x, 0.8),
    })
}

/// Location summaries shared by the three statistics.
struct Summary {
    /// `mean - median`, summed so that reflected samples give exact zeros.
    gap: f64,
    sd: f64,
    /// `sqrt(π/2) · mean |x - median|`.
    j: f64,
}

/// `buf` is overwritten with the sorted sample.
fn summarize(buf: &mut [f64]) -> Summary {
    let n = buf.len();
    buf.sort_unstable_by(f64::total_cmp);
    let med = if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    };
    // Pair the order statistics from both ends; on a sample of the form
    // x ∪ -x every pair cancels exactly.
    let mut sum = 0.0;
    for i in 0..n / 2 {
        sum += buf[i] + buf[n - 1 - i];
    }
    if n % 2 == 1 {
        sum += buf[n / 2];
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    let mut abs_dev = 0.0;
    for i in 0..n.div_ceil(2) {
        let (a, b) = (buf[i], buf[n - 1 - i]);
        if i == n - 1 - i {
            ss += (a - mean).powi(2);
            abs_dev += (a - med).abs();
        } else {
            ss += (a - mean).powi(2) + (b - mean).powi(2);
            abs_dev += (a - med).abs() + (b - med).abs();
        }
    }
    Summary {
        gap: mean - med,
        sd: (ss / (n as f64 - 1.0)).sqrt(),
        j: (std::f64::consts::PI / 2.0).sqrt() * abs_dev / n as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTests {
    /// `sqrt(n) (mean - median) / sd`.
    pub cm: TestResult,
    /// `sqrt(n) (mean - median) / J`.
    pub m1: TestResult,
    /// `2 (mean - median)` over its bootstrap standard deviation.
    pub m2: TestResult,
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapOptions {
    pub replications: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replications: DEFAULT_BOOTSTRAP,
            seed: 0,
        }
    }
}

fn check_testable(x: &[f64]) -> Result<()> {
    if x.len() < MIN_TEST_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_TEST_LEN,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("symmetry test sample contains non-finite values".into()));
    }
    Ok(())
}

pub fn cm_statistic(x: &[f64]) -> Result<f64> {
    check_testable(x)?;
    let s = summarize(&mut x.to_vec());
    if s.sd == 0.0 {
        return Err(Error::DegenerateVariance(0.0));
    }
    Ok((x.len() as f64).sqrt() * s.gap / s.sd)
}

pub fn mgg_statistic(x: &[f64]) -> Result<f64> {
    check_testable(x)?;
    let s = summarize(&mut x.to_vec());
    if s.j == 0.0 {
        return Err(Error::DegenerateVariance(0.0));
    }
    Ok((x.len() as f64).sqrt() * s.gap / s.j)
}

/// Runs all three tests on shared bootstrap resamples drawn from the
/// sample reflected about its median. Replicate `b` uses stream `b` of
/// `opts.seed`, so results do not depend on thread scheduling.
pub fn symmetry_tests(x: &[f64], opts: BootstrapOptions) -> Result<SymmetryTests> {
    check_testable(x)?;
    if opts.replications == 0 {
        return Err(Error::Invalid("bootstrap needs at least one replication".into()));
    }
    let n = x.len();
    let rootn = (n as f64).sqrt();
    let observed = summarize(&mut x.to_vec());
    if observed.sd == 0.0 || observed.j == 0.0 {
        return Err(Error::DegenerateVariance(0.0));
    }
    let med = crate::stats::median(x);
    // Interleaved so that reflecting the data maps each pool entry to its
    // own negative.
    let pool: Vec<f64> = x.iter().flat_map(|v| [v - med, -(v - med)]).collect();

    let draws: Vec<(f64, f64, f64)> = (0..opts.replications as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, b| {
                let mut rng = stream_rng(opts.seed, b);
                for slot in buf.iter_mut() {
                    *slot = pool[rng.random_range(0..pool.len())];
                }
                let s = summarize(buf);
                let cm = if s.sd > 0.0 { rootn * s.gap / s.sd } else { 0.0 };
                let m1 = if s.j > 0.0 { rootn * s.gap / s.j } else { 0.0 };
                (cm, m1, 2.0 * s.gap)
            },
        )
        .collect();

    let b = draws.len() as f64;
    let gamma_mean = draws.iter().map(|d| d.2).sum::<f64>() / b;
    let gamma_sd = (draws.iter().map(|d| (d.2 - gamma_mean).powi(2)).sum::<f64>() / (b - 1.0).max(1.0)).sqrt();

    let cm = rootn * observed.gap / observed.sd;
    let m1 = rootn * observed.gap / observed.j;
    let gamma = 2.0 * observed.gap;
    let m2 = if gamma_sd > 0.0 { gamma / gamma_sd } else { 0.0 };

    let p = |stat: f64, pick: fn(&(f64, f64, f64)) -> f64| {
        let exceed = draws.iter().filter(|d| pick(d).abs() >= stat.abs()).count();
        (1.0 + exceed as f64) / (b + 1.0)
    };
    Ok(SymmetryTests {
        cm: TestResult {
            statistic: cm,
            p_value: p(cm, |d| d.0),
        },
        m1: TestResult {
            statistic: m1,
            p_value: p(m1, |d| d.1),
        },
        m2: TestResult {
            statistic: m2,
            p_value: p(gamma, |d| d.2),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSymmetry {
    pub shock: ShockKind,
    pub stats: SampleStats,
    pub tests: SymmetryTests,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub seed: u64,
    pub replications: usize,
    pub shocks: Vec<ShockSymmetry>,
}

/// Statistics and tests for each shock's monthly series.
pub fn symmetry_report(series: &[(ShockKind, Vec<f64>)], opts: BootstrapOptions) -> Result<SymmetryReport> {
    let shocks = series
        .iter()
        .map(|(kind, x)| {
            Ok(ShockSymmetry {
                shock: *kind,
                stats: sample_stats(x)?,
                tests: symmetry_tests(x, opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetryReport {
        seed: opts.seed,
        replications: opts.replications,
        shocks,
    })
}

/// Equal-width bin counts over `[min, max]`; the maximum falls in the last bin.
pub fn histogram(x: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0; bins];
    if !lo.is_finite() || bins == 0 {
        return (0.0, 0.0, counts);
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    for v in x {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    (lo, hi, counts)
}

/// One histogram panel per series, side by side.
pub fn histogram_svg(series: &[(ShockKind, Vec<f64>)]) -> String {
    let (pw, ph, margin) = (260.0, 200.0, 30.0);
    let mut doc = SvgDoc::new(pw * series.len() as f64 + margin, ph + 2.0 * margin);
    for (k, (kind, x)) in series.iter().enumerate() {
        let x0 = margin + k as f64 * pw;
        let (lo, hi, counts) = histogram(x, HISTOGRAM_BINS);
        let top = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let bw = (pw - 20.0) / HISTOGRAM_BINS as f64;
        doc.text(x0 + (pw - 20.0) / 2.0, margin - 10.0, 12.0, "middle", kind.name());
        for (i, c) in counts.iter().enumerate() {
            let h = (ph - 20.0) * *c as f64 / top;
            doc.rect(x0 + i as f64 * bw, margin + ph - 20.0 - h, bw, h, "#4c72b0", "#ffffff");
        }
        doc.line(x0, margin + ph - 20.0, x0 + pw - 20.0, margin + ph - 20.0, "#000000", 1.0);
        doc.text(x0, margin + ph - 5.0, 9.0, "start", &format!("{lo:.2}"));
        doc.text(x0 + pw - 20.0, margin + ph - 5.0, 9.0, "end", &format!("{hi:.2}"));
    }
    doc.finish()
}
