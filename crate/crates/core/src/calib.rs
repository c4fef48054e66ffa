//! Gain calibration from the Fano-factor line and unit re-binning.
//!
//! For a linear detector with constant gain `γ` and Bernoulli detection with
//! efficiency `η`, the output voltages obey `v̄ = γηn̄` and
//! `σ²(v) = γ²(η²σ²(n) + η(1−η)n̄)`, so the voltage Fano factor is the line
//! `F_v = (Q/n̄)·v̄ + γ` in `v̄` with the Mandel parameter `Q` in the slope.
//! Scanning `η` and fitting that line gives `γ` as the intercept using only
//! the field under test.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Residual mass below which theoretical distributions are truncated.
pub const TRUNCATION_MASS: f64 = 1e-12;

/// Mean voltages below this are treated as zero when building Fano points.
pub const DEFAULT_MIN_MEAN_VOLTAGE: f64 = 10.0 * f64::EPSILON;

/// One efficiency setting of a calibration scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoPoint {
    pub mean_voltage: f64,
    pub fano: f64,
    pub shot_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exclusion {
    TooFewShots,
    ZeroMean,
}

/// Fano points of a scan plus the groups that were dropped and why.
#[derive(Debug, Clone, PartialEq)]
pub struct FanoScan {
    pub points: Vec<FanoPoint>,
    pub excluded: Vec<(usize, Exclusion)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoOptions {
    pub min_mean_voltage: f64,
    pub min_shots: usize,
}

impl Default for FanoOptions {
    fn default() -> Self {
        Self {
            min_mean_voltage: DEFAULT_MIN_MEAN_VOLTAGE,
            min_shots: 2,
        }
    }
}

/// Sample mean and unbiased sample variance (two-pass).
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Fano points for voltage groups, one group per efficiency.
pub fn fano_points<G: AsRef<[f64]>>(groups: &[G]) -> Result<FanoScan> {
    fano_points_with(groups, FanoOptions::default())
}

pub fn fano_points_with<G: AsRef<[f64]>>(groups: &[G], opts: FanoOptions) -> Result<FanoScan> {
    if groups.iter().all(|g| g.as_ref().is_empty()) {
        return Err(Error::EmptyInput("no voltages in any efficiency group"));
    }
    let min_shots = opts.min_shots.max(2);
    let mut points = Vec::with_capacity(groups.len());
    let mut excluded = Vec::new();
    for (k, g) in groups.iter().enumerate() {
        let v = g.as_ref();
        if v.len() < min_shots {
            log::debug!("efficiency group {k}: {} shots, excluded", v.len());
            excluded.push((k, Exclusion::TooFewShots));
            continue;
        }
        let (mean, var) = mean_and_variance(v);
        if !(mean >= opts.min_mean_voltage) {
            log::debug!("efficiency group {k}: mean voltage {mean}, excluded");
            excluded.push((k, Exclusion::ZeroMean));
            continue;
        }
        points.push(FanoPoint {
            mean_voltage: mean,
            fano: var / mean,
            shot_count: v.len(),
        });
    }
    Ok(FanoScan { points, excluded })
}

/// Outcome of a Fano-line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Intercept: volts per detected photon.
    pub gamma: f64,
    /// `Q/n̄` of the field under test.
    pub slope: f64,
    pub residual_rms: f64,
    pub points_used: usize,
}

/// Weighted least-squares line `F_v = slope·v̄ + γ`, weights proportional to shot counts.
pub fn fit_gamma(points: &[FanoPoint]) -> Result<CalibrationResult> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.mean_voltage).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            what: "Fano points with distinct mean voltage",
            needed: 3,
            got: distinct.len(),
        });
    }

    let w_sum: f64 = points.iter().map(|p| p.shot_count as f64).sum();
    let x_bar = points
        .iter()
        .map(|p| p.shot_count as f64 * p.mean_voltage)
        .sum::<f64>()
        / w_sum;
    let y_bar = points
        .iter()
        .map(|p| p.shot_count as f64 * p.fano)
        .sum::<f64>()
        / w_sum;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in points {
        let w = p.shot_count as f64;
        let dx = p.mean_voltage - x_bar;
        sxx += w * dx * dx;
        sxy += w * dx * (p.fano - y_bar);
    }
    let slope = sxy / sxx;
    let gamma = y_bar - slope * x_bar;
    let residual_rms = (points
        .iter()
        .map(|p| {
            let r = p.fano - (slope * p.mean_voltage + gamma);
            p.shot_count as f64 * r * r
        })
        .sum::<f64>()
        / w_sum)
        .sqrt();

    if !(gamma > 0.0) {
        return Err(Error::CalibrationFailed {
            gamma,
            slope,
            residual_rms,
            points_used: points.len(),
        });
    }
    Ok(CalibrationResult {
        gamma,
        slope,
        residual_rms,
        points_used: points.len(),
    })
}

/// Normalized detected-photon distribution `p̄_m`, `m = 0..=m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonHistogram {
    probs: Vec<f64>,
    mean: f64,
    total_shots: usize,
}

impl PhotonHistogram {
    /// Empirical histogram from bin counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyInput("histogram with zero counts"));
        }
        let mut probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        trim_trailing_zeros(&mut probs);
        Ok(Self::build(probs, total as usize))
    }

    /// Distribution from explicit probabilities, which must lie in `[0, 1]`
    /// and sum to at most 1 (a deficit is the truncated tail mass).
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("empty probability list"));
        }
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain {
                name: "probability",
                value: p,
                domain: "[0, 1]",
            });
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::Domain {
                name: "total probability",
                value: total,
                domain: "[0, 1]",
            });
        }
        Ok(Self::build(probs, 0))
    }

    /// Poisson(`mean`) truncated once the remaining tail mass is below [`TRUNCATION_MASS`].
    pub fn poisson(mean: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(Error::Domain {
                name: "poisson mean",
                value: mean,
                domain: "[0, ∞)",
            });
        }
        if mean == 0.0 {
            return Ok(Self::build(vec![1.0], 0));
        }
        let ln_mu = mean.ln();
        let mut probs = Vec::new();
        let mut ln_p = -mean;
        let mut m = 0usize;
        loop {
            let p = ln_p.exp();
            probs.push(p);
            // Tail after m is bounded by a geometric series once m + 1 > mean.
            let ratio = mean / (m + 2) as f64;
            let next = p * mean / (m + 1) as f64;
            if (m + 1) as f64 > mean && ratio < 1.0 && next / (1.0 - ratio) < TRUNCATION_MASS {
                break;
            }
            m += 1;
            ln_p += ln_mu - (m as f64).ln();
        }
        Ok(Self::build(probs, 0))
    }

    fn build(probs: Vec<f64>, total_shots: usize) -> Self {
        let mean = probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        Self {
            probs,
            mean,
            total_shots,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Number of shots behind an empirical histogram, 0 for model distributions.
    pub fn total_shots(&self) -> usize {
        self.total_shots
    }

    pub fn m_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability not assigned to any bin (truncated tail). Always 0 for
    /// empirical histograms, where every shot lands in a bin.
    pub fn tail_mass(&self) -> f64 {
        if self.total_shots > 0 {
            return 0.0;
        }
        (1.0 - self.probs.iter().sum::<f64>()).max(0.0)
    }

    pub fn prob(&self, m: usize) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }
}

fn trim_trailing_zeros(probs: &mut Vec<f64>) {
    while probs.len() > 1 && probs.last() == Some(&0.0) {
        probs.pop();
    }
}

/// Detected-photon bin of one voltage: `⌊v/γ + ½⌋`, negatives clamped to 0.
pub fn photon_bin(v: f64, gamma: f64) -> usize {
    let m = (v / gamma + 0.5).floor();
    if m > 0.0 {
        m as usize
    } else {
        0
    }
}

/// Divides voltages by `gamma` and re-bins them into unit-width photon bins.
pub fn rebin(voltages: &[f64], gamma: f64) -> Result<PhotonHistogram> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain {
            name: "gamma",
            value: gamma,
            domain: "(0, ∞)",
        });
    }
    let mut counts: Vec<u64> = Vec::new();
    for &v in voltages {
        let m = photon_bin(v, gamma);
        if m >= counts.len() {
            counts.resize(m + 1, 0);
        }
        counts[m] += 1;
    }
    PhotonHistogram::from_counts(&counts)
}

/// Binomial thinning of a photon-number distribution by efficiency `eta`:
/// `p̄_m = Σ_{n≥m} C(n,m) η^m (1−η)^{n−m} p_n`.
pub fn bernoulli_convolve(hist: &PhotonHistogram, eta: f64) -> Result<PhotonHistogram> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            domain: "[0, 1]",
        });
    }
    let p = hist.probs();
    if eta == 1.0 {
        return Ok(PhotonHistogram {
            probs: p.to_vec(),
            ..hist.clone()
        });
    }
    if eta == 0.0 {
        let kept: f64 = p.iter().sum();
        return Ok(PhotonHistogram {
            probs: vec![kept],
            mean: 0.0,
            total_shots: hist.total_shots,
        });
    }

    let n_max = p.len() - 1;
    let (ln_eta, ln_q) = (eta.ln(), (-eta).ln_1p());
    let mut ln_fact = Vec::with_capacity(n_max + 1);
    ln_fact.push(0.0);
    for n in 1..=n_max {
        ln_fact.push(ln_fact[n - 1] + (n as f64).ln());
    }
    let mut out = vec![0.0; n_max + 1];
    for (n, &pn) in p.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        for (m, slot) in out.iter_mut().enumerate().take(n + 1) {
            let ln_b = ln_fact[n] - ln_fact[m] - ln_fact[n - m]
                + m as f64 * ln_eta
                + (n - m) as f64 * ln_q;
            *slot += ln_b.exp() * pn;
        }
    }
    trim_trailing_zeros(&mut out);
    Ok(PhotonHistogram::build(out, hist.total_shots))
}
