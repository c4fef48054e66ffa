//! Synthetic displaced-state photon-counting experiments.
//!
//! Conventions: the signal amplitude `β₀` is real and nonnegative, and the
//! probe enters the beam splitter with amplitude `√I·e^{iθ}` where `I` is the
//! configured detected probe intensity and `θ` the probe phase relative to the
//! signal. The detected field is `β₀ + √ξ·probe` plus an unmatched probe
//! fraction, so the phase-space point sampled is `β = −probe` and the mean
//! detected photon number is [`displaced_mean`]`(β, β₀, ξ)`. Bright fringes
//! (maximum mean voltage) occur at `θ = 0`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::{par, ComplexAmplitude, Error, Result};

/// Default standard deviation of the per-step piezo phase error, radians.
pub const DEFAULT_PIEZO_JITTER_SD: f64 = 0.15;

const STREAM_SHOTS: u64 = 0x5348_4f54;
const STREAM_JITTER: u64 = 0x4a49_5454;

fn default_jitter() -> f64 {
    DEFAULT_PIEZO_JITTER_SD
}

/// Parameters of one simulated acquisition campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Signal amplitude `β₀` as detected at `eta_max`. Must be real and ≥ 0.
    pub signal_amplitude: ComplexAmplitude,
    /// Detected probe intensities `|β|²` at `eta_max`, one fringe series each.
    pub probe_intensities: Vec<f64>,
    /// Piezo steps per intensity, uniformly spread over one period.
    pub phase_steps: usize,
    /// Efficiency scan, descending, first entry equal to `eta_max`.
    pub eta_values: Vec<f64>,
    pub eta_max: f64,
    /// Volts per detected photon (`γ`).
    pub gain: f64,
    /// Signal/probe mode overlap `ξ`.
    pub overlap: f64,
    pub shots_per_point: usize,
    #[serde(default)]
    pub electronic_noise_sd: f64,
    pub rng_seed: u64,
    #[serde(default = "default_jitter")]
    pub piezo_jitter_sd: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let b0 = self.signal_amplitude;
        if !b0.is_finite() || b0.im != 0.0 || b0.re < 0.0 {
            return bad(format!(
                "signal_amplitude must be real and nonnegative, got {b0}"
            ));
        }
        if self.probe_intensities.is_empty() {
            return bad("probe_intensities is empty".into());
        }
        if let Some(x) = self
            .probe_intensities
            .iter()
            .find(|x| !x.is_finite() || **x < 0.0)
        {
            return bad(format!("probe intensity {x} is not a finite value >= 0"));
        }
        if self.phase_steps == 0 {
            return bad("phase_steps must be >= 1".into());
        }
        if !(self.eta_max > 0.0 && self.eta_max <= 1.0) {
            return bad(format!("eta_max = {} is outside (0, 1]", self.eta_max));
        }
        match self.eta_values.first() {
            None => return bad("eta_values is empty".into()),
            Some(&first) if first != self.eta_max => {
                return bad(format!(
                    "first eta value {first} differs from eta_max {}",
                    self.eta_max
                ))
            }
            _ => {}
        }
        if let Some(e) = self.eta_values.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return bad(format!("eta value {e} is outside (0, 1]"));
        }
        if self.eta_values.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eta_values must be strictly descending".into());
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return bad(format!("gain = {} must be > 0", self.gain));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad(format!("overlap = {} is outside [0, 1]", self.overlap));
        }
        if self.shots_per_point == 0 {
            return bad("shots_per_point must be >= 1".into());
        }
        if !(self.electronic_noise_sd >= 0.0 && self.electronic_noise_sd.is_finite()) {
            return bad(format!(
                "electronic_noise_sd = {} must be >= 0",
                self.electronic_noise_sd
            ));
        }
        if !(self.piezo_jitter_sd >= 0.0 && self.piezo_jitter_sd.is_finite()) {
            return bad(format!(
                "piezo_jitter_sd = {} must be >= 0",
                self.piezo_jitter_sd
            ));
        }
        Ok(())
    }

    pub fn n_intensities(&self) -> usize {
        self.probe_intensities.len()
    }

    pub fn n_etas(&self) -> usize {
        self.eta_values.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_intensities() * self.phase_steps * self.n_etas()
    }

    /// Nominal probe phase of step `p` before jitter.
    pub fn nominal_phase(&self, step: usize) -> f64 {
        TAU * step as f64 / self.phase_steps as f64
    }

    /// Mean detected photon number of a cell at efficiency `eta` for probe phase `theta`.
    pub fn cell_mean(&self, intensity: usize, theta: f64, eta: f64) -> f64 {
        let beta = probe_point(self.probe_intensities[intensity], theta);
        let mu = displaced_mean_unchecked(beta, self.signal_amplitude, self.overlap);
        eta / self.eta_max * mu
    }
}

/// `n` efficiencies spaced linearly from `eta_max` down to `eta_max / n`.
pub fn linear_eta_scan(eta_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| eta_max * (n - k) as f64 / n as f64)
        .collect()
}

/// `n` values spaced linearly over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Phase-space point sampled by a probe of detected intensity `intensity` and phase `theta`.
pub fn probe_point(intensity: f64, theta: f64) -> ComplexAmplitude {
    -ComplexAmplitude::from_polar(intensity.sqrt(), theta)
}

/// Mean detected photon number of the signal displaced to phase-space point
/// `beta` with overlap `xi`: `(1−ξ)|β|² + |√ξ·β − β₀|²`.
///
/// The unmatched probe fraction contributes an independent Poisson term, so
/// the detected distribution stays Poisson with this mean.
pub fn displaced_mean(beta: ComplexAmplitude, beta0: ComplexAmplitude, xi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::Domain {
            name: "xi",
            value: xi,
            domain: "[0, 1]",
        });
    }
    Ok(displaced_mean_unchecked(beta, beta0, xi))
}

fn displaced_mean_unchecked(beta: ComplexAmplitude, beta0: ComplexAmplitude, xi: f64) -> f64 {
    let matched = beta * xi.sqrt() - beta0;
    ((1.0 - xi) * beta.norm_sqr() + matched.norm_sqr()).max(0.0)
}

fn check_shot_args(mean_detected: f64, gain: f64, noise_sd: f64) -> Result<()> {
    if !(mean_detected >= 0.0 && mean_detected.is_finite()) {
        return Err(Error::Domain {
            name: "mean_detected",
            value: mean_detected,
            domain: "[0, ∞)",
        });
    }
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::Domain {
            name: "gain",
            value: gain,
            domain: "(0, ∞)",
        });
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Domain {
            name: "noise_sd",
            value: noise_sd,
            domain: "[0, ∞)",
        });
    }
    Ok(())
}

/// One detector output: `γ·m + N(0, noise_sd)` with `m ~ Poisson(mean_detected)`.
pub fn sample_shot<R: Rng + ?Sized>(
    mean_detected: f64,
    gain: f64,
    noise_sd: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(sample_shots(mean_detected, gain, noise_sd, 1, rng)?[0])
}

/// `n` independent draws of [`sample_shot`].
pub fn sample_shots<R: Rng + ?Sized>(
    mean_detected: f64,
    gain: f64,
    noise_sd: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_shot_args(mean_detected, gain, noise_sd)?;
    let noise = (noise_sd > 0.0).then(|| Normal::new(0.0, noise_sd).expect("finite positive sd"));
    let counts =
        (mean_detected > 0.0).then(|| Poisson::new(mean_detected).expect("finite positive mean"));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let m: f64 = counts.as_ref().map_or(0.0, |d| d.sample(rng));
        let mut v = gain * m;
        if let Some(d) = &noise {
            v += d.sample(rng);
        }
        out.push(v);
    }
    Ok(out)
}

/// Independent generator for one (tag, a, b, c) coordinate of a run.
fn stream_rng(seed: u64, tag: u64, a: usize, b: usize, c: usize) -> ChaCha8Rng {
    let words = [seed, tag, a as u64, ((b as u64) << 32) ^ c as u64];
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Position of one record list in a [`ShotDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub intensity: usize,
    pub phase: usize,
    pub eta: usize,
}

/// A complete campaign: per (intensity, phase step, efficiency) a list of voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotDataset {
    pub config: ExperimentConfig,
    /// Flat storage indexed by [`ShotDataset::flat_index`].
    pub records: Vec<Vec<f64>>,
    /// Ground truth: realized probe phase per (intensity, step), indexed
    /// `intensity * phase_steps + step`. Not an analysis input.
    pub true_phases: Vec<f64>,
}

impl ShotDataset {
    pub fn flat_index(&self, cell: CellIndex) -> usize {
        (cell.intensity * self.config.phase_steps + cell.phase) * self.config.n_etas() + cell.eta
    }

    pub fn cell(&self, cell: CellIndex) -> &[f64] {
        &self.records[self.flat_index(cell)]
    }

    pub fn true_phase(&self, intensity: usize, step: usize) -> f64 {
        self.true_phases[intensity * self.config.phase_steps + step]
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let c = &self.config;
        (0..c.n_intensities()).flat_map(move |i| {
            (0..c.phase_steps).flat_map(move |p| {
                (0..c.n_etas()).map(move |e| CellIndex {
                    intensity: i,
                    phase: p,
                    eta: e,
                })
            })
        })
    }
}

/// Simulates every cell of `config`. Each cell and each piezo step draws from
/// its own generator keyed by the seed and its coordinates, so the output does
/// not depend on thread count or scheduling.
pub fn generate_dataset(config: &ExperimentConfig) -> Result<ShotDataset> {
    config.validate()?;
    let steps = config.phase_steps;
    let n_eta = config.n_etas();

    let true_phases = par::map_range(config.n_intensities() * steps, |k| {
        let (i, p) = (k / steps, k % steps);
        let jitter = if config.piezo_jitter_sd > 0.0 {
            let mut rng = stream_rng(config.rng_seed, STREAM_JITTER, i, p, 0);
            Normal::new(0.0, config.piezo_jitter_sd)
                .expect("validated sd")
                .sample(&mut rng)
        } else {
            0.0
        };
        config.nominal_phase(p) + jitter
    });

    let records = par::map_range(config.n_cells(), |k| {
        let (ip, e) = (k / n_eta, k % n_eta);
        let (i, p) = (ip / steps, ip % steps);
        let mean = config.cell_mean(i, true_phases[ip], config.eta_values[e]);
        let mut rng = stream_rng(config.rng_seed, STREAM_SHOTS, i, p, e);
        sample_shots(
            mean,
            config.gain,
            config.electronic_noise_sd,
            config.shots_per_point,
            &mut rng,
        )
        .expect("validated config yields valid shot parameters")
    });

    Ok(ShotDataset {
        config: config.clone(),
        records,
        true_phases,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            signal_amplitude: ComplexAmplitude::real(0.67),
            probe_intensities: vec![0.2, 0.45],
            phase_steps: 4,
            eta_values: linear_eta_scan(0.31, 3),
            eta_max: 0.31,
            gain: 0.1,
            overlap: 0.78,
            shots_per_point: 50,
            electronic_noise_sd: 0.0,
            rng_seed: 7,
            piezo_jitter_sd: DEFAULT_PIEZO_JITTER_SD,
        }
    }

    #[test]
    fn displaced_mean_examples() {
        let b0 = ComplexAmplitude::real(0.67);
        let mu = displaced_mean(ComplexAmplitude::ZERO, b0, 0.78).unwrap();
        assert!((mu - 0.4489).abs() < 1e-15);
        // (2/π)e^{-2μ} at β = 0 is the overlap-corrected model at the origin
        let w = 2.0 / std::f64::consts::PI * (-2.0 * mu).exp();
        let direct = 2.0 / std::f64::consts::PI
            * (-2.0 * (1.0 - 0.78) * 0.0f64).exp()
            * (-2.0 * (0.0f64 - 0.67).powi(2)).exp();
        assert!((w - direct).abs() < 1e-15);

        assert_eq!(displaced_mean(b0, b0, 1.0).unwrap(), 0.0);
        let mu = displaced_mean(ComplexAmplitude::real(0.5), ComplexAmplitude::ZERO, 0.3).unwrap();
        assert!((mu - 0.25).abs() < 1e-15);
    }

    #[test]
    fn displaced_mean_rejects_bad_overlap() {
        let z = ComplexAmplitude::ZERO;
        assert!(matches!(
            displaced_mean(z, z, 1.5),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            displaced_mean(z, z, -0.1),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn displaced_mean_matches_completed_square() {
        // |β − √ξ β₀|² + (1−ξ)|β₀|², the alternative form of the same mean
        let b0 = ComplexAmplitude::real(0.63);
        for k in 0..50 {
            let beta = ComplexAmplitude::from_polar(0.05 * k as f64, 0.37 * k as f64);
            for xi in [0.0, 0.3, 0.7569, 1.0] {
                let a = displaced_mean(beta, b0, xi).unwrap();
                let b = (beta - b0 * xi.sqrt()).norm_sqr() + (1.0 - xi) * b0.norm_sqr();
                assert!((a - b).abs() < 1e-14, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_mean_gives_zero_voltage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_shot(0.0, 0.37, 0.0, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_mean_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_shot(-1.0, 0.1, 0.0, &mut rng).is_err());
        assert!(sample_shot(1.0, 0.0, 0.0, &mut rng).is_err());
        assert!(sample_shot(1.0, 0.1, -0.1, &mut rng).is_err());
    }

    #[test]
    fn noiseless_shots_are_gain_multiples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = sample_shots(2.0, 0.1, 0.0, 10_000, &mut rng).unwrap();
        for x in v {
            let m = (x / 0.1).round();
            assert!(m >= 0.0);
            assert_eq!(x, m * 0.1);
        }
    }

    #[test]
    fn shot_moments_follow_poisson_law() {
        // mean 2, gain 0.1: E[v] = 0.2, Var[v] = 0.02, F_v = 0.1
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = sample_shots(2.0, 0.1, 0.0, n, &mut rng).unwrap();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (0.02f64 / n as f64).sqrt();
        assert!((mean - 0.2).abs() < 3.0 * se_mean, "mean {mean}");
        // Var of the sample variance for Poisson(μ)·γ: γ⁴(μ + 2μ²)/n
        let se_var = (0.1f64.powi(4) * (2.0 + 8.0) / n as f64).sqrt();
        let fano = var / mean;
        let se_fano = se_var / 0.2 + 0.02 * se_mean / 0.04;
        assert!((fano - 0.1).abs() < 3.0 * se_fano, "fano {fano}");
    }

    #[test]
    fn validation_catches_bad_configs() {
        let ok = small_config();
        ok.validate().unwrap();
        type Mutation = Box<dyn Fn(&mut ExperimentConfig)>;
        let cases: Vec<Mutation> = vec![
            Box::new(|c| c.gain = 0.0),
            Box::new(|c| c.overlap = 1.2),
            Box::new(|c| c.shots_per_point = 0),
            Box::new(|c| c.eta_values = vec![0.1, 0.31]),
            Box::new(|c| c.eta_values[0] = 0.3),
            Box::new(|c| c.probe_intensities.push(-0.1)),
            Box::new(|c| c.signal_amplitude = ComplexAmplitude::new(0.5, 0.1)),
            Box::new(|c| c.phase_steps = 0),
            Box::new(|c| c.eta_max = 1.5),
        ];
        for mutate in cases {
            let mut c = ok.clone();
            mutate(&mut c);
            assert!(
                matches!(c.validate(), Err(Error::InvalidConfig(_))),
                "{c:?}"
            );
        }
    }

    #[test]
    fn one_cell_dataset() {
        let mut c = small_config();
        c.probe_intensities = vec![0.3];
        c.phase_steps = 1;
        c.eta_values = vec![0.31];
        c.shots_per_point = 1;
        let d = generate_dataset(&c).unwrap();
        assert_eq!(d.records.len(), 1);
        assert_eq!(d.records[0].len(), 1);
    }

    #[test]
    fn full_scale_cell_count() {
        let mut c = small_config();
        c.probe_intensities = linspace(0.05, 2.0, 46);
        c.phase_steps = 48;
        c.eta_values = linear_eta_scan(0.31, 25);
        c.shots_per_point = 1;
        let d = generate_dataset(&c).unwrap();
        assert_eq!(d.records.len(), 55_200);
        assert_eq!(d.true_phases.len(), 46 * 48);
        assert!(d.records.iter().all(|r| r.len() == 1));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let c = small_config();
        let a = generate_dataset(&c).unwrap();
        let b = generate_dataset(&c).unwrap();
        assert_eq!(a, b);
        let single = par::with_workers(Some(1), || generate_dataset(&c).unwrap());
        assert_eq!(a, single);
        let mut c2 = c.clone();
        c2.rng_seed += 1;
        assert_ne!(a.records, generate_dataset(&c2).unwrap().records);
    }

    #[test]
    fn eta_scan_is_descending_from_max() {
        let e = linear_eta_scan(0.31, 25);
        assert_eq!(e.len(), 25);
        assert_eq!(e[0], 0.31);
        assert!(e.windows(2).all(|w| w[1] < w[0]));
        assert!(e[24] > 0.0);
    }
}
