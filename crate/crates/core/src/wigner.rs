//! Detected-photon Wigner function: reconstruction, models and scoring.
//!
//! The value at a displacement is the parity of the displaced detected-photon
//! distribution, `W̄(β) = (2/π) Σ_m (−1)^m p̄_m(β)`. For a coherent signal
//! the detected distribution at every displacement is Poisson, and the
//! alternating sum collapses to `(2/π)·exp(−2μ)` with `μ` the mean count.

use std::collections::HashSet;
use std::f64::consts::FRAC_2_PI;

use serde::{Deserialize, Serialize};

use crate::calib::PhotonHistogram;
use crate::{par, ComplexAmplitude, Error, Result};

/// Relative tail of the loss kernel a lattice must cover.
pub const KERNEL_TAIL: f64 = 1e-6;
/// Lattice spacing used for loss-convolution checks.
pub const DEFAULT_LATTICE_STEP: f64 = 0.05;

/// Where a sample sits in its grid: (series, step) for reconstructions,
/// (row, column) for lattices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleSite {
    pub series: usize,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerSample {
    pub site: SampleSite,
    /// Detected displacement.
    pub beta: ComplexAmplitude,
    /// Probe phase that produced `beta` (`arg(−β)` for lattice samples).
    pub phi: f64,
    pub value: f64,
    pub truncation_m: usize,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Reconstruction,
    Theory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    samples: Vec<WignerSample>,
    provenance: Provenance,
}

impl WignerGrid {
    /// Fails if two samples share a site.
    pub fn new(samples: Vec<WignerSample>, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.site) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate grid site ({}, {})",
                    s.site.series, s.site.step
                )));
            }
        }
        Ok(Self {
            samples,
            provenance,
        })
    }

    pub fn samples(&self) -> &[WignerSample] {
        &self.samples
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same sites with values replaced by `model(beta)`.
    pub fn evaluate<F>(&self, model: F) -> WignerGrid
    where
        F: Fn(ComplexAmplitude) -> f64,
    {
        let samples = self
            .samples
            .iter()
            .map(|s| WignerSample {
                value: model(s.beta),
                truncation_m: 0,
                tail_bound: 0.0,
                ..*s
            })
            .collect();
        WignerGrid {
            samples,
            provenance: Provenance::Theory,
        }
    }
}

/// Signal amplitude and overlap for the overlap-corrected coherent model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub beta0_mod: f64,
    pub xi: f64,
}

impl TheoryParams {
    pub fn new(beta0_mod: f64, xi: f64) -> Result<Self> {
        if !(beta0_mod >= 0.0 && beta0_mod.is_finite()) {
            return Err(Error::Domain {
                name: "beta0_mod",
                value: beta0_mod,
                domain: "[0, ∞)",
            });
        }
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain {
                name: "xi",
                value: xi,
                domain: "[0, 1]",
            });
        }
        Ok(Self { beta0_mod, xi })
    }
}

/// Parity estimate at `beta` from a detected-photon histogram.
pub fn wigner_from_hist(hist: &PhotonHistogram, beta: ComplexAmplitude) -> WignerSample {
    let parity: f64 = hist
        .probs()
        .iter()
        .enumerate()
        .map(|(m, p)| if m % 2 == 0 { *p } else { -p })
        .sum();
    WignerSample {
        site: SampleSite { series: 0, step: 0 },
        beta,
        phi: (-beta).arg(),
        value: FRAC_2_PI * parity,
        truncation_m: hist.m_max(),
        tail_bound: FRAC_2_PI * hist.tail_mass(),
    }
}

/// Coherent state `β₀` seen through detection: `(2/π)·exp(−2|β − β₀|²)`.
pub fn theory_coherent(beta: ComplexAmplitude, beta0: ComplexAmplitude) -> f64 {
    FRAC_2_PI * (-2.0 * (beta - beta0).norm_sqr()).exp()
}

/// Overlap-corrected model: the matched part of the probe displaces a signal
/// reduced by `√ξ`, the unmatched part adds a vacuum-centred Gaussian factor.
pub fn theory_reduced(beta: ComplexAmplitude, params: TheoryParams) -> f64 {
    let xi = params.xi;
    let matched = beta * xi.sqrt() - ComplexAmplitude::real(params.beta0_mod);
    FRAC_2_PI * (-2.0 * (1.0 - xi) * beta.norm_sqr()).exp() * (-2.0 * matched.norm_sqr()).exp()
}

/// Square lattice of phase-space values, row-major with rows along `im`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceLattice {
    half_width: f64,
    step: f64,
    n: usize,
    values: Vec<f64>,
}

impl PhaseSpaceLattice {
    /// Lattice over `[−half_width, half_width]²` with the given spacing.
    pub fn from_fn<F>(half_width: f64, step: f64, f: F) -> Result<Self>
    where
        F: Fn(ComplexAmplitude) -> f64 + Sync + Send,
    {
        if !(half_width > 0.0 && step > 0.0 && step <= half_width) {
            return Err(Error::Coverage(format!(
                "lattice half width {half_width} with step {step}"
            )));
        }
        let n = 2 * (half_width / step).round() as usize + 1;
        let half_width = step * ((n - 1) / 2) as f64;
        let mut values = vec![0.0; n * n];
        par::for_each_row(&mut values, n, |r, row| {
            let y = -half_width + r as f64 * step;
            for (c, v) in row.iter_mut().enumerate() {
                *v = f(ComplexAmplitude::new(-half_width + c as f64 * step, y));
            }
        });
        Ok(Self {
            half_width,
            step,
            n,
            values,
        })
    }

    /// Samples the photon Wigner function `w` at `β′/√η` on a detected-amplitude lattice.
    pub fn ideal_on_detected<F>(half_width: f64, step: f64, eta: f64, w: F) -> Result<Self>
    where
        F: Fn(ComplexAmplitude) -> f64 + Sync + Send,
    {
        let scale = 1.0 / eta.sqrt();
        Self::from_fn(half_width, step, |b| w(b * scale))
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Points per side.
    pub fn side(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn point(&self, row: usize, col: usize) -> ComplexAmplitude {
        ComplexAmplitude::new(
            -self.half_width + col as f64 * self.step,
            -self.half_width + row as f64 * self.step,
        )
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    /// `∫ W d²β` by the lattice rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step * self.step
    }

    pub fn to_grid(&self, provenance: Provenance) -> WignerGrid {
        let samples = (0..self.n)
            .flat_map(|r| (0..self.n).map(move |c| (r, c)))
            .map(|(r, c)| {
                let beta = self.point(r, c);
                WignerSample {
                    site: SampleSite { series: r, step: c },
                    beta,
                    phi: (-beta).arg(),
                    value: self.value(r, c),
                    truncation_m: 0,
                    tail_bound: 0.0,
                }
            })
            .collect();
        WignerGrid {
            samples,
            provenance,
        }
    }
}

/// Default lattice half width for a coherent input of amplitude `alpha0_mod`.
pub fn default_half_width(alpha0_mod: f64) -> f64 {
    (alpha0_mod + 4.0).max(4.0)
}

/// Wigner function after loss `1 − η`:
/// `W̄(β) = 2/(π(1−η)) ∫ d²α exp(−2|β − √η α|²/(1−η)) W(α)`,
/// evaluated on the lattice of `W(β′/√η)` values with `d²α = d²β′/η`.
///
/// The Gaussian kernel is separable, so the quadrature runs as two 1-D passes.
/// Its discrete weights are normalized to unit mass on the infinite lattice,
/// which keeps the rule exact in the narrow-kernel limit `η → 1`.
pub fn loss_convolve(ideal: &PhaseSpaceLattice, eta: f64) -> Result<PhaseSpaceLattice> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            domain: "(0, 1]",
        });
    }
    if eta == 1.0 {
        return Ok(ideal.clone());
    }
    check_coverage(ideal, eta)?;

    let n = ideal.n;
    let h = ideal.step;
    let spread = 1.0 - eta;
    let kernel = |j: usize| {
        let d = j as f64 * h;
        (-2.0 * d * d / spread).exp()
    };
    let mut z = kernel(0);
    let mut j = 1;
    loop {
        let k = kernel(j);
        z += 2.0 * k;
        if k < 1e-18 * z {
            break;
        }
        j += 1;
    }
    let weights: Vec<f64> = (0..n).map(|j| kernel(j) / z).collect();

    // along rows (re axis)
    let mut tmp = vec![0.0; n * n];
    par::for_each_row(&mut tmp, n, |r, row| {
        let src = &ideal.values[r * n..(r + 1) * n];
        for (c, out) in row.iter_mut().enumerate() {
            *out = src
                .iter()
                .enumerate()
                .map(|(c2, v)| weights[c.abs_diff(c2)] * v)
                .sum();
        }
    });
    // along columns (im axis), with the 1/η Jacobian
    let mut values = vec![0.0; n * n];
    par::for_each_row(&mut values, n, |r, row| {
        for r2 in 0..n {
            let w = weights[r.abs_diff(r2)] / eta;
            if w == 0.0 {
                continue;
            }
            let src = &tmp[r2 * n..(r2 + 1) * n];
            for (out, v) in row.iter_mut().zip(src) {
                *out += w * v;
            }
        }
    });
    Ok(PhaseSpaceLattice { values, ..*ideal })
}

fn check_coverage(lattice: &PhaseSpaceLattice, eta: f64) -> Result<()> {
    let radius = ((1.0 - eta) / 2.0 * (1.0 / KERNEL_TAIL).ln()).sqrt();
    if lattice.half_width < radius {
        return Err(Error::Coverage(format!(
            "half width {} is below the kernel radius {radius}",
            lattice.half_width
        )));
    }
    let n = lattice.n;
    let peak = lattice.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let edge = (0..n)
        .flat_map(|k| [(0, k), (n - 1, k), (k, 0), (k, n - 1)])
        .map(|(r, c)| lattice.value(r, c).abs())
        .fold(0.0f64, f64::max);
    if peak > 0.0 && edge > KERNEL_TAIL * peak {
        return Err(Error::Coverage(format!(
            "input reaches {edge} at the lattice edge (peak {peak})"
        )));
    }
    Ok(())
}

/// Signed mean of `theory − reconstruction` over all samples.
pub fn mean_error<F>(reconstructed: &WignerGrid, theory: F) -> Result<f64>
where
    F: Fn(ComplexAmplitude) -> f64,
{
    if reconstructed.is_empty() {
        return Err(Error::EmptyInput("empty Wigner grid"));
    }
    let total: f64 = reconstructed
        .samples
        .iter()
        .map(|s| theory(s.beta) - s.value)
        .sum();
    Ok(total / reconstructed.len() as f64)
}

const BETA0_SEARCH_MAX: f64 = 10.0;
const BETA0_SCAN_STEP: f64 = 0.01;

/// Least-squares `|β₀|` of the overlap-corrected model with `xi` held fixed.
///
/// A coarse scan over `[0, 10]` brackets the global minimum, then a
/// golden-section search refines it.
pub fn fit_beta0(reconstructed: &WignerGrid, xi: f64) -> Result<f64> {
    TheoryParams::new(0.0, xi)?;
    if reconstructed.len() < 3 {
        return Err(Error::InsufficientData {
            what: "Wigner samples",
            needed: 3,
            got: reconstructed.len(),
        });
    }
    if reconstructed.samples.iter().all(|s| s.value == 0.0) {
        return Err(Error::Fit("all reconstructed values are zero".into()));
    }
    let sse = |b: f64| -> f64 {
        let params = TheoryParams { beta0_mod: b, xi };
        reconstructed
            .samples
            .iter()
            .map(|s| {
                let r = s.value - theory_reduced(s.beta, params);
                r * r
            })
            .sum()
    };

    let n_scan = (BETA0_SEARCH_MAX / BETA0_SCAN_STEP).round() as usize;
    let costs = par::map_range(n_scan + 1, |k| sse(k as f64 * BETA0_SCAN_STEP));
    let best = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("nonempty scan");
    if !costs[best].is_finite() {
        return Err(Error::Fit("non-finite residuals".into()));
    }
    let lo = (best as f64 - 1.0).max(0.0) * BETA0_SCAN_STEP;
    let hi = ((best + 1) as f64 * BETA0_SCAN_STEP).min(BETA0_SEARCH_MAX);
    Ok(golden_section(sse, lo, hi, 1e-12))
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    // keep whichever end wins if the minimum sits on the bracket edge
    [a, x, b]
        .into_iter()
        .min_by(|p, q| f(*p).total_cmp(&f(*q)))
        .unwrap()
}
