use std::f64::consts::FRAC_2_PI;

use dispwig::calib::{self, PhotonHistogram};
use dispwig::wigner::{
    self, PhaseSpaceLattice, Provenance, SampleSite, TheoryParams, WignerGrid, WignerSample,
    DEFAULT_LATTICE_STEP,
};
use dispwig::ComplexAmplitude;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn coherent_lattice(alpha0: f64, eta: f64) -> PhaseSpaceLattice {
    let a0 = ComplexAmplitude::real(alpha0);
    PhaseSpaceLattice::ideal_on_detected(
        wigner::default_half_width(alpha0),
        DEFAULT_LATTICE_STEP,
        eta,
        |a| wigner::theory_coherent(a, a0),
    )
    .unwrap()
}

#[test]
fn near_unit_efficiency_is_a_delta_kernel() {
    let eta = 1.0 - 1e-6;
    let ideal = coherent_lattice(1.0, eta);
    let out = wigner::loss_convolve(&ideal, eta).unwrap();
    let worst = ideal
        .values()
        .iter()
        .zip(out.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn loss_convolution_preserves_normalization() {
    for (alpha0, eta) in [(1.0, 0.31), (0.5, 0.7), (2.0, 0.1)] {
        let ideal = coherent_lattice(alpha0, eta);
        let out = wigner::loss_convolve(&ideal, eta).unwrap();
        // ∫W d²α = ∫W(β′/√η) d²β′ / η
        let before = ideal.integral() / eta;
        let after = out.integral();
        assert!((before - 1.0).abs() < 1e-3, "{before}");
        assert!((after - before).abs() < 1e-3, "{after} vs {before}");
    }
}

#[test]
fn loss_convolution_matches_closed_form_off_grid_parameters() {
    // Gaussian ⊗ Gaussian: the detected Wigner of a coherent state stays (2/π)e^{−2|β−√η α₀|²}.
    for (alpha0, eta) in [(0.5, 0.7), (1.5, 0.45)] {
        let out = wigner::loss_convolve(&coherent_lattice(alpha0, eta), eta).unwrap();
        let c = ComplexAmplitude::real(eta.sqrt() * alpha0);
        for r in (0..out.side()).step_by(7) {
            for k in (0..out.side()).step_by(7) {
                let want = wigner::theory_coherent(out.point(r, k), c);
                assert!((out.value(r, k) - want).abs() < 1e-3);
            }
        }
    }
}

#[test]
fn thinning_then_parity_equals_detected_parity() {
    // photon-number parity route vs detected-photon route for coherent light
    for mu in [0.1, 0.7, 2.5] {
        for eta in [0.31, 0.6, 1.0] {
            let detected =
                calib::bernoulli_convolve(&PhotonHistogram::poisson(mu).unwrap(), eta).unwrap();
            let via_thinning = wigner::wigner_from_hist(&detected, ComplexAmplitude::ZERO).value;
            let direct = wigner::wigner_from_hist(
                &PhotonHistogram::poisson(eta * mu).unwrap(),
                ComplexAmplitude::ZERO,
            )
            .value;
            assert!((via_thinning - direct).abs() < 1e-10);
        }
    }
}

fn model_grid(beta0: f64, xi: f64) -> WignerGrid {
    let p = TheoryParams::new(beta0, xi).unwrap();
    let samples = (0..10)
        .flat_map(|i| (0..16).map(move |k| (i, k)))
        .map(|(i, k)| {
            let phi = std::f64::consts::PI * k as f64 / 15.0;
            let beta = -ComplexAmplitude::from_polar(0.1 + 0.12 * i as f64, phi);
            WignerSample {
                site: SampleSite { series: i, step: k },
                beta,
                phi,
                value: wigner::theory_reduced(beta, p),
                truncation_m: 0,
                tail_bound: 0.0,
            }
        })
        .collect();
    WignerGrid::new(samples, Provenance::Reconstruction).unwrap()
}

#[test]
fn beta0_fit_tolerates_value_noise() {
    let clean = model_grid(0.63, 0.78);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let samples: Vec<WignerSample> = clean
            .samples()
            .iter()
            .map(|s| WignerSample {
                value: s.value + noise.sample(&mut rng),
                ..*s
            })
            .collect();
        let g = WignerGrid::new(samples, Provenance::Reconstruction).unwrap();
        worst = worst.max((wigner::fit_beta0(&g, 0.78).unwrap() - 0.63).abs());
    }
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn beta0_fit_finds_large_amplitudes() {
    let g = model_grid(2.7, 0.9);
    assert!((wigner::fit_beta0(&g, 0.9).unwrap() - 2.7).abs() < 1e-6);
}

proptest! {
    #[test]
    fn empirical_values_are_bounded(counts in proptest::collection::vec(0u64..500, 1..30)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let h = PhotonHistogram::from_counts(&counts).unwrap();
        let s = wigner::wigner_from_hist(&h, ComplexAmplitude::ZERO);
        prop_assert_eq!(s.tail_bound, 0.0);
        prop_assert!(s.value.abs() <= FRAC_2_PI + s.tail_bound + 1e-15);
        prop_assert_eq!(s.truncation_m, h.m_max());
    }

    #[test]
    fn reduced_model_is_even_in_phase(r in 0.0f64..3.0, phi in -4.0f64..4.0, b0 in 0.0f64..2.0, xi in 0.0f64..=1.0) {
        let p = TheoryParams::new(b0, xi).unwrap();
        let a = wigner::theory_reduced(ComplexAmplitude::from_polar(r, phi), p);
        let b = wigner::theory_reduced(ComplexAmplitude::from_polar(r, -phi), p);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn poisson_parity_matches_displaced_model(re in -2.0f64..2.0, im in -2.0f64..2.0, b0 in 0.0f64..1.5, xi in 0.0f64..=1.0) {
        let beta = ComplexAmplitude::new(re, im);
        let mu = dispwig::sim::displaced_mean(beta, ComplexAmplitude::real(b0), xi).unwrap();
        let s = wigner::wigner_from_hist(&PhotonHistogram::poisson(mu).unwrap(), beta);
        let model = wigner::theory_reduced(beta, TheoryParams::new(b0, xi).unwrap());
        prop_assert!((s.value - model).abs() < 1e-10);
    }
}
