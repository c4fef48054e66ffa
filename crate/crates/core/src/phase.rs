//! Self-consistent phase recovery from the interference fringe.
//!
//! The mean voltage at the top efficiency, taken step by step while the piezo
//! moves, traces `v̄ = offset + amplitude·cos θ` however irregular the steps
//! are. Normalizing each point by the observed extremes yields `cos θ`
//! directly, and the extremes give the fringe visibility.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fringe parameters and per-step phases for one probe-intensity series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeAnalysis {
    pub visibility: f64,
    /// `(max + min) / 2`
    pub offset: f64,
    /// `(max − min) / 2`
    pub amplitude: f64,
    pub cosines: Vec<f64>,
    /// `arccos` of each cosine, in `[0, π]`.
    pub phases: Vec<f64>,
}

/// Overlap estimated from the equal-intensity visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    pub xi: f64,
    pub v_max_used: f64,
}

pub fn analyze_fringe(mean_voltages: &[f64]) -> Result<FringeAnalysis> {
    if mean_voltages.len() < 2 {
        return Err(Error::InsufficientData {
            what: "fringe steps",
            needed: 2,
            got: mean_voltages.len(),
        });
    }
    let max = mean_voltages
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = mean_voltages.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > min) {
        return Err(Error::NoFringe { level: max });
    }
    let offset = 0.5 * (max + min);
    let amplitude = 0.5 * (max - min);
    let cosines: Vec<f64> = mean_voltages
        .iter()
        .map(|v| ((v - offset) / amplitude).clamp(-1.0, 1.0))
        .collect();
    let phases = cosines.iter().map(|c| c.acos()).collect();
    Ok(FringeAnalysis {
        visibility: (max - min) / (max + min),
        offset,
        amplitude,
        cosines,
        phases,
    })
}

/// `ξ = V/(2 − V)`.
pub fn overlap_from_visibility(v_max: f64) -> Result<OverlapEstimate> {
    if !(0.0..=1.0).contains(&v_max) {
        return Err(Error::Domain {
            name: "v_max",
            value: v_max,
            domain: "[0, 1]",
        });
    }
    Ok(OverlapEstimate {
        xi: v_max / (2.0 - v_max),
        v_max_used: v_max,
    })
}

/// Index of the series whose probe intensity is closest to the signal
/// intensity; ties go to the larger probe intensity.
pub fn closest_series(probe_intensities: &[f64], signal_intensity: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &b2) in probe_intensities.iter().enumerate() {
        let d = (b2 - signal_intensity).abs();
        best = match best {
            Some((j, bd)) if bd < d || (bd == d && probe_intensities[j] >= b2) => Some((j, bd)),
            _ => Some((k, d)),
        };
    }
    best.map(|(k, _)| k)
}

/// Visibility of the equal-intensity series, used as `V_max`.
pub fn select_vmax(
    fringes: &[FringeAnalysis],
    probe_intensities: &[f64],
    signal_intensity: f64,
) -> Result<f64> {
    if fringes.is_empty() {
        return Err(Error::EmptyInput("no fringe series"));
    }
    if fringes.len() != probe_intensities.len() {
        return Err(Error::InvalidConfig(format!(
            "{} fringe series but {} probe intensities",
            fringes.len(),
            probe_intensities.len()
        )));
    }
    let k = closest_series(probe_intensities, signal_intensity).expect("nonempty");
    Ok(fringes[k].visibility)
}

/// Maps any phase onto `[0, π]` through `θ → |wrap(θ)|`, the range `arccos` reports.
pub fn fold_phase(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(TAU) - PI;
    wrapped.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_fringe() {
        let f = analyze_fringe(&[3.0, 2.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((f.visibility - 0.5).abs() < 1e-15);
        assert_eq!(f.cosines, vec![1.0, 0.0, -1.0, 0.0, 1.0]);
        let expect = [0.0, PI / 2.0, PI, PI / 2.0, 0.0];
        for (a, b) in f.phases.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((f.visibility - f.amplitude / f.offset).abs() < 1e-12);
    }

    #[test]
    fn flat_series_is_rejected() {
        assert!(matches!(
            analyze_fringe(&[1.0, 1.0, 1.0]),
            Err(Error::NoFringe { .. })
        ));
        assert!(analyze_fringe(&[1.0]).is_err());
    }

    #[test]
    fn analytic_fringe_needs_no_clipping() {
        let steps = 48;
        let v: Vec<f64> = (0..steps)
            .map(|k| 1.3 + 0.9 * (TAU * k as f64 / steps as f64).cos())
            .collect();
        let f = analyze_fringe(&v).unwrap();
        for (k, c) in f.cosines.iter().enumerate() {
            let unclipped = (v[k] - f.offset) / f.amplitude;
            assert!((-1.0..=1.0).contains(&unclipped));
            assert_eq!(*c, unclipped);
        }
    }

    #[test]
    fn overlap_examples() {
        let o = overlap_from_visibility(0.87).unwrap();
        assert!((o.xi - 0.87 / 1.13).abs() < 1e-15);
        assert!((o.xi - 0.7699).abs() < 1e-4);
        assert_eq!(overlap_from_visibility(1.0).unwrap().xi, 1.0);
        assert_eq!(overlap_from_visibility(0.0).unwrap().xi, 0.0);
        assert!(overlap_from_visibility(1.01).is_err());
        assert!(overlap_from_visibility(-0.01).is_err());
    }

    fn fringe_with_visibility(v: f64) -> FringeAnalysis {
        analyze_fringe(&[1.0 + v, 1.0, 1.0 - v]).unwrap()
    }

    #[test]
    fn vmax_selection() {
        let one = [fringe_with_visibility(0.5)];
        assert!((select_vmax(&one, &[0.7], 0.1).unwrap() - 0.5).abs() < 1e-15);

        let three = [
            fringe_with_visibility(0.6),
            fringe_with_visibility(0.87),
            fringe_with_visibility(0.7),
        ];
        let v = select_vmax(&three, &[0.2, 0.45, 0.9], 0.67 * 0.67).unwrap();
        assert!((v - 0.87).abs() < 1e-12);

        // equidistant: larger intensity wins, in either order
        assert_eq!(closest_series(&[0.3, 0.6], 0.45), Some(1));
        assert_eq!(closest_series(&[0.6, 0.3], 0.45), Some(0));
        assert!(select_vmax(&[], &[], 0.4).is_err());
    }

    #[test]
    fn folding() {
        assert!((fold_phase(0.3) - 0.3).abs() < 1e-15);
        assert!((fold_phase(-0.3) - 0.3).abs() < 1e-15);
        assert!((fold_phase(TAU - 0.3) - 0.3).abs() < 1e-12);
        assert!((fold_phase(PI + 0.2) - (PI - 0.2)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn affine_scaling_is_invisible(
            a in 0.001f64..1000.0,
            v in proptest::collection::vec(0.0f64..10.0, 2..60),
        ) {
            let base = analyze_fringe(&v);
            let scaled: Vec<f64> = v.iter().map(|x| a * x).collect();
            match (base, analyze_fringe(&scaled)) {
                (Ok(f), Ok(g)) => {
                    prop_assert!((f.visibility - g.visibility).abs() < 1e-12);
                    for (x, y) in f.cosines.iter().zip(&g.cosines) {
                        prop_assert!((x - y).abs() < 1e-9);
                    }
                    for (x, y) in f.phases.iter().zip(&g.phases) {
                        // arccos is steep at ±1, compare through the cosine
                        prop_assert!((x.cos() - y.cos()).abs() < 1e-9);
                    }
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "scaling changed fringe detection"),
            }
        }

        #[test]
        fn cosines_and_phases_in_range(v in proptest::collection::vec(-5.0f64..10.0, 2..60)) {
            if let Ok(f) = analyze_fringe(&v) {
                for (c, p) in f.cosines.iter().zip(&f.phases) {
                    prop_assert!((-1.0..=1.0).contains(c));
                    prop_assert!((0.0..=PI).contains(p));
                    prop_assert_eq!(*p, c.acos());
                }
            }
        }
    }
}
