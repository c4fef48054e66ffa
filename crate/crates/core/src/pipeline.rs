//! Simulate, analyze and report stages over run directories.
//!
//! `analyze` reads only the manifest layout and the cell files. It calibrates
//! every (intensity, phase) setting from its efficiency scan, recovers fringe
//! phases from the top-efficiency mean voltages, reconstructs one Wigner
//! sample per setting, estimates the overlap, fits `|β₀|` and scores the
//! reconstruction. All randomness lives in `simulate`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calib::{self, CalibrationResult, FanoOptions, PhotonHistogram};
use crate::dataset::{self, create_dir, read_text, write_text, LoadedRun, RunLayout};
use crate::phase::{self, FringeAnalysis, OverlapEstimate};
use crate::sim::{self, ExperimentConfig};
use crate::wigner::{self, Provenance, SampleSite, TheoryParams, WignerGrid, WignerSample};
use crate::{par, Error, Result};

pub const ANALYSIS_DIR: &str = "analysis";
pub const REPORT_DIR: &str = "report";
pub const CALIBRATION_FILE: &str = "calibration.toml";
pub const HISTOGRAM_FILE: &str = "histograms.toml";
pub const FRINGE_FILE: &str = "fringes.toml";
pub const WIGNER_FILE: &str = "wigner_reconstruction.csv";
pub const REPORT_FILE: &str = "report.toml";

pub const SERIES_FILES: [&str; 4] = [
    "series_wigner.csv",
    "series_mean_voltage.csv",
    "series_cosine.csv",
    "series_phase.csv",
];
pub const SECTIONS_FILE: &str = "sections.csv";
pub const SURFACE_FILE: &str = "surface.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

const EPSILON_DIVISOR: &str = "number of reconstructed samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VmaxMode {
    /// Series whose probe intensity is closest to the signal intensity.
    #[default]
    Closest,
    /// A designated equal-intensity series.
    Dedicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub min_mean_voltage: f64,
    pub min_shots: usize,
    pub vmax_mode: VmaxMode,
    /// Series used in dedicated mode. If unset, the series whose probe
    /// intensity equals the signal intensity.
    pub dedicated_series: Option<usize>,
    /// Calibrate once and reuse that gain for every setting.
    pub global_gamma: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        let f = FanoOptions::default();
        Self {
            min_mean_voltage: f.min_mean_voltage,
            min_shots: f.min_shots,
            vmax_mode: VmaxMode::Closest,
            dedicated_series: None,
            global_gamma: false,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_mean_voltage >= 0.0 && self.min_mean_voltage.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "min_mean_voltage = {} must be >= 0",
                self.min_mean_voltage
            )));
        }
        if self.min_shots < 2 {
            return Err(Error::InvalidConfig("min_shots must be >= 2".into()));
        }
        Ok(())
    }

    fn fano(&self) -> FanoOptions {
        FanoOptions {
            min_mean_voltage: self.min_mean_voltage,
            min_shots: self.min_shots,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Toml,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    pub format: ReportFormat,
    /// Intensity indices for the per-series plot files. Defaults to the
    /// first, the equal-intensity and the last series.
    pub sections: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputOptions {
    pub run_dir: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub output: OutputOptions,
    #[serde(default)]
    pub report: ReportOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.experiment.validate()?;
        cfg.analysis.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path).map_err(|e| match e {
            Error::Io { path, source } => {
                Error::InvalidConfig(format!("{}: {source}", path.display()))
            }
            other => other,
        })?;
        Self::from_toml(&text)
    }
}

/// Generates the dataset described by `config` and writes it to `run_dir`.
pub fn simulate(config: &ExperimentConfig, run_dir: &Path) -> Result<Vec<PathBuf>> {
    let data = sim::generate_dataset(config)?;
    log::info!(
        "generated {} cells, writing to {}",
        config.n_cells(),
        run_dir.display()
    );
    dataset::write_dataset(&data, run_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCalibration {
    pub intensity_index: usize,
    pub phase_index: usize,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub result: Option<CalibrationResult>,
    pub excluded_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFringe {
    pub intensity_index: usize,
    pub probe_intensity: f64,
    /// Mean voltage per phase step at the top efficiency.
    pub mean_voltages: Vec<f64>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub fringe: Option<FringeAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRecord {
    pub intensity_index: usize,
    pub phase_index: usize,
    pub gamma_used: f64,
    #[serde(flatten)]
    pub histogram: PhotonHistogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaStats {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    /// `sd / mean`
    pub relative_spread: f64,
    pub min: f64,
    pub max: f64,
}

impl GammaStats {
    fn from_values(values: &[f64]) -> Self {
        let (mean, var) = calib::mean_and_variance(values);
        let sd = if values.len() > 1 { var.sqrt() } else { 0.0 };
        Self {
            count: values.len(),
            mean,
            sd,
            relative_spread: sd / mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub intensity_index: usize,
    pub phase_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVisibility {
    pub intensity_index: usize,
    pub probe_intensity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
}

/// Summary of one analysis, written as `analysis/report.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub settings_total: usize,
    pub settings_calibrated: usize,
    pub gamma_mode: String,
    pub gamma: GammaStats,
    pub vmax_mode: VmaxMode,
    pub vmax_series: usize,
    pub overlap: OverlapEstimate,
    pub signal_intensity: f64,
    pub fitted_beta0: f64,
    pub epsilon: f64,
    pub epsilon_divisor: String,
    pub wigner_samples: usize,
    pub visibilities: Vec<SeriesVisibility>,
    pub skipped: Vec<SkippedCell>,
    pub files: Vec<String>,
}

/// Everything `analyze` computes, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub layout: RunLayout,
    pub calibrations: Vec<CellCalibration>,
    pub fringes: Vec<SeriesFringe>,
    pub histograms: Vec<HistogramRecord>,
    pub grid: WignerGrid,
    pub report: RunReport,
}

fn calibrate_setting(
    run: &LoadedRun,
    i: usize,
    p: usize,
    opts: &AnalysisOptions,
) -> CellCalibration {
    let mut cal = CellCalibration {
        intensity_index: i,
        phase_index: p,
        result: None,
        excluded_points: 0,
        error: None,
    };
    let outcome = calib::fano_points_with(run.setting(i, p), opts.fano()).and_then(|scan| {
        cal.excluded_points = scan.excluded.len();
        calib::fit_gamma(&scan.points)
    });
    match outcome {
        Ok(r) => cal.result = Some(r),
        Err(e) => {
            log::warn!("setting ({i}, {p}): {e}");
            cal.error = Some(e.to_string());
        }
    }
    cal
}

fn vmax_series(
    layout: &RunLayout,
    fringes: &[SeriesFringe],
    opts: &AnalysisOptions,
) -> Result<usize> {
    let ok: Vec<usize> = fringes
        .iter()
        .filter(|f| f.fringe.is_some())
        .map(|f| f.intensity_index)
        .collect();
    if ok.is_empty() {
        return Err(Error::Fit("no intensity series shows a fringe".into()));
    }
    let k = match opts.vmax_mode {
        VmaxMode::Closest => {
            let cands: Vec<f64> = ok.iter().map(|&k| layout.probe_intensities[k]).collect();
            ok[phase::closest_series(&cands, layout.signal_intensity()).expect("nonempty")]
        }
        VmaxMode::Dedicated => match opts.dedicated_series {
            Some(k) => k,
            None => {
                let s = layout.signal_intensity();
                layout
                    .probe_intensities
                    .iter()
                    .position(|b2| (b2 - s).abs() <= 1e-9 * s.max(1e-300))
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "dedicated V_max mode: no series at signal intensity {s}"
                        ))
                    })?
            }
        },
    };
    if !ok.contains(&k) {
        return Err(Error::InvalidConfig(format!(
            "V_max series {k} has no usable fringe"
        )));
    }
    Ok(k)
}

/// Runs the full analysis on loaded data without touching the filesystem.
pub fn analyze_loaded(run: &LoadedRun, opts: &AnalysisOptions) -> Result<Analysis> {
    opts.validate()?;
    let layout = &run.layout;
    let steps = layout.phase_steps;
    let n_settings = layout.n_intensities() * steps;

    // gain
    let calibrations: Vec<CellCalibration> = if opts.global_gamma {
        let mut out = Vec::with_capacity(n_settings);
        let mut found = None;
        for k in 0..n_settings {
            let (i, p) = (k / steps, k % steps);
            if found.is_none() {
                let c = calibrate_setting(run, i, p, opts);
                found = c.result;
                out.push(c);
            } else {
                out.push(CellCalibration {
                    intensity_index: i,
                    phase_index: p,
                    result: found,
                    excluded_points: 0,
                    error: None,
                });
            }
        }
        out
    } else {
        par::map_range(n_settings, |k| {
            calibrate_setting(run, k / steps, k % steps, opts)
        })
    };
    let skipped: Vec<SkippedCell> = calibrations
        .iter()
        .filter_map(|c| {
            c.error.as_ref().map(|e| SkippedCell {
                intensity_index: c.intensity_index,
                phase_index: c.phase_index,
                reason: e.clone(),
            })
        })
        .collect();
    let skipped_count = calibrations.iter().filter(|c| c.result.is_none()).count();
    log::info!(
        "calibrated {}/{n_settings} settings",
        n_settings - skipped_count
    );
    if 2 * skipped_count > n_settings {
        return Err(Error::CalibrationDominated {
            skipped: skipped_count,
            total: n_settings,
        });
    }
    let gammas: Vec<f64> = if opts.global_gamma {
        calibrations
            .iter()
            .find_map(|c| c.result.map(|r| vec![r.gamma]))
            .unwrap_or_default()
    } else {
        calibrations
            .iter()
            .filter_map(|c| c.result.map(|r| r.gamma))
            .collect()
    };

    // phase
    let fringes: Vec<SeriesFringe> = par::map_range(layout.n_intensities(), |i| {
        let mean_voltages: Vec<f64> = (0..steps)
            .map(|p| calib::mean_and_variance(run.cell(i, p, 0)).0)
            .collect();
        let (fringe, error) = match phase::analyze_fringe(&mean_voltages) {
            Ok(f) => (Some(f), None),
            Err(e) => {
                log::warn!("intensity series {i}: {e}");
                (None, Some(e.to_string()))
            }
        };
        SeriesFringe {
            intensity_index: i,
            probe_intensity: layout.probe_intensities[i],
            mean_voltages,
            fringe,
            error,
        }
    });
    let vmax_k = vmax_series(layout, &fringes, opts)?;
    let overlap = phase::overlap_from_visibility(
        fringes[vmax_k].fringe.as_ref().expect("checked").visibility,
    )?;

    // reconstruction
    let settings: Vec<(usize, usize)> = (0..n_settings)
        .map(|k| (k / steps, k % steps))
        .filter(|&(i, p)| {
            fringes[i].fringe.is_some() && calibrations[i * steps + p].result.is_some()
        })
        .collect();
    let per_setting = par::map(
        &settings,
        |&(i, p)| -> Result<(HistogramRecord, WignerSample)> {
            let gamma = calibrations[i * steps + p].result.expect("filtered").gamma;
            let hist = calib::rebin(run.cell(i, p, 0), gamma)?;
            let phi = fringes[i].fringe.as_ref().expect("filtered").phases[p];
            let beta = sim::probe_point(layout.probe_intensities[i], phi);
            let mut sample = wigner::wigner_from_hist(&hist, beta);
            sample.site = SampleSite { series: i, step: p };
            sample.phi = phi;
            let record = HistogramRecord {
                intensity_index: i,
                phase_index: p,
                gamma_used: gamma,
                histogram: hist,
            };
            Ok((record, sample))
        },
    );
    let mut histograms = Vec::with_capacity(per_setting.len());
    let mut samples = Vec::with_capacity(per_setting.len());
    for r in per_setting {
        let (h, s) = r?;
        histograms.push(h);
        samples.push(s);
    }
    let grid = WignerGrid::new(samples, Provenance::Reconstruction)?;
    log::info!("reconstructed {} samples, xi = {}", grid.len(), overlap.xi);
    let fitted_beta0 = wigner::fit_beta0(&grid, overlap.xi)?;
    let params = TheoryParams::new(fitted_beta0, overlap.xi)?;
    let epsilon = wigner::mean_error(&grid, |b| wigner::theory_reduced(b, params))?;

    let report = RunReport {
        settings_total: n_settings,
        settings_calibrated: n_settings - skipped_count,
        gamma_mode: if opts.global_gamma {
            "global"
        } else {
            "per-setting"
        }
        .into(),
        gamma: GammaStats::from_values(&gammas),
        vmax_mode: opts.vmax_mode,
        vmax_series: vmax_k,
        overlap,
        signal_intensity: layout.signal_intensity(),
        fitted_beta0,
        epsilon,
        epsilon_divisor: EPSILON_DIVISOR.into(),
        wigner_samples: grid.len(),
        visibilities: fringes
            .iter()
            .map(|f| SeriesVisibility {
                intensity_index: f.intensity_index,
                probe_intensity: f.probe_intensity,
                visibility: f.fringe.as_ref().map(|x| x.visibility),
            })
            .collect(),
        skipped,
        files: Vec::new(),
    };
    Ok(Analysis {
        layout: layout.clone(),
        calibrations,
        fringes,
        histograms,
        grid,
        report,
    })
}

#[derive(Serialize, Deserialize)]
struct CalibrationFile {
    cell: Vec<CellCalibration>,
}

#[derive(Serialize, Deserialize)]
struct FringeFile {
    series: Vec<SeriesFringe>,
}

#[derive(Serialize, Deserialize)]
struct HistogramFile {
    cell: Vec<HistogramRecord>,
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::InvalidConfig(format!("cannot encode TOML: {e}")))
}

fn from_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    toml::from_str(&read_text(path)?).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })
}

/// Delimited text, one row per sample: `re,im,abs_beta,phi,value,truncation_m,series,step`.
pub fn format_grid(grid: &WignerGrid) -> String {
    let mut s = String::from("re,im,abs_beta,phi,value,truncation_m,series,step\n");
    for x in grid.samples() {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            x.beta.re,
            x.beta.im,
            x.beta.norm(),
            x.phi,
            x.value,
            x.truncation_m,
            x.site.series,
            x.site.step
        )
        .unwrap();
    }
    s
}

pub fn parse_grid(path: &Path, text: &str, provenance: Provenance) -> Result<WignerGrid> {
    let mut samples = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(format!("expected 8 columns, got {}", f.len())));
        }
        let num = |j: usize| {
            f[j].parse::<f64>()
                .map_err(|e| bad(format!("column {j}: {e}")))
        };
        let int = |j: usize| {
            f[j].parse::<usize>()
                .map_err(|e| bad(format!("column {j}: {e}")))
        };
        samples.push(WignerSample {
            beta: crate::ComplexAmplitude::new(num(0)?, num(1)?),
            phi: num(3)?,
            value: num(4)?,
            truncation_m: int(5)?,
            tail_bound: 0.0,
            site: SampleSite {
                series: int(6)?,
                step: int(7)?,
            },
        });
    }
    WignerGrid::new(samples, provenance)
}

/// Writes the analysis artifacts under `<run>/analysis/` and returns the
/// report with its file inventory filled in.
pub fn write_analysis(analysis: &Analysis, run_dir: &Path) -> Result<RunReport> {
    let dir = run_dir.join(ANALYSIS_DIR);
    create_dir(&dir)?;
    let outputs = [
        (
            CALIBRATION_FILE,
            to_toml(&CalibrationFile {
                cell: analysis.calibrations.clone(),
            })?,
        ),
        (
            HISTOGRAM_FILE,
            to_toml(&HistogramFile {
                cell: analysis.histograms.clone(),
            })?,
        ),
        (
            FRINGE_FILE,
            to_toml(&FringeFile {
                series: analysis.fringes.clone(),
            })?,
        ),
        (WIGNER_FILE, format_grid(&analysis.grid)),
    ];
    let mut report = analysis.report.clone();
    report.files.clear();
    for (name, text) in &outputs {
        write_text(&dir.join(name), text)?;
        report.files.push(format!("{ANALYSIS_DIR}/{name}"));
    }
    report.files.push(format!("{ANALYSIS_DIR}/{REPORT_FILE}"));
    write_text(&dir.join(REPORT_FILE), &to_toml(&report)?)?;
    Ok(report)
}

/// Reads a run directory, analyzes it and writes the artifacts.
pub fn analyze(run_dir: &Path, opts: &AnalysisOptions) -> Result<Analysis> {
    let run = dataset::read_run(run_dir)?;
    let mut analysis = analyze_loaded(&run, opts)?;
    analysis.report = write_analysis(&analysis, run_dir)?;
    Ok(analysis)
}

pub fn read_report(run_dir: &Path) -> Result<RunReport> {
    from_toml(&run_dir.join(ANALYSIS_DIR).join(REPORT_FILE))
}

/// Output of the report stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub summary: String,
    pub sections: Vec<usize>,
    pub files: Vec<PathBuf>,
}

fn default_sections(report: &RunReport, fringes: &[SeriesFringe]) -> Vec<usize> {
    let ok: Vec<usize> = fringes
        .iter()
        .filter(|f| f.fringe.is_some())
        .map(|f| f.intensity_index)
        .collect();
    let mut s = Vec::new();
    if let (Some(&first), Some(&last)) = (ok.first(), ok.last()) {
        s.extend([first, report.vmax_series, last]);
    }
    s.sort_unstable();
    s.dedup();
    s
}

/// Emits plot-data files and a human-readable summary from a completed analysis.
pub fn report(run_dir: &Path, opts: &ReportOptions) -> Result<ReportOutput> {
    let adir = run_dir.join(ANALYSIS_DIR);
    let run_report = read_report(run_dir)?;
    let fringes: FringeFile = from_toml(&adir.join(FRINGE_FILE))?;
    let fringes = fringes.series;
    let grid_path = adir.join(WIGNER_FILE);
    if !grid_path.is_file() {
        return Err(Error::MissingArtifact(grid_path));
    }
    let grid = parse_grid(
        &grid_path,
        &read_text(&grid_path)?,
        Provenance::Reconstruction,
    )?;
    let layout = dataset::read_layout(run_dir)?;

    let sections = match &opts.sections {
        Some(s) => {
            if let Some(bad) = s
                .iter()
                .find(|&&k| fringes.get(k).and_then(|f| f.fringe.as_ref()).is_none())
            {
                return Err(Error::InvalidConfig(format!(
                    "section {bad} is not an analyzed intensity series"
                )));
            }
            s.clone()
        }
        None => default_sections(&run_report, &fringes),
    };

    let params = TheoryParams::new(run_report.fitted_beta0, run_report.overlap.xi)?;
    let beta0_measured = layout.signal_amplitude;
    let value_at = |i: usize, p: usize| {
        grid.samples()
            .iter()
            .find(|s| s.site.series == i && s.site.step == p)
    };

    let header = |col: &str| format!("intensity_index,probe_intensity,step,{col}\n");
    let mut series_out = [
        header("wigner"),
        header("mean_voltage"),
        header("cosine"),
        header("phi"),
    ];
    let mut sections_csv = String::from(
        "intensity_index,probe_intensity,step,phi,w_exp,w_theory_corrected,w_theory_uncorrected\n",
    );
    for &i in &sections {
        let f = &fringes[i];
        let fa = f.fringe.as_ref().expect("validated");
        let b2 = f.probe_intensity;
        for p in 0..layout.phase_steps {
            let w = value_at(i, p).map_or(String::from("nan"), |s| s.value.to_string());
            writeln!(series_out[0], "{i},{b2},{p},{w}").unwrap();
            writeln!(series_out[1], "{i},{b2},{p},{}", f.mean_voltages[p]).unwrap();
            writeln!(series_out[2], "{i},{b2},{p},{}", fa.cosines[p]).unwrap();
            writeln!(series_out[3], "{i},{b2},{p},{}", fa.phases[p]).unwrap();
        }
        let mut rows: Vec<&WignerSample> = grid
            .samples()
            .iter()
            .filter(|s| s.site.series == i)
            .collect();
        rows.sort_by(|a, b| a.phi.total_cmp(&b.phi).then(a.site.step.cmp(&b.site.step)));
        for s in rows {
            writeln!(
                sections_csv,
                "{i},{b2},{},{},{},{},{}",
                s.site.step,
                s.phi,
                s.value,
                wigner::theory_reduced(s.beta, params),
                wigner::theory_coherent(s.beta, beta0_measured)
            )
            .unwrap();
        }
    }

    let mut surface =
        String::from("intensity_index,phase_index,re,im,abs_beta,phi,w_exp,w_theory\n");
    for s in grid.samples() {
        writeln!(
            surface,
            "{},{},{},{},{},{},{},{}",
            s.site.series,
            s.site.step,
            s.beta.re,
            s.beta.im,
            s.beta.norm(),
            s.phi,
            s.value,
            wigner::theory_reduced(s.beta, params)
        )
        .unwrap();
    }

    let summary = match opts.format {
        ReportFormat::Text => summary_text(run_dir, &run_report),
        ReportFormat::Toml => to_toml(&run_report)?,
    };

    let rdir = run_dir.join(REPORT_DIR);
    create_dir(&rdir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        write_text(&rdir.join(name), text)?;
        files.push(PathBuf::from(REPORT_DIR).join(name));
        Ok(())
    };
    for (name, text) in SERIES_FILES.iter().zip(&series_out) {
        put(name, text)?;
    }
    put(SECTIONS_FILE, &sections_csv)?;
    put(SURFACE_FILE, &surface)?;
    put(SUMMARY_FILE, &summary)?;

    Ok(ReportOutput {
        summary,
        sections,
        files,
    })
}

fn summary_text(run_dir: &Path, r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "run: {}", run_dir.display());
    let _ = writeln!(
        s,
        "settings: {} total, {} calibrated, {} skipped",
        r.settings_total,
        r.settings_calibrated,
        r.skipped.len()
    );
    let g = &r.gamma;
    let _ = writeln!(
        s,
        "gain ({}): mean {} V, sd {} V, spread {}, range [{}, {}] over {} fit(s)",
        r.gamma_mode, g.mean, g.sd, g.relative_spread, g.min, g.max, g.count
    );
    let _ = writeln!(
        s,
        "V_max = {} from series {} ({:?} mode), overlap xi = {}",
        r.overlap.v_max_used, r.vmax_series, r.vmax_mode, r.overlap.xi
    );
    let _ = writeln!(s, "signal intensity (manifest) = {}", r.signal_intensity);
    let _ = writeln!(s, "fitted |beta0| = {}", r.fitted_beta0);
    let _ = writeln!(
        s,
        "mean error epsilon = {} ({} samples; divisor: {})",
        r.epsilon, r.wigner_samples, r.epsilon_divisor
    );
    let _ = writeln!(s, "visibility per series:");
    for v in &r.visibilities {
        match v.visibility {
            Some(x) => {
                let _ = writeln!(
                    s,
                    "  {:>3}  |beta|^2 = {}  V = {}",
                    v.intensity_index, v.probe_intensity, x
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "  {:>3}  |beta|^2 = {}  no fringe",
                    v.intensity_index, v.probe_intensity
                );
            }
        }
    }
    for k in &r.skipped {
        let _ = writeln!(
            s,
            "skipped setting ({}, {}): {}",
            k.intensity_index, k.phase_index, k.reason
        );
    }
    s
}
