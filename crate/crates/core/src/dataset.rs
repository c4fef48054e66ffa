//! On-disk run layout.
//!
//! ```text
//! <run>/manifest.toml                 acquisition layout (ExperimentConfig fields)
//! <run>/cells/i000_p000_e000.txt      one voltage per line
//! <run>/ground_truth_phases.csv       simulator-only sidecar, never read by analysis
//! ```
//!
//! Cell files are named by intensity, phase-step and efficiency index. Any
//! directory following this layout can be analyzed, whether written by
//! [`write_dataset`] or assembled by hand. A hand-written manifest needs only
//! the fields of [`RunLayout`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::sim::{CellIndex, ShotDataset};
use crate::{par, ComplexAmplitude, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CELLS_DIR: &str = "cells";
pub const GROUND_TRUTH_FILE: &str = "ground_truth_phases.csv";

/// Relative path of a cell file inside a run directory.
pub fn cell_file_name(cell: CellIndex) -> String {
    format!(
        "i{:03}_p{:03}_e{:03}.txt",
        cell.intensity, cell.phase, cell.eta
    )
}

/// What the analysis needs to know about an acquisition: the independently
/// measured signal and probe intensities and the scan geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLayout {
    pub signal_amplitude: ComplexAmplitude,
    pub probe_intensities: Vec<f64>,
    pub phase_steps: usize,
    pub eta_values: Vec<f64>,
    #[serde(default)]
    pub shots_per_point: Option<usize>,
}

impl RunLayout {
    pub fn validate(&self) -> Result<()> {
        if self.probe_intensities.is_empty() || self.phase_steps == 0 || self.eta_values.is_empty()
        {
            return Err(Error::InvalidConfig(
                "manifest needs probe_intensities, phase_steps >= 1 and eta_values".into(),
            ));
        }
        if self.eta_values.windows(2).any(|w| w[1] >= w[0])
            || self.eta_values.iter().any(|e| !(*e > 0.0 && *e <= 1.0))
        {
            return Err(Error::InvalidConfig(
                "eta_values must be descending within (0, 1]".into(),
            ));
        }
        if self
            .probe_intensities
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(Error::InvalidConfig(
                "probe intensities must be >= 0".into(),
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

    pub fn signal_intensity(&self) -> f64 {
        self.signal_amplitude.norm_sqr()
    }

    pub fn cells(&self) -> Vec<CellIndex> {
        let mut out = Vec::with_capacity(self.n_intensities() * self.phase_steps * self.n_etas());
        for intensity in 0..self.n_intensities() {
            for phase in 0..self.phase_steps {
                for eta in 0..self.n_etas() {
                    out.push(CellIndex {
                        intensity,
                        phase,
                        eta,
                    });
                }
            }
        }
        out
    }
}

/// Voltage records loaded from a run directory, in [`RunLayout::cells`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub layout: RunLayout,
    pub records: Vec<Vec<f64>>,
}

impl LoadedRun {
    pub fn cell(&self, intensity: usize, phase: usize, eta: usize) -> &[f64] {
        let n_eta = self.layout.n_etas();
        &self.records[(intensity * self.layout.phase_steps + phase) * n_eta + eta]
    }

    /// All efficiency groups of one (intensity, phase) setting.
    pub fn setting(&self, intensity: usize, phase: usize) -> &[Vec<f64>] {
        let n_eta = self.layout.n_etas();
        let start = (intensity * self.layout.phase_steps + phase) * n_eta;
        &self.records[start..start + n_eta]
    }
}

pub(crate) fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes a simulated dataset; returns the files written relative to `dir`.
pub fn write_dataset(dataset: &ShotDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    let cells_dir = dir.join(CELLS_DIR);
    create_dir(&cells_dir)?;

    let manifest = toml::to_string(&dataset.config)
        .map_err(|e| Error::InvalidConfig(format!("cannot encode manifest: {e}")))?;
    write_text(&dir.join(MANIFEST_FILE), &manifest)?;

    let cells: Vec<CellIndex> = dataset.cells().collect();
    let written = par::map(&cells, |&cell| -> Result<PathBuf> {
        let rel = Path::new(CELLS_DIR).join(cell_file_name(cell));
        write_text(&dir.join(&rel), &format_values(dataset.cell(cell)))?;
        Ok(rel)
    });

    let c = &dataset.config;
    let mut truth = String::from(
        "# GROUND TRUTH: realized probe phases from the simulator. Not an analysis input.\n\
         intensity_index,phase_index,phase_rad\n",
    );
    for i in 0..c.n_intensities() {
        for p in 0..c.phase_steps {
            writeln!(truth, "{i},{p},{}", dataset.true_phase(i, p)).unwrap();
        }
    }
    write_text(&dir.join(GROUND_TRUTH_FILE), &truth)?;

    let mut files = vec![PathBuf::from(MANIFEST_FILE)];
    for w in written {
        files.push(w?);
    }
    files.push(PathBuf::from(GROUND_TRUTH_FILE));
    Ok(files)
}

/// One value per line, shortest representation that parses back to the same `f64`.
pub fn format_values(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 8);
    for v in values {
        writeln!(s, "{v}").unwrap();
    }
    s
}

pub fn parse_values(path: &Path, text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            msg: format!("{e}: {t:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: "non-finite voltage".into(),
            });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_layout(dir: &Path) -> Result<RunLayout> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::PartialData {
            missing: vec![MANIFEST_FILE.to_string()],
        });
    }
    let layout: RunLayout = toml::from_str(&read_text(&path)?).map_err(|e| Error::Parse {
        path: path.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    layout.validate()?;
    Ok(layout)
}

/// Loads every cell of a run. Missing cell files are reported together.
pub fn read_run(dir: &Path) -> Result<LoadedRun> {
    let layout = read_layout(dir)?;
    let cells = layout.cells();
    let missing: Vec<String> = cells
        .iter()
        .map(|&c| Path::new(CELLS_DIR).join(cell_file_name(c)))
        .filter(|rel| !dir.join(rel).is_file())
        .map(|rel| rel.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::PartialData { missing });
    }
    let loaded = par::map(&cells, |&c| -> Result<Vec<f64>> {
        let path = dir.join(CELLS_DIR).join(cell_file_name(c));
        parse_values(&path, &read_text(&path)?)
    });
    let records = loaded.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LoadedRun { layout, records })
}

/// Ground-truth phases, indexed `intensity * phase_steps + step`. Test and
/// validation use only.
pub fn read_ground_truth(dir: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let path = dir.join(GROUND_TRUTH_FILE);
    let text = read_text(&path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("intensity_index") || line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            path: path.clone(),
            line: k + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad("expected 3 columns"));
        }
        let i = f[0].trim().parse().map_err(|_| bad("intensity index"))?;
        let p = f[1].trim().parse().map_err(|_| bad("phase index"))?;
        let v = f[2].trim().parse().map_err(|_| bad("phase"))?;
        out.push((i, p, v));
    }
    Ok(out)
}
