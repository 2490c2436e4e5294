//! Experiment configuration: a JSON document describing the front end, the
//! scene, the sweep, and the methods to run. Command-line flags may override
//! the seed, trial count, method list, and output directory after loading.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Array and waveform dimensions shared by every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    /// Antennas in the uniform linear array.
    pub n_ant: usize,
    /// RF chains behind the analog combiner.
    pub m_rf: usize,
    /// OFDM subcarriers.
    pub k_sbcr: usize,
    /// Frames per observation window.
    pub t_frm: usize,
    /// Cyclic prefix length in samples.
    pub n_cp: usize,
}

/// How path angles and delays are laid out in each random scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSpec {
    /// Independent paths with individually drawn angles and delays.
    Discrete {
        /// Number of paths.
        l_ch: usize,
    },
    /// Clusters of subrays around shared centers, one delay per cluster.
    Clustered {
        /// Number of clusters.
        n_clusters: usize,
        /// Subrays per cluster.
        n_subrays: usize,
        /// Laplacian scale of the angular offsets, in degrees.
        angular_spread_deg: f64,
    },
}

/// Quantity varied across the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Signal-to-noise ratio in decibels.
    SnrDb,
    /// Number of frames.
    TFrm,
    /// Number of paths (discrete scenes) or clusters (clustered scenes).
    LCh,
}

/// Sweep axis plus the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Estimation methods and bounds selectable per experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Tensor decomposition followed by angle recovery and covariance
    /// reconstruction.
    Cpd,
    /// Subspace pseudospectrum peak search.
    Music,
    /// Greedy joint-sparse dictionary matching.
    Somp,
    /// Deterministic angle variance bound for the tensor pipeline.
    Crlb,
    /// Deterministic angle variance bound for the subspace estimator.
    MusicCrlb,
}

impl Method {
    /// Stable lowercase name used in CSV rows and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cpd => "cpd",
            Method::Music => "music",
            Method::Somp => "somp",
            Method::Crlb => "crlb",
            Method::MusicCrlb => "music_crlb",
        }
    }

    /// True for the closed-form bounds that need no measurement.
    pub fn is_bound(self) -> bool {
        matches!(self, Method::Crlb | Method::MusicCrlb)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "cpd" => Ok(Method::Cpd),
            "music" => Ok(Method::Music),
            "somp" => Ok(Method::Somp),
            "crlb" => Ok(Method::Crlb),
            "music_crlb" => Ok(Method::MusicCrlb),
            other => Err(format!(
                "unknown method `{other}` (expected cpd, music, somp, crlb, music_crlb)"
            )),
        }
    }
}

/// Decomposition solver knobs exposed through the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlsSpec {
    /// Sweep cap per restart.
    pub max_iters: usize,
    /// Relative fit-change stopping threshold.
    pub rel_tol: f64,
    /// Independent random initializations; best fit wins.
    pub n_restarts: usize,
}

impl Default for AlsSpec {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-8,
            n_restarts: 3,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("covest-out")
}

fn default_spacing_ratio() -> f64 {
    0.5
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: Dims,
    pub scene: SceneSpec,
    pub sweep: SweepSpec,
    /// Methods to run on each trial, in reporting order.
    pub methods: Vec<Method>,
    /// Trials per sweep value.
    pub n_trials: usize,
    /// Root of every per-trial RNG stream.
    pub base_seed: u64,
    #[serde(default)]
    pub als: AlsSpec,
    /// Directory receiving `results.csv`, `trials.csv`, and `meta.json`.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Operating SNR in dB, used whenever the sweep axis is not `snr_db`.
    #[serde(default)]
    pub snr_db: f64,
    /// Antenna spacing divided by carrier wavelength.
    #[serde(default = "default_spacing_ratio")]
    pub spacing_ratio: f64,
}

impl ExperimentConfig {
    /// Parses a JSON config file.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("cannot parse config {}: {e}", path.display()))
    }

    /// Applies command-line overrides on top of the file values.
    pub fn apply_overrides(
        &mut self,
        out: Option<PathBuf>,
        seed: Option<u64>,
        trials: Option<usize>,
        methods: Option<Vec<Method>>,
    ) {
        if let Some(out) = out {
            self.out_dir = out;
        }
        if let Some(seed) = seed {
            self.base_seed = seed;
        }
        if let Some(trials) = trials {
            self.n_trials = trials;
        }
        if let Some(methods) = methods {
            self.methods = methods;
        }
    }

    /// Checks every cross-field constraint; returns the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let d = &self.dims;
        if d.n_ant == 0 || d.m_rf == 0 || d.k_sbcr == 0 || d.t_frm == 0 || d.n_cp == 0 {
            return Err("all dimensions must be at least 1".into());
        }
        if d.m_rf > d.n_ant {
            return Err(format!(
                "m_rf = {} cannot exceed n_ant = {}",
                d.m_rf, d.n_ant
            ));
        }
        if d.n_cp > d.k_sbcr {
            return Err(format!(
                "n_cp = {} cannot exceed k_sbcr = {}",
                d.n_cp, d.k_sbcr
            ));
        }
        match self.scene {
            SceneSpec::Discrete { l_ch } => {
                if l_ch == 0 {
                    return Err("discrete scene needs at least one path".into());
                }
            }
            SceneSpec::Clustered {
                n_clusters,
                n_subrays,
                angular_spread_deg,
            } => {
                if n_clusters == 0 || n_subrays == 0 {
                    return Err("clustered scene needs at least one cluster and subray".into());
                }
                if !(angular_spread_deg > 0.0) || !angular_spread_deg.is_finite() {
                    return Err("angular_spread_deg must be positive and finite".into());
                }
            }
        }
        if self.sweep.values.is_empty() {
            return Err("sweep value list must be non-empty".into());
        }
        for &v in &self.sweep.values {
            match self.sweep.axis {
                SweepAxis::SnrDb => {
                    if v.is_nan() {
                        return Err("snr_db sweep values must not be NaN".into());
                    }
                }
                SweepAxis::TFrm | SweepAxis::LCh => {
                    if !v.is_finite() || v < 1.0 || v.fract() != 0.0 {
                        return Err(format!(
                            "{} sweep values must be positive integers, got {v}",
                            axis_name(self.sweep.axis)
                        ));
                    }
                }
            }
        }
        if self.methods.is_empty() {
            return Err("method list must be non-empty".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(format!("method `{m}` listed twice"));
            }
        }
        if self.n_trials == 0 {
            return Err("n_trials must be at least 1".into());
        }
        if self.als.max_iters == 0 || self.als.n_restarts == 0 {
            return Err("als needs at least one sweep and one restart".into());
        }
        if !(self.als.rel_tol > 0.0) {
            return Err("als rel_tol must be positive".into());
        }
        if !self.snr_db.is_finite() && self.snr_db != f64::INFINITY {
            return Err("snr_db must be finite or +inf (noiseless)".into());
        }
        if !(self.spacing_ratio > 0.0) || !self.spacing_ratio.is_finite() {
            return Err("spacing_ratio must be positive and finite".into());
        }
        Ok(())
    }
}

/// Config-file spelling of a sweep axis.
pub fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::SnrDb => "snr_db",
        SweepAxis::TFrm => "t_frm",
        SweepAxis::LCh => "l_ch",
    }
}

/// Parses a comma-separated method list as given on the command line.
pub fn parse_method_list(s: &str) -> Result<Vec<Method>, String> {
    let methods: Vec<Method> = s
        .split(',')
        .filter(|part| !part.trim().is_empty())
        .map(Method::from_str)
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err("method list must be non-empty".into());
    }
    Ok(methods)
}
