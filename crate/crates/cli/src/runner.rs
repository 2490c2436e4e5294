//! Monte Carlo execution: one seeded trial draws a scene, a combiner, and a
//! noisy measurement, then every enabled method consumes that identical
//! measurement. Trials run in parallel with per-trial RNG streams derived
//! purely from (base seed, sweep value, trial index), so results do not
//! depend on scheduling.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use covest_core::acquisition::{draw_combiner, measure};
use covest_core::als::{cpd_als, AlsOptions, InitMode};
use covest_core::baselines::{
    build_dictionary, default_grid_size, music_estimate, somp_estimate, DEFAULT_MUSIC_GRID,
};
use covest_core::channel::{
    channel_tensor, draw_scene, ChannelScene, ClusterConfig, SceneConfig, SceneKind,
};
use covest_core::covariance::{
    aoa_mse, estimate_covariance, rpe, rpe_from_subspace, rpe_lower_bound, true_covariance,
};
use covest_core::crlb::{crlb_phi, fim_blocks, music_crlb};
use covest_core::{Error, Real};

use crate::config::{ExperimentConfig, Method, SceneSpec, SweepAxis};

/// Everything a single method produced on one trial. A failed method leaves
/// all metrics unset and carries the failure text instead.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MethodOutcome {
    /// Captured-energy ratio against the true covariance.
    pub eta: Option<f64>,
    /// Assignment-matched squared angle error, rad^2. Only recorded when
    /// the method estimates exactly as many angles as the scene has paths.
    pub aoa_mse: Option<f64>,
    /// Mean over paths of the angle variance bound, rad^2.
    pub crlb_phi_mean: Option<f64>,
    /// Efficiency-loss bound implied by the angle bounds.
    pub rpe_loss_bound: Option<f64>,
    /// Sweeps spent by the winning decomposition restart.
    pub als_iterations: Option<usize>,
    /// Relative fit residual of the winning restart.
    pub als_final_residual: Option<f64>,
    /// Why the method produced nothing, when it failed.
    pub error: Option<String>,
}

/// One trial: the sweep point, the per-method outcomes in reporting order,
/// and the wall time spent.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub trial_index: usize,
    pub outcomes: Vec<(Method, MethodOutcome)>,
    pub wall_time_s: f64,
}

/// One row of the aggregated results table.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep_value: f64,
    pub method: Method,
    pub metric: &'static str,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    /// Trials that actually produced this metric.
    pub n_effective: usize,
}

/// Finalizer from splitmix64; decorrelates consecutive inputs.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// RNG seed of one trial, independent of scheduling and of which other
/// trials exist.
pub fn trial_seed(base_seed: u64, sweep_value: f64, trial_index: usize) -> u64 {
    base_seed ^ splitmix64(sweep_value.to_bits() ^ splitmix64(trial_index as u64))
}

/// Noise level for a given SNR in dB, under SNR = 1/sigma^2. `+inf` maps
/// to exactly zero noise.
pub fn sigma_for_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// Dimensions and method orders of one trial after the sweep value has been
/// substituted into the configuration.
#[derive(Debug, Clone)]
struct TrialSetting {
    scene_cfg: SceneConfig<Real>,
    m_rf: usize,
    sigma: f64,
    cpd_rank: usize,
    music_l: usize,
    somp_l: usize,
    clustered: bool,
}

fn integral(value: f64, what: &str) -> Result<usize, Error> {
    if !value.is_finite() || value < 1.0 || value.fract() != 0.0 {
        return Err(Error::Config(format!(
            "{what} sweep value must be a positive integer, got {value}"
        )));
    }
    Ok(value as usize)
}

fn resolve(cfg: &ExperimentConfig, sweep_value: f64) -> Result<TrialSetting, Error> {
    let mut t_frm = cfg.dims.t_frm;
    let mut snr_db = cfg.snr_db;
    let mut scene = cfg.scene;
    match cfg.sweep.axis {
        SweepAxis::SnrDb => snr_db = sweep_value,
        SweepAxis::TFrm => t_frm = integral(sweep_value, "t_frm")?,
        SweepAxis::LCh => {
            scene = match scene {
                SceneSpec::Discrete { .. } => SceneSpec::Discrete {
                    l_ch: integral(sweep_value, "l_ch")?,
                },
                SceneSpec::Clustered {
                    n_subrays,
                    angular_spread_deg,
                    ..
                } => SceneSpec::Clustered {
                    n_clusters: integral(sweep_value, "l_ch")?,
                    n_subrays,
                    angular_spread_deg,
                },
            };
        }
    }
    let (kind, cpd_rank, music_l, somp_l, clustered) = match scene {
        SceneSpec::Discrete { l_ch } => (
            SceneKind::Discrete { n_paths: l_ch },
            l_ch,
            l_ch,
            l_ch,
            false,
        ),
        SceneSpec::Clustered {
            n_clusters,
            n_subrays,
            angular_spread_deg,
        } => (
            SceneKind::Clustered(ClusterConfig {
                n_clusters,
                n_subrays,
                angular_spread_rad: angular_spread_deg.to_radians(),
            }),
            cfg.dims.m_rf,
            n_clusters,
            cfg.dims.m_rf,
            true,
        ),
    };
    Ok(TrialSetting {
        scene_cfg: SceneConfig {
            n_ant: cfg.dims.n_ant,
            k_sbcr: cfg.dims.k_sbcr,
            t_frm,
            n_cp: cfg.dims.n_cp,
            spacing_ratio: cfg.spacing_ratio,
            kind,
        },
        m_rf: cfg.dims.m_rf,
        sigma: sigma_for_snr_db(snr_db),
        cpd_rank,
        music_l,
        somp_l,
        clustered,
    })
}

/// Records estimated angles against the scene when the counts line up;
/// methods with a different model order simply skip the angle score.
fn mse_if_matched(scene: &ChannelScene<Real>, est: &[f64]) -> Option<f64> {
    if est.len() == scene.n_paths() {
        aoa_mse(scene.aoas_rad(), est).ok()
    } else {
        None
    }
}

fn run_cpd(
    cfg: &ExperimentConfig,
    setting: &TrialSetting,
    scene: &ChannelScene<Real>,
    y: &covest_core::Tensor3,
    comb: &covest_core::acquisition::HybridCombiner<Real>,
    r_true: &covest_core::covariance::CovarianceMatrix<Real>,
    seed: u64,
) -> Result<MethodOutcome, Error> {
    let mut opts = AlsOptions::new(setting.cpd_rank);
    opts.max_iters = cfg.als.max_iters;
    opts.rel_tol = cfg.als.rel_tol;
    opts.n_restarts = cfg.als.n_restarts;
    // First restart seeds from the slice pencil, the rest stay random; this
    // rescues scenes whose nearly collinear paths stall random starts.
    opts.init_mode = InitMode::SvdWarm;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0xA15));
    let (factors, diag) = cpd_als(y, &opts, &mut rng)?;
    let (cov, estimates) = estimate_covariance(&factors, comb, setting.scene_cfg.spacing_ratio)?;
    let eta = rpe(r_true, &cov, setting.m_rf)?.eta;
    let angles: Vec<f64> = estimates.iter().map(|e| e.phi_hat).collect();
    Ok(MethodOutcome {
        eta: Some(eta),
        aoa_mse: mse_if_matched(scene, &angles),
        als_iterations: Some(diag.iterations),
        als_final_residual: Some(diag.final_residual),
        ..MethodOutcome::default()
    })
}

fn run_music(
    setting: &TrialSetting,
    scene: &ChannelScene<Real>,
    y: &covest_core::Tensor3,
    comb: &covest_core::acquisition::HybridCombiner<Real>,
    r_true: &covest_core::covariance::CovarianceMatrix<Real>,
) -> Result<MethodOutcome, Error> {
    let est = music_estimate(
        y,
        comb,
        setting.music_l,
        DEFAULT_MUSIC_GRID,
        setting.scene_cfg.spacing_ratio,
    )?;
    let eta = rpe_from_subspace(r_true, &est.subspace, setting.m_rf)?.eta;
    Ok(MethodOutcome {
        eta: Some(eta),
        aoa_mse: mse_if_matched(scene, &est.aoas_rad),
        ..MethodOutcome::default()
    })
}

fn run_somp(
    setting: &TrialSetting,
    scene: &ChannelScene<Real>,
    y: &covest_core::Tensor3,
    comb: &covest_core::acquisition::HybridCombiner<Real>,
    r_true: &covest_core::covariance::CovarianceMatrix<Real>,
) -> Result<MethodOutcome, Error> {
    let n_ant = setting.scene_cfg.n_ant;
    let dict = build_dictionary(
        n_ant,
        default_grid_size(n_ant),
        setting.scene_cfg.spacing_ratio,
    )?;
    let est = somp_estimate(y, comb, &dict, setting.somp_l)?;
    let eta = rpe(r_true, &est.covariance, setting.m_rf)?.eta;
    let angles: Vec<f64> = est
        .support
        .iter()
        .map(|&j| dict.grid_angles()[j])
        .collect();
    Ok(MethodOutcome {
        eta: Some(eta),
        aoa_mse: mse_if_matched(scene, &angles),
        ..MethodOutcome::default()
    })
}

fn run_crlb(
    setting: &TrialSetting,
    scene: &ChannelScene<Real>,
    comb: &covest_core::acquisition::HybridCombiner<Real>,
) -> Result<MethodOutcome, Error> {
    if setting.clustered {
        return Err(Error::NotApplicable(
            "angle bounds are defined for discrete-path scenes only".into(),
        ));
    }
    let blocks = fim_blocks(scene, comb, setting.sigma)?;
    let bound = crlb_phi(&blocks)?;
    let mean = bound.iter().sum::<f64>() / bound.len() as f64;
    let loss = rpe_lower_bound(
        scene.aoas_rad(),
        bound.as_slice(),
        setting.scene_cfg.n_ant,
        setting.scene_cfg.spacing_ratio,
    )?;
    Ok(MethodOutcome {
        crlb_phi_mean: Some(mean),
        rpe_loss_bound: Some(loss),
        ..MethodOutcome::default()
    })
}

fn run_music_crlb(
    setting: &TrialSetting,
    scene: &ChannelScene<Real>,
    comb: &covest_core::acquisition::HybridCombiner<Real>,
) -> Result<MethodOutcome, Error> {
    if setting.clustered {
        return Err(Error::NotApplicable(
            "angle bounds are defined for discrete-path scenes only".into(),
        ));
    }
    let bound = music_crlb(scene, comb, setting.sigma)?;
    let mean = bound.iter().sum::<f64>() / bound.len() as f64;
    Ok(MethodOutcome {
        crlb_phi_mean: Some(mean),
        ..MethodOutcome::default()
    })
}

/// Runs every enabled method on one freshly drawn trial. The scene, the
/// combiner, and the measurement are drawn once from the trial's own RNG
/// stream; method failures are recorded in place, never propagated.
pub fn run_trial(
    cfg: &ExperimentConfig,
    sweep_value: f64,
    trial_index: usize,
) -> Result<TrialRecord, Error> {
    let started = Instant::now();
    let setting = resolve(cfg, sweep_value)?;
    let seed = trial_seed(cfg.base_seed, sweep_value, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = draw_scene(&setting.scene_cfg, &mut rng)?;
    let comb = draw_combiner(setting.scene_cfg.n_ant, setting.m_rf, &mut rng)?;
    let (h, factors) = channel_tensor(&scene);
    let y = measure(&h, &comb, setting.sigma, &mut rng)?;
    let r_true = true_covariance(&factors);

    let mut outcomes = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let result = match method {
            Method::Cpd => run_cpd(cfg, &setting, &scene, &y, &comb, &r_true, seed),
            Method::Music => run_music(&setting, &scene, &y, &comb, &r_true),
            Method::Somp => run_somp(&setting, &scene, &y, &comb, &r_true),
            Method::Crlb => run_crlb(&setting, &scene, &comb),
            Method::MusicCrlb => run_music_crlb(&setting, &scene, &comb),
        };
        let outcome = result.unwrap_or_else(|e| MethodOutcome {
            error: Some(e.to_string()),
            ..MethodOutcome::default()
        });
        outcomes.push((method, outcome));
    }
    Ok(TrialRecord {
        sweep_value,
        trial_index,
        outcomes,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Runs the full cross product of sweep values and trial indices. Trials
/// execute in parallel; the returned order is value-major then trial-major
/// regardless of scheduling.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>, Error> {
    let jobs: Vec<(f64, usize)> = cfg
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..cfg.n_trials).map(move |i| (v, i)))
        .collect();
    jobs.par_iter()
        .map(|&(value, index)| run_trial(cfg, value, index))
        .collect()
}

/// Metrics reported per method, in column order.
pub fn metrics_for(method: Method) -> &'static [&'static str] {
    match method {
        Method::Cpd => &["eta", "aoa_mse", "als_iterations", "als_final_residual"],
        Method::Music | Method::Somp => &["eta", "aoa_mse"],
        Method::Crlb => &["crlb_phi_mean", "rpe_loss_bound"],
        Method::MusicCrlb => &["crlb_phi_mean"],
    }
}

/// Pulls one named metric out of an outcome.
pub fn metric_value(outcome: &MethodOutcome, metric: &str) -> Option<f64> {
    match metric {
        "eta" => outcome.eta,
        "aoa_mse" => outcome.aoa_mse,
        "crlb_phi_mean" => outcome.crlb_phi_mean,
        "rpe_loss_bound" => outcome.rpe_loss_bound,
        "als_iterations" => outcome.als_iterations.map(|n| n as f64),
        "als_final_residual" => outcome.als_final_residual,
        _ => None,
    }
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Reduces trial records to one row per (sweep value, method, metric),
/// keeping the configured value and method orders. Null results are
/// excluded from the statistics and counted out of `n_effective`.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &value in &cfg.sweep.values {
        for &method in &cfg.methods {
            for &metric in metrics_for(method) {
                let mut values: Vec<f64> = records
                    .iter()
                    .filter(|r| r.sweep_value.to_bits() == value.to_bits())
                    .flat_map(|r| {
                        r.outcomes
                            .iter()
                            .filter(|(m, _)| *m == method)
                            .filter_map(|(_, o)| metric_value(o, metric))
                    })
                    .collect();
                values.sort_by(f64::total_cmp);
                let n = values.len();
                let mean = if n == 0 {
                    f64::NAN
                } else {
                    values.iter().sum::<f64>() / n as f64
                };
                rows.push(AggregateRow {
                    sweep_value: value,
                    method,
                    metric,
                    mean,
                    median: quantile(&values, 0.5),
                    p10: quantile(&values, 0.1),
                    p90: quantile(&values, 0.9),
                    n_effective: n,
                });
            }
        }
    }
    rows
}
