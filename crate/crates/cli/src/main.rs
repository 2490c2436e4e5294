//! `covest`: run covariance-estimation experiments from the command line.

use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use covest::config::{parse_method_list, Dims, ExperimentConfig, Method, SceneSpec, SweepAxis, SweepSpec};
use covest::output::{render_summary, write_meta_json, write_results_csv, write_trials_csv};
use covest::runner::{aggregate, sweep};
use covest_core::Error;

#[derive(Parser)]
#[command(
    name = "covest",
    version,
    about = "Spatial channel covariance estimation experiments for hybrid arrays"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte Carlo sweep described by a JSON config file.
    Sweep {
        /// Path to the experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base RNG seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per sweep value (overrides the config).
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated method list (overrides the config),
        /// e.g. cpd,music,somp,crlb.
        #[arg(long)]
        methods: Option<String>,
    },
    /// Evaluate only the deterministic bound curves, without Monte Carlo.
    Crlb {
        /// Path to the experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a reduced built-in SNR sweep on the reference six-path setup.
    Demo {
        /// Output directory.
        #[arg(long, default_value = "covest-demo")]
        out: PathBuf,
        /// Trials per sweep value.
        #[arg(long, default_value_t = 3)]
        trials: usize,
    },
}

/// Failures ranked by exit code: 2 config, 3 I/O, 4 numerical.
enum AppError {
    Config(String),
    Io(String),
    Numerical(String),
}

impl AppError {
    fn code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 3,
            AppError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Io(m) | AppError::Numerical(m) => m,
        }
    }
}

fn from_core(e: Error) -> AppError {
    match e {
        Error::Config(m) => AppError::Config(m),
        other => AppError::Numerical(other.to_string()),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, AppError> {
    ExperimentConfig::load(path).map_err(AppError::Config)
}

fn write_outputs(
    cfg: &ExperimentConfig,
    records: &[covest::runner::TrialRecord],
    include_trials: bool,
) -> Result<(), AppError> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| AppError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let rows = aggregate(cfg, records);
    let results = dir.join("results.csv");
    write_results_csv(&results, &rows)
        .map_err(|e| AppError::Io(format!("cannot write {}: {e}", results.display())))?;
    if include_trials {
        let trials = dir.join("trials.csv");
        write_trials_csv(&trials, records)
            .map_err(|e| AppError::Io(format!("cannot write {}: {e}", trials.display())))?;
    }
    let meta = dir.join("meta.json");
    write_meta_json(&meta, cfg)
        .map_err(|e| AppError::Io(format!("cannot write {}: {e}", meta.display())))?;
    print!("{}", render_summary(&rows));
    println!(
        "wrote {}{} and {}",
        results.display(),
        if include_trials {
            format!(", {}", dir.join("trials.csv").display())
        } else {
            String::new()
        },
        meta.display()
    );
    Ok(())
}

fn run_sweep(cfg: ExperimentConfig) -> Result<(), AppError> {
    cfg.validate().map_err(AppError::Config)?;
    let records = sweep(&cfg).map_err(from_core)?;
    write_outputs(&cfg, &records, true)
}

fn run_crlb(mut cfg: ExperimentConfig) -> Result<(), AppError> {
    if matches!(cfg.scene, SceneSpec::Clustered { .. }) {
        return Err(AppError::Config(
            "bound curves are defined for discrete-path scenes only".into(),
        ));
    }
    let mut bounds: Vec<Method> = cfg
        .methods
        .iter()
        .copied()
        .filter(|m| m.is_bound())
        .collect();
    if bounds.is_empty() {
        bounds = vec![Method::Crlb, Method::MusicCrlb];
    }
    cfg.methods = bounds;
    // One deterministic scene per sweep value; nothing is averaged.
    cfg.n_trials = 1;
    cfg.validate().map_err(AppError::Config)?;
    let records = sweep(&cfg).map_err(from_core)?;
    write_outputs(&cfg, &records, false)
}

fn demo_config(out: PathBuf, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        dims: Dims {
            n_ant: 64,
            m_rf: 8,
            k_sbcr: 128,
            t_frm: 20,
            n_cp: 32,
        },
        scene: SceneSpec::Discrete { l_ch: 6 },
        sweep: SweepSpec {
            axis: SweepAxis::SnrDb,
            values: vec![-10.0, 0.0, 10.0, 20.0],
        },
        methods: vec![Method::Cpd, Method::Crlb, Method::MusicCrlb],
        n_trials: trials,
        base_seed: 2024,
        als: covest::config::AlsSpec {
            max_iters: 300,
            rel_tol: 1e-7,
            n_restarts: 2,
        },
        out_dir: out,
        snr_db: 0.0,
        spacing_ratio: 0.5,
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.cmd {
        Cmd::Sweep {
            config,
            out,
            seed,
            trials,
            methods,
        } => {
            let mut cfg = load_config(&config)?;
            let methods = methods
                .map(|s| parse_method_list(&s))
                .transpose()
                .map_err(AppError::Config)?;
            cfg.apply_overrides(out, seed, trials, methods);
            run_sweep(cfg)
        }
        Cmd::Crlb { config, out } => {
            let mut cfg = load_config(&config)?;
            cfg.apply_overrides(out, None, None, None);
            run_crlb(cfg)
        }
        Cmd::Demo { out, trials } => {
            let cfg = demo_config(out, trials.max(1));
            run_sweep(cfg)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        process::exit(e.code());
    }
}
