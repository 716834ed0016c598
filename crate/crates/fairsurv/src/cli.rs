use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fairsurv_core::train::Variant;

use crate::commands::{self, EvaluateOptions, FitOptions};
use crate::config::ExperimentConfig;
use crate::dataset::Preset;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "fairsurv", version, about = "Individually fair Cox models: fit, evaluate, sweep, ablate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model; writes models/ and traces/
    Fit {
        #[command(flatten)]
        common: Common,
        /// train on every fold except this one
        #[arg(long)]
        fold: Option<usize>,
        /// also dump the training input-similarity matrix to reports/
        #[arg(long)]
        export_similarity: bool,
    },
    /// Cross-validated evaluation; writes reports/
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// score a saved model on the whole dataset instead
        #[arg(long)]
        model: Option<PathBuf>,
        /// cross-validate a second variant on the same folds
        #[arg(long)]
        compare: Option<Variant>,
    },
    /// Grid over gamma and k; writes sweeps/
    Sweep {
        #[command(flatten)]
        common: Common,
        /// comma-separated gamma values
        #[arg(long, value_delimiter = ',')]
        gamma_grid: Option<Vec<f64>>,
        /// comma-separated k values
        #[arg(long, value_delimiter = ',')]
        k_grid: Option<Vec<usize>>,
    },
    /// Fair vs Lipschitz-penalty variant on identical folds; writes reports/
    Ablation {
        #[command(flatten)]
        common: Common,
        /// add the unregularized model as a third row
        #[arg(long)]
        include_plain: bool,
    },
    /// Generate a synthetic dataset; writes data/
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        /// comma-separated true coefficients
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta: Option<Vec<f64>>,
        #[arg(long)]
        censor_rate: Option<f64>,
        /// planted-misalignment generator
        #[arg(long)]
        misaligned: bool,
        /// file name stem under data/
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment config; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// time column (overrides the preset)
    #[arg(long)]
    pub time_col: Option<String>,
    /// event column, 1 = event, 0 = censored
    #[arg(long)]
    pub event_col: Option<String>,
    /// seeds folds, batch order and subsampling
    #[arg(long)]
    pub seed: Option<u64>,
    /// fair, lipschitz or plain
    #[arg(long)]
    pub variant: Option<Variant>,
    /// fairness weight
    #[arg(long)]
    pub gamma: Option<f64>,
    /// ranking depth of FNDCG@k
    #[arg(long)]
    pub k: Option<usize>,
    /// cross-validation folds
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// surrogate temperature
    #[arg(long)]
    pub temperature: Option<f64>,
    /// output root (models/, traces/, reports/, sweeps/, data/)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// max records per evaluation split before O(n^2) similarity work
    #[arg(long)]
    pub subsample_cap: Option<usize>,
    /// give tied risk pairs half credit in C-index and tAUC
    #[arg(long)]
    pub tie_credit: bool,
}

impl Common {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.data {
            cfg.data.path = Some(v.clone());
        }
        if let Some(v) = self.preset {
            cfg.data.preset = Some(v);
        }
        if let Some(v) = &self.time_col {
            cfg.data.time = Some(v.clone());
        }
        if let Some(v) = &self.event_col {
            cfg.data.event = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.train.seed = v;
        }
        if let Some(v) = self.variant {
            cfg.train.variant = v;
        }
        if let Some(v) = self.gamma {
            cfg.train.gamma = v;
        }
        if let Some(v) = self.k {
            cfg.train.k = v;
        }
        if let Some(v) = self.folds {
            cfg.eval.n_folds = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.temperature {
            cfg.train.temperature = v;
        }
        if let Some(v) = &self.out {
            cfg.output = v.clone();
        }
        if let Some(v) = self.subsample_cap {
            cfg.eval.subsample_cap = v;
        }
        if self.tie_credit {
            cfg.eval.tie_credit = true;
        }
        Ok(cfg)
    }
}

/// Runs a parsed command line and returns the files written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Fit {
            common,
            fold,
            export_similarity,
        } => commands::cmd_fit(
            &common.resolve()?,
            &FitOptions {
                fold,
                export_similarity,
            },
        ),
        Command::Evaluate { common, model, compare } => {
            if let Some(m) = &model {
                commands::ensure_exists(m)?;
            }
            commands::cmd_evaluate(&common.resolve()?, &EvaluateOptions { model, compare })
        }
        Command::Sweep {
            common,
            gamma_grid,
            k_grid,
        } => {
            let mut cfg = common.resolve()?;
            // a single --gamma or --k pins that axis
            if let Some(g) = common.gamma {
                cfg.sweep.gamma_grid = vec![g];
            }
            if let Some(k) = common.k {
                cfg.sweep.k_grid = vec![k];
            }
            if let Some(g) = gamma_grid {
                cfg.sweep.gamma_grid = g;
            }
            if let Some(k) = k_grid {
                cfg.sweep.k_grid = k;
            }
            if cfg.sweep.gamma_grid.is_empty() || cfg.sweep.k_grid.is_empty() {
                return Err(CliError::Usage("sweep grids must be non-empty".into()));
            }
            commands::cmd_sweep(&cfg)
        }
        Command::Ablation { common, include_plain } => {
            let mut cfg = common.resolve()?;
            cfg.ablation.include_plain |= include_plain;
            commands::cmd_ablation(&cfg)
        }
        Command::Synth {
            common,
            n,
            beta,
            censor_rate,
            misaligned,
            name,
        } => {
            let mut cfg = common.resolve()?;
            let s = &mut cfg.synth;
            if let Some(v) = n {
                s.n = v;
                s.misalignment.n = v;
            }
            if let Some(v) = beta {
                s.beta = v;
            }
            if let Some(v) = censor_rate {
                s.censor_rate = v;
                s.misalignment.censor_rate = v;
            }
            s.misaligned |= misaligned;
            if let Some(v) = name {
                s.name = v;
            }
            commands::cmd_synth(&cfg)
        }
    }
}
