//! Layered configuration: TOML file values, overridden by explicit flags,
//! falling back to the built-in defaults. Unknown file keys are rejected.

use std::path::{Path, PathBuf};

use algforge_core::trainer::TrainConfig;
use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ALGFORGE_OUT";

#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub ppo_iters: Option<usize>,
    pub clip: Option<f64>,
    pub runs_per_instance: Option<usize>,
    pub budget: Option<usize>,
    pub pop_size: Option<usize>,
    pub lr0: Option<f64>,
    pub lr_min: Option<f64>,
    pub ewc_lambda: Option<f64>,
    pub baseline_decay: Option<f64>,
    pub seed: Option<u64>,
    pub allow_events: Option<bool>,
    pub k_infer: Option<usize>,
    pub fisher_samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub trace: Option<bool>,
    #[serde(default)]
    pub task: Vec<TaskConfig>,
}

/// One task: a list of problem-instance keys like `onemax:100`.
#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub name: Option<String>,
    pub problems: Vec<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }
}

/// Flag-level overrides shared by the training commands.
#[derive(Default, Debug, Clone)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub ppo_iters: Option<usize>,
    pub clip: Option<f64>,
    pub runs_per_instance: Option<usize>,
    pub budget: Option<usize>,
    pub pop_size: Option<usize>,
    pub lr0: Option<f64>,
    pub ewc_lambda: Option<f64>,
    pub seed: Option<u64>,
    pub allow_events: Option<bool>,
    pub k_infer: Option<usize>,
}

/// Resolve the training configuration: defaults, then file, then flags.
pub fn resolve_train_config(file: &FileConfig, flags: &Overrides) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    macro_rules! apply {
        ($field:ident, $($src:expr),+) => {
            $(if let Some(v) = $src.$field { cfg.$field = v; })+
        };
    }
    apply!(epochs, file, flags);
    apply!(batch, file, flags);
    apply!(ppo_iters, file, flags);
    apply!(clip, file, flags);
    apply!(runs_per_instance, file, flags);
    apply!(budget, file, flags);
    apply!(pop_size, file, flags);
    apply!(lr0, file, flags);
    apply!(ewc_lambda, file, flags);
    apply!(allow_events, file, flags);
    apply!(k_infer, file, flags);
    if let Some(v) = file.lr_min {
        cfg.lr_min = v;
    }
    if let Some(v) = file.baseline_decay {
        cfg.baseline_decay = v;
    }
    if let Some(v) = file.fisher_samples {
        cfg.fisher_samples = v;
    }
    if let Some(v) = file.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = flags.seed {
        cfg.master_seed = v;
    }
    cfg
}

/// Output directory: flag, then config file, then the environment.
pub fn resolve_out_dir(flag: Option<PathBuf>, file: &FileConfig) -> Result<PathBuf> {
    if let Some(dir) = flag {
        return Ok(dir);
    }
    if let Some(dir) = &file.out {
        return Ok(dir.clone());
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        return Ok(PathBuf::from(dir));
    }
    bail!("no output directory: pass --out, set `out` in the config, or set {OUT_DIR_ENV}")
}
