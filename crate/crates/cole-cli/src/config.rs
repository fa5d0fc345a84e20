//! The versioned run configuration.
//!
//! A run is fully described by one TOML document. Unknown keys are
//! rejected so a typo cannot silently fall back to a default, and every
//! command persists its resolved configuration next to its outputs.

use crate::CliError;
use cole_core::codegen::VerbosityMode;
use cole_core::embedding::{
    EmbeddingProvider, FileCacheProvider, HashProvider, RemoteConfig, RemoteProvider,
    StructuralMockProvider,
};
use cole_core::evaluation::CvSettings;
use cole_core::numerics::{LossKind, MlpConfig, TrainConfig};
use cole_core::oracle::{load_benchmark_table, synth_benchmark, BenchmarkTable, Task};
use cole_core::search::{Acquisition, SearchConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Schema version this build understands.
pub const CONFIG_VERSION: u32 = 1;

/// Root configuration document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    /// Root seed; all per-run randomness derives from it.
    pub seed: u64,
    /// Directory receiving outputs and the resolved config.
    pub output_dir: PathBuf,
    /// Embedding provider selection.
    pub provider: ProviderSection,
    /// Code emission settings.
    pub codegen: CodegenSection,
    /// Feature projection settings.
    pub pca: PcaSection,
    /// Surrogate training loss.
    pub loss: LossSection,
    /// Surrogate shape and optimizer settings.
    pub train: TrainSection,
    /// Cross-validation protocol settings.
    pub cv: CvSection,
    /// Ground-truth accuracy source.
    pub oracle: OracleSection,
    /// Search loop settings.
    pub search: SearchSection,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 0,
            output_dir: PathBuf::from("cole-out"),
            provider: ProviderSection::default(),
            codegen: CodegenSection::default(),
            pca: PcaSection::default(),
            loss: LossSection::default(),
            train: TrainSection::default(),
            cv: CvSection::default(),
            oracle: OracleSection::default(),
            search: SearchSection::default(),
        }
    }
}

/// Available embedding backends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// Seeded pseudorandom vectors; an uninformative control.
    Hash,
    /// Deterministic vectors recovering structure from the code text.
    StructuralMock,
    /// Replays vectors from an existing cache file.
    FileCache,
    /// HTTP embedding service.
    Remote,
}

/// Provider selection and transport settings. Credentials are never part
/// of the document; the remote token comes from `COLE_EMBED_TOKEN`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSection {
    /// Which backend to use.
    pub kind: ProviderKind,
    /// Output dimension for hash and remote providers.
    pub dim: usize,
    /// Seed for the hash and structural-mock providers.
    pub provider_seed: u64,
    /// Additive noise scale for the structural mock.
    pub noise: f64,
    /// Source cache for the file-cache provider.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Remote endpoint; falls back to `COLE_EMBED_URL`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    /// Embedding cache consulted and filled by every embed step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

impl Default for ProviderSection {
    fn default() -> ProviderSection {
        ProviderSection {
            kind: ProviderKind::Hash,
            dim: 128,
            provider_seed: 0,
            noise: 0.0,
            path: None,
            url: None,
            cache: None,
        }
    }
}

impl ProviderSection {
    /// Instantiates the configured provider.
    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>, CliError> {
        Ok(match self.kind {
            ProviderKind::Hash => Arc::new(HashProvider::new(self.provider_seed, self.dim)?),
            ProviderKind::StructuralMock => {
                Arc::new(StructuralMockProvider::new(self.noise, self.provider_seed)?)
            }
            ProviderKind::FileCache => {
                let path = self.path.as_ref().ok_or_else(|| {
                    CliError::Input("provider.path is required for the file-cache provider".into())
                })?;
                Arc::new(FileCacheProvider::open(path)?)
            }
            ProviderKind::Remote => {
                let config = match &self.url {
                    Some(url) => RemoteConfig::new(url.clone(), self.dim),
                    None => RemoteConfig::from_env(self.dim)?,
                };
                Arc::new(RemoteProvider::new(config)?)
            }
        })
    }
}

/// Code emission mode names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    /// Composite ops as helper methods.
    Helper,
    /// Composite ops expanded at the call site.
    Inline,
    /// Composite ops referenced but not defined.
    Excluded,
}

impl ModeName {
    /// The core emission mode.
    pub fn to_mode(self) -> VerbosityMode {
        match self {
            ModeName::Helper => VerbosityMode::HelperMethod,
            ModeName::Inline => VerbosityMode::Inline,
            ModeName::Excluded => VerbosityMode::ExcludedHelper,
        }
    }
}

/// Code emission settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodegenSection {
    /// Helper verbosity mode.
    pub mode: ModeName,
    /// Prepend the macro-skeleton backbone.
    pub backbone: bool,
    /// Prepend the task docstring.
    pub comment: bool,
}

impl Default for CodegenSection {
    fn default() -> CodegenSection {
        CodegenSection {
            mode: ModeName::Helper,
            backbone: false,
            comment: false,
        }
    }
}

impl CodegenSection {
    /// The core add-on flags.
    pub fn addons(&self) -> cole_core::codegen::ContextAddOns {
        cole_core::codegen::ContextAddOns {
            backbone: self.backbone,
            comment: self.comment,
        }
    }
}

/// Feature projection settings.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaSection {
    /// Components to keep; absent disables projection.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// Loss names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    /// Pairwise rank hinge.
    Hinge,
    /// Mean squared error.
    Mse,
}

/// Surrogate training loss.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    /// Which loss to train with.
    pub kind: LossName,
    /// Hinge margin.
    pub epsilon: f64,
}

impl Default for LossSection {
    fn default() -> LossSection {
        LossSection {
            kind: LossName::Hinge,
            epsilon: 0.1,
        }
    }
}

impl LossSection {
    /// The core loss kind.
    pub fn to_loss(&self) -> LossKind {
        match self.kind {
            LossName::Hinge => LossKind::PairwiseHinge {
                epsilon: self.epsilon,
            },
            LossName::Mse => LossKind::Mse,
        }
    }
}

/// Surrogate shape and optimizer settings shared by cv and search.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Hidden layer width.
    pub hidden_width: usize,
    /// Hidden layer count.
    pub hidden_layers: usize,
    /// Inverted-dropout probability during training.
    pub dropout_p: f64,
    /// LeakyReLU negative slope.
    pub negative_slope: f64,
    /// Training epochs.
    pub epochs: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Minibatch size above the full-batch limit.
    pub batch_size: usize,
    /// Datasets smaller than this train full-batch.
    pub full_batch_limit: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
}

impl Default for TrainSection {
    fn default() -> TrainSection {
        let train = TrainConfig::new(0);
        let mlp = MlpConfig::new(1);
        TrainSection {
            hidden_width: mlp.hidden_width,
            hidden_layers: mlp.hidden_layers,
            dropout_p: mlp.dropout_p,
            negative_slope: mlp.negative_slope,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            full_batch_limit: train.full_batch_limit,
            clip_norm: train.clip_norm,
        }
    }
}

impl TrainSection {
    /// Optimizer settings with a placeholder seed (callers re-seed per
    /// trial or retrain).
    pub fn to_train_config(&self, loss: LossKind) -> TrainConfig {
        let mut train = TrainConfig::new(0);
        train.loss = loss;
        train.epochs = self.epochs;
        train.learning_rate = self.learning_rate;
        train.batch_size = self.batch_size;
        train.full_batch_limit = self.full_batch_limit;
        train.clip_norm = self.clip_norm;
        train
    }
}

/// Scored task names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    /// CIFAR-10 validation accuracy.
    Cifar10Valid,
    /// CIFAR-100 test accuracy.
    Cifar100Test,
    /// ImageNet16-120 test accuracy.
    Imagenet16Test,
}

impl TaskName {
    /// The core task.
    pub fn to_task(self) -> Task {
        match self {
            TaskName::Cifar10Valid => Task::Cifar10Valid,
            TaskName::Cifar100Test => Task::Cifar100Test,
            TaskName::Imagenet16Test => Task::ImageNet16Test,
        }
    }
}

/// Cross-validation protocol settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    /// Number of trial seeds (0..seeds).
    pub seeds: usize,
    /// Training budgets, ascending.
    pub budgets: Vec<usize>,
    /// Accuracy strata per training pool.
    pub bins: usize,
    /// Which task provides targets.
    pub task: TaskName,
    /// Record wall-clock seconds per trial (breaks byte-identical reruns).
    pub record_timing: bool,
    /// Label written into result rows; derived from the provider if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_name: Option<String>,
}

impl Default for CvSection {
    fn default() -> CvSection {
        CvSection {
            seeds: 10,
            budgets: cole_core::evaluation::DEFAULT_BUDGETS.to_vec(),
            bins: 5,
            task: TaskName::Cifar10Valid,
            record_timing: false,
            config_name: None,
        }
    }
}

/// Ground-truth source names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Deterministic generated benchmark.
    Synthetic,
    /// Benchmark CSV on disk.
    Csv,
}

/// Ground-truth accuracy source.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    /// Source kind.
    pub kind: OracleKind,
    /// Generator seed for the synthetic benchmark.
    pub seed: u64,
    /// CSV path for the csv kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for OracleSection {
    fn default() -> OracleSection {
        OracleSection {
            kind: OracleKind::Synthetic,
            seed: 7,
            path: None,
        }
    }
}

impl OracleSection {
    /// Loads or generates the table.
    pub fn build(&self) -> Result<BenchmarkTable, CliError> {
        match self.kind {
            OracleKind::Synthetic => Ok(synth_benchmark(self.seed)),
            OracleKind::Csv => {
                let path = self.path.as_ref().ok_or_else(|| {
                    CliError::Input("oracle.path is required for the csv oracle".into())
                })?;
                Ok(load_benchmark_table(path)?)
            }
        }
    }
}

/// Acquisition names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionName {
    /// Highest mean prediction.
    Greedy,
    /// Mean plus lambda times ensemble spread.
    MeanStd,
}

/// Search loop settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    /// Oracle evaluations per run.
    pub total_budget: usize,
    /// Warm-up evaluations.
    pub init_evals: usize,
    /// Evaluations between retrains.
    pub retrain_interval: usize,
    /// Evaluations per proposal round.
    pub round_size: usize,
    /// Parents per round, by true accuracy.
    pub parents_per_round: usize,
    /// Mutants drawn per parent.
    pub mutants_per_parent: usize,
    /// Warm-up population size.
    pub pop_size: usize,
    /// Warm-up tournament size.
    pub sample_size: usize,
    /// Surrogates per retrain.
    pub ensemble_size: usize,
    /// Candidate scoring rule.
    pub acquisition: AcquisitionName,
    /// Spread weight for the mean-std acquisition.
    pub lambda: f64,
    /// Project search features; absent trains on raw features.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca_k: Option<usize>,
    /// Search surrogate width.
    pub surrogate_width: usize,
    /// Search surrogate depth.
    pub surrogate_layers: usize,
    /// Search surrogate dropout.
    pub dropout_p: f64,
    /// Training epochs per retrain.
    pub epochs: usize,
    /// Independent runs per representation arm.
    pub trials: usize,
    /// Threshold: within this percentage of the top accuracy.
    pub pct: f64,
    /// Interpret `pct` as absolute accuracy points instead.
    pub absolute: bool,
}

impl Default for SearchSection {
    fn default() -> SearchSection {
        let core = SearchConfig::default();
        SearchSection {
            total_budget: core.total_budget,
            init_evals: core.init_evals,
            retrain_interval: core.retrain_interval,
            round_size: core.round_size,
            parents_per_round: core.parents_per_round,
            mutants_per_parent: core.mutants_per_parent,
            pop_size: core.pop_size,
            sample_size: core.sample_size,
            ensemble_size: core.ensemble_size,
            acquisition: AcquisitionName::Greedy,
            lambda: 1.0,
            pca_k: None,
            surrogate_width: core.surrogate_width,
            surrogate_layers: core.surrogate_layers,
            dropout_p: core.dropout_p,
            epochs: core.train.epochs,
            trials: 30,
            pct: 1.0,
            absolute: false,
        }
    }
}

impl SearchSection {
    /// The core search configuration.
    pub fn to_search_config(&self, loss: LossKind) -> SearchConfig {
        let mut train = TrainConfig::new(0);
        train.loss = loss;
        train.epochs = self.epochs;
        let acquisition = match self.acquisition {
            AcquisitionName::Greedy => Acquisition::GreedyMean,
            AcquisitionName::MeanStd => Acquisition::EnsembleMeanStd {
                lambda: self.lambda,
            },
        };
        SearchConfig {
            total_budget: self.total_budget,
            init_evals: self.init_evals,
            retrain_interval: self.retrain_interval,
            round_size: self.round_size,
            parents_per_round: self.parents_per_round,
            mutants_per_parent: self.mutants_per_parent,
            pop_size: self.pop_size,
            sample_size: self.sample_size,
            ensemble_size: self.ensemble_size,
            acquisition,
            pca_k: self.pca_k,
            surrogate_width: self.surrogate_width,
            surrogate_layers: self.surrogate_layers,
            dropout_p: self.dropout_p,
            train,
        }
    }
}

impl RunConfig {
    /// Loads a TOML document, rejecting unknown keys and version skew.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))?;
        if config.version != CONFIG_VERSION {
            return Err(CliError::Input(format!(
                "config version {} is not supported (this build understands {CONFIG_VERSION})",
                config.version
            )));
        }
        Ok(config)
    }

    /// Writes the resolved document into `dir` and returns its path.
    pub fn persist(&self, dir: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join("resolved-config.toml");
        let body = toml::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))?;
        std::fs::write(&path, body)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Label for result rows when the config does not name one.
    pub fn derived_config_name(&self) -> String {
        match self.cv.config_name.clone() {
            Some(name) => name,
            None => {
                let kind = match self.provider.kind {
                    ProviderKind::Hash => "hash",
                    ProviderKind::StructuralMock => "structural-mock",
                    ProviderKind::FileCache => "file-cache",
                    ProviderKind::Remote => "remote",
                };
                let mode = match self.codegen.mode {
                    ModeName::Helper => "helper",
                    ModeName::Inline => "inline",
                    ModeName::Excluded => "excluded",
                };
                format!("{kind}-{mode}")
            }
        }
    }

    /// Cross-validation settings assembled from the document.
    pub fn cv_settings(&self) -> CvSettings {
        let mut settings = CvSettings::new(self.derived_config_name());
        settings.pca_k = self.pca.k;
        settings.hidden_width = self.train.hidden_width;
        settings.hidden_layers = self.train.hidden_layers;
        settings.dropout_p = self.train.dropout_p;
        settings.negative_slope = self.train.negative_slope;
        settings.train = self.train.to_train_config(self.loss.to_loss());
        settings.record_timing = self.cv.record_timing;
        settings
    }
}
