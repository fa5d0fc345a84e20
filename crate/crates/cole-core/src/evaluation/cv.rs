//! The stratified subsampled cross-validation protocol.
//!
//! The corpus is partitioned into 10 folds by a seeded shuffle of the
//! canonical enumeration order. Each trial (fold, seed, budget) samples a
//! stratified subset of the 9 training folds, fits the surrogate, and
//! scores rank correlation and squared error on the full held-out fold.
//! Per-trial randomness derives from (seed, fold, budget) alone, so trials
//! are reproducible in isolation and across configurations: competing
//! feature sources see identical subsamples.

use crate::evaluation::kendall::kendall_tau;
use crate::evaluation::stratify::{stratified_sample, stratify_bins};
use crate::numerics::loss::mse_loss;
use crate::numerics::mlp::{train_surrogate, MlpConfig, TrainConfig};
use crate::numerics::pca::pca_fit;
use crate::rng::{seeded_rng, shuffle, trial_rng};
use crate::{par, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Default training budgets.
pub const DEFAULT_BUDGETS: [usize; 5] = [14, 55, 220, 879, 3516];

/// The trial grid: fold assignment, seeds, and budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    /// Number of folds.
    pub folds: usize,
    /// Fold label per architecture, indexed by canonical position.
    pub fold_of: Vec<usize>,
    /// Trial seeds; every (fold, seed, budget) triple is one trial.
    pub seeds: Vec<u64>,
    /// Training set sizes, ascending.
    pub budgets: Vec<usize>,
    /// Accuracy strata per training pool.
    pub n_bins: usize,
    /// Seed behind the fold assignment shuffle.
    pub assignment_seed: u64,
}

impl CvPlan {
    /// The default protocol: 10 folds, 10 seeds, budgets
    /// {14, 55, 220, 879, 3516}, 5 strata.
    pub fn new(corpus_size: usize, assignment_seed: u64) -> CvPlan {
        let folds = 10;
        let mut order: Vec<usize> = (0..corpus_size).collect();
        let mut rng = seeded_rng(assignment_seed, "cv-fold-assignment");
        shuffle(&mut order, &mut rng);
        let mut fold_of = vec![0usize; corpus_size];
        for (position, &index) in order.iter().enumerate() {
            fold_of[index] = position % folds;
        }
        CvPlan {
            folds,
            fold_of,
            seeds: (0..10).collect(),
            budgets: DEFAULT_BUDGETS.to_vec(),
            n_bins: 5,
            assignment_seed,
        }
    }

    /// Checks the partition and grid invariants.
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidInput(
                "a cross-validation plan needs at least 2 folds".into(),
            ));
        }
        if self.fold_of.is_empty()
            || self.seeds.is_empty()
            || self.budgets.is_empty()
            || self.n_bins == 0
        {
            return Err(Error::InvalidInput(
                "empty fold assignment, seeds, budgets, or bins".into(),
            ));
        }
        let mut sizes = vec![0usize; self.folds];
        for (index, &fold) in self.fold_of.iter().enumerate() {
            if fold >= self.folds {
                return Err(Error::InvalidInput(format!(
                    "architecture {index} is assigned to fold {fold} of {}",
                    self.folds
                )));
            }
            sizes[fold] += 1;
        }
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if max - min > 1 {
            return Err(Error::InvalidInput(format!(
                "fold sizes differ by more than 1: {sizes:?}"
            )));
        }
        for pair in self.budgets.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidInput(format!(
                    "budgets must be strictly ascending, got {:?}",
                    self.budgets
                )));
            }
        }
        let largest_fold = *max;
        let smallest_pool = self.fold_of.len() - largest_fold;
        let top_budget = *self.budgets.last().unwrap();
        if self.budgets[0] < 2 || top_budget > smallest_pool {
            return Err(Error::InvalidInput(format!(
                "budgets must lie in [2, {smallest_pool}], got {:?}",
                self.budgets
            )));
        }
        Ok(())
    }

    /// Indices held out by `fold`, ascending.
    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    /// Indices of the other folds, ascending: the trial's sampling pool.
    pub fn training_pool(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

/// One trial's scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Label of the pipeline configuration that produced this row.
    pub config: String,
    /// Training set size.
    pub budget: usize,
    /// Held-out fold.
    pub fold: usize,
    /// Trial seed.
    pub seed: u64,
    /// Kendall tau-b on the held-out fold.
    pub tau: f64,
    /// Mean squared error on the held-out fold.
    pub mse: f64,
    /// Wall-clock training time; 0 unless timing was enabled, because
    /// timing breaks byte-identical reruns.
    pub seconds: f64,
}

/// Pipeline settings shared by every trial of one configuration.
#[derive(Clone, Debug)]
pub struct CvSettings {
    /// Label written into result rows.
    pub config_name: String,
    /// Project features to this many components before training; None
    /// trains on raw features.
    pub pca_k: Option<usize>,
    /// Surrogate hidden width.
    pub hidden_width: usize,
    /// Surrogate hidden depth.
    pub hidden_layers: usize,
    /// Surrogate dropout.
    pub dropout_p: f64,
    /// Surrogate activation slope.
    pub negative_slope: f64,
    /// Optimizer settings; the seed field is ignored and replaced by a
    /// per-trial derivation.
    pub train: TrainConfig,
    /// Record wall-clock seconds per trial. Off by default: timing makes
    /// otherwise identical runs differ.
    pub record_timing: bool,
}

impl CvSettings {
    /// Defaults matching the surrogate's standard shape.
    pub fn new(config_name: impl Into<String>) -> CvSettings {
        CvSettings {
            config_name: config_name.into(),
            pca_k: None,
            hidden_width: 128,
            hidden_layers: 3,
            dropout_p: 0.1,
            negative_slope: 0.01,
            train: TrainConfig::new(0),
            record_timing: false,
        }
    }
}

/// Runs every (budget, fold, seed) trial. `features` and `accuracies` are
/// indexed by canonical position and must cover the whole corpus. Results
/// come back sorted by (budget, fold, seed).
pub fn run_cv(
    plan: &CvPlan,
    features: &[Vec<f64>],
    accuracies: &[f64],
    settings: &CvSettings,
) -> Result<Vec<TrialResult>> {
    plan.validate()?;
    let corpus = plan.fold_of.len();
    if features.len() != corpus || accuracies.len() != corpus {
        return Err(Error::InvalidInput(format!(
            "plan covers {corpus} architectures but {} feature rows and {} accuracies were given",
            features.len(),
            accuracies.len()
        )));
    }
    let dim = features.first().map(Vec::len).unwrap_or(0);
    if dim == 0 {
        return Err(Error::InvalidInput("features are empty".into()));
    }
    for (i, row) in features.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::InvalidInput(format!(
                "feature row {i} has dimension {} but row 0 has {dim}",
                row.len()
            )));
        }
    }
    if accuracies.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput("non-finite accuracy".into()));
    }

    let mut trials: Vec<(usize, usize, u64)> = Vec::new();
    for &budget in &plan.budgets {
        for fold in 0..plan.folds {
            for &seed in &plan.seeds {
                trials.push((budget, fold, seed));
            }
        }
    }

    let mut results = par::try_map_ref(&trials, |&(budget, fold, seed)| {
        run_trial(plan, features, accuracies, settings, budget, fold, seed)
    })?;
    results.sort_by_key(|r| (r.budget, r.fold, r.seed));
    Ok(results)
}

fn run_trial(
    plan: &CvPlan,
    features: &[Vec<f64>],
    accuracies: &[f64],
    settings: &CvSettings,
    budget: usize,
    fold: usize,
    seed: u64,
) -> Result<TrialResult> {
    let start = std::time::Instant::now();
    let mut rng = trial_rng(seed, fold, budget);

    let pool = plan.training_pool(fold);
    let pool_y: Vec<f64> = pool.iter().map(|&i| accuracies[i]).collect();
    let bins = stratify_bins(&pool_y, plan.n_bins)?;
    let picked = stratified_sample(&bins, budget, &mut rng)?;

    let train_x: Vec<Vec<f64>> = picked.iter().map(|&p| features[pool[p]].clone()).collect();
    let train_y: Vec<f64> = picked.iter().map(|&p| pool_y[p]).collect();

    let pca = match settings.pca_k {
        Some(k) => Some(pca_fit(&train_x, k)?),
        None => None,
    };
    let input_dim = pca
        .as_ref()
        .map(|p| p.k_eff())
        .unwrap_or_else(|| train_x[0].len());
    let config = MlpConfig {
        input_dim,
        hidden_width: settings.hidden_width,
        hidden_layers: settings.hidden_layers,
        negative_slope: settings.negative_slope,
        dropout_p: settings.dropout_p,
        output_dim: 1,
    };
    let train = TrainConfig {
        seed: rng.gen::<u64>(),
        ..settings.train.clone()
    };
    let model = train_surrogate(&train_x, &train_y, &config, &train, pca)?;

    let held_out = plan.fold_members(fold);
    let fold_x: Vec<Vec<f64>> = held_out.iter().map(|&i| features[i].clone()).collect();
    let fold_y: Vec<f64> = held_out.iter().map(|&i| accuracies[i]).collect();
    let preds = model.predict(&fold_x)?;
    let tau = kendall_tau(&preds, &fold_y)?;
    let (mse, _) = mse_loss(&preds, &fold_y)?;

    Ok(TrialResult {
        config: settings.config_name.clone(),
        budget,
        fold,
        seed,
        tau,
        mse,
        seconds: if settings.record_timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Mean and sample standard deviation per (configuration, budget).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    /// Configuration label.
    pub config: String,
    /// Training set size.
    pub budget: usize,
    /// Rows aggregated.
    pub trials: usize,
    /// Mean tau.
    pub tau_mean: f64,
    /// Sample standard deviation of tau (0 for a single row).
    pub tau_std: f64,
    /// Mean squared error, averaged.
    pub mse_mean: f64,
    /// Sample standard deviation of mse.
    pub mse_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups results by (configuration, budget), ordered by config then budget.
pub fn aggregate(results: &[TrialResult]) -> Result<Vec<AggregateRow>> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no results to aggregate".into()));
    }
    let mut groups: BTreeMap<(String, usize), Vec<&TrialResult>> = BTreeMap::new();
    for row in results {
        groups
            .entry((row.config.clone(), row.budget))
            .or_default()
            .push(row);
    }
    Ok(groups
        .into_iter()
        .map(|((config, budget), rows)| {
            let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
            let mses: Vec<f64> = rows.iter().map(|r| r.mse).collect();
            let (tau_mean, tau_std) = mean_std(&taus);
            let (mse_mean, mse_std) = mean_std(&mses);
            AggregateRow {
                config,
                budget,
                trials: rows.len(),
                tau_mean,
                tau_std,
                mse_mean,
                mse_std,
            }
        })
        .collect())
}

/// Writes results as `config,budget,fold,seed,tau,mse,seconds`.
pub fn write_results_csv(path: &Path, results: &[TrialResult]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in results {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a file written by [`write_results_csv`].
pub fn read_results_csv(path: &Path) -> Result<Vec<TrialResult>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ConfigSummary<'a> {
    config: &'a str,
    budgets: Vec<&'a AggregateRow>,
}

/// Writes the aggregate table as JSON: one entry per configuration, one
/// row per budget.
pub fn write_summary_json(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut configs: Vec<ConfigSummary> = Vec::new();
    for row in rows {
        match configs.last_mut() {
            Some(last) if last.config == row.config => last.budgets.push(row),
            _ => configs.push(ConfigSummary {
                config: &row.config,
                budgets: vec![row],
            }),
        }
    }
    let body = serde_json::to_string_pretty(&serde_json::json!({ "configs": configs }))?;
    std::fs::write(path, body + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_normal;

    #[test]
    fn fold_assignment_is_a_balanced_partition() {
        let plan = CvPlan::new(15_625, 1);
        plan.validate().unwrap();
        let mut sizes = vec![0usize; plan.folds];
        for &fold in &plan.fold_of {
            sizes[fold] += 1;
        }
        assert_eq!(sizes.iter().sum::<usize>(), 15_625);
        assert_eq!(*sizes.iter().min().unwrap(), 1562);
        assert_eq!(*sizes.iter().max().unwrap(), 1563);

        for fold in 0..plan.folds {
            let held = plan.fold_members(fold);
            let pool = plan.training_pool(fold);
            assert_eq!(held.len() + pool.len(), 15_625);
            assert!(held.iter().all(|i| !pool.contains(i)));
        }
        // Same seed reproduces the assignment; another seed moves it.
        assert_eq!(plan.fold_of, CvPlan::new(15_625, 1).fold_of);
        assert_ne!(plan.fold_of, CvPlan::new(15_625, 2).fold_of);
    }

    fn tiny_plan(corpus: usize) -> CvPlan {
        let mut plan = CvPlan::new(corpus, 3);
        plan.budgets = vec![40];
        plan.seeds = (0..3).collect();
        plan
    }

    fn tiny_settings(name: &str) -> CvSettings {
        let mut settings = CvSettings::new(name);
        settings.hidden_width = 16;
        settings.hidden_layers = 1;
        settings.dropout_p = 0.0;
        settings.train.epochs = 60;
        settings
    }

    /// Corpus where the target is a noiseless linear read of the features.
    fn informative_corpus(corpus: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = crate::rng::seeded_rng(71, "cv-informative");
        let w: Vec<f64> = (0..dim).map(|_| sample_normal(&mut rng)).collect();
        let x: Vec<Vec<f64>> = (0..corpus)
            .map(|_| (0..dim).map(|_| sample_normal(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|row| row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * 5.0 + 70.0)
            .collect();
        (x, y)
    }

    #[test]
    fn informative_features_rank_well_and_noise_features_do_not() {
        let (x, y) = informative_corpus(300, 6);
        let plan = tiny_plan(300);
        let results = run_cv(&plan, &x, &y, &tiny_settings("informative")).unwrap();
        assert_eq!(results.len(), plan.folds * plan.seeds.len());
        for row in &results {
            assert!((-1.0..=1.0).contains(&row.tau));
            assert!(row.mse >= 0.0);
            assert_eq!(row.seconds, 0.0);
        }
        let mean_tau: f64 = results.iter().map(|r| r.tau).sum::<f64>() / results.len() as f64;
        assert!(
            mean_tau > 0.6,
            "informative features should rank well, got {mean_tau}"
        );

        // Features decoupled from the target carry no rank signal.
        let mut rng = crate::rng::seeded_rng(73, "cv-null");
        let noise: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..6).map(|_| sample_normal(&mut rng)).collect())
            .collect();
        let null_results = run_cv(&plan, &noise, &y, &tiny_settings("null")).unwrap();
        let null_tau: f64 =
            null_results.iter().map(|r| r.tau).sum::<f64>() / null_results.len() as f64;
        assert!(
            null_tau.abs() < 0.25,
            "null features should not rank, got {null_tau}"
        );
        assert!(mean_tau > null_tau + 0.3);
    }

    #[test]
    fn reruns_are_identical_and_sorted() {
        let (x, y) = informative_corpus(200, 4);
        let mut plan = tiny_plan(200);
        plan.budgets = vec![20, 41];
        plan.seeds = (0..2).collect();
        let settings = tiny_settings("repro");
        let first = run_cv(&plan, &x, &y, &settings).unwrap();
        let second = run_cv(&plan, &x, &y, &settings).unwrap();
        assert_eq!(first, second);
        let keys: Vec<(usize, usize, u64)> =
            first.iter().map(|r| (r.budget, r.fold, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(first.len(), 2 * plan.folds * plan.seeds.len());
    }

    #[test]
    fn pca_reduction_runs_inside_the_protocol() {
        let (x, y) = informative_corpus(150, 12);
        let mut plan = tiny_plan(150);
        plan.budgets = vec![30];
        plan.seeds = vec![0];
        let mut settings = tiny_settings("pca");
        settings.pca_k = Some(4);
        let results = run_cv(&plan, &x, &y, &settings).unwrap();
        assert_eq!(results.len(), plan.folds);
        assert!(results.iter().all(|r| r.tau.is_finite()));
    }

    #[test]
    fn plan_validation_catches_bad_grids() {
        let mut plan = CvPlan::new(100, 1);
        plan.budgets = vec![50, 50];
        assert!(plan.validate().is_err());
        let mut plan = CvPlan::new(100, 1);
        plan.budgets = vec![95];
        assert!(
            plan.validate().is_err(),
            "budget larger than the training pool"
        );
        let mut plan = CvPlan::new(100, 1);
        plan.fold_of[0] = 99;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn aggregate_matches_a_recomputation_oracle() {
        let row = |config: &str, budget: usize, tau: f64, mse: f64| TrialResult {
            config: config.to_string(),
            budget,
            fold: 0,
            seed: 0,
            tau,
            mse,
            seconds: 0.0,
        };
        let single = aggregate(&[row("a", 14, 0.5, 2.0)]).unwrap();
        assert_eq!((single[0].tau_mean, single[0].tau_std), (0.5, 0.0));

        let pair = aggregate(&[row("a", 14, 0.6, 1.0), row("a", 14, 0.8, 3.0)]).unwrap();
        assert!((pair[0].tau_mean - 0.7).abs() < 1e-15);

        let mut rng = crate::rng::seeded_rng(79, "agg-oracle");
        let rows: Vec<TrialResult> = (0..60)
            .map(|i| {
                row(
                    if i % 2 == 0 { "a" } else { "b" },
                    DEFAULT_BUDGETS[i % 3],
                    sample_normal(&mut rng),
                    sample_normal(&mut rng).abs(),
                )
            })
            .collect();
        let table = aggregate(&rows).unwrap();
        for entry in &table {
            let group: Vec<&TrialResult> = rows
                .iter()
                .filter(|r| r.config == entry.config && r.budget == entry.budget)
                .collect();
            assert_eq!(group.len(), entry.trials);
            let mean = group.iter().map(|r| r.tau).sum::<f64>() / group.len() as f64;
            let var = group.iter().map(|r| (r.tau - mean).powi(2)).sum::<f64>()
                / (group.len() as f64 - 1.0);
            assert!((entry.tau_mean - mean).abs() < 1e-12);
            assert!((entry.tau_std - var.sqrt()).abs() < 1e-12);
        }
        // Groups come out ordered.
        let keys: Vec<(&str, usize)> = table
            .iter()
            .map(|r| (r.config.as_str(), r.budget))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn csv_round_trips_bit_for_bit() {
        let rows = vec![
            TrialResult {
                config: "mock".into(),
                budget: 14,
                fold: 3,
                seed: 7,
                tau: 0.123456789012345,
                mse: 1.5e-3,
                seconds: 0.0,
            },
            TrialResult {
                config: "mock".into(),
                budget: 55,
                fold: 0,
                seed: 1,
                tau: -0.25,
                mse: 144.25,
                seconds: 0.0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(
            text.starts_with("config,budget,fold,seed,tau,mse,seconds\n"),
            "{text}"
        );
        assert_eq!(read_results_csv(&path).unwrap(), rows);

        write_results_csv(&dir.path().join("again.csv"), &rows).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(dir.path().join("again.csv")).unwrap()
        );
    }

    #[test]
    fn summary_json_groups_by_config() {
        let rows = vec![
            AggregateRow {
                config: "a".into(),
                budget: 14,
                trials: 2,
                tau_mean: 0.5,
                tau_std: 0.1,
                mse_mean: 1.0,
                mse_std: 0.2,
            },
            AggregateRow {
                config: "a".into(),
                budget: 55,
                trials: 2,
                tau_mean: 0.6,
                tau_std: 0.1,
                mse_mean: 0.9,
                mse_std: 0.2,
            },
            AggregateRow {
                config: "b".into(),
                budget: 14,
                trials: 2,
                tau_mean: 0.1,
                tau_std: 0.1,
                mse_mean: 2.0,
                mse_std: 0.2,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.json");
        write_summary_json(&path, &rows).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let configs = parsed["configs"].as_array().unwrap();
        assert_eq!(configs.len(), 2);
        assert_eq!(configs[0]["config"], "a");
        assert_eq!(configs[0]["budgets"].as_array().unwrap().len(), 2);
        assert_eq!(configs[1]["budgets"][0]["budget"], 14);
    }
}
