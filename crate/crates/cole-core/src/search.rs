//! Surrogate-assisted architecture search.
//!
//! A run spends a fixed oracle budget: a regularized-evolution warm-up,
//! then rounds of mutate-score-evaluate where a freshly retrained
//! surrogate ranks candidate mutants and only the most promising reach
//! the oracle. A run is sequential by construction (each round depends on
//! everything evaluated before it); concurrency belongs to independent
//! seeded runs sharing a read-only table.

use crate::codegen::{emit_cell_code, ContextAddOns, VerbosityMode};
use crate::embedding::{embed_batch, EmbeddingCache, EmbeddingProvider};
use crate::nb201::{
    format_arch_string, mutate, parse_arch_string, path_encode, CellGenotype, PATH_BITS,
};
use crate::numerics::mlp::{train_surrogate, MlpConfig, SurrogateModel, TrainConfig};
use crate::numerics::pca::pca_fit;
use crate::oracle::{BenchmarkTable, MeteredOracle, Task};
use crate::rng::seeded_rng;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;
use std::sync::Arc;

/// Turns genotypes into surrogate features.
pub trait FeatureSource: Send + Sync {
    /// Feature row per genotype, in input order.
    fn features(&self, genotypes: &[CellGenotype]) -> Result<Vec<Vec<f64>>>;

    /// Stable description folded into the trace's config digest.
    fn describe(&self) -> String;
}

/// The 180-bit path encoding as raw features.
#[derive(Clone, Copy, Debug, Default)]
pub struct PathEncodingFeatures;

impl FeatureSource for PathEncodingFeatures {
    fn features(&self, genotypes: &[CellGenotype]) -> Result<Vec<Vec<f64>>> {
        Ok(genotypes
            .iter()
            .map(|g| path_encode(g).bits().iter().map(|&b| b as f64).collect())
            .collect())
    }

    fn describe(&self) -> String {
        format!("path-encoding:{PATH_BITS}")
    }
}

/// The full pipeline as a feature source: transpile each genotype to code
/// text and embed it.
pub struct ColeFeatures {
    /// Embedding backend.
    pub provider: Arc<dyn EmbeddingProvider>,
    /// Code emission mode.
    pub mode: VerbosityMode,
    /// Context add-ons baked into each text.
    pub addons: ContextAddOns,
    /// Optional embedding cache shared across rounds and runs.
    pub cache: Option<Arc<EmbeddingCache>>,
}

impl FeatureSource for ColeFeatures {
    fn features(&self, genotypes: &[CellGenotype]) -> Result<Vec<Vec<f64>>> {
        let texts: Vec<_> = genotypes
            .iter()
            .map(|g| emit_cell_code(g, self.mode, self.addons, None))
            .collect();
        let vectors = embed_batch(self.provider.as_ref(), &texts, self.cache.as_deref())?;
        Ok(vectors.into_iter().map(|v| v.values).collect())
    }

    fn describe(&self) -> String {
        format!(
            "cole:{}:{:?}:{:?}",
            self.provider.provider_id(),
            self.mode,
            self.addons
        )
    }
}

/// Candidate scoring rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Acquisition {
    /// Highest mean prediction wins.
    GreedyMean,
    /// Mean plus `lambda` times the ensemble's prediction spread.
    EnsembleMeanStd {
        /// Exploration weight on the spread term.
        lambda: f64,
    },
}

/// Search hyperparameters.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Total oracle evaluations per run.
    pub total_budget: usize,
    /// Evaluations spent on the evolution warm-up.
    pub init_evals: usize,
    /// Surrogate retrains once this many evaluations accumulate.
    pub retrain_interval: usize,
    /// Oracle evaluations per proposal round.
    pub round_size: usize,
    /// Parents taken from the top of the evaluated set, by true accuracy.
    pub parents_per_round: usize,
    /// Mutants drawn per parent.
    pub mutants_per_parent: usize,
    /// Warm-up population size.
    pub pop_size: usize,
    /// Warm-up tournament size.
    pub sample_size: usize,
    /// Surrogates trained per retrain.
    pub ensemble_size: usize,
    /// Candidate scoring rule.
    pub acquisition: Acquisition,
    /// Project features before training; None trains on raw features.
    pub pca_k: Option<usize>,
    /// Surrogate hidden width.
    pub surrogate_width: usize,
    /// Surrogate hidden depth.
    pub surrogate_layers: usize,
    /// Surrogate dropout.
    pub dropout_p: f64,
    /// Optimizer settings; the seed field is replaced per retrain.
    pub train: TrainConfig,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        let mut train = TrainConfig::new(0);
        // A search retrains dozens of times on at most total_budget rows;
        // short schedules keep a full run interactive without hurting the
        // ranking the acquisition needs.
        train.epochs = 30;
        SearchConfig {
            total_budget: 500,
            init_evals: 20,
            retrain_interval: 10,
            round_size: 10,
            parents_per_round: 10,
            mutants_per_parent: 10,
            pop_size: 10,
            sample_size: 5,
            ensemble_size: 1,
            acquisition: Acquisition::GreedyMean,
            pca_k: None,
            surrogate_width: 64,
            surrogate_layers: 2,
            dropout_p: 0.1,
            train,
        }
    }
}

impl SearchConfig {
    /// Checks the budget and round structure.
    pub fn validate(&self) -> Result<()> {
        if self.pop_size == 0 || self.sample_size == 0 {
            return Err(Error::InvalidInput(
                "warm-up population and tournament must be non-empty".into(),
            ));
        }
        if self.init_evals < self.pop_size {
            return Err(Error::InvalidInput(format!(
                "init_evals {} cannot seat a population of {}",
                self.init_evals, self.pop_size
            )));
        }
        if self.init_evals >= self.total_budget {
            return Err(Error::InvalidInput(format!(
                "warm-up {} must leave budget below {}",
                self.init_evals, self.total_budget
            )));
        }
        if self.round_size == 0
            || self.retrain_interval == 0
            || !self.retrain_interval.is_multiple_of(self.round_size)
            || !(self.total_budget - self.init_evals).is_multiple_of(self.round_size)
        {
            return Err(Error::InvalidInput(format!(
                "rounds of {} must tile the retrain interval {} and the post-warm-up budget {}",
                self.round_size,
                self.retrain_interval,
                self.total_budget - self.init_evals
            )));
        }
        if self.round_size > self.parents_per_round * self.mutants_per_parent {
            return Err(Error::InvalidInput(format!(
                "round_size {} exceeds the {} candidates a round can generate",
                self.round_size,
                self.parents_per_round * self.mutants_per_parent
            )));
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidInput(
                "ensemble_size must be at least 1".into(),
            ));
        }
        if let Acquisition::EnsembleMeanStd { lambda } = self.acquisition {
            if !lambda.is_finite() {
                return Err(Error::InvalidInput(
                    "acquisition lambda must be finite".into(),
                ));
            }
        }
        Ok(())
    }

    fn digest(&self, features: &dyn FeatureSource) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("{self:?}|{}", features.describe()));
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One oracle evaluation in trace order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    /// 1-based position in the run.
    pub eval_index: usize,
    /// Architecture string.
    pub arch: String,
    /// Ground-truth accuracy.
    pub accuracy: f64,
    /// Running maximum accuracy.
    pub best_so_far: f64,
}

/// Full record of one search run.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchTrace {
    /// Run seed.
    pub seed: u64,
    /// Digest of the config and feature source.
    pub config_digest: String,
    /// Every evaluation, in order.
    pub records: Vec<SearchRecord>,
    /// Evaluation counts at which the surrogate retrained.
    pub retrain_points: Vec<usize>,
    /// Evaluation indices filled by the uniform-random fallback.
    pub fallback_evals: Vec<usize>,
}

impl SearchTrace {
    /// Checks index contiguity, best-so-far monotonicity, and uniqueness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut best = f64::NEG_INFINITY;
        for (position, record) in self.records.iter().enumerate() {
            if record.eval_index != position + 1 {
                return Err(Error::InvalidInput(format!(
                    "trace index {} at position {position}",
                    record.eval_index
                )));
            }
            let genotype = parse_arch_string(&record.arch)?;
            if !seen.insert(genotype.space_index()) {
                return Err(Error::InvalidInput(format!(
                    "architecture {} evaluated twice",
                    record.arch
                )));
            }
            best = best.max(record.accuracy);
            if record.best_so_far != best {
                return Err(Error::InvalidInput(format!(
                    "best_so_far {} at eval {} should be {best}",
                    record.best_so_far, record.eval_index
                )));
            }
        }
        Ok(())
    }

    /// Final best accuracy.
    pub fn best_final(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.best_so_far)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

fn domain_indices(table: &BenchmarkTable) -> Vec<usize> {
    table.archs().map(|g| g.space_index()).collect()
}

fn random_unevaluated<R: Rng + ?Sized>(
    domain: &[usize],
    evaluated: &HashSet<usize>,
    rng: &mut R,
) -> Option<CellGenotype> {
    let open: Vec<usize> = domain
        .iter()
        .copied()
        .filter(|i| !evaluated.contains(i))
        .collect();
    if open.is_empty() {
        return None;
    }
    Some(CellGenotype::from_space_index(
        open[rng.gen_range(0..open.len())],
    ))
}

fn push_eval(records: &mut Vec<SearchRecord>, genotype: &CellGenotype, accuracy: f64) {
    let best = records
        .last()
        .map(|r| r.best_so_far.max(accuracy))
        .unwrap_or(accuracy);
    records.push(SearchRecord {
        eval_index: records.len() + 1,
        arch: format_arch_string(genotype),
        accuracy,
        best_so_far: best,
    });
}

/// Evaluated (genotype, accuracy) pairs plus the trace rows they produced.
pub type WarmUpOutcome = (Vec<(CellGenotype, f64)>, Vec<SearchRecord>);

/// Regularized-evolution warm-up: evaluate `pop_size` random
/// architectures, then repeatedly mutate a tournament winner, aging out
/// the oldest member. Spends exactly `n` budget units.
pub fn regularized_evolution_init<R: Rng + ?Sized>(
    oracle: &MeteredOracle<'_>,
    n: usize,
    pop_size: usize,
    sample_size: usize,
    rng: &mut R,
) -> Result<WarmUpOutcome> {
    if pop_size == 0 || sample_size == 0 || n < pop_size {
        return Err(Error::InvalidInput(format!(
            "warm-up of {n} cannot run with population {pop_size} and tournament {sample_size}"
        )));
    }
    let domain = domain_indices(oracle.table());
    if n > domain.len() {
        return Err(Error::InvalidInput(format!(
            "warm-up of {n} exceeds the {} architectures in the table",
            domain.len()
        )));
    }
    let mut evaluated: Vec<(CellGenotype, f64)> = Vec::with_capacity(n);
    let mut evaluated_set: HashSet<usize> = HashSet::new();
    let mut records = Vec::with_capacity(n);
    let mut population: VecDeque<(CellGenotype, f64)> = VecDeque::with_capacity(pop_size);

    let observe = |genotype: CellGenotype,
                   evaluated: &mut Vec<(CellGenotype, f64)>,
                   evaluated_set: &mut HashSet<usize>,
                   population: &mut VecDeque<(CellGenotype, f64)>,
                   records: &mut Vec<SearchRecord>|
     -> Result<()> {
        let accuracy = oracle.query(&genotype)?;
        evaluated_set.insert(genotype.space_index());
        evaluated.push((genotype, accuracy));
        push_eval(records, &genotype, accuracy);
        population.push_back((genotype, accuracy));
        if population.len() > pop_size {
            population.pop_front();
        }
        Ok(())
    };

    while evaluated.len() < pop_size {
        let genotype =
            random_unevaluated(&domain, &evaluated_set, rng).expect("n <= domain size leaves room");
        observe(
            genotype,
            &mut evaluated,
            &mut evaluated_set,
            &mut population,
            &mut records,
        )?;
    }

    while evaluated.len() < n {
        // Tournament over the living population, sampled with replacement.
        let mut winner = population[rng.gen_range(0..population.len())];
        for _ in 1..sample_size {
            let challenger = &population[rng.gen_range(0..population.len())];
            if challenger.1 > winner.1 {
                winner = *challenger;
            }
        }
        // Mutants must be fresh and in-table so each costs a budget unit.
        let mut child = None;
        for _ in 0..100 {
            let mutant = mutate(&winner.0, rng);
            if !evaluated_set.contains(&mutant.space_index()) && oracle.table().contains(&mutant) {
                child = Some(mutant);
                break;
            }
        }
        let child = match child {
            Some(c) => c,
            None => random_unevaluated(&domain, &evaluated_set, rng)
                .expect("n <= domain size leaves room"),
        };
        observe(
            child,
            &mut evaluated,
            &mut evaluated_set,
            &mut population,
            &mut records,
        )?;
    }

    Ok((evaluated, records))
}

struct Ensemble {
    models: Vec<SurrogateModel>,
}

impl Ensemble {
    fn score(&self, rows: &[Vec<f64>], acquisition: Acquisition) -> Result<Vec<f64>> {
        let per_model: Vec<Vec<f64>> = self
            .models
            .iter()
            .map(|m| m.predict(rows))
            .collect::<Result<_>>()?;
        let m = per_model.len() as f64;
        Ok((0..rows.len())
            .map(|i| {
                let mean = per_model.iter().map(|p| p[i]).sum::<f64>() / m;
                match acquisition {
                    Acquisition::GreedyMean => mean,
                    Acquisition::EnsembleMeanStd { lambda } => {
                        let std = if per_model.len() < 2 {
                            0.0
                        } else {
                            (per_model.iter().map(|p| (p[i] - mean).powi(2)).sum::<f64>()
                                / (m - 1.0))
                                .sqrt()
                        };
                        mean + lambda * std
                    }
                }
            })
            .collect())
    }
}

fn train_ensemble(
    config: &SearchConfig,
    train_x: &[Vec<f64>],
    train_y: &[f64],
    rng: &mut ChaCha20Rng,
) -> Result<Ensemble> {
    let pca = match config.pca_k {
        Some(k) => Some(pca_fit(train_x, k)?),
        None => None,
    };
    let input_dim = pca
        .as_ref()
        .map(|p| p.k_eff())
        .unwrap_or_else(|| train_x[0].len());
    let mlp = MlpConfig {
        input_dim,
        hidden_width: config.surrogate_width,
        hidden_layers: config.surrogate_layers,
        negative_slope: 0.01,
        dropout_p: config.dropout_p,
        output_dim: 1,
    };
    let models = (0..config.ensemble_size)
        .map(|_| {
            let train = TrainConfig {
                seed: rng.gen::<u64>(),
                ..config.train.clone()
            };
            train_surrogate(train_x, train_y, &mlp, &train, pca.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { models })
}

/// Runs one surrogate-assisted search. Consumes exactly
/// `config.total_budget` oracle evaluations.
pub fn surrogate_search(
    config: &SearchConfig,
    features: &dyn FeatureSource,
    table: &BenchmarkTable,
    task: Task,
    seed: u64,
) -> Result<SearchTrace> {
    config.validate()?;
    if config.total_budget > table.len() {
        return Err(Error::InvalidInput(format!(
            "budget {} exceeds the {} architectures in the table",
            config.total_budget,
            table.len()
        )));
    }
    let oracle = MeteredOracle::new(table, task);
    let mut rng = seeded_rng(seed, "surrogate-search");
    let domain = domain_indices(table);

    let (mut evaluated, mut records) = regularized_evolution_init(
        &oracle,
        config.init_evals,
        config.pop_size,
        config.sample_size,
        &mut rng,
    )?;
    let mut evaluated_set: HashSet<usize> =
        evaluated.iter().map(|(g, _)| g.space_index()).collect();
    let mut feature_cache: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut retrain_points = Vec::new();
    let mut fallback_evals = Vec::new();
    let mut ensemble: Option<Ensemble> = None;

    while records.len() < config.total_budget {
        if (records.len() - config.init_evals).is_multiple_of(config.retrain_interval) {
            retrain_points.push(records.len());
            let genotypes: Vec<CellGenotype> = evaluated.iter().map(|(g, _)| *g).collect();
            let train_x = fetch_features(features, &genotypes, &mut feature_cache)?;
            let train_y: Vec<f64> = evaluated.iter().map(|&(_, a)| a).collect();
            ensemble = Some(train_ensemble(config, &train_x, &train_y, &mut rng)?);
        }
        let ensemble = ensemble.as_ref().expect("first round always retrains");

        // Parents: best evaluated architectures by true accuracy.
        let mut ranked: Vec<&(CellGenotype, f64)> = evaluated.iter().collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(a.0.space_index().cmp(&b.0.space_index()))
        });
        let parents: Vec<CellGenotype> = ranked
            .iter()
            .take(config.parents_per_round)
            .map(|(g, _)| *g)
            .collect();

        let take = config.round_size.min(config.total_budget - records.len());
        let mut candidates: Vec<CellGenotype> = Vec::new();
        let mut candidate_set: HashSet<usize> = HashSet::new();
        let propose = |mutant: CellGenotype,
                       candidates: &mut Vec<CellGenotype>,
                       candidate_set: &mut HashSet<usize>| {
            if !evaluated_set.contains(&mutant.space_index())
                && table.contains(&mutant)
                && candidate_set.insert(mutant.space_index())
            {
                candidates.push(mutant);
            }
        };
        for parent in &parents {
            for _ in 0..config.mutants_per_parent {
                propose(
                    mutate(parent, &mut rng),
                    &mut candidates,
                    &mut candidate_set,
                );
            }
        }
        if candidates.len() < take {
            // Widen once with double mutations before giving up on the pool.
            for parent in &parents {
                for _ in 0..config.mutants_per_parent {
                    let double = mutate(&mutate(parent, &mut rng), &mut rng);
                    propose(double, &mut candidates, &mut candidate_set);
                }
            }
        }

        let scored = if candidates.is_empty() {
            Vec::new()
        } else {
            let rows = fetch_features(features, &candidates, &mut feature_cache)?;
            ensemble.score(&rows, config.acquisition)?
        };
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&i, &j| {
            scored[j].total_cmp(&scored[i]).then(
                candidates[i]
                    .space_index()
                    .cmp(&candidates[j].space_index()),
            )
        });

        for &chosen in order.iter().take(take) {
            let genotype = candidates[chosen];
            let accuracy = oracle.query(&genotype)?;
            evaluated_set.insert(genotype.space_index());
            evaluated.push((genotype, accuracy));
            push_eval(&mut records, &genotype, accuracy);
        }
        // Exhausted pool: fill the round with uniform random fresh picks.
        let mut filled = order.len().min(take);
        while filled < take {
            let genotype = random_unevaluated(&domain, &evaluated_set, &mut rng)
                .expect("budget <= table size leaves room");
            let accuracy = oracle.query(&genotype)?;
            evaluated_set.insert(genotype.space_index());
            evaluated.push((genotype, accuracy));
            push_eval(&mut records, &genotype, accuracy);
            fallback_evals.push(records.len());
            filled += 1;
        }
    }

    debug_assert_eq!(oracle.used(), config.total_budget);
    let trace = SearchTrace {
        seed,
        config_digest: config.digest(features),
        records,
        retrain_points,
        fallback_evals,
    };
    trace.validate()?;
    Ok(trace)
}

fn fetch_features(
    source: &dyn FeatureSource,
    genotypes: &[CellGenotype],
    cache: &mut HashMap<usize, Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let missing: Vec<CellGenotype> = genotypes
        .iter()
        .filter(|g| !cache.contains_key(&g.space_index()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        let rows = source.features(&missing)?;
        if rows.len() != missing.len() {
            return Err(Error::Provider(format!(
                "feature source returned {} rows for {} genotypes",
                rows.len(),
                missing.len()
            )));
        }
        for (genotype, row) in missing.iter().zip(rows) {
            cache.insert(genotype.space_index(), row);
        }
    }
    Ok(genotypes
        .iter()
        .map(|g| cache.get(&g.space_index()).expect("just inserted").clone())
        .collect())
}

/// Uniform sampling without replacement.
pub fn random_search(
    table: &BenchmarkTable,
    task: Task,
    budget: usize,
    seed: u64,
) -> Result<SearchTrace> {
    if budget == 0 || budget > table.len() {
        return Err(Error::InvalidInput(format!(
            "budget {budget} must lie in [1, {}]",
            table.len()
        )));
    }
    let oracle = MeteredOracle::new(table, task);
    let mut rng = seeded_rng(seed, "random-search");
    let mut domain = domain_indices(table);
    crate::rng::shuffle(&mut domain, &mut rng);

    let mut records = Vec::with_capacity(budget);
    for &index in domain.iter().take(budget) {
        let genotype = CellGenotype::from_space_index(index);
        let accuracy = oracle.query(&genotype)?;
        push_eval(&mut records, &genotype, accuracy);
    }
    debug_assert_eq!(oracle.used(), budget);
    let trace = SearchTrace {
        seed,
        config_digest: "random-search".into(),
        records,
        retrain_points: Vec::new(),
        fallback_evals: Vec::new(),
    };
    trace.validate()?;
    Ok(trace)
}

/// First evaluation index whose best_so_far is within `pct` percent of
/// `top_accuracy`; None if the trace never gets there. `absolute`
/// interprets `pct` as accuracy points instead of a fraction of the top.
pub fn evals_to_within_pct(
    trace: &SearchTrace,
    top_accuracy: f64,
    pct: f64,
    absolute: bool,
) -> Option<usize> {
    let threshold = if absolute {
        top_accuracy - pct
    } else {
        (1.0 - pct / 100.0) * top_accuracy
    };
    trace
        .records
        .iter()
        .find(|r| r.best_so_far >= threshold)
        .map(|r| r.eval_index)
}

/// Per-index aggregate of two trace sets plus threshold medians.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySummary {
    /// Shared trace length.
    pub budget: usize,
    /// Mean best_so_far per evaluation index, side A.
    pub mean_a: Vec<f64>,
    /// Sample std per index, side A.
    pub std_a: Vec<f64>,
    /// Mean best_so_far per evaluation index, side B.
    pub mean_b: Vec<f64>,
    /// Sample std per index, side B.
    pub std_b: Vec<f64>,
    /// Median evaluations to threshold, side A; None when the median run
    /// never reaches it.
    pub median_evals_a: Option<f64>,
    /// Median evaluations to threshold, side B.
    pub median_evals_b: Option<f64>,
}

fn per_index_stats(traces: &[&SearchTrace], budget: usize) -> (Vec<f64>, Vec<f64>) {
    let n = traces.len() as f64;
    let mut means = Vec::with_capacity(budget);
    let mut stds = Vec::with_capacity(budget);
    for index in 0..budget {
        let values: Vec<f64> = traces
            .iter()
            .map(|t| t.records[index].best_so_far)
            .collect();
        let mean = values.iter().sum::<f64>() / n;
        let std = if traces.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        means.push(mean);
        stds.push(std);
    }
    (means, stds)
}

/// Median with runs that never reach the threshold counted as infinite;
/// an infinite median collapses to None.
fn median_evals(traces: &[&SearchTrace], top: f64, pct: f64, absolute: bool) -> Option<f64> {
    let mut values: Vec<f64> = traces
        .iter()
        .map(|t| {
            evals_to_within_pct(t, top, pct, absolute)
                .map(|e| e as f64)
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    let median = if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    };
    median.is_finite().then_some(median)
}

/// Aggregates two sides of paired runs against one threshold rule.
pub fn compare_trajectories(
    side_a: &[SearchTrace],
    side_b: &[SearchTrace],
    top_accuracy: f64,
    pct: f64,
    absolute: bool,
) -> Result<TrajectorySummary> {
    if side_a.is_empty() || side_b.is_empty() {
        return Err(Error::InvalidInput(
            "both sides need at least one trace".into(),
        ));
    }
    let budget = side_a[0].records.len();
    for trace in side_a.iter().chain(side_b) {
        if trace.records.len() != budget {
            return Err(Error::InvalidInput(format!(
                "ragged trace lengths: {} vs {budget}",
                trace.records.len()
            )));
        }
    }
    let a: Vec<&SearchTrace> = side_a.iter().collect();
    let b: Vec<&SearchTrace> = side_b.iter().collect();
    let (mean_a, std_a) = per_index_stats(&a, budget);
    let (mean_b, std_b) = per_index_stats(&b, budget);
    Ok(TrajectorySummary {
        budget,
        mean_a,
        std_a,
        mean_b,
        std_b,
        median_evals_a: median_evals(&a, top_accuracy, pct, absolute),
        median_evals_b: median_evals(&b, top_accuracy, pct, absolute),
    })
}

/// Writes a trace as `eval_index,arch,accuracy,best_so_far`.
pub fn write_trace_csv(path: &Path, trace: &SearchTrace) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for record in &trace.records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    seed: u64,
    config_digest: String,
    budget: usize,
    retrain_points: Vec<usize>,
    fallback_evals: Vec<usize>,
    best_final: f64,
}

/// Writes the trace's JSON sidecar (seed, config digest, run metadata).
pub fn write_trace_header(path: &Path, trace: &SearchTrace) -> Result<()> {
    let header = TraceHeader {
        seed: trace.seed,
        config_digest: trace.config_digest.clone(),
        budget: trace.records.len(),
        retrain_points: trace.retrain_points.clone(),
        fallback_evals: trace.fallback_evals.clone(),
        best_final: trace.best_final(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

/// Reads a trace back from its CSV and JSON sidecar.
pub fn load_trace(csv_path: &Path, header_path: &Path) -> Result<SearchTrace> {
    let header: TraceHeader = serde_json::from_str(&std::fs::read_to_string(header_path)?)?;
    let mut reader = csv::Reader::from_path(csv_path)?;
    let mut records = Vec::new();
    for record in reader.deserialize() {
        records.push(record?);
    }
    let trace = SearchTrace {
        seed: header.seed,
        config_digest: header.config_digest,
        records,
        retrain_points: header.retrain_points,
        fallback_evals: header.fallback_evals,
    };
    trace.validate()?;
    if trace.records.len() != header.budget {
        return Err(Error::InvalidInput(format!(
            "trace header declares {} evaluations, CSV holds {}",
            header.budget,
            trace.records.len()
        )));
    }
    Ok(trace)
}

/// Writes the comparison summary as plot-ready CSV:
/// `eval_index,mean_a,std_a,mean_b,std_b`.
pub fn write_comparison_csv(path: &Path, summary: &TrajectorySummary) -> Result<()> {
    let mut out = String::from("eval_index,mean_a,std_a,mean_b,std_b\n");
    for index in 0..summary.budget {
        use std::fmt::Write as _;
        writeln!(
            out,
            "{},{},{},{},{}",
            index + 1,
            summary.mean_a[index],
            summary.std_a[index],
            summary.mean_b[index],
            summary.std_b[index]
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}
