//! Subcommand implementations.

use crate::config::{OracleKind, RunConfig};
use crate::{CliError, CvArgs, EmbedArgs, ReportArgs, SearchArgs, TranspileArgs};
use cole_core::codegen::{emit_cell_code, transpile_einspace, CodeText};
use cole_core::einspace::parse_derivation_tree;
use cole_core::embedding::{embed_batch, EmbeddingCache};
use cole_core::evaluation::{
    aggregate, read_results_csv, run_cv, write_results_csv, write_summary_json, CvPlan,
};
use cole_core::nb201::{enumerate_space, parse_arch_string, CellGenotype, SPACE_SIZE};
use cole_core::oracle::BenchmarkTable;
use cole_core::search::{
    compare_trajectories, random_search, surrogate_search, write_comparison_csv, write_trace_csv,
    write_trace_header, ColeFeatures, FeatureSource, PathEncodingFeatures, SearchTrace,
};
use cole_core::{par, Error};
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Search representation arms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Representation {
    /// BANANAS path encoding bits.
    Path,
    /// Code-embedding features.
    Cole,
}

impl Representation {
    fn name(self) -> &'static str {
        match self {
            Representation::Path => "path",
            Representation::Cole => "cole",
        }
    }
}

/// Non-blank lines with their 1-based line numbers.
fn read_input_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| (i + 1, line.trim().to_string()))
        .collect();
    if lines.is_empty() {
        return Err(CliError::Input(format!("no inputs in {}", path.display())));
    }
    Ok(lines)
}

/// Parses architecture lines, failing with line numbers.
fn parse_arch_lines(lines: &[(usize, String)]) -> Result<Vec<CellGenotype>, CliError> {
    lines
        .iter()
        .map(|(lineno, arch)| {
            parse_arch_string(arch).map_err(|e| CliError::Input(format!("line {lineno}: {e}")))
        })
        .collect()
}

/// Emits code text for each genotype under the configured codegen settings.
fn emit_texts(config: &RunConfig, genotypes: &[CellGenotype]) -> Vec<CodeText> {
    let mode = config.codegen.mode.to_mode();
    let addons = config.codegen.addons();
    par::map_ref(genotypes, |g| emit_cell_code(g, mode, addons, None))
}

fn write_or_stdout(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, body)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

pub fn transpile(mut config: RunConfig, args: TranspileArgs) -> Result<(), CliError> {
    if let Some(mode) = args.mode {
        config.codegen.mode = mode;
    }
    if args.backbone {
        config.codegen.backbone = true;
    }
    if args.comment {
        config.codegen.comment = true;
    }
    config.persist(&config.output_dir)?;

    if args.tree {
        let text = std::fs::read_to_string(&args.input)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.input.display())))?;
        let tree = parse_derivation_tree(&text)?;
        let code = transpile_einspace(&tree)?;
        return write_or_stdout(args.out.as_deref(), &code.text);
    }

    let lines = read_input_lines(&args.input)?;
    let single = lines.len() == 1 && !args.jsonl;
    let mode = config.codegen.mode.to_mode();
    let addons = config.codegen.addons();

    let mut body = String::new();
    let mut failures = 0usize;
    for (lineno, arch) in &lines {
        match parse_arch_string(arch) {
            Ok(g) => {
                let code = emit_cell_code(&g, mode, addons, None);
                if single {
                    body.push_str(&code.text);
                } else {
                    let record = serde_json::json!({
                        "line": lineno,
                        "arch": arch,
                        "code": code.text,
                    });
                    body.push_str(&record.to_string());
                    body.push('\n');
                }
            }
            Err(e) => {
                if !args.continue_on_error {
                    return Err(CliError::Input(format!("line {lineno}: {e}")));
                }
                failures += 1;
                eprintln!("line {lineno}: {e}");
                let record =
                    serde_json::json!({ "line": lineno, "arch": arch, "error": e.to_string() });
                body.push_str(&record.to_string());
                body.push('\n');
            }
        }
    }
    write_or_stdout(args.out.as_deref(), &body)?;
    if failures > 0 {
        return Err(CliError::Input(format!(
            "{failures} of {} inputs failed",
            lines.len()
        )));
    }
    Ok(())
}

pub fn embed(mut config: RunConfig, args: EmbedArgs) -> Result<(), CliError> {
    if let Some(kind) = args.provider {
        config.provider.kind = kind;
    }
    if let Some(dim) = args.dim {
        config.provider.dim = dim;
    }
    if let Some(mode) = args.mode {
        config.codegen.mode = mode;
    }
    if let Some(cache) = &args.cache {
        config.provider.cache = Some(cache.clone());
    }
    config.persist(&config.output_dir)?;

    let lines = read_input_lines(&args.input)?;
    let genotypes = parse_arch_lines(&lines)?;
    let provider = config.provider.build()?;
    if let Some(requested) = args.dim {
        if provider.dim() != requested {
            return Err(CliError::Input(format!(
                "provider {} produces dim {} but dim {requested} was requested",
                provider.provider_id(),
                provider.dim()
            )));
        }
    }

    let cache_path = config
        .provider
        .cache
        .clone()
        .unwrap_or_else(|| config.output_dir.join("embeddings.jsonl"));
    if let Some(parent) = cache_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let cache = EmbeddingCache::open(&cache_path)?;
    let before = cache.len();

    let texts = emit_texts(&config, &genotypes);
    let vectors = embed_batch(provider.as_ref(), &texts, Some(&cache)).map_err(|err| {
        if let Error::Transport { ref indices, .. } = err {
            let failed: Vec<&str> = indices
                .iter()
                .take(8)
                .filter_map(|&i| lines.get(i).map(|(_, arch)| arch.as_str()))
                .collect();
            CliError::Runtime(format!("{err}; failed inputs include {failed:?}"))
        } else {
            CliError::from(err)
        }
    })?;

    let after = cache.len();
    println!(
        "embedded {} texts ({} new, {} cached) at dim {} into {}",
        vectors.len(),
        after - before,
        vectors.len() - (after - before),
        vectors[0].dim(),
        cache_path.display()
    );
    Ok(())
}

/// Benchmark accuracies for the full space, in canonical order.
fn full_space_targets(
    table: &BenchmarkTable,
    task: cole_core::oracle::Task,
    genotypes: &[CellGenotype],
) -> Result<Vec<f64>, CliError> {
    if table.len() != SPACE_SIZE {
        return Err(CliError::Input(format!(
            "benchmark table covers {} of {SPACE_SIZE} architectures",
            table.len()
        )));
    }
    genotypes
        .iter()
        .map(|g| table.query(g, task).map_err(CliError::from))
        .collect()
}

pub fn cv(mut config: RunConfig, args: CvArgs) -> Result<(), CliError> {
    if let Some(budgets) = args.budgets {
        config.cv.budgets = budgets;
    }
    if let Some(seeds) = args.seeds {
        config.cv.seeds = seeds;
    }
    if let Some(task) = args.task {
        config.cv.task = task;
    }
    if let Some(kind) = args.provider {
        config.provider.kind = kind;
    }
    if let Some(name) = args.config_name {
        config.cv.config_name = Some(name);
    }
    if let Some(loss) = args.loss {
        config.loss.kind = loss;
    }
    if let Some(k) = args.pca {
        config.pca.k = if k == 0 { None } else { Some(k) };
    }
    if args.record_timing {
        config.cv.record_timing = true;
    }
    config.persist(&config.output_dir)?;

    let genotypes: Vec<CellGenotype> = enumerate_space().collect();
    let table = config.oracle.build()?;
    let task = config.cv.task.to_task();
    let targets = full_space_targets(&table, task, &genotypes)?;

    let provider = config.provider.build()?;
    let cache = match &config.provider.cache {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Some(EmbeddingCache::open(path)?)
        }
        None => None,
    };
    let texts = emit_texts(&config, &genotypes);
    let vectors = embed_batch(provider.as_ref(), &texts, cache.as_ref())?;
    let features: Vec<Vec<f64>> = vectors.into_iter().map(|v| v.values).collect();

    let mut plan = CvPlan::new(SPACE_SIZE, config.seed);
    plan.seeds = (0..config.cv.seeds as u64).collect();
    plan.budgets = config.cv.budgets.clone();
    plan.n_bins = config.cv.bins;
    let settings = config.cv_settings();

    let results = run_cv(&plan, &features, &targets, &settings)?;
    let results_path = config.output_dir.join("results.csv");
    write_results_csv(&results_path, &results)?;
    let rows = aggregate(&results)?;
    let summary_path = config.output_dir.join("summary.json");
    write_summary_json(&summary_path, &rows)?;

    println!(
        "wrote {} trial rows to {}",
        results.len(),
        results_path.display()
    );
    for row in &rows {
        println!(
            "{} budget {:>5}: tau {:.4} +/- {:.4} (mse {:.4}, {} trials)",
            row.config, row.budget, row.tau_mean, row.tau_std, row.mse_mean, row.trials
        );
    }
    Ok(())
}

/// Builds the feature source for one representation arm.
fn build_features(
    config: &RunConfig,
    representation: Representation,
) -> Result<Box<dyn FeatureSource>, CliError> {
    match representation {
        Representation::Path => Ok(Box::new(PathEncodingFeatures)),
        Representation::Cole => {
            let provider = config.provider.build()?;
            let cache = match &config.provider.cache {
                Some(path) => {
                    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                        std::fs::create_dir_all(parent)?;
                    }
                    Some(Arc::new(EmbeddingCache::open(path)?))
                }
                None => None,
            };
            Ok(Box::new(ColeFeatures {
                provider,
                mode: config.codegen.mode.to_mode(),
                addons: config.codegen.addons(),
                cache,
            }))
        }
    }
}

fn run_arm(
    config: &RunConfig,
    arm: Representation,
    table: &BenchmarkTable,
    task: cole_core::oracle::Task,
    seeds: &[u64],
) -> Result<Vec<SearchTrace>, CliError> {
    let search_config = config.search.to_search_config(config.loss.to_loss());
    let features = build_features(config, arm)?;
    par::try_map_ref(seeds, |&seed| {
        surrogate_search(&search_config, features.as_ref(), table, task, seed)
    })
    .map_err(CliError::from)
}

fn write_traces(dir: &Path, name: &str, traces: &[SearchTrace]) -> Result<(), CliError> {
    for trace in traces {
        let base = format!("trace-{name}-{}", trace.seed);
        write_trace_csv(&dir.join(format!("{base}.csv")), trace)?;
        write_trace_header(&dir.join(format!("{base}.json")), trace)?;
    }
    Ok(())
}

pub fn search(mut config: RunConfig, args: SearchArgs) -> Result<(), CliError> {
    if let Some(trials) = args.trials {
        config.search.trials = trials;
    }
    if let Some(budget) = args.budget {
        config.search.total_budget = budget;
    }
    if let Some(task) = args.task {
        config.cv.task = task;
    }
    if let Some(kind) = args.oracle {
        config.oracle.kind = kind;
    }
    if let Some(path) = &args.benchmark {
        config.oracle.kind = OracleKind::Csv;
        config.oracle.path = Some(path.clone());
    }
    if let Some(acq) = args.acquisition {
        config.search.acquisition = acq;
    }
    if let Some(pct) = args.pct {
        config.search.pct = pct;
    }
    if args.absolute {
        config.search.absolute = true;
    }
    config.persist(&config.output_dir)?;

    let arms: Vec<Representation> = if args.representations.is_empty() {
        vec![Representation::Cole]
    } else {
        args.representations.clone()
    };
    if arms.len() > 2 {
        return Err(CliError::Input(
            "at most two representation arms per run".into(),
        ));
    }
    if arms.len() == 2 && arms[0] == arms[1] {
        return Err(CliError::Input(
            "the two representation arms must differ".into(),
        ));
    }

    let table = config.oracle.build()?;
    let task = config.cv.task.to_task();
    let trials = config.search.trials;
    if trials == 0 {
        return Err(CliError::Input("search needs at least one trial".into()));
    }
    let seeds: Vec<u64> = (0..trials as u64)
        .map(|i| config.seed.wrapping_add(i))
        .collect();

    let side_a = run_arm(&config, arms[0], &table, task, &seeds)?;
    write_traces(&config.output_dir, arms[0].name(), &side_a)?;

    let (name_b, side_b) = match arms.get(1) {
        Some(&arm) => {
            let traces = run_arm(&config, arm, &table, task, &seeds)?;
            (arm.name(), traces)
        }
        None => {
            let budget = config.search.total_budget;
            let traces =
                par::try_map_ref(&seeds, |&seed| random_search(&table, task, budget, seed))?;
            ("random", traces)
        }
    };
    write_traces(&config.output_dir, name_b, &side_b)?;

    let top = table.best(task);
    let pct = config.search.pct;
    let absolute = config.search.absolute;
    let summary = compare_trajectories(&side_a, &side_b, top, pct, absolute)?;
    write_comparison_csv(&config.output_dir.join("comparison.csv"), &summary)?;

    let medians = serde_json::json!({
        "side_a": arms[0].name(),
        "side_b": name_b,
        "trials": trials,
        "budget": summary.budget,
        "top_accuracy": top,
        "pct": pct,
        "absolute": absolute,
        "median_evals_a": summary.median_evals_a,
        "median_evals_b": summary.median_evals_b,
    });
    let medians_path = config.output_dir.join("medians.json");
    std::fs::write(
        &medians_path,
        format!("{}\n", serde_json::to_string_pretty(&medians)?),
    )
    .map_err(CliError::from)?;

    let describe = |m: Option<f64>| match m {
        Some(v) => format!("{v}"),
        None => "never".to_string(),
    };
    let unit = if absolute { "points" } else { "%" };
    println!(
        "{} trials, budget {}: median evals to within {pct}{unit} of {top}: {} = {}, {} = {}",
        trials,
        summary.budget,
        arms[0].name(),
        describe(summary.median_evals_a),
        name_b,
        describe(summary.median_evals_b)
    );
    println!(
        "traces and comparison written to {}",
        config.output_dir.display()
    );
    Ok(())
}

pub fn report(config: RunConfig, args: ReportArgs) -> Result<(), CliError> {
    config.persist(&config.output_dir)?;
    let results = read_results_csv(&args.results)?;
    let rows = aggregate(&results)?;

    let summary_path = config.output_dir.join("summary.json");
    write_summary_json(&summary_path, &rows)?;
    let mut writer =
        csv::Writer::from_path(config.output_dir.join("aggregate.csv")).map_err(Error::from)?;
    for row in &rows {
        writer.serialize(row).map_err(Error::from)?;
    }
    writer.flush().map_err(cole_core::Error::from)?;

    for row in &rows {
        println!(
            "{} budget {:>5}: tau {:.4} +/- {:.4} (mse {:.4}, {} trials)",
            row.config, row.budget, row.tau_mean, row.tau_std, row.mse_mean, row.trials
        );
    }
    println!("summary written to {}", summary_path.display());
    Ok(())
}
