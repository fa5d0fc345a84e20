//! Ground-truth accuracy sources.
//!
//! Real tabular data arrives as CSV (`arch,cifar10_valid,cifar100_test,
//! imagenet16_test`, accuracies in decimal percent with at most 7
//! fractional digits). [`synth_benchmark`] generates a desk-scale
//! stand-in covering all 15,625 cell genotypes, built so that the optimum
//! is not reachable by greedy per-edge choices and a search-relevant
//! fraction of the space sits within 1% of the top.

use crate::nb201::{
    enumerate_space, format_arch_string, parse_arch_string, CellGenotype, EDGES, SPACE_SIZE,
};
use crate::rng::{derive_seed, seeded_rng};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// The three scored tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    /// CIFAR-10 validation accuracy.
    Cifar10Valid,
    /// CIFAR-100 test accuracy.
    Cifar100Test,
    /// ImageNet16-120 test accuracy.
    ImageNet16Test,
}

impl Task {
    /// All tasks in column order.
    pub const ALL: [Task; 3] = [Task::Cifar10Valid, Task::Cifar100Test, Task::ImageNet16Test];

    /// Column position in the CSV schema.
    pub fn index(self) -> usize {
        match self {
            Task::Cifar10Valid => 0,
            Task::Cifar100Test => 1,
            Task::ImageNet16Test => 2,
        }
    }

    /// CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            Task::Cifar10Valid => "cifar10_valid",
            Task::Cifar100Test => "cifar100_test",
            Task::ImageNet16Test => "imagenet16_test",
        }
    }
}

const HEADER: &str = "arch,cifar10_valid,cifar100_test,imagenet16_test";

/// Architecture to accuracy lookup, immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkTable {
    // Keyed by space index so iteration follows the canonical enumeration.
    entries: BTreeMap<usize, [f64; 3]>,
    best: [f64; 3],
}

impl BenchmarkTable {
    /// Builds a table from (genotype, per-task accuracy) rows.
    pub fn from_rows(rows: Vec<(CellGenotype, [f64; 3])>) -> Result<BenchmarkTable> {
        if rows.is_empty() {
            return Err(Error::Benchmark("empty benchmark table".into()));
        }
        let mut entries = BTreeMap::new();
        let mut best = [f64::NEG_INFINITY; 3];
        for (genotype, accuracies) in rows {
            for (task, &value) in Task::ALL.iter().zip(&accuracies) {
                if !value.is_finite() || !(0.0..=100.0).contains(&value) {
                    return Err(Error::Benchmark(format!(
                        "{} accuracy {value} for {} is outside [0, 100]",
                        task.column(),
                        format_arch_string(&genotype)
                    )));
                }
                best[task.index()] = best[task.index()].max(value);
            }
            if entries.insert(genotype.space_index(), accuracies).is_some() {
                return Err(Error::Benchmark(format!(
                    "duplicate architecture {}",
                    format_arch_string(&genotype)
                )));
            }
        }
        Ok(BenchmarkTable { entries, best })
    }

    /// Number of architectures covered.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when no rows are present (never, post-construction).
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether the table covers `genotype`.
    pub fn contains(&self, genotype: &CellGenotype) -> bool {
        self.entries.contains_key(&genotype.space_index())
    }

    /// Stored accuracy for one architecture and task.
    pub fn query(&self, genotype: &CellGenotype, task: Task) -> Result<f64> {
        self.entries
            .get(&genotype.space_index())
            .map(|row| row[task.index()])
            .ok_or_else(|| {
                Error::Benchmark(format!(
                    "unknown architecture {}",
                    format_arch_string(genotype)
                ))
            })
    }

    /// The maximum accuracy over all entries for `task`.
    pub fn best(&self, task: Task) -> f64 {
        self.best[task.index()]
    }

    /// Covered architectures in canonical enumeration order.
    pub fn archs(&self) -> impl Iterator<Item = CellGenotype> + '_ {
        self.entries
            .keys()
            .map(|&index| CellGenotype::from_space_index(index))
    }
}

/// Accepts `digits` or `digits.digits` with 1..=7 fractional digits.
fn parse_accuracy(text: &str) -> Option<f64> {
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (text, None),
    };
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if let Some(f) = frac {
        if f.is_empty() || f.len() > 7 || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    text.parse::<f64>().ok()
}

/// Loads a benchmark CSV, validating every row.
pub fn load_benchmark_table(path: &Path) -> Result<BenchmarkTable> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != HEADER {
        return Err(Error::Benchmark(format!(
            "line 1: expected header `{HEADER}`, found `{header}`"
        )));
    }
    let mut rows = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(Error::Benchmark(format!(
                "line {line}: expected 4 fields, found {}",
                record.len()
            )));
        }
        let genotype = parse_arch_string(&record[0])
            .map_err(|e| Error::Benchmark(format!("line {line}: {e}")))?;
        if !seen.insert(genotype.space_index()) {
            return Err(Error::Benchmark(format!(
                "line {line}: duplicate architecture {}",
                &record[0]
            )));
        }
        let mut accuracies = [0.0; 3];
        for (slot, task) in Task::ALL.iter().enumerate() {
            let text = &record[slot + 1];
            let value = parse_accuracy(text).ok_or_else(|| {
                Error::Benchmark(format!(
                    "line {line}: {} value `{text}` is not a decimal percent with at most 7 fractional digits",
                    task.column()
                ))
            })?;
            if value > 100.0 {
                return Err(Error::Benchmark(format!(
                    "line {line}: {} accuracy {text} is outside [0, 100]",
                    task.column()
                )));
            }
            accuracies[slot] = value;
        }
        rows.push((genotype, accuracies));
    }
    BenchmarkTable::from_rows(rows)
}

/// Writes the canonical CSV form: enumeration order, quoted arch strings,
/// shortest round-trip accuracy formatting.
pub fn save_benchmark_table(path: &Path, table: &BenchmarkTable) -> Result<()> {
    let mut out = String::with_capacity(64 * table.len() + 64);
    out.push_str(HEADER);
    out.push('\n');
    for (&index, row) in &table.entries {
        let arch = format_arch_string(&CellGenotype::from_space_index(index));
        writeln!(out, "\"{arch}\",{},{},{}", row[0], row[1], row[2]).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-task accuracy ceilings; floors are a shared 9.28.
const TASK_TOPS: [f64; 3] = [91.61, 73.51, 47.31];
const TASK_FLOOR: f64 = 9.28;

/// Standard-normal-ish draw from exactly representable dyadic uniforms
/// (sum of three), so results are identical on every platform. Box-Muller
/// is avoided here because `ln`/`cos` are libm calls whose last bit can
/// differ between targets.
fn synth_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let uniform = |rng: &mut R| (rng.gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (uniform(rng) + uniform(rng) + uniform(rng) - 1.5) * 2.0
}

/// Raw landscape score for one genotype: shared per-edge utilities plus
/// per-task pairwise edge interactions plus per-architecture noise.
fn synth_raw_score(
    genotype: &CellGenotype,
    utilities: &[[f64; 5]; 6],
    interactions: &[[[f64; 5]; 5]],
    noise: f64,
) -> f64 {
    let ops: Vec<usize> = EDGES
        .iter()
        .map(|&(src, dst)| genotype.op(src, dst).index())
        .collect();
    let mut score = 0.0;
    for (edge, &op) in ops.iter().enumerate() {
        score += utilities[edge][op];
    }
    let mut pair = 0;
    for a in 0..EDGES.len() {
        for b in (a + 1)..EDGES.len() {
            score += interactions[pair][ops[a]][ops[b]];
            pair += 1;
        }
    }
    score + noise
}

/// Generates a deterministic full-space benchmark.
///
/// Per task, raw scores are rank-mapped through q² into
/// [9.28, task top], rounded to the 1e-7 grid. The quadratic shape
/// concentrates roughly 0.5% of the space within 1% of the top, so a
/// 500-evaluation search budget is neither trivial nor hopeless. Pairwise
/// interaction terms are as strong as the per-edge utilities, which keeps
/// the optimum off the greedy edge-by-edge path.
pub fn synth_benchmark(seed: u64) -> BenchmarkTable {
    let mut utility_rng = seeded_rng(seed, "synth-utilities");
    let mut utilities = [[0.0; 5]; 6];
    for row in &mut utilities {
        for cell in row.iter_mut() {
            *cell = synth_draw(&mut utility_rng);
        }
    }

    let genotypes: Vec<CellGenotype> = enumerate_space().collect();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(3);
    for (task_index, &top) in TASK_TOPS.iter().enumerate() {
        let mut interaction_rng = seeded_rng(seed, &format!("synth-interactions-{task_index}"));
        let pairs = EDGES.len() * (EDGES.len() - 1) / 2;
        let mut interactions = vec![[[0.0; 5]; 5]; pairs];
        for matrix in &mut interactions {
            for row in matrix.iter_mut() {
                for cell in row.iter_mut() {
                    *cell = 0.6 * synth_draw(&mut interaction_rng);
                }
            }
        }

        let mut scored: Vec<(f64, usize)> = genotypes
            .iter()
            .enumerate()
            .map(|(index, genotype)| {
                let mut noise_rng = ChaCha20Rng::from_seed(derive_seed(&[
                    b"synth-noise",
                    &seed.to_le_bytes(),
                    &(task_index as u64).to_le_bytes(),
                    &(index as u64).to_le_bytes(),
                ]));
                let noise = 0.15 * synth_draw(&mut noise_rng);
                (
                    synth_raw_score(genotype, &utilities, &interactions, noise),
                    index,
                )
            })
            .collect();
        scored.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));

        let mut column = vec![0.0; SPACE_SIZE];
        let span = top - TASK_FLOOR;
        for (rank, &(_, index)) in scored.iter().enumerate() {
            let q = rank as f64 / (SPACE_SIZE - 1) as f64;
            let value = TASK_FLOOR + span * q * q;
            column[index] = (value * 1e7).round() / 1e7;
        }
        columns.push(column);
    }

    let rows: Vec<(CellGenotype, [f64; 3])> = genotypes
        .into_iter()
        .enumerate()
        .map(|(index, genotype)| {
            (
                genotype,
                [columns[0][index], columns[1][index], columns[2][index]],
            )
        })
        .collect();
    BenchmarkTable::from_rows(rows).expect("synthetic table is valid by construction")
}

/// Budget-metered view of a table for one search run. Each architecture
/// costs one budget unit the first time it is queried and nothing after.
#[derive(Debug)]
pub struct MeteredOracle<'a> {
    table: &'a BenchmarkTable,
    task: Task,
    memo: Mutex<std::collections::HashMap<usize, f64>>,
    used: AtomicUsize,
}

impl<'a> MeteredOracle<'a> {
    /// Wraps `table` with a fresh meter.
    pub fn new(table: &'a BenchmarkTable, task: Task) -> MeteredOracle<'a> {
        MeteredOracle {
            table,
            task,
            memo: Mutex::new(std::collections::HashMap::new()),
            used: AtomicUsize::new(0),
        }
    }

    /// Ground-truth accuracy; increments the meter only on first sight.
    pub fn query(&self, genotype: &CellGenotype) -> Result<f64> {
        let index = genotype.space_index();
        let mut memo = self.memo.lock().expect("oracle memo poisoned");
        if let Some(&value) = memo.get(&index) {
            return Ok(value);
        }
        let value = self.table.query(genotype, self.task)?;
        memo.insert(index, value);
        self.used.fetch_add(1, Ordering::SeqCst);
        Ok(value)
    }

    /// Whether the architecture was already paid for.
    pub fn seen(&self, genotype: &CellGenotype) -> bool {
        self.memo
            .lock()
            .expect("oracle memo poisoned")
            .contains_key(&genotype.space_index())
    }

    /// Budget units consumed so far.
    pub fn used(&self) -> usize {
        self.used.load(Ordering::SeqCst)
    }

    /// Task this meter scores.
    pub fn task(&self) -> Task {
        self.task
    }

    /// The wrapped table.
    pub fn table(&self) -> &BenchmarkTable {
        self.table
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::kendall_tau;
    use crate::nb201::OpKind;

    #[test]
    fn synth_is_deterministic_and_order_free() {
        let first = synth_benchmark(7);
        let second = synth_benchmark(7);
        assert_eq!(first, second);
        assert_ne!(first, synth_benchmark(8));
        assert_eq!(first.len(), SPACE_SIZE);

        let g = CellGenotype::from_space_index(1234);
        let before = first.query(&g, Task::Cifar10Valid).unwrap();
        for index in [15_000, 3, 9_999] {
            first
                .query(&CellGenotype::from_space_index(index), Task::Cifar10Valid)
                .unwrap();
        }
        assert_eq!(first.query(&g, Task::Cifar10Valid).unwrap(), before);
    }

    #[test]
    fn synth_spans_the_declared_ranges() {
        let table = synth_benchmark(7);
        for (task, top) in Task::ALL.iter().zip(TASK_TOPS) {
            assert_eq!(table.best(*task), top);
            let values: Vec<f64> = table
                .archs()
                .map(|g| table.query(&g, *task).unwrap())
                .collect();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(min, TASK_FLOOR);
            assert!(values.iter().all(|&v| (TASK_FLOOR..=91.61).contains(&v)));
        }
    }

    #[test]
    fn synth_tasks_are_correlated_but_distinct() {
        let table = synth_benchmark(7);
        let column = |task: Task| -> Vec<f64> {
            table
                .archs()
                .map(|g| table.query(&g, task).unwrap())
                .collect()
        };
        let c10 = column(Task::Cifar10Valid);
        let c100 = column(Task::Cifar100Test);
        let tau = kendall_tau(&c10, &c100).unwrap();
        assert!(
            tau > 0.2 && tau < 0.95,
            "tasks should correlate loosely, tau = {tau}"
        );
        assert_ne!(c10, c100);
    }

    #[test]
    fn synth_top_neighborhood_fits_a_500_eval_budget() {
        for seed in [0, 7] {
            let table = synth_benchmark(seed);
            let threshold = 0.99 * table.best(Task::Cifar10Valid);
            let near_top = table
                .archs()
                .filter(|g| table.query(g, Task::Cifar10Valid).unwrap() >= threshold)
                .count();
            assert!(
                (40..=220).contains(&near_top),
                "seed {seed}: {near_top} architectures within 1% of the top"
            );
        }
    }

    #[test]
    fn synth_landscape_is_not_single_basin() {
        for seed in [0, 7] {
            let table = synth_benchmark(seed);
            let score = |g: &CellGenotype| table.query(g, Task::Cifar10Valid).unwrap();
            let mut local_optima = 0;
            for g in table.archs() {
                let here = score(&g);
                let mut is_peak = true;
                'edges: for &(src, dst) in EDGES.iter() {
                    for op in OpKind::ALL {
                        if op == g.op(src, dst) {
                            continue;
                        }
                        let mut ops = [OpKind::Zeroize; 6];
                        for (slot, &(s, d)) in EDGES.iter().enumerate() {
                            ops[slot] = if (s, d) == (src, dst) { op } else { g.op(s, d) };
                        }
                        if score(&CellGenotype::new(ops)) > here {
                            is_peak = false;
                            break 'edges;
                        }
                    }
                }
                if is_peak {
                    local_optima += 1;
                }
            }
            assert!(
                local_optima >= 2,
                "seed {seed}: hill climbing should not solve the benchmark, found {local_optima} optima"
            );
        }
    }

    #[test]
    fn save_then_load_round_trips() {
        let table = synth_benchmark(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        save_benchmark_table(&path, &table).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), HEADER);
        assert!(lines.next().unwrap().starts_with('"'));

        let loaded = load_benchmark_table(&path).unwrap();
        assert_eq!(loaded, table);
        let again = dir.path().join("again.csv");
        save_benchmark_table(&again, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }

    fn write_csv(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
        let path = dir.join("table.csv");
        std::fs::write(&path, format!("{HEADER}\n{body}")).unwrap();
        path
    }

    #[test]
    fn load_validates_rows_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let arch =
            "|nor_conv_3x3~0|+|none~0|skip_connect~1|+|avg_pool_3x3~0|none~1|nor_conv_1x1~2|";

        let one = load_benchmark_table(&write_csv(
            dir.path(),
            &format!("\"{arch}\",91.61,73.51,47.31\n"),
        ))
        .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.best(Task::Cifar10Valid), 91.61);

        let range = load_benchmark_table(&write_csv(
            dir.path(),
            &format!("\"{arch}\",101.0,50.0,40.0\n"),
        ))
        .map(|_| ())
        .unwrap_err();
        assert!(range.to_string().contains("line 2"), "{range}");
        assert!(range.to_string().contains("101.0"), "{range}");

        let dup = load_benchmark_table(&write_csv(
            dir.path(),
            &format!("\"{arch}\",50.0,50.0,40.0\n\"{arch}\",51.0,50.0,40.0\n"),
        ))
        .map(|_| ())
        .unwrap_err();
        assert!(dup.to_string().contains("line 3"), "{dup}");
        assert!(dup.to_string().contains("duplicate"), "{dup}");

        for bad in ["50.12345678", "-1.0", "1e2", "fifty"] {
            let err = load_benchmark_table(&write_csv(
                dir.path(),
                &format!("\"{arch}\",{bad},50.0,40.0\n"),
            ))
            .map(|_| ())
            .unwrap_err();
            assert!(err.to_string().contains("line 2"), "{bad}: {err}");
        }

        let bad_arch =
            load_benchmark_table(&write_csv(dir.path(), "\"|mystery~0|\",50.0,50.0,40.0\n"))
                .map(|_| ())
                .unwrap_err();
        assert!(bad_arch.to_string().contains("line 2"), "{bad_arch}");

        let bad_header = dir.path().join("hdr.csv");
        std::fs::write(&bad_header, "arch,a,b,c\nx,1,2,3\n").unwrap();
        assert!(load_benchmark_table(&bad_header).map(|_| ()).is_err());
    }

    #[test]
    fn meter_charges_each_architecture_once() {
        let table = synth_benchmark(5);
        let oracle = MeteredOracle::new(&table, Task::Cifar100Test);
        let a = CellGenotype::from_space_index(42);
        let b = CellGenotype::from_space_index(4242);

        let first = oracle.query(&a).unwrap();
        assert_eq!(oracle.query(&a).unwrap(), first);
        assert_eq!(first, table.query(&a, Task::Cifar100Test).unwrap());
        assert_eq!(oracle.used(), 1);
        assert!(oracle.seen(&a) && !oracle.seen(&b));

        oracle.query(&b).unwrap();
        assert_eq!(oracle.used(), 2);
    }

    #[test]
    fn meter_reads_full_space_after_exhaustive_query() {
        let table = synth_benchmark(5);
        let oracle = MeteredOracle::new(&table, Task::Cifar10Valid);
        for g in enumerate_space() {
            oracle.query(&g).unwrap();
        }
        assert_eq!(oracle.used(), SPACE_SIZE);
    }

    #[test]
    fn unknown_architecture_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let arch = "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|";
        let table = load_benchmark_table(&write_csv(
            dir.path(),
            &format!("\"{arch}\",10.0,10.0,10.0\n"),
        ))
        .unwrap();
        let missing = CellGenotype::from_space_index(777);
        assert!(table
            .query(&missing, Task::Cifar10Valid)
            .map(|_| ())
            .is_err());
        assert!(BenchmarkTable::from_rows(vec![]).map(|_| ()).is_err());
    }
}
