use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BenchError, BenchRecord, RecordStatus};
use crate::constraints::{self, PenaltyVector};
use crate::generator::{self, GeneratorConfig, ScenarioKind};
use crate::model::{Instance, Roster};
use crate::search::{self, CellDirectives, Incumbent, SearchConfig, Status, Strategy, TimeModel};

/// An instance entered into a suite together with its initial solution.
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub id: String,
    pub instance: Arc<Instance>,
    /// The roster the scenarios start from, or why there is none.
    pub initial: Result<Roster, String>,
}

/// The experiment product: every instance is run under every scenario,
/// strategy, time limit and repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitePlan {
    pub scenarios: Vec<ScenarioKind>,
    pub strategies: Vec<String>,
    pub time_limits: Vec<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: u32,
    #[serde(default = "default_extra")]
    pub extra_request_density: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub time_model: TimeModel,
    #[serde(default)]
    pub soften_hard: bool,
}

fn default_reps() -> u32 {
    3
}
fn default_extra() -> f64 {
    0.05
}
fn default_workers() -> usize {
    1
}
fn default_budget() -> f64 {
    3600.0
}

impl SuitePlan {
    pub fn new(scenarios: Vec<ScenarioKind>, strategies: &[&str], time_limits: Vec<f64>, repetitions: u32) -> Self {
        SuitePlan {
            scenarios,
            strategies: strategies.iter().map(|s| s.to_string()).collect(),
            time_limits,
            repetitions,
            extra_request_density: default_extra(),
            seed: 0,
            workers: default_workers(),
            time_model: TimeModel::Wall,
            soften_hard: false,
        }
    }

    /// Parses the strategy names, accepting only the benchmark set.
    pub fn strategies(&self) -> Result<Vec<(String, Strategy)>, BenchError> {
        let known: Vec<String> = Strategy::benchmark_set().iter().map(|s| s.to_string()).collect();
        self.strategies
            .iter()
            .map(|name| {
                let s: Strategy = name.parse().map_err(BenchError::Config)?;
                let canonical = s.to_string();
                if !known.contains(&canonical) {
                    return Err(BenchError::Config(format!(
                        "strategy `{name}` is not in the benchmark set ({})",
                        known.join(", ")
                    )));
                }
                Ok((canonical, s))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let strategies = self.strategies()?;
        let names: BTreeSet<&str> = strategies.iter().map(|(n, _)| n.as_str()).collect();
        if names.len() != strategies.len() {
            return Err(BenchError::Config("strategies contain duplicates".into()));
        }
        if let Some(t) = self.time_limits.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(BenchError::Config(format!("time limit {t} must be positive")));
        }
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.extra_request_density) {
            return Err(BenchError::Config("extra_request_density must lie in [0, 1]".into()));
        }
        if let TimeModel::Iterations { per_second: 0 } = self.time_model {
            return Err(BenchError::Config("per_second must be positive".into()));
        }
        Ok(())
    }

    /// Number of product cells for `instances` instances.
    pub fn product_size(&self, instances: usize) -> usize {
        instances * self.scenarios.len() * self.strategies.len() * self.time_limits.len() * self.repetitions as usize
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory holding `records.csv` and the trace files. Without it
    /// nothing is persisted and nothing is resumed.
    pub out_dir: Option<PathBuf>,
    /// Stop after this many newly executed cells.
    pub max_new_records: Option<usize>,
}

/// Identity of a product cell; equal keys are the same cell across runs.
pub fn record_key(r: &BenchRecord) -> String {
    key_of(&r.instance_id, r.scenario, &r.strategy, r.time_limit_seconds, r.repetition)
}

fn key_of(id: &str, scenario: ScenarioKind, strategy: &str, limit: f64, rep: u32) -> String {
    format!("{id}|{scenario}|{strategy}|{limit}|{rep}")
}

/// File-name-safe trace identifier of a record.
pub fn trace_id(r: &BenchRecord) -> String {
    format!("{}_{}_{}_{}s_r{}", r.instance_id, r.scenario, r.strategy, r.time_limit_seconds, r.repetition)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest is long enough"))
}

struct Job {
    record: BenchRecord,
    scenario_ix: usize,
    strategy: Strategy,
    seed: u64,
}

struct ScenarioCase {
    instance: Arc<Instance>,
    directives: CellDirectives,
}

/// Runs every pending cell of the product and returns the records in
/// product order. With an output directory, existing records are reused
/// and each new record is appended as soon as its cell finishes.
/// Instances without an initial solution yield skipped records, which are
/// not persisted so a later run retries them.
pub fn run_suite(
    instances: &[BenchInstance],
    plan: &SuitePlan,
    options: &RunOptions,
) -> Result<Vec<BenchRecord>, BenchError> {
    plan.validate()?;
    let strategies = plan.strategies()?;
    let ids: BTreeSet<&str> = instances.iter().map(|b| b.id.as_str()).collect();
    if ids.len() != instances.len() {
        return Err(BenchError::Config("instance ids must be unique".into()));
    }

    let records_path = options.out_dir.as_ref().map(|d| d.join("records.csv"));
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut done: BTreeMap<String, BenchRecord> = BTreeMap::new();
    if let Some(path) = records_path.as_ref().filter(|p| p.exists()) {
        for r in load_records(path)? {
            done.insert(record_key(&r), r);
        }
    }

    let mut slots: Vec<Option<BenchRecord>> = Vec::new();
    let mut jobs: Vec<(usize, Job)> = Vec::new();
    let mut cases: Vec<ScenarioCase> = Vec::new();
    let mut case_of: BTreeMap<(usize, ScenarioKind), usize> = BTreeMap::new();
    for (ii, bi) in instances.iter().enumerate() {
        for &scenario in &plan.scenarios {
            for (name, strategy) in &strategies {
                for &limit in &plan.time_limits {
                    for rep in 1..=plan.repetitions {
                        let key = key_of(&bi.id, scenario, name, limit, rep);
                        if let Some(r) = done.remove(&key) {
                            slots.push(Some(r));
                            continue;
                        }
                        let mut record = blank(&bi.id, scenario, name, limit, rep);
                        let initial = match &bi.initial {
                            Ok(r) => r,
                            Err(cause) => {
                                record.status = RecordStatus::Skipped;
                                record.skip_cause = Some(cause.clone());
                                slots.push(Some(record));
                                continue;
                            }
                        };
                        if options.max_new_records.is_some_and(|m| jobs.len() >= m) {
                            slots.push(None);
                            continue;
                        }
                        let scenario_ix = match case_of.get(&(ii, scenario)) {
                            Some(&k) => k,
                            None => {
                                let seed = derive_seed(plan.seed, &[&bi.id, scenario.as_str()]);
                                let (inst, directives) = generator::make_scenario(
                                    &bi.instance,
                                    initial,
                                    scenario,
                                    seed,
                                    plan.extra_request_density,
                                )?;
                                cases.push(ScenarioCase { instance: Arc::new(inst), directives });
                                case_of.insert((ii, scenario), cases.len() - 1);
                                cases.len() - 1
                            }
                        };
                        let seed = derive_seed(plan.seed, &[&key]);
                        slots.push(None);
                        jobs.push((slots.len() - 1, Job { record, scenario_ix, strategy: *strategy, seed }));
                    }
                }
            }
        }
    }

    let mut appender = match &records_path {
        Some(p) => Some(RecordAppender::open(p)?),
        None => None,
    };
    let workers = plan.workers.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<(BenchRecord, Vec<Incumbent>), BenchError>)>();
    let mut failure: Option<BenchError> = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, cases, next) = (&jobs, &cases, &next);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, job)) = jobs.get(k) else { break };
                let result = execute(job, &cases[job.scenario_ix], plan);
                let failed = result.is_err();
                if tx.send((k, result)).is_err() || failed {
                    // Drain the queue so other workers stop too.
                    next.store(jobs.len(), Ordering::Relaxed);
                    break;
                }
            });
        }
        drop(tx);
        for (k, result) in rx {
            let (slot, _) = &jobs[k];
            match result {
                Ok((mut record, trace)) => {
                    if let (Some(dir), Some(app)) = (&options.out_dir, appender.as_mut()) {
                        let id = trace_id(&record);
                        let name = format!("trace_{id}.csv");
                        if let Err(e) = write_trace(&dir.join(&name), &record.levels, &trace) {
                            failure.get_or_insert(e);
                            continue;
                        }
                        record.trace_ref = Some(name);
                        if let Err(e) = app.append(&record) {
                            failure.get_or_insert(e);
                            continue;
                        }
                    }
                    slots[*slot] = Some(record);
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(slots.into_iter().flatten().collect())
}

fn blank(id: &str, scenario: ScenarioKind, strategy: &str, limit: f64, rep: u32) -> BenchRecord {
    BenchRecord {
        instance_id: id.to_string(),
        scenario,
        strategy: strategy.to_string(),
        time_limit_seconds: limit,
        repetition: rep,
        status: RecordStatus::Skipped,
        skip_cause: None,
        levels: Vec::new(),
        penalties: None,
        score: None,
        modification_rate: None,
        modification_count: 0,
        prioritized_count: 0,
        iterations: 0,
        automatic_restarts: 0,
        trace_ref: None,
    }
}

fn execute(job: &Job, case: &ScenarioCase, plan: &SuitePlan) -> Result<(BenchRecord, Vec<Incumbent>), BenchError> {
    let mut config = SearchConfig::new(job.strategy, job.record.time_limit_seconds, job.seed);
    config.soften_hard = plan.soften_hard;
    config.time_model = plan.time_model;
    let (trace, outcome) = search::solve_collect(&case.instance, &config, &case.directives)?;
    let mut record = job.record.clone();
    record.levels = constraints::levels(&case.instance).to_vec();
    record.status = match outcome.status {
        Status::Optimal => RecordStatus::Optimal,
        Status::TimeLimit => RecordStatus::TimeLimit,
        Status::Stopped => RecordStatus::Stopped,
        Status::Exhausted => RecordStatus::Exhausted,
        Status::Infeasible { .. } => RecordStatus::Infeasible,
    };
    record.iterations = outcome.iterations;
    record.automatic_restarts = outcome.automatic_restarts;
    if let Some(best) = &outcome.best {
        record.penalties = Some(best.penalties.clone());
        record.modification_rate = best.modification_rate();
        record.modification_count = best.modification_count;
        record.prioritized_count = best.prioritized_count;
    }
    Ok((record, trace))
}

fn io_err(path: &Path, source: std::io::Error) -> BenchError {
    BenchError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, source: csv::Error) -> BenchError {
    BenchError::Csv { path: path.display().to_string(), source }
}

/// Writes an incumbent trace as CSV with one penalty column per level.
pub fn write_trace(path: &Path, levels: &[i64], trace: &[Incumbent]) -> Result<(), BenchError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["sequence".to_string(), "time".to_string()];
    header.extend(levels.iter().map(|l| format!("p{l}")));
    header.push("modification_count".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for inc in trace {
        let mut row = vec![inc.sequence.to_string(), format!("{:.6}", inc.wall_time_seconds)];
        row.extend(inc.penalties.to_slots(levels).iter().map(u64::to_string));
        row.push(inc.modification_count.to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Flat CSV form of [`BenchRecord`].
#[derive(Debug, Serialize, Deserialize)]
struct Row {
    instance_id: String,
    scenario: String,
    strategy: String,
    time_limit_seconds: f64,
    repetition: u32,
    status: String,
    skip_cause: String,
    levels: String,
    penalties: String,
    score: Option<f64>,
    modification_rate: Option<f64>,
    modification_count: usize,
    prioritized_count: usize,
    iterations: u64,
    automatic_restarts: u32,
    trace_ref: String,
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|t| t.to_string()).collect::<Vec<_>>().join(";")
}

impl From<&BenchRecord> for Row {
    fn from(r: &BenchRecord) -> Row {
        Row {
            instance_id: r.instance_id.clone(),
            scenario: r.scenario.to_string(),
            strategy: r.strategy.clone(),
            time_limit_seconds: r.time_limit_seconds,
            repetition: r.repetition,
            status: r.status.as_str().into(),
            skip_cause: r.skip_cause.clone().unwrap_or_default(),
            levels: join(r.levels.iter()),
            // "0" marks a zero vector; an empty field means no incumbent.
            penalties: match &r.penalties {
                None => String::new(),
                Some(p) if p.is_zero() => "0".into(),
                Some(p) => join(p.iter().map(|(l, w)| format!("{l}:{w}"))),
            },
            score: r.score,
            modification_rate: r.modification_rate,
            modification_count: r.modification_count,
            prioritized_count: r.prioritized_count,
            iterations: r.iterations,
            automatic_restarts: r.automatic_restarts,
            trace_ref: r.trace_ref.clone().unwrap_or_default(),
        }
    }
}

impl TryFrom<Row> for BenchRecord {
    type Error = String;

    fn try_from(row: Row) -> Result<BenchRecord, String> {
        let int = |s: &str| s.trim().parse::<i64>().map_err(|_| format!("bad integer `{s}`"));
        let levels = if row.levels.is_empty() {
            Vec::new()
        } else {
            row.levels.split(';').map(int).collect::<Result<_, _>>()?
        };
        let penalties = match row.penalties.as_str() {
            "" => None,
            "0" => Some(PenaltyVector::new()),
            s => {
                let mut v = PenaltyVector::new();
                for part in s.split(';') {
                    let (l, w) = part.split_once(':').ok_or_else(|| format!("bad penalty entry `{part}`"))?;
                    let w: u64 = w.parse().map_err(|_| format!("bad penalty weight `{w}`"))?;
                    v.add(int(l)?, w);
                }
                Some(v)
            }
        };
        let opt = |s: String| (!s.is_empty()).then_some(s);
        Ok(BenchRecord {
            instance_id: row.instance_id,
            scenario: row.scenario.parse().map_err(|e: generator::GeneratorError| e.to_string())?,
            strategy: row.strategy,
            time_limit_seconds: row.time_limit_seconds,
            repetition: row.repetition,
            status: row.status.parse()?,
            skip_cause: opt(row.skip_cause),
            levels,
            penalties,
            score: row.score,
            modification_rate: row.modification_rate,
            modification_count: row.modification_count,
            prioritized_count: row.prioritized_count,
            iterations: row.iterations,
            automatic_restarts: row.automatic_restarts,
            trace_ref: opt(row.trace_ref),
        })
    }
}

struct RecordAppender {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl RecordAppender {
    fn open(path: &Path) -> Result<Self, BenchError> {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            writer
                .write_record([
                    "instance_id",
                    "scenario",
                    "strategy",
                    "time_limit_seconds",
                    "repetition",
                    "status",
                    "skip_cause",
                    "levels",
                    "penalties",
                    "score",
                    "modification_rate",
                    "modification_count",
                    "prioritized_count",
                    "iterations",
                    "automatic_restarts",
                    "trace_ref",
                ])
                .map_err(|e| csv_err(path, e))?;
        }
        Ok(RecordAppender { path: path.to_path_buf(), writer })
    }

    fn append(&mut self, record: &BenchRecord) -> Result<(), BenchError> {
        self.writer.serialize(Row::from(record)).map_err(|e| csv_err(&self.path, e))?;
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}

pub fn load_records(path: &Path) -> Result<Vec<BenchRecord>, BenchError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    reader
        .deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| csv_err(path, e))?;
            BenchRecord::try_from(row).map_err(|message| BenchError::Input { path: path.display().to_string(), message })
        })
        .collect()
}

pub fn write_records(path: &Path, records: &[BenchRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(Row::from(r)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Solves `instance` from scratch and returns its best roster. An instance
/// without a hard-feasible roster within the budget is solved again with
/// hard constraints softened.
pub fn prepare_initial(
    instance: &Instance,
    budget_seconds: f64,
    seed: u64,
    time_model: TimeModel,
) -> Result<Roster, BenchError> {
    let mut config = SearchConfig::new(Strategy::Lnps { restart_interval_seconds: 10.0 }, budget_seconds, seed);
    config.time_model = time_model;
    let none = CellDirectives::default();
    let (_, outcome) = search::solve_collect(instance, &config, &none)?;
    if let Some(best) = outcome.best {
        return Ok(best.roster);
    }
    config.soften_hard = true;
    let (_, outcome) = search::solve_collect(instance, &config, &none)?;
    outcome
        .best
        .map(|b| b.roster)
        .ok_or_else(|| BenchError::Config("no initial roster could be built".into()))
}

/// Where a suite instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    File {
        #[serde(default)]
        id: Option<String>,
        instance: PathBuf,
        /// Precomputed initial roster; computed when absent.
        #[serde(default)]
        initial: Option<PathBuf>,
    },
    Generated {
        #[serde(default)]
        id: Option<String>,
        generate: GeneratorConfig,
    },
}

/// Suite description read by `bench run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteFile {
    #[serde(flatten)]
    pub plan: SuitePlan,
    pub instances: Vec<InstanceSource>,
    /// Search budget for computing missing initial rosters.
    #[serde(default = "default_budget")]
    pub initial_budget_seconds: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Reads a suite file and materializes its instances. Relative paths are
/// resolved against the file's directory. An initial roster that fails to
/// load turns into a skip cause rather than an error.
pub fn load_suite(path: &Path) -> Result<(SuiteFile, Vec<BenchInstance>), BenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut suite: SuiteFile = serde_json::from_str(&text)
        .map_err(|e| BenchError::Input { path: path.display().to_string(), message: e.to_string() })?;
    suite.plan.validate()?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if let Some(out) = &suite.out_dir {
        suite.out_dir = Some(resolve(out));
    }
    let mut out = Vec::new();
    for source in &suite.instances {
        let (id, instance, initial) = match source {
            InstanceSource::File { id, instance, initial } => {
                let ipath = resolve(instance);
                let text = fs::read_to_string(&ipath).map_err(|e| io_err(&ipath, e))?;
                let inst = Instance::from_json(&text).map_err(|e| BenchError::Input {
                    path: ipath.display().to_string(),
                    message: e.to_string(),
                })?;
                let id = id.clone().unwrap_or_else(|| {
                    ipath.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
                });
                let initial = initial.as_ref().map(|p| {
                    let rpath = resolve(p);
                    fs::read_to_string(&rpath)
                        .map_err(|e| e.to_string())
                        .and_then(|t| Roster::from_json(&t, &inst).map_err(|e| e.to_string()))
                        .map_err(|e| format!("initial roster {}: {e}", rpath.display()))
                });
                (id, inst, initial)
            }
            InstanceSource::Generated { id, generate } => {
                let id = id.clone().unwrap_or_else(|| format!("gen-n{}-s{}", generate.nurse_count, generate.seed));
                (id, generator::generate(generate)?, None)
            }
        };
        let initial = match initial {
            Some(r) => r,
            None => Ok(prepare_initial(
                &instance,
                suite.initial_budget_seconds,
                derive_seed(suite.plan.seed, &[&id, "initial"]),
                suite.plan.time_model,
            )?),
        };
        out.push(BenchInstance { id, instance: Arc::new(instance), initial });
    }
    Ok((suite, out))
}
