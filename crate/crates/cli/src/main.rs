//! `nsp`: batch front end for the rostering engine.
//!
//! Files are written beside the input unless a path is given; stdout only
//! carries summaries (human-readable, or JSON with `--json`).

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use nsp_core::bench::{self, CactusAxis, RunOptions, DEFAULT_BETA};
use nsp_core::constraints::{evaluate, levels, PenaltyVector, Report};
use nsp_core::generator::{generate, make_scenario, GeneratorConfig, ScenarioKind};
use nsp_core::oracle::{self, Golden};
use nsp_core::search::{solve_collect, CellDirectives, SearchConfig, Status, Strategy, TimeModel};
use nsp_core::{Instance, Roster};

#[derive(Debug, Parser)]
#[command(name = "nsp", version, about = "Nurse rostering: solve, evaluate, generate and benchmark")]
struct Cli {
    /// Print machine-readable JSON summaries.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Search for a roster and write it with its incumbent trace.
    Solve(SolveArgs),
    /// Print the violation report and penalty vector of a roster.
    Eval(EvalArgs),
    /// Generate a seeded instance.
    Gen(GenArgs),
    /// Derive a rescheduling scenario from an instance and its roster.
    Scenario(ScenarioArgs),
    /// Run or summarize strategy comparisons.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Enumerate a small instance exhaustively.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Cell directives (fixed, prioritized, cleared) as JSON.
    #[arg(long)]
    directives: Option<PathBuf>,
    /// `lnps`, `mp`, `mp+is`, or a full name such as `LNPS-10` or `MP-High`.
    #[arg(long, default_value = "lnps")]
    strategy: String,
    /// LNPS restart interval in seconds.
    #[arg(long = "t", default_value_t = 10.0)]
    restart_interval: f64,
    /// MP slot position: high, mid or low.
    #[arg(long, default_value = "low")]
    mp_priority: String,
    /// Time limit in seconds.
    #[arg(long, env = "NSP_TIME_LIMIT", default_value_t = 60.0)]
    limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allow hard violations, ranked above every soft level.
    #[arg(long)]
    soften: bool,
    /// Replace the wall clock by a virtual one advancing this many
    /// evaluations per second, for reproducible runs.
    #[arg(long)]
    evals_per_second: Option<u64>,
    /// Roster output; defaults to `<instance stem>.roster.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace output; defaults to `<instance stem>.trace.csv`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    roster: PathBuf,
    #[arg(long)]
    soften: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    nurses: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 28)]
    days: u32,
    #[arg(long = "density", default_value_t = 0.10)]
    request_density: f64,
    #[arg(long, default_value_t = 7)]
    past_days: u32,
    /// Three work shifts instead of the full table.
    #[arg(long)]
    compact: bool,
    /// Defaults to `gen-n<nurses>-s<seed>.json` in the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    instance: PathBuf,
    /// The roster the scenario departs from.
    #[arg(long = "roster")]
    initial: PathBuf,
    /// entire_reconstructed, first_half_retained or entire_retained.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    extra_density: f64,
    /// Defaults to the instance's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCmd {
    /// Run the product of a suite file, resuming from existing records.
    Run {
        #[arg(long)]
        suite: PathBuf,
        /// Defaults to the suite's `out_dir`, else `<suite stem>-results`
        /// beside the suite file.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Stop after this many new records.
        #[arg(long)]
        max_new: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
    },
    /// Emit cactus data from a records file.
    Cactus {
        #[arg(long, default_value = "records.csv")]
        records: PathBuf,
        /// penalty or modrate.
        #[arg(long, default_value = "penalty")]
        axis: String,
        #[arg(long, default_value_t = DEFAULT_BETA)]
        beta: f64,
        /// Defaults to `cactus_<axis>.csv` beside the records.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Directives whose fixed cells stay constant.
    #[arg(long)]
    directives: Option<PathBuf>,
    #[arg(long)]
    soften: bool,
    /// Witnesses to keep.
    #[arg(long, default_value_t = 3)]
    cap: usize,
    /// Write a golden record of the result.
    #[arg(long)]
    golden: Option<PathBuf>,
}

/// Exit status 1 outcome: no hard-feasible roster without softening.
struct Infeasible;

enum Failure {
    Usage(String),
}

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<Option<Infeasible>, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    let result = match cli.command {
        Cmd::Solve(a) => cmd_solve(a, json),
        Cmd::Eval(a) => cmd_eval(a, json),
        Cmd::Gen(a) => cmd_gen(a, json),
        Cmd::Scenario(a) => cmd_scenario(a, json),
        Cmd::Bench(b) => cmd_bench(b, json),
        Cmd::Oracle(a) => cmd_oracle(a, json),
    };
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Infeasible)) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("nsp: error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Instance::from_json(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_roster(path: &Path, inst: &Instance) -> Result<Roster, Failure> {
    Roster::from_json(&read(path)?, inst).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_directives(path: Option<&Path>) -> Result<CellDirectives, Failure> {
    match path {
        None => Ok(CellDirectives::default()),
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
    }
}

/// `dir/stem.suffix` for an input `dir/stem.ext`.
fn beside(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    input.with_file_name(format!("{stem}.{suffix}"))
}

fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("summary serializes"));
    } else {
        println!("{}", human());
    }
}

fn parse_strategy(a: &SolveArgs) -> Result<Strategy, Failure> {
    let prio = || a.mp_priority.parse::<String>().map(|p| format!("-{p}"));
    let name = match a.strategy.to_ascii_lowercase().as_str() {
        "lnps" => format!("LNPS-{}", a.restart_interval),
        "mp" => format!("MP{}", prio()?),
        "mp+is" | "mp_is" => format!("MP+IS{}", prio()?),
        _ => a.strategy.clone(),
    };
    name.parse::<Strategy>().map_err(Failure::Usage)
}

fn vector_text(p: &PenaltyVector) -> String {
    let text: Vec<String> = p.iter().map(|(l, w)| format!("{l}:{w}")).collect();
    if text.is_empty() {
        "0".into()
    } else {
        text.join(";")
    }
}

fn cmd_solve(a: SolveArgs, json: bool) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let directives = load_directives(a.directives.as_deref())?;
    let mut cfg = SearchConfig::new(parse_strategy(&a)?, a.limit, a.seed);
    cfg.soften_hard = a.soften;
    if let Some(rate) = a.evals_per_second {
        cfg.time_model = TimeModel::Iterations { per_second: rate };
    }
    let (trace, out) = solve_collect(&inst, &cfg, &directives)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| beside(&a.instance, "trace.csv"));
    bench::write_trace(&trace_path, levels(&inst), &trace)?;

    let Some(best) = &out.best else {
        let hard = match out.status {
            Status::Infeasible { best_hard_weight } => best_hard_weight,
            _ => 0,
        };
        emit(json, &json!({ "status": out.status, "trace": trace_path, "iterations": out.iterations }), || {
            format!("no hard-feasible roster found (least hard weight {hard}); rerun with --soften to allow violations")
        });
        return Ok(Some(Infeasible));
    };
    let roster_path = a.out.clone().unwrap_or_else(|| beside(&a.instance, "roster.json"));
    write(&roster_path, &best.roster.to_json(&inst))?;
    let summary = json!({
        "status": out.status,
        "strategy": cfg.strategy.to_string(),
        "incumbent": best.record(roster_path.display().to_string()),
        "penalty_vector": best.penalties,
        "hard_weight": best.hard_weight,
        "modification_count": best.modification_count,
        "modification_rate": best.modification_rate(),
        "incumbents": out.incumbents,
        "iterations": out.iterations,
        "elapsed_seconds": out.elapsed_seconds,
        "roster": roster_path,
        "trace": trace_path,
    });
    emit(json, &summary, || {
        format!(
            "{}: penalties {} (hard {}), {} incumbents, {} iterations in {:.1}s\nroster: {}\ntrace: {}",
            cfg.strategy,
            vector_text(&best.penalties),
            best.hard_weight,
            out.incumbents,
            out.iterations,
            out.elapsed_seconds,
            roster_path.display(),
            trace_path.display()
        )
    });
    Ok(None)
}

fn cmd_eval(a: EvalArgs, json: bool) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let roster = load_roster(&a.roster, &inst)?;
    let report = Report::new(&evaluate(&roster, &inst, a.soften), &inst);
    emit(json, &report, || report.render().trim_end().to_string());
    Ok((!report.feasible).then_some(Infeasible))
}

fn cmd_gen(a: GenArgs, json: bool) -> Outcome {
    let mut cfg = GeneratorConfig::new(a.nurses, a.seed);
    cfg.horizon_days = a.days;
    cfg.request_density = a.request_density;
    cfg.past_days = a.past_days;
    cfg.compact = a.compact;
    let inst = generate(&cfg)?;
    let path = a.out.unwrap_or_else(|| PathBuf::from(format!("gen-n{}-s{}.json", a.nurses, a.seed)));
    write(&path, &inst.to_json())?;
    emit(json, &json!({ "instance": path, "hash": oracle::instance_hash(&inst) }), || {
        format!("wrote {} ({} nurses, {} days)", path.display(), a.nurses, a.days)
    });
    Ok(None)
}

fn cmd_scenario(a: ScenarioArgs, json: bool) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let initial = load_roster(&a.initial, &inst)?;
    let kind: ScenarioKind = a.kind.parse()?;
    let (edited, directives) = make_scenario(&inst, &initial, kind, a.seed, a.extra_density)?;
    let stem = a.instance.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    let dir = a.out_dir.unwrap_or_else(|| a.instance.parent().map(Path::to_path_buf).unwrap_or_default());
    fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let inst_path = dir.join(format!("{stem}.{kind}.json"));
    let dir_path = dir.join(format!("{stem}.{kind}.directives.json"));
    write(&inst_path, &edited.to_json())?;
    write(&dir_path, &(serde_json::to_string_pretty(&directives)? + "\n"))?;
    let added = edited.document().pos_requests.len() + edited.document().neg_requests.len()
        - inst.document().pos_requests.len()
        - inst.document().neg_requests.len();
    let summary = json!({ "instance": inst_path, "directives": dir_path, "extra_requests": added });
    emit(json, &summary, || {
        format!(
            "{kind}: {added} extra requests, {} prioritized cells\ninstance: {}\ndirectives: {}",
            directives.prioritized.len(),
            inst_path.display(),
            dir_path.display()
        )
    });
    Ok(None)
}

fn cmd_bench(b: BenchCmd, json: bool) -> Outcome {
    match b {
        BenchCmd::Run { suite, out_dir, max_new, beta } => {
            let (file, instances) = bench::load_suite(&suite)?;
            let stem_dir = out_dir.or(file.out_dir.clone()).unwrap_or_else(|| {
                let stem = suite.file_stem().map_or_else(|| "suite".into(), |s| s.to_string_lossy().into_owned());
                suite.with_file_name(format!("{stem}-results"))
            });
            let options = RunOptions { out_dir: Some(stem_dir.clone()), max_new_records: max_new };
            let mut records = bench::run_suite(&instances, &file.plan, &options)?;
            bench::scalarize(&mut records, beta);
            let mut rows = Vec::new();
            for name in &file.plan.strategies {
                let mine: Vec<_> = records.iter().filter(|r| &r.strategy == name).collect();
                let scores: Vec<f64> = mine.iter().filter_map(|r| r.score).collect();
                let rates: Vec<f64> = mine.iter().filter_map(|r| r.modification_rate).collect();
                rows.push(json!({
                    "strategy": name,
                    "records": mine.len(),
                    "median_score": bench::median(&scores),
                    "median_modification_rate": bench::median(&rates),
                }));
            }
            let skipped = records.iter().filter(|r| r.is_skipped()).count();
            let summary = json!({ "out_dir": stem_dir, "records": records.len(), "skipped": skipped, "strategies": rows });
            emit(json, &summary, || {
                let mut s = format!("{} records ({} skipped) in {}\n", records.len(), skipped, stem_dir.display());
                for r in &rows {
                    let f = |v: &serde_json::Value| v.as_f64().map_or("-".into(), |x| format!("{x:.3}"));
                    s.push_str(&format!(
                        "{:<12} median score {:>8}  median modification rate {:>6}\n",
                        r["strategy"].as_str().unwrap_or(""),
                        f(&r["median_score"]),
                        f(&r["median_modification_rate"])
                    ));
                }
                s.trim_end().to_string()
            });
            Ok(None)
        }
        BenchCmd::Cactus { records, axis, beta, out } => {
            let axis: CactusAxis = axis.parse().map_err(Failure::Usage)?;
            let mut recs = bench::load_records(&records)?;
            bench::scalarize(&mut recs, beta);
            let cactus = bench::emit_cactus(&recs, axis);
            let path = out.unwrap_or_else(|| records.with_file_name(format!("cactus_{axis}.csv")));
            let f = fs::File::create(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            cactus.write_csv(f)?;
            let summary = json!({ "out": path, "points": cactus.points.len(), "omitted": cactus.omitted });
            emit(json, &summary, || {
                format!("{} points ({} records without a value) -> {}", cactus.points.len(), cactus.omitted, path.display())
            });
            Ok(None)
        }
    }
}

fn cmd_oracle(a: OracleArgs, json: bool) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let directives = load_directives(a.directives.as_deref())?;
    let fixed = directives.resolve(&inst)?.fixed;
    let result = oracle::enumerate_optimal_with(&inst, a.soften, a.cap, &fixed)?;
    if let Some(path) = &a.golden {
        write(path, &(serde_json::to_string_pretty(&Golden::new(&inst, &result))? + "\n"))?;
    }
    let witnesses: Vec<_> = result.optimal_rosters.iter().map(|r| r.to_document(&inst)).collect();
    let summary = json!({
        "optimum": result.optimum,
        "hard_weight": result.hard_weight,
        "feasible": result.feasible,
        "optimal_count": result.optimal_count,
        "explored": result.explored,
        "witnesses": witnesses,
    });
    emit(json, &summary, || {
        let mut s = format!(
            "optimum {} (hard {}), {} optimal of {} explored, feasible: {}",
            vector_text(&result.optimum),
            result.hard_weight,
            result.optimal_count,
            result.explored,
            result.feasible
        );
        for r in &result.optimal_rosters {
            s.push_str("\n\n");
            s.push_str(r.render(&inst).trim_end());
        }
        s
    });
    Ok((!result.feasible).then_some(Infeasible))
}
