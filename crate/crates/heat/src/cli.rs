//! The `heat` command.
//!
//! Exit codes: 0 success, 1 usage, 2 data or config error, 3 internal
//! invariant failure. `HEAT_WORKERS` sets the scoring thread count and
//! `RUST_LOG` the log level (default `warn`).

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use heat_core::eval::even_thresholds;
use heat_core::pipeline::{heat_with, PipelineError};
use heat_core::{eat_with, generate_synthetic, precision_recall, precision_recall_log, EngineError, StageConfig};

use crate::ingest::{
    load_fact_graph, load_ground_truth, load_pipeline_config, load_synth_spec, save_fact_graph, save_ground_truth,
    IngestError,
};
use crate::output::{read_matrix, read_merge_log, save, write_matrix, write_merge_log, write_report};
use crate::parallel::RayonExecutor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Parser)]
#[command(name = "heat", version, about = "Bayesian entity alignment for event-driven fact graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one stage and write the alignment matrix.
    Align(AlignArgs),
    /// Run every configured stage, merging as it goes.
    Heat(HeatArgs),
    /// Precision and recall of a matrix or merge log against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic graph pair with ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct AlignArgs {
    /// Graph holding the ambiguous nodes.
    #[arg(long)]
    graph_a: PathBuf,
    /// Graph holding the candidates.
    #[arg(long)]
    graph_b: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Stage to run; needed when the config has more than one.
    #[arg(long)]
    stage: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HeatArgs {
    #[arg(long)]
    graph_a: PathBuf,
    #[arg(long)]
    graph_b: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_graph: PathBuf,
    #[arg(long)]
    out_log: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["matrix", "log"]))]
struct EvalArgs {
    /// Alignment matrix from `align`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Merge log from `heat`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    truth: PathBuf,
    /// Comma-separated, strictly increasing. Defaults to 0.05, 0.10, ..., 0.95.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the seed in the spec file.
    #[arg(long)]
    seed: Option<u64>,
    /// Writes PREFIX.post.jsonl, PREFIX.pre.jsonl and PREFIX.truth.tsv.
    #[arg(long)]
    out_prefix: PathBuf,
}

enum Failure {
    Usage(String),
    Other(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.into())
    }
}

type Outcome = Result<(), Failure>;

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Align(a) => align(a),
        Command::Heat(a) => heat(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    let invariant = e.chain().any(|c| {
        matches!(c.downcast_ref::<EngineError>(), Some(EngineError::RowNotNormalized { .. }))
            || matches!(
                c.downcast_ref::<PipelineError>(),
                Some(PipelineError::Engine(EngineError::RowNotNormalized { .. }))
            )
    });
    if invariant {
        EXIT_INVARIANT
    } else {
        EXIT_DATA
    }
}

fn executor() -> anyhow::Result<RayonExecutor> {
    let exec = RayonExecutor::from_env().context("starting the scoring thread pool")?;
    log::info!("scoring with {} worker(s)", exec.workers());
    Ok(exec)
}

fn select_stage(stages: Vec<StageConfig>, wanted: Option<&str>, config: &Path) -> Result<StageConfig, Failure> {
    let names = || stages.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ");
    match wanted {
        None if stages.len() == 1 => Ok(stages.into_iter().next().expect("one stage")),
        None => Err(Failure::Usage(format!(
            "{} has {} stages; pick one with --stage (available: {})",
            config.display(),
            stages.len(),
            names()
        ))),
        Some(name) => {
            let available = names();
            stages.into_iter().find(|s| s.name == name).ok_or_else(|| {
                Failure::Other(anyhow!(IngestError::Config {
                    path: config.to_path_buf(),
                    field: "stages".into(),
                    message: format!("no stage named `{name}` (available: {available})"),
                }))
            })
        }
    }
}

fn align(a: AlignArgs) -> Outcome {
    let stages = load_pipeline_config(&a.config)?;
    let stage = select_stage(stages, a.stage.as_deref(), &a.config)?;
    let g = load_fact_graph(&a.graph_a)?;
    let gp = load_fact_graph(&a.graph_b)?;
    stage.validate_for(&g, &gp).with_context(|| format!("stage `{}`", stage.name))?;
    let exec = executor()?;
    let started = Instant::now();
    let matrix = eat_with(&g, &gp, &stage, &exec).with_context(|| format!("stage `{}`", stage.name))?;
    log::info!("scored {} rows in {:.2?}", matrix.len(), started.elapsed());
    save(&a.out, |w| write_matrix(&matrix, w))?;
    println!(
        "stage {}: {} rows, {} unalignable, {} above tau {}",
        stage.name,
        matrix.len(),
        matrix.unalignable_count(),
        matrix.decisions(stage.tau).count(),
        stage.tau
    );
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (std::path::absolute(a), std::path::absolute(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn heat(a: HeatArgs) -> Outcome {
    if same_file(&a.out_graph, &a.out_log) {
        return Err(anyhow!("--out-graph and --out-log both point at {}", a.out_graph.display()).into());
    }
    for input in [&a.graph_a, &a.graph_b, &a.config] {
        for output in [&a.out_graph, &a.out_log] {
            if same_file(input, output) {
                return Err(anyhow!("output {} would overwrite an input", output.display()).into());
            }
        }
    }
    let stages = load_pipeline_config(&a.config)?;
    let g = load_fact_graph(&a.graph_a)?;
    let gp = load_fact_graph(&a.graph_b)?;
    let exec = executor()?;
    let started = Instant::now();
    let run = heat_with(&g, &gp, &stages, &exec)?;
    log::info!("pipeline finished in {:.2?}", started.elapsed());
    save_fact_graph(&run.unified.graph, &a.out_graph)?;
    save(&a.out_log, |w| write_merge_log(&run.unified.merge_log, w))?;
    for (name, _) in &run.matrices {
        let merges = run.unified.merge_log.iter().filter(|r| &r.stage == name).count();
        println!("stage {name}: {merges} merges");
    }
    println!(
        "unified graph: {} entities, {} events, {} facts",
        run.unified.graph.entities().len(),
        run.unified.graph.events().len(),
        run.unified.graph.fact_count()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let thresholds = match a.thresholds {
        None => even_thresholds(19),
        Some(t) => {
            if t.is_empty() || t.iter().any(|x| !x.is_finite()) || t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Failure::Usage("--thresholds must be finite and strictly increasing".into()));
            }
            t
        }
    };
    let truth = load_ground_truth(&a.truth)?;
    let report = match (&a.matrix, &a.log) {
        (Some(path), _) => {
            let m = read_matrix(BufReader::new(File::open(path).map_err(|e| IngestError::io(path, e))?), path)?;
            precision_recall(&m, &truth, &thresholds)
        }
        (None, Some(path)) => {
            let log = read_merge_log(BufReader::new(File::open(path).map_err(|e| IngestError::io(path, e))?), path)?;
            precision_recall_log(&log, &truth, &thresholds)
        }
        (None, None) => unreachable!("clap requires one input"),
    }
    .with_context(|| format!("evaluating against {}", a.truth.display()))?;
    save(&a.out, |w| write_report(&report, w))?;
    if let Some(best) = report.points.iter().max_by(|x, y| x.f1().total_cmp(&y.f1())) {
        println!(
            "best F1 {:.4} at threshold {} (precision {:.4}, recall {:.4})",
            best.f1(),
            best.threshold,
            best.precision,
            best.recall
        );
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn synth(a: SynthArgs) -> Outcome {
    let mut spec = load_synth_spec(&a.spec)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let pair = generate_synthetic(&spec).with_context(|| format!("generator spec {}", a.spec.display()))?;
    let post = with_suffix(&a.out_prefix, ".post.jsonl");
    let pre = with_suffix(&a.out_prefix, ".pre.jsonl");
    let truth = with_suffix(&a.out_prefix, ".truth.tsv");
    save_fact_graph(&pair.post, &post)?;
    save_fact_graph(&pair.pre, &pre)?;
    save_ground_truth(&pair.truth, &truth)?;
    println!(
        "post: {} entities, {} facts; pre: {} entities, {} facts; {} truth pairs",
        pair.post.entities().len(),
        pair.post.fact_count(),
        pair.pre.entities().len(),
        pair.pre.fact_count(),
        pair.truth.len()
    );
    Ok(())
}
