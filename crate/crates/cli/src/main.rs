//! `helpbench`: dataset generation, planner runs, evaluation and reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use help_core::agents::{Mode, Selection};
use help_core::harness::{
    compare_reports, evaluate, generate_suite, load_dataset, render_markdown, render_table, run_feasibility,
    run_tasks, write_dataset, BackendKind, EvalOptions, HarnessError, ReportFile, RunConfig, RunKind, RunSummary,
    Suite, SuiteParams,
};

#[derive(Parser)]
#[command(name = "helpbench", version, about = "Hierarchical LLM planning benchmark")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset.
    Gen(GenArgs),
    /// Run the planner over a dataset.
    Run(RunArgs),
    /// Score a run against its dataset.
    Eval(EvalArgs),
    /// Print and save the metrics-versus-length table.
    Report(ReportArgs),
    /// Classify commands as feasible or not and print the accuracy.
    Feasibility(RunArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "core")]
    suite: String,
    #[arg(long)]
    per_length: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    ambiguous: Option<usize>,
    /// Vocabulary bank JSON.
    #[arg(long)]
    bank: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Help,
    LlpOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Similarity,
    Fixed,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Scripted backend rules; selects the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Chat-completions server; selects the HTTP backend.
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    selection: Option<SelectionArg>,
    #[arg(long)]
    no_grounding: bool,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    exemplars: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory holding `run.json` and `traces.jsonl`.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Score the ground truth against itself.
    #[arg(long)]
    gt_as_prediction: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Eval directory holding `report.json`.
    dir: PathBuf,
    /// Baseline eval directory; prints per-length deltas.
    #[arg(long)]
    compare: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    /// Bad configuration or unreadable/unwritable files.
    Setup(String),
    /// The run finished but some tasks recorded errors.
    Tasks(usize),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Setup(e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn out_dir(config: &RunConfig, fallback: &str) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

fn dataset_path(config: &RunConfig, flag: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    flag.clone()
        .or_else(|| config.dataset.clone())
        .ok_or_else(|| Failure::Setup("no dataset: pass --dataset or set `dataset` in the config".into()))
}

fn cmd_gen(config: RunConfig, args: &GenArgs) -> Result<(), Failure> {
    let suite: Suite = args.suite.parse().map_err(Failure::Setup)?;
    let mut config = config;
    if args.bank.is_some() {
        config.bank = args.bank.clone();
    }
    let bank = config.bank()?;
    let defaults = SuiteParams::default();
    let params = SuiteParams {
        per_class: args.per_class.unwrap_or(defaults.per_class),
        per_length: args.per_length.unwrap_or(defaults.per_length),
        ambiguous: args.ambiguous.unwrap_or(defaults.ambiguous),
        ..defaults
    };
    let (tasks, manifest) =
        generate_suite(suite, &params, &bank, config.seed).map_err(|e| Failure::Setup(e.to_string()))?;
    let out = out_dir(&config, &format!("data/{suite}"));
    write_dataset(&out, &tasks, &manifest)?;
    println!("{} tasks -> {}", tasks.len(), out.join("dataset.jsonl").display());
    for (class, n) in &manifest.counts {
        println!("  {class}: {n}");
    }
    Ok(())
}

fn apply_run_args(config: &mut RunConfig, args: &RunArgs) {
    if let Some(script) = &args.script {
        config.backend.kind = BackendKind::Scripted;
        config.backend.script = Some(script.clone());
    }
    if let Some(url) = &args.base_url {
        config.backend.kind = BackendKind::Http;
        config.backend.base_url = url.clone();
    }
    if let Some(model) = &args.model {
        config.backend.model = model.clone();
    }
    if let Some(mode) = args.mode {
        config.pipeline.mode = match mode {
            ModeArg::Help => Mode::Help,
            ModeArg::LlpOnly => Mode::LlpOnly,
        };
    }
    if let Some(selection) = args.selection {
        config.pipeline.selection = match selection {
            SelectionArg::Similarity => Selection::Similarity,
            SelectionArg::Fixed => Selection::Fixed,
        };
    }
    if args.no_grounding {
        config.pipeline.grounding = false;
    }
    if let Some(t) = args.threshold {
        config.pipeline.threshold = t;
    }
    if let Some(k) = args.exemplars {
        config.pipeline.exemplars = k;
    }
    if let Some(p) = args.parallelism {
        config.parallelism = p;
    }
}

fn print_run(summary: &RunSummary, out: &Path) {
    println!(
        "{} tasks ({} run, {} resumed), {} with errors -> {}",
        summary.total,
        summary.executed,
        summary.resumed,
        summary.failed.len(),
        out.display()
    );
    for id in summary.failed.iter().take(10) {
        println!("  error: {id}");
    }
}

fn cmd_run(mut config: RunConfig, args: &RunArgs) -> Result<(), Failure> {
    apply_run_args(&mut config, args);
    let (tasks, sha) = load_dataset(&dataset_path(&config, &args.dataset)?)?;
    let out = out_dir(&config, "runs/latest");
    let summary = run_tasks(&config, RunKind::Pipeline, &tasks, &sha, &out)?;
    print_run(&summary, &out);
    match summary.failed.len() {
        0 => Ok(()),
        n => Err(Failure::Tasks(n)),
    }
}

fn cmd_feasibility(mut config: RunConfig, args: &RunArgs) -> Result<(), Failure> {
    apply_run_args(&mut config, args);
    let (tasks, sha) = load_dataset(&dataset_path(&config, &args.dataset)?)?;
    let out = out_dir(&config, "runs/feasibility");
    let summary = run_feasibility(&config, &tasks, &sha, &out)?;
    print_run(&summary, &out);
    let eval = evaluate(&config, &tasks, &sha, Some(&out), &out.join("eval"), &EvalOptions::default())?;
    match &eval.report.feasibility {
        Some(f) => println!("accuracy: {:.4} ({}/{})", f.accuracy, f.correct, f.total),
        None => println!("accuracy: n/a (no feasibility tasks in the dataset)"),
    }
    match summary.failed.len() {
        0 => Ok(()),
        n => Err(Failure::Tasks(n)),
    }
}

fn cmd_eval(config: RunConfig, args: &EvalArgs) -> Result<(), Failure> {
    let run = match (&args.run, args.gt_as_prediction) {
        (Some(r), _) => Some(r.clone()),
        (None, true) => None,
        (None, false) => return Err(Failure::Setup("pass --run <dir> or --gt-as-prediction".into())),
    };
    let dataset = dataset_path(&config, &args.dataset)?;
    let (tasks, sha) = load_dataset(&dataset)?;
    let out = config.out.clone().unwrap_or_else(|| match &run {
        Some(r) => r.join("eval"),
        None => PathBuf::from("runs/ground_truth/eval"),
    });
    let options = EvalOptions { gt_as_prediction: args.gt_as_prediction };
    let summary = evaluate(&config, &tasks, &sha, run.as_deref(), &out, &options)?;
    if summary.missing_traces > 0 {
        log::warn!("{} tasks have no trace and score zero", summary.missing_traces);
    }
    print!("{}", render_table(&summary.report));
    if let Some(sim) = &summary.report.sim {
        println!("simulator success: {:.4} ({}/{})", sim.overall.rate, sim.overall.successes, sim.overall.count);
    }
    if let Some(f) = &summary.report.feasibility {
        println!("accuracy: {:.4}", f.accuracy);
    }
    println!("-> {}", out.display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Failure> {
    let report = ReportFile::load(&args.dir)?;
    print!("{}", render_table(&report));
    let markdown = render_markdown(&report);
    let path = args.dir.join("report.md");
    std::fs::write(&path, markdown).map_err(|e| HarnessError::io(&path, e))?;
    if let Some(base) = &args.compare {
        let baseline = ReportFile::load(base)?;
        println!("\ndelta vs {}:", base.display());
        print!("{}", compare_reports(&baseline, &report));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Report(args) => cmd_report(args),
        command => load_config(&cli).and_then(|config| match command {
            Command::Gen(args) => cmd_gen(config, args),
            Command::Run(args) => cmd_run(config, args),
            Command::Eval(args) => cmd_eval(config, args),
            Command::Feasibility(args) => cmd_feasibility(config, args),
            Command::Report(_) => unreachable!(),
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tasks(n)) => {
            eprintln!("{n} tasks recorded pipeline errors");
            ExitCode::from(1)
        }
        Err(Failure::Setup(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
