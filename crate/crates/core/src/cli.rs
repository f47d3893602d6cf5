//! The `gca` command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 agent or run failure,
//! 3 invalid constraint. Results go to stdout, logs to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{generate_suite, inject_fault, run_suite, Category, GenerateError, Suite, SuiteConfig};
use crate::constraint::{
    parse_frame_spec, validate_task_constraint, ObjectiveKind, ObjectiveSpec, TaskConstraint, ValidationFlag,
};
use crate::llm::{Cassette, CassetteTransport, HttpTransport, LlmClient, LlmConfig, Transport};
use crate::orchestrator::{attribute_error, run_query, AgentConfig, AnswerFormat, PlannerKind, QueryContext, Trace};
use crate::toolbox::{NoiseConfig, SceneSpec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_AGENT: u8 = 2;
pub const EXIT_INVALID: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "gca", version, about = "Constraint-first spatial question answering")]
pub struct Cli {
    /// Repeat for more log output (stderr).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one query against a scene.
    Solve(SolveArgs),
    /// Generate (or load) a suite, run it and write reports.
    Bench(BenchArgs),
    /// Parse a reference-frame formalization and check it against a scene.
    Validate(ValidateArgs),
    /// Inspect trace files.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum TraceCommand {
    Show {
        path: PathBuf,
        /// Print the parsed trace as JSON instead of a summary.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    Scripted,
    Llm,
}

#[derive(Debug, Args)]
pub struct AgentArgs {
    #[arg(long, value_enum)]
    pub planner: Option<PlannerMode>,
    /// Replay LLM responses from this cassette instead of the network.
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: Option<u64>,
    /// Noise profile JSON.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[arg(long)]
    pub fault: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub query: String,
    /// Multiple-choice options, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub options: Vec<String>,
    #[command(flatten)]
    pub agent: AgentArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Run this suite file instead of generating one.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub per_category: Option<usize>,
    /// Per-category overrides such as `metric_distance=0`.
    #[arg(long, value_delimiter = ',')]
    pub counts: Vec<String>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[command(flatten)]
    pub agent: AgentArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// e.g. `+Z_ref = -Z_toaster`
    pub formalization: String,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Objective sentence to check alongside the frame.
    #[arg(long)]
    pub objective: Option<String>,
}

/// Settings that may come from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub scene: Option<PathBuf>,
    pub planner: Option<PlannerMode>,
    pub seed: Option<u64>,
    pub noise: Option<PathBuf>,
    pub budget: Option<usize>,
    pub out: Option<PathBuf>,
    pub verbosity: Option<u8>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        let cfg: CliConfig = serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        if cfg.budget == Some(0) {
            return Err("config: budget must be at least 1".into());
        }
        Ok(cfg)
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn agent_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_AGENT,
        message: message.into(),
    }
}

/// Parses `args` (program name first) and runs the command, writing results
/// to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let config = match cli.config.as_deref().map(CliConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    init_logging(cli.verbose.max(config.verbosity.unwrap_or(0)));
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, &config, out),
        Command::Bench(a) => cmd_bench(a, &config, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Trace {
            command: TraceCommand::Show { path, json },
        } => cmd_trace_show(path, *json, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("GCA_LOG")
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn existing(path: &Path, what: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn load_scene(path: &Path) -> Result<SceneSpec, Failure> {
    existing(path, "scene file")?;
    SceneSpec::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn build_agent_config(a: &AgentArgs, config: &CliConfig) -> Result<AgentConfig, Failure> {
    let mut agent = AgentConfig::default();
    if let Some(b) = a.budget.map(|b| b as usize).or(config.budget) {
        agent.budget = b;
    }
    if let Some(path) = a.noise.as_ref().or(config.noise.as_ref()) {
        existing(path, "noise profile")?;
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        agent.noise =
            serde_json::from_str::<NoiseConfig>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        agent.noise.validate().map_err(usage)?;
    }
    if let Some(seed) = a.seed.or(config.seed) {
        agent.noise.seed = seed;
    }
    agent.planner = match a.planner.or(config.planner).unwrap_or(PlannerMode::Scripted) {
        PlannerMode::Scripted => {
            if a.cassette.is_some() {
                return Err(usage("--cassette requires --planner llm"));
            }
            PlannerKind::Scripted
        }
        PlannerMode::Llm => {
            let llm = LlmConfig::from_env().map_err(|e| usage(e.to_string()))?;
            let transport: Arc<dyn Transport> = match &a.cassette {
                Some(path) => {
                    existing(path, "cassette")?;
                    let cassette = Cassette::load(path).map_err(|e| usage(e.to_string()))?;
                    Arc::new(CassetteTransport::replay(cassette))
                }
                None => Arc::new(HttpTransport::new(llm.api_key.clone())),
            };
            PlannerKind::Llm(LlmClient::new(transport, llm))
        }
    };
    if let Some(f) = &a.fault {
        agent = inject_fault(&agent, f).map_err(|e| usage(e.to_string()))?;
    }
    Ok(agent)
}

fn out_dir(a: &AgentArgs, config: &CliConfig) -> Result<PathBuf, Failure> {
    let dir = a
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("gca-out"));
    fs::create_dir_all(&dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| agent_failure(format!("cannot write {}: {e}", path.display())))
}

fn write_trace(path: &Path, trace: &Trace) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(|e| agent_failure(format!("cannot write {}: {e}", path.display())))?;
    trace
        .write_jsonl(io::BufWriter::new(file))
        .map_err(|e| agent_failure(format!("cannot write {}: {e}", path.display())))
}

fn cmd_solve(a: &SolveArgs, config: &CliConfig, out: &mut dyn Write) -> Result<u8, Failure> {
    let scene_path = a
        .scene
        .as_ref()
        .or(config.scene.as_ref())
        .ok_or_else(|| usage("solve needs --scene"))?;
    let scene = Arc::new(load_scene(scene_path)?);
    let options: Vec<String> = a.options.iter().map(|o| o.trim().to_string()).filter(|o| !o.is_empty()).collect();
    let format = if options.is_empty() {
        AnswerFormat::Free
    } else {
        AnswerFormat::Mcq(options)
    };
    let ctx = QueryContext::with_scene(a.query.clone(), scene, format).map_err(|e| usage(e.to_string()))?;
    let agent = build_agent_config(&a.agent, config)?;
    let dir = out_dir(&a.agent, config)?;
    let trace = run_query(&ctx, &agent).map_err(|e| agent_failure(e.to_string()))?;
    // A silent fault leaves no failure event, but in a noise-free run any
    // perturbed input behind the answer can only have come from the fault.
    let compromised = (agent.tool_fault.is_some() && agent.noise.is_noise_free() && trace.succeeded())
        .then(|| attribute_error(&trace, None))
        .filter(|at| at.blamed.is_some());
    let trace_path = dir.join("trace.jsonl");
    write_trace(&trace_path, &trace)?;
    let _ = writeln!(out, "trace: {}", trace_path.display());
    if let Some(at) = compromised {
        if let Some(answer) = &trace.answer {
            let _ = writeln!(out, "unreliable answer: {}", answer.text);
        }
        let _ = writeln!(out, "attribution: {} ({})", at.stage, at.detail);
        return Ok(EXIT_AGENT);
    }
    match (&trace.answer, trace.succeeded()) {
        (Some(answer), true) => {
            if let Some(letter) = &answer.option {
                let _ = writeln!(out, "answer: {letter}");
            }
            let _ = writeln!(out, "text: {}", answer.text);
            Ok(EXIT_OK)
        }
        _ => {
            if let Some(f) = &trace.failure {
                let _ = writeln!(out, "failure: {}", serde_json::to_string(f).unwrap_or_default());
            }
            if let Some(at) = &trace.attribution {
                let _ = writeln!(out, "attribution: {} ({})", at.stage, at.detail);
            }
            Ok(EXIT_AGENT)
        }
    }
}

fn parse_counts(base: &mut SuiteConfig, items: &[String]) -> Result<(), Failure> {
    for item in items {
        let (name, n) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("count `{item}` is not of the form category=n")))?;
        let cat: Category = name.trim().parse().map_err(|e: String| usage(e))?;
        let n: usize = n.trim().parse().map_err(|_| usage(format!("count `{item}` is not a number")))?;
        base.counts.insert(cat, n);
    }
    base.counts.retain(|_, n| *n > 0);
    Ok(())
}

fn cmd_bench(a: &BenchArgs, config: &CliConfig, out: &mut dyn Write) -> Result<u8, Failure> {
    let agent = build_agent_config(&a.agent, config)?;
    let suite = match &a.suite {
        Some(path) => {
            existing(path, "suite file")?;
            Suite::load(path).map_err(|e| usage(e.to_string()))?
        }
        None => {
            let mut sc = match a.per_category {
                Some(n) => SuiteConfig::uniform(n),
                None => SuiteConfig::default(),
            };
            parse_counts(&mut sc, &a.counts)?;
            if let Some(m) = a.margin {
                sc.margin_deg = m;
            }
            let seed = a.agent.seed.or(config.seed).unwrap_or(0);
            generate_suite(seed, &sc).map_err(|e| match e {
                GenerateError::NoQuestions | GenerateError::DegenerateMargin(_) | GenerateError::AmbiguityRate => {
                    usage(e.to_string())
                }
                other => agent_failure(other.to_string()),
            })?
        }
    };
    let dir = out_dir(&a.agent, config)?;
    let parallelism = a
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    log::info!("running {} questions on {parallelism} threads", suite.questions.len());
    let run = run_suite(&suite, &agent, parallelism);
    suite.save(&dir.join("suite.json")).map_err(|e| agent_failure(e.to_string()))?;
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).map_err(|e| agent_failure(format!("cannot create {}: {e}", traces.display())))?;
    for (id, trace) in &run.traces {
        write_trace(&traces.join(format!("{id}.jsonl")), &trace.without_timing())?;
    }
    write_file(&dir.join("report.json"), &(run.report.to_json() + "\n"))?;
    let md = run.report.to_markdown();
    write_file(&dir.join("report.md"), &md)?;
    let timing = serde_json::json!({ "wall_ms": run.report.wall_ms, "questions": run.report.total });
    write_file(&dir.join("timing.json"), &(timing.to_string() + "\n"))?;
    let _ = write!(out, "{md}");
    log::info!("wall time {} ms", run.report.wall_ms);
    Ok(EXIT_OK)
}

fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let frame = match parse_frame_spec(&a.formalization) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(out, "invalid: {e}");
            let _ = writeln!(out, "  {}", a.formalization);
            let _ = writeln!(out, "  {}^", " ".repeat(a.formalization[..e.position.min(a.formalization.len())].chars().count()));
            return Ok(EXIT_INVALID);
        }
    };
    let _ = writeln!(out, "variant: {}", frame.variant.name());
    let _ = writeln!(out, "frame: {frame}");
    let scene = a.scene.as_deref().map(load_scene).transpose()?;
    let entities: Vec<String> = scene
        .as_ref()
        .map(|s| {
            let mut classes: Vec<String> = s.objects.iter().map(|o| o.class.clone()).collect();
            classes.sort();
            classes.dedup();
            classes
        })
        .unwrap_or_default();
    let objective = match &a.objective {
        Some(text) => ObjectiveSpec::from_statement(text, &entities).map_err(|e| usage(e.to_string()))?,
        None => ObjectiveSpec {
            kind: ObjectiveKind::Custom,
            subjects: vec![],
            statement: String::new(),
        },
    };
    let _ = writeln!(out, "objective: {:?}", objective.kind);
    let tc = TaskConstraint {
        reference: frame,
        objective,
        reasoning: String::new(),
    };
    let mut report = validate_task_constraint(&tc, &entities, scene.as_ref().map(|s| s.cameras.len()));
    if scene.is_none() {
        // Without a scene only scene-independent problems can be judged.
        report.flags.retain(|f| {
            !matches!(
                f,
                ValidationFlag::NoEntities | ValidationFlag::NotDetectable { .. } | ValidationFlag::UnknownSubject { .. }
            )
        });
        let _ = writeln!(out, "scene: none (entity checks skipped)");
    }
    for f in &report.flags {
        let _ = writeln!(out, "flag: {f}");
    }
    if report.is_valid() {
        let _ = writeln!(out, "valid");
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(out, "invalid");
        Ok(EXIT_INVALID)
    }
}

fn cmd_trace_show(path: &Path, json: bool, out: &mut dyn Write) -> Result<u8, Failure> {
    existing(path, "trace file")?;
    let file = fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let trace = Trace::read_jsonl(io::BufReader::new(file)).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&trace).unwrap_or_default());
        return Ok(EXIT_OK);
    }
    let _ = writeln!(out, "query: {}", trace.query);
    if let Some(tc) = &trace.constraint {
        let _ = writeln!(out, "frame: {}", tc.reference);
        let _ = writeln!(out, "objective: {}", tc.objective.statement);
    }
    let _ = writeln!(out, "formalize attempts: {}", trace.formalization.len());
    for s in &trace.steps {
        let _ = writeln!(out, "turn {}: {}", s.turn, s.step.analysis);
        for c in &s.calls {
            let _ = writeln!(
                out,
                "  {} -> {} [{:?}{}] {}",
                c.request.api,
                c.request.output_variable,
                c.status,
                if c.perturbed { ", perturbed" } else { "" },
                c.message
            );
        }
    }
    let mut summary = BTreeMap::new();
    summary.insert("turns", format!("{}/{}", trace.turns, trace.budget));
    summary.insert("tool calls", trace.tool_call_count().to_string());
    for (k, v) in summary {
        let _ = writeln!(out, "{k}: {v}");
    }
    if let Some(ans) = &trace.answer {
        let _ = writeln!(out, "answer: {}", ans.text);
    }
    if let Some(at) = &trace.attribution {
        let _ = writeln!(out, "attribution: {} ({})", at.stage, at.detail);
    }
    Ok(EXIT_OK)
}
