//! Command-line front end: `gen`, `memory`, `run`, `report` and `replay`.
//!
//! Every subcommand reads and writes plain JSON / JSONL / CSV files so the
//! stages can be run independently. Errors map to distinct exit codes via
//! [`Error::exit_code`].

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::{
    aggregate_metrics, compute_regret, emit_report, failure_rows, generate_benchmark, BenchmarkManifest, BenchmarkSpec,
    MethodOutcomes, ReportOptions, DEFAULT_REGRET_THRESHOLD, DEFAULT_SEED,
};
use crate::error::{Error, Result};
use crate::exec::with_jobs;
use crate::model::{Instance, Split};
use crate::orchestrator::{replay_audit, run_method, BudgetPolicy, MethodConfig, OrchestrationOutcome};
use crate::router::{build_memory, AgentConfig, MemoryEntry, RouterKind, RuleConfig};
use crate::solvers::{Portfolio, SolverConfig, SolverId};
use crate::verifier::VerifierConfig;

#[derive(Debug, Parser)]
#[command(name = "viso", version, about = "Verifier-in-the-loop power-control solver orchestration")]
pub struct Cli {
    /// JSON file whose entries override the corresponding flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded benchmark and its manifest.
    Gen(GenArgs),
    /// Label the train split with the verified best solver.
    Memory(MemoryArgs),
    /// Run methods over a benchmark and write one JSONL file per method.
    Run(RunArgs),
    /// Aggregate outcome files into metric tables and a failure list.
    Report(ReportArgs),
    /// Re-verify the candidates stored by an audited run.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, env = "VISO_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub train: usize,
    #[arg(long, default_value_t = 8)]
    pub test: usize,
    #[arg(long, default_value_t = 6)]
    pub stress: usize,
    #[arg(long, default_value_t = 6)]
    pub shifted: usize,
}

#[derive(Debug, Args)]
pub struct MemoryArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub bench: PathBuf,
    /// Agent memory; built from the benchmark's train split when omitted.
    #[arg(long)]
    pub memory: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated subset of always-fast, always-exact, always-dist, rule, agent.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<RouterKind>,
    /// Embed every candidate allocation in the outcome records.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Outcome JSONL files, or directories holding them.
    #[arg(long, required = true, num_args = 1..)]
    pub outcomes: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Runtime weight for an extra `r_ver - lambda * runtime` score.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_REGRET_THRESHOLD)]
    pub regret_threshold: f64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub outcomes: Vec<PathBuf>,
}

/// Contents of the `--config` file. Present entries win over flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub spec: Option<BenchmarkSpec>,
    pub solver: Option<SolverConfig>,
    pub verifier: Option<VerifierConfig>,
    pub rule: Option<RuleConfig>,
    pub agent: Option<AgentConfig>,
    pub budget: Option<BudgetPolicy>,
    pub methods: Option<Vec<RouterKind>>,
    pub audit: Option<bool>,
    pub lambda: Option<f64>,
    pub regret_threshold: Option<f64>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    fn solver(&self) -> Result<SolverConfig> {
        let cfg = self.solver.unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    fn verifier(&self) -> Result<VerifierConfig> {
        let cfg = self.verifier.unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `bench.json` -> `bench.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn train_split(instances: &[Instance]) -> Vec<Instance> {
    instances.iter().filter(|i| i.split == Split::Train).cloned().collect()
}

/// Parse arguments from the process and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let jobs = cfg.jobs.or(cli.jobs);
    if jobs == Some(0) {
        return Err(Error::usage("--jobs must be at least 1"));
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(&a, &cfg),
        Command::Memory(a) => cmd_memory(&a, &cfg, jobs),
        Command::Run(a) => cmd_run(&a, &cfg, jobs),
        Command::Report(a) => cmd_report(&a, &cfg),
        Command::Replay(a) => cmd_replay(&a, &cfg),
    }
}

fn cmd_gen(a: &GenArgs, cfg: &FileConfig) -> Result<()> {
    let mut spec = cfg.spec.clone().unwrap_or_else(|| {
        let mut s = BenchmarkSpec::new(a.seed);
        s.train = a.train;
        s.test = a.test;
        s.stress = a.stress;
        s.shifted = a.shifted;
        s
    });
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    let instances = generate_benchmark(&spec)?;
    write_json(&a.out, &instances)?;
    write_json(&manifest_path(&a.out), &BenchmarkManifest::for_spec(&spec))?;
    println!("train={} test={} stress={} shifted={}", spec.train, spec.test, spec.stress, spec.shifted);
    Ok(())
}

fn cmd_memory(a: &MemoryArgs, cfg: &FileConfig, jobs: Option<usize>) -> Result<()> {
    let instances: Vec<Instance> = read_json(&a.bench)?;
    let portfolio = Portfolio::new(cfg.solver()?);
    let verifier = cfg.verifier()?;
    let train = train_split(&instances);
    let memory = with_jobs(jobs, |exec| build_memory(&train, &portfolio, &verifier, exec))?;
    write_json(&a.out, &memory)?;
    let hist: Vec<String> =
        SolverId::ALL.iter().map(|s| format!("{s}={}", memory.iter().filter(|m| m.label == *s).count())).collect();
    println!("entries={} {}", memory.len(), hist.join(" "));
    Ok(())
}

fn load_memory(path: &Path) -> Result<Vec<MemoryEntry>> {
    if !path.exists() {
        return Err(Error::MissingMemory(format!("{} does not exist", path.display())));
    }
    let memory: Vec<MemoryEntry> = read_json(path)?;
    if memory.is_empty() {
        return Err(Error::MissingMemory(format!("{} holds no entries", path.display())));
    }
    Ok(memory)
}

fn cmd_run(a: &RunArgs, cfg: &FileConfig, jobs: Option<usize>) -> Result<()> {
    let instances: Vec<Instance> = read_json(&a.bench)?;
    let methods = match (&cfg.methods, a.methods.is_empty()) {
        (Some(m), _) => m.clone(),
        (None, false) => a.methods.clone(),
        (None, true) => RouterKind::ALL.to_vec(),
    };
    if methods.is_empty() {
        return Err(Error::usage("no methods selected"));
    }
    let mut seen = std::collections::BTreeSet::new();
    if !methods.iter().all(|m| seen.insert(*m)) {
        return Err(Error::usage("methods listed more than once"));
    }

    let portfolio = Portfolio::new(cfg.solver()?);
    let verifier = cfg.verifier()?;
    let train = train_split(&instances);
    let rule = match &cfg.rule {
        Some(r) => r.clone(),
        None if methods.contains(&RouterKind::Rule) => RuleConfig::from_train(&train)
            .map_err(|_| Error::usage("rule thresholds need a train split or a `rule` config entry"))?,
        None => RuleConfig::with_thresholds(0.0, 0.0, 0.0),
    };
    let mut mcfg = MethodConfig::new(rule);
    mcfg.verifier = verifier;
    mcfg.agent = cfg.agent.clone().unwrap_or_default();
    mcfg.budget = cfg.budget.unwrap_or_default();
    mcfg.budget.validate()?;
    mcfg.audit = cfg.audit.unwrap_or(a.audit);

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let results = with_jobs(jobs, |exec| -> Result<Vec<(RouterKind, Vec<OrchestrationOutcome>)>> {
        let memory = if methods.contains(&RouterKind::Agent) {
            Some(match &a.memory {
                Some(p) => load_memory(p)?,
                None => build_memory(&train, &portfolio, &verifier, exec)?,
            })
        } else {
            None
        };
        methods
            .iter()
            .map(|m| Ok((*m, run_method(&instances, *m, memory.as_deref(), &portfolio, &mcfg, exec)?)))
            .collect()
    })?;

    for (method, outcomes) in &results {
        let path = a.out_dir.join(format!("{}.jsonl", method.slug()));
        write_jsonl(&path, outcomes)?;
        let accepted = outcomes.iter().filter(|o| o.resolved).count();
        let rate = if outcomes.is_empty() { 0.0 } else { accepted as f64 / outcomes.len() as f64 };
        println!("{:<14} accepted_rate={rate:.4} ({accepted}/{})", method.label(), outcomes.len());
    }
    Ok(())
}

fn write_jsonl(path: &Path, outcomes: &[OrchestrationOutcome]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for o in outcomes {
        serde_json::to_writer(&mut w, o).map_err(|e| Error::json(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl(path: &Path) -> Result<Vec<OrchestrationOutcome>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
        }
    }
    Ok(out)
}

/// Expand directories into their `.jsonl` files, sorted by name.
fn outcome_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::usage("no outcome files found"));
    }
    Ok(files)
}

fn load_outcomes(paths: &[PathBuf]) -> Result<MethodOutcomes> {
    let mut all: MethodOutcomes = BTreeMap::new();
    for f in outcome_files(paths)? {
        for o in read_jsonl(&f)? {
            all.entry(o.method).or_default().push(o);
        }
    }
    Ok(all)
}

fn cmd_report(a: &ReportArgs, cfg: &FileConfig) -> Result<()> {
    let all = load_outcomes(&a.outcomes)?;
    let opts = ReportOptions {
        lambda: cfg.lambda.or(a.lambda),
        regret_threshold: cfg.regret_threshold.unwrap_or(a.regret_threshold),
    };
    if !(opts.regret_threshold >= 0.0) {
        return Err(Error::usage("regret threshold must be non-negative"));
    }
    let regrets = compute_regret(&all)?;
    let rows = aggregate_metrics(&all, &regrets)?;
    let failures = failure_rows(&all, &regrets, opts.regret_threshold)?;
    emit_report(&rows, &failures, &opts, &a.out_dir)?;
    for r in rows.iter().filter(|r| r.group == "overall") {
        println!(
            "{:<14} accepted={:.4} ver_rate={:.4e} fallback={:.4} attempts={:.4}",
            r.method, r.accepted_rate, r.avg_ver_rate, r.fallback_rate, r.avg_attempts
        );
    }
    let failed_instances: std::collections::BTreeSet<&str> = failures.iter().map(|f| f.instance_id.as_str()).collect();
    println!("failure cases: {}", failed_instances.len());
    Ok(())
}

fn cmd_replay(a: &ReplayArgs, cfg: &FileConfig) -> Result<()> {
    let instances: Vec<Instance> = read_json(&a.bench)?;
    let verifier = cfg.verifier()?;
    let mut checked = 0;
    for outcomes in load_outcomes(&a.outcomes)?.values() {
        checked += replay_audit(&instances, outcomes, &verifier)?;
    }
    println!("replayed {checked} attempts: all verdicts reproduced");
    Ok(())
}
