use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qprl::env::{EnvConfig, RewardMode};
use qprl::harness::{self, DatasetSpec, EvalAgent, Split, SplitCounts};
use qprl::policy::PolicyParams;
use qprl::ppo::{self, CheckpointEvent, PpoConfig, RewardSignal, TrainOptions};
use qprl::problems::{load_instances, ProblemInstance, ProblemKind};
use qprl::qaoa::{self, QaoaConfig};
use qprl::statevec::GateOp;
use qprl::transpiler;

#[derive(Debug, Parser)]
#[command(name = "qprl", version, about = "Reinforcement-learned quantum programs for combinatorial optimization")]
struct Cli {
    /// Worker threads; 0 uses every core
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate train/val/test instance files
    GenData(GenDataArgs),
    /// Train the PPO agent
    Train(TrainArgs),
    /// Evaluate a checkpoint or the uniform-random agent
    Eval(EvalArgs),
    /// Run the depth-one QAOA grid-search baseline
    Qaoa(QaoaArgs),
    /// Compile programs to the native gate set
    Transpile(TranspileArgs),
    /// Summarize episode records into CSV tables
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Comma-separated problem kinds
    #[arg(long, value_delimiter = ',', default_value = "maxcut,maxqp,qubo")]
    kinds: Vec<ProblemKind>,
    /// Variables per instance
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Training instances per kind
    #[arg(long, default_value_t = 1000)]
    train_n: usize,
    /// Validation instances per kind
    #[arg(long, default_value_t = 100)]
    val_n: usize,
    /// Test instances per kind
    #[arg(long, default_value_t = 100)]
    test_n: usize,
    /// Root seed
    #[arg(long, env = "QPRL_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EnvArgs {
    /// Measurement shots per step [default: 10]
    #[arg(long)]
    shots: Option<usize>,
    /// Actions before an episode is lost [default: 25]
    #[arg(long)]
    max_len: Option<usize>,
    /// Reward that wins an episode (strict) [default: 0.8]
    #[arg(long)]
    threshold: Option<f64>,
    /// sampled | exact [default: sampled]
    #[arg(long)]
    reward_mode: Option<RewardMode>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory (train.jsonl, optional val.jsonl) or a single instance file
    #[arg(long)]
    data: PathBuf,
    /// Optional key=value file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment steps [default: 100000]
    #[arg(long)]
    steps: Option<usize>,
    /// Root seed
    #[arg(long, env = "QPRL_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory for checkpoints and the learning curve
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Steps per rollout per environment [default: 512]
    #[arg(long)]
    n_steps: Option<usize>,
    /// Parallel environments [default: 1]
    #[arg(long)]
    n_envs: Option<usize>,
    /// Initial learning rate, decayed linearly to 0 [default: 0.00025]
    #[arg(long)]
    lr: Option<f64>,
    /// GAE coefficient [default: 0.95]
    #[arg(long)]
    gae_lambda: Option<f64>,
    /// Discount factor [default: 0.99]
    #[arg(long)]
    discount: Option<f64>,
    /// Learner signal: increment | absolute [default: increment]
    #[arg(long)]
    reward_signal: Option<RewardSignal>,
    /// Validate and checkpoint every this many updates; 0 only at the end [default: 10]
    #[arg(long)]
    eval_every: Option<usize>,
    #[command(flatten)]
    env: EnvArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Policy checkpoint to evaluate
    #[arg(long, conflicts_with = "untrained", required_unless_present = "untrained")]
    checkpoint: Option<PathBuf>,
    /// Use the uniform-random agent instead of a checkpoint
    #[arg(long)]
    untrained: bool,
    /// Instance file, or dataset directory (uses --split)
    #[arg(long)]
    data: PathBuf,
    /// Split read from a dataset directory
    #[arg(long, default_value = "test")]
    split: Split,
    /// Root seed
    #[arg(long, env = "QPRL_SEED", default_value_t = 0)]
    seed: u64,
    /// Episode records output (JSON Lines)
    #[arg(long, default_value = "episodes.jsonl")]
    out: PathBuf,
    #[command(flatten)]
    env: EnvArgs,
}

#[derive(Debug, Args)]
struct QaoaArgs {
    /// Instance file, or dataset directory (uses --split)
    #[arg(long)]
    data: PathBuf,
    /// Split read from a dataset directory
    #[arg(long, default_value = "test")]
    split: Split,
    /// Grid points per angle over [0, 2pi)
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Shots for the final sampled quality
    #[arg(long, default_value_t = 10)]
    shots: usize,
    /// Quality that counts as a win (strict)
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Root seed
    #[arg(long, env = "QPRL_SEED", default_value_t = 0)]
    seed: u64,
    /// Episode records output (JSON Lines)
    #[arg(long, default_value = "qaoa.jsonl")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TranspileArgs {
    /// Text file with one gate per line
    #[arg(long, conflicts_with = "episodes", required_unless_present = "episodes")]
    program: Option<PathBuf>,
    /// Episode records (JSON Lines) whose programs are compiled
    #[arg(long)]
    episodes: Option<PathBuf>,
    /// Native program text (for --program) or JSON Lines (for --episodes)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Episode record files (JSON Lines), concatenated in the given order
    #[arg(long, required = true, num_args = 1..)]
    records: Vec<PathBuf>,
    /// Variables per instance, for decoding action ids
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Output directory
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<qprl::Error> for Failure {
    fn from(e: qprl::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<Value, Failure>;

fn usage(e: qprl::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Qaoa(a) => run_qaoa(a),
        Command::Transpile(a) => transpile(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn gen_data(a: GenDataArgs) -> CmdResult {
    let spec = DatasetSpec {
        kinds: a.kinds,
        n: a.n,
        counts: SplitCounts { train: a.train_n, val: a.val_n, test: a.test_n },
        root_seed: a.seed,
    };
    spec.validate().map_err(usage)?;
    let manifest = harness::gen_dataset(&spec, &a.out)?;
    Ok(json!({
        "command": "gen-data",
        "out": a.out,
        "kinds": spec.kinds,
        "n": spec.n,
        "seed": spec.root_seed,
        "files": manifest.files,
    }))
}

fn read_instances(data: &Path, split: Split) -> anyhow::Result<Vec<ProblemInstance>> {
    let path = harness::split_path(data, split);
    let instances = load_instances(&path).with_context(|| format!("reading {}", path.display()))?;
    if instances.is_empty() {
        bail!("{} holds no instances", path.display());
    }
    Ok(instances)
}

fn uniform_n(instances: &[ProblemInstance]) -> anyhow::Result<usize> {
    let n = instances[0].n();
    if instances.iter().any(|i| i.n() != n) {
        bail!("instances of different sizes cannot share one observation layout");
    }
    Ok(n)
}

fn env_config(n: usize, a: &EnvArgs, file: &mut ConfigFile) -> Result<EnvConfig, Failure> {
    let mut cfg = EnvConfig { n, ..EnvConfig::default() };
    file.take("shots", &mut cfg.shots)?;
    file.take("max_program_len", &mut cfg.max_program_len)?;
    file.take("win_threshold", &mut cfg.win_threshold)?;
    file.take("reward_mode", &mut cfg.reward_mode)?;
    override_with(&mut cfg.shots, a.shots);
    override_with(&mut cfg.max_program_len, a.max_len);
    override_with(&mut cfg.win_threshold, a.threshold);
    override_with(&mut cfg.reward_mode, a.reward_mode);
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn env_echo(cfg: &EnvConfig) -> Value {
    json!({
        "n": cfg.n,
        "shots": cfg.shots,
        "max_program_len": cfg.max_program_len,
        "win_threshold": cfg.win_threshold,
        "reward_mode": cfg.reward_mode.as_str(),
    })
}

fn override_with<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// `key = value` lines; `#` starts a comment. Keys are consumed as they are
/// applied so leftovers can be reported.
#[derive(Default)]
struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::Runtime)?;
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), Failure> {
        if let Some(v) = self.entries.remove(key) {
            *slot = v.parse().map_err(|_| Failure::Usage(format!("config key `{key}`: bad value `{v}`")))?;
        }
        Ok(())
    }

    fn finish(self) -> Result<(), Failure> {
        match self.entries.keys().next() {
            Some(k) => Err(Failure::Usage(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn train(a: TrainArgs) -> CmdResult {
    let mut file = match &a.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let train_set = read_instances(&a.data, Split::Train)?;
    let n = uniform_n(&train_set)?;
    let val_set = if a.data.is_dir() && a.data.join(Split::Val.file_name()).exists() {
        Some(read_instances(&a.data, Split::Val)?)
    } else {
        None
    };
    let env = env_config(n, &a.env, &mut file)?;

    let mut ppo = PpoConfig { total_steps: 100_000, ..PpoConfig::default() };
    let mut eval_every = 10usize;
    let mut max_grad_norm = ppo.max_grad_norm.unwrap_or(0.0);
    file.take("total_steps", &mut ppo.total_steps)?;
    file.take("n_steps", &mut ppo.n_steps)?;
    file.take("n_envs", &mut ppo.n_envs)?;
    file.take("lr_initial", &mut ppo.lr_initial)?;
    file.take("gae_lambda", &mut ppo.gae_lambda)?;
    file.take("discount", &mut ppo.discount)?;
    file.take("clip", &mut ppo.clip)?;
    file.take("adam_epsilon", &mut ppo.adam_epsilon)?;
    file.take("epochs_per_update", &mut ppo.epochs_per_update)?;
    file.take("minibatch_size", &mut ppo.minibatch_size)?;
    file.take("value_coef", &mut ppo.value_coef)?;
    file.take("entropy_coef", &mut ppo.entropy_coef)?;
    file.take("max_grad_norm", &mut max_grad_norm)?;
    file.take("normalize_advantages", &mut ppo.normalize_advantages)?;
    file.take("reward_signal", &mut ppo.reward_signal)?;
    file.take("eval_every", &mut eval_every)?;
    file.finish()?;
    ppo.max_grad_norm = (max_grad_norm > 0.0).then_some(max_grad_norm);
    override_with(&mut ppo.total_steps, a.steps);
    override_with(&mut ppo.n_steps, a.n_steps);
    override_with(&mut ppo.n_envs, a.n_envs);
    override_with(&mut ppo.lr_initial, a.lr);
    override_with(&mut ppo.gae_lambda, a.gae_lambda);
    override_with(&mut ppo.discount, a.discount);
    override_with(&mut ppo.reward_signal, a.reward_signal);
    override_with(&mut eval_every, a.eval_every);
    ppo.validate().map_err(usage)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let echo = json!({
        "command": "train",
        "data": a.data,
        "seed": a.seed,
        "out": a.out,
        "env": env_echo(&env),
        "ppo": {
            "total_steps": ppo.total_steps,
            "n_steps": ppo.n_steps,
            "n_envs": ppo.n_envs,
            "lr_initial": ppo.lr_initial,
            "gae_lambda": ppo.gae_lambda,
            "discount": ppo.discount,
            "clip": ppo.clip,
            "adam_epsilon": ppo.adam_epsilon,
            "epochs_per_update": ppo.epochs_per_update,
            "minibatch_size": ppo.minibatch_size,
            "value_coef": ppo.value_coef,
            "entropy_coef": ppo.entropy_coef,
            "max_grad_norm": ppo.max_grad_norm,
            "normalize_advantages": ppo.normalize_advantages,
            "reward_signal": ppo.reward_signal.as_str(),
            "eval_every": eval_every,
        },
    });
    fs::write(a.out.join("config.json"), format!("{}\n", serde_json::to_string_pretty(&echo).unwrap()))
        .context("writing config echo")?;

    let opts = TrainOptions { ppo, env, seed: a.seed, eval_every };
    let train_arc: Vec<Arc<ProblemInstance>> = train_set.into_iter().map(Arc::new).collect();
    let val_arc: Option<Vec<Arc<ProblemInstance>>> = val_set.map(|v| v.into_iter().map(Arc::new).collect());
    let out = a.out.clone();
    let result = ppo::train(&train_arc, val_arc.as_deref(), &opts, |event, params| match event {
        CheckpointEvent::Periodic { update } if eval_every > 0 => {
            params.save(&out.join(format!("update_{update:06}.ckpt")))
        }
        CheckpointEvent::Periodic { .. } => Ok(()),
        CheckpointEvent::BestValidation { .. } => params.save(&out.join("best.ckpt")),
    })?;
    result.params.save(&a.out.join("final.ckpt"))?;
    let curve_file = fs::File::create(a.out.join("curve.csv")).context("writing curve")?;
    ppo::write_curve(std::io::BufWriter::new(curve_file), &result.curve)?;

    let mut summary = echo;
    summary["updates"] = json!(result.updates);
    summary["curve_rows"] = json!(result.curve.len());
    summary["best_val_score"] = json!(result.best.as_ref().map(|b| b.1));
    Ok(summary)
}

fn mean_score(records: &[qprl::env::EpisodeRecord]) -> f64 {
    records.iter().map(|r| r.score).sum::<f64>() / records.len().max(1) as f64
}

fn eval(a: EvalArgs) -> CmdResult {
    let instances = read_instances(&a.data, a.split)?;
    let n = uniform_n(&instances)?;
    let env = env_config(n, &a.env, &mut ConfigFile::default())?;
    let agent = match &a.checkpoint {
        Some(p) => {
            EvalAgent::Trained(PolicyParams::load(p).with_context(|| format!("loading checkpoint {}", p.display()))?)
        }
        None => EvalAgent::Untrained,
    };
    let (_, records) = harness::run_eval(std::slice::from_ref(&agent), &instances, &env, a.seed)?;
    harness::save_episodes(&a.out, &records).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(json!({
        "command": "eval",
        "agent": agent.label(),
        "checkpoint": a.checkpoint,
        "data": a.data,
        "split": a.split.as_str(),
        "seed": a.seed,
        "env": env_echo(&env),
        "out": a.out,
        "episodes": records.len(),
        "mean_score": mean_score(&records),
    }))
}

fn run_qaoa(a: QaoaArgs) -> CmdResult {
    let cfg = QaoaConfig { bins: a.bins, shots: a.shots };
    cfg.validate().map_err(usage)?;
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(Failure::Usage(format!("threshold {} not in (0, 1)", a.threshold)));
    }
    let instances = read_instances(&a.data, a.split)?;
    let records = qaoa::run_dataset(&instances, &cfg, a.threshold, a.seed)?;
    harness::save_episodes(&a.out, &records).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(json!({
        "command": "qaoa",
        "data": a.data,
        "split": a.split.as_str(),
        "bins": cfg.bins,
        "shots": cfg.shots,
        "threshold": a.threshold,
        "seed": a.seed,
        "out": a.out,
        "episodes": records.len(),
        "mean_score": mean_score(&records),
    }))
}

fn parse_program(text: &str) -> anyhow::Result<Vec<GateOp>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<GateOp>().map_err(|e| anyhow!(e)))
        .collect()
}

fn transpile(a: TranspileArgs) -> CmdResult {
    if let Some(path) = &a.program {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let program = parse_program(&text)?;
        let native = transpiler::transpile(&program)?;
        let mut body = native.render().join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        fs::write(&a.out, body).with_context(|| format!("writing {}", a.out.display()))?;
        return Ok(json!({
            "command": "transpile",
            "program": path,
            "out": a.out,
            "uncompiled_len": program.len(),
            "compiled_len": native.len(),
        }));
    }
    let path = a.episodes.as_ref().expect("clap enforces one input");
    let records = harness::load_episodes(path)?;
    let mut out =
        std::io::BufWriter::new(fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?);
    let (mut total_in, mut total_out) = (0usize, 0usize);
    for (i, rec) in records.iter().enumerate() {
        let program = parse_program(&rec.program_text.join("\n"))?;
        let native = transpiler::transpile(&program)?;
        total_in += program.len();
        total_out += native.len();
        let line = json!({
            "index": i,
            "instance_seed": rec.instance_seed,
            "kind": rec.kind,
            "agent": rec.agent,
            "uncompiled_len": program.len(),
            "compiled_len": native.len(),
            "native": native.render(),
        });
        writeln!(out, "{line}").context("writing transpiled episodes")?;
    }
    out.flush().context("writing transpiled episodes")?;
    Ok(json!({
        "command": "transpile",
        "episodes": path,
        "out": a.out,
        "programs": records.len(),
        "uncompiled_total": total_in,
        "compiled_total": total_out,
    }))
}

fn report(a: ReportArgs) -> CmdResult {
    let mut records = Vec::new();
    for path in &a.records {
        records.extend(harness::load_episodes(path).with_context(|| format!("reading {}", path.display()))?);
    }
    let manifest = harness::emit_report(&records, a.n, &a.out)?;
    Ok(json!({
        "command": "report",
        "records": a.records,
        "n": a.n,
        "out": a.out,
        "files": manifest.files,
    }))
}
