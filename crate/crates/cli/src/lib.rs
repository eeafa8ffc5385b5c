//! Command-line driver for `tfdm`: train, evaluate, verify and op-count
//! time-frequency domain mixture networks.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input or config error,
//! 3 numerical divergence. Standard output carries `key=value` lines only.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tfdm::data::{data_root, DatasetKind};
use tfdm::models::{
    load_checkpoint, preset, preset_names, presets, save_checkpoint, build_network, Network, NetworkConfig,
};
use tfdm::opcount::{compare_report, count_ops};
use tfdm::training::{evaluate, train, MetricsWriter, Optimizer, OptimizerConfig, TrainConfig};
use tfdm::verify::{run_suite, Level, VerifyOptions};
use tfdm::Error;

const EXIT_VERIFY: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

const EXIT_CODES: &str = "Exit codes: 0 success, 1 verification failure, 2 input/config error, 3 numerical divergence.";

#[derive(Parser, Debug)]
#[command(name = "tfdm", version, about = "Time-frequency domain mixture networks", after_help = EXIT_CODES)]
struct Cli {
    /// Worker threads for the compute pool (default: logical cores).
    /// Affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network and write metrics, checkpoints and a manifest.
    #[command(after_help = EXIT_CODES)]
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    #[command(after_help = EXIT_CODES)]
    Eval(EvalArgs),
    /// Run the self-contained oracle checks.
    #[command(after_help = EXIT_CODES)]
    Verify(VerifyArgs),
    /// Report analytic operation counts, optionally against a second network.
    #[command(name = "count-ops", after_help = EXIT_CODES)]
    CountOps(CountOpsArgs),
    /// List the built-in network presets.
    #[command(after_help = EXIT_CODES)]
    Presets(PresetsArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct NetworkSource {
    /// Network config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset name (see `tfdm presets`).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Rmsprop,
    Sgd,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    network: NetworkSource,
    /// Dataset directory (MNIST IDX files or CIFAR-10 binary batches, or a
    /// parent holding `mnist/` / `cifar10/`). Falls back to $TFDM_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base learning rate [default: 1e-4 for rmsprop, 0.01 for sgd].
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Rmsprop)]
    optimizer: OptimizerArg,
    /// SGD momentum.
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    /// Piecewise-constant schedule as `epoch:lr` pairs, e.g. `60:0.001,90:0.0001`.
    #[arg(long, value_delimiter = ',', value_parser = parse_boundary)]
    lr_schedule: Vec<(usize, f64)>,
    /// Evaluate on the test split every N epochs (and after the last).
    #[arg(long, default_value_t = 1)]
    eval_every: usize,
    /// Use only the first N training samples.
    #[arg(long)]
    train_subset: Option<usize>,
    /// Use only the first N test samples.
    #[arg(long)]
    test_subset: Option<usize>,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Fill the seconds column of metrics.csv (makes the file run-dependent).
    #[arg(long)]
    record_time: bool,
    /// Output directory [default: runs/<UTC timestamp>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory; falls back to $TFDM_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    batch_size: usize,
    /// Evaluate only the first N test samples.
    #[arg(long)]
    test_subset: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
    level: LevelArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Negative control: drop the conjugation in the cross-correlation
    /// identity; the `xcorr_theorem` check must then fail.
    #[arg(long)]
    drop_conjugation: bool,
}

#[derive(Args, Debug)]
struct CountOpsArgs {
    #[command(flatten)]
    network: NetworkSource,
    /// Second network (preset name or TOML path) for a side-by-side report.
    #[arg(long)]
    compare: Option<String>,
    /// Write the human-readable table here instead of standard error.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the per-layer CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PresetsArgs {
    /// Print this preset's TOML config instead of the list.
    #[arg(long)]
    show: Option<String>,
}

fn parse_boundary(s: &str) -> Result<(usize, f64), String> {
    let (e, lr) = s.split_once(':').ok_or_else(|| format!("expected epoch:lr, got `{s}`"))?;
    Ok((
        e.trim().parse().map_err(|_| format!("bad epoch in `{s}`"))?,
        lr.trim().parse().map_err(|_| format!("bad learning rate in `{s}`"))?,
    ))
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } | Error::NonFiniteGradient(_) => EXIT_DIVERGED,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

/// Parse `args` (including the program name) and run the subcommand,
/// returning the process exit code. Usage errors print clap's message and
/// return 2.
pub fn run<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    let threads = cli.threads;
    let dispatch = move || match cli.command {
        Command::Train(a) => cmd_train(a, threads),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => cmd_verify(a),
        Command::CountOps(a) => cmd_count_ops(a),
        Command::Presets(a) => cmd_presets(a),
    };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(dispatch),
            Err(e) => Err(Failure::input(format!("thread pool: {e}"))),
        },
        None => dispatch(),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn unknown_preset(name: &str) -> Failure {
    Failure::input(format!(
        "unknown preset `{name}`; available presets: {}",
        preset_names().join(", ")
    ))
}

fn resolve_network(src: &NetworkSource) -> Result<NetworkConfig, Failure> {
    let cfg = match (&src.preset, &src.config) {
        (Some(name), _) => preset(name).ok_or_else(|| unknown_preset(name))?,
        (None, Some(path)) => NetworkConfig::load(path)?,
        (None, None) => return Err(Failure::input("one of --preset or --config is required")),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// A preset name, or else a path to a TOML config.
fn resolve_named(spec: &str) -> Result<NetworkConfig, Failure> {
    let cfg = match preset(spec) {
        Some(cfg) => cfg,
        None if Path::new(spec).is_file() => NetworkConfig::load(Path::new(spec))?,
        None => return Err(unknown_preset(spec)),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn require_data_root(explicit: Option<&Path>) -> Result<PathBuf, Failure> {
    data_root(explicit).ok_or_else(|| Failure::input("no data directory: pass --data-dir or set TFDM_DATA_DIR"))
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs").join(chrono::Utc::now().format("%Y%m%d-%H%M%S").to_string())
}

fn cmd_train(a: TrainArgs, threads: Option<usize>) -> CmdResult {
    let cfg = resolve_network(&a.network)?;
    let kind = DatasetKind::for_input(cfg.input)?;
    let root = require_data_root(a.data_dir.as_deref())?;
    let (mut train_ds, mut test_ds) = kind.load(&root)?;
    if let Some(n) = a.train_subset {
        train_ds = train_ds.head(n);
    }
    if let Some(n) = a.test_subset {
        test_ds = test_ds.head(n);
    }

    let optimizer = match a.optimizer {
        OptimizerArg::Rmsprop => OptimizerConfig::rmsprop(a.lr.unwrap_or(1e-4)),
        OptimizerArg::Sgd => OptimizerConfig::sgd(a.lr.unwrap_or(0.01), a.momentum),
    };
    let optimizer = OptimizerConfig {
        weight_decay: a.weight_decay,
        ..optimizer
    };
    let mut tc = TrainConfig::new(a.epochs, a.batch_size, a.seed, optimizer.clone());
    tc.lr_boundaries = a.lr_schedule.clone();
    tc.eval_every = a.eval_every;
    tc.max_steps = a.max_steps;
    tc.validate()?;

    let out = a.out.clone().unwrap_or_else(default_out_dir);
    std::fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
    let config_text = cfg.to_toml_string();
    write_file(&out.join("config.toml"), &config_text)?;
    let manifest = json!({
        "tool": "tfdm",
        "version": env!("CARGO_PKG_VERSION"),
        "arch": std::env::consts::ARCH,
        "os": std::env::consts::OS,
        "network": cfg.name,
        "config_digest": cfg.digest().iter().map(|b| format!("{b:02x}")).collect::<String>(),
        "seed": a.seed,
        "dataset": kind.name(),
        "data_dir": root,
        "train_samples": train_ds.len(),
        "test_samples": test_ds.len(),
        "train": tc,
        "threads": threads,
        "record_time": a.record_time,
    });
    write_file(
        &out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;

    let mut net: Network<f32> = build_network(&cfg, a.seed)?;
    let mut opt = Optimizer::new(optimizer);
    let mut metrics = MetricsWriter::create(&out.join("metrics.csv"))?;
    let best_path = out.join("checkpoint-best.tfdm");
    let last_path = out.join("checkpoint-last.tfdm");
    let mut best = f64::INFINITY;
    let record_time = a.record_time;
    let mut on_epoch = |rec: &tfdm::training::EpochRecord, net: &mut Network<f32>, opt: &Optimizer<f32>| {
        for row in rec.rows(record_time) {
            metrics.write(&row)?;
        }
        let state = opt.state_tensors();
        save_checkpoint(&last_path, net, &state)?;
        if let Some(t) = &rec.test {
            if t.error < best {
                best = t.error;
                save_checkpoint(&best_path, net, &state)?;
            }
        }
        eprintln!(
            "epoch {} step {} train_loss {:.5} train_error {:.4}{}",
            rec.epoch,
            rec.step,
            rec.train_loss,
            rec.train_error,
            rec.test
                .as_ref()
                .map(|t| format!(" test_loss {:.5} test_error {:.4}", t.loss, t.error))
                .unwrap_or_default()
        );
        Ok::<(), Error>(())
    };
    let report = train(&mut net, &mut opt, &train_ds, Some(&test_ds), &tc, &mut on_epoch)?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "out={}", out.display());
    let _ = writeln!(stdout, "network={}", cfg.name);
    let _ = writeln!(stdout, "epochs={}", report.history.len());
    let _ = writeln!(stdout, "steps={}", report.steps);
    if let Some(last) = report.history.last() {
        let _ = writeln!(stdout, "train_loss={:.8}", last.train_loss);
        if let Some(t) = &last.test {
            let _ = writeln!(stdout, "test_error={:.6}", t.error);
        }
    }
    if best.is_finite() {
        let _ = writeln!(stdout, "best_test_error={best:.6}");
    }
    let _ = writeln!(stdout, "max_fixation_leakage={:.3e}", report.max_fixation_leakage);
    if let Some(d) = &report.diverged {
        let _ = writeln!(stdout, "diverged=true");
        let _ = writeln!(stdout, "diverged_epoch={}", d.epoch);
        let _ = writeln!(stdout, "diverged_step={}", d.step);
        eprintln!("error: {}", d.reason);
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let (mut net, _) = load_checkpoint::<f32>(&a.checkpoint)?;
    let cfg = net.config().clone();
    let kind = DatasetKind::for_input(cfg.input)?;
    let root = require_data_root(a.data_dir.as_deref())?;
    let (_, mut test_ds) = kind.load(&root)?;
    if let Some(n) = a.test_subset {
        test_ds = test_ds.head(n);
    }
    let r = evaluate(&mut net, &test_ds, a.batch_size)?;
    println!("network={}", cfg.name);
    println!("samples={}", r.samples);
    println!("test_loss={:.8}", r.loss);
    println!("test_error={:.6}", r.error);
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let level = match a.level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let opts = VerifyOptions {
        level,
        seed: a.seed,
        drop_conjugation: a.drop_conjugation,
    };
    let results = run_suite(&opts);
    for r in &results {
        println!("{r} seconds={:.2}", r.seconds);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("checks={}", results.len());
    println!("failed={failed}");
    Ok(if failed == 0 { 0 } else { EXIT_VERIFY })
}

fn cmd_count_ops(a: CountOpsArgs) -> CmdResult {
    let cfg = resolve_network(&a.network)?;
    let rep = count_ops(&cfg)?;
    let (table, csv) = match &a.compare {
        Some(other) => {
            let other = resolve_named(other)?;
            let cmp = compare_report(&cfg, &other)?;
            println!("network={}", cmp.a.network);
            println!("compare={}", cmp.b.network);
            println!("total={}", cmp.a.total());
            println!("compare_total={}", cmp.b.total());
            println!("ratio={:.6}", cmp.ratio());
            println!("smaller={}", cmp.a.total() < cmp.b.total());
            (
                format!("{}\n{}\n{}", cmp.a.to_text(), cmp.b.to_text(), cmp.to_text()),
                cmp.to_csv(),
            )
        }
        None => {
            println!("network={}", rep.network);
            println!("total={}", rep.total());
            (rep.to_text(), rep.to_csv())
        }
    };
    println!("mult_ops={}", rep.total_mult());
    println!("dft_ops={}", rep.total_dft());
    println!("add_ops={}", rep.total_adds());
    println!("fixation_ops_per_step={}", rep.fixation_total());
    println!("c_fft={}", rep.fft.total());
    match &a.report {
        Some(p) => write_file(p, &table)?,
        None => eprint!("{table}"),
    }
    if let Some(p) = &a.csv {
        write_file(p, &csv)?;
    }
    Ok(0)
}

fn cmd_presets(a: PresetsArgs) -> CmdResult {
    if let Some(name) = &a.show {
        let cfg = preset(name).ok_or_else(|| unknown_preset(name))?;
        print!("{}", cfg.to_toml_string());
        return Ok(0);
    }
    for cfg in presets() {
        let [h, w, c] = cfg.input;
        println!(
            "preset={} input={h}x{w}x{c} classes={} layers={} assumed={}",
            cfg.name,
            cfg.classes,
            cfg.layers.len(),
            cfg.assumed
        );
    }
    Ok(0)
}
