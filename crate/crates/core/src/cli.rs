//! `invrisk` command line.
//!
//! Every subcommand takes `--config <file.json>` plus flags mirroring the
//! config fields. A key set in the config file wins over the same flag.
//! Failures print one JSON object on stderr and exit 2 (config), 3
//! (numeric) or 4 (I/O).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::harness::config::{merge_missing, ExperimentConfig};
use crate::harness::data::{self, SyntheticKind};
use crate::harness::pipeline;
use crate::harness::report::{self, RunRecord};
use crate::io;
use crate::linalg::Tensor;

#[derive(Debug, Parser)]
#[command(name = "invrisk", version, about = "Spectral data-reconstruction risk for shared gradients and embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// InvRE per instance.
    Score(RunArgs),
    /// InvRE plus the tiered matching attack and correlation.
    Attack(RunArgs),
    /// Score and attack under the configured defense.
    Defend(RunArgs),
    /// Defense-strength sweep; writes a CSV table next to the record.
    Sweep(RunArgs),
    /// Pearson correlations of an attacked run record.
    Correlate(CorrelateArgs),
    /// Singular values and cumulative mass of each instance's Jacobian.
    Spectrum(RunArgs),
    /// Writes a synthetic dataset as IVT1 tensors.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Experiment config JSON; its keys take precedence over flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_instances: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Calibration JSON or earlier run record.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// sigmoid | inverse_bound
    #[arg(long)]
    pub scoring: Option<String>,
    /// Network JSON file.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// hfl_gradient | vfl_embedding
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub cut: Option<usize>,
    /// squared_error | cross_entropy
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub train_epochs: Option<usize>,
    /// synthetic_gaussian | synthetic_grid | tensor_file
    #[arg(long)]
    pub dataset: Option<String>,
    /// Instance dimension for synthetic data.
    #[arg(long)]
    pub m: Option<usize>,
    /// IVT1 data tensor for tensor_file datasets.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// dnp | gnp | enp | prune | dropout | invl_dnp | invl_gnp | invl_enp
    #[arg(long)]
    pub defense: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub defense_seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub tv_weight: Option<f64>,
    /// l2 | cosine
    #[arg(long)]
    pub distance: Option<String>,
    #[arg(long)]
    pub attack_seed: Option<u64>,
    /// Comma-separated defense strengths.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Run record from `attack`, `defend` or `sweep`.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// gaussian | grid
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Data tensor path; labels go to `<stem>.labels.ivt` unless given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

fn put(obj: &mut Map<String, Value>, path: &[&str], v: Value) {
    let (last, parents) = path.split_last().expect("nonempty key path");
    let mut cur = obj;
    for key in parents {
        cur = cur
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("object");
    }
    cur.insert(last.to_string(), v);
}

fn path_value(p: &Path) -> Value {
    Value::String(absolute(p).to_string_lossy().into_owned())
}

/// JSON fragment holding only the flags that were given.
pub fn flags_to_json(a: &RunArgs) -> Value {
    let mut o = Map::new();
    if let Some(v) = a.seed {
        put(&mut o, &["seed"], json!(v));
    }
    if let Some(v) = a.n_instances {
        put(&mut o, &["n_instances"], json!(v));
    }
    if let Some(v) = &a.output_dir {
        put(&mut o, &["output_dir"], path_value(v));
    }
    if let Some(v) = &a.calibration {
        put(&mut o, &["calibration"], path_value(v));
    }
    if let Some(v) = a.beta {
        put(&mut o, &["beta"], json!(v));
    }
    if let Some(v) = &a.scoring {
        put(&mut o, &["scoring"], json!(v));
    }
    if let Some(v) = &a.network {
        put(&mut o, &["map", "network", "file"], path_value(v));
    }
    if let Some(v) = &a.mode {
        put(&mut o, &["map", "mode"], json!(v));
    }
    if let Some(v) = a.cut {
        put(&mut o, &["map", "cut"], json!(v));
    }
    if let Some(v) = &a.loss {
        put(&mut o, &["map", "loss"], json!(v));
    }
    if let Some(v) = a.train_epochs {
        put(&mut o, &["map", "train_epochs"], json!(v));
    }
    if let Some(v) = &a.dataset {
        put(&mut o, &["dataset", "kind"], json!(v));
    }
    if let Some(v) = a.m {
        put(&mut o, &["dataset", "m"], json!(v));
    }
    if let Some(v) = &a.data {
        put(&mut o, &["dataset", "path"], path_value(v));
    }
    if let Some(v) = &a.labels {
        put(&mut o, &["dataset", "labels"], path_value(v));
    }
    if let Some(v) = &a.defense {
        put(&mut o, &["defense", "kind"], json!(v));
    }
    if let Some(v) = a.delta {
        put(&mut o, &["defense", "delta"], json!(v));
    }
    if let Some(v) = a.lambda {
        put(&mut o, &["defense", "lambda"], json!(v));
    }
    if let Some(v) = a.defense_seed {
        put(&mut o, &["defense", "seed"], json!(v));
    }
    if let Some(v) = a.iters {
        put(&mut o, &["attack", "iters"], json!(v));
    }
    if let Some(v) = a.tv_weight {
        put(&mut o, &["attack", "tv_weight"], json!(v));
    }
    if let Some(v) = &a.distance {
        put(&mut o, &["attack", "distance"], json!(v));
    }
    if let Some(v) = a.attack_seed {
        put(&mut o, &["attack", "seed"], json!(v));
    }
    if let Some(v) = &a.grid {
        put(&mut o, &["grid"], json!(v));
    }
    Value::Object(o)
}

fn read_config_value(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Config file merged over flags; relative paths in the file resolve
/// against its directory.
pub fn build_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let flags = flags_to_json(a);
    let (mut value, base) = match &a.config {
        Some(p) => (read_config_value(p)?, absolute(p).parent().map(Path::to_path_buf)),
        None => (Value::Object(Map::new()), None),
    };
    merge_missing(&mut value, &flags);
    let mut cfg = ExperimentConfig::from_json(&value.to_string())?;
    if let Some(base) = base {
        cfg.resolve_paths(&base);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// What a command produced: the document for stdout and files to write.
struct Output {
    document: Value,
    files: Vec<(PathBuf, String)>,
}

fn record_output(record: &RunRecord, cfg: &ExperimentConfig) -> Result<Output> {
    let json = record.to_json()?;
    let mut files = Vec::new();
    let document = match &cfg.output_dir {
        Some(dir) => {
            let path = dir.join(format!("{}.json", record.command));
            files.push((path.clone(), json));
            let mut doc = json!({"record": path});
            if let Some(csv) = record.sweep_csv() {
                let csv_path = dir.join("sweep.csv");
                files.push((csv_path.clone(), csv));
                doc["csv"] = json!(csv_path);
            }
            doc
        }
        None => serde_json::from_str(&json)?,
    };
    Ok(Output { document, files })
}

fn gen_data(a: &GenDataArgs) -> Result<Output> {
    let mut flags = Map::new();
    if let Some(k) = &a.kind {
        let name = match k.as_str() {
            "grid" | "synthetic_grid" => "synthetic_grid",
            "gaussian" | "synthetic_gaussian" => "synthetic_gaussian",
            other => return Err(Error::Config(format!("unknown synthetic kind {other:?}"))),
        };
        put(&mut flags, &["dataset", "kind"], json!(name));
    }
    if let Some(m) = a.m {
        put(&mut flags, &["dataset", "m"], json!(m));
    }
    if let Some(n) = a.n {
        put(&mut flags, &["n_instances"], json!(n));
    }
    if let Some(s) = a.seed {
        put(&mut flags, &["seed"], json!(s));
    }
    let mut value = match &a.config {
        Some(p) => read_config_value(p)?,
        None => Value::Object(Map::new()),
    };
    merge_missing(&mut value, &Value::Object(flags));
    let dataset = value.get("dataset").ok_or_else(|| Error::Config("gen-data needs a dataset kind".into()))?;
    let kind = match dataset.get("kind").and_then(Value::as_str) {
        Some("synthetic_grid") => SyntheticKind::Grid,
        Some("synthetic_gaussian") => SyntheticKind::Gaussian,
        other => return Err(Error::Config(format!("gen-data needs a synthetic dataset kind, got {other:?}"))),
    };
    let m = dataset
        .get("m")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Config("gen-data needs m".into()))? as usize;
    let texture = match dataset.get("texture") {
        Some(t) => serde_json::from_value(t.clone()).map_err(|e| Error::Config(format!("texture: {e}")))?,
        None => data::TextureRange::default(),
    };
    let n = value.get("n_instances").and_then(Value::as_u64).unwrap_or(1) as usize;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let seed = value.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let out = match (&a.out, value.get("output_dir").and_then(Value::as_str)) {
        (Some(p), _) => absolute(p),
        (None, Some(dir)) => Path::new(dir).join("data.ivt"),
        (None, None) => return Err(Error::Config("gen-data needs --out or output_dir".into())),
    };
    let labels_out = a.labels_out.as_deref().map(absolute).unwrap_or_else(|| out.with_extension("labels.ivt"));
    let instances = data::generate_with_texture(kind, n, m, seed, texture)?;
    let rows: Vec<Vec<f64>> = instances.iter().map(|i| i.x.clone()).collect();
    let labels: Vec<f64> = instances.iter().map(|i| i.label as f64).collect();
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    io::write_tensor(&out, &Tensor::from_rows(&rows)?)?;
    io::write_tensor(&labels_out, &Tensor::new(vec![n], labels)?)?;
    Ok(Output { document: json!({"data": out, "labels": labels_out, "n": n, "m": m}), files: Vec::new() })
}

fn execute(cmd: &Command) -> Result<Output> {
    match cmd {
        Command::Score(a) => {
            let cfg = build_config(a)?;
            record_output(&pipeline::run_score(&cfg)?, &cfg)
        }
        Command::Attack(a) => {
            let cfg = build_config(a)?;
            record_output(&pipeline::run_attack_eval(&cfg)?, &cfg)
        }
        Command::Defend(a) => {
            let cfg = build_config(a)?;
            record_output(&pipeline::run_defense(&cfg)?, &cfg)
        }
        Command::Sweep(a) => {
            let cfg = build_config(a)?;
            record_output(&pipeline::run_defense_sweep(&cfg)?, &cfg)
        }
        Command::Spectrum(a) => {
            let cfg = build_config(a)?;
            let spectra = pipeline::run_spectrum(&cfg)?;
            let document = json!({"schema": report::SCHEMA_VERSION, "instances": spectra});
            let files = match &cfg.output_dir {
                Some(dir) => vec![(dir.join("spectrum.json"), serde_json::to_string_pretty(&document)?)],
                None => Vec::new(),
            };
            Ok(Output { document, files })
        }
        Command::Correlate(c) => {
            let record = match (&c.record, &c.run.config) {
                (Some(p), _) => RunRecord::from_json(&fs::read_to_string(p)?)?,
                (None, Some(_)) => pipeline::run_attack_eval(&build_config(&c.run)?)?,
                (None, None) => return Err(Error::Config("correlate needs --record or --config".into())),
            };
            let set = report::correlate(&record.instances)?;
            Ok(Output { document: serde_json::to_value(set)?, files: Vec::new() })
        }
        Command::GenData(a) => gen_data(a),
    }
}

/// Machine-readable error line.
pub fn error_json(e: &Error) -> String {
    json!({"error": e.code(), "exit_code": e.exit_code(), "message": e.to_string()}).to_string()
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = Error::Config(e.to_string().lines().next().unwrap_or("invalid arguments").to_string());
            let _ = writeln!(stderr, "{}", error_json(&err));
            return err.exit_code();
        }
    };
    let result = execute(&cli.command).and_then(|out| {
        for (path, contents) in &out.files {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, contents)?;
        }
        writeln!(stdout, "{}", serde_json::to_string_pretty(&out.document)?)?;
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(&e));
            e.exit_code()
        }
    }
}
