//! The `slvq` command line: fit, compress, decompress, budget, solve, eval
//! and tables.
//!
//! Every option can also come from `--config <file.json>`, a flat object
//! keyed by option name in snake_case; flags win over the file. The seed
//! falls back to `SLVQ_SEED`, then 0.
//!
//! Exit codes: 0 success, 1 usage, 2 data or file error, 3 numeric failure.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::archive::{read_archive, read_model, write_model, CompressedArchive, ModelMeta};
use crate::baselines::{topk_compress, PcaCodec, ScalarQuantCodec, VqNoAeCodec, DEFAULT_EPSILON};
use crate::budget::{
    compressed_size_table, label_size_table, llm_report, pca_bytes, quant_bytes, raw_label_bytes, solve_hyperparams,
    topk_bytes, vq_bytes, BudgetSpec, StorageReport, GIB,
};
use crate::codec::{fit, GradientMode, TopkVqCodec, TrainConfig};
use crate::error::Error;
use crate::kd::{write_retention_csv, Augment, Pipeline, PipelineConfig, StudentConfig, TaskConfig};
use crate::labels::{read_csv, read_slab, write_slab, SoftLabelMatrix};
use crate::lossy::{IdentityCodec, TopkCodec, VqaeCodec};

pub const SEED_ENV: &str = "SLVQ_SEED";

#[derive(Parser, Debug)]
#[command(name = "slvq", version, about = "Compress cached soft labels and account for their storage")]
struct Cli {
    /// Random seed (falls back to SLVQ_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit JSON instead of aligned text.
    #[arg(long, global = true)]
    json: bool,
    /// JSON file supplying option values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an autoencoder codec on a label file and save it.
    Fit(FitArgs),
    /// Encode a label file into an archive.
    Compress(CompressArgs),
    /// Decode an archive back into labels.
    Decompress(DecompressArgs),
    /// Storage report for one method.
    Budget(BudgetArgs),
    /// Search codec shapes for a target ratio.
    Solve(SolveArgs),
    /// Raw versus reconstructed-label students on a synthetic task.
    Eval(EvalArgs),
    /// Label-size and compressed-size tables at ImageNet scale.
    Tables(TablesArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainArgs {
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    code_dim: Option<usize>,
    #[arg(long)]
    num_codes: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// straight_through or literal_stop_gradient.
    #[arg(long)]
    mode: Option<String>,
}

impl TrainArgs {
    fn config(&self, classes: usize, seed: u64) -> Result<TrainConfig, Error> {
        let latent = self.latent_dim.unwrap_or(classes);
        let code_dim = self.code_dim.unwrap_or(latent.min(4));
        let mut config = TrainConfig::new(latent, code_dim, self.num_codes.unwrap_or(256));
        config.seed = seed;
        if let Some(v) = self.steps {
            config.max_steps = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.lr {
            config.lr = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(mode) = &self.mode {
            config.gradient_mode = parse_mode(mode)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse_mode(mode: &str) -> Result<GradientMode, Error> {
    match mode {
        "straight_through" | "straight-through" => Ok(GradientMode::StraightThrough),
        "literal_stop_gradient" | "literal" => Ok(GradientMode::LiteralStopGradient),
        other => Err(Error::param(format!("unknown gradient mode {other:?}"))),
    }
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitArgs {
    /// Label file (.slab or .csv).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompressArgs {
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// vqae, topk, quant, pca, vq_no_ae or topk_vq.
    #[arg(long)]
    codec: Option<String>,
    /// Model file, required by the vqae codec.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    k_top: Option<usize>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    components: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecompressArgs {
    #[arg(long)]
    archive: Option<PathBuf>,
    /// Output label file; `.csv` writes text, anything else SLAB.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecArgs {
    #[arg(long)]
    ipc: Option<u64>,
    #[arg(long)]
    classes: Option<u64>,
    #[arg(long)]
    epochs: Option<u64>,
    /// Augmented views per epoch.
    #[arg(long)]
    aug: Option<u64>,
}

impl SpecArgs {
    fn spec(&self) -> Result<BudgetSpec, Error> {
        let need = |v: Option<u64>, name: &str| v.ok_or_else(|| Error::param(format!("--{name} is required")));
        let mut spec = BudgetSpec::new(need(self.ipc, "ipc")?, need(self.classes, "classes")?, need(self.epochs, "epochs")?);
        spec.aug_per_epoch = self.aug.unwrap_or(1);
        Ok(spec)
    }
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetArgs {
    #[command(flatten)]
    #[serde(flatten)]
    spec: SpecArgs,
    /// raw, vqae, topk, quant or pca. Defaults to vqae when a latent size
    /// is given, raw otherwise.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    latent_dim: Option<u64>,
    #[arg(long)]
    code_dim: Option<u64>,
    #[arg(long)]
    num_codes: Option<u64>,
    #[arg(long)]
    k_top: Option<u64>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    components: Option<u64>,
    /// Token count for the llm method.
    #[arg(long)]
    tokens: Option<u64>,
    #[arg(long)]
    vocab: Option<u64>,
    /// Archive size in GB (1024^3 bytes) for the llm method.
    #[arg(long)]
    archive_gb: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    student_hidden: Option<usize>,
    #[arg(long)]
    teacher_hidden: Option<usize>,
    /// Samples per class for the teacher; defaults to the student split.
    #[arg(long)]
    teacher_per_class: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// identity, vqae or topk; repeatable through the config file as a list.
    #[arg(long)]
    codec: Option<String>,
    #[arg(long)]
    k_top: Option<usize>,
    /// Write `(ratio, retention)` rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TablesArgs {
    #[arg(long)]
    classes: Option<u64>,
    #[arg(long)]
    epochs: Option<u64>,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        e if e.is_numeric() => 3,
        Error::InvalidParameter(_) => 1,
        _ => 2,
    }
}

struct Context {
    seed: u64,
    json: bool,
    config: Option<Map<String, Value>>,
}

impl Context {
    /// Fills options left unset on the command line from the config file.
    fn merge<T: Serialize + DeserializeOwned>(&self, args: T) -> Result<T, Error> {
        let Some(file) = &self.config else {
            return Ok(args);
        };
        let mut merged = match serde_json::to_value(&args).map_err(json_err)? {
            Value::Object(m) => m,
            _ => unreachable!("argument structs serialize to objects"),
        };
        for (key, value) in file {
            let slot = merged.entry(key.clone()).or_insert(Value::Null);
            if slot.is_null() {
                *slot = value.clone();
            }
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| Error::format(format!("config file: {e}")))
    }

    fn emit(&self, out: &mut dyn Write, value: &Value, text: &str) -> Result<(), Error> {
        if self.json {
            writeln!(out, "{}", serde_json::to_string_pretty(value).map_err(json_err)?)?;
        } else {
            write!(out, "{text}")?;
        }
        Ok(())
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::format(e.to_string())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(path) => match serde_json::from_slice::<Value>(&fs::read(path)?) {
            Ok(Value::Object(m)) => Some(m),
            Ok(_) => return Err(Error::format("config file must hold a JSON object")),
            Err(e) => return Err(Error::format(format!("config file: {e}"))),
        },
        None => None,
    };
    let file_seed = match config.as_mut().and_then(|m| m.remove("seed")) {
        Some(v) => Some(v.as_u64().ok_or_else(|| Error::format("config seed must be an unsigned integer"))?),
        None => None,
    };
    let file_json = config.as_mut().and_then(|m| m.remove("json")).and_then(|v| v.as_bool());
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::param(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
        ),
        Err(_) => None,
    };
    let ctx = Context {
        seed: cli.seed.or(file_seed).or(env_seed).unwrap_or(0),
        json: cli.json || file_json.unwrap_or(false),
        config,
    };
    match cli.command {
        Command::Fit(a) => cmd_fit(&ctx, ctx.merge(a)?, out),
        Command::Compress(a) => cmd_compress(&ctx, ctx.merge(a)?, out),
        Command::Decompress(a) => cmd_decompress(&ctx, ctx.merge(a)?, out),
        Command::Budget(a) => cmd_budget(&ctx, ctx.merge(a)?, out),
        Command::Solve(a) => cmd_solve(&ctx, ctx.merge(a)?, out),
        Command::Eval(a) => cmd_eval(&ctx, ctx.merge(a)?, out),
        Command::Tables(a) => cmd_tables(&ctx, ctx.merge(a)?, out),
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, Error> {
    value.as_ref().ok_or_else(|| Error::param(format!("--{flag} is required")))
}

fn load_labels(path: &Path) -> Result<SoftLabelMatrix, Error> {
    let reader = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(reader)
    } else {
        read_slab(reader)
    }
}

fn cmd_fit(ctx: &Context, a: FitArgs, out: &mut dyn Write) -> Result<(), Error> {
    let labels = load_labels(required(&a.labels, "labels")?)?;
    let dest = required(&a.out, "out")?;
    let config = a.train.config(labels.c(), ctx.seed)?;
    let (model, trace) = fit(&labels, &config)?;
    let meta = ModelMeta {
        gradient_mode: config.gradient_mode,
        epsilon: config.epsilon,
    };
    write_model(&model, &meta, BufWriter::new(File::create(dest)?))?;
    let last = |v: &[f64]| v.last().copied();
    let window = 50.min(trace.len().max(1));
    let smoothed = trace.smoothed_reconstruction(window);
    let summary = json!({
        "model": dest,
        "rows": labels.n(),
        "classes": labels.c(),
        "latent_dim": config.latent_dim,
        "code_dim": config.code_dim,
        "num_codes": config.num_codes,
        "steps": trace.len(),
        "initial_reconstruction": trace.reconstruction.first(),
        "final_reconstruction": last(&trace.reconstruction),
        "final_reconstruction_smoothed": smoothed.last(),
        "final_total": last(&trace.total),
        "seed": ctx.seed,
    });
    let text = format!(
        "model          {}\nshape          c={} d_h={} d_c={} k={}\nsteps          {}\nrecon loss     {} -> {}\n",
        dest.display(),
        labels.c(),
        config.latent_dim,
        config.code_dim,
        config.num_codes,
        trace.len(),
        fmt_opt(trace.reconstruction.first().copied()),
        fmt_opt(smoothed.last().copied()),
    );
    ctx.emit(out, &summary, &text)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn cmd_compress(ctx: &Context, a: CompressArgs, out: &mut dyn Write) -> Result<(), Error> {
    let labels = load_labels(required(&a.labels, "labels")?)?;
    let dest = required(&a.out, "out")?;
    let codec = a.codec.as_deref().unwrap_or("vqae");
    let archive = match codec {
        "vqae" => {
            let path = required(&a.model, "model")?;
            let (model, meta) = read_model(BufReader::new(File::open(path)?))?;
            let codes = model.compress(&labels)?;
            CompressedArchive::vqae(&model, meta.epsilon, codes)?
        }
        "topk" => CompressedArchive::topk(&topk_compress(&labels, *required(&a.k_top, "k-top")?)?),
        "quant" => {
            let quant = ScalarQuantCodec::fit_seeded(&labels, *required(&a.bits, "bits")?, ctx.seed)?;
            CompressedArchive::quant(labels.c(), &quant, quant.apply(&labels)?)?
        }
        "pca" => {
            let pca = PcaCodec::fit(&labels, *required(&a.components, "components")?)?;
            CompressedArchive::pca(&pca, &pca.compress(&labels)?)?
        }
        "vq_no_ae" | "vq-no-ae" => {
            let base = a.train.config(labels.c(), ctx.seed)?;
            let (vq, _) = VqNoAeCodec::fit(&labels, base.code_dim, base.num_codes, &base)?;
            CompressedArchive::vq_no_ae(&vq, vq.compress(&labels)?)?
        }
        "topk_vq" | "topk-vq" => {
            let k_top = *required(&a.k_top, "k-top")?;
            let config = a.train.config(k_top, ctx.seed)?;
            let (codec, _) = TopkVqCodec::fit_labels(&labels, k_top, &config)?;
            let stored = codec.compress(&labels)?;
            CompressedArchive::topk_vq(&codec, stored)?
        }
        other => return Err(Error::param(format!("unknown codec {other:?}"))),
    };
    let bytes = archive.to_bytes()?;
    fs::write(dest, &bytes)?;
    let raw = (labels.n() * labels.c() * labels.precision().bytes()) as f64;
    let summary = json!({
        "archive": dest,
        "codec": archive.codec_id(),
        "rows": labels.n(),
        "classes": labels.c(),
        "raw_bytes": raw,
        "archive_bytes": bytes.len(),
        "ratio": raw / bytes.len() as f64,
    });
    let text = format!(
        "archive        {}\ncodec          {codec}\nrows           {}\nraw bytes      {raw}\narchive bytes  {}\nratio          {:.3}x\n",
        dest.display(),
        labels.n(),
        bytes.len(),
        raw / bytes.len() as f64
    );
    ctx.emit(out, &summary, &text)
}

fn cmd_decompress(ctx: &Context, a: DecompressArgs, out: &mut dyn Write) -> Result<(), Error> {
    let archive = read_archive(required(&a.archive, "archive")?)?;
    let dest = required(&a.out, "out")?;
    let labels = archive.decompress()?;
    let mut file = BufWriter::new(File::create(dest)?);
    if dest.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_labels_csv(&labels, &mut file)?;
    } else {
        write_slab(&labels, &mut file)?;
    }
    file.flush()?;
    let summary = json!({
        "labels": dest,
        "codec": archive.codec_id(),
        "rows": labels.n(),
        "classes": labels.c(),
    });
    let text = format!(
        "labels         {}\nrows           {}\nclasses        {}\n",
        dest.display(),
        labels.n(),
        labels.c()
    );
    ctx.emit(out, &summary, &text)
}

fn write_labels_csv(labels: &SoftLabelMatrix, w: &mut dyn Write) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::format(e.to_string());
    out.write_record((0..labels.c()).map(|j| format!("p{j}"))).map_err(csv_err)?;
    for row in labels.rows() {
        out.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn raw_report(spec: &BudgetSpec) -> Result<StorageReport, Error> {
    let raw = raw_label_bytes(spec)? as f64;
    Ok(StorageReport {
        method: "raw".into(),
        raw_bytes: raw,
        compressed_bytes: raw,
        ratio: 1.0,
        components: Vec::new(),
        exact: true,
        padded_bytes: None,
    })
}

fn report_text(r: &StorageReport) -> String {
    let mut text = format!(
        "method         {}\nraw            {:.3} GB ({} bytes)\ncompressed     {:.3} GB ({} bytes)\nratio          {:.3}x\n",
        r.method,
        r.raw_gib(),
        r.raw_bytes,
        r.compressed_gib(),
        r.compressed_bytes,
        r.ratio
    );
    for c in &r.components {
        text += &format!("  {:<12} {:.3} GB ({} bytes)\n", c.name, c.bytes / GIB, c.bytes);
    }
    if let Some(p) = r.padded_bytes {
        text += &format!("padded file    {p} bytes\n");
    }
    if !r.exact {
        text += "note           bit widths rounded up to whole bits\n";
    }
    text += "(GB = 1024^3 bytes)\n";
    text
}

fn cmd_budget(ctx: &Context, a: BudgetArgs, out: &mut dyn Write) -> Result<(), Error> {
    let method = a
        .method
        .clone()
        .unwrap_or_else(|| if a.latent_dim.is_some() { "vqae" } else { "raw" }.into());
    if method == "llm" {
        let report = llm_report(
            *required(&a.tokens, "tokens")?,
            *required(&a.vocab, "vocab")?,
            *required(&a.archive_gb, "archive-gb")? * GIB,
        )?;
        let mut value = serde_json::to_value(&report).map_err(json_err)?;
        value["raw_gb"] = json!(report.raw_gib());
        value["compressed_gb"] = json!(report.compressed_gib());
        return ctx.emit(out, &value, &report_text(&report));
    }
    let spec = a.spec.spec()?;
    let report = match method.as_str() {
        "raw" => raw_report(&spec)?,
        "vqae" => vq_bytes(&spec.with_vq(
            *required(&a.latent_dim, "latent-dim")?,
            *required(&a.code_dim, "code-dim")?,
            *required(&a.num_codes, "num-codes")?,
        ))?,
        "topk" => topk_bytes(&spec, *required(&a.k_top, "k-top")?)?,
        "quant" => quant_bytes(&spec, *required(&a.bits, "bits")?)?,
        "pca" => pca_bytes(&spec, *required(&a.components, "components")?)?,
        other => return Err(Error::param(format!("unknown method {other:?}"))),
    };
    let mut value = serde_json::to_value(&report).map_err(json_err)?;
    value["raw_gb"] = json!(report.raw_gib());
    value["compressed_gb"] = json!(report.compressed_gib());
    ctx.emit(out, &value, &report_text(&report))
}

fn cmd_solve(ctx: &Context, a: SolveArgs, out: &mut dyn Write) -> Result<(), Error> {
    let spec = a.spec.spec()?;
    let target = *required(&a.target, "target")?;
    let s = solve_hyperparams(target, &spec)?;
    let report = vq_bytes(&spec.with_vq(s.latent_dim, s.code_dim, s.num_codes))?;
    let value = json!({
        "target": target,
        "latent_dim": s.latent_dim,
        "code_dim": s.code_dim,
        "num_codes": s.num_codes,
        "ratio": s.ratio,
        "compressed_gb": report.compressed_gib(),
    });
    let text = format!(
        "target         {target}x\nd_h            {}\nd_c            {}\nk              {}\nratio          {:.4}x\ncompressed     {:.3} GB\n",
        s.latent_dim,
        s.code_dim,
        s.num_codes,
        s.ratio,
        report.compressed_gib()
    );
    ctx.emit(out, &value, &text)
}

fn cmd_eval(ctx: &Context, a: EvalArgs, out: &mut dyn Write) -> Result<(), Error> {
    let mut task = TaskConfig::new(ctx.seed, a.dim.unwrap_or(20), a.classes.unwrap_or(10), a.per_class.unwrap_or(100));
    if let Some(s) = a.spread {
        task.spread = s;
    }
    let epochs = a.epochs.unwrap_or(30);
    let student = StudentConfig {
        hidden: a.student_hidden.unwrap_or(32),
        epochs,
        temperature: a.temperature.unwrap_or(1.0),
        seed: ctx.seed,
        ..StudentConfig::default()
    };
    let config = PipelineConfig {
        task,
        augment: Augment {
            views: a.views.unwrap_or(4),
            jitter: a.jitter.unwrap_or(0.3),
            seed: ctx.seed,
        },
        teacher: StudentConfig {
            hidden: a.teacher_hidden.unwrap_or(128),
            seed: ctx.seed.wrapping_add(1),
            ..student
        },
        student,
        temperature: a.temperature.unwrap_or(1.0),
        teacher_per_class: a.teacher_per_class,
    };
    let pipeline = Pipeline::build(config)?;
    let spec = pipeline.budget_spec();
    let labels = &pipeline.labels;
    let codec_name = a.codec.as_deref().unwrap_or("vqae");
    let report = match codec_name {
        "identity" => pipeline.compare(&IdentityCodec, 1.0)?,
        "vqae" => {
            let train = a.train.config(labels.c(), ctx.seed)?;
            let (model, _) = fit(labels, &train)?;
            let ratio = vq_bytes(&spec.with_vq(
                train.latent_dim as u64,
                train.code_dim as u64,
                train.num_codes as u64,
            ))?
            .ratio;
            let codec = VqaeCodec {
                model,
                epsilon: DEFAULT_EPSILON,
            };
            pipeline.compare(&codec, ratio)?
        }
        "topk" => {
            let k_top = *required(&a.k_top, "k-top")?;
            let ratio = topk_bytes(&spec, k_top as u64)?.ratio;
            pipeline.compare(&TopkCodec { k_top }, ratio)?
        }
        other => return Err(Error::param(format!("unknown eval codec {other:?}"))),
    };
    if let Some(path) = &a.csv {
        write_retention_csv(BufWriter::new(File::create(path)?), std::slice::from_ref(&report))?;
    }
    let mut value = serde_json::to_value(&report).map_err(json_err)?;
    value["teacher_accuracy"] = json!(pipeline.teacher_accuracy());
    value["mean_teacher_entropy"] = json!(labels.mean_entropy());
    let text = format!(
        "codec          {}\nteacher acc    {:.4}\nraw acc        {:.4}\ncodec acc      {:.4}\nretention      {:.4}\nmean KL        {:.6}\nratio          {:.3}x\n",
        report.codec,
        pipeline.teacher_accuracy(),
        report.raw_accuracy,
        report.reconstructed_accuracy,
        report.retention,
        report.mean_kl,
        report.storage_ratio
    );
    ctx.emit(out, &value, &text)
}

const TABLE_IPCS: [u64; 4] = [10, 20, 50, 100];

fn cmd_tables(ctx: &Context, a: TablesArgs, out: &mut dyn Write) -> Result<(), Error> {
    let classes = a.classes.unwrap_or(1000);
    let epochs = a.epochs.unwrap_or(300);
    let sizes = label_size_table(&TABLE_IPCS, classes, epochs)?;
    let compressed = compressed_size_table(&TABLE_IPCS, classes, epochs)?;
    let value = json!({ "label_sizes": sizes, "compressed_sizes": compressed });
    let mut text = format!("Soft-label size (GB = 1024^3 bytes), C={classes}, E={epochs}\n  IPC      size\n");
    for r in &sizes {
        text += &format!("  {:>3}  {:>8.3}\n", r.ipc, r.label_gib);
    }
    text += "\nCompressed size (GB)\n  rate   d_h  d_c     k";
    for ipc in TABLE_IPCS {
        text += &format!("  {:>8}", format!("IPC {ipc}"));
    }
    text += "\n";
    for chunk in compressed.chunks(TABLE_IPCS.len()) {
        let r = &chunk[0];
        text += &format!(
            "  {:>3}x  {:>4}  {:>3}  {:>4}",
            r.rate, r.latent_dim, r.code_dim, r.num_codes
        );
        for r in chunk {
            text += &format!("  {:>8.3}", r.compressed_gib);
        }
        text += "\n";
    }
    ctx.emit(out, &value, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("slvq").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn budget_prints_raw_size() {
        let (code, out, _) = run_capture(&["budget", "--ipc", "10", "--classes", "1000", "--epochs", "300"]);
        assert_eq!(code, 0);
        assert!(out.contains("5.588 GB"), "{out}");
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_capture(&["budget", "--bogus"]);
        assert_eq!(code, 1);
        assert!(!err.is_empty());
    }

    #[test]
    fn missing_option_is_usage_error() {
        let (code, _, err) = run_capture(&["budget", "--ipc", "10"]);
        assert_eq!(code, 1);
        assert!(err.contains("--classes"));
    }

    #[test]
    fn infeasible_solve_is_numeric_failure() {
        let (code, _, _) = run_capture(&["solve", "--ipc", "10", "--classes", "1000", "--epochs", "300", "--target", "1e9"]);
        assert_eq!(code, 3);
    }

    #[test]
    fn config_file_fills_unset_options() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"ipc": 20, "classes": 1000, "epochs": 300, "seed": 4}"#).unwrap();
        let (code, out, _) = run_capture(&["--json", "budget", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["raw_gb"].as_f64().unwrap() - 11.176).abs() < 5e-4);
        let (code, out, _) = run_capture(&["--json", "budget", "--ipc", "10", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["raw_gb"].as_f64().unwrap() - 5.588).abs() < 5e-4);
    }

    #[test]
    fn bad_config_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"ipc": 20, "unheard_of": 1}"#).unwrap();
        let (code, _, _) = run_capture(&["budget", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 2);
        let (code, _, _) = run_capture(&["budget", "--config", "/nonexistent/cfg.json"]);
        assert_eq!(code, 2);
    }
}
