//! Command-line driver.
//!
//! Every flag may also come from a TOML file given with `--config`. The file
//! has up to four tables, `[paths]`, `[run]`, `[hyper]` and `[synth]`, whose
//! keys are the flag names with dashes replaced by underscores. A flag given
//! on the command line always wins over the file; the file wins over the
//! preset. One file can serve every subcommand, each reads the keys it uses.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gzsl_core::data::SkeletonSequence;
use gzsl_core::model::{Architecture, ClassSpace, Framework};
use gzsl_core::pipeline::{predict_features, score};
use gzsl_core::stae::InferenceMode;
use gzsl_core::trainer::{train, TrainConfig};
use serde::Deserialize;

use crate::error::{GzslError, Result};
use crate::format::{
    load_dataset, log_line, prediction_dump, read_attributes, read_checkpoint, read_dataset, read_partition,
    report_json, write_attributes, write_checkpoint, write_dataset, write_partition, DatasetFile, PartitionFile,
    ReportDoc,
};
use crate::parallel::extract_features;
use crate::synth::{generate_synthetic, SynthData, SynthSpec};

pub const DATASET_FILE: &str = "dataset.txt";
pub const ATTRIBUTES_FILE: &str = "attributes.txt";
pub const PARTITION_FILE: &str = "partition.txt";

#[derive(Debug, Parser)]
#[command(name = "gzsl", version, about = "Generalized zero-shot emotion recognition from body-gesture skeletons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset, attribute table and partition.
    Gen(GenArgs),
    /// Train a model and write a checkpoint and a training log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split and emit a report.
    Eval(EvalArgs),
    /// Predict gesture and emotion labels for every sample of a dataset.
    Predict(PredictArgs),
    /// Summarize checkpoint, dataset, attribute or partition files.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory for dataset.txt, attributes.txt and partition.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training samples per seen class.
    #[arg(long)]
    pub train_per_class: Option<usize>,
    /// Test samples per class.
    #[arg(long)]
    pub test_per_class: Option<usize>,
    /// Standard deviation of per-frame noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Hyper-parameter overrides applied on top of the preset.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperArgs {
    /// Weight of the distance-based cross-entropy.
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Weight of the threshold margin loss after warmup.
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Weight of the threshold magnitude penalty after warmup.
    #[arg(long)]
    pub beta3: Option<f64>,
    /// Weight of the semantic term of the autoencoder loss.
    #[arg(long)]
    pub gamma1: Option<f64>,
    /// Weight of the sample-graph term at inference.
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Weight of the feature-graph regularizer.
    #[arg(long)]
    pub gamma3: Option<f64>,
    /// Weight of the autoencoder loss in the total loss.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Weight of the emotion loss in the total loss.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Temperature of the distance-based cross-entropy.
    #[arg(long)]
    pub dce_gamma: Option<f64>,
    #[arg(long)]
    pub lr_shared: Option<f64>,
    #[arg(long)]
    pub lr_pbd: Option<f64>,
    #[arg(long)]
    pub lr_stae: Option<f64>,
    #[arg(long)]
    pub lr_emotion: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epoch (1-based) from which the threshold losses are active.
    #[arg(long)]
    pub warmup_epoch: Option<usize>,
    /// Starting value of every class threshold.
    #[arg(long)]
    pub initial_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Checkpoint file to write.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Training log file (JSON lines); stdout when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Hyper-parameter preset: partition1 or partition2.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-sample prediction dump (TSV).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Unseen-class inference: transductive or per-sample.
    #[arg(long)]
    pub inference: Option<String>,
    /// Worker threads for feature extraction.
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Prediction file (TSV); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Unseen-class inference: transductive or per-sample.
    #[arg(long)]
    pub inference: Option<String>,
    /// Worker threads for feature extraction.
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long)]
    pub partition: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    pub dataset: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub threads: Option<usize>,
    pub inference: Option<String>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub paths: PathSection,
    pub run: RunSection,
    pub hyper: HyperArgs,
    pub synth: Option<SynthSpec>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| GzslError::io(path, e))?;
        toml::from_str(&text).map_err(|e| GzslError::Usage(format!("{}: {}", path.display(), e.message())))
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| GzslError::Usage(format!("--{flag} is required")))
}

macro_rules! fill {
    ($target:expr, $source:expr; $($field:ident),*) => {
        $( if $target.$field.is_none() { $target.$field = $source.$field.clone(); } )*
    };
}

impl HyperArgs {
    /// Fills unset fields from `other`.
    pub fn or(mut self, other: &HyperArgs) -> HyperArgs {
        fill!(self, other; beta1, beta2, beta3, gamma1, gamma2, gamma3, lambda1, lambda2, dce_gamma,
            lr_shared, lr_pbd, lr_stae, lr_emotion, batch_size, warmup_epoch, initial_threshold);
        self
    }

    /// Applies the set fields to a training configuration.
    pub fn apply(&self, c: &mut TrainConfig) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.pbd.beta1, self.beta1);
        set(&mut c.pbd.beta2, self.beta2);
        set(&mut c.pbd.beta3, self.beta3);
        set(&mut c.stae.gamma1, self.gamma1);
        set(&mut c.stae.gamma2, self.gamma2);
        set(&mut c.stae.gamma3, self.gamma3);
        set(&mut c.lambda1, self.lambda1);
        set(&mut c.lambda2, self.lambda2);
        set(&mut c.gamma, self.dce_gamma);
        set(&mut c.rates.shared, self.lr_shared);
        set(&mut c.rates.pbd, self.lr_pbd);
        set(&mut c.rates.stae, self.lr_stae);
        set(&mut c.rates.emotion, self.lr_emotion);
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        if self.warmup_epoch.is_some() {
            c.threshold_warmup_epoch = self.warmup_epoch;
        }
    }
}

fn inference_mode(name: Option<String>) -> Result<InferenceMode> {
    match name {
        None => Ok(InferenceMode::default()),
        Some(n) => InferenceMode::from_name(&n)
            .ok_or_else(|| GzslError::Usage(format!("unknown inference mode {n:?} (transductive or per-sample)"))),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| GzslError::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = output(path)?;
    let shown = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| GzslError::io(&shown, e))
}

/// Writes the three files of a generated dataset into `dir`.
pub fn write_synthetic(dir: &Path, spec: &SynthSpec, data: &SynthData) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GzslError::io(dir, e))?;
    let samples: Vec<SkeletonSequence> = data.train.iter().chain(&data.test).cloned().collect();
    let dataset = DatasetFile {
        d_x: spec.d_x(),
        attribute_dims: spec.d_s(),
        emotion_of: data.partition.emotion_map().clone(),
        samples,
    };
    write_dataset(&dir.join(DATASET_FILE), &dataset)?;
    write_attributes(&dir.join(ATTRIBUTES_FILE), &data.attributes)?;
    let partition = PartitionFile {
        partition: data.partition.clone(),
        train_ids: data.train.iter().map(|s| s.id.clone()).collect(),
    };
    write_partition(&dir.join(PARTITION_FILE), &partition)
}

fn run_gen(args: GenArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let out = required(pick(args.out, file.paths.out), "out")?;
    let mut spec = file.synth.unwrap_or_default();
    if let Some(seed) = pick(args.seed, file.run.seed) {
        spec.seed = seed;
    }
    if let Some(n) = args.train_per_class {
        spec.train_per_class = n;
    }
    if let Some(n) = args.test_per_class {
        spec.test_per_class = n;
    }
    if let Some(x) = args.noise {
        spec.noise = x;
    }
    let data = generate_synthetic(&spec)?;
    write_synthetic(&out, &spec, &data)?;
    log::info!("wrote {} training and {} test samples to {}", data.train.len(), data.test.len(), out.display());
    Ok(())
}

/// Resolves the training configuration: preset, then file, then flags.
pub fn train_config(
    preset: Option<&str>,
    seed: Option<u64>,
    epochs: Option<usize>,
    hyper: &HyperArgs,
) -> Result<TrainConfig> {
    let name = preset.unwrap_or("partition1");
    let mut config = TrainConfig::preset(name)
        .ok_or_else(|| GzslError::Usage(format!("unknown preset {name:?} (partition1 or partition2)")))?;
    hyper.apply(&mut config);
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(e) = epochs {
        config.epochs = e;
    }
    config.validate().map_err(|e| GzslError::Usage(e.to_string()))?;
    Ok(config)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let dataset = required(pick(args.dataset, file.paths.dataset), "dataset")?;
    let attributes = required(pick(args.attributes, file.paths.attributes), "attributes")?;
    let partition = required(pick(args.partition, file.paths.partition), "partition")?;
    let checkpoint = required(pick(args.checkpoint, file.paths.checkpoint), "checkpoint")?;
    let log_path = pick(args.log, file.paths.log);
    let hyper = args.hyper.or(&file.hyper);
    let preset = pick(args.preset, file.run.preset);
    let config = train_config(
        preset.as_deref(),
        pick(args.seed, file.run.seed),
        pick(args.epochs, file.run.epochs),
        &hyper,
    )?;

    let (train_set, _, spec) = load_dataset(&dataset, &partition)?;
    let attrs = read_attributes(&attributes)?;
    let mut arch = Architecture::default();
    if let Some(first) = train_set.first() {
        arch.d_x = first.d_x();
    }
    if let Some(th) = hyper.initial_threshold {
        arch.initial_threshold = th;
    }
    let mut fw = Framework::new(arch, &spec, &attrs, config.stae, config.seed)?;
    log::info!(
        "training on {} samples, {} parameters, {} epochs",
        train_set.len(),
        fw.store.total_scalars(),
        config.epochs
    );

    let mut log_out = output(log_path.as_deref())?;
    let mut write_error = None;
    train(&mut fw, &train_set, &config, None, |r| {
        log::debug!("epoch {} total {:.6}", r.epoch, r.total);
        if write_error.is_none() {
            if let Err(e) = log_out.write_all(log_line(r).as_bytes()) {
                write_error = Some(e);
            }
        }
    })?;
    let shown = log_path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    if let Some(e) = write_error {
        return Err(GzslError::io(&shown, e));
    }
    log_out.flush().map_err(|e| GzslError::io(&shown, e))?;
    write_checkpoint(&checkpoint, &fw)
}

fn check_classes(fw: &Framework, spec: &gzsl_core::data::PartitionSpec) -> Result<()> {
    let expected = ClassSpace::from_partition(spec)?;
    if expected.seen != fw.classes.seen || expected.unseen != fw.classes.unseen {
        return Err(gzsl_core::Error::InvalidPartition("checkpoint was trained on a different class split".into()).into());
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let dataset = required(pick(args.dataset, file.paths.dataset), "dataset")?;
    let partition = required(pick(args.partition, file.paths.partition), "partition")?;
    let checkpoint = required(pick(args.checkpoint, file.paths.checkpoint), "checkpoint")?;
    let out = pick(args.out, file.paths.out);
    let dump = pick(args.predictions, file.paths.predictions);
    let mode = inference_mode(pick(args.inference, file.run.inference))?;
    let threads = pick(args.threads, file.run.threads).unwrap_or(1);

    let fw = read_checkpoint(&checkpoint)?;
    let (_, test, spec) = load_dataset(&dataset, &partition)?;
    check_classes(&fw, &spec)?;
    let f = extract_features(&fw, &test, threads)?;
    let predictions = predict_features(&fw, &f, mode)?;
    let report = score(&fw, &test, &predictions)?;
    emit(out.as_deref(), &report_json(&ReportDoc::new(&report, mode)))?;
    if let Some(p) = dump {
        emit(Some(&p), &prediction_dump(&test, &predictions))?;
    }
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let dataset = required(pick(args.dataset, file.paths.dataset), "dataset")?;
    let checkpoint = required(pick(args.checkpoint, file.paths.checkpoint), "checkpoint")?;
    let out = pick(args.out, file.paths.out);
    let mode = inference_mode(pick(args.inference, file.run.inference))?;
    let threads = pick(args.threads, file.run.threads).unwrap_or(1);

    let fw = read_checkpoint(&checkpoint)?;
    let data = read_dataset(&dataset)?;
    let f = extract_features(&fw, &data.samples, threads)?;
    let predictions = predict_features(&fw, &f, mode)?;
    emit(out.as_deref(), &prediction_dump(&data.samples, &predictions))
}

fn run_inspect(args: InspectArgs) -> Result<()> {
    if args.checkpoint.is_none() && args.dataset.is_none() && args.attributes.is_none() && args.partition.is_none() {
        return Err(GzslError::Usage("inspect needs at least one of --checkpoint, --dataset, --attributes, --partition".into()));
    }
    let mut s = String::new();
    if let Some(p) = &args.checkpoint {
        let fw = read_checkpoint(p)?;
        let a = fw.arch;
        s += &format!("checkpoint {}\n", p.display());
        s += &format!(
            "  d_x {} heads {} lstm {}x{} pooling {} d_f {}\n",
            a.d_x,
            a.heads,
            a.lstm_layers,
            a.lstm_hidden,
            a.pooling.name(),
            fw.d_f()
        );
        s += &format!("  seen {:?}\n  unseen {:?}\n", fw.classes.seen, fw.classes.unseen);
        s += &format!("  thresholds {:?}\n", fw.thresholds());
        s += &format!("  parameters {} ({} scalars)\n", fw.store.len(), fw.store.total_scalars());
    }
    if let Some(p) = &args.dataset {
        let d = read_dataset(p)?;
        let (lo, hi) = d.samples.iter().fold((usize::MAX, 0), |(lo, hi), x| (lo.min(x.len()), hi.max(x.len())));
        s += &format!("dataset {}\n  d_x {} classes {} samples {}\n", p.display(), d.d_x, d.emotion_of.len(), d.samples.len());
        if !d.samples.is_empty() {
            s += &format!("  frames {lo}..={hi}\n");
        }
    }
    if let Some(p) = &args.attributes {
        let a = read_attributes(p)?;
        s += &format!("attributes {}\n  classes {} dims {}\n  names {}\n", p.display(), a.class_ids().len(), a.dim(), a.names().join(" "));
    }
    if let Some(p) = &args.partition {
        let f = read_partition(p)?;
        let ps = &f.partition;
        s += &format!(
            "partition {}\n  seen {:?}\n  unseen {:?}\n  emotions {}\n  train samples {}\n",
            p.display(),
            ps.seen(),
            ps.unseen(),
            ps.emotion_count(),
            f.train_ids.len()
        );
    }
    emit(None, &s)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Predict(a) => run_predict(a),
        Command::Inspect(a) => run_inspect(a),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::new()
        .parse_env(env_logger::Env::new().filter_or("GZSL_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
