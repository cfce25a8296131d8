//! Command-line front end: `fit`, `eval`, `bench`, `lifetime`, `ucr-sweep`.

mod manifest;
mod sweep;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::classifier::{QuantizedModel, TrainRecipe};
use crate::config::{CountingMode, ModelConfig, Padding};
use crate::dataset::{self, config_hash, Dataset, FeatureCache};
use crate::energy::{self, Battery, LifetimeReport};
use crate::error::{Error, Result};
use crate::oracle::{self, FloatPipeline, OracleMode};
use crate::pipeline::{self, Engine, FitOutput};
use crate::transform::KernelBank;

pub use manifest::{timing_path, unix_now, RunManifest, Timing};
pub use sweep::{read_results, SweepRow};

#[derive(Debug, Parser)]
#[command(name = "nanohydra", version, about = "Integer-only random-kernel time series classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a UCR-format dataset and write it to disk.
    Fit(FitArgs),
    /// Evaluate a model on a dataset split, optionally against the float reference.
    Eval(EvalArgs),
    /// Static cost counts of a model or a configuration.
    Bench(BenchArgs),
    /// Battery lifetime from the duty-cycled power model.
    Lifetime(LifetimeArgs),
    /// Best-of-N accuracy over several UCR datasets, resumable.
    UcrSweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// 3 dilations, raw series only.
    E,
    /// 5 dilations, raw series and first difference.
    A,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset directory holding `<NAME>_TRAIN.tsv`/`<NAME>_TEST.tsv`, or a dataset name under the data root.
    #[arg(long)]
    pub dataset: String,
    /// Root directory of the UCR archive.
    #[arg(long, env = "NANOHYDRA_DATA")]
    pub data_root: Option<PathBuf>,
}

impl DataArgs {
    pub fn load(&self) -> Result<Dataset> {
        let (dir, name) = resolve_dataset(&self.dataset, self.data_root.as_deref());
        dataset::load_ucr_dataset(dir, &name)
    }
}

/// Maps a `--dataset` argument to `(directory, name)`.
pub fn resolve_dataset(arg: &str, root: Option<&Path>) -> (PathBuf, String) {
    let direct = Path::new(arg);
    if direct.is_dir() {
        let name = direct
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or(arg)
            .to_string();
        return (direct.to_path_buf(), name);
    }
    let root = root.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    (root, arg.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, value_enum, default_value_t = Variant::E)]
    pub variant: Variant,
    /// Base configuration file (`key = value` lines); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_dil: Option<usize>,
    #[arg(long)]
    pub n_diff: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub kernels_per_group: Option<usize>,
    #[arg(long)]
    pub kernel_len: Option<usize>,
    /// Kernel and training seed (first seed of a multi-seed run).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Convolution pre-shift; defaults to the smallest safe value.
    #[arg(long)]
    pub preshift: Option<u32>,
    #[arg(long)]
    pub padding: Option<Padding>,
    #[arg(long)]
    pub counting_mode: Option<CountingMode>,
    /// Z-normalize each series before quantization.
    #[arg(long)]
    pub znorm: bool,
    #[arg(long)]
    pub input_bits: Option<u32>,
    #[arg(long)]
    pub count_shift: Option<u32>,
    #[arg(long)]
    pub soft_shift: Option<u32>,
    #[arg(long)]
    pub frac_bits: Option<u32>,
    #[arg(long)]
    pub clamp_bits: Option<u32>,
    /// Reduce the number of dilations when the longest kernel would not fit the series.
    #[arg(long)]
    pub clip_dilations: bool,
}

impl ConfigArgs {
    pub fn build(&self, input_len: usize, num_classes: usize) -> Result<ModelConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                ModelConfig::from_kv_text(&text)?
            }
            None => match self.variant {
                Variant::E => ModelConfig::e_config(input_len, num_classes),
                Variant::A => ModelConfig::a_config(input_len, num_classes),
            },
        };
        c.input_len = input_len;
        c.num_classes = num_classes;
        c.seed = self.seed;
        macro_rules! set {
            ($($field:ident = $arg:ident),*) => {$(
                if let Some(v) = self.$arg {
                    c.$field = v;
                }
            )*};
        }
        set!(
            n_dil = n_dil,
            n_diff = n_diff,
            groups = groups,
            kernels_per_group = kernels_per_group,
            kernel_len = kernel_len,
            padding = padding,
            counting_mode = counting_mode,
            input_frac_bits = input_bits,
            count_shift = count_shift,
            soft_shift = soft_shift,
            scaled_frac_bits = frac_bits,
            feature_clamp_bits = clamp_bits
        );
        if self.znorm {
            c.znorm = true;
        }
        if self.clip_dilations {
            c.clip_dilations();
        }
        match self.preshift {
            Some(s) => c.conv_preshift = s,
            None => {
                c.auto_preshift();
            }
        }
        c.validated()
    }
}

#[derive(Debug, Clone, Args)]
pub struct RecipeArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
}

impl RecipeArgs {
    pub fn recipe(&self, seed: u64) -> TrainRecipe {
        let mut r = TrainRecipe::with_seed(seed);
        if let Some(v) = self.epochs {
            r.epochs = v;
        }
        if let Some(v) = self.batch_size {
            r.batch_size = v;
        }
        if let Some(v) = self.lr {
            r.learning_rate = v;
        }
        if let Some(v) = self.momentum {
            r.momentum = v;
        }
        if let Some(v) = self.weight_decay {
            r.weight_decay = v;
        }
        r
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub recipe: RecipeArgs,
    /// Output model file.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Train seeds `seed..seed+N` and keep the model with the best test accuracy.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Manifest path; defaults to `<out>.manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory for cached feature matrices.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalPath {
    Int,
    Float,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    /// Same compression and power-of-two spreads, real arithmetic.
    Mirror,
    /// Square-root compression and true standard deviations.
    Exact,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = EvalPath::Int)]
    pub path: EvalPath,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long, value_enum, default_value_t = OracleArg::Mirror)]
    pub oracle: OracleArg,
    #[command(flatten)]
    pub recipe: RecipeArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model file; without it the counts come from the configuration flags.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 140)]
    pub input_len: usize,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Ulpws,
    Biogap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ulpm,
    Lpm,
    Hpm,
}

#[derive(Debug, Args)]
pub struct LifetimeArgs {
    #[arg(long, value_enum, default_value_t = SystemArg::Ulpws)]
    pub system: SystemArg,
    #[arg(long, value_enum, default_value_t = Variant::E)]
    pub variant: Variant,
    #[arg(long, value_enum, default_value_t = ModeArg::Lpm)]
    pub mode: ModeArg,
    #[arg(long)]
    pub p_inf_uw: Option<f64>,
    #[arg(long)]
    pub p_sleep_uw: Option<f64>,
    #[arg(long)]
    pub p_adc_uw: Option<f64>,
    #[arg(long)]
    pub dt_inf_ms: Option<f64>,
    #[arg(long)]
    pub dt_acq_s: Option<f64>,
    #[arg(long, default_value_t = 600.0)]
    pub capacity_mah: f64,
    #[arg(long, default_value_t = 3.0)]
    pub voltage: f64,
    /// Every system and variant at the low-power operating point.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Archive root with one sub-directory per dataset.
    #[arg(long, env = "NANOHYDRA_DATA")]
    pub archive: PathBuf,
    /// Comma-separated dataset names; all datasets in the archive when absent.
    #[arg(long, value_delimiter = ',')]
    pub datasets: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub recipe: RecipeArgs,
    /// Results table; rows already present for the same setup are skipped.
    #[arg(long, default_value = "sweep.tsv")]
    pub results: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Output of a command: human text plus the manifest.
#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub manifest: RunManifest,
    pub manifest_path: Option<PathBuf>,
}

impl Report {
    pub fn render(&self) -> String {
        format!("{}---\n{}", self.text, self.manifest.to_kv())
    }
}

/// Parses `args` (program name first), runs the command, prints the report
/// and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let argv: Vec<String> = std::iter::once("nanohydra".to_string())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect();
    let started = unix_now();
    match run(cli.command, &argv) {
        Ok(report) => {
            let timing = Timing {
                started_unix: started,
                finished_unix: unix_now(),
            };
            if let Some(path) = &report.manifest_path {
                if let Err(e) = report.manifest.write(path, &timing) {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code());
                }
            }
            use std::io::Write as _;
            let mut out = std::io::stdout().lock();
            let _ = write!(out, "{}", report.render());
            let _ = writeln!(out, "wall_seconds={:.3}", timing.wall_seconds());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: Command, argv: &[String]) -> Result<Report> {
    match command {
        Command::Fit(a) => cmd_fit(&a, argv),
        Command::Eval(a) => cmd_eval(&a, argv),
        Command::Bench(a) => cmd_bench(&a, argv),
        Command::Lifetime(a) => cmd_lifetime(&a, argv),
        Command::UcrSweep(a) => sweep::cmd_ucr_sweep(&a, argv),
    }
}

/// One trained seed of a best-of-N run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub fit: FitOutput,
    pub test_accuracy: Option<f64>,
}

impl SeedRun {
    fn score(&self) -> f64 {
        self.test_accuracy.unwrap_or(self.fit.train_accuracy)
    }
}

#[derive(Debug, Clone)]
pub struct SeedSummary {
    pub runs: Vec<SeedRun>,
    pub best: usize,
}

impl SeedSummary {
    pub fn best_run(&self) -> &SeedRun {
        &self.runs[self.best]
    }

    /// Mean and population standard deviation of the selection score.
    pub fn mean_std(&self) -> (f64, f64) {
        let n = self.runs.len() as f64;
        let mean = self.runs.iter().map(SeedRun::score).sum::<f64>() / n;
        let var = self.runs.iter().map(|r| (r.score() - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

fn train_features(ds: &Dataset, config: &ModelConfig, scale: f64, cache: Option<&FeatureCache>) -> Result<Vec<Vec<i16>>> {
    let bank = KernelBank::sample(config);
    let Some(cache) = cache else {
        return pipeline::extract_features(&ds.train.series, config, scale, &bank);
    };
    let path = cache.path_for(&ds.content_hash(), config, "train");
    if let Some(rows) = cache.load(&path, config.feature_len()) {
        if rows.len() == ds.train.len() {
            return Ok(rows);
        }
    }
    let rows = pipeline::extract_features(&ds.train.series, config, scale, &bank)?;
    cache.store(&path, &rows)?;
    Ok(rows)
}

/// Trains seeds `first..first+count` concurrently and keeps the best by test
/// accuracy (train accuracy when the test split is empty); ties go to the
/// lowest seed.
pub fn run_seeds(
    ds: &Dataset,
    template: &ModelConfig,
    recipe: &RecipeArgs,
    first: u64,
    count: u64,
    cache: Option<&FeatureCache>,
) -> Result<SeedSummary> {
    if count == 0 {
        return Err(Error::Input("--seeds must be at least 1".into()));
    }
    let scale = pipeline::fit_input_scale(&ds.train.series, template);
    let seeds: Vec<u64> = (0..count).map(|i| first.wrapping_add(i)).collect();
    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| {
            let mut config = template.clone();
            config.seed = seed;
            let features = train_features(ds, &config, scale, cache)?;
            let fit = pipeline::fit_from_features(&features, &ds.train.labels, &config, scale, &recipe.recipe(seed))?;
            let test_accuracy = if ds.test.is_empty() {
                None
            } else {
                Some(Engine::new(fit.model.clone())?.accuracy(&ds.test.series, &ds.test.labels)?)
            };
            Ok(SeedRun {
                seed,
                fit,
                test_accuracy,
            })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.score() > runs[best].score() {
            best = i;
        }
    }
    Ok(SeedSummary { runs, best })
}

fn manifest_path_or(explicit: &Option<PathBuf>, fallback: Option<PathBuf>) -> Option<PathBuf> {
    explicit.clone().or(fallback)
}

pub fn cmd_fit(args: &FitArgs, argv: &[String]) -> Result<Report> {
    let ds = args.data.load()?;
    let template = args.config.build(ds.series_len, ds.n_classes)?;
    let cache = args.cache.as_ref().map(FeatureCache::new);
    let summary = run_seeds(&ds, &template, &args.recipe, args.config.seed, args.seeds, cache.as_ref())?;
    let best = summary.best_run();
    let model = &best.fit.model;
    model.save(&args.out)?;
    let cost = energy::cost_report(model);
    let (mean, std) = summary.mean_std();

    let mut text = String::new();
    let _ = writeln!(text, "dataset        {} ({} train, {} test, length {}, {} classes)", ds.name, ds.train.len(), ds.test.len(), ds.series_len, ds.n_classes);
    let _ = writeln!(text, "config         n_dil={} n_diff={} H={} K={} W={} preshift={} L_F={}", template.n_dil, template.n_diff, template.groups, template.kernels_per_group, template.kernel_len, template.conv_preshift, template.feature_len());
    for r in &summary.runs {
        let _ = write!(text, "seed {:<9} train {:.4}", r.seed, r.fit.train_accuracy);
        if let Some(t) = r.test_accuracy {
            let _ = write!(text, "  test {t:.4}");
        }
        text.push('\n');
    }
    let _ = writeln!(text, "best seed      {}", best.seed);
    let _ = writeln!(text, "train accuracy {:.4}", best.fit.train_accuracy);
    if let Some(t) = best.test_accuracy {
        let _ = writeln!(text, "test accuracy  {t:.4} (mean {mean:.4} +- {std:.4} over {} seeds)", summary.runs.len());
    }
    let _ = writeln!(text, "model          {} ({} bytes)", args.out.display(), cost.bytes_model);

    let mut m = RunManifest::new("fit", argv);
    m.config_hash = Some(config_hash(&model.config));
    m.dataset_hash = Some(ds.content_hash());
    m.seed = Some(best.seed);
    m.metric("dataset", &ds.name)
        .metric("seeds", summary.runs.len())
        .metric("train_accuracy", format!("{:.6}", best.fit.train_accuracy));
    if let Some(t) = best.test_accuracy {
        m.metric("test_accuracy", format!("{t:.6}"))
            .metric("test_accuracy_mean", format!("{mean:.6}"))
            .metric("test_accuracy_std", format!("{std:.6}"));
    }
    m.metric("bytes_model", cost.bytes_model)
        .metric("bytes_peak", cost.bytes_peak)
        .metric("macs", cost.macs_per_inference);
    let fallback = {
        let mut p = args.out.as_os_str().to_owned();
        p.push(".manifest");
        PathBuf::from(p)
    };
    Ok(Report {
        text,
        manifest: m,
        manifest_path: manifest_path_or(&args.manifest, Some(fallback)),
    })
}

/// `[true][predicted]` counts.
pub fn confusion(pred: &[usize], labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &l) in pred.iter().zip(labels) {
        if p < classes && l < classes {
            m[l][p] += 1;
        }
    }
    m
}

fn format_confusion(title: &str, m: &[Vec<usize>]) -> String {
    let mut s = format!("{title} confusion (rows true, columns predicted)\n");
    let _ = write!(s, "{:>6}", "");
    for c in 0..m.len() {
        let _ = write!(s, "{c:>7}");
    }
    s.push('\n');
    for (i, row) in m.iter().enumerate() {
        let _ = write!(s, "{i:>6}");
        for v in row {
            let _ = write!(s, "{v:>7}");
        }
        s.push('\n');
    }
    s
}

pub fn cmd_eval(args: &EvalArgs, argv: &[String]) -> Result<Report> {
    let model = QuantizedModel::load(&args.model)?;
    let ds = args.data.load()?;
    if ds.series_len != model.config.input_len || ds.n_classes != model.config.num_classes {
        return Err(Error::Shape(format!(
            "model expects length {} with {} classes, dataset has length {} with {} classes",
            model.config.input_len, model.config.num_classes, ds.series_len, ds.n_classes
        )));
    }
    let split = match args.split {
        SplitArg::Train => &ds.train,
        SplitArg::Test => &ds.test,
    };
    if split.is_empty() {
        return Err(Error::Input("selected split is empty".into()));
    }
    let engine = Engine::new(model)?;
    let classes = engine.config().num_classes;
    let mut text = String::new();
    let mut m = RunManifest::new("eval", argv);
    m.config_hash = Some(config_hash(engine.config()));
    m.dataset_hash = Some(ds.content_hash());
    m.seed = Some(engine.model.bank_seed);
    m.metric("dataset", &ds.name).metric("samples", split.len());

    let int_pred = if args.path != EvalPath::Float {
        let pred = engine.classify_batch(&split.series)?;
        let acc = pipeline::accuracy(&pred, &split.labels);
        let _ = writeln!(text, "integer accuracy {acc:.4} on {} samples", split.len());
        text.push_str(&format_confusion("integer", &confusion(&pred, &split.labels, classes)));
        m.metric("int_accuracy", format!("{acc:.6}"));
        Some(pred)
    } else {
        None
    };
    if args.path != EvalPath::Int {
        let mode = match args.oracle {
            OracleArg::Mirror => OracleMode::Mirror,
            OracleArg::Exact => OracleMode::Exact,
        };
        let reference = FloatPipeline::train(
            &engine,
            &ds.train.series,
            &ds.train.labels,
            mode,
            &args.recipe.recipe(engine.model.bank_seed),
        )?;
        let report = oracle::integerization_report(&split.series, &split.labels, &engine, &reference)?;
        let fpred: Vec<usize> = split
            .series
            .par_iter()
            .map(|x| reference.predict(&engine, x))
            .collect::<Result<_>>()?;
        let _ = writeln!(text, "float accuracy   {:.4} ({:?} reference)", report.float_accuracy, mode);
        text.push_str(&format_confusion("float", &confusion(&fpred, &split.labels, classes)));
        m.metric("float_accuracy", format!("{:.6}", report.float_accuracy));
        if int_pred.is_some() {
            let _ = writeln!(text, "agreement        {:.4}", report.agreement);
            let _ = writeln!(text, "feature gap      max {:.4}, mean {:.4}", report.max_feature_divergence, report.mean_feature_divergence);
            m.metric("agreement", format!("{:.6}", report.agreement))
                .metric("max_feature_divergence", format!("{:.6}", report.max_feature_divergence));
        }
    }
    Ok(Report {
        text,
        manifest: m,
        manifest_path: args.manifest.clone(),
    })
}

pub fn cmd_bench(args: &BenchArgs, argv: &[String]) -> Result<Report> {
    let (config, bytes_model) = match &args.model {
        Some(path) => {
            let model = QuantizedModel::load(path)?;
            let size = model.size_bytes();
            (model.config, size)
        }
        None => {
            let c = args.config.build(args.input_len, args.classes)?;
            let size = QuantizedModel::encoded_len(&c);
            (c, size)
        }
    };
    let conv: u64 = config
        .views()
        .iter()
        .map(|&(order, d)| (config.timesteps(order, d) * config.groups * config.kernels_per_group * config.kernel_len) as u64)
        .sum();
    let head = (config.feature_len() * config.num_classes) as u64;
    let peak = energy::peak_bytes(&config);
    let mut text = String::new();
    let _ = writeln!(text, "views              {}", config.num_views());
    for (order, d) in config.views() {
        let _ = writeln!(text, "  diff {order} dilation {d:<3} {} timesteps", config.timesteps(order, d));
    }
    let _ = writeln!(text, "feature length     {}", config.feature_len());
    let _ = writeln!(text, "transform MACs     {conv}");
    let _ = writeln!(text, "scaler ops         {}", config.feature_len());
    let _ = writeln!(text, "classifier MACs    {head}");
    let _ = writeln!(text, "total MACs         {}", conv + head);
    let _ = writeln!(text, "model bytes        {bytes_model}");
    let _ = writeln!(text, "peak working bytes {peak}");
    let mut m = RunManifest::new("bench", argv);
    m.config_hash = Some(config_hash(&config));
    m.seed = Some(config.seed);
    m.metric("macs", conv + head)
        .metric("macs_transform", conv)
        .metric("macs_classifier", head)
        .metric("bytes_model", bytes_model)
        .metric("bytes_peak", peak);
    Ok(Report {
        text,
        manifest: m,
        manifest_path: args.manifest.clone(),
    })
}

fn variant_code(v: Variant) -> &'static str {
    match v {
        Variant::E => "E",
        Variant::A => "A",
    }
}

pub fn cmd_lifetime(args: &LifetimeArgs, argv: &[String]) -> Result<Report> {
    let battery = Battery {
        capacity_mah: args.capacity_mah,
        voltage: args.voltage,
    };
    let sys_of = |s: SystemArg| match s {
        SystemArg::Ulpws => energy::ULPWS,
        SystemArg::Biogap => energy::BIOGAP,
    };
    let mode = match args.mode {
        ModeArg::Ulpm => "ULPM",
        ModeArg::Lpm => "LPM",
        ModeArg::Hpm => "HPM",
    };
    let combos: Vec<(SystemArg, Variant)> = if args.all {
        vec![
            (SystemArg::Ulpws, Variant::E),
            (SystemArg::Ulpws, Variant::A),
            (SystemArg::Biogap, Variant::E),
            (SystemArg::Biogap, Variant::A),
        ]
    } else {
        vec![(args.system, args.variant)]
    };
    let overridden = args.p_inf_uw.is_some()
        || args.p_sleep_uw.is_some()
        || args.p_adc_uw.is_some()
        || args.dt_inf_ms.is_some()
        || args.dt_acq_s.is_some()
        || battery != Battery::COIN_CELL
        || args.mode != ModeArg::Lpm;
    let mut text = String::new();
    let mut m = RunManifest::new("lifetime", argv);
    for (sys_arg, variant) in combos {
        let sys = sys_of(sys_arg);
        let mut p = energy::profile(&sys, variant_code(variant), mode)?;
        if let Some(v) = args.p_inf_uw {
            p.p_inf = v;
        }
        if let Some(v) = args.p_sleep_uw {
            p.p_sleep = v;
        }
        if let Some(v) = args.p_adc_uw {
            p.p_adc = v;
        }
        if let Some(v) = args.dt_inf_ms {
            p.dt_inf = v * 1e-3;
        }
        if let Some(v) = args.dt_acq_s {
            p.dt_acq = v;
        }
        let reported = (!overridden).then_some(match variant {
            Variant::E => sys.reported_years.0,
            Variant::A => sys.reported_years.1,
        });
        let r = LifetimeReport::new(p, battery, reported)?;
        text.push_str(&r.to_text());
        text.push('\n');
        let prefix = format!("{}_{}", sys.name, variant_code(variant).to_lowercase());
        m.metric(&format!("{prefix}_avg_power_uw"), format!("{:.6}", r.avg_power_uw))
            .metric(&format!("{prefix}_lifetime_years"), format!("{:.6}", r.years));
        if let Some(rep) = r.reported_years {
            m.metric(&format!("{prefix}_reported_years"), rep);
        }
    }
    Ok(Report {
        text,
        manifest: m,
        manifest_path: args.manifest.clone(),
    })
}
