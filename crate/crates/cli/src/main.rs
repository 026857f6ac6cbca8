use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use authorscope::classifiers::{ClassifierKind, FingerprintScope};
use authorscope::clustering::{decouple, DecoupleConfig, WeightMode};
use authorscope::config::read_list;
use authorscope::evaluation::{generate_corpus, obfuscate_bundle, CorpusConfig, EvalError};
use authorscope::pipeline::{evaluate, predict, train_model, EvaluateOptions, PipelineConfig, PipelineError};
use authorscope::{load_model, parse_bundle, save_model, write_bundle, AppBundle};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_FATAL: u8 = 3;

/// Name of the provenance sidecar written next to a generated corpus.
const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Parser)]
#[command(name = "authorscope", version, about = "Authorship decoupling and author identification for app bundles")]
struct Cli {
    /// Worker threads for batch work (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split each app into authorship modules and pick its primary module.
    Decouple {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        decouple: DecoupleFlags,
        /// Accepted for symmetry with the other commands; decoupling draws no random numbers.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for one `<app_id>.partition.json` per app; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on a labeled corpus.
    Train {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ClassifierArg::Rf)]
        classifier: ClassifierArg,
        #[command(flatten)]
        pipeline: PipelineFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the author of each app with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write the prediction lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation on a labeled corpus.
    Evaluate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Classifier to evaluate; `all` runs the three on shared folds.
        #[arg(long, value_enum, default_value_t = EvalClassifierArg::Rf)]
        classifier: EvalClassifierArg,
        /// Obfuscate every test app with this seed before fingerprinting.
        #[arg(long)]
        obfuscate_test: Option<u64>,
        #[command(flatten)]
        pipeline: PipelineFlags,
        /// Machine-readable report (JSON); the table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic labeled corpus and its provenance sidecar.
    GenCorpus {
        #[arg(long, default_value_t = 5)]
        authors: usize,
        #[arg(long, default_value_t = 10)]
        apps_per_author: usize,
        #[arg(long, default_value_t = 1)]
        min_modules: usize,
        #[arg(long, default_value_t = 5)]
        max_modules: usize,
        #[arg(long, default_value_t = 10)]
        library_pool: usize,
        #[arg(long, default_value_t = 0.8)]
        distinctiveness: f64,
        #[arg(long, default_value_t = 0.3)]
        library_affinity: f64,
        #[arg(long, default_value_t = 0.5)]
        declared_library_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rename identifiers and drop API-free methods, as a shrinking obfuscator would.
    Obfuscate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Max,
    Alpha,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Logreg,
    Svm,
    Rf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalClassifierArg {
    Logreg,
    Svm,
    Rf,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Primary,
    Whole,
}

impl From<ClassifierArg> for ClassifierKind {
    fn from(arg: ClassifierArg) -> Self {
        match arg {
            ClassifierArg::Logreg => ClassifierKind::Logreg,
            ClassifierArg::Svm => ClassifierKind::LinearSvm,
            ClassifierArg::Rf => ClassifierKind::RandomForest,
        }
    }
}

impl EvalClassifierArg {
    fn kinds(self) -> Vec<ClassifierKind> {
        match self {
            EvalClassifierArg::Logreg => vec![ClassifierKind::Logreg],
            EvalClassifierArg::Svm => vec![ClassifierKind::LinearSvm],
            EvalClassifierArg::Rf => vec![ClassifierKind::RandomForest],
            EvalClassifierArg::All => ClassifierKind::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct DecoupleFlags {
    #[arg(long, value_enum, default_value_t = ModeArg::Max)]
    mode: ModeArg,
    /// Weight of the relational affinity in `alpha` mode.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Extra library prefixes, one per line.
    #[arg(long)]
    libs_file: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineFlags {
    #[command(flatten)]
    decouple: DecoupleFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Authors with fewer apps are dropped.
    #[arg(long, default_value_t = 10)]
    least_apps: usize,
    /// Method names that contribute no identifier tokens, one per line.
    #[arg(long)]
    overrides_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScopeArg::Primary)]
    scope: ScopeArg,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Embedding training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Embedding minimum token count.
    #[arg(long)]
    min_count: Option<usize>,
    /// Random forest size.
    #[arg(long)]
    trees: Option<usize>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn fatal(message: impl Into<String>) -> Self {
        Failure { code: EXIT_FATAL, message: message.into() }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Eval(
                EvalError::MissingLabel(_) | EvalError::KTooLarge { .. } | EvalError::EmptyResult(_),
            ) => Failure::usage(e.to_string()),
            other => Failure::fatal(other.to_string()),
        }
    }
}

type CmdResult = Result<u8, Failure>;

impl DecoupleFlags {
    fn config(&self) -> Result<DecoupleConfig, Failure> {
        let mode = match self.mode {
            ModeArg::Max => WeightMode::Max,
            ModeArg::Alpha if (0.0..=1.0).contains(&self.alpha) => WeightMode::AlphaBlend { alpha: self.alpha },
            ModeArg::Alpha => return Err(Failure::usage(format!("--alpha must lie in [0, 1], got {}", self.alpha))),
        };
        let extra_libraries = match &self.libs_file {
            Some(path) => read_list(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
            None => Vec::new(),
        };
        Ok(DecoupleConfig { mode, extra_libraries, ..Default::default() })
    }
}

impl PipelineFlags {
    fn config(&self) -> Result<PipelineConfig, Failure> {
        let mut config = PipelineConfig {
            decouple: self.decouple.config()?,
            least_apps: self.least_apps,
            seed: self.seed,
            scope: match self.scope {
                ScopeArg::Primary => FingerprintScope::PrimaryModule,
                ScopeArg::Whole => FingerprintScope::WholeApp,
            },
            ..Default::default()
        };
        if let Some(path) = &self.overrides_file {
            config.overrides = read_list(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        }
        if let Some(dim) = self.dim {
            config.embedding.dim = dim;
        }
        if let Some(epochs) = self.epochs {
            config.embedding.epochs = epochs;
        }
        if let Some(min_count) = self.min_count {
            config.embedding.min_count = min_count;
        }
        if let Some(trees) = self.trees {
            config.classifier.forest.trees = trees;
        }
        Ok(config)
    }
}

/// Expands directories to the `.json` files directly inside them, skipping
/// the ground-truth sidecar. The result is sorted.
fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|e| Failure::usage(format!("{}: {e}", input.display())))?;
            for entry in entries {
                let path = entry.map_err(|e| Failure::fatal(e.to_string()))?.path();
                let is_json = path.extension().is_some_and(|x| x == "json");
                let is_sidecar = path.file_name().is_some_and(|n| n == GROUND_TRUTH_FILE);
                if path.is_file() && is_json && !is_sidecar {
                    files.push(path);
                }
            }
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(Failure::usage(format!("{}: no such file or directory", input.display())));
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// Reads every bundle, reporting failures per file. Bundles come back sorted by app id.
fn load_bundles(inputs: &[PathBuf]) -> Result<(Vec<AppBundle>, usize), Failure> {
    let files = collect_inputs(inputs)?;
    let results: Vec<Result<AppBundle, String>> = files
        .par_iter()
        .map(|path| {
            let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_bundle(&bytes).map_err(|e| format!("{}: {e}", path.display()))
        })
        .collect();
    let mut bundles = Vec::new();
    let mut failed = 0;
    for r in results {
        match r {
            Ok(b) => bundles.push(b),
            Err(msg) => {
                eprintln!("error: {msg}");
                failed += 1;
            }
        }
    }
    bundles.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    if let Some(w) = bundles.windows(2).find(|w| w[0].app_id == w[1].app_id) {
        return Err(Failure::usage(format!("duplicate app id `{}`", w[0].app_id)));
    }
    Ok((bundles, failed))
}

fn status(failed: usize) -> u8 {
    if failed == 0 {
        0
    } else {
        EXIT_PARTIAL
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::fatal(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::fatal(format!("{}: {e}", path.display())))
}

/// Stdout, or the file at `out`.
fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_file(path, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::fatal(e.to_string())),
    }
}

#[derive(Serialize)]
struct PartitionReport {
    app_id: String,
    primary_module: usize,
    primary_fallback: bool,
    modules: Vec<Vec<String>>,
}

fn cmd_decouple(inputs: &[PathBuf], flags: &DecoupleFlags, out: Option<&Path>) -> CmdResult {
    let config = flags.config()?;
    let (bundles, mut failed) = load_bundles(inputs)?;
    let results: Vec<Result<PartitionReport, String>> = bundles
        .par_iter()
        .map(|b| {
            let p = decouple(b, &config).map_err(|e| format!("{}: {e}", b.app_id))?;
            Ok(PartitionReport {
                app_id: b.app_id.clone(),
                primary_module: p.primary_module,
                primary_fallback: p.primary_fallback,
                modules: p.modules().into_iter().map(|m| m.into_iter().map(|n| n.to_string()).collect()).collect(),
            })
        })
        .collect();
    if let Some(dir) = out {
        create_dir(dir)?;
    }
    let mut lines = String::new();
    for r in results {
        match r {
            Ok(report) => {
                let json = serde_json::to_string(&report).expect("report serializes");
                match out {
                    Some(dir) => write_file(&dir.join(format!("{}.partition.json", report.app_id)), json + "\n")?,
                    None => {
                        lines.push_str(&json);
                        lines.push('\n');
                    }
                }
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                failed += 1;
            }
        }
    }
    if out.is_none() {
        emit(None, &lines)?;
    }
    Ok(status(failed))
}

fn cmd_train(inputs: &[PathBuf], kind: ClassifierKind, flags: &PipelineFlags, out: &Path) -> CmdResult {
    let config = flags.config()?;
    let (bundles, failed) = load_bundles(inputs)?;
    if bundles.is_empty() {
        return Err(Failure::usage("no readable bundles"));
    }
    let model = train_model(bundles, kind, &config)?;
    save_model(&model, out).map_err(|e| Failure::fatal(format!("{}: {e}", out.display())))?;
    eprintln!("trained {} on {} apps of {} authors", kind, model.metadata.training_apps, model.labels.len());
    Ok(status(failed))
}

fn cmd_predict(model_path: &Path, inputs: &[PathBuf], out: Option<&Path>) -> CmdResult {
    let model = load_model(model_path).map_err(|e| Failure::fatal(format!("{}: {e}", model_path.display())))?;
    let (bundles, mut failed) = load_bundles(inputs)?;
    let results: Vec<_> = bundles.par_iter().map(|b| predict(&model, b).map_err(|e| format!("{}: {e}", b.app_id))).collect();
    let mut text = String::new();
    for r in results {
        match r {
            Ok(p) => {
                let prob = p.probability.map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
                text.push_str(&format!("{}\t{}\t{}\n", p.app_id, p.label, prob));
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                failed += 1;
            }
        }
    }
    emit(out, &text)?;
    Ok(status(failed))
}

fn cmd_evaluate(
    inputs: &[PathBuf],
    k: usize,
    kinds: Vec<ClassifierKind>,
    obfuscate_test: Option<u64>,
    flags: &PipelineFlags,
    out: Option<&Path>,
) -> CmdResult {
    let config = flags.config()?;
    let (bundles, failed) = load_bundles(inputs)?;
    let options = EvaluateOptions { k, kinds, obfuscate_test };
    let reports = evaluate(bundles, &options, &config)?;
    let mut table = String::new();
    for r in &reports {
        table.push_str(&format!("{} (k={}, seed={})\n", r.classifier, r.k, r.seed));
        table.push_str(&r.aggregate.table());
        table.push('\n');
    }
    emit(None, &table)?;
    if let Some(path) = out {
        let mut json = serde_json::to_string_pretty(&reports).expect("report serializes");
        json.push('\n');
        write_file(path, json)?;
    }
    Ok(status(failed))
}

fn cmd_gen_corpus(config: &CorpusConfig, out: &Path) -> CmdResult {
    if config.modules_per_app.0 == 0 || config.modules_per_app.0 > config.modules_per_app.1 {
        return Err(Failure::usage("need 1 <= --min-modules <= --max-modules"));
    }
    for (name, v) in [
        ("--distinctiveness", config.distinctiveness),
        ("--library-affinity", config.library_affinity),
        ("--declared-library-rate", config.declared_library_rate),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Failure::usage(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    let corpus = generate_corpus(config);
    create_dir(out)?;
    for app in &corpus.apps {
        write_file(&out.join(format!("{}.json", app.app_id)), write_bundle(app))?;
    }
    let mut truth = serde_json::to_string_pretty(&corpus.truth).expect("truth serializes");
    truth.push('\n');
    write_file(&out.join(GROUND_TRUTH_FILE), truth)?;
    eprintln!("wrote {} apps to {}", corpus.apps.len(), out.display());
    Ok(0)
}

fn cmd_obfuscate(inputs: &[PathBuf], seed: u64, out: &Path) -> CmdResult {
    let (bundles, failed) = load_bundles(inputs)?;
    create_dir(out)?;
    let obfuscated: Vec<AppBundle> =
        bundles.par_iter().enumerate().map(|(i, b)| obfuscate_bundle(b, seed.wrapping_add(i as u64)).bundle).collect();
    for b in &obfuscated {
        write_file(&out.join(format!("{}.json", b.app_id)), write_bundle(b))?;
    }
    Ok(status(failed))
}

fn run(cli: Cli) -> CmdResult {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| Failure::fatal(e.to_string()))?;
    }
    match cli.command {
        Command::Decouple { inputs, decouple, seed: _, out } => cmd_decouple(&inputs, &decouple, out.as_deref()),
        Command::Train { inputs, classifier, pipeline, out } => cmd_train(&inputs, classifier.into(), &pipeline, &out),
        Command::Predict { model, inputs, out } => cmd_predict(&model, &inputs, out.as_deref()),
        Command::Evaluate { inputs, k, classifier, obfuscate_test, pipeline, out } => {
            cmd_evaluate(&inputs, k, classifier.kinds(), obfuscate_test, &pipeline, out.as_deref())
        }
        Command::GenCorpus {
            authors,
            apps_per_author,
            min_modules,
            max_modules,
            library_pool,
            distinctiveness,
            library_affinity,
            declared_library_rate,
            seed,
            out,
        } => {
            let config = CorpusConfig {
                n_authors: authors,
                apps_per_author,
                modules_per_app: (min_modules, max_modules),
                library_pool,
                distinctiveness,
                library_affinity,
                declared_library_rate,
                seed,
            };
            cmd_gen_corpus(&config, &out)
        }
        Command::Obfuscate { inputs, seed, out } => cmd_obfuscate(&inputs, seed, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
