use std::fs;
use std::path::{Path, PathBuf};

use xsrl::alignment::{ibm1_train, parse_parallel, AlignmentTable, DEFAULT_FLOOR};
use xsrl::corpus::{corpus_stats, read_corpus, write_corpus, Corpus, CorpusStats, ParseOptions};
use xsrl::eval::{self, default_buckets, parse_buckets, srl_f1_with, EvalReport, DEFAULT_ROLES};
use xsrl::model::vocab::Embeddings;
use xsrl::model::{load_model, save_model, train_with_callback, ModelConfig, SrlModel, Variant};
use xsrl::postag::{fit_pos_emission, PosDistribution, DEFAULT_SMOOTHING};
use xsrl::projection::{project_corpus_threaded, ProjectionConfig, ProjectionStats, DEFAULT_ALPHA};
use xsrl::toy;

use crate::error::CliError;
use crate::settings::{resolve, resolve_seed, FlatConfig, PipelineManifest, SEED_ENV};
use crate::{Cli, Command, ModelArgs, ProjectionInputs};

pub const DEFAULT_ITERATIONS: usize = 5;

/// Language assumed for unlabeled sentences when the model ignores languages.
const UNDETERMINED_LANG: &str = "und";

struct Context {
    config: FlatConfig,
    seed: u64,
    threads: usize,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => FlatConfig::load(path)?,
        None => FlatConfig::default(),
    };
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(cli.seed, &config, env.as_deref())?;
    let threads = resolve(cli.threads, &config, "threads", 1)?;
    if threads == 0 {
        return Err(CliError::input("--threads must be at least 1"));
    }
    let ctx = Context { config, seed, threads };

    match cli.command {
        Command::AlignTrain {
            parallel,
            iterations,
            floor,
            lowercase,
            out,
        } => align_train(&ctx, &parallel, iterations, floor, lowercase, &out),
        Command::FitPos {
            tagged,
            smoothing,
            lang,
            out,
        } => fit_pos(&ctx, &tagged, smoothing, lang.as_deref(), &out),
        Command::Project {
            inputs,
            alpha,
            out,
            stats,
        } => {
            let stats = stats.unwrap_or_else(|| with_suffix(&out, ".stats"));
            project(&ctx, &inputs, alpha, &out, &stats).map(|_| ())
        }
        Command::SweepAlpha {
            inputs,
            alphas,
            train,
            dev,
            train_files,
            model,
            out,
        } => sweep_alpha(&ctx, &inputs, &alphas, train, dev.as_deref(), &train_files, &model, &out),
        Command::Train {
            train_files,
            lang,
            model,
            log_file,
            out,
        } => {
            let log = log_file.unwrap_or_else(|| with_suffix(&out, ".log"));
            train(&ctx, &train_files, lang.as_deref(), &model, &log, &out).map(|_| ())
        }
        Command::Predict { model, input, lang, out } => predict(&model, &input, lang.as_deref(), &out),
        Command::Eval {
            gold,
            pred,
            roles,
            buckets,
            out,
        } => evaluate(&gold, &pred, roles, buckets.as_deref(), out.as_deref()).map(|_| ()),
        Command::Stats { inputs, lang, out } => stats(&inputs, lang.as_deref(), out.as_deref()),
        Command::Similarity { model, out } => similarity(&model, out.as_deref()),
        Command::Aggregate { reports, out } => aggregate(&reports, out.as_deref()),
        Command::GenToy { out } => {
            toy::generate(ctx.seed).write(&out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))
        }
        Command::Pipeline { manifest } => pipeline(&manifest, cli.seed, ctx.threads),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_corpus(path: &Path, opts: &ParseOptions) -> Result<Corpus, CliError> {
    read_corpus(path, opts).map_err(|e| CliError::from(e).context(path.display()))
}

fn align_train(
    ctx: &Context,
    parallel: &Path,
    iterations: Option<usize>,
    floor: Option<f64>,
    lowercase: bool,
    out: &Path,
) -> Result<(), CliError> {
    let iterations = resolve(iterations, &ctx.config, "iterations", DEFAULT_ITERATIONS)?;
    let floor = resolve(floor, &ctx.config, "floor", DEFAULT_FLOOR)?;
    let lowercase = lowercase || ctx.config.get("lowercase")?.unwrap_or(false);
    let pairs = parse_parallel(&read_text(parallel)?, lowercase).map_err(|e| CliError::from(e).context(parallel.display()))?;
    let model = ibm1_train(&pairs, iterations, floor)?;
    for (i, ll) in model.log_likelihoods.iter().enumerate() {
        eprintln!("iteration\t{}\tlog_likelihood\t{ll}", i + 1);
    }
    model.table.save(out)?;
    Ok(())
}

fn fit_pos(ctx: &Context, tagged: &Path, smoothing: Option<f64>, lang: Option<&str>, out: &Path) -> Result<(), CliError> {
    let k = resolve(smoothing, &ctx.config, "smoothing", DEFAULT_SMOOTHING)?;
    let opts = ParseOptions {
        default_lang: Some(lang.unwrap_or(UNDETERMINED_LANG).to_string()),
        allow_plain: true,
    };
    let corpus = load_corpus(tagged, &opts)?;
    fit_pos_emission(&corpus, k)?.save(out)?;
    Ok(())
}

fn projection_config(ctx: &Context, inputs: &ProjectionInputs, alpha: Option<f64>) -> Result<ProjectionConfig, CliError> {
    let alpha = resolve(alpha, &ctx.config, "alpha", DEFAULT_ALPHA)?;
    let mut config = ProjectionConfig::with_alpha(alpha)?;
    config.floor = match inputs.floor {
        Some(f) => Some(f),
        None => ctx.config.get("floor")?,
    };
    config.lowercase = inputs.lowercase || ctx.config.get("lowercase")?.unwrap_or(false);
    Ok(config)
}

struct ProjectionData {
    source: Corpus,
    translations: Corpus,
    table: AlignmentTable,
    dist: PosDistribution,
}

fn load_projection_data(inputs: &ProjectionInputs) -> Result<ProjectionData, CliError> {
    let source = load_corpus(&inputs.source, &ParseOptions::default())?;
    let opts = ParseOptions {
        default_lang: inputs.target_lang.clone(),
        allow_plain: true,
    };
    let translations = load_corpus(&inputs.translations, &opts)?;
    let table = AlignmentTable::load(&inputs.table).map_err(|e| CliError::from(e).context(inputs.table.display()))?;
    let dist = PosDistribution::load(&inputs.pos).map_err(|e| CliError::from(e).context(inputs.pos.display()))?;
    Ok(ProjectionData {
        source,
        translations,
        table,
        dist,
    })
}

fn run_projection(ctx: &Context, data: &ProjectionData, config: &ProjectionConfig) -> Result<(Corpus, ProjectionStats), CliError> {
    let (corpus, stats) = project_corpus_threaded(
        &data.source,
        data.translations.sentences(),
        &data.table,
        &data.dist,
        config,
        ctx.threads,
    )?;
    if !stats.is_consistent() {
        return Err(CliError::internal(format!("inconsistent projection statistics: {stats:?}")));
    }
    if corpus.frame_count() != stats.frames_kept {
        return Err(CliError::internal("projected frame count differs from frames_kept"));
    }
    Ok((corpus, stats))
}

fn project(ctx: &Context, inputs: &ProjectionInputs, alpha: Option<f64>, out: &Path, stats_path: &Path) -> Result<ProjectionStats, CliError> {
    let config = projection_config(ctx, inputs, alpha)?;
    let data = load_projection_data(inputs)?;
    let (corpus, stats) = run_projection(ctx, &data, &config)?;
    write_corpus(out, &corpus)?;
    let report = stats.to_report();
    write_text(stats_path, &report)?;
    print!("{report}");
    Ok(stats)
}

/// Unique thresholds in first-seen order; warns about repeats.
fn dedup_alphas(alphas: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &a in alphas {
        if out.iter().any(|b| b.to_bits() == a.to_bits()) {
            eprintln!("warning: duplicate alpha {a} ignored");
        } else {
            out.push(a);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn sweep_alpha(
    ctx: &Context,
    inputs: &ProjectionInputs,
    alphas: &[f64],
    train_models: bool,
    dev: Option<&Path>,
    train_files: &[PathBuf],
    model_args: &ModelArgs,
    out: &Path,
) -> Result<(), CliError> {
    let alphas = dedup_alphas(alphas);
    if alphas.is_empty() {
        return Err(CliError::input("--alphas needs at least one value"));
    }
    let data = load_projection_data(inputs)?;
    let training = if train_models {
        let dev = dev.ok_or_else(|| CliError::input("--train requires --dev"))?;
        let dev = load_corpus(dev, &ParseOptions::default())?;
        let extra = read_training_corpora(train_files, None, Variant::Pgn)?;
        let config = model_config(ctx, model_args)?;
        let embeddings = load_embeddings(model_args)?;
        Some((dev, extra, config, embeddings))
    } else {
        None
    };

    let mut csv = String::from("alpha,frames_kept,args_kept");
    if training.is_some() {
        csv.push_str(",dev_f1");
    }
    csv.push('\n');
    for alpha in alphas {
        let mut config = projection_config(ctx, inputs, None)?;
        config.set_alpha(alpha)?;
        let (projected, stats) = run_projection(ctx, &data, &config)?;
        csv.push_str(&format!("{alpha},{},{}", stats.frames_kept, stats.args_kept));
        if let Some((dev, extra, model_config, embeddings)) = &training {
            let corpus = projected.concat(extra.clone());
            let (model, _) = train_with_callback(&corpus, model_config.clone(), embeddings.as_ref(), |epoch, loss| {
                eprintln!("alpha\t{alpha}\tepoch\t{epoch}\tloss\t{loss}");
            })?;
            let pred = model.predict_corpus(dev)?;
            let report = eval::srl_f1(dev, &pred)?;
            csv.push_str(&format!(",{}", report.f1));
        }
        csv.push('\n');
    }
    write_text(out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn model_config(ctx: &Context, args: &ModelArgs) -> Result<ModelConfig, CliError> {
    let c = &ctx.config;
    let d = ModelConfig::default();
    let variant = match &args.variant {
        Some(v) => Some(v.clone()),
        None => c.raw("variant").map(str::to_string),
    };
    let variant = match variant {
        Some(v) => v.parse::<Variant>()?,
        None => d.variant,
    };
    let config = ModelConfig {
        word_dim: resolve(args.word_dim, c, "word_dim", d.word_dim)?,
        pos_dim: resolve(args.pos_dim, c, "pos_dim", d.pos_dim)?,
        pred_dim: resolve(args.pred_dim, c, "pred_dim", d.pred_dim)?,
        lang_dim: resolve(args.lang_dim, c, "lang_dim", d.lang_dim)?,
        hidden: resolve(args.hidden, c, "hidden", d.hidden)?,
        layers: resolve(args.layers, c, "layers", d.layers)?,
        variant,
        learning_rate: resolve(args.lr, c, "lr", d.learning_rate)?,
        batch_size: resolve(args.batch_size, c, "batch_size", d.batch_size)?,
        epochs: resolve(args.epochs, c, "epochs", d.epochs)?,
        clip_norm: resolve(args.clip_norm, c, "clip_norm", d.clip_norm)?,
        seed: ctx.seed,
        ..d
    };
    if config.epochs == 0 {
        return Err(CliError::input("--epochs must be at least 1"));
    }
    Ok(config)
}

fn load_embeddings(args: &ModelArgs) -> Result<Option<Embeddings>, CliError> {
    args.embeddings
        .as_ref()
        .map(|p| Embeddings::load(p).map_err(|e| CliError::from(e).context(p.display())))
        .transpose()
}

/// Reads and concatenates corpora. Without `lang`, only the basic variant
/// accepts sentences lacking a language ID.
fn read_training_corpora(paths: &[PathBuf], lang: Option<&str>, variant: Variant) -> Result<Corpus, CliError> {
    let default_lang = match (lang, variant) {
        (Some(l), _) => Some(l.to_string()),
        (None, Variant::Basic) => Some(UNDETERMINED_LANG.to_string()),
        (None, Variant::Pgn) => None,
    };
    let opts = ParseOptions {
        default_lang,
        allow_plain: false,
    };
    let mut corpus = Corpus::new(Vec::new());
    for path in paths {
        corpus = corpus.concat(load_corpus(path, &opts)?);
    }
    Ok(corpus)
}

fn train(ctx: &Context, files: &[PathBuf], lang: Option<&str>, args: &ModelArgs, log: &Path, out: &Path) -> Result<SrlModel, CliError> {
    let config = model_config(ctx, args)?;
    let corpus = read_training_corpora(files, lang, config.variant)?;
    let embeddings = load_embeddings(args)?;
    let mut lines = String::new();
    let (model, report) = train_with_callback(&corpus, config, embeddings.as_ref(), |epoch, loss| {
        let line = format!("epoch\t{epoch}\tloss\t{loss}");
        eprintln!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    })?;
    write_text(log, &lines)?;
    if !model.params().all_finite() || report.epoch_losses.iter().any(|l| !l.is_finite()) {
        return Err(CliError::internal("training diverged to non-finite values"));
    }
    save_model(&model, out)?;
    let c = model.config();
    eprintln!(
        "trained {:?} model on {} frames, {} languages, {} labels",
        c.variant, report.examples, c.language_count, c.label_count
    );
    Ok(model)
}

fn predict(model: &Path, input: &Path, lang: Option<&str>, out: &Path) -> Result<(), CliError> {
    let model = load_model(model).map_err(|e| CliError::from(e).context(model.display()))?;
    let opts = ParseOptions {
        default_lang: lang.map(str::to_string),
        allow_plain: false,
    };
    let corpus = load_corpus(input, &opts)?;
    let predicted = model.predict_corpus(&corpus)?;
    write_corpus(out, &predicted)?;
    Ok(())
}

fn evaluate(gold: &Path, pred: &Path, roles: Option<Vec<String>>, buckets: Option<&str>, out: Option<&Path>) -> Result<EvalReport, CliError> {
    let opts = ParseOptions::with_lang(UNDETERMINED_LANG);
    let gold = load_corpus(gold, &opts)?;
    let pred = load_corpus(pred, &opts)?;
    let roles = roles.unwrap_or_else(|| DEFAULT_ROLES.iter().map(|r| r.to_string()).collect());
    let buckets = match buckets {
        Some(b) => parse_buckets(b)?,
        None => default_buckets(),
    };
    let report = srl_f1_with(&gold, &pred, &roles, &buckets)?;
    emit(&report.to_text(), out)?;
    Ok(report)
}

fn stats(inputs: &[PathBuf], lang: Option<&str>, out: Option<&Path>) -> Result<(), CliError> {
    let opts = ParseOptions {
        default_lang: Some(lang.unwrap_or(UNDETERMINED_LANG).to_string()),
        allow_plain: true,
    };
    let mut total = CorpusStats::default();
    for path in inputs {
        total.merge(&corpus_stats(&load_corpus(path, &opts)?));
    }
    emit(&total.to_report(), out)
}

fn similarity(model: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model = load_model(model).map_err(|e| CliError::from(e).context(model.display()))?;
    let matrix = eval::language_similarity(&model)?;
    emit(&matrix.to_csv(), out)
}

fn aggregate(paths: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let reports = paths
        .iter()
        .map(|p| EvalReport::from_text(&read_text(p)?).map_err(|e| CliError::from(e).context(p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    emit(&eval::aggregate(&reports).to_text(), out)
}

/// Output names inside the pipeline's `out_dir`.
pub const PIPELINE_FILES: [&str; 8] = [
    "table.tsv",
    "pos.tsv",
    "projected.conllu",
    "projected.stats",
    "model.bin",
    "model.log",
    "dev.pred.conllu",
    "eval.tsv",
];

fn pipeline(manifest_path: &Path, seed_flag: Option<u64>, threads: usize) -> Result<(), CliError> {
    let m = PipelineManifest::load(manifest_path, seed_flag)?;
    let ctx = Context {
        config: m.overrides.clone(),
        seed: m.seed,
        threads,
    };
    let out = |i: usize| m.out_dir.join(PIPELINE_FILES[i]);
    fs::create_dir_all(&m.out_dir).map_err(|e| CliError::input(format!("{}: {e}", m.out_dir.display())))?;

    align_train(&ctx, &m.parallel, None, None, false, &out(0))?;
    fit_pos(&ctx, &m.tagged, None, None, &out(1))?;
    let inputs = ProjectionInputs {
        source: m.source.clone(),
        translations: m.translations.clone(),
        target_lang: None,
        table: out(0),
        pos: out(1),
        floor: None,
        lowercase: false,
    };
    project(&ctx, &inputs, None, &out(2), &out(3))?;
    let mut train_files = vec![out(2)];
    if ctx.config.get("include_source")?.unwrap_or(false) {
        train_files.push(m.source.clone());
    }
    let model_args = ModelArgs {
        embeddings: ctx.config.raw("embeddings").map(|p| manifest_path.parent().unwrap_or(Path::new(".")).join(p)),
        ..ModelArgs::default()
    };
    train(&ctx, &train_files, None, &model_args, &out(5), &out(4))?;
    predict(&out(4), &m.dev, None, &out(6))?;
    let report = evaluate(&m.dev, &out(6), None, None, Some(&out(7)))?;
    println!("f1\t{}", report.f1);
    Ok(())
}
