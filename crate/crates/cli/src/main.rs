//! Command-line surface: train a transfer function from a pair file,
//! translate lines with a saved model, score a model against references,
//! inspect its parameters, and run the grammar normal-form utilities.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error. Diagnostics
//! (warnings and traces) go to standard error; machine-readable output goes
//! to standard output.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use marktrans::anneal::{run_restarts, AnnealConfig, LexiconMode, MoveWeights};
use marktrans::corpus::{detokenize, tokenize, Corpus, CorpusOptions, SentencePair, Vocabulary};
use marktrans::engine::{explain, render_out, translate_out};
use marktrans::grammar::{enumerate_language, parse_cfg};
use marktrans::model::{
    dump_human, load_standalone, save, DictInit, InitOptions, MarkerPool, ModelShape,
    TransferFunction, MODEL_FORMAT_VERSION,
};
use marktrans::normal_forms::{to_gnf, to_mnf, to_mnf_bounded};
use marktrans::scoring::report;

fn version_string() -> String {
    format!(
        "{} (model format v{})",
        env!("CARGO_PKG_VERSION"),
        MODEL_FORMAT_VERSION
    )
}

#[derive(Parser)]
#[command(name = "marktrans", version = version_string(), about = "Marker-grammar translation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once, immediately consumed
enum Command {
    /// Learn a transfer function from a bilingual pair file.
    Train(TrainArgs),
    /// Translate lines from a file or standard input with a saved model.
    Translate(TranslateArgs),
    /// Score a saved model against a reference pair file.
    Score(ScoreArgs),
    /// Print a saved model's rules, permutations, and dictionaries.
    Inspect(InspectArgs),
    /// Convert a grammar to a normal form.
    Normalize(NormalizeArgs),
    /// Enumerate a grammar's language up to a length bound.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training pairs, one `SRC ||| TGT` per line.
    #[arg(required_unless_present = "print_config")]
    pairs: Option<PathBuf>,
    /// Output model path (JSON).
    #[arg(required_unless_present = "print_config")]
    out: Option<PathBuf>,
    /// Word-for-word lexicon file (`<eps>` target deletes a word).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// History CSV path (default: <out>.history.csv).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Flat key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Print the final report as JSON instead of key=value text.
    #[arg(long)]
    json: bool,
    /// Lowercase all input text.
    #[arg(long)]
    lowercase: bool,

    #[arg(long)]
    rules: Option<usize>,
    #[arg(long)]
    fanout: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    sweep: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed starting temperature (calibrated automatically when absent).
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    target_acceptance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<u32>,
    /// Worker threads for restarts.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    lexicon_mode: Option<LexiconModeArg>,
    #[arg(long, value_enum)]
    dict_init: Option<DictInitArg>,
    #[arg(long, value_enum)]
    marker_pool: Option<MarkerPoolArg>,
    /// Pool size used with --marker-pool top.
    #[arg(long)]
    marker_top: Option<usize>,
    #[arg(long)]
    enable_insertions: bool,
    #[arg(long)]
    weight_slot_nt: Option<f64>,
    #[arg(long)]
    weight_marker_add: Option<f64>,
    #[arg(long)]
    weight_marker_del: Option<f64>,
    #[arg(long)]
    weight_dict_change: Option<f64>,
    #[arg(long)]
    weight_perm_swap: Option<f64>,
    #[arg(long)]
    weight_insertion_edit: Option<f64>,
}

#[derive(Args)]
struct TranslateArgs {
    model: PathBuf,
    /// Input file; standard input when absent.
    input: Option<PathBuf>,
    /// Write a four-stage trace per line to standard error.
    #[arg(long)]
    explain: bool,
    #[arg(long)]
    lowercase: bool,
}

#[derive(Args)]
struct ScoreArgs {
    model: PathBuf,
    pairs: PathBuf,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    lowercase: bool,
}

#[derive(Args)]
struct InspectArgs {
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Gnf,
    Mnf,
    Mnf2,
}

#[derive(Args)]
struct NormalizeArgs {
    grammar: PathBuf,
    #[arg(long, value_enum)]
    form: FormArg,
}

#[derive(Args)]
struct GenerateArgs {
    grammar: PathBuf,
    #[arg(long)]
    max_len: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum LexiconModeArg {
    InitOnly,
    Frozen,
}

#[derive(Clone, Copy, ValueEnum)]
enum DictInitArg {
    Lexicon,
    Random,
    Epsilon,
}

#[derive(Clone, Copy, ValueEnum)]
enum MarkerPoolArg {
    All,
    Top,
}

/// Data/model-level failure; maps to exit code 2.
struct CliError(String);

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Translate(args) => cmd_translate(args),
        Command::Score(args) => cmd_score(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Normalize(args) => cmd_normalize(args),
        Command::Generate(args) => cmd_generate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Every training knob with its default, merged from file then flags.
struct TrainConfig {
    rules: usize,
    fanout: usize,
    max_depth: usize,
    budget: u64,
    sweep: u64,
    alpha: f64,
    t0: Option<f64>,
    target_acceptance: f64,
    seed: u64,
    restarts: u32,
    jobs: usize,
    lexicon_mode: LexiconMode,
    dict_init: DictInit,
    marker_pool: MarkerPool,
    marker_top: usize,
    enable_insertions: bool,
    weights: MoveWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let anneal = AnnealConfig::default();
        TrainConfig {
            rules: 4,
            fanout: 3,
            max_depth: ModelShape::DEFAULT_MAX_DEPTH,
            budget: anneal.move_budget,
            sweep: anneal.sweep_size,
            alpha: anneal.cooling_alpha,
            t0: None,
            target_acceptance: anneal.target_acceptance,
            seed: 0,
            restarts: 1,
            jobs: 1,
            lexicon_mode: LexiconMode::InitOnly,
            dict_init: DictInit::Random,
            marker_pool: MarkerPool::All,
            marker_top: MarkerPool::DEFAULT_TOP,
            enable_insertions: false,
            weights: MoveWeights::default(),
        }
    }
}

impl TrainConfig {
    fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                CliError(format!(
                    "{}:{}: invalid {what} `{value}`",
                    path.display(),
                    lineno + 1
                ))
            };
            match key {
                "rules" => self.rules = value.parse().map_err(|_| bad("integer"))?,
                "fanout" => self.fanout = value.parse().map_err(|_| bad("integer"))?,
                "max_depth" => self.max_depth = value.parse().map_err(|_| bad("integer"))?,
                "budget" => self.budget = value.parse().map_err(|_| bad("integer"))?,
                "sweep" => self.sweep = value.parse().map_err(|_| bad("integer"))?,
                "alpha" => self.alpha = value.parse().map_err(|_| bad("number"))?,
                "t0" => {
                    self.t0 = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad("number"))?)
                    }
                }
                "target_acceptance" => {
                    self.target_acceptance = value.parse().map_err(|_| bad("number"))?
                }
                "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
                "restarts" => self.restarts = value.parse().map_err(|_| bad("integer"))?,
                "jobs" => self.jobs = value.parse().map_err(|_| bad("integer"))?,
                "lexicon_mode" => {
                    self.lexicon_mode = match value {
                        "init-only" => LexiconMode::InitOnly,
                        "frozen" => LexiconMode::Frozen,
                        _ => return Err(bad("lexicon mode")),
                    }
                }
                "dict_init" => {
                    self.dict_init = match value {
                        "lexicon" => DictInit::Lexicon,
                        "random" => DictInit::Random,
                        "epsilon" => DictInit::Epsilon,
                        _ => return Err(bad("dictionary initialization")),
                    }
                }
                "marker_pool" => {
                    self.marker_pool = match value {
                        "all" => MarkerPool::All,
                        "top" => MarkerPool::TopFrequency(self.marker_top),
                        _ => return Err(bad("marker pool")),
                    }
                }
                "marker_top" => self.marker_top = value.parse().map_err(|_| bad("integer"))?,
                "enable_insertions" => {
                    self.enable_insertions = value.parse().map_err(|_| bad("boolean"))?
                }
                "weight_slot_nt" => self.weights.slot_nt = value.parse().map_err(|_| bad("number"))?,
                "weight_marker_add" => {
                    self.weights.marker_add = value.parse().map_err(|_| bad("number"))?
                }
                "weight_marker_del" => {
                    self.weights.marker_del = value.parse().map_err(|_| bad("number"))?
                }
                "weight_dict_change" => {
                    self.weights.dict_change = value.parse().map_err(|_| bad("number"))?
                }
                "weight_perm_swap" => {
                    self.weights.perm_swap = value.parse().map_err(|_| bad("number"))?
                }
                "weight_insertion_edit" => {
                    self.weights.insertion_edit = value.parse().map_err(|_| bad("number"))?
                }
                _ => return Err(CliError(format!(
                    "{}:{}: unknown config key `{key}`",
                    path.display(),
                    lineno + 1
                ))),
            }
        }
        Ok(())
    }

    fn apply_flags(&mut self, args: &TrainArgs) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = args.$field { self.$field = v; })*
            };
        }
        take!(rules, fanout, max_depth, budget, sweep, alpha, target_acceptance, seed, restarts, jobs, marker_top);
        if let Some(t0) = args.t0 {
            self.t0 = Some(t0);
        }
        if let Some(mode) = args.lexicon_mode {
            self.lexicon_mode = match mode {
                LexiconModeArg::InitOnly => LexiconMode::InitOnly,
                LexiconModeArg::Frozen => LexiconMode::Frozen,
            };
        }
        if let Some(init) = args.dict_init {
            self.dict_init = match init {
                DictInitArg::Lexicon => DictInit::Lexicon,
                DictInitArg::Random => DictInit::Random,
                DictInitArg::Epsilon => DictInit::Epsilon,
            };
        }
        if let Some(pool) = args.marker_pool {
            self.marker_pool = match pool {
                MarkerPoolArg::All => MarkerPool::All,
                MarkerPoolArg::Top => MarkerPool::TopFrequency(self.marker_top),
            };
        }
        if args.enable_insertions {
            self.enable_insertions = true;
        }
        if let Some(w) = args.weight_slot_nt {
            self.weights.slot_nt = w;
        }
        if let Some(w) = args.weight_marker_add {
            self.weights.marker_add = w;
        }
        if let Some(w) = args.weight_marker_del {
            self.weights.marker_del = w;
        }
        if let Some(w) = args.weight_dict_change {
            self.weights.dict_change = w;
        }
        if let Some(w) = args.weight_perm_swap {
            self.weights.perm_swap = w;
        }
        if let Some(w) = args.weight_insertion_edit {
            self.weights.insertion_edit = w;
        }
        // keep a top-frequency pool in sync with a later --marker-top
        if let MarkerPool::TopFrequency(_) = self.marker_pool {
            self.marker_pool = MarkerPool::TopFrequency(self.marker_top);
        }
    }

    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rules={}", self.rules);
        let _ = writeln!(s, "fanout={}", self.fanout);
        let _ = writeln!(s, "max_depth={}", self.max_depth);
        let _ = writeln!(s, "budget={}", self.budget);
        let _ = writeln!(s, "sweep={}", self.sweep);
        let _ = writeln!(s, "alpha={}", self.alpha);
        let _ = writeln!(s, "t0={}", self.t0.map_or("auto".into(), |t| t.to_string()));
        let _ = writeln!(s, "target_acceptance={}", self.target_acceptance);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "restarts={}", self.restarts);
        let _ = writeln!(s, "jobs={}", self.jobs);
        let _ = writeln!(
            s,
            "lexicon_mode={}",
            match self.lexicon_mode {
                LexiconMode::InitOnly => "init-only",
                LexiconMode::Frozen => "frozen",
            }
        );
        let _ = writeln!(
            s,
            "dict_init={}",
            match self.dict_init {
                DictInit::Lexicon => "lexicon",
                DictInit::Random => "random",
                DictInit::Epsilon => "epsilon",
            }
        );
        let _ = writeln!(
            s,
            "marker_pool={}",
            match self.marker_pool {
                MarkerPool::All => "all",
                MarkerPool::TopFrequency(_) => "top",
            }
        );
        let _ = writeln!(s, "marker_top={}", self.marker_top);
        let _ = writeln!(s, "enable_insertions={}", self.enable_insertions);
        let _ = writeln!(s, "weight_slot_nt={}", self.weights.slot_nt);
        let _ = writeln!(s, "weight_marker_add={}", self.weights.marker_add);
        let _ = writeln!(s, "weight_marker_del={}", self.weights.marker_del);
        let _ = writeln!(s, "weight_dict_change={}", self.weights.dict_change);
        let _ = writeln!(s, "weight_perm_swap={}", self.weights.perm_swap);
        let _ = writeln!(s, "weight_insertion_edit={}", self.weights.insertion_edit);
        s
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_flags(&args);
    if args.print_config {
        print!("{}", cfg.render());
        return Ok(());
    }
    let pairs_path = args.pairs.expect("required unless --print-config");
    let out_path = args.out.expect("required unless --print-config");
    let options = CorpusOptions {
        lowercase: args.lowercase,
    };
    let mut corpus = Corpus::load_pairs(&pairs_path, options)?;
    if let Some(lex) = &args.lexicon {
        corpus.attach_lexicon_file(lex, options)?;
    }
    if corpus.pairs.is_empty() {
        return Err(CliError(format!(
            "{}: no sentence pairs to train on",
            pairs_path.display()
        )));
    }

    let shape = ModelShape {
        n_rules: cfg.rules,
        fanout: cfg.fanout,
        max_depth: cfg.max_depth,
    };
    let anneal_cfg = AnnealConfig {
        move_budget: cfg.budget,
        sweep_size: cfg.sweep,
        cooling_alpha: cfg.alpha,
        t0: cfg.t0,
        target_acceptance: cfg.target_acceptance,
        move_weights: cfg.weights,
        restarts: cfg.restarts,
        rng_seed: cfg.seed,
        lexicon_mode: cfg.lexicon_mode,
        insertion_moves_enabled: cfg.enable_insertions,
        init: InitOptions {
            marker_pool: cfg.marker_pool,
            dict_init: cfg.dict_init,
            ..InitOptions::default()
        },
    };
    let (model, history) = run_restarts(&corpus, shape, &anneal_cfg, cfg.jobs)?;
    save(&model, &out_path)?;
    let history_path = args
        .history
        .unwrap_or_else(|| out_path.with_extension("history.csv"));
    marktrans::anneal::write_history_csv(&history, &history_path)?;
    eprintln!(
        "best objective {} after {} recorded steps; model written to {}",
        history.best_objective,
        history.records.len(),
        out_path.display()
    );
    let r = report(&model, &corpus)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        print!("{}", r.to_text());
    }
    Ok(())
}

/// Re-interns unknown input words into a session copy of the source
/// vocabulary so they pass through translation and display verbatim.
/// Returns the extended model and the words that were added.
fn extend_for_input<'a>(
    model: &TransferFunction,
    words: impl Iterator<Item = &'a str>,
) -> (TransferFunction, Vec<String>) {
    let mut extended: Option<Vocabulary> = None;
    let mut added = Vec::new();
    for w in words {
        if model.source_vocab.get(w).is_none() {
            let v = extended.get_or_insert_with(|| (*model.source_vocab).clone());
            if v.get(w).is_none() {
                v.intern(w);
                added.push(w.to_string());
            }
        }
    }
    match extended {
        None => (model.clone(), added),
        Some(v) => {
            let mut m = model.clone();
            m.source_vocab = Arc::new(v);
            (m, added)
        }
    }
}

fn cmd_translate(args: TranslateArgs) -> Result<(), CliError> {
    let model = load_standalone(&args.model)?;
    let options = CorpusOptions {
        lowercase: args.lowercase,
    };
    let text = match &args.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in text.lines() {
        let tokens = tokenize(line, options);
        let (session, added) = extend_for_input(&model, tokens.iter().map(String::as_str));
        for w in &added {
            eprintln!("warning: `{w}` is not in the model vocabulary; passing it through");
        }
        let ids: Vec<_> = tokens
            .iter()
            .map(|w| session.source_vocab.get(w).expect("interned above"))
            .collect();
        if args.explain {
            for stage in explain(&session, &ids).stages {
                eprintln!("{stage}");
            }
        }
        let translated = translate_out(&session, &ids);
        writeln!(out, "{}", render_out(&session, &translated))?;
    }
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let model = load_standalone(&args.model)?;
    let options = CorpusOptions {
        lowercase: args.lowercase,
    };
    let reference = Corpus::load_pairs(&args.pairs, options)?;
    if reference.pairs.is_empty() {
        return Err(CliError(format!(
            "{}: no sentence pairs to score",
            args.pairs.display()
        )));
    }
    // re-intern the reference against the model's id space, extending the
    // session vocabularies for words the model has never seen
    let mut source = (*model.source_vocab).clone();
    let mut target = (*model.target_vocab).clone();
    let mut pairs = Vec::with_capacity(reference.pairs.len());
    for pair in &reference.pairs {
        let src_text = detokenize(&pair.source, &reference.source_vocab);
        let tgt_text = detokenize(&pair.target, &reference.target_vocab);
        pairs.push(SentencePair {
            source: src_text.split_whitespace().map(|w| source.intern(w)).collect(),
            target: tgt_text.split_whitespace().map(|w| target.intern(w)).collect(),
        });
    }
    let mut session = model.clone();
    session.source_vocab = Arc::new(source.clone());
    session.target_vocab = Arc::new(target.clone());
    let corpus = Corpus {
        source_vocab: source,
        target_vocab: target,
        pairs,
        lexicon: None,
    };
    let r = report(&session, &corpus)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        print!("{}", r.to_text());
    }
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<(), CliError> {
    let model = load_standalone(&args.model)?;
    print!("{}", dump_human(&model));
    Ok(())
}

fn cmd_normalize(args: NormalizeArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.grammar)
        .map_err(|e| CliError(format!("cannot read {}: {e}", args.grammar.display())))?;
    let g = parse_cfg(&text)?;
    let converted = match args.form {
        FormArg::Gnf => {
            let (gnf, report) = to_gnf(&g)?;
            if report.epsilon_in_language {
                eprintln!(
                    "note: the empty string was in the language and is not expressible in this form"
                );
            }
            gnf
        }
        FormArg::Mnf => to_mnf(&g)?,
        FormArg::Mnf2 => to_mnf_bounded(&g)?,
    };
    print!("{converted}");
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.grammar)
        .map_err(|e| CliError(format!("cannot read {}: {e}", args.grammar.display())))?;
    let g = parse_cfg(&text)?;
    let words = enumerate_language(&g, args.max_len)?;
    let mut sorted: Vec<&String> = words.iter().collect();
    sorted.sort_by_key(|w| (w.split_whitespace().count(), w.as_str()));
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for w in sorted {
        writeln!(out, "{w}")?;
    }
    Ok(())
}
