use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use casener::corpus::{parse_conll, write_conll, Corpus, ParseOptions, Scheme, Sentence};
use casener::crf::{self, Optimizer, TrainConfig};
use casener::eval::{evaluate, predict, Preprocess};
use casener::features::TemplateSet;
use casener::harness::{self, ExperimentConfig, KeyValues, Strategy, TypeMap};
use casener::synth::{generate, SynthConfig};
use casener::transforms::augment;
use casener::truecase::{train_truecaser, Truecaser};
use casener::{Error, Result};

#[derive(Parser)]
#[command(name = "casener", version, about = "Capitalization-robust CRF named entity tagger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a CRF model on a CoNLL file.
    Train(TrainArgs),
    /// Tag whitespace-tokenized text, one sentence per line.
    Tag(TagArgs),
    /// Score a model on a CoNLL test file, or compare two tag files.
    Eval(EvalArgs),
    /// Write a CoNLL file plus its lowercased and uppercased copies.
    Augment {
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        parse: ParseArgs,
    },
    /// Train or apply a truecaser.
    Truecase {
        #[command(subcommand)]
        command: TruecaseCommand,
    },
    /// Generate a synthetic train/test pair.
    Synth(SynthArgs),
    /// Run one experiment from a key-value config file.
    Experiment(ExperimentArgs),
    /// Run several strategies on the same data and print one table.
    Grid(GridArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// Token column (0-based).
    #[arg(long, default_value_t = 0)]
    token_column: usize,
    /// Tag column (0-based); the last column when omitted.
    #[arg(long)]
    tag_column: Option<usize>,
    /// Tagging scheme of the input; detected when omitted.
    #[arg(long)]
    scheme: Option<Scheme>,
}

impl ParseArgs {
    fn options(&self) -> ParseOptions {
        ParseOptions {
            token_column: self.token_column,
            tag_column: self.tag_column,
            scheme: self.scheme,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// CoNLL training file.
    train: PathBuf,
    /// Output model file.
    #[arg(short, long)]
    out: PathBuf,
    /// Feature template set: case-aware or case-agnostic.
    #[arg(long, default_value = "case-aware")]
    template: TemplateSet,
    /// Lowercase the training data first.
    #[arg(long)]
    lowercase: bool,
    /// Add lowercased and uppercased copies of every sentence.
    #[arg(long)]
    augment: bool,
    #[arg(long, default_value_t = 1.0)]
    l2_sigma: f64,
    #[arg(long, default_value = "lbfgs")]
    optimizer: Optimizer,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[command(flatten)]
    parse: ParseArgs,
}

#[derive(Args)]
struct Preprocessing {
    /// Truecaser file applied to each sentence before tagging.
    #[arg(long, conflicts_with = "lowercase")]
    truecaser: Option<PathBuf>,
    /// Lowercase each sentence before tagging.
    #[arg(long)]
    lowercase: bool,
}

impl Preprocessing {
    fn load(&self) -> Result<Option<Truecaser>> {
        self.truecaser
            .as_ref()
            .map(|p| Truecaser::from_bytes(&read_bytes(p)?))
            .transpose()
    }

    fn mode<'a>(&self, truecaser: &'a Option<Truecaser>) -> Preprocess<'a> {
        match truecaser {
            Some(t) => Preprocess::Truecase(t),
            None if self.lowercase => Preprocess::Lowercase,
            None => Preprocess::None,
        }
    }
}

#[derive(Args)]
struct TagArgs {
    #[arg(short, long)]
    model: PathBuf,
    /// Input text; standard input when omitted.
    input: Option<PathBuf>,
    #[command(flatten)]
    pre: Preprocessing,
}

#[derive(Args)]
struct EvalArgs {
    /// CoNLL gold file.
    gold: PathBuf,
    /// Model to tag the gold tokens with.
    #[arg(short, long, required_unless_present = "pred", conflicts_with = "pred")]
    model: Option<PathBuf>,
    /// CoNLL file of predicted tags, aligned with the gold file.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Also score lowercased and uppercased versions of the test set.
    #[arg(long, requires = "model")]
    grid: bool,
    /// Entity type mapping (`MODEL_TYPE TEST_TYPE` per line).
    #[arg(long, requires = "model")]
    type_map: Option<PathBuf>,
    #[command(flatten)]
    pre: Preprocessing,
    #[command(flatten)]
    parse: ParseArgs,
}

#[derive(Subcommand)]
enum TruecaseCommand {
    /// Learn case statistics from the tokens of a CoNLL file.
    Train {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        parse: ParseArgs,
    },
    /// Recase whitespace-tokenized text, one sentence per line.
    Apply {
        #[arg(short, long)]
        model: PathBuf,
        input: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
    #[arg(long)]
    train_sentences: Option<usize>,
    #[arg(long)]
    test_sentences: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    ambiguity_rate: Option<f64>,
    #[arg(long)]
    unseen_fraction: Option<f64>,
}

#[derive(Args)]
struct Overrides {
    /// Key-value config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config entry (`key=value`); may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

impl Overrides {
    fn key_values(&self) -> Result<KeyValues> {
        let mut kv = match &self.config {
            Some(p) => KeyValues::from_file(p)?,
            None => KeyValues::default(),
        };
        for s in &self.set {
            kv.set_assignment(s)?;
        }
        if let Some(seed) = self.seed {
            kv.set("seed", seed.to_string());
        }
        if let Some(dir) = &self.report_dir {
            kv.set("report_dir", dir.display().to_string());
        }
        Ok(kv)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    strategy: Option<Strategy>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Comma-separated strategies, one table row each.
    #[arg(long, value_delimiter = ',', default_value = "baseline,caseless,truecasing,augment")]
    strategies: Vec<Strategy>,
    /// Also write the table to this file.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => read_text(p),
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| io_error(Path::new("<stdin>"), e))?;
            Ok(s)
        }
    }
}

fn read_corpus(path: &Path, parse: &ParseArgs) -> Result<Corpus> {
    parse_conll(&read_text(path)?, &parse.options())
}

fn sentences(text: &str) -> Result<Vec<Sentence>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(Sentence::from_text)
        .collect()
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut corpus = read_corpus(&a.train, &a.parse)?;
    if a.lowercase {
        corpus = casener::transforms::make_variant(&corpus, casener::transforms::CaseVariant::Lower);
    }
    if a.augment {
        corpus = augment(&corpus);
    }
    let cfg = TrainConfig {
        l2_sigma: a.l2_sigma,
        max_epochs: a.max_iterations,
        optimizer: a.optimizer,
        learning_rate: a.learning_rate,
        tolerance: a.tolerance,
        seed: a.seed,
        min_count: a.min_count,
    };
    cfg.validate()?;
    let model = crf::train(&corpus, a.template, &cfg)?;
    write_file(&a.out, &model.to_bytes())?;
    eprintln!(
        "trained on {} sentences, {} features, {} iterations",
        corpus.len(),
        model.feature_map().num_features(),
        model.metadata().iterations
    );
    Ok(())
}

fn tag_cmd(a: &TagArgs) -> Result<()> {
    let model = crf::load(&read_bytes(&a.model)?)?;
    let truecaser = a.pre.load()?;
    let pre = a.pre.mode(&truecaser);
    let mut out = String::new();
    for s in sentences(&read_input(a.input.as_deref())?)? {
        let tags = model.decode(&pre.apply(&s));
        for (t, tag) in s.tokens().iter().zip(tags.tags()) {
            out.push_str(t.as_str());
            out.push(' ');
            out.push_str(tag);
            out.push('\n');
        }
        out.push('\n');
    }
    emit(None, &out)
}

fn print_metrics(m: &casener::eval::Metrics) -> String {
    let mut out = format!(
        "overall  precision {:.2}  recall {:.2}  F1 {:.2}  ({} correct, {} predicted, {} gold)\n",
        100.0 * m.precision(),
        100.0 * m.recall(),
        100.0 * m.f1(),
        m.overall.true_positives,
        m.overall.predicted_count,
        m.overall.gold_count
    );
    for (ty, c) in &m.per_type {
        out.push_str(&format!(
            "{ty:<8} precision {:.2}  recall {:.2}  F1 {:.2}  ({} correct, {} predicted, {} gold)\n",
            100.0 * c.precision(),
            100.0 * c.recall(),
            100.0 * c.f1(),
            c.true_positives,
            c.predicted_count,
            c.gold_count
        ));
    }
    out
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let gold = read_corpus(&a.gold, &a.parse)?;
    let gold_tags: Vec<_> = gold.iter().map(|s| s.gold().clone()).collect();
    if let Some(pred_path) = &a.pred {
        let pred = read_corpus(pred_path, &a.parse)?;
        let pred_tags: Vec<_> = pred.iter().map(|s| s.gold().clone()).collect();
        return emit(None, &print_metrics(&evaluate(&pred_tags, &gold_tags)?));
    }
    let model = crf::load(&read_bytes(a.model.as_ref().expect("clap requires a model"))?)?;
    let truecaser = a.pre.load()?;
    let pre = a.pre.mode(&truecaser);
    let type_map = a
        .type_map
        .as_ref()
        .map(|p| read_text(p).and_then(|t| TypeMap::parse(&t)))
        .transpose()?;
    if a.grid || type_map.is_some() {
        let (grid, _) = harness::score_grid(&model, &pre, &gold, type_map.as_ref())?;
        if a.grid {
            return emit(None, &harness::render_table(&[("Model".to_string(), grid)]));
        }
        let original = &grid[&casener::transforms::CaseVariant::Original];
        return emit(None, &print_metrics(original));
    }
    let pred = predict(&model, &pre, &gold);
    emit(None, &print_metrics(&evaluate(&pred, &gold_tags)?))
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::new(a.seed);
    if let Some(v) = a.train_sentences {
        cfg.train_sentences = v;
    }
    if let Some(v) = a.test_sentences {
        cfg.test_sentences = v;
    }
    if let Some(v) = a.noise_rate {
        cfg.noise_rate = v;
    }
    if let Some(v) = a.ambiguity_rate {
        cfg.ambiguity_rate = v;
    }
    if let Some(v) = a.unseen_fraction {
        cfg.unseen_fraction = v;
    }
    let (train, test) = generate(&cfg)?;
    write_file(&a.train_out, write_conll(&train).as_bytes())?;
    write_file(&a.test_out, write_conll(&test).as_bytes())
}

fn experiment_cmd(a: &ExperimentArgs) -> Result<()> {
    let mut kv = a.overrides.key_values()?;
    if let Some(s) = a.strategy {
        kv.set("strategy", s.to_string());
    }
    let cfg = ExperimentConfig::from_key_values(&kv)?;
    let outcome = harness::run_experiment(&cfg)?;
    emit(None, &outcome.report)
}

fn grid_cmd(a: &GridArgs) -> Result<()> {
    let base = a.overrides.key_values()?;
    let root = base
        .get("report_dir")
        .map(PathBuf::from)
        .ok_or_else(|| Error::Config("missing `report_dir`".into()))?;
    let configs = a
        .strategies
        .iter()
        .map(|s| {
            let mut kv = base.clone();
            kv.set("strategy", s.to_string());
            kv.set("report_dir", root.join(s.to_string()).display().to_string());
            ExperimentConfig::from_key_values(&kv)
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = harness::run_grid(&configs)?;
    if let Some(p) = &a.table {
        write_file(p, grid.table.as_bytes())?;
    }
    emit(None, &grid.table)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train_cmd(&a),
        Command::Tag(a) => tag_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Augment { input, out, parse } => {
            let corpus = augment(&read_corpus(&input, &parse)?);
            emit(out.as_deref(), &write_conll(&corpus))
        }
        Command::Truecase { command } => match command {
            TruecaseCommand::Train { input, out, parse } => {
                let t = train_truecaser(&read_corpus(&input, &parse)?)?;
                write_file(&out, &t.to_bytes())
            }
            TruecaseCommand::Apply { model, input } => {
                let t = Truecaser::from_bytes(&read_bytes(&model)?)?;
                let mut out = String::new();
                for s in sentences(&read_input(input.as_deref())?)? {
                    out.push_str(&t.truecase(&s).to_string());
                    out.push('\n');
                }
                emit(None, &out)
            }
        },
        Command::Synth(a) => synth_cmd(&a),
        Command::Experiment(a) => experiment_cmd(&a),
        Command::Grid(a) => grid_cmd(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
