//! Experiment driver: one strategy, one data source, one report directory.
//!
//! Everything is computed in memory first; files are written only after
//! training and evaluation succeed, so a failed run leaves no partial report.

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub use config::{DataSource, ExperimentConfig, KeyValues, Strategy};
pub use report::render_table;

use crate::corpus::{parse_conll, spans_to_tags, Corpus, EntitySpan, Scheme, TagSequence};
use crate::crf::{train, CrfModel};
use crate::error::{Error, Result};
use crate::eval::{evaluate, predict, Metrics, Preprocess};
use crate::synth::{generate, vocabulary_overlap, Overlap};
use crate::transforms::{augment, make_variant, CaseVariant};
use crate::truecase::{train_truecaser, Truecaser};

pub const MODEL_FILE: &str = "model.bin";
pub const TRUECASER_FILE: &str = "truecaser.bin";
pub const REPORT_FILE: &str = "report.txt";
pub const METRICS_FILE: &str = "metrics.kv";

/// Train and test corpora as loaded, before any strategy is applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedData {
    pub train: Corpus,
    pub test: Corpus,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_data(source: &DataSource) -> Result<LoadedData> {
    match source {
        DataSource::Files { train, test, parse } => {
            let load = |p: &PathBuf| -> Result<Corpus> {
                let mut c = parse_conll(&read_file(p)?, parse)?;
                c.provenance = format!("{} ({})", p.display(), c.provenance);
                Ok(c)
            };
            Ok(LoadedData {
                train: load(train)?,
                test: load(test)?,
            })
        }
        DataSource::Synthetic(cfg) => {
            let (train, test) = generate(cfg)?;
            Ok(LoadedData { train, test })
        }
    }
}

/// Mapping from the model's entity types to the test set's types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeMap {
    map: BTreeMap<String, String>,
}

impl TypeMap {
    /// One `MODEL_TYPE TEST_TYPE` pair per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("type map lines need two columns, got {line:?}"),
                });
            }
            map.insert(cols[0].to_string(), cols[1].to_string());
        }
        Ok(TypeMap { map })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        TypeMap {
            map: pairs.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    fn targets(&self) -> BTreeSet<&str> {
        self.map.values().map(String::as_str).collect()
    }
}

/// Entity types removed by a type map, with mention counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DroppedTypes {
    pub predicted: BTreeMap<String, usize>,
    pub gold: BTreeMap<String, usize>,
}

fn remap(tags: &TagSequence, f: impl Fn(&str) -> Option<String>, dropped: &mut BTreeMap<String, usize>) -> TagSequence {
    let spans: Vec<EntitySpan> = tags
        .spans()
        .into_iter()
        .filter_map(|s| match f(&s.entity_type) {
            Some(t) => Some(EntitySpan::new(s.start, s.end, t)),
            None => {
                *dropped.entry(s.entity_type).or_default() += 1;
                None
            }
        })
        .collect();
    spans_to_tags(&spans, tags.len(), Scheme::Iobes).expect("remapped spans stay disjoint and in range")
}

/// Per-variant metrics for a trained model, with an optional type map
/// applied to predictions and gold before scoring.
pub fn score_grid(
    model: &CrfModel,
    preprocess: &Preprocess<'_>,
    test: &Corpus,
    type_map: Option<&TypeMap>,
) -> Result<(BTreeMap<CaseVariant, Metrics>, DroppedTypes)> {
    let mut dropped = DroppedTypes::default();
    let mut gold: Vec<TagSequence> = test.iter().map(|a| a.gold().clone()).collect();
    if let Some(map) = type_map {
        let targets = map.targets();
        gold = gold
            .iter()
            .map(|g| remap(g, |t| targets.contains(t).then(|| t.to_string()), &mut dropped.gold))
            .collect();
    }
    let mut grid = BTreeMap::new();
    for v in CaseVariant::ALL {
        let mut pred = predict(model, preprocess, &make_variant(test, v));
        if let Some(map) = type_map {
            let mut counts = BTreeMap::new();
            pred = pred.iter().map(|p| remap(p, |t| map.map.get(t).cloned(), &mut counts)).collect();
            // Reported for the unmodified test set only.
            if v == CaseVariant::Original {
                dropped.predicted = counts;
            }
        }
        grid.insert(v, evaluate(&pred, &gold)?);
    }
    Ok((grid, dropped))
}

/// Everything a finished run produced, held in memory.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub strategy: Strategy,
    pub report_dir: PathBuf,
    pub grid: BTreeMap<CaseVariant, Metrics>,
    /// Sentences the model was trained on, after the strategy was applied.
    pub train_sentences: usize,
    pub overlap: Overlap,
    pub dropped: DroppedTypes,
    pub model: CrfModel,
    pub truecaser: Option<Truecaser>,
    pub report: String,
    pub metrics: String,
}

impl ExperimentOutcome {
    /// Writes model, optional truecaser, report and metrics. Each file is
    /// staged under a temporary name and renamed into place.
    pub fn write(&self) -> Result<()> {
        let dir = &self.report_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<(&str, Vec<u8>)> = vec![(MODEL_FILE, self.model.to_bytes())];
        if let Some(t) = &self.truecaser {
            files.push((TRUECASER_FILE, t.to_bytes()));
        }
        files.push((REPORT_FILE, self.report.clone().into_bytes()));
        files.push((METRICS_FILE, self.metrics.clone().into_bytes()));
        let mut staged = Vec::new();
        for (name, bytes) in &files {
            let tmp = dir.join(format!(".{name}.tmp"));
            if let Err(e) = std::fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = std::fs::remove_file(t);
                }
                return Err(Error::io(&tmp, e));
            }
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, dest) in staged {
            std::fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
        }
        Ok(())
    }
}

/// Runs one experiment entirely in memory on already-loaded data.
pub fn execute(cfg: &ExperimentConfig, data: &LoadedData) -> Result<ExperimentOutcome> {
    if data.train.is_empty() {
        return Err(Error::InvalidInput("training corpus is empty".into()));
    }
    if data.test.is_empty() {
        return Err(Error::InvalidInput("test corpus is empty".into()));
    }
    let type_map = cfg
        .type_map
        .as_ref()
        .map(|p| read_file(p).and_then(|t| TypeMap::parse(&t)))
        .transpose()?;

    let training = match cfg.strategy {
        Strategy::Baseline | Strategy::Truecasing => data.train.clone(),
        Strategy::Caseless => make_variant(&data.train, CaseVariant::Lower),
        Strategy::Augment => augment(&data.train),
    };
    let truecaser = match cfg.strategy {
        Strategy::Truecasing => Some(train_truecaser(&data.train)?),
        _ => None,
    };
    let model = train(&training, cfg.strategy.template(), &cfg.train)?;
    let preprocess = match (&cfg.strategy, &truecaser) {
        (Strategy::Caseless, _) => Preprocess::Lowercase,
        (_, Some(t)) => Preprocess::Truecase(t),
        _ => Preprocess::None,
    };
    let (grid, dropped) = score_grid(&model, &preprocess, &data.test, type_map.as_ref())?;
    let overlap = vocabulary_overlap(&data.train, &data.test);

    let mut outcome = ExperimentOutcome {
        strategy: cfg.strategy,
        report_dir: cfg.report_dir.clone(),
        grid,
        train_sentences: training.len(),
        overlap,
        dropped,
        model,
        truecaser,
        report: String::new(),
        metrics: String::new(),
    };
    outcome.report = report::render_report(cfg, data, &outcome);
    outcome.metrics = report::render_metrics(&outcome);
    Ok(outcome)
}

/// Loads data, runs the experiment and writes its report directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let data = load_data(&cfg.data)?;
    let outcome = execute(cfg, &data)?;
    outcome.write()?;
    Ok(outcome)
}

/// Result of a multi-strategy run.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub runs: Vec<ExperimentOutcome>,
    /// Strategies as rows, case variants as columns, F1 in percent.
    pub table: String,
}

/// Runs several experiments that must share one test corpus and combines
/// their F1 scores into one table.
pub fn run_grid(configs: &[ExperimentConfig]) -> Result<GridOutcome> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("grid needs at least one experiment".into()))?;
    let mut loaded = vec![load_data(&first.data)?];
    for cfg in &configs[1..] {
        let data = if cfg.data == first.data {
            loaded[0].clone()
        } else {
            load_data(&cfg.data)?
        };
        if data.test.sentences != loaded[0].test.sentences {
            return Err(Error::Config(format!(
                "experiment {} ({}) does not share the test corpus of the first experiment",
                loaded.len(),
                cfg.strategy
            )));
        }
        loaded.push(data);
    }
    let runs = configs
        .iter()
        .zip(&loaded)
        .map(|(cfg, data)| execute(cfg, data))
        .collect::<Result<Vec<_>>>()?;
    for run in &runs {
        run.write()?;
    }
    let rows: Vec<(String, BTreeMap<CaseVariant, Metrics>)> =
        runs.iter().map(|r| (r.strategy.label().to_string(), r.grid.clone())).collect();
    let table = render_table(&rows);
    Ok(GridOutcome { runs, table })
}
