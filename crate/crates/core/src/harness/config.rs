//! Plain-text `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::{ParseOptions, Scheme};
use crate::crf::{Optimizer, TrainConfig};
use crate::error::{Error, Result};
use crate::features::TemplateSet;
use crate::synth::SynthConfig;

/// How training and test data are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Unmodified data, case-aware features.
    Baseline,
    /// Lowercased training and test input, case-agnostic features.
    Caseless,
    /// Unmodified training data, truecased test input.
    Truecasing,
    /// Training data plus its lowercased and uppercased copies.
    Augment,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Baseline,
        Strategy::Caseless,
        Strategy::Truecasing,
        Strategy::Augment,
    ];

    pub fn template(self) -> TemplateSet {
        match self {
            Strategy::Caseless => TemplateSet::CaseAgnostic,
            _ => TemplateSet::CaseAware,
        }
    }

    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Baseline => "Baseline",
            Strategy::Caseless => "Caseless",
            Strategy::Truecasing => "Truecasing",
            Strategy::Augment => "DA",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Baseline => "baseline",
            Strategy::Caseless => "caseless",
            Strategy::Truecasing => "truecasing",
            Strategy::Augment => "augment",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Strategy::Baseline),
            "caseless" => Ok(Strategy::Caseless),
            "truecasing" | "truecase" => Ok(Strategy::Truecasing),
            "augment" | "da" | "augmentation" => Ok(Strategy::Augment),
            _ => Err(Error::Config(format!(
                "unknown strategy {s:?} (expected baseline, caseless, truecasing or augment)"
            ))),
        }
    }
}

/// Ordered `key = value` pairs. Later assignments override earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(KeyValues(map))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0.insert(key.into(), value.into());
    }

    /// Applies a `key=value` override.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not `key=value`")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("invalid value {v:?} for {key}: {e}")))
            })
            .transpose()
    }
}

const KNOWN_KEYS: &[&str] = &[
    "strategy",
    "train",
    "test",
    "synth",
    "token_column",
    "tag_column",
    "scheme",
    "l2_sigma",
    "max_iterations",
    "max_epochs",
    "optimizer",
    "learning_rate",
    "tolerance",
    "min_count",
    "seed",
    "report_dir",
    "type_map",
];

const SYNTH_KEYS: &[&str] = &[
    "synth.seed",
    "synth.train_sentences",
    "synth.test_sentences",
    "synth.noise_rate",
    "synth.ambiguity_rate",
    "synth.unseen_fraction",
    "synth.invented_names",
];

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        train: PathBuf,
        test: PathBuf,
        parse: ParseOptions,
    },
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub data: DataSource,
    pub train: TrainConfig,
    pub report_dir: PathBuf,
    pub seed: u64,
    /// Maps the model's entity types onto the test set's (transfer runs).
    pub type_map: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        for (key, _) in kv.iter() {
            if !KNOWN_KEYS.contains(&key) && !SYNTH_KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown configuration key {key:?}")));
            }
        }
        let strategy: Strategy = kv
            .parsed("strategy")?
            .ok_or_else(|| Error::Config("missing `strategy`".into()))?;
        let seed: u64 = kv.parsed("seed")?.unwrap_or(0);

        let uses_synth = kv.parsed::<bool>("synth")?.unwrap_or(false) || kv.iter().any(|(k, _)| k.starts_with("synth."));
        let has_files = kv.get("train").is_some() || kv.get("test").is_some();
        let data = match (uses_synth, has_files) {
            (true, true) => {
                return Err(Error::Config(
                    "give either train/test files or synthetic data settings, not both".into(),
                ))
            }
            (false, false) => return Err(Error::Config("no data source: set train and test, or synth = true".into())),
            (false, true) => {
                let path = |key: &str| {
                    kv.get(key)
                        .map(PathBuf::from)
                        .ok_or_else(|| Error::Config(format!("missing `{key}`")))
                };
                let mut parse = ParseOptions::default();
                if let Some(c) = kv.parsed("token_column")? {
                    parse.token_column = c;
                }
                parse.tag_column = kv.parsed("tag_column")?;
                parse.scheme = kv.parsed::<Scheme>("scheme")?;
                DataSource::Files {
                    train: path("train")?,
                    test: path("test")?,
                    parse,
                }
            }
            (true, false) => {
                let mut synth = SynthConfig::new(kv.parsed("synth.seed")?.unwrap_or(seed));
                if let Some(v) = kv.parsed("synth.train_sentences")? {
                    synth.train_sentences = v;
                }
                if let Some(v) = kv.parsed("synth.test_sentences")? {
                    synth.test_sentences = v;
                }
                if let Some(v) = kv.parsed("synth.noise_rate")? {
                    synth.noise_rate = v;
                }
                if let Some(v) = kv.parsed("synth.ambiguity_rate")? {
                    synth.ambiguity_rate = v;
                }
                if let Some(v) = kv.parsed("synth.unseen_fraction")? {
                    synth.unseen_fraction = v;
                }
                if let Some(v) = kv.parsed("synth.invented_names")? {
                    synth.invented_names_per_type = v;
                }
                synth.validate()?;
                DataSource::Synthetic(synth)
            }
        };

        let defaults = TrainConfig::default();
        let train = TrainConfig {
            l2_sigma: kv.parsed("l2_sigma")?.unwrap_or(defaults.l2_sigma),
            max_epochs: kv
                .parsed("max_iterations")?
                .or(kv.parsed("max_epochs")?)
                .unwrap_or(defaults.max_epochs),
            optimizer: kv.parsed::<Optimizer>("optimizer")?.unwrap_or(defaults.optimizer),
            learning_rate: kv.parsed("learning_rate")?.unwrap_or(defaults.learning_rate),
            tolerance: kv.parsed("tolerance")?.unwrap_or(defaults.tolerance),
            seed,
            min_count: kv.parsed("min_count")?.unwrap_or(defaults.min_count),
        };
        train.validate()?;

        let report_dir = kv
            .get("report_dir")
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config("missing `report_dir`".into()))?;
        Ok(ExperimentConfig {
            strategy,
            data,
            train,
            report_dir,
            seed,
            type_map: kv.get("type_map").map(PathBuf::from),
        })
    }
}
