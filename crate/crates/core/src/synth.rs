//! Seeded synthetic NER corpora.
//!
//! Sentences are instantiated from context templates whose `{TYPE}` slots are
//! filled with gazetteer names. A share of every gazetteer (and of the common
//! noun list) is held out of the training split so the test split contains
//! unseen names. `{AMB}` slots take either a capitalized entity or a
//! lowercase common noun; the homograph pairs among them (`Apple` / `apple`)
//! can only be told apart by capitalization.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{spans_to_tags, AnnotatedSentence, Corpus, EntitySpan, Scheme, Sentence, Token};
use crate::error::{Error, Result};

const AMBIGUOUS_SLOT: &str = "{AMB}";

#[derive(Debug, Clone, PartialEq)]
pub struct Gazetteer {
    pub entity_type: String,
    /// Space-separated tokens in canonical capitalization.
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub gazetteers: Vec<Gazetteer>,
    /// Invented names added to each gazetteer at generation time.
    pub invented_names_per_type: usize,
    /// Templates with `{TYPE}` slots; the first token is capitalized.
    pub templates: Vec<String>,
    /// Templates with one `{AMB}` slot, filled with a name that is also a
    /// common noun, written either as the entity or as the lowercase noun.
    pub ambiguous_templates: Vec<String>,
    /// Lowercase common nouns. Those matching a single-token name are the
    /// homographs used in `{AMB}` slots.
    pub common_nouns: Vec<String>,
    /// Probability that an entity mention is written all-lowercase.
    pub noise_rate: f64,
    /// Share of sentences drawn from the ambiguous templates.
    pub ambiguity_rate: f64,
    /// Share of names and common nouns held out of the training split.
    pub unseen_fraction: f64,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

const FIRST_NAMES: &[&str] = &[
    "John", "Maria", "Peter", "Anna", "David", "Laura", "Michael", "Sofia", "James", "Elena", "Thomas", "Clara",
    "Robert", "Julia", "Daniel", "Sarah", "Paul", "Emma", "George", "Nina", "Rose", "Mark", "Bill", "Hope",
    "Grace", "Frank", "Dawn", "Jack", "Victor", "Irene",
];

const LAST_NAMES: &[&str] = &[
    "Smith", "Garcia", "Miller", "Novak", "Jensen", "Rossi", "Kowalski", "Schmidt", "Dubois", "Tanaka", "Baker",
    "Hunter", "Young", "Brown", "Stone", "Fisher", "Mason", "Walker", "Lopez", "Nilsson", "Costa", "Weber",
    "Murphy", "Ivanov", "Silva",
];

const LOCATIONS: &[&str] = &[
    "Paris", "Berlin", "London", "Madrid", "New York", "Ohio", "Tokyo", "Cairo", "Lima", "Oslo", "Vienna",
    "Texas", "Brazil", "Canada", "Kenya", "Sydney", "Turkey", "Nice", "Reading", "Bath", "Mobile", "Buffalo",
    "Orange", "China", "Jordan", "Chad", "Los Angeles", "Hong Kong", "South Africa", "Raging Waters",
];

const ORGANIZATIONS: &[&str] = &[
    "Apple", "Shell", "Oracle", "Target", "Amazon", "Gap", "Reuters", "Siemens", "Toyota", "Nestle",
    "United Nations", "European Union", "World Bank", "Red Cross", "General Motors", "Real Madrid",
    "Deutsche Bank", "Bayern Munich", "Ajax", "Barclays", "Fiat", "Boeing", "Nokia", "Samsung", "Unilever",
    "NATO", "IBM", "BBC", "FIFA", "NASA", "OPEC", "UNICEF", "BMW", "HSBC", "UEFA", "CNN", "IMF",
];

const COMMON_NOUNS: &[&str] = &[
    "rose", "mark", "bill", "hope", "grace", "frank", "dawn", "apple", "shell", "oracle", "target", "amazon",
    "gap", "turkey", "nice", "reading", "bath", "mobile", "buffalo", "orange", "china", "jordan", "chad",
    "weather", "music", "football", "taxes", "coffee", "gardening", "history", "chess", "poetry", "the budget",
    "the election", "the weekend", "dinner", "the traffic", "prices", "the film", "the game", "cooking",
    "travel", "the news", "school", "work", "the rain", "the plan", "money", "art", "science", "the match",
    "the market", "energy", "the summer", "winter", "holidays", "health", "the book",
];

const TEMPLATES: &[&str] = &[
    "{PER} said on Monday that {ORG} would expand .",
    "{PER} met {PER} in {LOC} on Tuesday .",
    "the mayor of {LOC} praised {ORG} .",
    "shares of {ORG} fell after {PER} resigned .",
    "{ORG} opened a new office in {LOC} last year .",
    "according to {PER} , the talks in {LOC} went well .",
    "{LOC} beat {LOC} 2 - 1 on Sunday .",
    "police in {LOC} arrested a man on Friday .",
    "{PER} , a spokesman for {ORG} , declined to comment .",
    "officials from {ORG} flew to {LOC} .",
    "she works for {ORG} in {LOC} .",
    "we visited {LOC} with {PER} .",
    "the report was published by {ORG} .",
    "{PER} scored twice for {ORG} .",
    "it rained all week in {LOC} .",
    "he told {PER} about the plan .",
    "prices rose sharply in {LOC} this month .",
    "the company hired {PER} as chief executive .",
    "{ORG} and {ORG} signed a deal in {LOC} .",
    "talks between {LOC} and {LOC} resumed on Wednesday .",
    "a statement from {ORG} said profits rose .",
    "{PER} will travel to {LOC} next week .",
    "the market was quiet on Thursday .",
    "analysts expect the rate to rise again .",
    "thousands of people marched through the city .",
    "{PER} thanked {PER} after the match .",
    "the court in {LOC} fined {ORG} 5 million dollars .",
    "fans of {ORG} waited outside the stadium .",
];

const AMBIGUOUS_TEMPLATES: &[&str] = &[
    "they talked about {AMB} for hours .",
    "nobody expected {AMB} to be so popular .",
    "everyone was talking about {AMB} again .",
    "I read a story about {AMB} yesterday .",
    "there is something special about {AMB} .",
    "we spent the evening discussing {AMB} .",
];

impl SynthConfig {
    /// Built-in English-like gazetteers and templates.
    pub fn new(seed: u64) -> Self {
        let mut people = strings(FIRST_NAMES);
        people.extend(strings(LAST_NAMES));
        for (i, first) in FIRST_NAMES.iter().enumerate() {
            for last in LAST_NAMES.iter().skip(i % 5).step_by(5) {
                people.push(format!("{first} {last}"));
            }
        }
        SynthConfig {
            seed,
            train_sentences: 2000,
            test_sentences: 500,
            gazetteers: vec![
                Gazetteer {
                    entity_type: "PER".into(),
                    names: people,
                },
                Gazetteer {
                    entity_type: "LOC".into(),
                    names: strings(LOCATIONS),
                },
                Gazetteer {
                    entity_type: "ORG".into(),
                    names: strings(ORGANIZATIONS),
                },
            ],
            invented_names_per_type: 60,
            templates: strings(TEMPLATES),
            ambiguous_templates: strings(AMBIGUOUS_TEMPLATES),
            common_nouns: strings(COMMON_NOUNS),
            noise_rate: 0.05,
            ambiguity_rate: 0.4,
            unseen_fraction: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("noise_rate", self.noise_rate)?;
        unit("ambiguity_rate", self.ambiguity_rate)?;
        unit("unseen_fraction", self.unseen_fraction)?;
        if self.unseen_fraction >= 1.0 {
            return Err(Error::Config("unseen_fraction must be below 1".into()));
        }
        if self.train_sentences == 0 || self.test_sentences == 0 {
            return Err(Error::Config("sentence counts must be positive".into()));
        }
        if self.gazetteers.is_empty() {
            return Err(Error::Config("at least one gazetteer is required".into()));
        }
        let mut types = BTreeSet::new();
        for g in &self.gazetteers {
            if g.names.is_empty() {
                return Err(Error::Config(format!("gazetteer {} is empty", g.entity_type)));
            }
            if g.entity_type.is_empty() || g.entity_type.contains(char::is_whitespace) {
                return Err(Error::Config(format!("invalid entity type {:?}", g.entity_type)));
            }
            for name in &g.names {
                if name.split(' ').any(|w| w.is_empty() || Token::new(w).is_err()) {
                    return Err(Error::Config(format!("invalid gazetteer entry {name:?}")));
                }
            }
            types.insert(g.entity_type.as_str());
        }
        if self.templates.is_empty() {
            return Err(Error::Config("no templates".into()));
        }
        for t in &self.templates {
            for w in t.split_whitespace() {
                if let Some(ty) = slot_type(w) {
                    if !types.contains(ty) {
                        return Err(Error::Config(format!("template {t:?} uses unknown slot {w}")));
                    }
                }
            }
        }
        if self.ambiguity_rate > 0.0 {
            if self.ambiguous_templates.is_empty() || self.common_nouns.is_empty() {
                return Err(Error::Config(
                    "ambiguous sentences need ambiguous templates and common nouns".into(),
                ));
            }
            for t in &self.ambiguous_templates {
                if t.split_whitespace().filter(|w| *w == AMBIGUOUS_SLOT).count() != 1 {
                    return Err(Error::Config(format!("ambiguous template {t:?} needs exactly one {{AMB}}")));
                }
            }
        }
        Ok(())
    }
}

fn slot_type(word: &str) -> Option<&str> {
    if word == AMBIGUOUS_SLOT {
        return None;
    }
    word.strip_prefix('{')?.strip_suffix('}')
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "ven", "dor", "mi", "ra", "tel", "sun", "bar", "ni", "os", "gal", "ter", "vin", "hol", "mar",
    "zen", "ru", "pel", "cor", "as", "bri", "tu", "fen",
];

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn invent_name(rng: &mut ChaCha8Rng, entity_type: &str) -> String {
    let stem: String = (0..rng.gen_range(2..=3))
        .map(|_| *SYLLABLES.choose(rng).expect("non-empty"))
        .collect();
    match entity_type {
        "LOC" => {
            let suffix = ["ia", "burg", "ville", "stan", "land", "port"].choose(rng).expect("non-empty");
            capitalize(&format!("{stem}{suffix}"))
        }
        "ORG" if rng.gen_bool(0.4) => (0..rng.gen_range(3..=4))
            .map(|_| *b"BCDFGHKLMNPRSTVW".choose(rng).expect("non-empty") as char)
            .collect(),
        "ORG" => {
            let head = ["Corp", "Group", "Bank", "Systems", "Holdings", "United"].choose(rng).expect("non-empty");
            format!("{} {head}", capitalize(&stem))
        }
        "PER" => {
            let first = FIRST_NAMES.choose(rng).expect("non-empty");
            let suffix = ["son", "ez", "ski", "ova", "sen", "etti"].choose(rng).expect("non-empty");
            format!("{first} {}", capitalize(&format!("{stem}{suffix}")))
        }
        _ => capitalize(&stem),
    }
}

/// Splits a shuffled list into (train pool, test pool); the test pool is
/// everything, the train pool omits the held-out share.
fn split_pool(mut items: Vec<String>, unseen: f64, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    items.sort();
    items.dedup();
    items.shuffle(rng);
    let held = ((items.len() as f64) * unseen).round() as usize;
    let held = held.min(items.len().saturating_sub(1));
    let train = items[held..].to_vec();
    (train, items)
}

struct Pools {
    names: BTreeMap<String, Vec<String>>,
    nouns: Vec<String>,
}

fn render_corpus(cfg: &SynthConfig, pools: &Pools, count: usize, rng: &mut ChaCha8Rng, label: &str) -> Result<Corpus> {
    let types: Vec<&String> = pools.names.keys().collect();
    // Single-token names that are also common nouns: only case tells them apart.
    let nouns: BTreeSet<&str> = pools.nouns.iter().map(String::as_str).collect();
    let homographs: Vec<(&str, &str)> = pools
        .names
        .iter()
        .flat_map(|(ty, names)| names.iter().map(move |n| (ty.as_str(), n.as_str())))
        .filter(|(_, n)| !n.contains(' ') && nouns.contains(n.to_lowercase().as_str()))
        .collect();
    let mut sentences = Vec::with_capacity(count);
    for _ in 0..count {
        let ambiguous = cfg.ambiguity_rate > 0.0 && rng.gen_bool(cfg.ambiguity_rate);
        let template = if ambiguous {
            cfg.ambiguous_templates.choose(rng)
        } else {
            cfg.templates.choose(rng)
        }
        .expect("validated non-empty");

        let mut words: Vec<String> = Vec::new();
        let mut spans = Vec::new();
        for (slot_index, w) in template.split_whitespace().enumerate() {
            let slot: Option<(&str, &str)> = if w == AMBIGUOUS_SLOT {
                match homographs.choose(rng) {
                    Some(&(ty, name)) if rng.gen_bool(0.5) => Some((ty, name)),
                    Some(&(_, name)) => {
                        words.push(name.to_lowercase());
                        None
                    }
                    None if rng.gen_bool(0.5) => {
                        let ty = types.choose(rng).expect("validated non-empty").as_str();
                        Some((ty, pools.names[ty].choose(rng).expect("validated non-empty").as_str()))
                    }
                    None => {
                        let noun = pools.nouns.choose(rng).expect("validated non-empty");
                        words.extend(noun.split(' ').map(str::to_string));
                        None
                    }
                }
            } else if let Some(ty) = slot_type(w) {
                Some((ty, pools.names[ty].choose(rng).expect("validated non-empty").as_str()))
            } else {
                words.push(if slot_index == 0 { capitalize(w) } else { w.to_string() });
                None
            };
            if let Some((ty, name)) = slot {
                let lowercase = cfg.noise_rate > 0.0 && rng.gen_bool(cfg.noise_rate);
                let start = words.len();
                for part in name.split(' ') {
                    words.push(if lowercase { part.to_lowercase() } else { part.to_string() });
                }
                spans.push(EntitySpan::new(start, words.len() - 1, ty));
            }
        }
        let tokens = words.into_iter().map(Token::new).collect::<Result<Vec<_>>>()?;
        let sentence = Sentence::new(tokens)?;
        let gold = spans_to_tags(&spans, sentence.len(), Scheme::Iobes)?;
        sentences.push(AnnotatedSentence::new(sentence, gold)?);
    }
    Ok(Corpus::new(
        sentences,
        format!(
            "synthetic {label}: seed {}, {count} sentences, noise rate {}, ambiguity rate {}, unseen fraction {}",
            cfg.seed, cfg.noise_rate, cfg.ambiguity_rate, cfg.unseen_fraction
        ),
    ))
}

/// Generates `(train, test)`; identical configs give identical corpora.
pub fn generate(cfg: &SynthConfig) -> Result<(Corpus, Corpus)> {
    cfg.validate()?;
    let mut pool_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train_names = BTreeMap::new();
    let mut test_names = BTreeMap::new();
    for g in &cfg.gazetteers {
        let mut names = g.names.clone();
        for _ in 0..cfg.invented_names_per_type {
            names.push(invent_name(&mut pool_rng, &g.entity_type));
        }
        let (train, test) = split_pool(names, cfg.unseen_fraction, &mut pool_rng);
        train_names.insert(g.entity_type.clone(), train);
        test_names.insert(g.entity_type.clone(), test);
    }
    let (train_nouns, test_nouns) = split_pool(cfg.common_nouns.clone(), cfg.unseen_fraction, &mut pool_rng);

    let train_pools = Pools {
        names: train_names,
        nouns: train_nouns,
    };
    let test_pools = Pools {
        names: test_names,
        nouns: test_nouns,
    };
    let mut train_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_rng.set_stream(1);
    let mut test_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    test_rng.set_stream(2);
    let train = render_corpus(cfg, &train_pools, cfg.train_sentences, &mut train_rng, "train")?;
    let test = render_corpus(cfg, &test_pools, cfg.test_sentences, &mut test_rng, "test")?;
    Ok((train, test))
}

/// How much of a test set's vocabulary the training set covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub test_mentions: usize,
    /// Test mentions whose lowercased surface is also a training mention.
    pub seen_mentions: usize,
    pub test_token_types: usize,
    /// Lowercased test token types that occur in training.
    pub seen_token_types: usize,
}

impl Overlap {
    pub fn mention_ratio(&self) -> f64 {
        if self.test_mentions == 0 {
            0.0
        } else {
            self.seen_mentions as f64 / self.test_mentions as f64
        }
    }

    pub fn token_type_ratio(&self) -> f64 {
        if self.test_token_types == 0 {
            0.0
        } else {
            self.seen_token_types as f64 / self.test_token_types as f64
        }
    }
}

fn mention_surfaces(c: &Corpus) -> Vec<String> {
    c.iter()
        .flat_map(|a| {
            let tokens = a.sentence().tokens();
            a.spans()
                .into_iter()
                .map(|s| {
                    tokens[s.start..=s.end]
                        .iter()
                        .map(|t| t.as_str().to_lowercase())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn vocabulary_overlap(train: &Corpus, test: &Corpus) -> Overlap {
    let train_mentions: BTreeSet<String> = mention_surfaces(train).into_iter().collect();
    let test_mentions = mention_surfaces(test);
    let lowered_types = |c: &Corpus| -> BTreeSet<String> {
        c.iter()
            .flat_map(|a| a.sentence().tokens().iter().map(|t| t.as_str().to_lowercase()))
            .collect()
    };
    let train_types = lowered_types(train);
    let test_types = lowered_types(test);
    Overlap {
        test_mentions: test_mentions.len(),
        seen_mentions: test_mentions.iter().filter(|m| train_mentions.contains(*m)).count(),
        test_token_types: test_types.len(),
        seen_token_types: test_types.intersection(&train_types).count(),
    }
}
