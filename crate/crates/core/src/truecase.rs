//! Unigram majority-class truecaser.
//!
//! Every lowercased word type keeps weighted counts of the casing classes it
//! was seen with. Restoring case lowercases the input token, looks up the
//! majority class and re-renders the token in that class, so the output only
//! depends on the lowercased input.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CNERTRUE";
const FORMAT_VERSION: u32 = 1;

/// Weight given to an `InitCap` occurrence in sentence-initial position; the
/// remainder is credited to `Lower`.
pub const INITIAL_INIT_CAP_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseClass {
    Lower,
    InitCap,
    AllCap,
    Mixed,
    NoCase,
}

impl CaseClass {
    /// Also the tie-break order for majority votes.
    pub const ALL: [CaseClass; 5] = [
        CaseClass::Lower,
        CaseClass::InitCap,
        CaseClass::AllCap,
        CaseClass::Mixed,
        CaseClass::NoCase,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseClass::Lower => "LOWER",
            CaseClass::InitCap => "INIT_CAP",
            CaseClass::AllCap => "ALL_CAP",
            CaseClass::Mixed => "MIXED",
            CaseClass::NoCase => "NO_CASE",
        })
    }
}

fn is_cased(c: char) -> bool {
    c.is_uppercase() || c.is_lowercase()
}

/// Total classification; the empty string is `NoCase`.
pub(crate) fn case_class(word: &str) -> CaseClass {
    let mut cased = word.chars().filter(|&c| is_cased(c));
    let Some(first) = cased.next() else {
        return CaseClass::NoCase;
    };
    let mut rest_upper = true;
    let mut rest_lower = true;
    let mut count = 1;
    for c in cased {
        count += 1;
        rest_upper &= c.is_uppercase();
        rest_lower &= c.is_lowercase();
    }
    if first.is_uppercase() {
        if count >= 2 && rest_upper {
            CaseClass::AllCap
        } else if rest_lower {
            CaseClass::InitCap
        } else {
            CaseClass::Mixed
        }
    } else if rest_lower {
        CaseClass::Lower
    } else {
        CaseClass::Mixed
    }
}

pub fn classify_case(word: &str) -> Result<CaseClass> {
    if word.is_empty() {
        return Err(Error::InvalidInput("cannot classify the case of an empty string".into()));
    }
    Ok(case_class(word))
}

/// Uppercases the first cased character of an already lowercased word.
fn init_cap(lower: &str) -> String {
    let mut out = String::with_capacity(lower.len());
    let mut done = false;
    for c in lower.chars() {
        if !done && is_cased(c) {
            out.extend(c.to_uppercase());
            done = true;
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ClassCounts([f64; 5]);

impl ClassCounts {
    fn add(&mut self, class: CaseClass, weight: f64) {
        self.0[class.slot()] += weight;
    }

    fn majority(&self) -> CaseClass {
        let mut best = CaseClass::Lower;
        for class in CaseClass::ALL {
            if self.0[class.slot()] > self.0[best.slot()] {
                best = class;
            }
        }
        best
    }

    fn get(&self, class: CaseClass) -> f64 {
        self.0[class.slot()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truecaser {
    classes: BTreeMap<String, ClassCounts>,
    /// Surface counts of `Mixed` occurrences, keyed by lowercased word.
    mixed_forms: BTreeMap<String, BTreeMap<String, u64>>,
    /// Raw class counts of sentence-initial tokens.
    initial: ClassCounts,
    fallback: CaseClass,
}

impl Truecaser {
    /// Majority class of a lowercased word; unseen words get the fallback.
    pub fn majority_class(&self, lowered: &str) -> CaseClass {
        self.classes.get(lowered).map_or(self.fallback, ClassCounts::majority)
    }

    pub fn fallback(&self) -> CaseClass {
        self.fallback
    }

    pub fn vocabulary_size(&self) -> usize {
        self.classes.len()
    }

    /// Whether the training text capitalizes sentence-initial words.
    pub fn capitalizes_sentence_start(&self) -> bool {
        let cap = self.initial.get(CaseClass::InitCap) + self.initial.get(CaseClass::AllCap);
        cap > self.initial.get(CaseClass::Lower) + self.initial.get(CaseClass::Mixed)
    }

    fn mixed_form(&self, lowered: &str) -> Option<&str> {
        let forms = self.mixed_forms.get(lowered)?;
        // Highest count, then lexicographically smallest.
        forms
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(form, _)| form.as_str())
    }

    /// A rendering that would lowercase to a different word (e.g. "ﬁle" ->
    /// "FIle") is replaced by the lowercase form, so output stays stable
    /// under repeated truecasing.
    fn render(&self, lowered: &str, class: CaseClass) -> String {
        let rendered = match class {
            CaseClass::Lower | CaseClass::NoCase => lowered.to_string(),
            CaseClass::InitCap => init_cap(lowered),
            CaseClass::AllCap => lowered.to_uppercase(),
            CaseClass::Mixed => self
                .mixed_form(lowered)
                .map_or_else(|| lowered.to_string(), str::to_string),
        };
        if rendered.to_lowercase() == lowered {
            rendered
        } else {
            lowered.to_string()
        }
    }

    pub fn truecase(&self, s: &Sentence) -> Sentence {
        let start_rule = self.capitalizes_sentence_start();
        let mut position = 0usize;
        s.map_tokens(|surface| {
            let lowered = surface.to_lowercase();
            let mut class = self.majority_class(&lowered);
            if position == 0 && start_rule && class == CaseClass::Lower {
                class = CaseClass::InitCap;
            }
            position += 1;
            self.render(&lowered, class)
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend(bincode::serialize(self).expect("truecaser serializes"));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let body = crate::crf::check_header(bytes, MAGIC, FORMAT_VERSION)?;
        bincode::deserialize(body).map_err(|e| Error::Format(format!("truecaser body: {e}")))
    }
}

/// Counts casing classes per lowercased word type; labels are ignored.
pub fn train_truecaser(c: &Corpus) -> Result<Truecaser> {
    if c.is_empty() {
        return Err(Error::InvalidInput("cannot train a truecaser on an empty corpus".into()));
    }
    let mut classes: BTreeMap<String, ClassCounts> = BTreeMap::new();
    let mut mixed_forms: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut initial = ClassCounts::default();
    for a in c {
        for (i, token) in a.sentence().tokens().iter().enumerate() {
            let surface = token.as_str();
            let lowered = surface.to_lowercase();
            let class = case_class(surface);
            let counts = classes.entry(lowered.clone()).or_default();
            if i == 0 {
                initial.add(class, 1.0);
                if class == CaseClass::InitCap {
                    counts.add(CaseClass::InitCap, INITIAL_INIT_CAP_WEIGHT);
                    counts.add(CaseClass::Lower, 1.0 - INITIAL_INIT_CAP_WEIGHT);
                    continue;
                }
            }
            counts.add(class, 1.0);
            if class == CaseClass::Mixed {
                *mixed_forms.entry(lowered).or_default().entry(surface.to_string()).or_default() += 1;
            }
        }
    }
    Ok(Truecaser {
        classes,
        mixed_forms,
        initial,
        fallback: CaseClass::Lower,
    })
}

pub fn truecase(t: &Truecaser, s: &Sentence) -> Sentence {
    t.truecase(s)
}
