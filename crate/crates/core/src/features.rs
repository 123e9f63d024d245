//! Sparse window features and the feature/tag index.
//!
//! Feature strings look like `w-1=york`, `sh0=Xxxx`, `cap+1=AllLower`,
//! `p3=yor`, `s2=rk`. Word identities are always lowercased; casing is
//! carried only by the `sh*` (shape) and `cap*` (capitalization pattern)
//! families, which [`TemplateSet::CaseAgnostic`] omits entirely.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::truecase::{case_class, CaseClass};

/// Context window radius, in tokens.
pub const WINDOW: usize = 2;
const AFFIX_MAX: usize = 4;
const SHAPE_RUN_MAX: usize = 3;
const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateSet {
    /// Identity, affix, shape and capitalization-pattern features.
    CaseAware,
    /// Identity and affix features only; invariant under recasing.
    CaseAgnostic,
}

impl fmt::Display for TemplateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateSet::CaseAware => "case-aware",
            TemplateSet::CaseAgnostic => "case-agnostic",
        })
    }
}

impl FromStr for TemplateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "case-aware" => Ok(TemplateSet::CaseAware),
            "case-agnostic" => Ok(TemplateSet::CaseAgnostic),
            _ => Err(Error::Config(format!("unknown template set {s:?}"))),
        }
    }
}

/// Collapsed character-class shape: `York` -> `Xxxx`, `Washington` -> `Xxxx`,
/// `1999` -> `ddd`, `U.S.` -> `X#X#`.
pub fn word_shape(word: &str) -> String {
    let mut shape = String::new();
    let mut last = '\0';
    let mut run = 0;
    for c in word.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            '#'
        };
        if class == last {
            run += 1;
        } else {
            last = class;
            run = 1;
        }
        if run <= SHAPE_RUN_MAX {
            shape.push(class);
        }
    }
    shape
}

fn pattern_name(word: &str) -> &'static str {
    match case_class(word) {
        CaseClass::InitCap => "InitCap",
        CaseClass::AllCap => "AllCap",
        CaseClass::Lower => "AllLower",
        CaseClass::Mixed => "Mixed",
        CaseClass::NoCase => "NoCase",
    }
}

fn offset_label(d: isize) -> String {
    if d > 0 {
        format!("+{d}")
    } else {
        d.to_string()
    }
}

/// Features of token `i`, sorted and deduplicated.
pub fn extract(s: &Sentence, i: usize, t: TemplateSet) -> Result<Vec<String>> {
    if i >= s.len() {
        return Err(Error::InvalidInput(format!(
            "position {i} out of range for a sentence of {} tokens",
            s.len()
        )));
    }
    let lowered: Vec<String> = s.tokens().iter().map(|tok| tok.as_str().to_lowercase()).collect();
    Ok(extract_lowered(s, &lowered, i, t))
}

/// `lowered` must hold the lowercased tokens of `s`.
fn extract_lowered(s: &Sentence, lowered: &[String], i: usize, t: TemplateSet) -> Vec<String> {
    let n = s.len() as isize;
    let w = WINDOW as isize;
    let at = |d: isize| -> Option<usize> {
        let j = i as isize + d;
        (0..n).contains(&j).then_some(j as usize)
    };
    let sentinel = |d: isize| if d < 0 { BOS } else { EOS };

    let mut out = vec!["bias".to_string()];
    if i == 0 {
        out.push("first".to_string());
    }
    for d in -w..=w {
        let label = offset_label(d);
        match at(d) {
            Some(j) => out.push(format!("w{label}={}", lowered[j])),
            None => out.push(format!("w{label}={}", sentinel(d))),
        }
        if t == TemplateSet::CaseAware {
            match at(d) {
                Some(j) => out.push(format!("sh{label}={}", word_shape(s.tokens()[j].as_str()))),
                None => out.push(format!("sh{label}={}", sentinel(d))),
            }
            if d.abs() <= 1 {
                match at(d) {
                    Some(j) => out.push(format!("cap{label}={}", pattern_name(s.tokens()[j].as_str()))),
                    None => out.push(format!("cap{label}={}", sentinel(d))),
                }
            }
        }
    }
    let chars: Vec<char> = lowered[i].chars().collect();
    for k in 1..=AFFIX_MAX.min(chars.len()) {
        out.push(format!("p{k}={}", chars[..k].iter().collect::<String>()));
        out.push(format!("s{k}={}", chars[chars.len() - k..].iter().collect::<String>()));
    }
    out.sort();
    out.dedup();
    out
}

/// Features of every token of `s`.
pub fn extract_all(s: &Sentence, t: TemplateSet) -> Vec<Vec<String>> {
    let lowered: Vec<String> = s.tokens().iter().map(|tok| tok.as_str().to_lowercase()).collect();
    (0..s.len()).map(|i| extract_lowered(s, &lowered, i, t)).collect()
}

fn exempt_from_cutoff(feature: &str) -> bool {
    feature.starts_with("sh") || feature.starts_with("cap")
}

/// Dense indices for feature strings and tag strings.
///
/// Features are numbered in lexicographic order; tags put `O` first and the
/// rest in lexicographic order. A frozen map never grows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "RawFeatureMap", into = "RawFeatureMap")]
pub struct FeatureMap {
    features: Vec<String>,
    tags: Vec<String>,
    feature_index: HashMap<String, u32>,
    tag_index: HashMap<String, u32>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct RawFeatureMap {
    features: Vec<String>,
    tags: Vec<String>,
    frozen: bool,
}

impl From<RawFeatureMap> for FeatureMap {
    fn from(raw: RawFeatureMap) -> Self {
        let mut map = FeatureMap::new();
        for f in raw.features {
            map.intern_feature(&f);
        }
        for t in raw.tags {
            map.intern_tag(&t);
        }
        map.frozen = raw.frozen;
        map
    }
}

impl From<FeatureMap> for RawFeatureMap {
    fn from(map: FeatureMap) -> Self {
        RawFeatureMap {
            features: map.features,
            tags: map.tags,
            frozen: map.frozen,
        }
    }
}

impl PartialEq for FeatureMap {
    fn eq(&self, other: &Self) -> bool {
        self.features == other.features && self.tags == other.tags && self.frozen == other.frozen
    }
}

impl Default for FeatureMap {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureMap {
    pub fn new() -> Self {
        FeatureMap {
            features: Vec::new(),
            tags: Vec::new(),
            feature_index: HashMap::new(),
            tag_index: HashMap::new(),
            frozen: false,
        }
    }

    /// Index of `feature`, adding it when the map is not frozen.
    pub fn intern_feature(&mut self, feature: &str) -> Option<u32> {
        if let Some(&i) = self.feature_index.get(feature) {
            return Some(i);
        }
        if self.frozen {
            return None;
        }
        let i = self.features.len() as u32;
        self.features.push(feature.to_string());
        self.feature_index.insert(feature.to_string(), i);
        Some(i)
    }

    pub fn intern_tag(&mut self, tag: &str) -> Option<u32> {
        if let Some(&i) = self.tag_index.get(tag) {
            return Some(i);
        }
        if self.frozen {
            return None;
        }
        let i = self.tags.len() as u32;
        self.tags.push(tag.to_string());
        self.tag_index.insert(tag.to_string(), i);
        Some(i)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn feature_index(&self, feature: &str) -> Option<u32> {
        self.feature_index.get(feature).copied()
    }

    pub fn tag_index(&self, tag: &str) -> Option<u32> {
        self.tag_index.get(tag).copied()
    }

    pub fn feature(&self, index: u32) -> Option<&str> {
        self.features.get(index as usize).map(String::as_str)
    }

    pub fn tag(&self, index: u32) -> Option<&str> {
        self.tags.get(index as usize).map(String::as_str)
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn num_tags(&self) -> usize {
        self.tags.len()
    }

    /// Active feature indices per token; unknown features are dropped.
    pub fn encode(&self, s: &Sentence, t: TemplateSet) -> Vec<Vec<u32>> {
        extract_all(s, t)
            .into_iter()
            .map(|fs| fs.iter().filter_map(|f| self.feature_index(f)).collect())
            .collect()
    }
}

/// Builds a frozen map holding every feature seen at least `min_count` times
/// (shape and pattern features are kept regardless) and every gold tag, plus
/// `O`.
pub fn fit_feature_map(c: &Corpus, t: TemplateSet, min_count: usize) -> Result<FeatureMap> {
    if c.is_empty() {
        return Err(Error::InvalidInput("cannot fit a feature map on an empty corpus".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut tags: Vec<&str> = vec!["O"];
    for a in c {
        for fs in extract_all(a.sentence(), t) {
            for f in fs {
                *counts.entry(f).or_default() += 1;
            }
        }
        tags.extend(a.gold().tags().iter().map(String::as_str));
    }
    let mut kept: Vec<String> = counts
        .into_iter()
        .filter(|(f, n)| *n >= min_count || exempt_from_cutoff(f))
        .map(|(f, _)| f)
        .collect();
    kept.sort_unstable();
    tags.sort_unstable_by(|a, b| (*a != "O", *a).cmp(&(*b != "O", *b)));
    tags.dedup();

    let mut map = FeatureMap::new();
    for f in &kept {
        map.intern_feature(f);
    }
    for tag in tags {
        map.intern_tag(tag);
    }
    map.freeze();
    Ok(map)
}
