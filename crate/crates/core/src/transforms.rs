//! Label-preserving case transforms and training-set augmentation.
//!
//! Case mappings are the Unicode default (untailored) full mappings provided
//! by `str::to_lowercase` / `str::to_uppercase`. They may change the number of
//! characters in a token (`ß` uppercases to `SS`) but never the number of
//! tokens.

use std::fmt;
use std::str::FromStr;

use crate::corpus::{AnnotatedSentence, Corpus, Sentence, SentenceOrigin};
use crate::error::Error;

/// Casing applied to a whole test or training corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseVariant {
    Original,
    Lower,
    Upper,
}

impl CaseVariant {
    pub const ALL: [CaseVariant; 3] = [CaseVariant::Original, CaseVariant::Lower, CaseVariant::Upper];

    pub fn name(self) -> &'static str {
        match self {
            CaseVariant::Original => "Original",
            CaseVariant::Lower => "Lower",
            CaseVariant::Upper => "Upper",
        }
    }
}

impl fmt::Display for CaseVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(CaseVariant::Original),
            "lower" => Ok(CaseVariant::Lower),
            "upper" => Ok(CaseVariant::Upper),
            _ => Err(Error::Config(format!("unknown case variant {s:?}"))),
        }
    }
}

pub fn to_lower(s: &Sentence) -> Sentence {
    s.map_tokens(str::to_lowercase)
}

pub fn to_upper(s: &Sentence) -> Sentence {
    s.map_tokens(str::to_uppercase)
}

pub fn apply_variant(s: &Sentence, v: CaseVariant) -> Sentence {
    match v {
        CaseVariant::Original => s.clone(),
        CaseVariant::Lower => to_lower(s),
        CaseVariant::Upper => to_upper(s),
    }
}

/// Recases the tokens; gold tags are carried over untouched.
pub fn transform_annotated(a: &AnnotatedSentence, v: CaseVariant) -> AnnotatedSentence {
    match v {
        CaseVariant::Original => a.clone(),
        _ => a.with_sentence(apply_variant(a.sentence(), v)),
    }
}

pub fn make_variant(c: &Corpus, v: CaseVariant) -> Corpus {
    let sentences = c.iter().map(|a| transform_annotated(a, v)).collect();
    let provenance = match v {
        CaseVariant::Original => c.provenance.clone(),
        _ => format!("{} | variant {v}", c.provenance),
    };
    Corpus::new(sentences, provenance)
}

/// Originals, then lowercased copies, then uppercased copies. Duplicates are
/// kept, so the result always holds exactly `3 * c.len()` sentences.
pub fn augment(c: &Corpus) -> Corpus {
    let mut sentences = Vec::with_capacity(c.len() * 3);
    for v in CaseVariant::ALL {
        sentences.extend(c.iter().enumerate().map(|(i, a)| {
            transform_annotated(a, v).with_origin(SentenceOrigin {
                source_index: i,
                variant: v,
            })
        }));
    }
    Corpus::new(sentences, format!("{} | augmented x3 (original, lower, upper)", c.provenance))
}
