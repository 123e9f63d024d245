//! Sentences, gold annotations and CoNLL column files.

mod conll;
mod scheme;

use std::fmt;

pub use conll::{parse_conll, write_conll, ParseOptions};
pub use scheme::{detect_scheme, extract_spans, spans_to_tags, validate_tags, EntitySpan, Scheme, TagSequence};
pub(crate) use scheme::{transition_allowed, Tag};

use crate::error::{Error, Result};
use crate::transforms::CaseVariant;

/// A single word. Never empty, never contains spaces, tabs or line breaks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(Error::InvalidInput("empty token".into()));
        }
        if surface.contains([' ', '\t', '\n', '\r']) {
            return Err(Error::InvalidInput(format!("token {surface:?} contains whitespace")));
        }
        Ok(Token(surface))
    }

    /// Case mappings never introduce whitespace or empty strings, so
    /// transformed surfaces skip the check.
    pub(crate) fn from_mapped(surface: String) -> Self {
        debug_assert!(!surface.is_empty());
        Token(surface)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A non-empty token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("sentence has no tokens".into()));
        }
        Ok(Sentence { tokens })
    }

    /// Splits on spaces and tabs.
    pub fn from_text(text: &str) -> Result<Self> {
        let tokens = text
            .split([' ', '\t'])
            .filter(|w| !w.is_empty())
            .map(Token::new)
            .collect::<Result<Vec<_>>>()?;
        Sentence::new(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Applies `f` to every surface form.
    pub fn map_tokens(&self, mut f: impl FnMut(&str) -> String) -> Sentence {
        Sentence {
            tokens: self.tokens.iter().map(|t| Token::from_mapped(f(t.as_str()))).collect(),
        }
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

/// Where an augmented sentence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SentenceOrigin {
    pub source_index: usize,
    pub variant: CaseVariant,
}

/// A sentence with its gold tags.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedSentence {
    sentence: Sentence,
    gold: TagSequence,
    origin: Option<SentenceOrigin>,
}

impl AnnotatedSentence {
    pub fn new(sentence: Sentence, gold: TagSequence) -> Result<Self> {
        if sentence.len() != gold.len() {
            return Err(Error::validation(
                None,
                format!("{} tokens but {} tags", sentence.len(), gold.len()),
            ));
        }
        Ok(AnnotatedSentence {
            sentence,
            gold,
            origin: None,
        })
    }

    pub fn sentence(&self) -> &Sentence {
        &self.sentence
    }

    pub fn gold(&self) -> &TagSequence {
        &self.gold
    }

    pub fn origin(&self) -> Option<SentenceOrigin> {
        self.origin
    }

    pub fn with_origin(mut self, origin: SentenceOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    /// Replaces the tokens, keeping tags and origin.
    pub(crate) fn with_sentence(&self, sentence: Sentence) -> Self {
        debug_assert_eq!(sentence.len(), self.gold.len());
        AnnotatedSentence {
            sentence,
            gold: self.gold.clone(),
            origin: self.origin,
        }
    }

    pub fn spans(&self) -> Vec<EntitySpan> {
        self.gold.spans()
    }
}

/// An ordered collection of annotated sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<AnnotatedSentence>,
    pub provenance: String,
}

impl Corpus {
    pub fn new(sentences: Vec<AnnotatedSentence>, provenance: impl Into<String>) -> Self {
        Corpus {
            sentences,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedSentence> {
        self.sentences.iter()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.sentence.len()).sum()
    }

    /// Entity types occurring in the gold annotation, sorted.
    pub fn entity_types(&self) -> Vec<String> {
        let mut types: Vec<String> = self
            .sentences
            .iter()
            .flat_map(|s| s.spans().into_iter().map(|sp| sp.entity_type))
            .collect();
        types.sort();
        types.dedup();
        types
    }

    /// Converts every gold sequence to `scheme`.
    pub fn to_scheme(&self, scheme: Scheme) -> Corpus {
        let sentences = self
            .sentences
            .iter()
            .map(|s| AnnotatedSentence {
                sentence: s.sentence.clone(),
                gold: s.gold.convert(scheme),
                origin: s.origin,
            })
            .collect();
        Corpus::new(sentences, self.provenance.clone())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a AnnotatedSentence;
    type IntoIter = std::slice::Iter<'a, AnnotatedSentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}
