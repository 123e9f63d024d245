//! CoNLL column format.
//!
//! One token per line, columns separated by runs of spaces or tabs, a blank
//! line between sentences. Lines whose first column is `-DOCSTART-` are
//! document markers and are dropped. Gold tags are validated against the
//! detected (or declared) scheme and stored as IOBES.

use super::{AnnotatedSentence, Corpus, Scheme, Sentence, TagSequence, Token};
use crate::error::{Error, Result};

const DOCSTART: &str = "-DOCSTART-";

/// Column layout and scheme override for [`parse_conll`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    pub token_column: usize,
    /// `None` selects the last column of each line.
    pub tag_column: Option<usize>,
    /// `None` auto-detects the scheme over the whole input.
    pub scheme: Option<Scheme>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            token_column: 0,
            tag_column: None,
            scheme: None,
        }
    }
}

struct RawSentence {
    tokens: Vec<Token>,
    tags: Vec<String>,
}

pub fn parse_conll(text: &str, options: &ParseOptions) -> Result<Corpus> {
    let mut raw: Vec<RawSentence> = Vec::new();
    let mut current = RawSentence {
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    let mut markers = 0usize;

    let flush = |current: &mut RawSentence, raw: &mut Vec<RawSentence>| {
        if !current.tokens.is_empty() {
            raw.push(std::mem::replace(
                current,
                RawSentence {
                    tokens: Vec::new(),
                    tags: Vec::new(),
                },
            ));
        }
    };

    for (idx, line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let columns: Vec<&str> = line.split([' ', '\t']).filter(|c| !c.is_empty()).collect();
        if columns.is_empty() {
            flush(&mut current, &mut raw);
            continue;
        }
        if columns[0] == DOCSTART {
            markers += 1;
            flush(&mut current, &mut raw);
            continue;
        }
        let tag_column = options.tag_column.unwrap_or(columns.len() - 1);
        let needed = options.token_column.max(tag_column) + 1;
        if columns.len() < 2 || columns.len() < needed {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least {} columns, found {}", needed.max(2), columns.len()),
            });
        }
        let token = Token::new(columns[options.token_column]).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        current.tokens.push(token);
        current.tags.push(columns[tag_column].to_string());
    }
    flush(&mut current, &mut raw);

    let scheme = options
        .scheme
        .unwrap_or_else(|| super::detect_scheme(raw.iter().map(|r| r.tags.as_slice())));

    let sentences = raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let gold = TagSequence::new(r.tags, scheme).map_err(|e| e.in_sentence(i))?;
            let sentence = Sentence::new(r.tokens)?;
            AnnotatedSentence::new(sentence, gold.convert(Scheme::Iobes)).map_err(|e| e.in_sentence(i))
        })
        .collect::<Result<Vec<_>>>()?;

    let provenance = format!(
        "conll: {} sentences, source scheme {scheme}, {markers} {DOCSTART} markers dropped",
        sentences.len()
    );
    Ok(Corpus::new(sentences, provenance))
}

/// Two columns (`token tag`) per line, one blank line after each sentence.
pub fn write_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for s in corpus {
        for (token, tag) in s.sentence().tokens().iter().zip(s.gold().tags()) {
            out.push_str(token.as_str());
            out.push(' ');
            out.push_str(tag);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
