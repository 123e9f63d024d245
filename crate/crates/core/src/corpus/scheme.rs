//! Tagging schemes: parsing, validation, span extraction and conversion.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Chunk tagging scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// `I-X` opens a chunk; `B-X` only separates two adjacent chunks of type X.
    Iob1,
    /// `B-X` opens every chunk, `I-X` continues it.
    Iob2,
    /// Begin / Inside / End / Single / Outside.
    Iobes,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Iob1, Scheme::Iob2, Scheme::Iobes];

    fn allows(self, prefix: Prefix) -> bool {
        match self {
            Scheme::Iob1 | Scheme::Iob2 => matches!(prefix, Prefix::Begin | Prefix::Inside),
            Scheme::Iobes => true,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Iob1 => "IOB1",
            Scheme::Iob2 => "IOB2",
            Scheme::Iobes => "IOBES",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IOB1" => Ok(Scheme::Iob1),
            "IOB2" | "BIO" => Ok(Scheme::Iob2),
            "IOBES" | "BIOES" => Ok(Scheme::Iobes),
            _ => Err(Error::Config(format!("unknown tagging scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Prefix {
    Begin,
    Inside,
    End,
    Single,
}

/// A tag split into its prefix and entity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tag<'a> {
    Outside,
    Chunk { prefix: Prefix, ty: &'a str },
}

impl<'a> Tag<'a> {
    pub(crate) fn parse(tag: &'a str) -> Option<Self> {
        if tag == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, ty) = tag.split_once('-')?;
        if ty.is_empty() {
            return None;
        }
        let prefix = match prefix {
            "B" => Prefix::Begin,
            "I" => Prefix::Inside,
            "E" => Prefix::End,
            "S" => Prefix::Single,
            _ => return None,
        };
        Some(Tag::Chunk { prefix, ty })
    }

    fn ty(&self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Chunk { ty, .. } => Some(ty),
        }
    }

    fn prefix(&self) -> Option<Prefix> {
        match self {
            Tag::Outside => None,
            Tag::Chunk { prefix, .. } => Some(*prefix),
        }
    }
}

/// Whether `cur` may follow `prev` under `scheme`. `None` stands for the
/// sentence boundary on either side.
pub(crate) fn transition_allowed(scheme: Scheme, prev: Option<Tag<'_>>, cur: Option<Tag<'_>>) -> bool {
    use Prefix::*;
    let same_type = match (prev, cur) {
        (Some(p), Some(c)) => p.ty().is_some() && p.ty() == c.ty(),
        _ => false,
    };
    let prev_open = matches!(prev.and_then(|t| t.prefix()), Some(Begin | Inside));
    match scheme {
        Scheme::Iobes => {
            let cur_continues = matches!(cur.and_then(|t| t.prefix()), Some(Inside | End));
            if prev_open {
                cur_continues && same_type
            } else {
                !cur_continues
            }
        }
        Scheme::Iob2 => match cur.and_then(|t| t.prefix()) {
            Some(Inside) => prev_open && same_type,
            _ => true,
        },
        Scheme::Iob1 => match cur.and_then(|t| t.prefix()) {
            Some(Begin) => prev_open && same_type,
            _ => true,
        },
    }
}

/// Checks prefix legality and every adjacent transition, including the
/// sentence boundaries.
pub fn validate_tags<S: AsRef<str>>(tags: &[S], scheme: Scheme) -> Result<()> {
    let mut prev: Option<Tag<'_>> = None;
    for (i, raw) in tags.iter().enumerate() {
        let raw = raw.as_ref();
        let tag = Tag::parse(raw)
            .ok_or_else(|| Error::validation(Some(i), format!("malformed tag {raw:?}")))?;
        if let Some(prefix) = tag.prefix() {
            if !scheme.allows(prefix) {
                return Err(Error::validation(
                    Some(i),
                    format!("tag {raw:?} is not legal in {scheme}"),
                ));
            }
        }
        if !transition_allowed(scheme, prev, Some(tag)) {
            let before = i.checked_sub(1).map_or("<start>", |j| tags[j].as_ref());
            return Err(Error::validation(
                Some(i),
                format!("illegal {scheme} transition {before:?} -> {raw:?}"),
            ));
        }
        prev = Some(tag);
    }
    if !transition_allowed(scheme, prev, None) {
        let last = tags.len() - 1;
        return Err(Error::validation(
            Some(last),
            format!("{scheme} chunk {:?} is left open at sentence end", tags[last].as_ref()),
        ));
    }
    Ok(())
}

/// Guesses the scheme of a collection of tag sequences.
///
/// Any `E-`/`S-` prefix means IOBES. Otherwise an `I-X` that does not follow
/// `B-X`/`I-X` means IOB1, else IOB2.
pub fn detect_scheme<'a, I, S>(sequences: I) -> Scheme
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let mut iob1 = false;
    for tags in sequences {
        let mut prev: Option<Tag<'_>> = None;
        for raw in tags {
            let Some(tag) = Tag::parse(raw.as_ref()) else {
                prev = None;
                continue;
            };
            match tag.prefix() {
                Some(Prefix::End | Prefix::Single) => return Scheme::Iobes,
                Some(Prefix::Inside) => {
                    let continues = matches!(prev.and_then(|p| p.prefix()), Some(Prefix::Begin | Prefix::Inside))
                        && prev.and_then(|p| p.ty()) == tag.ty();
                    if !continues {
                        iob1 = true;
                    }
                }
                _ => {}
            }
            prev = Some(tag);
        }
    }
    if iob1 {
        Scheme::Iob1
    } else {
        Scheme::Iob2
    }
}

/// An entity mention: inclusive token range plus type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, entity_type: impl Into<String>) -> Self {
        EntitySpan {
            start,
            end,
            entity_type: entity_type.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-token labels in a declared scheme. Always valid once constructed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TagSequence {
    tags: Vec<String>,
    scheme: Scheme,
}

impl TagSequence {
    pub fn new<S: Into<String>>(tags: impl IntoIterator<Item = S>, scheme: Scheme) -> Result<Self> {
        let tags: Vec<String> = tags.into_iter().map(Into::into).collect();
        if tags.is_empty() {
            return Err(Error::validation(None, "empty tag sequence"));
        }
        validate_tags(&tags, scheme)?;
        Ok(TagSequence { tags, scheme })
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Maximal chunks sorted by start.
    pub fn spans(&self) -> Vec<EntitySpan> {
        let parsed: Vec<Tag<'_>> = self
            .tags
            .iter()
            .map(|t| Tag::parse(t).expect("validated on construction"))
            .collect();
        let mut spans = Vec::new();
        let mut open: Option<(usize, &str)> = None;
        for (i, tag) in parsed.iter().enumerate() {
            let starts_new = match (tag, i.checked_sub(1).map(|j| parsed[j])) {
                (Tag::Outside, _) => false,
                (Tag::Chunk { prefix: Prefix::Begin | Prefix::Single, .. }, _) => true,
                (Tag::Chunk { .. }, None) => true,
                (Tag::Chunk { ty, .. }, Some(prev)) => {
                    prev.ty() != Some(*ty) || matches!(prev.prefix(), Some(Prefix::End | Prefix::Single))
                }
            };
            let continues = !starts_new && !matches!(tag, Tag::Outside);
            if !continues {
                if let Some((start, ty)) = open.take() {
                    spans.push(EntitySpan::new(start, i - 1, ty));
                }
            }
            if starts_new {
                open = tag.ty().map(|ty| (i, ty));
            }
        }
        if let Some((start, ty)) = open {
            spans.push(EntitySpan::new(start, parsed.len() - 1, ty));
        }
        spans
    }

    /// Re-encodes the same chunks in another scheme.
    pub fn convert(&self, target: Scheme) -> TagSequence {
        if target == self.scheme {
            return self.clone();
        }
        spans_to_tags(&self.spans(), self.len(), target).expect("spans of a valid sequence re-encode")
    }
}

/// Spans of a tag sequence; see [`TagSequence::spans`].
pub fn extract_spans(tags: &TagSequence) -> Vec<EntitySpan> {
    tags.spans()
}

/// Encodes non-overlapping spans as tags of a sentence of `length` tokens.
pub fn spans_to_tags(spans: &[EntitySpan], length: usize, scheme: Scheme) -> Result<TagSequence> {
    if length == 0 {
        return Err(Error::InvalidInput("tag sequence length must be positive".into()));
    }
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort();
    let mut tags = vec![String::from("O"); length];
    let mut prev: Option<&EntitySpan> = None;
    for span in sorted {
        if span.start > span.end || span.end >= length {
            return Err(Error::InvalidInput(format!(
                "span ({}, {}) outside a sentence of {length} tokens",
                span.start, span.end
            )));
        }
        if span.entity_type.is_empty() || span.entity_type.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "invalid entity type {:?}",
                span.entity_type
            )));
        }
        if let Some(p) = prev {
            if span.start <= p.end {
                return Err(Error::InvalidInput(format!(
                    "spans ({}, {}) and ({}, {}) overlap",
                    p.start, p.end, span.start, span.end
                )));
            }
        }
        let ty = &span.entity_type;
        for (i, tag) in tags.iter_mut().enumerate().take(span.end + 1).skip(span.start) {
            let prefix = match scheme {
                Scheme::Iobes if span.start == span.end => "S",
                Scheme::Iobes if i == span.start => "B",
                Scheme::Iobes if i == span.end => "E",
                Scheme::Iob2 if i == span.start => "B",
                Scheme::Iob1 if i == span.start => {
                    let adjacent_same = prev.is_some_and(|p| p.end + 1 == span.start && &p.entity_type == ty);
                    if adjacent_same {
                        "B"
                    } else {
                        "I"
                    }
                }
                _ => "I",
            };
            *tag = format!("{prefix}-{ty}");
        }
        prev = Some(span);
    }
    TagSequence::new(tags, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tags: &[&str], scheme: Scheme) -> TagSequence {
        TagSequence::new(tags.iter().copied(), scheme).unwrap()
    }

    #[test]
    fn iob2_to_iobes() {
        let t = seq(&["B-ORG", "I-ORG", "I-ORG"], Scheme::Iob2);
        assert_eq!(t.convert(Scheme::Iobes).tags(), ["B-ORG", "I-ORG", "E-ORG"]);
        let t = seq(&["B-LOC"], Scheme::Iob2);
        assert_eq!(t.convert(Scheme::Iobes).tags(), ["S-LOC"]);
    }

    #[test]
    fn table_spans() {
        let t = seq(&["O", "O", "O", "B-ORG", "I-ORG", "E-ORG"], Scheme::Iobes);
        assert_eq!(t.spans(), vec![EntitySpan::new(3, 5, "ORG")]);
        let t = seq(&["S-LOC", "O", "S-LOC"], Scheme::Iobes);
        assert_eq!(
            t.spans(),
            vec![EntitySpan::new(0, 0, "LOC"), EntitySpan::new(2, 2, "LOC")]
        );
        assert!(seq(&["O", "O"], Scheme::Iob2).spans().is_empty());
    }

    #[test]
    fn spans_to_tags_examples() {
        let t = spans_to_tags(&[EntitySpan::new(3, 5, "ORG")], 6, Scheme::Iobes).unwrap();
        assert_eq!(t.tags(), ["O", "O", "O", "B-ORG", "I-ORG", "E-ORG"]);
        let t = spans_to_tags(&[], 4, Scheme::Iobes).unwrap();
        assert_eq!(t.tags(), ["O"; 4]);
    }

    #[test]
    fn spans_to_tags_errors() {
        let overlapping = [EntitySpan::new(0, 2, "A"), EntitySpan::new(2, 3, "B")];
        assert!(spans_to_tags(&overlapping, 5, Scheme::Iobes).is_err());
        assert!(spans_to_tags(&[EntitySpan::new(3, 4, "A")], 4, Scheme::Iob2).is_err());
        assert!(spans_to_tags(&[EntitySpan::new(2, 1, "A")], 4, Scheme::Iob2).is_err());
    }

    #[test]
    fn iob1_uses_b_only_between_adjacent_chunks() {
        let spans = [
            EntitySpan::new(0, 1, "PER"),
            EntitySpan::new(2, 2, "PER"),
            EntitySpan::new(3, 3, "LOC"),
        ];
        let t = spans_to_tags(&spans, 5, Scheme::Iob1).unwrap();
        assert_eq!(t.tags(), ["I-PER", "I-PER", "B-PER", "I-LOC", "O"]);
        assert_eq!(t.spans(), spans.to_vec());
    }

    #[test]
    fn rejects_illegal_sequences() {
        assert!(validate_tags(&["I-ORG"], Scheme::Iob2).is_err());
        assert!(validate_tags(&["B-ORG", "I-LOC"], Scheme::Iob2).is_err());
        assert!(validate_tags(&["O", "B-ORG"], Scheme::Iob1).is_err());
        assert!(validate_tags(&["B-ORG"], Scheme::Iobes).is_err());
        assert!(validate_tags(&["E-ORG"], Scheme::Iobes).is_err());
        assert!(validate_tags(&["S-ORG"], Scheme::Iob2).is_err());
        assert!(validate_tags(&["X-ORG"], Scheme::Iobes).is_err());
        assert!(validate_tags(&["B-"], Scheme::Iob2).is_err());
        let err = validate_tags(&["O", "B-ORG", "O"], Scheme::Iobes).unwrap_err();
        assert!(matches!(err, Error::Validation { position: Some(2), .. }), "{err}");
    }

    #[test]
    fn detection() {
        let iobes = [vec!["B-X", "E-X"]];
        assert_eq!(detect_scheme(iobes.iter().map(Vec::as_slice)), Scheme::Iobes);
        let iob1 = [vec!["O", "I-X", "I-X"]];
        assert_eq!(detect_scheme(iob1.iter().map(Vec::as_slice)), Scheme::Iob1);
        let iob2 = [vec!["B-X", "I-X", "O"], vec!["O"]];
        assert_eq!(detect_scheme(iob2.iter().map(Vec::as_slice)), Scheme::Iob2);
    }
}
