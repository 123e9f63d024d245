//! Linear-chain conditional random field.
//!
//! The score of a tag sequence `y` for sentence `x` is
//!
//! ```text
//! begin[y_0] + sum_t sum_{f active at t} W[f, y_t] + sum_t T[y_{t-1}, y_t] + end[y_{n-1}]
//! ```
//!
//! and `P(y | x) = exp(score) / Z(x)`. Training maximizes the L2-penalized
//! conditional log-likelihood over an unconstrained tag alphabet; decoding
//! masks transitions that are illegal under IOBES.

mod lattice;
mod train;

use serde::{Deserialize, Serialize};

pub use train::{log_likelihood_and_gradient, train, train_with_trace, Optimizer, TrainConfig};

use crate::corpus::{transition_allowed, Scheme, Sentence, Tag, TagSequence};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, TemplateSet};
use lattice::{Constraints, Potentials};

const MAGIC: &[u8; 8] = b"CNERCRFM";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;

/// How a model was trained. Carried in the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub config: Option<TrainConfig>,
    pub train_sentences: usize,
    pub iterations: usize,
    pub final_objective: f64,
}

/// Offsets of the parameter blocks inside the flat weight vector:
/// emissions (`features x tags`), transitions (`tags x tags`), begin, end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub features: usize,
    pub tags: usize,
}

impl Layout {
    pub fn emission(&self, feature: usize, tag: usize) -> usize {
        feature * self.tags + tag
    }

    pub fn transition_offset(&self) -> usize {
        self.features * self.tags
    }

    pub fn begin_offset(&self) -> usize {
        self.transition_offset() + self.tags * self.tags
    }

    pub fn end_offset(&self) -> usize {
        self.begin_offset() + self.tags
    }

    pub fn len(&self) -> usize {
        self.end_offset() + self.tags
    }

    /// Emission matrix (`n x tags`) of an encoded sentence.
    pub fn emissions(&self, weights: &[f64], active: &[Vec<u32>]) -> Vec<f64> {
        let k = self.tags;
        let mut out = vec![0.0; active.len() * k];
        for (t, features) in active.iter().enumerate() {
            let row = &mut out[t * k..(t + 1) * k];
            for &f in features {
                let w = &weights[f as usize * k..(f as usize + 1) * k];
                for (r, x) in row.iter_mut().zip(w) {
                    *r += x;
                }
            }
        }
        out
    }

    pub fn potentials<'a>(&self, weights: &'a [f64], emission: &'a [f64]) -> Potentials<'a> {
        let k = self.tags;
        Potentials {
            n: emission.len() / k,
            k,
            emission,
            transition: &weights[self.transition_offset()..self.begin_offset()],
            begin: &weights[self.begin_offset()..self.end_offset()],
            end: &weights[self.end_offset()..self.len()],
        }
    }
}

/// Posterior marginals of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub tags: usize,
    /// `node[t * tags + k] = P(y_t = k | x)`.
    pub node: Vec<f64>,
    /// `edge[((t - 1) * tags + i) * tags + j] = P(y_{t-1} = i, y_t = j | x)`.
    pub edge: Vec<f64>,
    pub log_partition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfModel {
    feature_map: FeatureMap,
    template: TemplateSet,
    weights: Vec<f64>,
    metadata: TrainingMetadata,
}

impl CrfModel {
    /// Assembles a model from a frozen map and a flat weight vector laid out
    /// as emissions, transitions, begin, end.
    pub fn from_parts(
        feature_map: FeatureMap,
        template: TemplateSet,
        weights: Vec<f64>,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        let model = CrfModel {
            feature_map,
            template,
            weights,
            metadata,
        };
        model.check()?;
        Ok(model)
    }

    /// All-zero weights.
    pub fn zeros(feature_map: FeatureMap, template: TemplateSet) -> Result<Self> {
        let layout = Layout {
            features: feature_map.num_features(),
            tags: feature_map.num_tags(),
        };
        let metadata = TrainingMetadata {
            config: None,
            train_sentences: 0,
            iterations: 0,
            final_objective: 0.0,
        };
        CrfModel::from_parts(feature_map, template, vec![0.0; layout.len()], metadata)
    }

    fn check(&self) -> Result<()> {
        if !self.feature_map.is_frozen() {
            return Err(Error::InvalidInput("model feature map must be frozen".into()));
        }
        let tags = self.feature_map.tags();
        if tags.is_empty() || self.feature_map.tag_index("O").is_none() {
            return Err(Error::InvalidInput("tag set must contain \"O\"".into()));
        }
        for tag in tags {
            if Tag::parse(tag).is_none() {
                return Err(Error::InvalidInput(format!("tag {tag:?} is not an IOBES label")));
            }
        }
        if self.weights.len() != self.layout().len() {
            return Err(Error::InvalidInput(format!(
                "expected {} weights, got {}",
                self.layout().len(),
                self.weights.len()
            )));
        }
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Numerical(format!("weight {i} is not finite")));
        }
        Ok(())
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout {
            features: self.feature_map.num_features(),
            tags: self.feature_map.num_tags(),
        }
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn template(&self) -> TemplateSet {
        self.template
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    pub fn num_tags(&self) -> usize {
        self.feature_map.num_tags()
    }

    /// Index of the emission weight for (`feature`, `tag`), if both are known.
    pub fn emission_index(&self, feature: &str, tag: &str) -> Option<usize> {
        let f = self.feature_map.feature_index(feature)? as usize;
        let k = self.feature_map.tag_index(tag)? as usize;
        Some(self.layout().emission(f, k))
    }

    pub fn transition_index(&self, from: &str, to: &str) -> Option<usize> {
        let i = self.feature_map.tag_index(from)? as usize;
        let j = self.feature_map.tag_index(to)? as usize;
        Some(self.layout().transition_offset() + i * self.num_tags() + j)
    }

    pub fn begin_index(&self, tag: &str) -> Option<usize> {
        Some(self.layout().begin_offset() + self.feature_map.tag_index(tag)? as usize)
    }

    pub fn end_index(&self, tag: &str) -> Option<usize> {
        Some(self.layout().end_offset() + self.feature_map.tag_index(tag)? as usize)
    }

    /// Emission scores (`n x tags`) of a sentence.
    pub fn emission_scores(&self, s: &Sentence) -> Vec<f64> {
        let active = self.feature_map.encode(s, self.template);
        self.layout().emissions(&self.weights, &active)
    }

    fn tag_indices(&self, s: &Sentence, y: &TagSequence) -> Result<Vec<usize>> {
        if y.len() != s.len() {
            return Err(Error::InvalidInput(format!(
                "{} tags for a sentence of {} tokens",
                y.len(),
                s.len()
            )));
        }
        let y = y.convert(Scheme::Iobes);
        y.tags()
            .iter()
            .map(|t| {
                self.feature_map
                    .tag_index(t)
                    .map(|i| i as usize)
                    .ok_or_else(|| Error::InvalidInput(format!("tag {t:?} is not in the model's tag set")))
            })
            .collect()
    }

    /// Unnormalized log score of `y`.
    pub fn score_sequence(&self, s: &Sentence, y: &TagSequence) -> Result<f64> {
        let path = self.tag_indices(s, y)?;
        Ok(self.score_path(&self.emission_scores(s), &path))
    }

    pub(crate) fn score_path(&self, emission: &[f64], path: &[usize]) -> f64 {
        let layout = self.layout();
        let k = layout.tags;
        let w = &self.weights;
        let mut score = w[layout.begin_offset() + path[0]] + w[layout.end_offset() + path[path.len() - 1]];
        for (t, &j) in path.iter().enumerate() {
            score += emission[t * k + j];
            if t > 0 {
                score += w[layout.transition_offset() + path[t - 1] * k + j];
            }
        }
        score
    }

    /// log Z(x) over all `tags^n` sequences.
    pub fn log_partition(&self, s: &Sentence) -> f64 {
        let emission = self.emission_scores(s);
        self.layout().potentials(&self.weights, &emission).log_partition()
    }

    pub fn marginals(&self, s: &Sentence) -> Marginals {
        let emission = self.emission_scores(s);
        let (node, edge, log_partition) = self.layout().potentials(&self.weights, &emission).marginals();
        Marginals {
            tags: self.num_tags(),
            node,
            edge,
            log_partition,
        }
    }

    fn constraints(&self) -> Constraints {
        let tags: Vec<Tag<'_>> = self
            .feature_map
            .tags()
            .iter()
            .map(|t| Tag::parse(t).expect("checked on construction"))
            .collect();
        let k = tags.len();
        let mut allowed = vec![false; k * k];
        for (i, &a) in tags.iter().enumerate() {
            for (j, &b) in tags.iter().enumerate() {
                allowed[i * k + j] = transition_allowed(Scheme::Iobes, Some(a), Some(b));
            }
        }
        Constraints {
            k,
            start: tags.iter().map(|&t| transition_allowed(Scheme::Iobes, None, Some(t))).collect(),
            end: tags.iter().map(|&t| transition_allowed(Scheme::Iobes, Some(t), None)).collect(),
            allowed,
        }
    }

    /// Highest-scoring IOBES-legal tag sequence. Ties go to the lowest tag
    /// index at each backtrace step.
    pub fn decode(&self, s: &Sentence) -> TagSequence {
        let emission = self.emission_scores(s);
        let constraints = self.constraints();
        let (path, _) = self
            .layout()
            .potentials(&self.weights, &emission)
            .viterbi(Some(&constraints))
            .expect("an all-O path is always legal");
        let tags = path.iter().map(|&j| self.feature_map.tags()[j].clone());
        TagSequence::new(tags, Scheme::Iobes).expect("constrained decoding yields legal IOBES")
    }

    /// Versioned binary encoding: magic, format version, body length, body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = bincode::serialize(self).expect("model serializes");
        let mut out = Vec::with_capacity(HEADER_LEN + body.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend(body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let body = check_header(bytes, MAGIC, FORMAT_VERSION)?;
        let model: CrfModel =
            bincode::deserialize(body).map_err(|e| Error::Format(format!("model body: {e}")))?;
        model.check().map_err(|e| Error::Format(e.to_string()))?;
        Ok(model)
    }
}

/// Validates magic, version and (when present) body length; returns the body.
pub(crate) fn check_header<'a>(bytes: &'a [u8], magic: &[u8; 8], version: u32) -> Result<&'a [u8]> {
    if bytes.len() < 12 {
        return Err(Error::Format(format!("file is {} bytes, too short for a header", bytes.len())));
    }
    if &bytes[..8] != magic {
        return Err(Error::Format("unrecognized file signature".into()));
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if found != version {
        return Err(Error::Format(format!(
            "format version {found} is not supported (expected {version})"
        )));
    }
    if magic == MAGIC {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format("truncated header".into()));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != len {
            return Err(Error::Format(format!(
                "body is {} bytes, header declares {len}",
                body.len()
            )));
        }
        return Ok(body);
    }
    Ok(&bytes[12..])
}

pub fn save(m: &CrfModel) -> Vec<u8> {
    m.to_bytes()
}

pub fn load(bytes: &[u8]) -> Result<CrfModel> {
    CrfModel::from_bytes(bytes)
}
