//! Exact-match span scoring with conlleval semantics.

use std::collections::{BTreeMap, HashSet};

use crate::corpus::{Corpus, EntitySpan, TagSequence};
use crate::crf::CrfModel;
use crate::error::{Error, Result};
use crate::transforms::{make_variant, to_lower, CaseVariant};
use crate::truecase::Truecaser;

/// Span counts plus the ratios derived from them. Zero denominators give 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct SpanCounts {
    pub true_positives: usize,
    pub predicted_count: usize,
    pub gold_count: usize,
}

impl SpanCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.predicted_count)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.gold_count)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn merge(&mut self, other: &SpanCounts) {
        self.true_positives += other.true_positives;
        self.predicted_count += other.predicted_count;
        self.gold_count += other.gold_count;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro-averaged totals and a per-entity-type breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub overall: SpanCounts,
    pub per_type: BTreeMap<String, SpanCounts>,
}

impl Metrics {
    pub fn precision(&self) -> f64 {
        self.overall.precision()
    }

    pub fn recall(&self) -> f64 {
        self.overall.recall()
    }

    pub fn f1(&self) -> f64 {
        self.overall.f1()
    }

    fn add_sentence(&mut self, pred: &[EntitySpan], gold: &[EntitySpan]) {
        let gold_set: HashSet<&EntitySpan> = gold.iter().collect();
        for span in pred {
            let entry = self.per_type.entry(span.entity_type.clone()).or_default();
            entry.predicted_count += 1;
            if gold_set.contains(span) {
                entry.true_positives += 1;
            }
        }
        for span in gold {
            self.per_type.entry(span.entity_type.clone()).or_default().gold_count += 1;
        }
        self.overall = SpanCounts::default();
        for counts in self.per_type.values() {
            self.overall.merge(counts);
        }
    }

    /// `key = value` lines under `prefix`, e.g. `original.f1 = 0.912345`.
    pub fn to_key_values(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |name: String, c: &SpanCounts| {
            out.push((format!("{name}.true_positives"), c.true_positives.to_string()));
            out.push((format!("{name}.predicted"), c.predicted_count.to_string()));
            out.push((format!("{name}.gold"), c.gold_count.to_string()));
            out.push((format!("{name}.precision"), format!("{:.6}", c.precision())));
            out.push((format!("{name}.recall"), format!("{:.6}", c.recall())));
            out.push((format!("{name}.f1"), format!("{:.6}", c.f1())));
        };
        push(prefix.to_string(), &self.overall);
        for (ty, c) in &self.per_type {
            push(format!("{prefix}.type.{ty}"), c);
        }
        out
    }
}

/// Pools span counts over all sentences before computing ratios.
pub fn evaluate(pred: &[TagSequence], gold: &[TagSequence]) -> Result<Metrics> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidInput(format!(
            "{} predicted sentences but {} gold sentences",
            pred.len(),
            gold.len()
        )));
    }
    let mut metrics = Metrics::default();
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::InvalidInput(format!(
                "sentence {i}: {} predicted tags but {} gold tags",
                p.len(),
                g.len()
            )));
        }
        metrics.add_sentence(&p.spans(), &g.spans());
    }
    Ok(metrics)
}

/// Test-time input handling of a strategy.
#[derive(Debug, Clone, Copy)]
pub enum Preprocess<'a> {
    None,
    Lowercase,
    Truecase(&'a Truecaser),
}

impl Preprocess<'_> {
    pub fn apply(&self, s: &crate::corpus::Sentence) -> crate::corpus::Sentence {
        match self {
            Preprocess::None => s.clone(),
            Preprocess::Lowercase => to_lower(s),
            Preprocess::Truecase(t) => t.truecase(s),
        }
    }
}

/// Decodes every sentence of `test` after preprocessing.
pub fn predict(m: &CrfModel, preprocess: &Preprocess<'_>, test: &Corpus) -> Vec<TagSequence> {
    use rayon::prelude::*;
    test.sentences
        .par_iter()
        .map(|a| m.decode(&preprocess.apply(a.sentence())))
        .collect()
}

/// Scores `m` on the original, lowercased and uppercased versions of `test`.
pub fn robustness_grid(
    m: &CrfModel,
    preprocess: &Preprocess<'_>,
    test: &Corpus,
) -> Result<BTreeMap<CaseVariant, Metrics>> {
    let gold: Vec<TagSequence> = test.iter().map(|a| a.gold().clone()).collect();
    CaseVariant::ALL
        .iter()
        .map(|&v| {
            let variant = make_variant(test, v);
            let pred = predict(m, preprocess, &variant);
            Ok((v, evaluate(&pred, &gold)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{spans_to_tags, Scheme};

    fn tags(spans: &[(usize, usize, &str)], n: usize) -> TagSequence {
        let spans: Vec<EntitySpan> = spans.iter().map(|&(s, e, t)| EntitySpan::new(s, e, t)).collect();
        spans_to_tags(&spans, n, Scheme::Iobes).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let g = tags(&[(3, 5, "ORG")], 6);
        let m = evaluate(&[g.clone()], &[g]).unwrap();
        assert_eq!((m.precision(), m.recall(), m.f1()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_right() {
        let gold = tags(&[(3, 5, "ORG"), (0, 0, "LOC")], 6);
        let pred = tags(&[(3, 5, "ORG"), (1, 1, "LOC")], 6);
        let m = evaluate(&[pred], &[gold]).unwrap();
        assert_eq!(m.overall.true_positives, 1);
        assert_eq!((m.precision(), m.recall(), m.f1()), (0.5, 0.5, 0.5));
        assert_eq!(m.per_type["LOC"].true_positives, 0);
        assert_eq!(m.per_type["ORG"].f1(), 1.0);
    }

    #[test]
    fn zero_denominators() {
        let gold = tags(&[(0, 1, "PER")], 3);
        let none = tags(&[], 3);
        let m = evaluate(&[none.clone()], &[gold.clone()]).unwrap();
        assert_eq!((m.precision(), m.recall(), m.f1()), (0.0, 0.0, 0.0));
        let m = evaluate(&[none.clone()], &[none]).unwrap();
        assert_eq!(m.f1(), 0.0);
        assert!(m.per_type.is_empty());
    }

    #[test]
    fn wrong_type_or_boundary_is_not_credited() {
        let gold = tags(&[(0, 1, "PER")], 3);
        let m = evaluate(&[tags(&[(0, 1, "ORG")], 3)], &[gold.clone()]).unwrap();
        assert_eq!(m.overall.true_positives, 0);
        let m = evaluate(&[tags(&[(0, 2, "PER")], 3)], &[gold]).unwrap();
        assert_eq!(m.overall.true_positives, 0);
    }

    #[test]
    fn length_mismatch() {
        let g = tags(&[], 3);
        assert!(evaluate(&[], &[g.clone()]).is_err());
        assert!(evaluate(&[tags(&[], 2)], &[g]).is_err());
    }
}
