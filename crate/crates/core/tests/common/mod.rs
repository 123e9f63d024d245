#![allow(dead_code)]

use casener::corpus::{spans_to_tags, AnnotatedSentence, Corpus, EntitySpan, Scheme, Sentence, TagSequence, Token};
use casener::crf::{CrfModel, TrainingMetadata};
use casener::features::{extract_all, FeatureMap, TemplateSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &["the", "New", "york", "PARIS", "Apple", "ran", "iPhone", "x1", "Bob", "."];
pub const TYPES: &[&str] = &["PER", "LOC", "ORG"];

pub fn sentence(rng: &mut ChaCha8Rng, n: usize) -> Sentence {
    let tokens = (0..n).map(|_| Token::new(*WORDS.choose(rng).unwrap()).unwrap()).collect();
    Sentence::new(tokens).unwrap()
}

/// Non-overlapping random spans over `n` tokens.
pub fn random_spans(rng: &mut ChaCha8Rng, n: usize, types: &[&str]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n {
        if rng.gen_bool(0.35) {
            let len = rng.gen_range(1..=3).min(n - i);
            spans.push(EntitySpan::new(i, i + len - 1, *types.choose(rng).unwrap()));
            i += len;
        } else {
            i += 1;
        }
    }
    spans
}

pub fn random_tags(rng: &mut ChaCha8Rng, n: usize, types: &[&str]) -> TagSequence {
    spans_to_tags(&random_spans(rng, n, types), n, Scheme::Iobes).unwrap()
}

pub fn random_corpus(rng: &mut ChaCha8Rng, sentences: usize, max_len: usize, types: &[&str]) -> Corpus {
    let sentences = (0..sentences)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            AnnotatedSentence::new(sentence(rng, n), random_tags(rng, n, types)).unwrap()
        })
        .collect();
    Corpus::new(sentences, "random")
}

/// IOBES tag sets of size `k` (2..=5), "O" always included.
pub fn tag_set(k: usize) -> Vec<&'static str> {
    const ALL: [&str; 5] = ["O", "S-PER", "B-PER", "E-PER", "I-PER"];
    ALL[..k].to_vec()
}

/// Random model whose features cover the given sentences. `quantized`
/// draws weights from {-1, 0, 1} so that exact score ties occur.
pub fn random_model(rng: &mut ChaCha8Rng, k: usize, sentences: &[Sentence], quantized: bool) -> CrfModel {
    let mut map = FeatureMap::new();
    for s in sentences {
        for feats in extract_all(s, TemplateSet::CaseAware) {
            for f in feats {
                map.intern_feature(&f);
            }
        }
    }
    for t in tag_set(k) {
        map.intern_tag(t);
    }
    map.freeze();
    let len = map.num_features() * k + k * k + 2 * k;
    let weights = (0..len)
        .map(|_| {
            if quantized {
                rng.gen_range(-1i32..=1) as f64
            } else {
                rng.gen_range(-2.0..=2.0)
            }
        })
        .collect();
    let meta = TrainingMetadata {
        config: None,
        train_sentences: 0,
        iterations: 0,
        final_objective: 0.0,
    };
    CrfModel::from_parts(map, TemplateSet::CaseAware, weights, meta).unwrap()
}

/// Unnormalized score of an arbitrary index path, built only from public
/// accessors.
pub fn path_score(m: &CrfModel, emissions: &[f64], path: &[usize]) -> f64 {
    let k = m.num_tags();
    let w = m.weights();
    let tag = |i: usize| m.feature_map().tag(i as u32).unwrap();
    let mut score = w[m.begin_index(tag(path[0])).unwrap()] + w[m.end_index(tag(*path.last().unwrap())).unwrap()];
    for (t, &y) in path.iter().enumerate() {
        score += emissions[t * k + y];
        if t > 0 {
            score += w[m.transition_index(tag(path[t - 1]), tag(y)).unwrap()];
        }
    }
    score
}

/// Every index path of length `n` over `k` tags.
pub fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn brute_log_partition(m: &CrfModel, s: &Sentence) -> f64 {
    let em = m.emission_scores(s);
    let scores: Vec<f64> = all_paths(s.len(), m.num_tags()).iter().map(|p| path_score(m, &em, p)).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn path_tags(m: &CrfModel, path: &[usize]) -> Vec<String> {
    path.iter().map(|&i| m.feature_map().tag(i as u32).unwrap().to_string()).collect()
}

/// Best IOBES-legal path. Among paths within `tie` of the best score the
/// winner is the one with the lowest last tag index, then the lowest
/// second-to-last, and so on.
pub fn brute_decode(m: &CrfModel, s: &Sentence, tie: f64) -> (Vec<String>, f64) {
    let em = m.emission_scores(s);
    let legal: Vec<(Vec<usize>, f64)> = all_paths(s.len(), m.num_tags())
        .into_iter()
        .filter(|p| casener::corpus::validate_tags(&path_tags(m, p), Scheme::Iobes).is_ok())
        .map(|p| {
            let sc = path_score(m, &em, &p);
            (p, sc)
        })
        .collect();
    let best = legal.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let (path, score) = legal
        .into_iter()
        .filter(|(_, s)| *s >= best - tie)
        .min_by(|(a, _), (b, _)| a.iter().rev().cmp(b.iter().rev()))
        .unwrap();
    (path_tags(m, &path), score)
}

/// Counts by brute force: every `(start, end, type)` triple is checked
/// directly against the raw tags of both sequences.
pub fn oracle_counts(pred: &[TagSequence], gold: &[TagSequence]) -> (usize, usize, usize) {
    fn is_chunk(tags: &[String], i: usize, j: usize, ty: &str) -> bool {
        let ok = |t: &str, prefixes: &[&str]| prefixes.iter().any(|p| t == format!("{p}-{ty}"));
        if i == j {
            return ok(&tags[i], &["S"]);
        }
        ok(&tags[i], &["B"]) && ok(&tags[j], &["E"]) && (i + 1..j).all(|m| ok(&tags[m], &["I"]))
    }
    let mut types: Vec<String> = pred
        .iter()
        .chain(gold)
        .flat_map(|s| s.tags().iter().filter_map(|t| t.split_once('-').map(|(_, ty)| ty.to_string())))
        .collect();
    types.sort();
    types.dedup();
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let n = g.len();
        for i in 0..n {
            for j in i..n {
                for ty in &types {
                    let in_p = is_chunk(p.tags(), i, j, ty);
                    let in_g = is_chunk(g.tags(), i, j, ty);
                    np += in_p as usize;
                    ng += in_g as usize;
                    tp += (in_p && in_g) as usize;
                }
            }
        }
    }
    (tp, np, ng)
}

/// Token-by-token chunk scan in the style of conlleval.
pub fn conlleval_counts(pred: &[TagSequence], gold: &[TagSequence]) -> (usize, usize, usize) {
    fn split(t: &str) -> (&str, &str) {
        t.split_once('-').unwrap_or((t, ""))
    }
    fn end_of_chunk(prev: (&str, &str), cur: (&str, &str)) -> bool {
        let (pt, pty) = prev;
        let (ct, cty) = cur;
        matches!(pt, "E" | "S")
            || (matches!(pt, "B" | "I") && (matches!(ct, "B" | "S" | "O") || pty != cty))
    }
    fn start_of_chunk(prev: (&str, &str), cur: (&str, &str)) -> bool {
        let (pt, pty) = prev;
        let (ct, cty) = cur;
        matches!(ct, "B" | "S")
            || (matches!(ct, "I" | "E") && (matches!(pt, "E" | "S" | "O") || pty != cty))
    }
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let (mut pp, mut pg) = (("O", ""), ("O", ""));
        let mut in_correct = false;
        let tags: Vec<((&str, &str), (&str, &str))> = p
            .tags()
            .iter()
            .zip(g.tags())
            .map(|(a, b)| (split(a), split(b)))
            .chain(std::iter::once((("O", ""), ("O", ""))))
            .collect();
        for (cp, cg) in tags {
            let (ep, eg) = (end_of_chunk(pp, cp), end_of_chunk(pg, cg));
            let (sp, sg) = (start_of_chunk(pp, cp), start_of_chunk(pg, cg));
            if in_correct {
                if ep && eg && pp.1 == pg.1 {
                    in_correct = false;
                    tp += 1;
                } else if ep != eg || pp.1 != pg.1 {
                    in_correct = false;
                }
            }
            if sp && sg && cp.1 == cg.1 {
                in_correct = true;
            }
            np += sp as usize;
            ng += sg as usize;
            pp = cp;
            pg = cg;
        }
    }
    (tp, np, ng)
}

pub fn with_weights(m: &CrfModel, weights: Vec<f64>) -> CrfModel {
    CrfModel::from_parts(m.feature_map().clone(), m.template(), weights, m.metadata().clone()).unwrap()
}

/// Maximum relative error between the analytic gradient and central
/// differences, over coordinates with magnitude at least 1e-8.
pub fn gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = random_corpus(&mut rng, 5, 4, &["PER"]);
    let sentences: Vec<_> = corpus.iter().map(|a| a.sentence().clone()).collect();
    let m = random_model(&mut rng, 5, &sentences, false);
    let sigma = rng.gen_range(0.5..3.0);
    let (_, grad) = casener::crf::log_likelihood_and_gradient(&m, &corpus, sigma).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, &g) in grad.iter().enumerate() {
        if g.abs() < 1e-8 {
            continue;
        }
        let mut w = m.weights().to_vec();
        w[i] += h;
        let (plus, _) = casener::crf::log_likelihood_and_gradient(&with_weights(&m, w.clone()), &corpus, sigma).unwrap();
        w[i] -= 2.0 * h;
        let (minus, _) = casener::crf::log_likelihood_and_gradient(&with_weights(&m, w), &corpus, sigma).unwrap();
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max((g - numeric).abs() / g.abs().max(numeric.abs()));
    }
    worst
}
