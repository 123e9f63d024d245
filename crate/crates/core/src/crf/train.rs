//! Maximum-likelihood training: objective, gradient and the two optimizers.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CrfModel, Layout, TrainingMetadata};
use crate::corpus::{Corpus, Scheme};
use crate::error::{Error, Result};
use crate::features::{fit_feature_map, FeatureMap, TemplateSet};

/// Sentences are split into this many contiguous blocks for parallel
/// gradient evaluation. Partial sums are added in block order, so results
/// do not depend on the thread count.
const GRADIENT_BLOCKS: usize = 16;
const LBFGS_HISTORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    Lbfgs,
    Adagrad,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Lbfgs => "lbfgs",
            Optimizer::Adagrad => "adagrad",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lbfgs" | "l-bfgs" => Ok(Optimizer::Lbfgs),
            "adagrad" => Ok(Optimizer::Adagrad),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Standard deviation of the Gaussian prior; the penalty is `|w|^2 / (2 sigma^2)`.
    pub l2_sigma: f64,
    /// Iterations for L-BFGS, epochs for AdaGrad.
    pub max_epochs: usize,
    pub optimizer: Optimizer,
    /// AdaGrad only.
    pub learning_rate: f64,
    /// Stop once the relative objective change falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// Feature occurrence cutoff.
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_sigma: 1.0,
            max_epochs: 200,
            optimizer: Optimizer::Lbfgs,
            learning_rate: 0.1,
            tolerance: 1e-5,
            seed: 0,
            min_count: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be a positive number, got {v}")))
            }
        };
        positive("l2_sigma", self.l2_sigma)?;
        positive("learning_rate", self.learning_rate)?;
        positive("tolerance", self.tolerance)?;
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be positive".into()));
        }
        Ok(())
    }
}

struct Encoded {
    active: Vec<Vec<u32>>,
    gold: Vec<usize>,
}

fn encode_corpus(map: &FeatureMap, template: TemplateSet, c: &Corpus) -> Result<Vec<Encoded>> {
    c.sentences
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let gold = a
                .gold()
                .convert(Scheme::Iobes)
                .tags()
                .iter()
                .map(|t| {
                    map.tag_index(t).map(|j| j as usize).ok_or_else(|| {
                        Error::InvalidInput(format!("sentence {i}: tag {t:?} is not in the model's tag set"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Encoded {
                active: map.encode(a.sentence(), template),
                gold,
            })
        })
        .collect()
}

trait GradientSink {
    fn add(&mut self, index: usize, value: f64);
}

impl GradientSink for [f64] {
    fn add(&mut self, index: usize, value: f64) {
        self[index] += value;
    }
}

impl GradientSink for Vec<(usize, f64)> {
    fn add(&mut self, index: usize, value: f64) {
        self.push((index, value));
    }
}

/// Adds `observed - expected` counts of one sentence to `grad` and returns
/// its log-likelihood.
fn accumulate_sentence<G: GradientSink + ?Sized>(layout: &Layout, weights: &[f64], s: &Encoded, grad: &mut G) -> f64 {
    let k = layout.tags;
    let n = s.gold.len();
    let emission = layout.emissions(weights, &s.active);
    let potentials = layout.potentials(weights, &emission);
    let (node, edge, log_z) = potentials.marginals();

    let trans = layout.transition_offset();
    let begin = layout.begin_offset();
    let end = layout.end_offset();

    let mut score = weights[begin + s.gold[0]] + weights[end + s.gold[n - 1]];
    for t in 0..n {
        let y = s.gold[t];
        score += emission[t * k + y];
        for &f in &s.active[t] {
            let base = layout.emission(f as usize, 0);
            for j in 0..k {
                let observed = if j == y { 1.0 } else { 0.0 };
                grad.add(base + j, observed - node[t * k + j]);
            }
        }
        if t > 0 {
            let prev = s.gold[t - 1];
            score += weights[trans + prev * k + y];
            grad.add(trans + prev * k + y, 1.0);
            for i in 0..k {
                for j in 0..k {
                    grad.add(trans + i * k + j, -edge[((t - 1) * k + i) * k + j]);
                }
            }
        }
    }
    grad.add(begin + s.gold[0], 1.0);
    grad.add(end + s.gold[n - 1], 1.0);
    for j in 0..k {
        grad.add(begin + j, -node[j]);
        grad.add(end + j, -node[(n - 1) * k + j]);
    }
    score - log_z
}

/// Penalized log-likelihood and its gradient over a whole encoded corpus.
fn objective(layout: &Layout, weights: &[f64], data: &[Encoded], l2_sigma: f64) -> (f64, Vec<f64>) {
    let block = data.len().div_ceil(GRADIENT_BLOCKS).max(1);
    let partials: Vec<(f64, Vec<f64>)> = data
        .par_chunks(block)
        .map(|chunk| {
            let mut grad = vec![0.0; weights.len()];
            let mut ll = 0.0;
            for s in chunk {
                ll += accumulate_sentence(layout, weights, s, grad.as_mut_slice());
            }
            (ll, grad)
        })
        .collect();
    let mut ll = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (part_ll, part_grad) in partials {
        ll += part_ll;
        for (g, p) in grad.iter_mut().zip(part_grad) {
            *g += p;
        }
    }
    let inv_var = 1.0 / (l2_sigma * l2_sigma);
    let mut norm2 = 0.0;
    for (g, w) in grad.iter_mut().zip(weights) {
        norm2 += w * w;
        *g -= w * inv_var;
    }
    (ll - 0.5 * norm2 * inv_var, grad)
}

/// `L(w) = sum_i [score(y_i) - log Z(x_i)] - |w|^2 / (2 sigma^2)` and its
/// gradient with respect to the model's flat weight vector.
pub fn log_likelihood_and_gradient(m: &CrfModel, c: &Corpus, l2_sigma: f64) -> Result<(f64, Vec<f64>)> {
    let data = encode_corpus(m.feature_map(), m.template(), c)?;
    Ok(objective(&m.layout(), m.weights(), &data, l2_sigma))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Outcome {
    weights: Vec<f64>,
    /// Negative penalized log-likelihood after each accepted step (or epoch).
    trace: Vec<f64>,
}

/// Minimizes `f = -L` with limited-memory BFGS and a backtracking Armijo line
/// search, so accepted steps never increase `f`.
fn minimize_lbfgs(layout: &Layout, data: &[Encoded], cfg: &TrainConfig) -> Result<Outcome> {
    let eval = |w: &[f64]| {
        let (ll, mut g) = objective(layout, w, data, cfg.l2_sigma);
        g.iter_mut().for_each(|x| *x = -*x);
        (-ll, g)
    };
    let mut x = vec![0.0; layout.len()];
    let (mut f, mut g) = eval(&x);
    if !f.is_finite() {
        return Err(Error::Numerical(format!("initial objective is {f}")));
    }
    let mut trace = vec![f];
    let mut history: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();

    for _ in 0..cfg.max_epochs {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm == 0.0 {
            break;
        }
        // Two-loop recursion for d = -H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if history.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        let mut saw_non_finite = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fc, gc) = eval(&candidate);
            if fc.is_finite() && fc <= f + ARMIJO_C1 * step * slope {
                accepted = Some((candidate, fc, gc));
                break;
            }
            saw_non_finite |= !fc.is_finite();
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            if saw_non_finite {
                return Err(Error::Numerical("line search produced only non-finite objectives".into()));
            }
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 {
            if history.len() == LBFGS_HISTORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let relative = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        if relative < cfg.tolerance {
            break;
        }
    }
    Ok(Outcome { weights: x, trace })
}

/// Per-sentence AdaGrad on `-L`, visiting sentences in a seeded random order
/// each epoch. The prior is spread evenly over sentences and applied to the
/// coordinates each sentence touches.
fn minimize_adagrad(layout: &Layout, data: &[Encoded], cfg: &TrainConfig) -> Result<Outcome> {
    let mut w = vec![0.0; layout.len()];
    let mut history = vec![0.0; layout.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let inv_var_per_sentence = 1.0 / (cfg.l2_sigma * cfg.l2_sigma * data.len() as f64);
    let full = |w: &[f64]| -objective(layout, w, data, cfg.l2_sigma).0;

    let mut f = full(&w);
    if !f.is_finite() {
        return Err(Error::Numerical(format!("initial objective is {f}")));
    }
    let mut trace = vec![f];
    let mut sparse: Vec<(usize, f64)> = Vec::new();
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            sparse.clear();
            accumulate_sentence(layout, &w, &data[i], &mut sparse);
            sparse.sort_by_key(|&(j, _)| j);
            let mut idx = 0;
            while idx < sparse.len() {
                let j = sparse[idx].0;
                let mut g = 0.0;
                while idx < sparse.len() && sparse[idx].0 == j {
                    g += sparse[idx].1;
                    idx += 1;
                }
                // Descent direction for -L.
                let g = -g + w[j] * inv_var_per_sentence;
                history[j] += g * g;
                w[j] -= cfg.learning_rate * g / (history[j].sqrt() + ADAGRAD_EPS);
            }
        }
        let f_new = full(&w);
        if !f_new.is_finite() {
            return Err(Error::Numerical(format!("objective became {f_new} during AdaGrad")));
        }
        let relative = (f - f_new).abs() / f.abs().max(f_new.abs()).max(1.0);
        f = f_new;
        trace.push(f);
        if relative < cfg.tolerance {
            break;
        }
    }
    Ok(Outcome { weights: w, trace })
}

/// Like [`train`], also returning the objective (`-L`) after every accepted
/// optimizer step or epoch, starting with the all-zero model.
pub fn train_with_trace(c: &Corpus, template: TemplateSet, cfg: &TrainConfig) -> Result<(CrfModel, Vec<f64>)> {
    cfg.validate()?;
    if c.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty corpus".into()));
    }
    let map = fit_feature_map(c, template, cfg.min_count)?;
    let layout = Layout {
        features: map.num_features(),
        tags: map.num_tags(),
    };
    let data = encode_corpus(&map, template, c)?;
    let outcome = match cfg.optimizer {
        Optimizer::Lbfgs => minimize_lbfgs(&layout, &data, cfg)?,
        Optimizer::Adagrad => minimize_adagrad(&layout, &data, cfg)?,
    };
    let metadata = TrainingMetadata {
        config: Some(cfg.clone()),
        train_sentences: c.len(),
        iterations: outcome.trace.len() - 1,
        final_objective: *outcome.trace.last().expect("trace starts non-empty"),
    };
    let model = CrfModel::from_parts(map, template, outcome.weights, metadata)?;
    Ok((model, outcome.trace))
}

pub fn train(c: &Corpus, template: TemplateSet, cfg: &TrainConfig) -> Result<CrfModel> {
    train_with_trace(c, template, cfg).map(|(m, _)| m)
}
