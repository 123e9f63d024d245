//! Plain-text reports and `key = value` metric dumps.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{DataSource, ExperimentConfig, ExperimentOutcome, LoadedData};
use crate::eval::Metrics;
use crate::transforms::CaseVariant;

/// Rows of F1 scores in percent, one decimal, columns in variant order.
pub fn render_table(rows: &[(String, BTreeMap<CaseVariant, Metrics>)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max("Strategy".len());
    let mut out = format!("{:<width$}", "Strategy");
    for v in CaseVariant::ALL {
        let _ = write!(out, "  {:>8}", capitalized(v.name()));
    }
    out.push('\n');
    for (label, grid) in rows {
        let _ = write!(out, "{label:<width$}");
        for v in CaseVariant::ALL {
            let f1 = grid.get(&v).map(|m| m.f1() * 100.0).unwrap_or(0.0);
            let _ = write!(out, "  {f1:>8.1}");
        }
        out.push('\n');
    }
    out
}

fn capitalized(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub(super) fn render_report(cfg: &ExperimentConfig, data: &LoadedData, run: &ExperimentOutcome) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("strategy", cfg.strategy.to_string());
    line("template", cfg.strategy.template().to_string());
    line("seed", cfg.seed.to_string());
    line("report_dir", cfg.report_dir.display().to_string());
    match &cfg.data {
        DataSource::Files { train, test, parse } => {
            line("train", train.display().to_string());
            line("test", test.display().to_string());
            line("token_column", parse.token_column.to_string());
            line(
                "tag_column",
                parse.tag_column.map_or("last".to_string(), |c| c.to_string()),
            );
            line("scheme", parse.scheme.map_or("auto".to_string(), |s| s.to_string()));
        }
        DataSource::Synthetic(s) => {
            line("synth.seed", s.seed.to_string());
            line("synth.train_sentences", s.train_sentences.to_string());
            line("synth.test_sentences", s.test_sentences.to_string());
            line("synth.noise_rate", s.noise_rate.to_string());
            line("synth.ambiguity_rate", s.ambiguity_rate.to_string());
            line("synth.unseen_fraction", s.unseen_fraction.to_string());
            line("synth.invented_names", s.invented_names_per_type.to_string());
        }
    }
    if let Some(p) = &cfg.type_map {
        line("type_map", p.display().to_string());
    }
    let t = &cfg.train;
    line("optimizer", t.optimizer.to_string());
    line("l2_sigma", t.l2_sigma.to_string());
    line("max_iterations", t.max_epochs.to_string());
    line("learning_rate", t.learning_rate.to_string());
    line("tolerance", t.tolerance.to_string());
    line("min_count", t.min_count.to_string());
    line("train.provenance", data.train.provenance.clone());
    line("test.provenance", data.test.provenance.clone());
    line("train.source_sentences", data.train.len().to_string());
    line("train.sentences", run.train_sentences.to_string());
    line("test.sentences", data.test.len().to_string());
    line("model.features", run.model.feature_map().num_features().to_string());
    line("model.iterations", run.model.metadata().iterations.to_string());
    line("model.final_objective", format!("{:.6}", run.model.metadata().final_objective));
    line(
        "truecaser",
        match &run.truecaser {
            Some(tc) => format!("trained on the training split, unigram majority-class, {} word types", tc.vocabulary_size()),
            None => "none".to_string(),
        },
    );
    let o = &run.overlap;
    line(
        "overlap.mentions",
        format!("{}/{} test mentions seen in training ({:.1}%)", o.seen_mentions, o.test_mentions, 100.0 * o.mention_ratio()),
    );
    line(
        "overlap.token_types",
        format!(
            "{}/{} lowercased test word types seen in training ({:.1}%)",
            o.seen_token_types,
            o.test_token_types,
            100.0 * o.token_type_ratio()
        ),
    );
    if cfg.type_map.is_some() {
        let fmt = |m: &BTreeMap<String, usize>| {
            if m.is_empty() {
                "none".to_string()
            } else {
                m.iter().map(|(t, n)| format!("{t} ({n})")).collect::<Vec<_>>().join(", ")
            }
        };
        line("type_map.dropped_predicted", fmt(&run.dropped.predicted));
        line("type_map.dropped_gold", fmt(&run.dropped.gold));
    }
    out.push('\n');
    out.push_str("F1 (%)\n");
    out.push_str(&render_table(&[(cfg.strategy.label().to_string(), run.grid.clone())]));
    out
}

pub(super) fn render_metrics(run: &ExperimentOutcome) -> String {
    let mut out = format!("strategy = {}\n", run.strategy);
    for (v, m) in &run.grid {
        for (k, val) in m.to_key_values(&v.name().to_lowercase()) {
            let _ = writeln!(out, "{k} = {val}");
        }
    }
    out
}
