//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails. Criterion 6 needs the CoNLL-2003 English files in
//! the directory named by `CASENER_CONLL2003_DIR` and is skipped otherwise.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use casener::corpus::{Scheme, TagSequence};
use casener::eval::{evaluate, Metrics};
use casener::harness::{self, DataSource, ExperimentConfig, Strategy};
use casener::synth::SynthConfig;
use casener::transforms::CaseVariant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT_TOL: f64 = 1e-9;
const GRAD_TOL: f64 = 1e-4;
const TIME_LIMIT: Duration = Duration::from_secs(60);
const GRID_TIME_LIMIT: Duration = Duration::from_secs(600);
const CONLL_TIME_LIMIT: Duration = Duration::from_secs(4 * 3600);
const CONLL_MEMORY_LIMIT_KB: u64 = 16 * 1024 * 1024;
/// Margins in F1 points.
const CASE_DROP: f64 = 10.0;
const AUGMENT_GAIN: f64 = 10.0;
const AUGMENT_ORIGINAL_LOSS: f64 = 2.0;
const AUGMENT_OVER_CASELESS: f64 = 2.0;
const SEEDS: [u64; 3] = [42, 43, 44];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn exact_inference() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_z: f64 = 0.0;
    let mut worst_score: f64 = 0.0;
    let mut path_mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(2..=5);
        let s = common::sentence(&mut rng, n);
        let m = common::random_model(&mut rng, k, std::slice::from_ref(&s), false);
        worst_z = worst_z.max((m.log_partition(&s) - common::brute_log_partition(&m, &s)).abs());
        let decoded = m.decode(&s);
        let (best, best_score) = common::brute_decode(&m, &s, 1e-12);
        worst_score = worst_score.max((m.score_sequence(&s, &decoded).unwrap() - best_score).abs());
        path_mismatches += (decoded.tags() != best.as_slice()) as usize;
    }
    let elapsed = start.elapsed();
    check(
        worst_z < EXACT_TOL && worst_score < EXACT_TOL && path_mismatches == 0 && elapsed < TIME_LIMIT,
        format!(
            "200 models: max |log Z error| {worst_z:.2e}, max |score error| {worst_score:.2e}, {path_mismatches} path mismatches, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn gradient() -> Outcome {
    let start = Instant::now();
    let worst = (0..20).map(common::gradient_error).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        worst < GRAD_TOL && elapsed < TIME_LIMIT,
        format!("20 models: max relative error {worst:.2e}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let outside = |t: &TagSequence| TagSequence::new(vec!["O"; t.len()], Scheme::Iobes).unwrap();
    let mut mismatches = 0;
    let mut degenerate = 0;
    for i in 0..50 {
        let n = rng.gen_range(1..=30);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..n {
            let len = rng.gen_range(1..=10);
            let g = common::random_tags(&mut rng, len, common::TYPES);
            let p = if rng.gen_bool(0.5) { g.clone() } else { common::random_tags(&mut rng, len, common::TYPES) };
            gold.push(g);
            pred.push(p);
        }
        match i % 10 {
            0 => pred = pred.iter().map(outside).collect(),
            1 => gold = gold.iter().map(outside).collect(),
            2 => {
                pred = pred.iter().map(outside).collect();
                gold = gold.iter().map(outside).collect();
            }
            _ => {}
        }
        let m = evaluate(&pred, &gold).unwrap();
        let got = (m.overall.true_positives, m.overall.predicted_count, m.overall.gold_count);
        degenerate += (got.1 == 0 || got.2 == 0) as usize;
        mismatches += (got != common::oracle_counts(&pred, &gold)) as usize;
    }
    check(
        mismatches == 0 && degenerate >= 15,
        format!("50 corpora ({degenerate} degenerate): {mismatches} count mismatches"),
    )
}

type Grid = BTreeMap<CaseVariant, Metrics>;

fn synth_config(seed: u64, strategy: Strategy, report_dir: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        strategy,
        data: DataSource::Synthetic(SynthConfig {
            train_sentences: 2000,
            test_sentences: 500,
            noise_rate: 0.05,
            ..SynthConfig::new(seed)
        }),
        train: Default::default(),
        report_dir,
        seed,
        type_map: None,
    }
}

/// Runs the given strategies on one synthetic seed without writing files.
fn synth_grid(seed: u64, strategies: &[Strategy]) -> BTreeMap<Strategy, Grid> {
    let cfg = synth_config(seed, strategies[0], PathBuf::new());
    let data = harness::load_data(&cfg.data).unwrap();
    strategies
        .iter()
        .map(|&s| {
            let out = harness::execute(&ExperimentConfig { strategy: s, ..cfg.clone() }, &data).unwrap();
            (s, out.grid)
        })
        .collect()
}

fn f1(g: &Grid, v: CaseVariant) -> f64 {
    100.0 * g[&v].f1()
}

fn row(g: &Grid) -> String {
    CaseVariant::ALL.map(|v| format!("{:.1}", f1(g, v))).join("/")
}

fn constant_rows(grid: &BTreeMap<Strategy, Grid>) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for s in [Strategy::Caseless, Strategy::Truecasing] {
        let g = &grid[&s];
        let vals = CaseVariant::ALL.map(|v| g[&v].f1());
        ok &= vals.iter().all(|&x| x == vals[0]);
        detail.push(format!("{} {}", s.label(), row(g)));
    }
    check(ok, format!("seed 42: {}", detail.join(", ")))
}

fn directional(grids: &BTreeMap<u64, BTreeMap<Strategy, Grid>>, elapsed: Duration) -> Vec<(&'static str, Outcome)> {
    use CaseVariant::{Lower, Original, Upper};
    let g = &grids[&42];
    let (base, aug) = (&g[&Strategy::Baseline], &g[&Strategy::Augment]);
    let mut out = vec![
        (
            "5a",
            check(
                f1(base, Original) - f1(base, Lower) >= CASE_DROP && f1(base, Original) - f1(base, Upper) >= CASE_DROP,
                format!("Baseline {}", row(base)),
            ),
        ),
        (
            "5b",
            check(
                f1(aug, Lower) >= f1(base, Lower) + AUGMENT_GAIN && f1(aug, Upper) >= f1(base, Upper) + AUGMENT_GAIN,
                format!("DA {} vs Baseline {}", row(aug), row(base)),
            ),
        ),
        (
            "5c",
            check(
                f1(aug, Original) >= f1(base, Original) - AUGMENT_ORIGINAL_LOSS,
                format!("DA {:.1} vs Baseline {:.1}", f1(aug, Original), f1(base, Original)),
            ),
        ),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (seed, g) in grids {
        let (a, c) = (f1(&g[&Strategy::Augment], Original), f1(&g[&Strategy::Caseless], Original));
        ok &= a >= c + AUGMENT_OVER_CASELESS;
        detail.push(format!("seed {seed}: DA {a:.1} vs Caseless {c:.1}"));
    }
    out.push(("5d", check(ok, detail.join(", "))));
    out.push((
        "5 runtime",
        check(elapsed < GRID_TIME_LIMIT, format!("{:.0}s", elapsed.as_secs_f64())),
    ));
    out
}

fn peak_memory_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn conll2003() -> Outcome {
    let Some(dir) = std::env::var_os("CASENER_CONLL2003_DIR") else {
        return Outcome::Skip("CASENER_CONLL2003_DIR not set".into());
    };
    let dir = PathBuf::from(dir);
    let start = Instant::now();
    let report_root = dir.join("casener-report");
    let configs: Vec<_> = Strategy::ALL
        .iter()
        .map(|&s| ExperimentConfig {
            strategy: s,
            data: DataSource::Files {
                train: dir.join("eng.train"),
                test: dir.join("eng.testb"),
                parse: Default::default(),
            },
            train: Default::default(),
            report_dir: report_root.join(s.to_string()),
            seed: 42,
            type_map: None,
        })
        .collect();
    let grid = match harness::run_grid(&configs) {
        Ok(g) => g,
        Err(e) => return Outcome::Fail(format!("grid failed: {e}")),
    };
    let elapsed = start.elapsed();
    let memory = peak_memory_kb();
    let g: BTreeMap<Strategy, &Grid> = grid.runs.iter().map(|r| (r.strategy, &r.grid)).collect();
    use CaseVariant::{Lower, Original, Upper};
    let (base, cl, aug) = (g[&Strategy::Baseline], g[&Strategy::Caseless], g[&Strategy::Augment]);
    let ordered = f1(base, Original) > f1(aug, Original)
        && f1(aug, Original) > f1(cl, Original)
        && f1(aug, Lower) > f1(base, Lower)
        && f1(aug, Upper) > f1(base, Upper);
    check(
        ordered && elapsed < CONLL_TIME_LIMIT && memory.is_none_or(|m| m < CONLL_MEMORY_LIMIT_KB),
        format!(
            "{:.0}s, peak {} MB, table written to {}\n{}",
            elapsed.as_secs_f64(),
            memory.map_or("?".into(), |m| (m / 1024).to_string()),
            report_root.display(),
            grid.table.trim_end()
        ),
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for s in Strategy::ALL {
        let mut cfg = synth_config(7, s, tmp.path().join(s.to_string()));
        if let DataSource::Synthetic(sc) = &mut cfg.data {
            sc.train_sentences = 400;
            sc.test_sentences = 100;
        }
        harness::run_experiment(&cfg).unwrap();
        let first = files(&cfg.report_dir);
        harness::run_experiment(&cfg).unwrap();
        if files(&cfg.report_dir) != first {
            differing.push(s.label());
        }
    }
    check(
        differing.is_empty(),
        if differing.is_empty() {
            "model, truecaser, report and metrics identical for all strategies".into()
        } else {
            format!("output differs for {}", differing.join(", "))
        },
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        let (status, detail) = match &o {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{status} {name}: {detail}");
        results.push((name, o));
    };

    report("1 exact inference", exact_inference());
    report("2 gradient", gradient());
    report("3 metrics", metrics());

    let start = Instant::now();
    let mut grids = BTreeMap::new();
    grids.insert(42, synth_grid(42, &Strategy::ALL));
    for seed in &SEEDS[1..] {
        grids.insert(*seed, synth_grid(*seed, &[Strategy::Caseless, Strategy::Augment]));
    }
    let elapsed = start.elapsed();
    report("4 strategy invariants", constant_rows(&grids[&42]));
    for (name, o) in directional(&grids, elapsed) {
        report(name, o);
    }
    report("6 CoNLL-2003", conll2003());
    report("7 determinism", determinism());

    let failed: Vec<_> = results.iter().filter(|(_, o)| matches!(o, Outcome::Fail(_))).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
