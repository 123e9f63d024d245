mod common;

use casener::corpus::{Scheme, TagSequence};
use casener::crf::{self, TrainConfig};
use casener::features::TemplateSet;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::with_weights;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_partition_matches_enumeration(seed in any::<u64>(), n in 1usize..=5, k in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::sentence(&mut rng, n);
        let m = common::random_model(&mut rng, k, std::slice::from_ref(&s), false);
        let brute = common::brute_log_partition(&m, &s);
        prop_assert!((m.log_partition(&s) - brute).abs() < 1e-9, "{} vs {}", m.log_partition(&s), brute);
    }

    #[test]
    fn decode_matches_enumeration(seed in any::<u64>(), n in 1usize..=5, k in 2usize..=5, quantized in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::sentence(&mut rng, n);
        let m = common::random_model(&mut rng, k, std::slice::from_ref(&s), quantized);
        let decoded = m.decode(&s);
        prop_assert!(casener::corpus::validate_tags(decoded.tags(), Scheme::Iobes).is_ok());
        let (best, best_score) = common::brute_decode(&m, &s, if quantized { 0.0 } else { 1e-12 });
        let score = m.score_sequence(&s, &decoded).unwrap();
        prop_assert!((score - best_score).abs() < 1e-9);
        prop_assert_eq!(decoded.tags(), best.as_slice());
    }

    #[test]
    fn marginals_are_normalized_and_consistent(seed in any::<u64>(), n in 1usize..=5, k in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::sentence(&mut rng, n);
        let m = common::random_model(&mut rng, k, std::slice::from_ref(&s), false);
        let mg = m.marginals(&s);
        for t in 0..n {
            let row: f64 = mg.node[t * k..(t + 1) * k].iter().sum();
            prop_assert!((row - 1.0).abs() < 1e-9);
        }
        for t in 1..n {
            for j in 0..k {
                let from_edges: f64 = (0..k).map(|i| mg.edge[((t - 1) * k + i) * k + j]).sum();
                prop_assert!((from_edges - mg.node[t * k + j]).abs() < 1e-9);
            }
            for i in 0..k {
                let from_edges: f64 = (0..k).map(|j| mg.edge[((t - 1) * k + i) * k + j]).sum();
                prop_assert!((from_edges - mg.node[(t - 1) * k + i]).abs() < 1e-9);
            }
        }
        // Node marginals against enumeration.
        let em = m.emission_scores(&s);
        let log_z = common::brute_log_partition(&m, &s);
        let mut brute = vec![0.0; n * k];
        for p in common::all_paths(n, k) {
            let pr = (common::path_score(&m, &em, &p) - log_z).exp();
            for (t, &y) in p.iter().enumerate() {
                brute[t * k + y] += pr;
            }
        }
        for (a, b) in mg.node.iter().zip(&brute) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn decode_ignores_uniform_shifts(seed in any::<u64>(), n in 1usize..=6, shift in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::sentence(&mut rng, n);
        let m = common::random_model(&mut rng, 5, std::slice::from_ref(&s), false);
        // Every path picks up one begin weight and one end weight, and
        // n - 1 transitions.
        let mut w = m.weights().to_vec();
        for tag in m.feature_map().tags() {
            w[m.begin_index(tag).unwrap()] += shift;
            w[m.end_index(tag).unwrap()] -= 2.0 * shift;
            for to in m.feature_map().tags() {
                w[m.transition_index(tag, to).unwrap()] += shift;
            }
        }
        let shifted = with_weights(&m, w);
        prop_assert_eq!(shifted.decode(&s), m.decode(&s));
        let delta = shifted.log_partition(&s) - m.log_partition(&s);
        prop_assert!((delta - (n as f64 - 2.0) * shift).abs() < 1e-9);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5 {
        let err = common::gradient_error(seed);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn zero_weights_decode_to_outside() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = common::sentence(&mut rng, 4);
    let m = common::random_model(&mut rng, 5, std::slice::from_ref(&s), false);
    let zero = with_weights(&m, vec![0.0; m.weights().len()]);
    assert_eq!(zero.decode(&s).tags(), ["O", "O", "O", "O"]);
    assert!((zero.log_partition(&s) - (5f64).powi(4).ln()).abs() < 1e-12);
}

#[test]
fn save_load_roundtrip_on_trained_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let corpus = common::random_corpus(&mut rng, 100, 8, common::TYPES);
    let cfg = TrainConfig {
        max_epochs: 30,
        ..TrainConfig::default()
    };
    let m = crf::train(&corpus, TemplateSet::CaseAware, &cfg).unwrap();
    let bytes = crf::save(&m);
    let loaded = crf::load(&bytes).unwrap();
    assert_eq!(loaded, m);
    assert_eq!(crf::save(&loaded), bytes);
    for a in &corpus {
        assert_eq!(loaded.decode(a.sentence()), m.decode(a.sentence()));
    }
    let mut truncated = bytes.clone();
    truncated.truncate(bytes.len() - 3);
    assert!(crf::load(&truncated).is_err());
    let mut wrong_magic = bytes.clone();
    wrong_magic[0] ^= 0xff;
    assert!(crf::load(&wrong_magic).is_err());
    let mut wrong_version = bytes;
    wrong_version[8] = 99;
    assert!(crf::load(&wrong_version).is_err());
}

#[test]
fn score_sequence_rejects_mismatched_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = common::sentence(&mut rng, 3);
    let m = common::random_model(&mut rng, 5, std::slice::from_ref(&s), false);
    let short = TagSequence::new(["O", "O"], Scheme::Iobes).unwrap();
    assert!(m.score_sequence(&s, &short).is_err());
    let unknown = TagSequence::new(["O", "S-LOC", "O"], Scheme::Iobes).unwrap();
    assert!(m.score_sequence(&s, &unknown).is_err());
}
