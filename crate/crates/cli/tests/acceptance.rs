//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test -p statesum-cli --test acceptance -- --nocapture`
//! to see the lines.
//!
//! Oracles in this file are deliberately independent re-derivations
//! (bitmask LCS, linear-scan n-gram counts, hand-rolled token sums), not
//! calls back into the code paths they check.

use std::collections::BTreeSet;
use std::process::{Command, Output};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use statesum::baselines::greedy_oracle_trace;
use statesum::codec::{serialize_state, DialogueState, StateTuple};
use statesum::corpus::save_corpus;
use statesum::extract::{extract_tuples, render_reference_summary};
use statesum::factual::{classify_errors, factual_prf};
use statesum::perturb::{inject_noise, noisy_accuracy, NoiseSpec, OperationMix};
use statesum::rouge::{rouge_l, rouge_n, Tokenizer};
use statesum::synth::{random_state, synth_corpus};
use statesum::Ontology;

const ONTOLOGY_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/ontology.json");
const CORPUS_PATH: &str =
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/corpus_small.jsonl");

fn fixture() -> Ontology {
    Ontology::from_json(&std::fs::read_to_string(ONTOLOGY_PATH).unwrap()).unwrap()
}

fn pass(number: u32, name: &str) {
    println!("ACCEPTANCE {number} ({name}): PASS");
}

/// A randomized (hypothesis, target) pair sharing structure: the hypothesis
/// is the target with seeded drops, swaps, and foreign additions.
fn random_pair(ontology: &Ontology, rng: &mut ChaCha8Rng) -> (DialogueState, DialogueState) {
    let tgt = random_state(ontology, rng);
    let mut hyp = if rng.random_bool(0.6) {
        tgt.clone()
    } else {
        random_state(ontology, rng)
    };
    for tuple in hyp.iter().cloned().collect::<Vec<_>>() {
        if rng.random_bool(0.25) {
            hyp.remove(&tuple);
        }
    }
    if rng.random_bool(0.5) {
        for tuple in random_state(ontology, rng).iter().take(2) {
            hyp.insert(tuple.clone());
        }
    }
    (hyp, tgt)
}

#[test]
fn criterion_1_factual_metric_identities() {
    let started = Instant::now();
    let ontology = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac1);

    // The stated conventions, checked directly.
    let empty = DialogueState::new();
    let both_empty = factual_prf(&empty, &empty);
    assert_eq!((both_empty.precision, both_empty.recall, both_empty.f1), (1.0, 1.0, 1.0));

    for _ in 0..1_000 {
        let (hyp, tgt) = random_pair(&ontology, &mut rng);

        let forward = factual_prf(&hyp, &tgt);
        let backward = factual_prf(&tgt, &hyp);
        assert_eq!(forward.precision, backward.recall, "P/R swap symmetry");
        assert_eq!(forward.recall, backward.precision, "P/R swap symmetry");
        assert_eq!(forward.f1, backward.f1, "F1 symmetry");

        let identity = factual_prf(&tgt, &tgt);
        assert_eq!((identity.precision, identity.recall, identity.f1), (1.0, 1.0, 1.0));

        // Adding a non-matching tuple never raises precision.
        let foreign = random_state(&ontology, &mut rng)
            .iter()
            .find(|t| !hyp.contains(t) && !tgt.contains(t))
            .cloned();
        if let Some(foreign) = foreign {
            let mut grown = hyp.clone();
            grown.insert(foreign);
            assert!(factual_prf(&grown, &tgt).precision <= forward.precision + 1e-12);
        }
        // Adding a matching tuple never lowers any score.
        let missing = tgt.iter().find(|t| !hyp.contains(t)).cloned();
        if let Some(missing) = missing {
            let mut grown = hyp.clone();
            grown.insert(missing);
            let after = factual_prf(&grown, &tgt);
            assert!(after.precision >= forward.precision - 1e-12);
            assert!(after.recall >= forward.recall - 1e-12);
            assert!(after.f1 >= forward.f1 - 1e-12);
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    pass(1, "factual metric identity suite, 1000 pairs");
}

#[test]
fn criterion_2_worked_factual_example() {
    let tuple = |s: &str, v: &str| StateTuple::new("hotel", "book_hotel", s, v);
    let hyp: DialogueState =
        [tuple("stars", "4"), tuple("price", "cheap"), tuple("area", "west")]
            .into_iter()
            .collect();
    let tgt: DialogueState = [
        tuple("stars", "4"),
        tuple("price", "cheap"),
        tuple("people", "2"),
        tuple("parking", "yes"),
    ]
    .into_iter()
    .collect();
    let score = factual_prf(&hyp, &tgt);
    assert_eq!((score.n_hyp, score.n_tgt, score.n_match), (3, 4, 2));
    assert!((score.precision - 2.0 / 3.0).abs() <= 1e-9);
    assert!((score.recall - 0.5).abs() <= 1e-9);
    assert!((score.f1 - 4.0 / 7.0).abs() <= 1e-9);
    pass(2, "worked factual example P=0.6667 R=0.5 F1=0.5714");
}

/// Exponential-time LCS: longest subsequence of `short` that also embeds
/// in `long`, by enumerating all 2^|short| subsequences.
fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    'mask: for mask in 0u32..(1 << short.len()) {
        let length = mask.count_ones() as usize;
        if length <= best {
            continue;
        }
        let mut cursor = 0;
        for (i, token) in short.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            match long[cursor..].iter().position(|t| t == token) {
                Some(offset) => cursor += offset + 1,
                None => continue 'mask,
            }
        }
        best = length;
    }
    best
}

/// Clipped n-gram matches by linear scans over explicit n-gram lists.
fn oracle_clipped(hyp: &[String], reference: &[String], n: usize) -> usize {
    if hyp.len() < n || reference.len() < n {
        return 0;
    }
    let hyp_grams: Vec<&[String]> = hyp.windows(n).collect();
    let ref_grams: Vec<&[String]> = reference.windows(n).collect();
    let mut counted: Vec<&[String]> = Vec::new();
    let mut total = 0;
    for gram in &hyp_grams {
        if counted.contains(gram) {
            continue;
        }
        counted.push(gram);
        let in_hyp = hyp_grams.iter().filter(|g| *g == gram).count();
        let in_ref = ref_grams.iter().filter(|g| *g == gram).count();
        total += in_hyp.min(in_ref);
    }
    total
}

#[test]
fn criterion_3_rouge_matches_brute_force() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac3);
    let alphabet = ["a", "b", "c", "d"];
    for _ in 0..200 {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let len = rng.random_range(0..=10);
            (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string())
                .collect()
        };
        let hyp = draw(&mut rng);
        let reference = draw(&mut rng);

        let lcs = oracle_lcs(&hyp, &reference);
        let score = rouge_l(&hyp, &reference);
        if !hyp.is_empty() && !reference.is_empty() {
            assert_eq!(score.precision, lcs as f64 / hyp.len() as f64);
            assert_eq!(score.recall, lcs as f64 / reference.len() as f64);
        }

        for n in 1..=2 {
            let score = rouge_n(&hyp, &reference, n);
            let hyp_units = hyp.len().saturating_sub(n - 1);
            let ref_units = reference.len().saturating_sub(n - 1);
            if hyp.is_empty() || reference.is_empty() || hyp_units == 0 || ref_units == 0 {
                continue;
            }
            let matches = oracle_clipped(&hyp, &reference, n);
            assert_eq!(score.precision, matches as f64 / hyp_units as f64);
            assert_eq!(score.recall, matches as f64 / ref_units as f64);
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    pass(3, "rouge-l/1/2 equal brute-force oracles on 200 lists");
}

#[test]
fn criterion_4_closed_loop_extraction() {
    let started = Instant::now();
    let ontology = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac4);
    let mut exact = 0;
    let mut first_miss = None;
    for case in 0..500 {
        let state = random_state(&ontology, &mut rng);
        let rendered = render_reference_summary(&state, &ontology).unwrap();
        let recovered = extract_tuples(&rendered, &ontology);
        if recovered.tuples == state {
            exact += 1;
        } else if first_miss.is_none() {
            first_miss = Some((case, rendered));
        }
    }
    let elapsed = started.elapsed();
    assert!(
        exact >= 495,
        "only {exact}/500 states recovered exactly; first miss: {first_miss:?}"
    );
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    pass(
        4,
        &format!("closed-loop extraction recovered {exact}/500 states"),
    );
}

#[test]
fn criterion_5_noise_calibration() {
    let ontology = fixture();
    for (t_index, target) in [0.3, 0.5, 0.7, 0.9].into_iter().enumerate() {
        for run in 0..100u64 {
            let seed = (t_index as u64) * 1_000 + run;
            let state = random_state(&ontology, &mut ChaCha8Rng::seed_from_u64(seed));
            let spec = NoiseSpec {
                target_accuracy: target,
                operation_mix: OperationMix::default(),
                seed,
            };
            let noisy = inject_noise(&state, &spec, &ontology).unwrap();
            let realized = noisy_accuracy(&noisy, &state);
            let tolerance = 1.0 / state.len() as f64;
            assert!(
                (realized - target).abs() <= tolerance + 1e-12,
                "target {target}, realized {realized}, n = {}, seed {seed}",
                state.len()
            );
            let again = inject_noise(&state, &spec, &ontology).unwrap();
            assert_eq!(
                serialize_state(&noisy),
                serialize_state(&again),
                "same seed must be byte-identical"
            );
        }
    }
    pass(5, "noise calibration within 1/n at 4 targets x 100 seeds");
}

#[test]
fn criterion_6_greedy_oracle_dominates_single_utterances() {
    let ontology = fixture();
    let corpus = synth_corpus(&ontology, 100, 0xac6).unwrap();
    let tokenizer = Tokenizer::default();
    for dialogue in &corpus {
        assert!(dialogue.turns.len() <= 8, "synthetic dialogues stay small");
        let reference = dialogue.summary.as_deref().unwrap();
        let reference_tokens = tokenizer.tokenize(reference);

        let started = Instant::now();
        let (summary, trace) = greedy_oracle_trace(dialogue, reference);
        let elapsed = started.elapsed();
        assert!(elapsed.as_secs_f64() < 1.0, "one run took {elapsed:?}");

        let final_score = rouge_n(&tokenizer.tokenize(&summary.text), &reference_tokens, 2).f;
        let best_single = (0..dialogue.turns.len())
            .map(|i| {
                rouge_n(&tokenizer.tokenize(&dialogue.turns[i].text), &reference_tokens, 2).f
            })
            .fold(0.0, f64::max);
        assert!(
            final_score >= best_single - 1e-12,
            "{}: greedy {final_score} < best single {best_single}",
            dialogue.id
        );
        for step in trace.windows(2) {
            assert!(step[1] > step[0], "greedy steps must strictly improve");
        }
    }
    pass(6, "greedy oracle >= best single utterance on 100 dialogues");
}

#[test]
fn criterion_7_error_classifier_accounting() {
    let ontology = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac7);
    for _ in 0..500 {
        let (hyp, tgt) = random_pair(&ontology, &mut rng);
        let profile = classify_errors(&hyp, &tgt);
        let unmatched: usize = hyp.difference(&tgt).count() + tgt.difference(&hyp).count();
        assert_eq!(
            profile.tuples_accounted(),
            unmatched,
            "five categories must partition the unmatched tuples"
        );
    }

    // The canonical wrong-star-rating disagreement.
    let hyp: DialogueState =
        [StateTuple::new("hotel", "book_hotel", "stars", "3")].into_iter().collect();
    let tgt: DialogueState =
        [StateTuple::new("hotel", "book_hotel", "stars", "4")].into_iter().collect();
    let profile = classify_errors(&hyp, &tgt);
    assert_eq!(profile.slot_value_error, 1);
    assert_eq!(profile.total(), 1);
    pass(7, "error accounting exact on 500 pairs; star fixture = 1 value error");
}

fn statesum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_statesum"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Independent token counter restating the default tokenizer rules.
fn oracle_token_count(text: &str) -> usize {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .count()
}

#[test]
fn criterion_8_corpus_statistics() {
    // With the real corpus present (TODSUM_CORPUS), check its published
    // statistics; otherwise the 20-dialogue fixture must match
    // hand-computed means exactly.
    if let Ok(path) = std::env::var("TODSUM_CORPUS") {
        let ontology_path =
            std::env::var("TODSUM_ONTOLOGY").unwrap_or_else(|_| ONTOLOGY_PATH.to_string());
        let output = statesum(&["stats", "--corpus", &path, "--ontology", &ontology_path]);
        assert!(output.status.success());
        let report: serde_json::Value =
            serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
        let stats = &report["stats"];
        assert_eq!(stats["size"].as_u64().unwrap(), 9_906);
        let within = |value: f64, expected: f64| (value - expected).abs() <= 0.05 * expected;
        assert!(within(stats["avg_dialogue_len"].as_f64().unwrap(), 186.9));
        assert!(within(stats["avg_turns"].as_f64().unwrap(), 14.1));
        assert!(within(stats["avg_summary_len"].as_f64().unwrap(), 45.4));
        pass(8, "full corpus statistics within ±5% of published values");
        return;
    }

    let output = statesum(&["stats", "--corpus", CORPUS_PATH, "--ontology", ONTOLOGY_PATH]);
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    let stats = &report["stats"];

    // Hand computation: integer sums over the raw JSONL, divided once.
    let raw = std::fs::read_to_string(CORPUS_PATH).unwrap();
    let mut dialogue_tokens = 0usize;
    let mut summary_tokens = 0usize;
    let mut turns = 0usize;
    let mut domains = 0usize;
    let mut intents = 0usize;
    let mut size = 0usize;
    for line in raw.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        size += 1;
        for turn in value["turns"].as_array().unwrap() {
            turns += 1;
            dialogue_tokens += oracle_token_count(turn["text"].as_str().unwrap());
        }
        summary_tokens += oracle_token_count(value["summary"].as_str().unwrap());
        let state = value["state"].as_array().unwrap();
        let domain_set: BTreeSet<&str> =
            state.iter().map(|t| t["domain"].as_str().unwrap()).collect();
        let intent_set: BTreeSet<(&str, &str)> = state
            .iter()
            .map(|t| (t["domain"].as_str().unwrap(), t["intent"].as_str().unwrap()))
            .collect();
        domains += domain_set.len();
        intents += intent_set.len();
    }
    assert_eq!(size, 20);
    let n = size as f64;
    assert_eq!(stats["size"].as_u64().unwrap() as usize, size);
    assert_eq!(stats["avg_dialogue_len"].as_f64().unwrap(), dialogue_tokens as f64 / n);
    assert_eq!(stats["avg_turns"].as_f64().unwrap(), turns as f64 / n);
    assert_eq!(stats["avg_summary_len"].as_f64().unwrap(), summary_tokens as f64 / n);
    assert_eq!(stats["avg_domains_per_dialogue"].as_f64().unwrap(), domains as f64 / n);
    assert_eq!(stats["avg_intents_per_dialogue"].as_f64().unwrap(), intents as f64 / n);

    // Frozen values pin the fixture itself.
    assert_eq!(stats["avg_dialogue_len"].as_f64().unwrap(), 42.8);
    assert_eq!(stats["avg_turns"].as_f64().unwrap(), 5.7);
    assert_eq!(stats["avg_summary_len"].as_f64().unwrap(), 20.9);
    assert_eq!(stats["avg_domains_per_dialogue"].as_f64().unwrap(), 1.85);
    assert_eq!(stats["avg_intents_per_dialogue"].as_f64().unwrap(), 2.05);
    pass(8, "fixture statistics equal hand-computed means exactly");
}

#[test]
fn criterion_9_end_to_end_pipeline() {
    let started = Instant::now();
    let ontology = fixture();
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("gold.jsonl");
    let corpus = synth_corpus(&ontology, 50, 0xac9).unwrap();
    save_corpus(&corpus, &corpus_path).unwrap();

    let predictions = dir.path().join("oracle.jsonl");
    let output = statesum(&[
        "baseline",
        "--gold", corpus_path.to_str().unwrap(),
        "--ontology", ONTOLOGY_PATH,
        "--method", "oracle",
        "--out", predictions.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let report_path = dir.path().join("report.json");
    let output = statesum(&[
        "evaluate",
        "--gold", corpus_path.to_str().unwrap(),
        "--predictions", predictions.to_str().unwrap(),
        "--ontology", ONTOLOGY_PATH,
        "--workers", "4",
        "--report", report_path.to_str().unwrap(),
        "--per-sample", dir.path().join("per_sample.jsonl").to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["schema_version"].as_u64().unwrap(), 1);
    assert_eq!(report["samples"].as_u64().unwrap(), 50);
    for section in ["rouge", "factual", "config"] {
        assert!(report[section].is_object(), "report must carry {section}");
    }
    let conventions = &report["config"]["conventions"];
    for key in ["empty_sides", "factual_matching", "state_accuracy", "rouge_counting"] {
        let text = conventions[key].as_str().unwrap_or("");
        assert!(!text.is_empty(), "convention {key} must be echoed");
    }
    for variant in ["rouge1", "rouge2", "rouge_l"] {
        let f = report["rouge"][variant]["f"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f));
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "pipeline took {elapsed:?}, budget 30 s");
    pass(9, "baseline oracle piped into evaluate on 50 dialogues");
}
