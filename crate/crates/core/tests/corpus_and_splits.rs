use std::collections::{BTreeSet, HashSet};

use argnli_core::corpus::{
    document_to_line, generate_candidates, gold_roles, load_corpus, read_corpus, save_corpus,
};
use argnli_core::splits::{filter_documents, group_by_event, make_splits, split_stats, SplitSpec};
use argnli_core::synthetic::{generate, SyntheticConfig};
use argnli_core::{Document, Label};

const FRACTIONS: [f64; 5] = [0.01, 0.05, 0.1, 0.2, 1.0];

fn corpus(seed: u64, documents: usize) -> Vec<Document> {
    generate(&SyntheticConfig {
        documents,
        cross_sentence_rate: 0.2,
        seed,
        ..Default::default()
    })
    .documents
}

#[test]
fn round_trip_is_identity_on_canonical_form() {
    let docs = corpus(1, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    save_corpus(&path, &docs).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(loaded, docs);
    save_corpus(&path, &loaded).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn serialized_lines_follow_the_native_layout() {
    let line = document_to_line(&argnli_core::synthetic::figure_one());
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    for key in ["id", "text", "sentences", "entities", "events", "coref"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["events"][0]["trigger"]["start"], 28);
    assert_eq!(v["events"][0]["subtype"], "Start-Position");
    assert_eq!(v["entities"][1]["type"], "PER");
    assert_eq!(
        read_corpus(line.as_bytes()).unwrap()[0],
        argnli_core::synthetic::figure_one()
    );
}

/// Independent quadratic enumeration over (event, entity) pairs.
fn brute_force_candidates(doc: &Document) -> Vec<(String, String, Label)> {
    let sentence = |start: usize, end: usize| {
        doc.sentences
            .iter()
            .position(|s| s.start <= start && end <= s.end)
            .unwrap()
    };
    let mut out = Vec::new();
    for ev in &doc.events {
        let ts = sentence(ev.trigger_span.start, ev.trigger_span.end);
        for e in &doc.entities {
            if sentence(e.span.start, e.span.end) != ts {
                continue;
            }
            let mut label = Label::Negative;
            for a in &ev.arguments {
                if a.entity_id == e.id {
                    label = Label::Role(a.role.clone());
                    break;
                }
            }
            out.push((ev.id.clone(), e.id.clone(), label));
        }
    }
    out
}

#[test]
fn candidates_match_enumeration_oracle() {
    for seed in 0..200 {
        for doc in corpus(seed, 4) {
            assert!(doc.entities.len() <= 20);
            let got: Vec<_> = generate_candidates(&doc)
                .into_iter()
                .map(|c| (c.event_id, c.entity_id, c.gold_role))
                .collect();
            assert_eq!(got, brute_force_candidates(&doc));
        }
    }
}

#[test]
fn splits_are_nested_for_every_seed() {
    for seed in 0..200 {
        let docs = corpus(seed, 30);
        let groups = group_by_event(&docs);
        let splits =
            make_splits(&groups, &SplitSpec::new(FRACTIONS.to_vec(), seed).unwrap()).unwrap();
        for w in splits.windows(2) {
            let small: HashSet<_> = w[0].events.iter().collect();
            let large: HashSet<_> = w[1].events.iter().collect();
            assert!(small.is_subset(&large), "seed {seed}");
            let cands: HashSet<_> = w[1].candidates.iter().collect();
            assert!(w[0].candidates.iter().all(|c| cands.contains(c)));
        }
        let all: Vec<_> = groups.iter().flat_map(|g| g.candidates.clone()).collect();
        assert_eq!(splits.last().unwrap().candidates, all);
    }
}

#[test]
fn splits_are_deterministic_per_seed() {
    let docs = corpus(4, 50);
    let groups = group_by_event(&docs);
    let run =
        |seed| make_splits(&groups, &SplitSpec::new(FRACTIONS.to_vec(), seed).unwrap()).unwrap();
    assert_eq!(run(0), run(0));
    assert_eq!(run(24), run(24));
    assert_ne!(run(0)[3], run(42)[3]);
}

#[test]
fn stats_match_recount() {
    for seed in 0..50 {
        let docs = corpus(seed, 20);
        let roles: BTreeSet<String> = gold_roles(&docs);
        let splits = make_splits(
            &group_by_event(&docs),
            &SplitSpec::new(FRACTIONS.to_vec(), seed).unwrap(),
        )
        .unwrap();
        for s in &splits {
            let stats = split_stats(&s.candidates, &roles);
            assert_eq!(stats.total, s.candidates.len());
            // Recount from the documents the split keeps.
            let kept = filter_documents(&docs, s);
            let recount: Vec<_> = kept.iter().flat_map(generate_candidates).collect();
            assert_eq!(recount.len(), stats.total);
            let pos = recount
                .iter()
                .filter(|c| !c.gold_role.is_negative())
                .count();
            assert_eq!(pos, stats.positives);
            for role in &roles {
                let n = recount
                    .iter()
                    .filter(|c| c.gold_role.role() == Some(role.as_str()))
                    .count();
                assert_eq!(stats.per_role[role], n);
            }
            let mean = roles.iter().map(|r| stats.per_role[r]).sum::<usize>() as f64
                / roles.len().max(1) as f64;
            assert!((stats.mean_positives_per_role - mean).abs() < 1e-12);
        }
    }
}
