use std::sync::Arc;

use argnli_core::entailment::Scorer;
use argnli_core::eval::{score_coref_f1, score_f1, EvalGold};
use argnli_core::inference::{predict_corpus, threshold_sweep};
use argnli_core::synthetic::{generate, PlantedOracle, SyntheticConfig};
use argnli_core::{Execution, InferenceConfig, Label};

fn config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        documents: 60,
        roles: 6,
        seed,
        ..Default::default()
    }
}

#[test]
fn planted_oracle_recovers_gold_exactly() {
    for seed in 0..5 {
        let w = generate(&config(seed));
        let oracle = PlantedOracle::new(&w.documents, &w.library);
        let scorer = Scorer::new(Arc::new(oracle.backend.clone()), 32, true);
        let preds = predict_corpus(
            &w.documents,
            &w.library,
            &w.table,
            &scorer,
            &InferenceConfig::default(),
            Execution::Parallel,
        )
        .unwrap();
        let gold = EvalGold::from_documents(&w.documents);
        let decisions: Vec<_> = preds.iter().map(|p| p.decision()).collect();
        let r = score_f1(&gold, &decisions).unwrap();
        assert_eq!(r.f1, 1.0, "seed {seed}");
        assert_eq!(r.tp, oracle.links.len());
        assert_eq!(score_coref_f1(&gold, &decisions).unwrap().f1, 1.0);

        for k in [1, 3, 10] {
            let mut corrupted = oracle.clone();
            let hit = corrupted.corrupt(k, seed + k as u64);
            assert_eq!(hit.len(), k);
            let scorer = Scorer::new(Arc::new(corrupted.backend), 32, true);
            let preds = predict_corpus(
                &w.documents,
                &w.library,
                &w.table,
                &scorer,
                &InferenceConfig::default(),
                Execution::Parallel,
            )
            .unwrap();
            let decisions: Vec<_> = preds.iter().map(|p| p.decision()).collect();
            let c = score_f1(&gold, &decisions).unwrap();
            assert_eq!(c.tp, r.tp - k);
            assert_eq!(c.fp, 0);
            for cand in &hit {
                let p = preds
                    .iter()
                    .find(|p| {
                        (
                            p.document_id.as_str(),
                            p.event_id.as_str(),
                            p.entity_id.as_str(),
                        ) == cand.key()
                    })
                    .unwrap();
                assert_eq!(p.predicted, Label::Negative);
            }
        }
    }
}

#[test]
fn unreachable_gold_lowers_recall_only() {
    let w = generate(&SyntheticConfig {
        cross_sentence_rate: 0.5,
        ..config(11)
    });
    let gold = EvalGold::from_documents(&w.documents);
    assert!(!gold.unreachable.is_empty());
    let oracle = PlantedOracle::new(&w.documents, &w.library);
    let scorer = Scorer::new(Arc::new(oracle.backend), 32, true);
    let preds = predict_corpus(
        &w.documents,
        &w.library,
        &w.table,
        &scorer,
        &InferenceConfig::default(),
        Execution::Parallel,
    )
    .unwrap();
    let decisions: Vec<_> = preds.iter().map(|p| p.decision()).collect();
    let r = score_f1(&gold, &decisions).unwrap();
    assert_eq!(r.precision, 1.0);
    assert_eq!(r.fn_, gold.unreachable.len());
}

#[test]
fn sweep_matches_full_reprediction() {
    let w = generate(&config(2));
    let mut oracle = PlantedOracle::new(&w.documents, &w.library);
    oracle.corrupt(5, 1);
    let scorer = Scorer::new(Arc::new(oracle.backend), 32, true);
    let gold = EvalGold::from_documents(&w.documents);
    let base = predict_corpus(
        &w.documents,
        &w.library,
        &w.table,
        &scorer,
        &InferenceConfig::default(),
        Execution::Parallel,
    )
    .unwrap();
    let thresholds = [0.0, 0.3, 0.5, 0.9, 0.95];
    for (t, r) in threshold_sweep(&base, &gold, &thresholds).unwrap() {
        let cfg = InferenceConfig::with_threshold(t).unwrap();
        let preds = predict_corpus(
            &w.documents,
            &w.library,
            &w.table,
            &scorer,
            &cfg,
            Execution::Sequential,
        )
        .unwrap();
        let decisions: Vec<_> = preds.iter().map(|p| p.decision()).collect();
        assert_eq!(score_f1(&gold, &decisions).unwrap(), r, "threshold {t}");
    }
}
