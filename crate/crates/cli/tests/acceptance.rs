//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::net::TcpStream;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use argnli_core::corpus::generate_candidates;
use argnli_core::entailment::wire::{EntailResponse, ENTAIL_PATH};
use argnli_core::entailment::LookupBackend;
use argnli_core::eval::{
    auc, parse_curve, recall_diff, score_coref_f1, score_f1, Decision, EvalGold,
};
use argnli_core::inference::{plan_candidate, predict_corpus, predict_document, predict_role};
use argnli_core::recast::{recast_candidate, recast_corpus, write_examples, NliLabel};
use argnli_core::splits::{filter_documents, group_by_event, make_splits, split_stats, SplitSpec};
use argnli_core::synthetic::{figure_one, generate, SyntheticConfig, SyntheticWorld};
use argnli_core::templates::{EventContext, Template, TemplateCategory};
use argnli_core::{
    Document, EntailmentJudgment, Execution, InferenceConfig, Label, PremiseHypothesisPair,
    SamplingConfig, Scorer, TemplateLibrary,
};
use argnli_service::{entail_router, BackgroundServer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

type Link = (String, String, String, String);

fn world(seed: u64, documents: usize, roles: usize) -> SyntheticWorld {
    generate(&SyntheticConfig {
        documents,
        roles,
        seed,
        ..Default::default()
    })
}

/// Gold links read straight off the event annotations.
fn annotated_links(docs: &[Document]) -> HashSet<Link> {
    docs.iter()
        .flat_map(|d| {
            d.events.iter().flat_map(move |e| {
                e.arguments.iter().map(move |a| {
                    (
                        d.id.clone(),
                        e.id.clone(),
                        a.entity_id.clone(),
                        a.role.clone(),
                    )
                })
            })
        })
        .collect()
}

fn predicted_links(decisions: &[Decision]) -> HashSet<Link> {
    decisions
        .iter()
        .filter_map(|d| {
            d.predicted.role().map(|r| {
                (
                    d.document_id.clone(),
                    d.event_id.clone(),
                    d.entity_id.clone(),
                    r.to_string(),
                )
            })
        })
        .collect()
}

fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

// ---------------------------------------------------------------- AUC

const TABLE_ROWS: &[(&str, &str, f64, f64)] = &[
    (
        "ACE NLI, six points",
        "0,40.6\n1,45.4\n5,57.1\n10,64.6\n20,69.8\n100,74.6\n",
        70.00,
        0.005,
    ),
    (
        "WikiEvents NLI, six points",
        "0,35.9\n1,42.6\n5,52.2\n10,59.5\n20,65.4\n100,69.9\n",
        65.45,
        0.005,
    ),
    (
        "ACE NLI, three points",
        "0,40.6\n5,57.1\n100,74.6\n",
        65.0,
        0.05,
    ),
    (
        "ACE NLI+WikiEvents, three points",
        "0,62.7\n5,69.3\n100,74.9\n",
        71.8,
        0.05,
    ),
    (
        "WikiEvents NLI, three points",
        "0,35.9\n5,52.2\n100,69.9\n",
        60.2,
        0.05,
    ),
    (
        "WikiEvents NLI+ACE, three points",
        "0,57.3\n5,65.2\n100,71.5\n",
        68.0,
        0.05,
    ),
];

fn auc_reproduction() -> Outcome {
    let start = Instant::now();
    let mut got = Vec::new();
    for (name, text, want, tol) in TABLE_ROWS {
        let points = parse_curve(text).map_err(|e| format!("{name}: {e}"))?;
        let value = auc(&points).map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            (value - want).abs() <= *tol,
            "{name}: {value} vs {want} ± {tol}"
        );
        got.push(format!("{value:.2}"));
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = dir.path().join("ace.csv");
    std::fs::write(&file, TABLE_ROWS[0].1).map_err(|e| e.to_string())?;
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_argnli"))
        .arg("auc")
        .arg(&file)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "argnli auc failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    ensure!(
        out.stdout == b"70.00\n",
        "argnli auc printed {:?}",
        String::from_utf8_lossy(&out.stdout)
    );

    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "{} rows [{}], cli prints 70.00",
        TABLE_ROWS.len(),
        got.join(", ")
    ))
}

// ---------------------------------------------------------- planted e2e

const PLANTED: EntailmentJudgment = EntailmentJudgment {
    entail: 0.9,
    neutral: 0.05,
    contradict: 0.05,
};

/// Gold hypotheses per reachable gold link, built from the annotations.
fn planted_pairs(w: &SyntheticWorld) -> BTreeMap<Link, Vec<PremiseHypothesisPair>> {
    let mut out = BTreeMap::new();
    for doc in &w.documents {
        for ev in &doc.events {
            let trigger_sentence = doc.sentence_of(ev.trigger_span);
            let premise = doc.trigger_sentence(ev).expect("premise");
            let key = ev.subtype_key();
            let ctx = EventContext::new(&ev.trigger_surface, &ev.event_type, &key);
            for a in &ev.arguments {
                let ent = doc.entity(&a.entity_id).expect("entity");
                if doc.sentence_of(ent.span) != trigger_sentence {
                    continue;
                }
                let pairs = w
                    .library
                    .templates(&a.role)
                    .expect("role")
                    .iter()
                    .filter(|t| t.applies_to(&key))
                    .map(|t| {
                        PremiseHypothesisPair::new(
                            premise,
                            t.verbalize(&ctx, &ent.surface, &w.library.canonical_map)
                                .unwrap(),
                        )
                    })
                    .collect();
                out.insert(
                    (
                        doc.id.clone(),
                        ev.id.clone(),
                        a.entity_id.clone(),
                        a.role.clone(),
                    ),
                    pairs,
                );
            }
        }
    }
    out
}

fn planted_end_to_end() -> Outcome {
    let start = Instant::now();
    let (docs_n, roles_n) = (60, 6);
    let w = world(2024, docs_n, roles_n);
    ensure!(
        w.library.role_set().len() >= 5,
        "only {} roles",
        w.library.role_set().len()
    );
    let planted = planted_pairs(&w);
    let gold = annotated_links(&w.documents);
    ensure!(planted.len() == gold.len(), "fixture has unreachable gold");
    let table =
        LookupBackend::from_entries(planted.values().flatten().map(|p| (p.clone(), PLANTED)));
    let eval_gold = EvalGold::from_documents(&w.documents);
    let cfg = InferenceConfig::default();

    let run =
        |lookup: LookupBackend| -> Result<(Vec<Decision>, argnli_core::eval::EvalResult), String> {
            let scorer = Scorer::new(Arc::new(lookup), 32, true);
            let preds = predict_corpus(
                &w.documents,
                &w.library,
                &w.table,
                &scorer,
                &cfg,
                Execution::Parallel,
            )
            .map_err(|e| e.to_string())?;
            let decisions: Vec<Decision> = preds.iter().map(|p| p.decision()).collect();
            let r = score_f1(&eval_gold, &decisions).map_err(|e| e.to_string())?;
            Ok((decisions, r))
        };

    let (decisions, r) = run(table.clone())?;
    let predicted = predicted_links(&decisions);
    ensure!(predicted == gold, "predicted links differ from gold");
    ensure!(
        r.f1 == 1.0,
        "F1 {} (tp {} fp {} fn {})",
        r.f1,
        r.tp,
        r.fp,
        r.fn_
    );
    ensure!(
        r.tp == gold.len(),
        "tp {} vs {} gold links",
        r.tp,
        gold.len()
    );

    let links: Vec<&Link> = planted.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ks = Vec::new();
    for k in [1, 5, 17] {
        let mut corrupted = table.clone();
        let picked = rand::seq::index::sample(&mut rng, links.len(), k);
        for i in picked.iter() {
            for p in &planted[links[i]] {
                corrupted.remove(p);
            }
        }
        let (_, c) = run(corrupted)?;
        ensure!(c.tp == r.tp - k, "k={k}: tp {} expected {}", c.tp, r.tp - k);
        ensure!(c.fp == 0, "k={k}: fp {}", c.fp);
        ks.push(k);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "{docs_n} docs, {roles_n} roles, {} gold links, F1 1.000; corrupting k∈{ks:?} drops TP by k",
        gold.len()
    ))
}

// ---------------------------------------------------------------- recast

fn recast_properties() -> Outcome {
    let defaults = SamplingConfig::default();
    ensure!(
        (defaults.n_entail, defaults.n_neutral, defaults.n_contradict) == (2, 5, 5),
        "defaults {defaults:?}"
    );
    let mut candidates = 0;
    let mut examples = 0;
    let mut excluded = 0;
    let mut seed = 0;
    while candidates < 1000 {
        let w = world(seed, 30, 6);
        let cfg = SamplingConfig { seed, ..defaults };
        let loose = SamplingConfig {
            constrained: false,
            ..cfg
        };
        for doc in &w.documents {
            for c in generate_candidates(doc) {
                candidates += 1;
                let ev = doc.event(&c.event_id).unwrap();
                let ent = doc.entity(&c.entity_id).unwrap();
                let key = ev.subtype_key();
                let premise = doc.trigger_sentence(ev).unwrap();
                let ctx = EventContext::new(&ev.trigger_surface, &ev.event_type, &key);
                let applicable: Vec<&Template> = w
                    .library
                    .all_templates()
                    .filter(|t| t.applies_to(&key))
                    .collect();
                let ex = recast_candidate(&c, doc, &w.library, &w.table, &cfg, "s")
                    .map_err(|e| e.to_string())?;
                examples += ex.len();
                let mut seen = HashSet::new();
                let mut counts: HashMap<NliLabel, usize> = HashMap::new();
                for x in &ex {
                    ensure!(
                        seen.insert(x.meta.template_id.clone()),
                        "{c:?}: template drawn twice"
                    );
                    *counts.entry(x.label).or_default() += 1;
                    ensure!(x.premise == premise, "{c:?}: premise");
                    let t = applicable
                        .iter()
                        .find(|t| t.id == x.meta.template_id)
                        .ok_or_else(|| {
                            format!("{c:?}: template {} does not apply", x.meta.template_id)
                        })?;
                    ensure!(
                        x.hypothesis
                            == t.verbalize(&ctx, &ent.surface, &w.library.canonical_map)
                                .unwrap(),
                        "{c:?}: hypothesis text"
                    );
                    let sound = match (&c.gold_role, x.label) {
                        (Label::Role(g), NliLabel::Entailment) => &t.role == g,
                        (Label::Role(g), NliLabel::Neutral) => &t.role != g,
                        (Label::Negative, NliLabel::Contradiction) => true,
                        _ => false,
                    };
                    ensure!(sound, "{c:?}: {:?} from role {}", x.label, t.role);
                }
                let n = |l| counts.get(&l).copied().unwrap_or(0);
                match &c.gold_role {
                    Label::Role(g) => {
                        let own = applicable.iter().filter(|t| &t.role == g).count();
                        let other = applicable.len() - own;
                        ensure!(
                            n(NliLabel::Entailment) == own.min(cfg.n_entail),
                            "{c:?}: entail cap"
                        );
                        ensure!(
                            n(NliLabel::Neutral) == other.min(cfg.n_neutral),
                            "{c:?}: neutral cap"
                        );
                    }
                    Label::Negative => {
                        let fits = w
                            .table
                            .allowed_roles(&key, &ent.entity_type)
                            .map_err(|e| e.to_string())?;
                        let want = if fits.is_empty() {
                            excluded += 1;
                            0
                        } else {
                            applicable.len().min(cfg.n_contradict)
                        };
                        ensure!(
                            n(NliLabel::Contradiction) == want,
                            "{c:?}: contradiction count"
                        );
                        let unconstrained =
                            recast_candidate(&c, doc, &w.library, &w.table, &loose, "s")
                                .map_err(|e| e.to_string())?;
                        ensure!(
                            unconstrained.len() == applicable.len().min(cfg.n_contradict),
                            "{c:?}: unconstrained count"
                        );
                        ensure!(
                            ex.iter().all(|x| unconstrained.contains(x)),
                            "{c:?}: constrained ⊄ unconstrained"
                        );
                    }
                }
            }
        }

        let bytes = |exec| {
            let r = recast_corpus(&w.documents, &w.library, &w.table, &cfg, "s", exec).unwrap();
            let mut buf = Vec::new();
            write_examples(&mut buf, &r.examples).unwrap();
            buf
        };
        let first = bytes(Execution::Parallel);
        ensure!(
            first == bytes(Execution::Parallel),
            "seed {seed}: rerun differs"
        );
        ensure!(
            first == bytes(Execution::Sequential),
            "seed {seed}: sequential differs"
        );
        seed += 1;
    }
    Ok(format!(
        "{candidates} candidates over {seed} seeds, {examples} examples, {excluded} negatives excluded by constraints"
    ))
}

// ------------------------------------------------------------- inference

const INSTANCES: u64 = 500;

fn random_judgment(rng: &mut ChaCha8Rng) -> EntailmentJudgment {
    let e = if rng.random_bool(0.5) {
        rng.random_range(0..=10) as f64 / 10.0
    } else {
        rng.random::<f64>()
    };
    let n = rng.random::<f64>() * (1.0 - e);
    EntailmentJudgment::new(e, n, 1.0 - e - n)
}

fn inference_instance(seed: u64) -> (SyntheticWorld, LookupBackend) {
    let w = world(seed, 3, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce);
    let mut lookup = LookupBackend::default();
    for doc in &w.documents {
        for c in generate_candidates(doc) {
            for pair in plan_candidate(&c, doc, &w.library, &w.table)
                .unwrap()
                .pairs()
            {
                if rng.random_bool(0.8) {
                    lookup.insert(pair, random_judgment(&mut rng));
                }
            }
        }
    }
    (w, lookup)
}

fn inference_properties() -> Outcome {
    let mut predictions = 0;
    for seed in 0..INSTANCES {
        let (w, lookup) = inference_instance(seed);
        let scorer = Scorer::new(Arc::new(lookup.clone()), 16, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        // Antitonicity.
        let mut ts: Vec<f64> = (0..4)
            .map(|_| rng.random_range(0..=10) as f64 / 10.0)
            .collect();
        ts.sort_by(f64::total_cmp);
        let mut previous: Option<HashSet<Link>> = None;
        for &t in &ts {
            let cfg = InferenceConfig::with_threshold(t).unwrap();
            let preds = predict_corpus(
                &w.documents,
                &w.library,
                &w.table,
                &scorer,
                &cfg,
                Execution::Sequential,
            )
            .map_err(|e| e.to_string())?;
            let set = predicted_links(&preds.iter().map(|p| p.decision()).collect::<Vec<_>>());
            if let Some(prev) = &previous {
                ensure!(
                    set.is_subset(prev),
                    "seed {seed}: raising threshold to {t} added predictions"
                );
            }
            previous = Some(set);
        }

        // Constraint soundness.
        let cfg = InferenceConfig::default();
        let base = predict_corpus(
            &w.documents,
            &w.library,
            &w.table,
            &scorer,
            &cfg,
            Execution::Parallel,
        )
        .map_err(|e| e.to_string())?;
        predictions += base.len();
        for p in &base {
            let doc = w.documents.iter().find(|d| d.id == p.document_id).unwrap();
            let ev = doc.event(&p.event_id).unwrap();
            let ent = doc.entity(&p.entity_id).unwrap();
            let allowed = w
                .table
                .allowed_roles(&ev.subtype_key(), &ent.entity_type)
                .unwrap();
            if let Label::Role(r) = &p.predicted {
                ensure!(
                    allowed.contains(r),
                    "seed {seed}: {r} predicted outside {allowed:?}"
                );
            }
        }

        // Dominated template insertion.
        let roles: Vec<String> = w.library.role_set().into_iter().collect();
        let role = &roles[rng.random_range(0..roles.len())];
        let extra = Template::parse(
            format!("{}.dominated", role.to_lowercase()),
            role.as_str(),
            "Dominated: {arg} near {trg}.",
            TemplateCategory::ExplicitTrg,
            None,
        )
        .unwrap();
        let mut lib = w.library.clone();
        let mut list = lib.templates(role).unwrap().to_vec();
        list.push(extra.clone());
        lib.set_role(role, list).unwrap();
        let mut extended = lookup.clone();
        for p in &base {
            let Some(max) = p
                .per_template_scores
                .iter()
                .filter(|t| &t.role == role)
                .map(|t| t.entail)
                .reduce(f64::max)
            else {
                continue;
            };
            let doc = w.documents.iter().find(|d| d.id == p.document_id).unwrap();
            let ev = doc.event(&p.event_id).unwrap();
            let ent = doc.entity(&p.entity_id).unwrap();
            let key = ev.subtype_key();
            let ctx = EventContext::new(&ev.trigger_surface, &ev.event_type, &key);
            let h = extra
                .verbalize(&ctx, &ent.surface, &lib.canonical_map)
                .unwrap();
            let e = max * rng.random::<f64>();
            extended.insert(
                PremiseHypothesisPair::new(doc.trigger_sentence(ev).unwrap(), h),
                EntailmentJudgment::new(e, 1.0 - e, 0.0),
            );
        }
        let after = predict_corpus(
            &w.documents,
            &lib,
            &w.table,
            &Scorer::new(Arc::new(extended), 16, true),
            &cfg,
            Execution::Sequential,
        )
        .map_err(|e| e.to_string())?;
        for (a, b) in base.iter().zip(&after) {
            ensure!(
                a.predicted == b.predicted && a.winning_role_score == b.winning_role_score,
                "seed {seed}: dominated template changed {:?} to {:?}",
                a.predicted,
                b.predicted
            );
        }

        // Batched ≡ per candidate.
        let single = Scorer::new(Arc::new(lookup), 1, false);
        for doc in &w.documents {
            let batched = predict_document(doc, &w.library, &w.table, &scorer, &cfg)
                .map_err(|e| e.to_string())?;
            let one_by_one: Vec<_> = generate_candidates(doc)
                .iter()
                .map(|c| predict_role(c, doc, &w.library, &w.table, &single, &cfg))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            ensure!(
                batched == one_by_one,
                "seed {seed}: batched differs from per-candidate"
            );
        }
    }
    Ok(format!(
        "{INSTANCES} instances × 4 properties, {predictions} predictions checked"
    ))
}

// ---------------------------------------------------------------- metrics

fn random_decisions(gold: &EvalGold, roles: &[String], rng: &mut ChaCha8Rng) -> Vec<Decision> {
    gold.candidates
        .iter()
        .map(|c| {
            let predicted = match rng.random_range(0..4) {
                0 | 1 => c.gold_role.clone(),
                2 => Label::Negative,
                _ => Label::Role(roles[rng.random_range(0..roles.len())].clone()),
            };
            Decision {
                document_id: c.document_id.clone(),
                event_id: c.event_id.clone(),
                entity_id: c.entity_id.clone(),
                predicted,
            }
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn metric_oracle() -> Outcome {
    let mut sets = 0;
    let mut unreachable = 0;
    for seed in 0..500u64 {
        let w = generate(&SyntheticConfig {
            documents: 4,
            roles: 5,
            cross_sentence_rate: 0.3,
            coref_rate: 0.5,
            seed,
            ..Default::default()
        });
        let gold = EvalGold::from_documents(&w.documents);
        unreachable += gold.unreachable.len();
        let links = annotated_links(&w.documents);
        let roles: Vec<String> = w.library.role_set().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_decisions(&gold, &roles, &mut rng);
        let b = random_decisions(&gold, &roles, &mut rng);
        sets += 2;

        for d in [&a, &b] {
            let pred = predicted_links(d);
            let tp = pred.intersection(&links).count();
            let fp = pred.len() - tp;
            let fn_ = links.len() - tp;
            let (p, r, f) = prf(tp, fp, fn_);
            let got = score_f1(&gold, d).map_err(|e| e.to_string())?;
            ensure!(
                (got.tp, got.fp, got.fn_) == (tp, fp, fn_),
                "seed {seed}: counts {:?} vs {:?}",
                (got.tp, got.fp, got.fn_),
                (tp, fp, fn_)
            );
            ensure!(
                close(got.precision, p) && close(got.recall, r) && close(got.f1, f),
                "seed {seed}: P/R/F1"
            );
            let all_roles: BTreeSet<&str> =
                pred.iter().chain(&links).map(|l| l.3.as_str()).collect();
            for role in all_roles {
                let rp: HashSet<_> = pred.iter().filter(|l| l.3 == role).collect();
                let rg: HashSet<_> = links.iter().filter(|l| l.3 == role).collect();
                let rtp = rp.intersection(&rg).count();
                let c = got
                    .per_role
                    .get(role)
                    .ok_or_else(|| format!("seed {seed}: role {role} missing"))?;
                ensure!(
                    (c.tp, c.fp, c.fn_) == (rtp, rp.len() - rtp, rg.len() - rtp),
                    "seed {seed}: per-role counts for {role}"
                );
            }
            let coref = score_coref_f1(&gold, d).map_err(|e| e.to_string())?;
            ensure!(
                coref.recall >= got.recall,
                "seed {seed}: coref recall {} < {}",
                coref.recall,
                got.recall
            );
        }

        let (pa, pb) = (predicted_links(&a), predicted_links(&b));
        let diff = recall_diff(&a, &b, &gold).map_err(|e| e.to_string())?;
        let gold_roles: BTreeSet<&str> = links.iter().map(|l| l.3.as_str()).collect();
        ensure!(
            diff.keys().map(String::as_str).collect::<BTreeSet<_>>() == gold_roles,
            "seed {seed}: recall_diff roles"
        );
        for role in gold_roles {
            let rg: Vec<&Link> = links.iter().filter(|l| l.3 == role).collect();
            let n = rg.len();
            let a_only = rg
                .iter()
                .filter(|l| pa.contains(**l) && !pb.contains(**l))
                .count();
            let b_only = rg
                .iter()
                .filter(|l| !pa.contains(**l) && pb.contains(**l))
                .count();
            let both = rg
                .iter()
                .filter(|l| pa.contains(**l) && pb.contains(**l))
                .count();
            let d = &diff[role];
            ensure!(d.support == n, "seed {seed}: support of {role}");
            ensure!(
                close(d.a_only_recall, a_only as f64 / n as f64)
                    && close(d.b_only_recall, b_only as f64 / n as f64)
                    && close(d.overlap_recall, both as f64 / n as f64),
                "seed {seed}: recall diff for {role}"
            );
            ensure!(
                d.same == (a_only == 0 && b_only == 0),
                "seed {seed}: same flag for {role}"
            );
        }
    }
    Ok(format!(
        "{sets} prediction sets, {unreachable} unreachable gold links exercised"
    ))
}

// ----------------------------------------------------------------- splits

const FRACTIONS: [f64; 5] = [0.01, 0.05, 0.1, 0.2, 1.0];

fn split_suite() -> Outcome {
    let seeds = 200u64;
    for seed in 0..seeds {
        let w = world(seed, 40, 5);
        let groups = group_by_event(&w.documents);
        let n = groups.len();
        let spec = SplitSpec::new(FRACTIONS.to_vec(), seed).map_err(|e| e.to_string())?;
        let splits = make_splits(&groups, &spec).map_err(|e| e.to_string())?;
        ensure!(
            splits == make_splits(&groups, &spec).unwrap(),
            "seed {seed}: not deterministic"
        );
        ensure!(
            splits.len() == FRACTIONS.len(),
            "seed {seed}: {} splits",
            splits.len()
        );
        for (s, f) in splits.iter().zip(FRACTIONS) {
            let want = if f == 1.0 {
                n
            } else {
                (f * n as f64).round() as usize
            };
            ensure!(
                s.events.len() == want,
                "seed {seed}: fraction {f} has {} events, want {want}",
                s.events.len()
            );
        }
        for pair in splits.windows(2) {
            let small: HashSet<_> = pair[0].events.iter().collect();
            let large: HashSet<_> = pair[1].events.iter().collect();
            ensure!(
                small.is_subset(&large),
                "seed {seed}: {} ⊄ {}",
                pair[0].fraction,
                pair[1].fraction
            );
        }
        let all: HashSet<_> = groups
            .iter()
            .map(|g| (g.document_id.clone(), g.event_id.clone()))
            .collect();
        ensure!(
            splits[4].events.iter().cloned().collect::<HashSet<_>>() == all,
            "seed {seed}: 100% is not everything"
        );

        let schema = w.library.role_set();
        for s in &splits {
            let stats = split_stats(&s.candidates, &schema);
            let recount: Vec<_> = filter_documents(&w.documents, s)
                .iter()
                .flat_map(generate_candidates)
                .collect();
            ensure!(stats.total == recount.len(), "seed {seed}: total");
            let pos = recount
                .iter()
                .filter(|c| !c.gold_role.is_negative())
                .count();
            ensure!(
                stats.positives == pos && stats.negatives == recount.len() - pos,
                "seed {seed}: pos/neg"
            );
            for role in &schema {
                let k = recount
                    .iter()
                    .filter(|c| c.gold_role.role() == Some(role.as_str()))
                    .count();
                ensure!(
                    stats.per_role.get(role).copied().unwrap_or(0) == k,
                    "seed {seed}: {role} count"
                );
            }
            let mean = schema
                .iter()
                .map(|r| stats.per_role.get(r).copied().unwrap_or(0))
                .sum::<usize>() as f64
                / schema.len() as f64;
            ensure!(
                close(stats.mean_positives_per_role, mean),
                "seed {seed}: mean per role"
            );
        }
    }
    Ok(format!(
        "{seeds} seeds × fractions {FRACTIONS:?}: nested, deterministic, stats recounted"
    ))
}

// ------------------------------------------------------- shipped libraries

fn shipped_libraries() -> Outcome {
    let mut loaded = Vec::new();
    for name in ["ace-main", "ace-linguist"] {
        let raw =
            TemplateLibrary::shipped_json(name).ok_or_else(|| format!("{name} not shipped"))?;
        let lib = TemplateLibrary::from_json(raw).map_err(|e| format!("{name}: {e}"))?;
        lib.validate().map_err(|e| format!("{name}: {e}"))?;
        let roles = lib.role_set().len();
        ensure!(roles == 22, "{name}: {roles} roles");
        loaded.push((name, lib));
    }

    let doc = figure_one();
    let ev = &doc.events[0];
    let idol = doc.entity("e2").ok_or("figure one has no e2")?;
    let key = ev.subtype_key();
    let ctx = EventContext::new(&ev.trigger_surface, &ev.event_type, &key);
    let person: BTreeSet<String> = ["Person".to_string()].into();
    let mut texts = Vec::new();
    for (name, lib) in &loaded {
        let hyps = lib
            .verbalize_role_set(&ctx, &idol.surface, &person)
            .map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            !hyps.is_empty(),
            "{name}: no Person hypothesis for the example"
        );
        texts.push((*name, hyps));
    }
    let main = &texts[0].1;
    ensure!(
        main.iter()
            .any(|h| h.hypothesis == "John D. Idol was hired."),
        "ace-main Person hypotheses: {:?}",
        main.iter().map(|h| &h.hypothesis).collect::<Vec<_>>()
    );
    let linguist = &texts[1].1;
    ensure!(
        linguist
            .iter()
            .any(|h| h.hypothesis == "John D. Idol be hired."),
        "ace-linguist Person hypotheses lack the hiring template"
    );
    Ok(format!(
        "both libraries load and validate with 22 roles; ace-main gives \"John D. Idol was hired.\" ({} Person hypotheses), ace-linguist gives its lemma-form counterpart",
        main.len()
    ))
}

// ----------------------------------------------------------- wire protocol

fn http_post(
    addr: std::net::SocketAddr,
    path: &str,
    body: &[u8],
) -> Result<(u16, Vec<u8>), String> {
    let mut stream = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    stream
        .set_read_timeout(Some(Duration::from_secs(10)))
        .map_err(|e| e.to_string())?;
    let head = format!(
        "POST {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream
        .write_all(head.as_bytes())
        .map_err(|e| e.to_string())?;
    stream.write_all(body).map_err(|e| e.to_string())?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).map_err(|e| e.to_string())?;
    let split = raw
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .ok_or("no header terminator")?;
    let header = String::from_utf8_lossy(&raw[..split]).to_ascii_lowercase();
    let status: u16 = header
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or("bad status line")?;
    let mut payload = raw[split + 4..].to_vec();
    if header.contains("transfer-encoding: chunked") {
        payload = dechunk(&payload)?;
    }
    Ok((status, payload))
}

fn dechunk(mut data: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    loop {
        let eol = data
            .windows(2)
            .position(|w| w == b"\r\n")
            .ok_or("truncated chunk")?;
        let size = usize::from_str_radix(String::from_utf8_lossy(&data[..eol]).trim(), 16)
            .map_err(|e| e.to_string())?;
        data = &data[eol + 2..];
        if size == 0 {
            return Ok(out);
        }
        out.extend_from_slice(&data[..size]);
        data = &data[size + 2..];
    }
}

fn wire_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut table = LookupBackend::default();
    let mut pairs = Vec::new();
    for i in 0..300 {
        let p = PremiseHypothesisPair::new(
            format!("Prämisse {} — \"quoted\"", i % 23),
            format!("hypothesis {i}\n"),
        );
        if rng.random_bool(0.7) {
            table.insert(p.clone(), random_judgment(&mut rng));
        }
        pairs.push(p);
    }
    let server = BackgroundServer::start("127.0.0.1:0", entail_router(Arc::new(table.clone())))
        .map_err(|e| e.to_string())?;
    let direct = Scorer::new(Arc::new(table), 8, false);
    let batches = 100;
    for b in 0..batches {
        let n = rng.random_range(1..40);
        let batch: Vec<PremiseHypothesisPair> = (0..n)
            .map(|_| pairs[rng.random_range(0..pairs.len())].clone())
            .collect();
        let id = format!("batch-{b}");
        let body = serde_json::to_vec(&serde_json::json!({ "id": id, "pairs": batch })).unwrap();
        let (status, got) = http_post(server.addr(), ENTAIL_PATH, &body)?;
        ensure!(status == 200, "batch {b}: status {status}");
        let want = EntailResponse {
            id,
            judgments: direct.score_batch(&batch).map_err(|e| e.to_string())?,
        }
        .to_body();
        ensure!(got == want, "batch {b}: body differs");
    }
    let malformed: &[&str] = &[
        "",
        "not json",
        "{",
        r#"{"id":"x"}"#,
        r#"{"id":"x","pairs":[]}"#,
        r#"{"id":"x","pairs":[{"premise":"p"}]}"#,
        r#"{"id":"x","pairs":[{"premise":"","hypothesis":"h"}]}"#,
        r#"{"id":3,"pairs":[{"premise":"p","hypothesis":"h"}]}"#,
    ];
    for body in malformed {
        let (status, _) = http_post(server.addr(), ENTAIL_PATH, body.as_bytes())?;
        ensure!(status == 400, "malformed {body:?} got {status}");
    }
    Ok(format!(
        "{batches} loopback batches byte-identical; {} malformed bodies → 400",
        malformed.len()
    ))
}

// ------------------------------------------------------------------- main

const CRITERIA: &[Criterion] = &[
    ("AUC reproduction", auc_reproduction),
    ("End-to-end planted-label test", planted_end_to_end),
    ("Recast property suite", recast_properties),
    ("Inference property suite", inference_properties),
    ("Metric oracle equivalence", metric_oracle),
    ("Split suite", split_suite),
    ("Shipped template libraries", shipped_libraries),
    ("Wire-protocol conformance", wire_protocol),
];

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in CRITERIA {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{ms} ms]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{ms} ms]");
            }
        }
    }
    println!("{} passed, {failed} failed", CRITERIA.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
