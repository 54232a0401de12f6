//! One line per release criterion. Run with `cargo test --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use autoquery::answer::{answer_query, build_cooccurrence_model, build_index, confidence};
use autoquery::lexicon::Lexicons;
use autoquery::metrics::{precision_with_interval, utility_breakdown, wilson_interval};
use autoquery::objects::{extract_objects, object_id, CanonicalObject, ObjectTable};
use autoquery::pairing::group_corpuses;
use autoquery::pipeline::{run, Settings};
use autoquery::pruning::{prune_by_confidence, prune_by_rules, NonsenseHistory, PruneDecision, PruneRuleTable, VerbFrameTable};
use autoquery::querygen::{gen_analogy_queries, gen_object_queries, gen_pair_queries, Tense, VerbEntry, VerbLexicon};
use autoquery::service;
use autoquery::workspace::Workspace;
use autoquery::{Interrogative, ObjectType};

use common::*;

const GRANT: &str = "General Grant was in the US Civil War.";

fn grant_end_to_end() {
    let started = Instant::now();
    let lex = Lexicons::builtin();
    let c = corpus("grant", GRANT, &lex);
    assert_eq!(c.documents.len(), 1);
    assert_eq!(c.sentence_count(), 1);
    assert_eq!(c.documents[0].sentences[0].tokens.len(), 8);

    let ex = extract_objects(&c, &lex.gazetteer);
    let names: Vec<&str> = ex.objects.iter().map(|o| o.canonical.as_str()).collect();
    assert_eq!(names, ["General Grant", "US Civil War"]);
    let table = ex.table();

    let qs = gen_object_queries(&ex.objects, Tense::of_corpora(std::slice::from_ref(&c)));
    assert_eq!(qs.len(), 12);
    let mut pruned = BTreeMap::new();
    for q in &qs {
        let d = prune_by_rules(q, &table, &lex.prune_rules, &lex.verb_frames, &lex.comparatives).unwrap();
        pruned.insert(q.surface.clone(), !d.is_keep());
    }
    for s in ["What was General Grant?", "Why was General Grant?", "Who was the US Civil War?"] {
        assert_eq!(pruned.get(s), Some(&true), "{s} should be pruned");
    }
    let expected: Vec<&str> = vec![
        "What was General Grant?",
        "Where was the US Civil War?",
        "Who was the US Civil War?",
        "Why was General Grant?",
    ];
    let mut got: Vec<&str> = pruned.iter().filter(|(_, p)| **p).map(|(s, _)| s.as_str()).collect();
    got.sort();
    assert_eq!(got, expected);

    let out = run(&[c], &lex, &Settings::default()).unwrap();
    assert!(out.queries.iter().any(|q| q.surface == "Who was General Grant?" && q.is_live()));
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
}

fn prune_table_encoding() {
    use Interrogative::*;
    use ObjectType::*;
    let prunes = [
        (Who, Object),
        (Who, Location),
        (Who, Concept),
        (What, Person),
        (Why, Person),
        (Why, Object),
        (Why, Location),
        (Where, Concept),
    ];
    let table = PruneRuleTable::default();
    let builtin = Lexicons::builtin().prune_rules;
    let mut cells = 0;
    for &q in Interrogative::ALL {
        for &t in ObjectType::ALL {
            let want = prunes.contains(&(q, t));
            assert_eq!(table.prunes(q, t), want, "{q}×{t}");
            assert_eq!(builtin.prunes(q, t), want, "{q}×{t} in the shipped table");
            cells += 1;
        }
    }
    assert_eq!(cells, 24);
    assert_eq!(table.cells().count(), 24);
    assert_eq!(table.cells().filter(|c| c.2).count(), 8);
    for &t in ObjectType::ALL {
        let kept = Interrogative::ALL.iter().filter(|&&q| !table.prunes(q, t)).count();
        assert_eq!(kept, 4, "{t}");
    }
}

fn obj(canonical: &str, t: ObjectType) -> CanonicalObject {
    CanonicalObject {
        object_id: object_id(canonical),
        canonical: canonical.to_string(),
        object_type: t,
        mention_count: 1,
        quantified: false,
        article: None,
    }
}

fn verb_frames() {
    let lex = Lexicons::builtin();
    let frames = VerbFrameTable::from_lexicon(&lex.verbs);
    assert!(frames.allows("fight", ObjectType::Person, ObjectType::Concept).unwrap());
    assert!(!frames.allows("eat", ObjectType::Person, ObjectType::Concept).unwrap());

    let mut objects = vec![
        obj("General Grant", ObjectType::Person),
        obj("US Civil War", ObjectType::Concept).with_article("the"),
    ];
    for (name, t) in [("bread", ObjectType::Object), ("Ohio", ObjectType::Location)] {
        objects.push(obj(name, t));
    }
    let table = ObjectTable::new(objects.clone());
    let qs = gen_pair_queries(&objects, &lex.verbs);
    let fight = qs
        .iter()
        .find(|q| q.surface == "Why did General Grant fight the US Civil War?")
        .expect("fight question generated");
    let eat = qs
        .iter()
        .find(|q| q.surface == "Why did General Grant eat the US Civil War?")
        .expect("eat question generated");
    let decide = |q| prune_by_rules(q, &table, &lex.prune_rules, &lex.verb_frames, &lex.comparatives).unwrap();
    assert_eq!(decide(fight), PruneDecision::Keep);
    assert!(!decide(eat).is_keep());

    type Slot = (String, Option<String>, Option<String>);
    let mut by_slot: BTreeMap<Slot, BTreeMap<Interrogative, bool>> = BTreeMap::new();
    for q in qs.iter().filter(|q| q.verb.is_some()) {
        by_slot
            .entry((q.subject.clone(), q.object2.clone(), q.verb.clone()))
            .or_default()
            .insert(q.interrogative.unwrap(), decide(q).is_keep());
    }
    assert!(!by_slot.is_empty());
    for (slot, d) in by_slot {
        assert_eq!(d.get(&Interrogative::Why), d.get(&Interrogative::How), "{slot:?}");
        assert_eq!(d.len(), 2);
    }
}

fn count_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = rng.random_range(0..=30);
        let v = rng.random_range(0..=10);
        let objects: Vec<CanonicalObject> = (0..n)
            .map(|i| {
                let t = ObjectType::ALL[rng.random_range(0..4)];
                obj(&format!("thing {trial} {i}"), t)
            })
            .collect();
        let verbs = VerbLexicon::new(
            (0..v)
                .map(|i| VerbEntry {
                    lemma: format!("verb{i}"),
                    past: format!("verbed{i}"),
                    subject_types: vec![ObjectType::ALL[rng.random_range(0..4)]],
                    object_types: vec![ObjectType::ALL[rng.random_range(0..4)]],
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(gen_object_queries(&objects, Tense::Past).len(), 6 * n);
        assert_eq!(gen_pair_queries(&objects, &verbs).len(), n * n.saturating_sub(1) * (2 + 2 * v));
        assert_eq!(gen_analogy_queries(&objects).len(), n);
    }
}

fn confidence_formula() {
    let lex = Lexicons::builtin();
    let c = corpus("grant", GRANT, &lex);
    let ex = extract_objects(&c, &lex.gazetteer);
    let table = ex.table();
    let index = build_index(std::slice::from_ref(&c));
    let q = gen_object_queries(&ex.objects, Tense::Past)
        .into_iter()
        .find(|q| q.surface == "Who was General Grant?")
        .unwrap();
    let got = answer_query(&q, &table, &lex.tagger, &index, 5).unwrap();
    let expected = 2.0 / (2.0f64 * 5.0).sqrt();
    assert!((got[0].confidence - expected).abs() < 1e-9, "{} vs {expected}", got[0].confidence);
    assert!((expected - 0.632).abs() < 1e-3);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words: Vec<String> = (0..15).map(|i| format!("w{i}")).collect();
    for _ in 0..10_000 {
        let mut pick = || {
            words
                .iter()
                .filter(|_| rng.random_bool(0.3))
                .cloned()
                .collect::<std::collections::BTreeSet<String>>()
        };
        let (a, b) = (pick(), pick());
        let conf = confidence(&a, &b);
        assert!((0.0..=1.0).contains(&conf), "{conf}");
    }
}

fn cooccurrence_oracle() {
    let lex = Lexicons::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut compared = 0;
    for trial in 0..40 {
        let n = rng.random_range(3..=20);
        let c = random_corpus(&mut rng, &format!("r{trial}"), n, &lex);
        let corpora = [c];
        let ex = autoquery::pipeline::extract(&corpora, &lex);
        let min_count = rng.random_range(1..=3);
        let model = build_cooccurrence_model(&corpora, &ex, min_count);
        let oracle = Oracle::new(&corpora, &ex, min_count);

        let ids: Vec<&str> = model.vocabulary().map(|(id, _)| id).collect();
        assert_eq!(ids, oracle.objects.iter().map(String::as_str).collect::<Vec<_>>());
        for o in &oracle.objects {
            let dense = &oracle.ppmi[o];
            match model.vector(o) {
                None => assert!(dense.iter().all(|&x| x == 0.0), "{o} should have a vector"),
                Some(v) => {
                    for (j, l) in oracle.lemmas.iter().enumerate() {
                        let got = v.get(l).copied().unwrap_or(0.0);
                        assert!((got - dense[j]).abs() < 1e-9, "ppmi({o},{l}) {got} vs {}", dense[j]);
                    }
                    assert!(v.keys().all(|l| oracle.lemmas.contains(l)));
                }
            }
        }
        for a in &oracle.objects {
            for b in &oracle.objects {
                let got = model.similarity(a, b).unwrap();
                let want = oracle.similarity(a, b);
                assert!((got - want).abs() < 1e-9, "sim {got} vs {want}");
                match (model.phi(a, b), oracle.phi(a, b)) {
                    (None, None) => {}
                    (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9, "phi {x} vs {y}"),
                    other => panic!("phi presence differs: {other:?}"),
                }
                compared += 1;
            }
            let k_max = oracle.objects.len();
            let want = oracle.ranking(a);
            let got = model.nearest(a, k_max).unwrap();
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((g.score - w.1).abs() < 1e-9);
                assert_eq!(g.object_id, w.0);
            }
            for b in &oracle.objects {
                for k in 1..=3 {
                    assert_eq!(
                        model.reverse_check(a, b, k).unwrap(),
                        oracle.reverse_check(a, b, k),
                        "reverse_check k={k}"
                    );
                }
            }
        }
    }
    assert!(compared > 500, "only {compared} pairs compared");
}

fn monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let lex = Lexicons::builtin();
    let c = corpus("grant", GRANT, &lex);
    let ex = extract_objects(&c, &lex.gazetteer);
    let q = gen_object_queries(&ex.objects, Tense::Past).remove(0);
    for _ in 0..2000 {
        let cands: Vec<autoquery::answer::AnswerCandidate> = (0..rng.random_range(0..4))
            .map(|i| autoquery::answer::AnswerCandidate {
                sent_id: autoquery::answer::SentId {
                    doc_id: "d".into(),
                    index: i,
                    corpus_id: "c".into(),
                },
                confidence: rng.random_range(0.0..=1.0),
                matched_terms: Default::default(),
            })
            .collect();
        let t1: f64 = rng.random_range(0.0..=1.0);
        let t2: f64 = rng.random_range(t1..=1.0);
        let d1 = prune_by_confidence(&q, &cands, t1, &mut NonsenseHistory::new(), 1).unwrap();
        let d2 = prune_by_confidence(&q, &cands, t2, &mut NonsenseHistory::new(), 1).unwrap();
        assert!(d1.is_keep() || !d2.is_keep(), "pruned at {t1} but kept at {t2}");
    }

    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let (ids, _, scores) = random_scores(&mut rng, n);
        let t1: f64 = rng.random_range(0.0..=1.0);
        let t2: f64 = rng.random_range(t1..=1.0);
        let loose = group_corpuses(&ids, &scores, t1).unwrap();
        let strict = group_corpuses(&ids, &scores, t2).unwrap();
        assert!(strict.len() >= loose.len());
        for g in &strict {
            assert!(loose.iter().any(|l| g.iter().all(|x| l.contains(x))), "{g:?} splits across {loose:?}");
        }
    }

    for trial in 0..30 {
        let c = random_corpus(&mut rng, &format!("m{trial}"), 15, &lex);
        let corpora = [c];
        let ex = autoquery::pipeline::extract(&corpora, &lex);
        let model = build_cooccurrence_model(&corpora, &ex, 1);
        let ids: Vec<String> = model.vocabulary().map(|(id, _)| id.to_string()).collect();
        for a in &ids {
            for b in &ids {
                let mut before = false;
                for k in 1..=ids.len() {
                    let now = model.reverse_check(a, b, k).unwrap();
                    assert!(!before || now, "reverse_check flipped off at k={k}");
                    before = now;
                }
            }
        }
    }
}

fn wilson() {
    let (lo, hi) = wilson_interval(15, 20, 1.96).unwrap();
    let direct = |k: f64, n: f64, z: f64| {
        let p = k / n;
        let centre = p + z * z / (2.0 * n);
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
        let d = 1.0 + z * z / n;
        ((centre - half) / d, (centre + half) / d)
    };
    let (dl, dh) = direct(15.0, 20.0, 1.96);
    assert!((lo - dl).abs() < 1e-3 && (hi - dh).abs() < 1e-3);
    assert!((lo - 0.531).abs() < 1e-3 && (hi - 0.888).abs() < 1e-3, "[{lo}, {hi}]");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=500);
        let k = rng.random_range(0..=n);
        let z = rng.random_range(0.0..4.0);
        let (lo, hi) = wilson_interval(k, n, z).unwrap();
        let p = k as f64 / n as f64;
        assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0, "k={k} n={n} z={z}");
    }
}

fn grouping_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let (ids, u, scores) = random_scores(&mut rng, n);
        let tau = (rng.random_range(0..=20) as f64) / 20.0;
        assert_eq!(group_corpuses(&ids, &scores, tau).unwrap(), reachability_groups(&ids, &u, tau));
    }
}

fn determinism() {
    let started = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let ws = build_workspace(a.path());
    let sentences: usize = ws.corpora().unwrap().iter().map(|c| c.sentence_count()).sum();
    assert!(sentences <= 200, "{sentences} sentences");
    let first = snapshot(a.path());
    run_stages(&ws);
    let second = snapshot(a.path());
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (k, v) in &first {
        assert!(second[k] == *v, "{k} changed on rerun");
    }
    let b = tempfile::tempdir().unwrap();
    build_workspace(b.path());
    assert!(snapshot(b.path()) == first, "a fresh workspace differs");
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
}

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

fn post_label(body: &Value) -> Request<Body> {
    Request::post("/api/review/label")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn label_replay() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ws = build_workspace(dir.path());
    let theta = ws.config().unwrap().settings.theta;
    let items = ws.review_items().unwrap();
    assert!(items.len() >= 10);

    // Record a session with two reviewers, one of whom revises a label.
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let cats = ["UsefulInteresting", "UsefulNotInteresting", "Nonsensical"];
    let mut session = Vec::new();
    for (i, item) in items.iter().enumerate() {
        for reviewer in ["ana", "ben"] {
            if reviewer == "ben" && i % 3 == 0 {
                continue;
            }
            let correct = match rng.random_range(0..3) {
                0 => Value::Null,
                1 => json!(true),
                _ => json!(false),
            };
            session.push(json!({
                "query_id": item.query_id,
                "category": cats[rng.random_range(0..3)],
                "answer_correct": correct,
                "reviewer": reviewer,
            }));
        }
    }
    session.push(json!({"query_id": items[0].query_id, "category": "Nonsensical", "answer_correct": false, "reviewer": "ana"}));

    let live = rt.block_on(async {
        let app = service::router(service::load_state(Workspace::open(dir.path()).unwrap(), theta).unwrap());
        for body in &session {
            let (status, _) = call(&app, post_label(body)).await;
            assert_eq!(status, StatusCode::OK);
        }
        let (status, m) = call(&app, Request::get("/api/metrics").body(Body::empty()).unwrap()).await;
        assert_eq!(status, StatusCode::OK);
        m
    });

    // Offline replay of the recorded log.
    let log = ws.labels().unwrap();
    assert_eq!(log.len(), session.len());
    let precision = serde_json::to_value(precision_with_interval(&log, 1.96).unwrap()).unwrap();
    let utility = serde_json::to_value(utility_breakdown(&log)).unwrap();
    assert_eq!(live["precision"], precision);
    assert_eq!(live["utility_breakdown"], utility);
    assert_eq!(serde_json::to_value(ws.precision_report(1.96).unwrap()).unwrap(), precision);
    assert_eq!(serde_json::to_value(ws.utility_report().unwrap()).unwrap(), utility);

    // A restarted service over the same log reports the same numbers.
    let restarted = rt.block_on(async {
        let app = service::router(service::load_state(Workspace::open(dir.path()).unwrap(), theta).unwrap());
        call(&app, Request::get("/api/metrics").body(Body::empty()).unwrap()).await.1
    });
    assert_eq!(restarted, live);

    // Replaying the session into a second workspace gives the same log.
    let other = tempfile::tempdir().unwrap();
    build_workspace(other.path());
    let replayed = rt.block_on(async {
        let app = service::router(service::load_state(Workspace::open(other.path()).unwrap(), theta).unwrap());
        for l in &log {
            let body = json!({
                "query_id": l.query_id,
                "category": l.category.as_str(),
                "answer_correct": l.answer_correct,
                "reviewer": l.reviewer,
            });
            assert_eq!(call(&app, post_label(&body)).await.0, StatusCode::OK);
        }
        call(&app, Request::get("/api/metrics").body(Body::empty()).unwrap()).await.1
    });
    assert_eq!(replayed, live);
    assert_eq!(
        std::fs::read(dir.path().join("labels/labels.jsonl")).unwrap(),
        std::fs::read(other.path().join("labels/labels.jsonl")).unwrap()
    );
}

fn main() -> ExitCode {
    let criteria: &[(&str, fn())] = &[
        ("grant fixture end to end", grant_end_to_end),
        ("interrogative x type prune table", prune_table_encoding),
        ("verb frames and how/why parallelism", verb_frames),
        ("query count identities", count_identities),
        ("retrieval confidence formula and bounds", confidence_formula),
        ("co-occurrence model against brute force", cooccurrence_oracle),
        ("monotonicity in theta, tau and k", monotonicity),
        ("wilson interval", wilson),
        ("corpus grouping against reachability", grouping_oracle),
        ("workspace rerun determinism", determinism),
        ("label log replay", label_replay),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(()) => println!("PASS {name} ({:.2?})", started.elapsed()),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
