//! Probes, evaluation runs and rankings over scripted fixtures.

mod common;

use std::sync::Arc;

use communitylm::community::{Community, CommunityLabel};
use communitylm::interface::probe::{run_id, ContextMode};
use communitylm::interface::{probe, rank, run_eval, run_evals, Engine, EvalOptions, ProbeError, ProbeSpec, ResponseCache};
use communitylm::promptgen::{Fixture, FixtureEntry, PromptTemplate, WeightedText};
use communitylm::survey::GrammaticalNumber;

use common::{gold_engine, planted_fixture};

#[tokio::test]
async fn fauci_probe_shows_the_planted_ordering() {
    let engine = gold_engine();
    let r = probe(&engine, &ProbeSpec::new("ftfauci1", PromptTemplate::CopulaA, 200, 1)).await.unwrap();
    assert_eq!(r.prompt, "Dr. Anthony Fauci is a");
    assert_eq!(r.question_id.as_deref(), Some("ftfauci1"));
    assert!(r.democrat.stance > r.republican.stance);
    assert_eq!(r.predicted, CommunityLabel::D);
    for p in [&r.democrat, &r.republican] {
        assert!((-1.0..=1.0).contains(&p.stance));
        assert_eq!(p.n, 200);
        assert_eq!(p.counts.positive + p.counts.neutral + p.counts.negative, 200);
        assert_eq!(p.sample.len(), 20);
        assert!(p.top_words.len() <= 5);
        assert!(!p.cache_hit);
    }
}

#[tokio::test]
async fn subjects_resolve_by_name() {
    let engine = gold_engine();
    let r = probe(&engine, &ProbeSpec::new("Dr. Anthony Fauci", PromptTemplate::Copula, 20, 0)).await.unwrap();
    assert_eq!(r.question_id.as_deref(), Some("ftfauci1"));
    let r = probe(&engine, &ProbeSpec::new("black people", PromptTemplate::Copula, 20, 0)).await.unwrap();
    assert_eq!(r.prompt, "Black people are");
}

#[tokio::test]
async fn cached_probes_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let engine = gold_engine().with_cache(ResponseCache::new(dir.path()));
    let spec = ProbeSpec::new("ftfauci1", PromptTemplate::CopulaA, 150, 4);
    let first = probe(&engine, &spec).await.unwrap();
    let second = probe(&engine, &spec).await.unwrap();
    let third = probe(&engine, &spec).await.unwrap();
    assert!(!first.democrat.cache_hit && !first.republican.cache_hit);
    assert!(second.democrat.cache_hit && second.republican.cache_hit);
    let bytes = |r| serde_json::to_vec(r).unwrap();
    assert_eq!(bytes(&second), bytes(&third));
    // apart from the hit flags the first answer is the same too
    let mut unflagged = second.clone();
    unflagged.democrat.cache_hit = false;
    unflagged.republican.cache_hit = false;
    assert_eq!(bytes(&first), bytes(&unflagged));
}

#[tokio::test]
async fn uncached_scripted_probes_are_referentially_transparent() {
    let engine = gold_engine();
    let spec = ProbeSpec::new("ftmetoo", PromptTemplate::CopulaThe, 120, 2);
    let a = serde_json::to_vec(&probe(&engine, &spec).await.unwrap()).unwrap();
    let b = serde_json::to_vec(&probe(&engine, &spec).await.unwrap()).unwrap();
    assert_eq!(a, b);
}

#[tokio::test]
async fn cache_keys_do_not_alias_across_configs() {
    let dir = tempfile::tempdir().unwrap();
    let engine = gold_engine().with_cache(ResponseCache::new(dir.path()));
    probe(&engine, &ProbeSpec::new("ftfauci1", PromptTemplate::CopulaA, 50, 1)).await.unwrap();
    for spec in [
        ProbeSpec::new("ftfauci1", PromptTemplate::CopulaThe, 50, 1),
        ProbeSpec::new("ftfauci1", PromptTemplate::CopulaA, 51, 1),
        ProbeSpec::new("ftfauci1", PromptTemplate::CopulaA, 50, 2),
    ] {
        let r = probe(&engine, &spec).await.unwrap();
        assert!(!r.democrat.cache_hit, "{spec:?} aliased a cached entry");
    }
}

#[tokio::test]
async fn free_text_needs_a_number() {
    let engine = Engine::scripted(Fixture {
        entries: Community::BOTH
            .iter()
            .map(|&c| FixtureEntry {
                community: c,
                prompt_prefix: String::new(),
                templates: vec![WeightedText { text: "hero".into(), weight: 1.0 }],
            })
            .collect(),
    });
    let mut spec = ProbeSpec::new("pineapple pizza", PromptTemplate::Copula, 10, 0);
    let err = probe(&engine, &spec).await.unwrap_err();
    assert!(matches!(err, ProbeError::Validation(_)), "{err:?}");
    spec.number = Some(GrammaticalNumber::Singular);
    let r = probe(&engine, &spec).await.unwrap();
    assert_eq!(r.prompt, "pineapple pizza is");
    assert!(r.question_id.is_none());
    assert!(r.tie);
    assert_eq!(r.predicted, CommunityLabel::D);
    assert!(matches!(
        probe(&engine, &ProbeSpec::new("  ", PromptTemplate::Copula, 10, 0)).await,
        Err(ProbeError::Validation(_))
    ));
    assert!(matches!(
        probe(&engine, &ProbeSpec::new("ftfauci1", PromptTemplate::Copula, 0, 0)).await,
        Err(ProbeError::Validation(_))
    ));
}

#[tokio::test]
async fn context_clauses() {
    let engine = gold_engine();
    let mut spec = ProbeSpec::new("ftbiden1", PromptTemplate::CopulaThe, 10, 0);
    spec.context = ContextMode::Own;
    let r = probe(&engine, &spec).await.unwrap();
    assert_eq!(r.democrat.prompt, "As a Democrat, I think Joe Biden is the");
    assert_eq!(r.republican.prompt, "As a Republican, I think Joe Biden is the");
    assert_eq!(r.prompt, "Joe Biden is the");
    spec.context = "r".parse().unwrap();
    let r = probe(&engine, &spec).await.unwrap();
    assert_eq!(r.democrat.prompt, "As a Republican, I think Joe Biden is the");
    assert!("x".parse::<ContextMode>().is_err());
}

#[tokio::test]
async fn generator_failures_name_the_community() {
    // republican side has no entry for anything
    let fixture = Fixture {
        entries: vec![FixtureEntry {
            community: Community::Democrat,
            prompt_prefix: String::new(),
            templates: vec![WeightedText { text: "hero".into(), weight: 1.0 }],
        }],
    };
    let engine = Engine::scripted(fixture);
    match probe(&engine, &ProbeSpec::new("ftfauci1", PromptTemplate::CopulaA, 10, 0)).await {
        Err(ProbeError::Generation { community, .. }) => assert_eq!(community, Community::Republican),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn gold_fixture_scores_perfectly_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let engine = gold_engine().with_runs_dir(dir.path());
    let report = run_eval(&engine, PromptTemplate::CopulaThe, 100, 0).await.unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.per_item.len(), 30);
    let ids: std::collections::HashSet<_> = report.per_item.iter().map(|r| r.question_id.as_str()).collect();
    assert_eq!(ids.len(), 30);
    assert_eq!(report.run_id, run_id(&engine, PromptTemplate::CopulaThe, 100, 0));
    let on_disk = communitylm::eval::read_report(dir.path(), &report.run_id).unwrap();
    assert_eq!(on_disk, report);
}

#[tokio::test]
async fn planted_surname_misses_score_93_33() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::scripted(planted_fixture(&["ftillegal", "ftbigbusiness"])).with_runs_dir(dir.path());
    let report = run_eval(&engine, PromptTemplate::CopulaThe, 200, 0).await.unwrap();
    let mut errors = report.errors.clone();
    errors.sort();
    assert_eq!(errors, ["ftbigbusiness", "ftillegal"]);
    assert!((report.accuracy - 0.9333).abs() < 1e-4);
    assert!((report.weighted_f1 - 0.9333).abs() < 1e-4);
}

#[tokio::test]
async fn failed_items_keep_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut fixture = planted_fixture(&[]);
    fixture.entries.retain(|e| !e.prompt_prefix.is_empty() && !e.prompt_prefix.ends_with("Mike Pence"));
    let engine = Engine::scripted(fixture).with_runs_dir(dir.path());
    let err = run_eval(&engine, PromptTemplate::CopulaThe, 20, 0).await.unwrap_err();
    let ProbeError::RunFailed { run_id, failed, first } = err else { panic!("{err:?}") };
    assert_eq!(failed, 1);
    assert!(first.starts_with("ftpence1"), "{first}");
    let partial: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join(&run_id).join("partial.json")).unwrap()).unwrap();
    assert_eq!(partial["completed"].as_array().unwrap().len(), 29);
    assert!(!dir.path().join(&run_id).join("report.json").exists());
}

#[tokio::test]
async fn repeated_runs_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let engine = gold_engine().with_runs_dir(dir.path());
    let opts = EvalOptions { template: PromptTemplate::CopulaA, n: 50, seed: 10, runs: 3 };
    let (reports, agg) = run_evals(&engine, &opts).await.unwrap();
    assert_eq!(reports.len(), 3);
    assert_eq!(agg.n_runs, 3);
    assert_eq!(agg.accuracy.mean, 1.0);
    let ids: std::collections::HashSet<_> = reports.iter().map(|r| r.run_id.clone()).collect();
    assert_eq!(ids.len(), 3);
    assert!(run_evals(&engine, &EvalOptions { runs: 0, ..opts }).await.is_err());
}

#[tokio::test]
async fn rankings_cover_the_persons_in_order() {
    let engine = Arc::new(gold_engine());
    for c in Community::BOTH {
        let r = rank(&engine, c, PromptTemplate::CopulaThe, 100, 0).await.unwrap();
        assert_eq!(r.entries.len(), 16);
        assert!(r.entries.windows(2).all(|w| w[0].stance >= w[1].stance));
        // persons the community's side favors come first
        let top = engine.catalog.get(&r.entries[0].subject).unwrap();
        assert_eq!(top.gold_label().unwrap(), c.label());
    }
}
