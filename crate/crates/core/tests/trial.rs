use std::collections::BTreeMap;
use std::sync::Arc;

use affectloop::policy::{feature_dim, PolicyConfig, PolicyModel, Vocabulary};
use affectloop::trial::*;
use affectloop::*;

fn reason(s: &str) -> RejectReason {
    serde_json::from_value(serde_json::Value::String(s.into())).unwrap()
}

fn fixture_sessions() -> Vec<(TrialSession, Vec<RejectReason>)> {
    include_str!("fixtures/sessions.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('|').map(str::trim).collect();
            let rating = match cols[1] {
                "-" => None,
                r => {
                    let (ok, s) = r.split_once(' ').unwrap();
                    Some(Rating { success: ok == "yes", sentiment: s.parse().unwrap() })
                }
            };
            let texts: Vec<&str> = if cols[3].is_empty() { vec![] } else { cols[3].split("//").map(str::trim).collect() };
            let turns = texts
                .iter()
                .enumerate()
                .map(|(i, t)| TrialTurn {
                    index: i,
                    user_text: t.to_string(),
                    user_acts: vec![],
                    perceived_emotion: UserEmotion::Neutral,
                    system_acts: if cols[2] == "y" && i == 0 {
                        vec![SemanticAct::recommend("restaurant", "name", "the jade oven")]
                    } else {
                        vec![SemanticAct::request("restaurant", "area")]
                    },
                    conduct: Conduct::Neutral,
                    system_text: String::new(),
                    clarification: false,
                })
                .collect();
            let session = TrialSession {
                id: cols[0].into(),
                variant: Variant::Emotional,
                checkpoint: EXPERT_CHECKPOINT.into(),
                seed: 0,
                goal: UserGoal { domains: vec![] },
                goal_text: String::new(),
                turns,
                rating,
                closed: true,
            };
            let want = if cols[4] == "kept" { vec![] } else { cols[4].split(',').map(|r| reason(r.trim())).collect() };
            (session, want)
        })
        .collect()
}

#[test]
fn quality_fixture_matches_hand_labels() {
    let fixture = fixture_sessions();
    assert_eq!(fixture.len(), 30);
    let rules = QualityRules::default();
    for (s, want) in &fixture {
        assert_eq!(&rejection_reasons(s, &rules), want, "{}", s.id);
    }
    let sessions: Vec<TrialSession> = fixture.iter().map(|(s, _)| s.clone()).collect();
    let q = quality_filter(&sessions, &rules);
    assert_eq!(q.kept.len(), fixture.iter().filter(|(_, w)| w.is_empty()).count());
    let report = trial_report(&sessions, &rules);
    let kept: Vec<&TrialSession> = sessions.iter().filter(|s| q.kept.contains(&s.id)).collect();
    let v = &report.by_variant[&Variant::Emotional];
    assert_eq!(v.sessions, kept.len());
    let ratings: Vec<Rating> = kept.iter().map(|s| s.rating.unwrap()).collect();
    let mean = ratings.iter().map(|r| r.sentiment as f64).sum::<f64>() / ratings.len() as f64;
    assert!((v.mean_rating - mean).abs() < 1e-12);
}

fn service(dir: &std::path::Path) -> TrialService {
    let o = Arc::new(Ontology::desk());
    let model = PolicyModel::new(PolicyConfig::default(), Vocabulary::from_ontology(&o), feature_dim(&o)).unwrap();
    let stacks = BTreeMap::from([("untrained".to_string(), Stack::Policy(Arc::new(model)))]);
    TrialService::open(dir, o, stacks, TrialConfig { max_turns: 4, ..TrialConfig::default() }).unwrap()
}

#[test]
fn sessions_have_goal_text_and_reproducible_goals() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let a = svc.create_session(Variant::Emotional, EXPERT_CHECKPOINT, Some(7)).unwrap();
    let b = svc.create_session(Variant::Baseline, EXPERT_CHECKPOINT, Some(7)).unwrap();
    assert_eq!(a.goal, b.goal);
    assert_ne!(a.id, b.id);
    assert!(a.goal_text.contains("You are looking for"));
    assert!(matches!(svc.create_session(Variant::Emotional, "missing", None), Err(Error::NotFound(_))));
}

#[test]
fn restaurant_request_gets_a_restaurant_reply() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let s = svc.create_session(Variant::Emotional, EXPERT_CHECKPOINT, Some(1)).unwrap();
    let t = svc.post_message(&s.id, "I want an italian restaurant").unwrap();
    assert!(t.user_acts.iter().any(|a| a.domain == "restaurant"));
    assert!(t.system_acts.iter().any(|a| a.domain == "restaurant"), "{:?}", t.system_acts);
    assert!(!t.system_text.is_empty());
}

#[test]
fn gibberish_gets_clarification_and_leaves_state_alone() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let s = svc.create_session(Variant::Emotional, EXPERT_CHECKPOINT, Some(1)).unwrap();
    svc.post_message(&s.id, "I want an italian restaurant").unwrap();
    let t = svc.post_message(&s.id, "blorp zzkt vrrm").unwrap();
    assert!(t.clarification);
    assert_eq!(t.system_text, CLARIFICATION);
    assert!(t.system_acts.is_empty());
    let replayed = svc.replay(&s.id).unwrap();
    assert_eq!(replayed[1], CLARIFICATION);
}

#[test]
fn turn_cap_closes_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let s = svc.create_session(Variant::Emotional, EXPERT_CHECKPOINT, Some(2)).unwrap();
    for _ in 0..3 {
        svc.post_message(&s.id, "I want a hotel in the north").unwrap();
    }
    let last = svc.post_message(&s.id, "I want a hotel in the north").unwrap();
    assert!(last.system_text.ends_with(CLOSING));
    assert!(svc.session(&s.id).unwrap().closed);
    assert!(matches!(svc.post_message(&s.id, "hello"), Err(Error::Conflict(_))));
}

#[test]
fn rating_rules() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let s = svc.create_session(Variant::Emotional, EXPERT_CHECKPOINT, Some(3)).unwrap();
    assert!(matches!(svc.submit_rating(&s.id, true, 5), Err(Error::Precondition(_))));
    svc.post_message(&s.id, "I want a cheap hotel").unwrap();
    assert!(matches!(svc.submit_rating(&s.id, true, 6), Err(Error::Validation(_))));
    assert_eq!(svc.submit_rating(&s.id, true, 5).unwrap(), Rating { success: true, sentiment: 5 });
    assert!(svc.session(&s.id).unwrap().closed);
    assert!(matches!(svc.submit_rating(&s.id, true, 5), Err(Error::Conflict(_))));
}

#[test]
fn baseline_variant_speaks_neutrally() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    for seed in 0..5 {
        let s = svc.create_session(Variant::Baseline, "untrained", Some(seed)).unwrap();
        for text in ["I want a cheap hotel in the east", "this is useless and terrible", "what is the phone number"] {
            let t = svc.post_message(&s.id, text).unwrap();
            assert_eq!(t.conduct, Conduct::Neutral);
        }
    }
}

#[test]
fn sessions_survive_restart_and_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (id, texts) = {
        let svc = service(dir.path());
        let s = svc.create_session(Variant::Emotional, "untrained", Some(4)).unwrap();
        let mut texts = Vec::new();
        for m in ["I need an expensive restaurant in the south", "what is the address", "great thanks"] {
            texts.push(svc.post_message(&s.id, m).unwrap().system_text);
        }
        (s.id, texts)
    };
    let svc = service(dir.path());
    let s = svc.session(&id).unwrap();
    assert_eq!(s.turns.iter().map(|t| t.system_text.clone()).collect::<Vec<_>>(), texts);
    assert_eq!(svc.replay(&id).unwrap(), texts);
    svc.post_message(&id, "and the postcode please").unwrap();
    assert_eq!(svc.session(&id).unwrap().turns.len(), 4);
}

#[test]
fn report_counts_kept_sessions_only() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    let good = svc.create_session(Variant::Emotional, EXPERT_CHECKPOINT, Some(5)).unwrap();
    for m in ["I want an italian restaurant in the centre", "what is the phone number please", "thank you goodbye"] {
        svc.post_message(&good.id, m).unwrap();
    }
    svc.submit_rating(&good.id, true, 4).unwrap();
    let junk = svc.create_session(Variant::Emotional, EXPERT_CHECKPOINT, Some(6)).unwrap();
    for m in ["??", "!!", "x"] {
        svc.post_message(&junk.id, m).unwrap();
    }
    svc.submit_rating(&junk.id, false, 1).unwrap();
    let r = svc.report();
    assert_eq!(r.total_sessions, 2);
    assert_eq!(r.kept, 1);
    assert_eq!(r.rejected.len(), 1);
    assert_eq!(r.rejected[0].0, junk.id);
    let v = &r.by_variant[&Variant::Emotional];
    assert_eq!((v.sessions, v.success_rate, v.mean_rating, v.mean_valence), (1, 1.0, 4.0, 0.5));
}
